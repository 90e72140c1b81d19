mod common;

use common::{brute_closed_walks, dense_top_eigenvalue, lanczos_top_eigenvalue};
use num_bigint::BigUint;
use num_rational::BigRational;
use proptest::prelude::*;
use spbuild::coeffs::make_field;
use spbuild::graph::*;
use spbuild::lattices::SymplecticSpace;
use spbuild::spectral::*;

/// Top adjacency eigenvalues of the balls `B_1..B_4` around the origin at
/// `(n, q) = (2, 2)`, from dense diagonalization (`B_1..B_3`) and Lanczos (`B_4`).
const BALL_EIGENVALUES_2_2: [f64; 4] = [3.872983346207417, 6.40312423743285, 7.825210001059682, 8.68586420689197];

fn graph(p: u64, n: usize, radius: usize) -> SpecialGraph {
    let sp = SymplecticSpace::for_radius(make_field(p, 1).unwrap(), n, radius).unwrap();
    SpecialGraph::new(sp, 1 << 30).unwrap()
}

#[test]
fn power_iteration_matches_dense_eigenvalues() {
    let g = graph(2, 2, 3);
    for r in 1..=3 {
        let b = ball(&g, g.origin(), r, DEFAULT_BALL_GUARD).unwrap();
        let dense = dense_top_eigenvalue(&b.adjacency);
        assert!((dense - BALL_EIGENVALUES_2_2[r - 1]).abs() < 1e-9);
        assert!((power_iteration(&b, DEFAULT_TOL).unwrap() - dense).abs() < 1e-8);
        assert!((lanczos_top_eigenvalue(&b.adjacency, 200) - dense).abs() < 1e-9);
    }
    let g = graph(3, 2, 2);
    let b = ball(&g, g.origin(), 2, DEFAULT_BALL_GUARD).unwrap();
    let dense = dense_top_eigenvalue(&b.adjacency);
    assert!((power_iteration(&b, DEFAULT_TOL).unwrap() - dense).abs() < 1e-8);
    assert!(dense < rho_closed(2, 3).to_f64());
}

#[test]
fn first_ball_is_a_star() {
    let g = graph(2, 2, 1);
    let b = ball(&g, g.origin(), 1, DEFAULT_BALL_GUARD).unwrap();
    assert!((power_iteration(&b, DEFAULT_TOL).unwrap() - 15f64.sqrt()).abs() < 1e-9);
}

#[test]
fn closed_walks_match_path_enumeration() {
    let g = graph(2, 2, 3);
    let o = g.origin();
    let b = ball(&g, o.clone(), 3, DEFAULT_BALL_GUARD).unwrap();
    let counts = closed_walk_counts(&b, 2).unwrap();
    assert_eq!(counts[1], BigUint::from(brute_closed_walks(&g, &o, 2)));
    assert_eq!(counts[2], BigUint::from(brute_closed_walks(&g, &o, 4)));
    assert_eq!(counts[2], BigUint::from(615u32));
    let walks = return_probabilities(&b, 15, 3, DEFAULT_EXACT_WALK_STEPS).unwrap();
    assert_eq!(walks[0].exact, Some(BigRational::new(1.into(), 15.into())));
    assert_eq!(walks[1].exact, Some(BigRational::new(41.into(), 3375.into())));
}

#[test]
fn walk_bounds_rise_towards_rho() {
    let g = graph(2, 2, 4);
    let b = ball(&g, g.origin(), 4, DEFAULT_BALL_GUARD).unwrap();
    let rho = rho_closed(2, 2).to_f64();
    let walks = return_probabilities(&b, 15, 4, 2).unwrap();
    for w in walks.windows(2) {
        assert!(w[1].bound >= w[0].bound);
    }
    assert!(walks.iter().all(|w| w.bound <= rho + 1e-9));
}

proptest! {
    #[test]
    fn orbit_sum_equals_closed_form(n in 1usize..=12, q in 2u64..=9) {
        prop_assert_eq!(rho_orbit_sum(n, q).unwrap(), rho_closed(n as u32, q));
    }

    #[test]
    fn inequality_holds_and_degrees_stay_below_sl(n in 2u32..=6, q in prop::sample::select(vec![2u64, 3, 4, 5, 7, 8, 9, 11, 13])) {
        let (lhs, rhs, ok) = expansion_inequality(n, q);
        prop_assert!(ok && lhs < rhs);
        prop_assert!(degree_closed(n, q) < sl_degree(2 * n, q));
    }
}

#[test]
fn sl_unit_ball_is_not_a_star() {
    // Neighbors of the origin lifting nested subspaces are adjacent to each
    // other, so the radius-1 ball has 65 + #{U ⊊ W proper} edges and its top
    // eigenvalue is well above the star value sqrt(65).
    use spbuild::fq_symplectic::{enumerate_subspaces, DEFAULT_ENUM_GUARD};
    let f = make_field(2, 1).unwrap();
    let subs: Vec<_> = (1..4).flat_map(|k| enumerate_subspaces(4, k, &f, DEFAULT_ENUM_GUARD).unwrap()).collect();
    let nested = subs
        .iter()
        .flat_map(|u| subs.iter().map(move |w| (u, w)))
        .filter(|(u, w)| u.dim() < w.dim() && u.basis().iter().all(|r| w.contains(r, &f)))
        .count();
    assert_eq!(nested, 315);
    let x4 = SlGraph::new(f, 4, 8, 1 << 20).unwrap();
    let b = ball(&x4, x4.origin(), 1, DEFAULT_BALL_GUARD).unwrap();
    assert_eq!(b.len(), 66);
    assert_eq!(b.edge_count(), 65 + nested);
    let dense = dense_top_eigenvalue(&b.adjacency);
    assert!((power_iteration(&b, DEFAULT_TOL).unwrap() - dense).abs() < 1e-8);
    assert!(dense > rho_closed(2, 2).to_f64() && 65f64.sqrt() < rho_closed(2, 2).to_f64());
}
