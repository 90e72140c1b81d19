mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::naive_special_neighbors;
use num_bigint::BigUint;
use spbuild::coeffs::make_field;
use spbuild::fq_symplectic::*;
use spbuild::graph::*;
use spbuild::lattices::{vertex_key, Lattice, SymplecticSpace};

fn graph(p: u64, e: u32, n: usize, radius: usize) -> SpecialGraph {
    let sp = SymplecticSpace::for_radius(make_field(p, e).unwrap(), n, radius).unwrap();
    SpecialGraph::new(sp, 1 << 30).unwrap()
}

#[test]
fn fast_neighbors_match_the_subspace_search() {
    for (p, radius) in [(2, 2), (3, 1)] {
        let g = graph(p, 1, 2, radius);
        let b = ball(&g, g.origin(), radius, DEFAULT_BALL_GUARD).unwrap();
        for (i, v) in b.vertices.iter().enumerate() {
            if b.layer[i] == radius {
                continue;
            }
            let fast: BTreeSet<_> = g.neighbors(v).unwrap().into_iter().collect();
            assert_eq!(fast, naive_special_neighbors(v, g.space()), "p = {p}, vertex {i}");
            assert_eq!(g.neighbors_checked(v).unwrap().len(), special_degree(2, p));
        }
    }
}

#[test]
fn neighbor_count_and_ball_growth_at_two_two() {
    let g = graph(2, 1, 2, 2);
    let o = g.origin();
    assert_eq!(naive_special_neighbors(&o, g.space()).len(), 15);
    let b = ball(&g, o, 2, DEFAULT_BALL_GUARD).unwrap();
    let sizes: Vec<usize> = b.growth_table().iter().map(|r| r.1).collect();
    assert_eq!(sizes, vec![1, 16, 166]);
}

#[test]
fn borel_orbits_have_the_predicted_sizes() {
    for (p, n) in [(2u64, 2usize), (3, 2), (2, 3), (4, 2)] {
        let f = if p == 4 { make_field(2, 2) } else { make_field(p, 1) }.unwrap();
        let q = f.q();
        let orbits = borel_orbits(n, &f, DEFAULT_ENUM_GUARD).unwrap();
        assert_eq!(orbits.len(), 1 << n);
        let total: usize = orbits.values().map(Vec::len).sum();
        assert_eq!(BigUint::from(total), lagrangian_count_closed(n as u32, q));
        for (sig, members) in &orbits {
            assert_eq!(BigUint::from(members.len()), BigUint::from(q).pow(sig.orbit_exponent() as u32));
            let other = orbits[&sig.complement()].len();
            assert_eq!(
                BigUint::from(members.len() * other),
                BigUint::from(q).pow((n * (n + 1) / 2) as u32)
            );
            for u in members {
                assert_eq!(&signature(u, &f).unwrap(), sig);
            }
        }
    }
}

#[test]
fn origin_neighbors_split_by_signature() {
    for (p, n) in [(2u64, 2usize), (3, 2), (2, 3)] {
        let g = graph(p, 1, n, 1);
        let f = &g.space().field;
        let orbits = borel_orbits(n, f, DEFAULT_ENUM_GUARD).unwrap();
        let mut by_sig: BTreeMap<EpsilonSignature, usize> = BTreeMap::new();
        for (u, w) in g.labelled_neighbors(&g.origin()).unwrap() {
            let sig = signature(&u, f).unwrap();
            *by_sig.entry(sig.clone()).or_default() += 1;
            if u == FqSubspace::coordinate_lagrangian(&sig.bits) {
                assert_eq!(w, vertex_key(&Lattice::x_eps(&sig.bits), g.space()).unwrap());
            }
        }
        let sizes: BTreeMap<_, _> = orbits.iter().map(|(s, m)| (s.clone(), m.len())).collect();
        assert_eq!(by_sig, sizes);
    }
}

#[test]
fn chambers_through_the_origin_factor_over_edges() {
    for (p, n) in [(2u64, 2usize), (3, 2), (2, 3)] {
        let f = make_field(p, 1).unwrap();
        let chambers = count_isotropic_flags(n, &f, DEFAULT_ENUM_GUARD).unwrap();
        let per_edge = count_full_flags(n, &f, DEFAULT_ENUM_GUARD).unwrap();
        assert_eq!(chambers, per_edge * BigUint::from(special_degree(n, p)));
    }
    let f = make_field(2, 1).unwrap();
    assert_eq!(count_full_flags(2, &f, DEFAULT_ENUM_GUARD).unwrap(), BigUint::from(3u32));
    assert_eq!(count_isotropic_flags(2, &f, DEFAULT_ENUM_GUARD).unwrap(), BigUint::from(45u32));
}

#[test]
fn apartment_embeds_as_a_subgraph() {
    let g = graph(2, 1, 2, 3);
    let a = apartment_ball(2, 2).unwrap();
    for (i, v) in a.vertices.iter().enumerate() {
        if a.layer[i] == a.radius {
            continue;
        }
        for &j in &a.adjacency[i] {
            assert!(embed_check(v, &a.vertices[j], &g).unwrap());
        }
    }
}

#[test]
fn subspace_counts_match_gaussian_binomials() {
    let f = make_field(2, 1).unwrap();
    for k in 0..=4 {
        let found = BigUint::from(enumerate_subspaces(4, k, &f, DEFAULT_ENUM_GUARD).unwrap().len());
        assert_eq!(found, gauss_binomial(4, k as u32, 2));
        assert_eq!(found, weighted_signature_count(4, k, 2));
    }
    assert_eq!(weighted_signature_count(4, 2, 2), BigUint::from(35u32));
}
