use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spbuild::coeffs::make_field;
use spbuild::graph::{ball, LocalGraph, SpecialGraph, DEFAULT_BALL_GUARD};
use spbuild::lattices::*;

fn graph(p: u64, n: usize, radius: usize) -> SpecialGraph {
    let sp = SymplecticSpace::for_radius(make_field(p, 1).unwrap(), n, radius + 4).unwrap();
    SpecialGraph::new(sp, 1 << 30).unwrap()
}

#[test]
fn action_is_functorial() {
    let g = graph(3, 2, 2);
    let sp = g.space();
    let f = &sp.field;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let b = ball(&g, g.origin(), 1, DEFAULT_BALL_GUARD).unwrap();
    for _ in 0..30 {
        let a = random_similitude(2, 3, &mut rng, f);
        let c = random_similitude(2, 3, &mut rng, f);
        let ac = a.compose(&c, f).unwrap();
        let v = &b.vertices[rng.gen_range(0..b.len())];
        assert_eq!(act(&ac, v, sp).unwrap(), act(&a, &act(&c, v, sp).unwrap(), sp).unwrap());
    }
}

#[test]
fn similitudes_preserve_specialness_and_adjacency() {
    for p in [2, 3] {
        let g = graph(p, 2, 2);
        let sp = g.space();
        let f = &sp.field;
        let mut rng = ChaCha8Rng::seed_from_u64(100 + p);
        let o = g.origin();
        let nbrs = g.neighbors(&o).unwrap();
        for _ in 0..50 {
            let s = random_similitude(2, 4, &mut rng, f);
            let w = &nbrs[rng.gen_range(0..nbrs.len())];
            let (go, gw) = (act(&s, &o, sp).unwrap(), act(&s, w, sp).unwrap());
            assert!(go.is_special() && gw.is_special());
            assert!(g.neighbors(&go).unwrap().binary_search(&gw).is_ok());
            assert_ne!(go.mu_parity(), gw.mu_parity());
        }
    }
}

#[test]
fn origin_stabilizer_elements_fix_the_origin() {
    let g = graph(3, 2, 1);
    let sp = g.space();
    let f = &sp.field;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut members = 0;
    for _ in 0..400 {
        let s = random_similitude(2, 3, &mut rng, f);
        if q_o_membership(&s) {
            members += 1;
            assert_eq!(act(&s, &sp.origin(), sp).unwrap(), sp.origin());
        }
        for eps in [[0u8, 0], [0, 1], [1, 0], [1, 1]] {
            if stabilizer_pair_membership(&s, &eps) {
                let x = vertex_key(&Lattice::x_eps(&eps), sp).unwrap();
                assert_eq!(act(&s, &x, sp).unwrap(), x);
                assert!(q_o_membership(&s));
            }
        }
    }
    assert!(members > 10, "only {members} stabilizer elements sampled");
}

#[test]
fn witnesses_exist_on_a_ball() {
    let g = graph(3, 2, 2);
    let sp = g.space();
    let b = ball(&g, g.origin(), 2, DEFAULT_BALL_GUARD).unwrap();
    for v in &b.vertices {
        let w = iwasawa_witness(v, sp).unwrap();
        assert_eq!(&act(&w, &sp.origin(), sp).unwrap(), v);
    }
}
