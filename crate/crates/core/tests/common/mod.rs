//! Brute-force oracles shared by the integration tests. They deliberately avoid
//! the echelon and symplectic-frame code paths of the library.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use spbuild::coeffs::{FieldSpec, LocalScalar, Valuation};
use spbuild::fq_symplectic::{enumerate_subspaces, FqSubspace, DEFAULT_ENUM_GUARD};
use spbuild::graph::LocalGraph;
use spbuild::lattices::{pairing, vertex_key, Lattice, LatticeVertex, Mat, Row, SymplecticSpace};
use spbuild::Error;

fn val(x: &LocalScalar) -> Option<i64> {
    match x.valuation() {
        Valuation::Finite(v) => Some(v),
        Valuation::Infinite => None,
    }
}

/// Determinant by cofactor expansion along the first row.
pub fn det(m: &Mat, f: &FieldSpec) -> LocalScalar {
    fn go(m: &Mat, row: usize, cols: &mut Vec<usize>, f: &FieldSpec) -> LocalScalar {
        if row == m.len() {
            return LocalScalar::one();
        }
        let mut acc = LocalScalar::zero();
        for k in 0..cols.len() {
            let c = cols[k];
            if m[row][c].is_zero_at_precision() {
                continue;
            }
            cols.remove(k);
            let minor = go(m, row + 1, cols, f);
            cols.insert(k, c);
            let term = m[row][c].mul(&minor, f);
            acc = if k % 2 == 0 { acc.add(&term, f) } else { acc.sub(&term, f) };
        }
        acc
    }
    let mut cols: Vec<usize> = (0..m.len()).collect();
    go(m, 0, &mut cols, f)
}

/// `v ∈ span_O(rows)` by Cramer's rule: every coordinate `det(B_j <- v) / det B`
/// must be integral.
pub fn contains(rows: &Mat, v: &Row, f: &FieldSpec) -> bool {
    let base = val(&det(rows, f)).expect("basis is nonsingular");
    (0..rows.len()).all(|j| {
        let mut m = rows.clone();
        m[j] = v.clone();
        val(&det(&m, f)).map_or(true, |x| x >= base)
    })
}

pub fn same_span(a: &Mat, b: &Mat, f: &FieldSpec) -> bool {
    a.iter().all(|v| contains(b, v, f)) && b.iter().all(|v| contains(a, v, f))
}

fn shift(rows: &Mat, k: i64) -> Mat {
    rows.iter().map(|r| r.iter().map(|x| x.shift(k)).collect()).collect()
}

fn combine(coeffs: &[spbuild::coeffs::Fq], basis: &Mat, f: &FieldSpec) -> Row {
    let mut row = vec![LocalScalar::zero(); basis[0].len()];
    for (c, b) in coeffs.iter().zip(basis) {
        if c.is_zero() {
            continue;
        }
        for (x, y) in row.iter_mut().zip(b) {
            *x = x.add(&y.scale(*c, f), f);
        }
    }
    row
}

fn subspaces(dim: usize, k: usize, f: &FieldSpec) -> Vec<FqSubspace> {
    enumerate_subspaces(dim, k, f, DEFAULT_ENUM_GUARD).unwrap()
}

/// The vertex condition searched directly from its definition: some `t^k L`
/// pairs into `tO` and sits between `t L0` and `L0` for a primitive `L0`.
///
/// `L0` ranges over `t L' ⊆ ... ⊆ t^{-1} L'` via subspaces `W` of
/// `t^{-1}L'/L'`; it is primitive iff its generators pair into `O` and its
/// discriminant `ord det Gram(L') - 2 dim W` vanishes, so the shift `k` and
/// `dim W` are forced by the discriminant and the search is exhaustive.
pub fn definitional_is_vertex(l: &Lattice, f: &FieldSpec) -> bool {
    let n = l.n();
    let dim = 2 * n;
    let gram_det = |rows: &Mat| {
        let g: Mat = rows
            .iter()
            .map(|u| rows.iter().map(|v| pairing(u, v, n, f)).collect())
            .collect();
        val(&det(&g, f)).expect("nondegenerate")
    };
    let disc = gram_det(l.rows());
    let lo = (-disc).div_euclid(2 * dim as i64) - 1;
    for k in lo..lo + 4 {
        let d = disc + 2 * dim as i64 * k;
        if d < 0 || d > 2 * dim as i64 {
            continue;
        }
        let rows = shift(l.rows(), k);
        let pairs_into = |gens: &Mat, bound: i64| {
            gens.iter().enumerate().all(|(i, u)| {
                gens[i + 1..]
                    .iter()
                    .all(|v| val(&pairing(u, v, n, f)).map_or(true, |x| x >= bound))
            })
        };
        if !pairs_into(&rows, 1) {
            continue;
        }
        let wdim = (d / 2) as usize;
        let candidates: Vec<Vec<Row>> = if wdim == 0 {
            vec![vec![]]
        } else {
            subspaces(dim, wdim, f)
                .iter()
                .map(|w| w.basis().iter().map(|c| combine(c, &rows, f)).collect())
                .collect()
        };
        for lifts in candidates {
            let mut gens = rows.clone();
            gens.extend(lifts.into_iter().map(|r| r.iter().map(|x| x.shift(-1)).collect()));
            if pairs_into(&gens, 0) {
                return true;
            }
        }
    }
    false
}

/// Random full-rank lattice whose basis entries are sparse Laurent polynomials
/// with exponents in `[lo, hi]`.
pub fn random_lattice(n: usize, lo: i64, hi: i64, rng: &mut impl Rng, f: &FieldSpec) -> Lattice {
    let dim = 2 * n;
    loop {
        let rows: Mat = (0..dim)
            .map(|_| {
                (0..dim)
                    .map(|_| {
                        if rng.gen_bool(0.4) {
                            return LocalScalar::zero();
                        }
                        let terms: Vec<_> = (0..rng.gen_range(1..=2))
                            .map(|_| {
                                let c = f.from_int(rng.gen_range(1..f.q() as i64));
                                (rng.gen_range(lo..=hi), c)
                            })
                            .filter(|(_, c)| !c.is_zero())
                            .collect();
                        LocalScalar::from_terms(&terms, None, f)
                    })
                    .collect()
            })
            .collect();
        if val(&det(&rows, f)).is_some() {
            return Lattice::new(n, rows).unwrap();
        }
    }
}

/// Special neighbors found by lifting every proper nonzero subspace of `L/tL`
/// (all dimensions, in the echelon basis of `L`) and keeping the lifts whose
/// full invariants say "special".
pub fn naive_special_neighbors(v: &LatticeVertex, sp: &SymplecticSpace) -> BTreeSet<LatticeVertex> {
    let f = &sp.field;
    let dim = sp.dim();
    let basis = v.canon();
    let mut out = BTreeSet::new();
    for k in 1..dim {
        for w in subspaces(dim, k, f) {
            let piv = w.pivots();
            let mut gens: Mat = w.basis().iter().map(|c| combine(c, basis, f)).collect();
            for (j, b) in basis.iter().enumerate() {
                if !piv.contains(&j) {
                    gens.push(b.iter().map(|x| x.shift(1)).collect());
                }
            }
            match vertex_key(&Lattice::new(sp.n, gens).unwrap(), sp) {
                Ok(key) if key.is_special() => {
                    out.insert(key);
                }
                Ok(_) | Err(Error::NotVertex(_)) => {}
                Err(e) => panic!("unexpected failure: {e}"),
            }
        }
    }
    out
}

/// Closed walks of length `len` from `o`, enumerated path by path.
pub fn brute_closed_walks<G: LocalGraph>(g: &G, o: &G::Vertex, len: usize) -> u64 {
    fn go<G: LocalGraph>(
        g: &G,
        o: &G::Vertex,
        at: &G::Vertex,
        left: usize,
        cache: &mut HashMap<G::Vertex, Vec<G::Vertex>>,
    ) -> u64 {
        if left == 0 {
            return (at == o) as u64;
        }
        if !cache.contains_key(at) {
            cache.insert(at.clone(), g.neighbors(at).unwrap());
        }
        let nbrs = cache[at].clone();
        nbrs.iter().map(|w| go(g, o, w, left - 1, cache)).sum()
    }
    go(g, o, o, len, &mut HashMap::new())
}

/// Largest eigenvalue of the adjacency matrix by dense symmetric diagonalization.
pub fn dense_top_eigenvalue(adj: &[Vec<usize>]) -> f64 {
    let n = adj.len();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for (i, a) in adj.iter().enumerate() {
        for &j in a {
            m[(i, j)] = 1.0;
        }
    }
    SymmetricEigen::new(m).eigenvalues.iter().cloned().fold(f64::MIN, f64::max)
}

/// Largest eigenvalue by Lanczos with full reorthogonalization; the Ritz values
/// of the `steps`-dimensional Krylov space converge fastest at the extremes.
pub fn lanczos_top_eigenvalue(adj: &[Vec<usize>], steps: usize) -> f64 {
    let n = adj.len();
    let apply = |x: &[f64]| -> Vec<f64> { adj.iter().map(|a| a.iter().map(|&j| x[j]).sum()).collect() };
    let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut q: Vec<Vec<f64>> = Vec::new();
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    // a start vector with no symmetry, so no eigenvector is missed
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 101) as f64 / 101.0).collect();
    let s = norm(&v);
    v.iter_mut().for_each(|x| *x /= s);
    for _ in 0..steps.min(n) {
        let mut w = apply(&v);
        let a: f64 = w.iter().zip(&v).map(|(x, y)| x * y).sum();
        alpha.push(a);
        q.push(v.clone());
        for _ in 0..2 {
            for b in &q {
                let c: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let bnorm = norm(&w);
        if bnorm < 1e-12 {
            break;
        }
        beta.push(bnorm);
        v = w.into_iter().map(|x| x / bnorm).collect();
    }
    let k = alpha.len();
    let mut t = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alpha[i];
        if i + 1 < k {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    SymmetricEigen::new(t).eigenvalues.iter().cloned().fold(f64::MIN, f64::max)
}
