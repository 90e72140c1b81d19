//! The special-vertex graph, its comparison graph on all lattice classes of
//! `K^m`, apartment subgraphs, and finite BFS balls.

use std::collections::HashMap;
use std::hash::Hash;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rayon::prelude::*;

use crate::coeffs::{FieldSpec, LocalScalar};
use crate::error::{Error, Result};
use crate::fq_symplectic::{enumerate_lagrangians, enumerate_subspaces, gauss_binomial, lagrangian_count_closed, FqSubspace};
use crate::lattices::{class_of_generators, vertex_frame, vertex_key, Lattice, LatticeVertex, Mat, Row, SymplecticSpace};

/// Default cap on ball sizes.
pub const DEFAULT_BALL_GUARD: usize = 2_000_000;

pub trait LocalGraph: Sync {
    type Vertex: Clone + Eq + Hash + Ord + Send + Sync;
    fn neighbors(&self, v: &Self::Vertex) -> Result<Vec<Self::Vertex>>;
}

/// Generators of the lattice `span(lifts of U's rows in the basis b) + t L`.
fn lift_generators(basis: &[Row], u: &FqSubspace, f: &FieldSpec) -> Mat {
    let dim = basis[0].len();
    let pivots = u.pivots();
    let mut gens: Mat = u
        .basis()
        .iter()
        .map(|coeffs| {
            let mut row = vec![LocalScalar::zero(); dim];
            for (k, c) in coeffs.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                for (x, b) in row.iter_mut().zip(&basis[k]) {
                    if !b.is_zero_at_precision() {
                        *x = x.add(&b.scale(*c, f), f);
                    }
                }
            }
            row
        })
        .collect();
    for (j, b) in basis.iter().enumerate() {
        if !pivots.contains(&j) {
            gens.push(b.iter().map(|x| x.shift(1)).collect());
        }
    }
    gens
}

// ---------------------------------------------------------------- Y_n

/// The graph on special vertices, with the Lagrangians of `F_q^{2n}` cached.
pub struct SpecialGraph {
    space: SymplecticSpace,
    lagrangians: Vec<FqSubspace>,
}

impl SpecialGraph {
    pub fn new(space: SymplecticSpace, limit: u128) -> Result<Self> {
        let lagrangians = enumerate_lagrangians(space.n, &space.field, limit)?;
        Ok(SpecialGraph { space, lagrangians })
    }

    pub fn space(&self) -> &SymplecticSpace {
        &self.space
    }

    pub fn degree(&self) -> usize {
        self.lagrangians.len()
    }

    pub fn origin(&self) -> LatticeVertex {
        self.space.origin()
    }

    /// Neighbors paired with the Lagrangian of `L / tL` (in the coordinates of
    /// the symplectic frame of `L`) that each one lifts.
    pub fn labelled_neighbors(&self, v: &LatticeVertex) -> Result<Vec<(FqSubspace, LatticeVertex)>> {
        if !v.is_special() {
            return Err(Error::NotSpecial(v.divisors().to_vec()));
        }
        if v.depth() >= self.space.window {
            return Err(Error::Precision(format!(
                "vertex depth {} exceeds the window {}",
                v.depth(),
                self.space.window
            )));
        }
        let f = &self.space.field;
        let n = self.space.n;
        let (divs, frame) = vertex_frame(v, f)?;
        let d = divs[0];
        let prec = v.depth() + 2;
        self.lagrangians
            .iter()
            .map(|u| {
                let gens = lift_generators(&frame, u, f);
                let (s, ech) = class_of_generators(&gens, prec, f)?;
                let dn = d + 1 - 2 * s;
                Ok((u.clone(), LatticeVertex::from_parts(n, ech, vec![dn; n])))
            })
            .collect()
    }

    /// Like [`LocalGraph::neighbors`] but recomputes every neighbor's invariants
    /// from scratch instead of predicting them.
    pub fn neighbors_checked(&self, v: &LatticeVertex) -> Result<Vec<LatticeVertex>> {
        let fast = self.neighbors(v)?;
        let mut full = Vec::with_capacity(fast.len());
        for w in &fast {
            let key = vertex_key(&w.lattice(), &self.space)?;
            if key.divisors() != w.divisors() || key != *w {
                return Err(Error::ModelViolation(format!(
                    "predicted divisors {:?} but found {:?}",
                    w.divisors(),
                    key.divisors()
                )));
            }
            if !key.is_special() || key.mu_parity() == v.mu_parity() {
                return Err(Error::ModelViolation("neighbor is not special of opposite parity".into()));
            }
            full.push(key);
        }
        Ok(full)
    }
}

impl LocalGraph for SpecialGraph {
    type Vertex = LatticeVertex;

    fn neighbors(&self, v: &LatticeVertex) -> Result<Vec<LatticeVertex>> {
        let mut out: Vec<LatticeVertex> =
            self.labelled_neighbors(v)?.into_iter().map(|(_, w)| w).collect();
        out.sort();
        Ok(out)
    }
}

// ---------------------------------------------------------------- X_m

/// A homothety class of lattices in `K^m`, keyed like [`LatticeVertex`] but
/// with no form attached.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SlVertex {
    canon: Mat,
    depth: i64,
}

impl SlVertex {
    pub fn canon(&self) -> &Mat {
        &self.canon
    }

    pub fn depth(&self) -> i64 {
        self.depth
    }
}

/// Lattice classes of `K^m` with `[L'] ~ [L]` when `tL ⊊ L' ⊊ L`.
pub struct SlGraph {
    field: FieldSpec,
    m: usize,
    window: i64,
    subspaces: Vec<FqSubspace>,
}

impl SlGraph {
    pub fn new(field: FieldSpec, m: usize, window: i64, limit: u128) -> Result<Self> {
        let degree = sl_degree(m as u32, field.q());
        let total: u128 = degree.to_u128().unwrap_or(u128::MAX);
        if total > limit {
            return Err(Error::SizeGuard {
                what: "subspaces",
                size: total,
                limit,
            });
        }
        let mut subspaces = Vec::new();
        for k in 1..m {
            subspaces.extend(enumerate_subspaces(m, k, &field, limit)?);
        }
        Ok(SlGraph {
            field,
            m,
            window,
            subspaces,
        })
    }

    pub fn degree(&self) -> usize {
        self.subspaces.len()
    }

    pub fn origin(&self) -> SlVertex {
        SlVertex {
            canon: crate::lattices::identity(self.m),
            depth: 0,
        }
    }

    pub fn vertex_of(&self, rows: &[Row]) -> Result<SlVertex> {
        let (_, ech) = class_of_generators(rows, self.window, &self.field)?;
        Ok(SlVertex {
            canon: ech.rows,
            depth: ech.depth,
        })
    }
}

/// `Σ_{k=1}^{m-1} binom(m, k)_q`.
pub fn sl_degree(m: u32, q: u64) -> BigUint {
    (1..m).map(|k| gauss_binomial(m, k, q)).sum()
}

impl LocalGraph for SlGraph {
    type Vertex = SlVertex;

    fn neighbors(&self, v: &SlVertex) -> Result<Vec<SlVertex>> {
        if v.depth >= self.window {
            return Err(Error::Precision(format!("vertex depth {} exceeds the window", v.depth)));
        }
        let prec = v.depth + 2;
        let mut out = self
            .subspaces
            .iter()
            .map(|u| {
                let (_, ech) = class_of_generators(&lift_generators(&v.canon, u, &self.field), prec, &self.field)?;
                Ok(SlVertex {
                    canon: ech.rows,
                    depth: ech.depth,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.sort();
        Ok(out)
    }
}

// ---------------------------------------------------------------- apartments

/// Special vertex `[a_1..a_n; mu - a_1..mu - a_n]` of the standard apartment,
/// normalized to `mu ∈ {0, 1}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ApartmentVertex {
    pub a: Vec<i64>,
    pub mu: u8,
}

impl ApartmentVertex {
    pub fn new(a: Vec<i64>, mu: i64) -> Self {
        let k = mu.div_euclid(2);
        ApartmentVertex {
            a: a.into_iter().map(|x| x - k).collect(),
            mu: mu.rem_euclid(2) as u8,
        }
    }

    pub fn origin(n: usize) -> Self {
        ApartmentVertex { a: vec![0; n], mu: 0 }
    }

    pub fn lattice(&self) -> Lattice {
        let b: Vec<i64> = self.a.iter().map(|&x| self.mu as i64 - x).collect();
        Lattice::coordinate(&self.a, &b)
    }
}

pub struct ApartmentGraph {
    pub n: usize,
}

impl LocalGraph for ApartmentGraph {
    type Vertex = ApartmentVertex;

    fn neighbors(&self, v: &ApartmentVertex) -> Result<Vec<ApartmentVertex>> {
        let n = self.n;
        let step = if v.mu == 0 { 0 } else { -1 };
        let mut out: Vec<ApartmentVertex> = (0..1u32 << n)
            .map(|bits| ApartmentVertex {
                a: (0..n)
                    .map(|i| v.a[i] + ((bits >> i) & 1) as i64 + step)
                    .collect(),
                mu: 1 - v.mu,
            })
            .collect();
        out.sort();
        Ok(out)
    }
}

/// Whether two apartment vertices map to adjacent special vertices of the
/// building under the coordinate lattices.
pub fn embed_check(v: &ApartmentVertex, w: &ApartmentVertex, g: &SpecialGraph) -> Result<bool> {
    let kv = vertex_key(&v.lattice(), g.space())?;
    let kw = vertex_key(&w.lattice(), g.space())?;
    Ok(g.neighbors(&kv)?.binary_search(&kw).is_ok())
}

pub fn apartment_ball(n: usize, radius: usize) -> Result<BallGraph<ApartmentVertex>> {
    ball(&ApartmentGraph { n }, ApartmentVertex::origin(n), radius, DEFAULT_BALL_GUARD)
}

// ---------------------------------------------------------------- balls

/// The subgraph induced on the vertices within distance `radius` of `center`.
/// Vertices are numbered in sorted order; `adjacency[i]` is sorted.
#[derive(Clone, Debug)]
pub struct BallGraph<V> {
    pub center: V,
    pub radius: usize,
    pub vertices: Vec<V>,
    pub adjacency: Vec<Vec<usize>>,
    pub layer: Vec<usize>,
}

/// Breadth-first ball. Frontier expansion runs in parallel; merging is
/// sequential in sorted order, so the result does not depend on scheduling.
/// The outermost layer is expanded too, to recover edges inside it, and every
/// edge is checked for symmetry.
pub fn ball<G: LocalGraph>(g: &G, center: G::Vertex, radius: usize, guard: usize) -> Result<BallGraph<G::Vertex>> {
    let mut layer_of: HashMap<G::Vertex, usize> = HashMap::new();
    layer_of.insert(center.clone(), 0);
    let mut frontier = vec![center.clone()];
    let mut expanded: HashMap<G::Vertex, Vec<G::Vertex>> = HashMap::new();
    for l in 0..=radius {
        let results: Vec<Vec<G::Vertex>> = frontier
            .par_iter()
            .map(|v| g.neighbors(v))
            .collect::<Result<_>>()?;
        let mut next = Vec::new();
        for (v, nbrs) in frontier.iter().zip(results) {
            if l < radius {
                for w in &nbrs {
                    if !layer_of.contains_key(w) {
                        layer_of.insert(w.clone(), l + 1);
                        next.push(w.clone());
                    }
                }
                if layer_of.len() > guard {
                    return Err(Error::SizeGuard {
                        what: "ball vertices",
                        size: layer_of.len() as u128,
                        limit: guard as u128,
                    });
                }
            }
            expanded.insert(v.clone(), nbrs);
        }
        next.sort();
        frontier = next;
    }
    let mut vertices: Vec<G::Vertex> = layer_of.keys().cloned().collect();
    vertices.sort();
    let index: HashMap<&G::Vertex, usize> = vertices.iter().enumerate().map(|(i, v)| (v, i)).collect();
    let layer: Vec<usize> = vertices.iter().map(|v| layer_of[v]).collect();
    let mut adjacency: Vec<Vec<usize>> = vertices
        .iter()
        .map(|v| {
            let mut a: Vec<usize> = expanded[v].iter().filter_map(|w| index.get(w).copied()).collect();
            a.sort_unstable();
            a.dedup();
            a
        })
        .collect();
    for (i, nbrs) in adjacency.iter().enumerate() {
        for &j in nbrs {
            if adjacency[j].binary_search(&i).is_err() {
                return Err(Error::ModelViolation(format!(
                    "asymmetric adjacency between ball vertices {i} and {j}"
                )));
            }
            if i == j {
                return Err(Error::ModelViolation(format!("loop at ball vertex {i}")));
            }
        }
    }
    adjacency.shrink_to_fit();
    Ok(BallGraph {
        center,
        radius,
        vertices,
        adjacency,
        layer,
    })
}

impl<V> BallGraph<V> {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn center_index(&self) -> usize
    where
        V: Ord,
    {
        self.vertices.binary_search(&self.center).expect("center is in its ball")
    }

    /// Interior vertices (below the outer layer) whose degree differs from `r`.
    pub fn irregular_interior(&self, r: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.layer[i] < self.radius && self.adjacency[i].len() != r)
            .collect()
    }

    /// Edges joining layers more than one apart (none in a genuine BFS ball).
    pub fn layer_violations(&self) -> usize {
        (0..self.len())
            .flat_map(|i| self.adjacency[i].iter().map(move |&j| (i, j)))
            .filter(|&(i, j)| self.layer[i].abs_diff(self.layer[j]) > 1)
            .count()
    }

    /// Whether the vertices of layer `< max_layer` induce a connected subgraph.
    pub fn connected_below(&self, max_layer: usize) -> bool {
        let keep: Vec<bool> = self.layer.iter().map(|&l| l < max_layer).collect();
        let total = keep.iter().filter(|&&k| k).count();
        let Some(start) = keep.iter().position(|&k| k) else {
            return true;
        };
        let mut seen = vec![false; self.len()];
        seen[start] = true;
        let mut stack = vec![start];
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &self.adjacency[v] {
                if keep[w] && !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == total
    }

    /// `(i, |B_i|, |B_i|^{1/i})` for `i = 0..=radius`.
    pub fn growth_table(&self) -> Vec<(usize, usize, Option<f64>)> {
        let mut per_layer = vec![0usize; self.radius + 1];
        for &l in &self.layer {
            per_layer[l] += 1;
        }
        let mut cum = 0;
        per_layer
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                cum += c;
                (i, cum, (i > 0).then(|| (cum as f64).powf(1.0 / i as f64)))
            })
            .collect()
    }

    /// `min_{1 <= i <= radius} |B_i|^{1/i}`: the largest `C` with `|B_i| >= C^i`.
    pub fn growth_constant_estimate(&self) -> Option<f64> {
        self.growth_table()
            .into_iter()
            .filter_map(|(_, _, c)| c)
            .min_by(|a, b| a.total_cmp(b))
    }
}

impl BallGraph<LatticeVertex> {
    /// Vertex indices split by `mu_parity`; an edge inside a class is a model
    /// violation.
    pub fn parity_classes(&self) -> Result<[Vec<usize>; 2]> {
        let mut classes = [Vec::new(), Vec::new()];
        for (i, v) in self.vertices.iter().enumerate() {
            classes[v.mu_parity() as usize].push(i);
        }
        for (i, nbrs) in self.adjacency.iter().enumerate() {
            for &j in nbrs {
                if self.vertices[i].mu_parity() == self.vertices[j].mu_parity() {
                    return Err(Error::ModelViolation(format!(
                        "edge {i} -- {j} joins two vertices of parity {}",
                        self.vertices[i].mu_parity()
                    )));
                }
            }
        }
        Ok(classes)
    }
}

/// `∏ (q^m + 1)` as a machine integer.
pub fn special_degree(n: usize, q: u64) -> usize {
    lagrangian_count_closed(n as u32, q).to_usize().unwrap_or(usize::MAX)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::make_field;
    use crate::fq_symplectic::DEFAULT_ENUM_GUARD;

    fn y(p: u64, e: u32, n: usize, r: usize) -> SpecialGraph {
        let sp = SymplecticSpace::for_radius(make_field(p, e).unwrap(), n, r).unwrap();
        SpecialGraph::new(sp, DEFAULT_ENUM_GUARD).unwrap()
    }

    #[test]
    fn origin_neighbors() {
        let g = y(2, 1, 2, 2);
        let o = g.origin();
        let nbrs = g.neighbors_checked(&o).unwrap();
        assert_eq!(nbrs.len(), 15);
        assert!(nbrs.windows(2).all(|w| w[0] < w[1]));
        for eps in [[0u8, 0], [1, 0], [0, 1], [1, 1]] {
            let x = vertex_key(&Lattice::x_eps(&eps), g.space()).unwrap();
            assert!(nbrs.binary_search(&x).is_ok());
        }
        let x00 = vertex_key(&Lattice::x_eps(&[0, 0]), g.space()).unwrap();
        let back = g.neighbors_checked(&x00).unwrap();
        assert_eq!(back.len(), 15);
        assert!(back.binary_search(&o).is_ok());
        assert_eq!(y(2, 1, 3, 1).neighbors(&o_of(3)).unwrap().len(), 135);
    }

    fn o_of(n: usize) -> LatticeVertex {
        let sp = SymplecticSpace::for_radius(make_field(2, 1).unwrap(), n, 1).unwrap();
        sp.origin()
    }

    #[test]
    fn small_balls() {
        let g = y(2, 1, 2, 2);
        let b0 = ball(&g, g.origin(), 0, DEFAULT_BALL_GUARD).unwrap();
        assert_eq!(b0.len(), 1);
        let b1 = ball(&g, g.origin(), 1, DEFAULT_BALL_GUARD).unwrap();
        assert_eq!((b1.len(), b1.edge_count()), (16, 15));
        let [even, odd] = b1.parity_classes().unwrap();
        assert_eq!((even.len(), odd.len()), (1, 15));
        let b2 = ball(&g, g.origin(), 2, DEFAULT_BALL_GUARD).unwrap();
        assert!(b2.irregular_interior(15).is_empty());
        assert_eq!(b2.layer_violations(), 0);
        assert!(b2.connected_below(2));
        for (i, v) in b2.vertices.iter().enumerate() {
            if b2.layer[i] == 2 {
                assert_eq!(v.mu_parity(), 0);
            }
        }
        assert_eq!(b1.growth_table()[1], (1, 16, Some(16.0)));
    }

    #[test]
    fn apartment_examples() {
        let b = apartment_ball(2, 2).unwrap();
        assert_eq!(b.len(), 13);
        assert!(b.irregular_interior(4).is_empty());
        let b3 = apartment_ball(3, 2).unwrap();
        assert!(b3.irregular_interior(8).is_empty());
        let g = y(2, 1, 2, 3);
        let o = ApartmentVertex::origin(2);
        assert!(embed_check(&o, &ApartmentVertex::new(vec![1, 0], 1), &g).unwrap());
        assert!(!embed_check(&o, &ApartmentVertex::new(vec![2, 0], 0), &g).unwrap());
    }

    #[test]
    fn sl_examples() {
        let f = make_field(2, 1).unwrap();
        let x4 = SlGraph::new(f.clone(), 4, 8, DEFAULT_ENUM_GUARD).unwrap();
        assert_eq!(x4.degree(), 65);
        let nb = x4.neighbors(&x4.origin()).unwrap();
        assert_eq!(nb.len(), 65);
        let x2 = SlGraph::new(f, 2, 8, DEFAULT_ENUM_GUARD).unwrap();
        assert_eq!(x2.neighbors(&x2.origin()).unwrap().len(), 3);
        // special neighbors of o are among the SL neighbors
        let g = y(2, 1, 2, 2);
        for w in g.neighbors(&g.origin()).unwrap() {
            let as_sl = x4.vertex_of(w.canon()).unwrap();
            assert!(nb.binary_search(&as_sl).is_ok());
        }
    }
}
