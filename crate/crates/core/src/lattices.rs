//! O-lattices in `K^{2n}` with the standard alternating form.
//!
//! A lattice is given by generator rows; `g` acts on a lattice by `B -> B g^T`.
//! Canonical forms are computed modulo `t^P` for a precision `P` strictly above
//! the lattice depth (the least `D` with `t^D O^{2n}` inside the lattice), which
//! makes every canonical matrix an exact polynomial matrix.

use std::cmp::Ordering;
use std::hash::{Hash, Hasher};

use rand::Rng;
use serde_json::{json, Value};

use crate::coeffs::{FieldSpec, Fq, LocalScalar};
use crate::error::{Error, Result};

pub type Row = Vec<LocalScalar>;
pub type Mat = Vec<Row>;

/// `(field, n)` together with the absolute exponent window `[-N, N)` that
/// user-supplied lattices must fit: `t^N O^{2n} ⊆ L ⊆ t^{-N} O^{2n}`.
#[derive(Clone, Debug)]
pub struct SymplecticSpace {
    pub field: FieldSpec,
    pub n: usize,
    pub window: i64,
}

impl SymplecticSpace {
    pub fn new(field: FieldSpec, n: usize, window: i64) -> Result<Self> {
        if n < 1 {
            return Err(Error::Shape(format!("rank n must be positive, got {n}")));
        }
        if window < 1 {
            return Err(Error::Precision(format!("window {window} is empty")));
        }
        Ok(SymplecticSpace { field, n, window })
    }

    /// Window `2R + 4`, enough for every vertex within distance `R` of the origin.
    pub fn for_radius(field: FieldSpec, n: usize, radius: usize) -> Result<Self> {
        Self::new(field, n, 2 * radius as i64 + 4)
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn origin(&self) -> LatticeVertex {
        vertex_key(&Lattice::standard(self.n), self).expect("O^{2n} is a vertex")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lattice {
    n: usize,
    rows: Mat,
}

impl Lattice {
    pub fn new(n: usize, rows: Mat) -> Result<Self> {
        let dim = 2 * n;
        if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Shape(format!(
                "expected a {dim}x{dim} basis matrix, got {} rows",
                rows.len()
            )));
        }
        Ok(Lattice { n, rows })
    }

    pub fn standard(n: usize) -> Self {
        Lattice {
            n,
            rows: identity(2 * n),
        }
    }

    /// Rows `t^{a_i} e_i` and `t^{b_i} f_i`.
    pub fn coordinate(a: &[i64], b: &[i64]) -> Self {
        let n = a.len();
        assert_eq!(b.len(), n);
        let mut rows = zeros(2 * n, 2 * n);
        for i in 0..n {
            rows[i][i] = LocalScalar::t_pow(a[i]);
            rows[n + i][n + i] = LocalScalar::t_pow(b[i]);
        }
        Lattice { n, rows }
    }

    /// The lattice `[eps_1..eps_n; 1-eps_1..1-eps_n]`, a neighbor of the origin.
    pub fn x_eps(eps: &[u8]) -> Self {
        let a: Vec<i64> = eps.iter().map(|&e| e as i64).collect();
        let b: Vec<i64> = eps.iter().map(|&e| 1 - e as i64).collect();
        Self::coordinate(&a, &b)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> &Mat {
        &self.rows
    }

    pub fn scaled(&self, k: i64) -> Self {
        Lattice {
            n: self.n,
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|x| x.shift(k)).collect())
                .collect(),
        }
    }

    /// Change of basis `U B`.
    pub fn rebased(&self, u: &Mat, f: &FieldSpec) -> Self {
        Lattice {
            n: self.n,
            rows: mat_mul(u, &self.rows, f),
        }
    }

    /// `g L`, i.e. rows `B g^T`.
    pub fn transformed(&self, g: &Mat, f: &FieldSpec) -> Self {
        Lattice {
            n: self.n,
            rows: mat_mul(&self.rows, &transpose(g), f),
        }
    }

    pub fn to_json(&self, f: &FieldSpec) -> Value {
        json!({
            "n": self.n,
            "p": f.p(),
            "e": f.e(),
            "matrix": mat_to_json(&self.rows, f),
        })
    }

    pub fn from_json(v: &Value, f: &FieldSpec) -> Result<Self> {
        let n = v
            .get("n")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Parse("vertex is missing n".into()))? as usize;
        for (key, want) in [("p", f.p()), ("e", f.e() as u64)] {
            if let Some(x) = v.get(key) {
                if x.as_u64() != Some(want) {
                    return Err(Error::Parse(format!("vertex {key} = {x} does not match the field")));
                }
            }
        }
        let m = v
            .get("matrix")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse("vertex is missing matrix".into()))?;
        let rows = m
            .iter()
            .map(|r| {
                r.as_array()
                    .ok_or_else(|| Error::Parse("matrix row is not an array".into()))?
                    .iter()
                    .map(|x| LocalScalar::from_json(x, f))
                    .collect::<Result<Row>>()
            })
            .collect::<Result<Mat>>()?;
        Lattice::new(n, rows)
    }
}

// ---------------------------------------------------------------- matrices

pub fn zeros(r: usize, c: usize) -> Mat {
    vec![vec![LocalScalar::zero(); c]; r]
}

pub fn identity(dim: usize) -> Mat {
    let mut m = zeros(dim, dim);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = LocalScalar::one();
    }
    m
}

pub fn transpose(m: &Mat) -> Mat {
    if m.is_empty() {
        return Vec::new();
    }
    (0..m[0].len())
        .map(|j| m.iter().map(|r| r[j].clone()).collect())
        .collect()
}

pub fn mat_mul(a: &Mat, b: &Mat, f: &FieldSpec) -> Mat {
    let inner = b.len();
    let cols = if inner == 0 { 0 } else { b[0].len() };
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| {
                    (0..inner).fold(LocalScalar::zero(), |acc, k| {
                        if row[k].is_zero_at_precision() || b[k][j].is_zero_at_precision() {
                            acc
                        } else {
                            acc.add(&row[k].mul(&b[k][j], f), f)
                        }
                    })
                })
                .collect()
        })
        .collect()
}

fn mat_to_json(m: &Mat, f: &FieldSpec) -> Value {
    Value::Array(
        m.iter()
            .map(|r| Value::Array(r.iter().map(|x| x.to_json(f)).collect()))
            .collect(),
    )
}

fn min_val(m: &[Row]) -> Option<i64> {
    m.iter().flatten().filter_map(|x| x.val_opt()).min()
}

fn shift_rows(m: &[Row], k: i64) -> Mat {
    m.iter()
        .map(|r| r.iter().map(|x| x.shift(k)).collect())
        .collect()
}

/// Inverse of a lower-triangular matrix whose diagonal entries are monomials;
/// back substitution only divides by those monomials, so the result is exact.
pub(crate) fn lower_tri_inverse(m: &Mat, f: &FieldSpec) -> Result<Mat> {
    let dim = m.len();
    let mut diag_inv = Vec::with_capacity(dim);
    for (i, row) in m.iter().enumerate() {
        let d = &row[i];
        if d.terms().count() != 1 {
            return Err(Error::ModelViolation(format!(
                "triangular diagonal entry {} is not a monomial",
                d.display(f)
            )));
        }
        diag_inv.push(d.invert_unit(0, f)?);
    }
    let mut x = zeros(dim, dim);
    for j in 0..dim {
        x[j][j] = diag_inv[j].clone();
        for i in j + 1..dim {
            let mut acc = LocalScalar::zero();
            for k in j..i {
                if !m[i][k].is_zero_at_precision() && !x[k][j].is_zero_at_precision() {
                    acc = acc.add(&m[i][k].mul(&x[k][j], f), f);
                }
            }
            x[i][j] = acc.mul(&diag_inv[i], f).neg(f);
        }
    }
    Ok(x)
}

// ---------------------------------------------------------------- echelon form

/// Row echelon form of an O-lattice in `O^dim`, computed modulo `t^prec`.
///
/// Row `j` has a monic monomial pivot in column `order[j]`, zeros in the columns
/// `order[..j]`, and entries above each pivot reduced to degree below the pivot
/// exponent. `depth` is the least `D` with `t^D O^dim` in the span.
#[derive(Clone, Debug)]
pub(crate) struct Echelon {
    pub rows: Mat,
    pub depth: i64,
}

/// Echelon form of the span of `gens` (entries in O). The result is exact as long
/// as the true depth is below `prec`; a depth reaching `prec` is reported as a
/// precision error because then the truncation could have changed the span.
pub(crate) fn echelon_mod(
    gens: &[Row],
    order: &[usize],
    prec: i64,
    f: &FieldSpec,
) -> Result<Echelon> {
    let dim = order.len();
    if prec < 1 {
        return Err(Error::Precision(format!("working precision t^{prec} is empty")));
    }
    let mut rows: Mat = gens
        .iter()
        .map(|r| r.iter().map(|x| x.reduce_mod(prec)).collect())
        .collect();
    if rows.len() < dim {
        return Err(Error::Degenerate(format!(
            "{} generators cannot span a rank-{dim} lattice",
            rows.len()
        )));
    }
    let mut pivots = Vec::with_capacity(dim);
    for (j, &c) in order.iter().enumerate() {
        let mut best: Option<(i64, usize)> = None;
        for (r, row) in rows.iter().enumerate().skip(j) {
            if let Some(v) = row[c].val_opt() {
                if best.map_or(true, |(bv, _)| v < bv) {
                    best = Some((v, r));
                }
            }
        }
        let (v, r) = best.ok_or_else(|| {
            Error::Degenerate(format!("no pivot in column {c} modulo t^{prec}"))
        })?;
        rows.swap(j, r);
        let unit = rows[j][c].shift(-v);
        if !unit.is_one() {
            let inv = unit.unit_inverse_mod(prec, f)?;
            for x in rows[j].iter_mut() {
                *x = x.mul_mod(&inv, prec, f);
            }
        }
        let (head, tail) = rows.split_at_mut(j + 1);
        let pivot_row = &head[j];
        for row in tail.iter_mut() {
            if row[c].is_zero_at_precision() {
                continue;
            }
            let coef = row[c].shift(-v).neg(f);
            for &k in &order[j..] {
                row[k] = row[k].add_mul_mod(&coef, &pivot_row[k], prec, f);
            }
        }
        pivots.push(v);
    }
    if rows[dim..].iter().flatten().any(|x| !x.is_zero_at_precision()) {
        return Err(Error::ModelViolation("echelon left a nonzero surplus row".into()));
    }
    rows.truncate(dim);
    for j in 0..dim {
        let (c, k) = (order[j], pivots[j]);
        let (above, rest) = rows.split_at_mut(j);
        let pivot_row = &rest[0];
        for row in above.iter_mut() {
            let (_, high) = row[c].split_at(k);
            if high.is_zero_at_precision() {
                continue;
            }
            let coef = high.neg(f);
            for &m in &order[j..] {
                row[m] = row[m].add_mul_mod(&coef, &pivot_row[m], prec, f);
            }
        }
    }
    // depth = -min ord of the inverse of the (permuted) triangular matrix
    let tri: Mat = (0..dim)
        .map(|l| (0..dim).map(|j| rows[j][order[l]].clone()).collect())
        .collect(); // lower triangular: transpose of the permuted echelon
    let inv = lower_tri_inverse(&tri, f)?;
    let depth = -min_val(&inv).unwrap_or(0);
    if depth >= prec {
        return Err(Error::Precision(format!(
            "lattice depth {depth} reaches the working precision t^{prec}"
        )));
    }
    Ok(Echelon { rows, depth })
}

fn natural_order(dim: usize) -> Vec<usize> {
    (0..dim).collect()
}

/// Shift making the lattice lie in `O^dim` but not in `t O^dim`, checked against
/// the window.
fn normalizing_shift(rows: &[Row], window: i64) -> Result<i64> {
    let s = min_val(rows).ok_or_else(|| Error::Degenerate("zero basis matrix".into()))?;
    if s < -window || s >= window {
        return Err(Error::Precision(format!(
            "entry valuation {s} lies outside the window [-{window}, {window})"
        )));
    }
    Ok(s)
}

/// Canonical basis of the span: upper-triangular echelon form over O with monic
/// monomial pivots and entries above each pivot reduced modulo it.
pub fn hnf_canonicalize(l: &Lattice, sp: &SymplecticSpace) -> Result<Lattice> {
    let s = normalizing_shift(&l.rows, sp.window)?;
    let ech = echelon_mod(
        &shift_rows(&l.rows, -s),
        &natural_order(sp.dim()),
        sp.window - s,
        &sp.field,
    )?;
    Ok(Lattice {
        n: l.n,
        rows: shift_rows(&ech.rows, s),
    })
}

// ---------------------------------------------------------------- the form

pub fn pairing(u: &[LocalScalar], v: &[LocalScalar], n: usize, f: &FieldSpec) -> LocalScalar {
    let mut acc = LocalScalar::zero();
    for i in 0..n {
        if !u[i].is_zero_at_precision() && !v[n + i].is_zero_at_precision() {
            acc = acc.add(&u[i].mul(&v[n + i], f), f);
        }
        if !u[n + i].is_zero_at_precision() && !v[i].is_zero_at_precision() {
            acc = acc.sub(&u[n + i].mul(&v[i], f), f);
        }
    }
    acc
}

pub fn gram(l: &Lattice, f: &FieldSpec) -> Mat {
    l.rows
        .iter()
        .map(|u| l.rows.iter().map(|v| pairing(u, v, l.n, f)).collect())
        .collect()
}

/// Alternating Smith reduction of a basis of a lattice in `O^{2n}` whose depth is
/// below `prec / 2`. Returns the pair exponents (nondecreasing) and a basis
/// `x_1..x_n, y_1..y_n` with `<x_i, y_j> = t^{d_i} δ_ij` and all other pairings
/// zero, each up to terms of valuation above every `d_i`.
pub(crate) fn symplectic_frame(
    basis: &[Row],
    n: usize,
    prec: i64,
    f: &FieldSpec,
) -> Result<(Vec<i64>, Mat)> {
    let mut rest: Mat = basis.to_vec();
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    let mut divisors = Vec::with_capacity(n);
    while !rest.is_empty() {
        let mut best: Option<(i64, usize, usize, LocalScalar)> = None;
        for i in 0..rest.len() {
            for j in i + 1..rest.len() {
                let g = pairing(&rest[i], &rest[j], n, f);
                if let Some(v) = g.val_opt() {
                    if best.as_ref().map_or(true, |b| v < b.0) {
                        best = Some((v, i, j, g));
                    }
                }
            }
        }
        let (d, i, j, g) = best.ok_or_else(|| {
            Error::Degenerate("alternating form vanishes on the remaining basis".into())
        })?;
        if d >= prec {
            return Err(Error::Precision(format!(
                "pairing exponent {d} reaches the working precision t^{prec}"
            )));
        }
        let uinv = g.shift(-d).unit_inverse_mod(prec, f)?;
        let y: Row = rest[j].iter().map(|c| c.mul_mod(&uinv, prec, f)).collect();
        let x = rest[i].clone();
        let others: Vec<Row> = rest
            .into_iter()
            .enumerate()
            .filter(|&(k, _)| k != i && k != j)
            .map(|(_, z)| z)
            .collect();
        rest = others
            .into_iter()
            .map(|z| {
                let cy = pairing(&z, &y, n, f).shift(-d).neg(f);
                let cx = pairing(&z, &x, n, f).shift(-d);
                z.iter()
                    .zip(x.iter().zip(&y))
                    .map(|(zk, (xk, yk))| {
                        zk.add_mul_mod(&cy, xk, prec, f)
                            .add_mul_mod(&cx, yk, prec, f)
                    })
                    .collect()
            })
            .collect();
        xs.push(x);
        ys.push(y);
        divisors.push(d);
    }
    if divisors.len() != n {
        return Err(Error::Shape(format!("expected {n} hyperbolic pairs")));
    }
    xs.extend(ys);
    Ok((divisors, xs))
}

/// Vertex condition on sorted pair exponents: after a homothety shift they all lie
/// in `{1, 2}` with the `2`s only beside `1`s, i.e. `max - min <= 1` and either all
/// equal or the minimum odd.
pub fn divisor_rule_is_vertex(d: &[i64]) -> bool {
    let (lo, hi) = match (d.iter().min(), d.iter().max()) {
        (Some(&lo), Some(&hi)) => (lo, hi),
        _ => return false,
    };
    hi - lo <= 1 && (hi == lo || lo.rem_euclid(2) == 1)
}

fn normalized_echelon(l: &Lattice, sp: &SymplecticSpace) -> Result<(i64, Echelon)> {
    let s = normalizing_shift(&l.rows, sp.window)?;
    let ech = echelon_mod(
        &shift_rows(&l.rows, -s),
        &natural_order(sp.dim()),
        sp.window - s,
        &sp.field,
    )?;
    Ok((s, ech))
}

fn frame_of(ech: &Echelon, n: usize, f: &FieldSpec) -> Result<(Vec<i64>, Mat)> {
    symplectic_frame(&ech.rows, n, 2 * ech.depth + 2, f)
}

/// Sorted pair exponents `d_1 <= ... <= d_n` of the form restricted to `L`.
pub fn symplectic_divisors(l: &Lattice, sp: &SymplecticSpace) -> Result<Vec<i64>> {
    let (s, ech) = normalized_echelon(l, sp)?;
    let (mut d, _) = frame_of(&ech, sp.n, &sp.field)?;
    d.sort_unstable();
    Ok(d.into_iter().map(|x| x + 2 * s).collect())
}

pub fn is_vertex(l: &Lattice, sp: &SymplecticSpace) -> Result<bool> {
    Ok(divisor_rule_is_vertex(&symplectic_divisors(l, sp)?))
}

/// `(special, mu_parity)`; parity is reported for special vertices only.
pub fn is_special(l: &Lattice, sp: &SymplecticSpace) -> Result<(bool, Option<u8>)> {
    let d = symplectic_divisors(l, sp)?;
    if !divisor_rule_is_vertex(&d) {
        return Err(Error::NotVertex(d));
    }
    if d.iter().all(|&x| x == d[0]) {
        Ok((true, Some(d[0].rem_euclid(2) as u8)))
    } else {
        Ok((false, None))
    }
}

/// `<L, L> ⊆ O` with a perfect pairing on `L / tL` (no homothety applied).
pub fn is_primitive(l: &Lattice, sp: &SymplecticSpace) -> Result<bool> {
    Ok(symplectic_divisors(l, sp)?.iter().all(|&d| d == 0))
}

// ---------------------------------------------------------------- vertices

/// Homothety class of a lattice, keyed by the echelon form of its representative
/// inside `O^{2n}` but not inside `t O^{2n}`.
#[derive(Clone, Debug)]
pub struct LatticeVertex {
    n: usize,
    canon: Mat,
    divisors: Vec<i64>,
    depth: i64,
}

impl PartialEq for LatticeVertex {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.canon == other.canon
    }
}

impl Eq for LatticeVertex {}

impl Hash for LatticeVertex {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.n.hash(state);
        self.canon.hash(state);
    }
}

impl PartialOrd for LatticeVertex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for LatticeVertex {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.n, &self.canon).cmp(&(other.n, &other.canon))
    }
}

impl LatticeVertex {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn canon(&self) -> &Mat {
        &self.canon
    }

    pub fn lattice(&self) -> Lattice {
        Lattice {
            n: self.n,
            rows: self.canon.clone(),
        }
    }

    /// Pair exponents of the normalized representative, sorted.
    pub fn divisors(&self) -> &[i64] {
        &self.divisors
    }

    pub fn depth(&self) -> i64 {
        self.depth
    }

    pub fn is_special(&self) -> bool {
        self.divisors.iter().all(|&d| d == self.divisors[0])
    }

    pub fn mu_parity(&self) -> u8 {
        self.divisors[0].rem_euclid(2) as u8
    }

    pub fn to_json(&self, f: &FieldSpec) -> Value {
        let mut v = self.lattice().to_json(f);
        v["mu_parity"] = json!(self.mu_parity());
        v
    }

    /// Stable text key used for hashing labels and sorting in exports.
    pub fn key_string(&self, f: &FieldSpec) -> String {
        mat_to_json(&self.canon, f).to_string()
    }

    /// Vertex from a normalized echelon whose divisors are already known.
    pub(crate) fn from_parts(n: usize, ech: Echelon, divisors: Vec<i64>) -> Self {
        LatticeVertex {
            n,
            canon: ech.rows,
            divisors,
            depth: ech.depth,
        }
    }
}

fn vertex_from_echelon(n: usize, ech: Echelon, f: &FieldSpec) -> Result<LatticeVertex> {
    let (mut d, _) = frame_of(&ech, n, f)?;
    d.sort_unstable();
    if !divisor_rule_is_vertex(&d) {
        return Err(Error::NotVertex(d));
    }
    Ok(LatticeVertex::from_parts(n, ech, d))
}

pub fn vertex_key(l: &Lattice, sp: &SymplecticSpace) -> Result<LatticeVertex> {
    let (_, ech) = normalized_echelon(l, sp)?;
    vertex_from_echelon(sp.n, ech, &sp.field)
}

/// Symplectic frame `(x, y)` of a vertex's normalized representative.
pub(crate) fn vertex_frame(v: &LatticeVertex, f: &FieldSpec) -> Result<(Vec<i64>, Mat)> {
    symplectic_frame(&v.canon, v.n, 2 * v.depth + 2, f)
}

/// Canonical class of a lattice given by generators in `O^dim` whose depth is
/// below `prec`, normalized so that it lies in `O^dim` but not in `t O^dim`.
/// Returns the normalizing shift and the echelon form.
pub(crate) fn class_of_generators(
    gens: &[Row],
    prec: i64,
    f: &FieldSpec,
) -> Result<(i64, Echelon)> {
    let dim = gens.first().map_or(0, Vec::len);
    let s = min_val(gens).ok_or_else(|| Error::Degenerate("zero generators".into()))?;
    let ech = echelon_mod(&shift_rows(gens, -s), &natural_order(dim), prec, f)?;
    Ok((s, ech))
}

// ---------------------------------------------------------------- similitudes

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimilitudeMatrix {
    n: usize,
    entries: Mat,
    nu: LocalScalar,
}

impl SimilitudeMatrix {
    pub fn entries(&self) -> &Mat {
        &self.entries
    }

    pub fn nu(&self) -> &LocalScalar {
        &self.nu
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn compose(&self, other: &SimilitudeMatrix, f: &FieldSpec) -> Result<SimilitudeMatrix> {
        gsp_check(&mat_mul(&self.entries, &other.entries, f), f)
    }

    pub fn to_json(&self, f: &FieldSpec) -> Value {
        json!({ "matrix": mat_to_json(&self.entries, f), "nu": self.nu.to_json(f) })
    }
}

fn block(m: &Mat, r0: usize, c0: usize, n: usize) -> Mat {
    (0..n)
        .map(|i| (0..n).map(|j| m[r0 + i][c0 + j].clone()).collect())
        .collect()
}

fn mat_sub(a: &Mat, b: &Mat, f: &FieldSpec) -> Mat {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x.sub(y, f)).collect())
        .collect()
}

/// Checks `A^t C` and `B^t D` symmetric and `A^t D - C^t B = ν I` for
/// `g = [[A, B], [C, D]]`, extracting `ν`.
pub fn gsp_check(g: &Mat, f: &FieldSpec) -> Result<SimilitudeMatrix> {
    let dim = g.len();
    if dim == 0 || dim % 2 == 1 || g.iter().any(|r| r.len() != dim) {
        return Err(Error::Shape(format!("expected an even square matrix, got {dim} rows")));
    }
    if g.iter().flatten().any(|x| !x.is_exact()) {
        return Err(Error::Precision("similitude entries must be exact".into()));
    }
    let n = dim / 2;
    let (a, b, c, d) = (block(g, 0, 0, n), block(g, 0, n, n), block(g, n, 0, n), block(g, n, n, n));
    let (at, bt, ct) = (transpose(&a), transpose(&b), transpose(&c));
    let zero_mat = |m: &Mat| m.iter().flatten().all(|x| x.is_zero_at_precision());
    let atc = mat_mul(&at, &c, f);
    if !zero_mat(&mat_sub(&atc, &transpose(&atc), f)) {
        return Err(Error::NotSimilitude("A^t C is not symmetric".into()));
    }
    let btd = mat_mul(&bt, &d, f);
    if !zero_mat(&mat_sub(&btd, &transpose(&btd), f)) {
        return Err(Error::NotSimilitude("B^t D is not symmetric".into()));
    }
    let m = mat_sub(&mat_mul(&at, &d, f), &mat_mul(&ct, &b, f), f);
    let nu = m[0][0].clone();
    let scalar = (0..n).all(|i| {
        (0..n).all(|j| {
            if i == j {
                m[i][j] == nu
            } else {
                m[i][j].is_zero_at_precision()
            }
        })
    });
    if !scalar {
        return Err(Error::NotSimilitude("A^t D - C^t B is not a scalar matrix".into()));
    }
    if nu.is_zero_at_precision() {
        return Err(Error::NotSimilitude("similitude factor is zero".into()));
    }
    Ok(SimilitudeMatrix {
        n,
        entries: g.clone(),
        nu,
    })
}

/// `[g L]` for a special vertex `[L]`.
pub fn act(g: &SimilitudeMatrix, v: &LatticeVertex, sp: &SymplecticSpace) -> Result<LatticeVertex> {
    if !v.is_special() {
        return Err(Error::NotSpecial(v.divisors.clone()));
    }
    let image = vertex_key(&v.lattice().transformed(&g.entries, &sp.field), sp)?;
    if !image.is_special() {
        return Err(Error::ModelViolation(format!(
            "similitude moved a special vertex to divisors {:?}",
            image.divisors
        )));
    }
    Ok(image)
}

/// Valuation constraints for membership tests: `None` forces a zero entry,
/// `Some(b)` requires `ord >= b`; diagonal entries must be units.
fn satisfies_shape(g: &Mat, bound: impl Fn(usize, usize) -> Option<i64>) -> bool {
    let s = match min_val(g) {
        Some(s) => s,
        None => return false,
    };
    let dim = g.len();
    for i in 0..dim {
        for j in 0..dim {
            let v = g[i][j].val_opt().map(|v| v - s);
            let ok = if i == j {
                v == Some(0)
            } else {
                match (bound(i, j), v) {
                    (_, None) => true,
                    (None, Some(_)) => false,
                    (Some(b), Some(v)) => v >= b,
                }
            };
            if !ok {
                return false;
            }
        }
    }
    true
}

/// Positions allowed by the parabolic shape: `A` upper triangular, `B` free,
/// `C = 0`, `D` lower triangular.
fn parabolic_position(i: usize, j: usize, n: usize) -> bool {
    (i < n && j > i) || (i >= n && j >= n && j < i)
}

/// Membership in the stabilizer of the origin inside the parabolic subgroup, after
/// scaling `g` by the power of `t` that makes its entries integral and primitive.
pub fn q_o_membership(g: &SimilitudeMatrix) -> bool {
    let n = g.n;
    satisfies_shape(&g.entries, |i, j| parabolic_position(i, j, n).then_some(0))
}

/// Exponent lower bound for entry `(i, j)` of an element of the origin stabilizer
/// that also fixes `x_eps` (0-based indices; `None` off the parabolic shape).
pub fn pair_stabilizer_bound(eps: &[u8], i: usize, j: usize) -> Option<i64> {
    let n = eps.len();
    if !parabolic_position(i, j, n) {
        return None;
    }
    let e = |k: usize| eps[k] as i64;
    let b = if j < n {
        e(i) - e(j)
    } else if i < n {
        e(i) - (1 - e(j - n))
    } else {
        e(j - n) - e(i - n)
    };
    Some(b.max(0))
}

pub fn stabilizer_pair_membership(g: &SimilitudeMatrix, eps: &[u8]) -> bool {
    if eps.len() != g.n {
        return false;
    }
    satisfies_shape(&g.entries, |i, j| pair_stabilizer_bound(eps, i, j))
}

/// Index exponent `log_q [Stab(o) : Stab(o) ∩ Stab(x_eps)]` read off the entry
/// bounds: the `A` block and the free half (lower triangle) of the `B` block.
pub fn orbit_exponent_from_bounds(eps: &[u8]) -> i64 {
    let n = eps.len();
    let mut total = 0;
    for i in 0..n {
        for j in i + 1..n {
            total += pair_stabilizer_bound(eps, i, j).unwrap();
        }
        for k in 0..=i {
            total += pair_stabilizer_bound(eps, i, n + k).unwrap();
        }
    }
    total
}

/// A similitude `g` of parabolic shape (`C = 0`, `A` upper triangular) with
/// `[g O^{2n}] = v`.
///
/// The echelon form in the column order `f_n, ..., f_1, e_n, ..., e_1` yields
/// `x_i ∈ span(e_1..e_i)` spanning `L ∩ span(e)`; the remaining rows are rotated
/// to a dual basis of the `x_i` and corrected to be isotropic.
pub fn iwasawa_witness(v: &LatticeVertex, sp: &SymplecticSpace) -> Result<SimilitudeMatrix> {
    if !v.is_special() {
        return Err(Error::NotSpecial(v.divisors.clone()));
    }
    let f = &sp.field;
    let n = v.n;
    let d = v.divisors[0];
    let order: Vec<usize> = (0..2 * n).rev().collect();
    let ech = echelon_mod(&v.canon, &order, v.depth + 1, f)?;
    // x_i has its pivot at e_i, z_l at f_l (1-based in the comments)
    let x: Mat = (1..=n).map(|i| ech.rows[2 * n - i].clone()).collect();
    let z: Mat = (1..=n).map(|l| ech.rows[n - l].clone()).collect();
    let xe: Mat = x.iter().map(|r| r[..n].to_vec()).collect();
    let zf: Mat = z.iter().map(|r| r[n..].to_vec()).collect();
    // <x_i, z_l> = (Xe Zf^t)_{il}; Q = t^d (Xe Zf^t)^{-t} = t^d Xe^{-t} Zf^{-1}
    let xe_inv = lower_tri_inverse(&xe, f)?;
    let zf_inv = lower_tri_inverse(&zf, f)?;
    let q = shift_rows(&mat_mul(&transpose(&xe_inv), &zf_inv, f), d);
    let mut y = mat_mul(&q, &z, f);
    let nu = LocalScalar::t_pow(d);
    for i in 0..n {
        for k in i + 1..n {
            let c = pairing(&y[i], &y[k], n, f);
            if c.val_opt().is_some_and(|v| v < d) {
                return Err(Error::ModelViolation("pairing below the vertex exponent".into()));
            }
            let coef = c.shift(-d).neg(f);
            if coef.is_zero_at_precision() {
                continue;
            }
            for m in 0..2 * n {
                let upd = coef.mul(&x[k][m], f);
                y[i][m] = y[i][m].add(&upd, f);
            }
        }
    }
    let mut gt = x;
    gt.extend(y);
    let g = gsp_check(&transpose(&gt), f)?;
    if g.nu != nu {
        return Err(Error::ModelViolation("witness has the wrong similitude factor".into()));
    }
    let c_zero = (n..2 * n).all(|i| (0..n).all(|j| g.entries[i][j].is_zero_at_precision()));
    let a_upper = (0..n).all(|i| (0..i).all(|j| g.entries[i][j].is_zero_at_precision()));
    if !c_zero || !a_upper {
        return Err(Error::ModelViolation("witness is not of parabolic shape".into()));
    }
    if &act(&g, &sp.origin(), sp)? != v {
        return Err(Error::ModelViolation("witness does not move the origin to the vertex".into()));
    }
    Ok(g)
}

// ---------------------------------------------------------------- sampling

fn random_laurent(rng: &mut impl Rng, f: &FieldSpec, lo: i64, hi: i64) -> LocalScalar {
    let terms: Vec<(i64, Fq)> = (lo..=hi)
        .map(|k| (k, f.elements().nth(rng.gen_range(0..f.q() as usize)).unwrap()))
        .collect();
    LocalScalar::from_terms(&terms, None, f)
}

fn random_unit_constant(rng: &mut impl Rng, f: &FieldSpec) -> Fq {
    f.nonzero_elements().nth(rng.gen_range(0..f.q() as usize - 1)).unwrap()
}

/// Random matrix in `GL_dim(O)`: a product of elementary operations with
/// polynomial coefficients of degree `< spread` and a unit diagonal.
pub fn random_unimodular(dim: usize, spread: i64, rng: &mut impl Rng, f: &FieldSpec) -> Mat {
    let mut m = identity(dim);
    for i in 0..dim {
        m[i][i] = LocalScalar::constant(random_unit_constant(rng, f));
    }
    for _ in 0..3 * dim {
        let (i, j) = (rng.gen_range(0..dim), rng.gen_range(0..dim));
        if i == j {
            continue;
        }
        let c = random_laurent(rng, f, 0, spread - 1);
        let rj = m[j].clone();
        for (x, y) in m[i].iter_mut().zip(&rj) {
            *x = x.add(&c.mul(y, f), f);
        }
    }
    // permute rows
    for i in (1..dim).rev() {
        m.swap(i, rng.gen_range(0..=i));
    }
    m
}

/// Random similitude: a product of `steps` generators drawn from the symplectic
/// root groups (coefficients with exponents in `[-1, 1]`), the Levi torus and
/// the coordinate similitudes `diag(t^eps, t^{1-eps})`.
pub fn random_similitude(n: usize, steps: usize, rng: &mut impl Rng, f: &FieldSpec) -> SimilitudeMatrix {
    let dim = 2 * n;
    let mut g = identity(dim);
    for _ in 0..steps {
        let mut h = identity(dim);
        match rng.gen_range(0..5) {
            0 | 1 => {
                // [[I, S], [0, I]] or [[I, 0], [S, I]] with S symmetric
                let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
                let c = random_laurent(rng, f, -1, 1);
                let (r0, c0) = if rng.gen_bool(0.5) { (0, n) } else { (n, 0) };
                h[r0 + i][c0 + j] = c.clone();
                h[r0 + j][c0 + i] = c;
            }
            2 => {
                // [[A, 0], [0, A^{-t}]] with A = I + c E_ij
                let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
                if i != j {
                    let c = random_laurent(rng, f, -1, 1);
                    h[i][j] = c.clone();
                    h[n + j][n + i] = c.neg(f);
                }
            }
            3 => {
                let i = rng.gen_range(0..n);
                let a = random_unit_constant(rng, f);
                h[i][i] = LocalScalar::constant(a);
                h[n + i][n + i] = LocalScalar::constant(f.inv(a).unwrap());
            }
            _ => {
                for i in 0..n {
                    let e = rng.gen_range(0..2i64);
                    h[i][i] = LocalScalar::t_pow(e);
                    h[n + i][n + i] = LocalScalar::t_pow(1 - e);
                }
            }
        }
        g = mat_mul(&g, &h, f);
    }
    gsp_check(&g, f).expect("generators are similitudes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::make_field;
    use rand::SeedableRng;

    fn space(p: u64, n: usize) -> SymplecticSpace {
        SymplecticSpace::new(make_field(p, 1).unwrap(), n, 12).unwrap()
    }

    fn diag(exps: &[i64]) -> Mat {
        let mut m = zeros(exps.len(), exps.len());
        for (i, &e) in exps.iter().enumerate() {
            m[i][i] = LocalScalar::t_pow(e);
        }
        m
    }

    #[test]
    fn hnf_examples() {
        let sp = space(2, 2);
        let id = Lattice::standard(2);
        assert_eq!(hnf_canonicalize(&id, &sp).unwrap(), id);
        let t = LocalScalar::t_pow(1);
        let one = LocalScalar::one();
        let z = LocalScalar::zero();
        let rows = vec![
            vec![t.clone(), z.clone(), z.clone(), z.clone()],
            vec![t.clone(), one.clone(), z.clone(), z.clone()],
            vec![z.clone(), z.clone(), one.clone(), z.clone()],
            vec![z.clone(), z.clone(), z.clone(), one.clone()],
        ];
        let canon = hnf_canonicalize(&Lattice::new(2, rows).unwrap(), &sp).unwrap();
        assert_eq!(canon, Lattice::coordinate(&[1, 0], &[0, 0]));
    }

    #[test]
    fn gram_examples() {
        let f = make_field(2, 1).unwrap();
        let l = Lattice::coordinate(&[1, 0], &[0, 1]);
        let g = gram(&l, &f);
        assert_eq!(g[0][2], LocalScalar::t_pow(1));
        assert_eq!(g[1][3], LocalScalar::t_pow(1));
        assert_eq!(g[0][1], LocalScalar::zero());
        let std = gram(&Lattice::standard(2).scaled(1), &f);
        assert_eq!(std[0][2], LocalScalar::t_pow(2));
        assert_eq!(std[2][0], LocalScalar::t_pow(2).neg(&f));
    }

    #[test]
    fn divisor_and_predicate_examples() {
        let sp = space(2, 2);
        let o = Lattice::standard(2);
        assert_eq!(symplectic_divisors(&o, &sp).unwrap(), vec![0, 0]);
        assert_eq!(symplectic_divisors(&Lattice::x_eps(&[1, 0]), &sp).unwrap(), vec![1, 1]);
        let l12 = Lattice::coordinate(&[1, 1], &[0, 1]);
        assert_eq!(symplectic_divisors(&l12, &sp).unwrap(), vec![1, 2]);
        assert!(is_vertex(&o, &sp).unwrap());
        assert!(is_vertex(&l12, &sp).unwrap());
        assert!(!is_vertex(&Lattice::coordinate(&[0, 1], &[0, 0]), &sp).unwrap());
        assert_eq!(is_special(&o, &sp).unwrap(), (true, Some(0)));
        assert_eq!(is_special(&Lattice::x_eps(&[1, 0]), &sp).unwrap(), (true, Some(1)));
        assert_eq!(is_special(&l12, &sp).unwrap(), (false, None));
        assert!(is_primitive(&o, &sp).unwrap());
        assert!(!is_primitive(&o.scaled(1), &sp).unwrap());
        assert!(!is_primitive(&Lattice::x_eps(&[1, 0]), &sp).unwrap());
    }

    #[test]
    fn vertex_key_homothety() {
        let sp = space(2, 2);
        let o = Lattice::standard(2);
        assert_eq!(vertex_key(&o, &sp).unwrap(), vertex_key(&o.scaled(3), &sp).unwrap());
        let x = Lattice::x_eps(&[1, 0]);
        assert_eq!(vertex_key(&x, &sp).unwrap(), vertex_key(&x.scaled(-2), &sp).unwrap());
        assert_ne!(vertex_key(&x, &sp).unwrap(), vertex_key(&o, &sp).unwrap());
    }

    #[test]
    fn rebasing_keeps_key() {
        let sp = space(3, 2);
        let f = &sp.field;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for eps in [[0u8, 0], [1, 0], [0, 1], [1, 1]] {
            let l = Lattice::x_eps(&eps);
            let key = vertex_key(&l, &sp).unwrap();
            for _ in 0..20 {
                let u = random_unimodular(4, 3, &mut rng, f);
                let k = rng.gen_range(-3..=3);
                assert_eq!(vertex_key(&l.rebased(&u, f).scaled(k), &sp).unwrap(), key);
            }
        }
    }

    #[test]
    fn gsp_check_examples() {
        let f = make_field(2, 1).unwrap();
        let g = gsp_check(&identity(4), &f).unwrap();
        assert!(g.nu().is_one());
        let g = gsp_check(&diag(&[1, 1, 0, 0]), &f).unwrap();
        assert_eq!(g.nu(), &LocalScalar::t_pow(1));
        assert!(matches!(gsp_check(&diag(&[1, 0, 0, 0]), &f), Err(Error::NotSimilitude(_))));
    }

    #[test]
    fn act_examples() {
        let sp = space(2, 2);
        let f = &sp.field;
        let o = sp.origin();
        let id = gsp_check(&identity(4), f).unwrap();
        assert_eq!(act(&id, &o, &sp).unwrap(), o);
        let g = gsp_check(&diag(&[1, 1, 0, 0]), f).unwrap();
        let x11 = vertex_key(&Lattice::x_eps(&[1, 1]), &sp).unwrap();
        assert_eq!(act(&g, &o, &sp).unwrap(), x11);
        let scalar = gsp_check(&diag(&[1, 1, 1, 1]), f).unwrap();
        assert_eq!(act(&scalar, &x11, &sp).unwrap(), x11);
    }

    fn unipotent_a(c: LocalScalar, f: &FieldSpec) -> SimilitudeMatrix {
        let mut m = identity(4);
        m[0][1] = c.clone();
        m[3][2] = c.neg(f);
        gsp_check(&m, f).unwrap()
    }

    #[test]
    fn parabolic_membership_examples() {
        let f = make_field(2, 1).unwrap();
        let id = gsp_check(&identity(4), &f).unwrap();
        assert!(q_o_membership(&id));
        assert!(!q_o_membership(&gsp_check(&diag(&[1, 0, 0, 1]), &f).unwrap()));
        assert!(q_o_membership(&unipotent_a(LocalScalar::t_pow(3), &f)));
        assert!(!q_o_membership(&unipotent_a(LocalScalar::t_pow(-1), &f)));
        for eps in [[0u8, 0], [1, 0], [0, 1], [1, 1]] {
            assert!(stabilizer_pair_membership(&id, &eps));
        }
        assert!(!stabilizer_pair_membership(&unipotent_a(LocalScalar::one(), &f), &[1, 0]));
        assert!(stabilizer_pair_membership(&unipotent_a(LocalScalar::t_pow(1), &f), &[1, 0]));
    }

    #[test]
    fn witness_examples() {
        let sp = space(2, 2);
        let f = &sp.field;
        let o = sp.origin();
        assert_eq!(iwasawa_witness(&o, &sp).unwrap().entries(), &identity(4));
        let x11 = vertex_key(&Lattice::x_eps(&[1, 1]), &sp).unwrap();
        assert_eq!(iwasawa_witness(&x11, &sp).unwrap().entries(), &diag(&[1, 1, 0, 0]));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let g = random_similitude(2, 4, &mut rng, f);
            let v = act(&g, &o, &sp).unwrap();
            let w = iwasawa_witness(&v, &sp).unwrap();
            assert_eq!(act(&w, &o, &sp).unwrap(), v);
        }
    }

    #[test]
    fn orbit_exponent_from_bounds_matches_statistic() {
        for n in 1..=5usize {
            for bits in 0..(1u32 << n) {
                let eps: Vec<u8> = (0..n).map(|i| ((bits >> i) & 1) as u8).collect();
                let m = eps.iter().filter(|&&e| e == 1).count() as i64;
                let big_m: i64 = (0..n)
                    .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                    .filter(|&(i, j)| eps[i] == 1 && eps[j] == 0)
                    .count() as i64;
                assert_eq!(orbit_exponent_from_bounds(&eps), big_m + m * (m + 1) / 2);
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let sp = space(3, 2);
        let v = vertex_key(&Lattice::x_eps(&[0, 1]), &sp).unwrap();
        let text = v.to_json(&sp.field).to_string();
        let back = Lattice::from_json(&serde_json::from_str(&text).unwrap(), &sp.field).unwrap();
        assert_eq!(vertex_key(&back, &sp).unwrap(), v);
        assert!(Lattice::from_json(&json!({"n": 2, "matrix": [[[]]]}), &sp.field).is_err());
    }
}
