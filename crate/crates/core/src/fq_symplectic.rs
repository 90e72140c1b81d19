//! Finite symplectic geometry over `F_q`: subspaces in reduced echelon form,
//! Lagrangians, isotropic flags, Gaussian binomials and the Borel orbits on
//! Lagrangians labelled by 0/1 signatures.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::coeffs::{FieldSpec, Fq};
use crate::error::{Error, Result};

/// Default cap on the number of subspaces any enumeration may produce.
pub const DEFAULT_ENUM_GUARD: u128 = 5_000_000;

/// A subspace of `F_q^ambient`, stored by its reduced row echelon basis.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FqSubspace {
    ambient: usize,
    basis: Vec<Vec<Fq>>,
}

pub fn rref(rows: &[Vec<Fq>], f: &FieldSpec) -> Vec<Vec<Fq>> {
    let mut m: Vec<Vec<Fq>> = rows.to_vec();
    let cols = m.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = f.inv(m[r][c]).unwrap();
        for x in m[r].iter_mut() {
            *x = f.mul(*x, inv);
        }
        let pivot = m[r].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i != r && !row[c].is_zero() {
                let k = f.neg(row[c]);
                for (x, &y) in row.iter_mut().zip(&pivot) {
                    *x = f.add(*x, f.mul(k, y));
                }
            }
        }
        r += 1;
        if r == m.len() {
            break;
        }
    }
    m.truncate(r);
    m
}

impl FqSubspace {
    pub fn span(ambient: usize, rows: &[Vec<Fq>], f: &FieldSpec) -> Self {
        FqSubspace {
            ambient,
            basis: rref(rows, f),
        }
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<Fq>] {
        &self.basis
    }

    pub fn pivots(&self) -> Vec<usize> {
        self.basis
            .iter()
            .map(|r| r.iter().position(|x| !x.is_zero()).unwrap())
            .collect()
    }

    /// `span({e_i : eps_i = 0} ∪ {f_i : eps_i = 1})`.
    pub fn coordinate_lagrangian(eps: &[u8]) -> Self {
        let n = eps.len();
        let mut rows: Vec<Vec<Fq>> = (0..n)
            .map(|i| {
                let mut r = vec![Fq::ZERO; 2 * n];
                r[if eps[i] == 0 { i } else { n + i }] = Fq::ONE;
                r
            })
            .collect();
        rows.sort_by_key(|r| r.iter().position(|x| !x.is_zero()));
        FqSubspace {
            ambient: 2 * n,
            basis: rows,
        }
    }

    /// Image under `u -> u g^T`.
    pub fn transformed(&self, g: &[Vec<Fq>], f: &FieldSpec) -> Self {
        let rows: Vec<Vec<Fq>> = self
            .basis
            .iter()
            .map(|u| {
                g.iter()
                    .map(|grow| {
                        u.iter()
                            .zip(grow)
                            .fold(Fq::ZERO, |acc, (&a, &b)| f.add(acc, f.mul(a, b)))
                    })
                    .collect()
            })
            .collect();
        Self::span(self.ambient, &rows, f)
    }

    pub fn contains(&self, v: &[Fq], f: &FieldSpec) -> bool {
        let mut rows = self.basis.clone();
        rows.push(v.to_vec());
        rref(&rows, f).len() == self.dim()
    }

    pub fn to_csv_field(&self) -> String {
        self.basis
            .iter()
            .map(|r| r.iter().map(|x| x.index().to_string()).collect::<Vec<_>>().join(" "))
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// The standard alternating form on `F_q^{2n}`.
pub fn form(u: &[Fq], v: &[Fq], n: usize, f: &FieldSpec) -> Fq {
    let mut acc = Fq::ZERO;
    for i in 0..n {
        acc = f.add(acc, f.mul(u[i], v[n + i]));
        acc = f.sub(acc, f.mul(u[n + i], v[i]));
    }
    acc
}

pub fn is_isotropic(u: &FqSubspace, f: &FieldSpec) -> bool {
    let n = u.ambient / 2;
    let b = &u.basis;
    (0..b.len()).all(|i| (i + 1..b.len()).all(|j| form(&b[i], &b[j], n, f).is_zero()))
}

pub fn is_lagrangian(u: &FqSubspace, f: &FieldSpec) -> bool {
    u.ambient % 2 == 0 && u.dim() == u.ambient / 2 && is_isotropic(u, f)
}

// ---------------------------------------------------------------- counting

pub fn gauss_binomial(n: u32, m: u32, q: u64) -> BigUint {
    if m > n {
        return BigUint::zero();
    }
    let q = BigUint::from(q);
    let mut num = BigUint::one();
    let mut den = BigUint::one();
    for i in 0..m {
        num *= q.pow(n - i) - 1u32;
        den *= q.pow(i + 1) - 1u32;
    }
    num / den
}

/// `∏_{m=1}^n (q^m + 1)`: the number of Lagrangians in `F_q^{2n}`.
pub fn lagrangian_count_closed(n: u32, q: u64) -> BigUint {
    let q = BigUint::from(q);
    (1..=n).fold(BigUint::one(), |acc, m| acc * (q.pow(m) + 1u32))
}

/// `∏_{m=1}^n (q^{2m} - 1) / (q - 1)`: complete isotropic flags.
pub fn isotropic_flag_count_closed(n: u32, q: u64) -> BigUint {
    let qb = BigUint::from(q);
    (1..=n).fold(BigUint::one(), |acc, m| acc * ((qb.pow(2 * m) - 1u32) / (q - 1)))
}

/// `∏_{m=1}^{dim} (q^m - 1) / (q - 1)`: complete flags in `F_q^dim`.
pub fn full_flag_count_closed(dim: u32, q: u64) -> BigUint {
    let qb = BigUint::from(q);
    (1..=dim).fold(BigUint::one(), |acc, m| acc * ((qb.pow(m) - 1u32) / (q - 1)))
}

fn guard(what: &'static str, size: &BigUint, limit: u128) -> Result<()> {
    let s: u128 = size.try_into().unwrap_or(u128::MAX);
    if s > limit {
        return Err(Error::SizeGuard { what, size: s, limit });
    }
    Ok(())
}

/// All `k`-dimensional subspaces of `F_q^ambient` whose echelon bases pass
/// `keep_row` row by row (the callback sees the rows fixed so far).
fn enumerate_echelon(
    ambient: usize,
    k: usize,
    f: &FieldSpec,
    keep_row: &dyn Fn(&[Vec<Fq>], &[Fq]) -> bool,
) -> Vec<FqSubspace> {
    let mut out = Vec::new();
    let mut pivots = Vec::with_capacity(k);
    pivot_sets(ambient, k, 0, &mut pivots, &mut |ps| {
        let mut rows = Vec::with_capacity(k);
        fill_rows(ambient, ps, f, keep_row, &mut rows, &mut out);
    });
    out.sort();
    out
}

fn pivot_sets(ambient: usize, k: usize, start: usize, cur: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
    if cur.len() == k {
        visit(cur);
        return;
    }
    for c in start..ambient {
        if ambient - c < k - cur.len() {
            break;
        }
        cur.push(c);
        pivot_sets(ambient, k, c + 1, cur, visit);
        cur.pop();
    }
}

fn fill_rows(
    ambient: usize,
    pivots: &[usize],
    f: &FieldSpec,
    keep_row: &dyn Fn(&[Vec<Fq>], &[Fq]) -> bool,
    rows: &mut Vec<Vec<Fq>>,
    out: &mut Vec<FqSubspace>,
) {
    let i = rows.len();
    if i == pivots.len() {
        out.push(FqSubspace {
            ambient,
            basis: rows.clone(),
        });
        return;
    }
    let p = pivots[i];
    let free: Vec<usize> = (p + 1..ambient).filter(|c| !pivots.contains(c)).collect();
    let q = f.q() as usize;
    let total = q.pow(free.len() as u32);
    let mut row = vec![Fq::ZERO; ambient];
    row[p] = Fq::ONE;
    for code in 0..total {
        let mut c = code;
        for &col in &free {
            row[col] = Fq((c % q) as u32);
            c /= q;
        }
        if keep_row(rows, &row) {
            rows.push(row.clone());
            fill_rows(ambient, pivots, f, keep_row, rows, out);
            rows.pop();
        }
    }
}

/// All `k`-dimensional subspaces of `F_q^ambient`, sorted.
pub fn enumerate_subspaces(ambient: usize, k: usize, f: &FieldSpec, limit: u128) -> Result<Vec<FqSubspace>> {
    guard("subspaces", &gauss_binomial(ambient as u32, k as u32, f.q()), limit)?;
    Ok(enumerate_echelon(ambient, k, f, &|_, _| true))
}

/// All Lagrangians of `F_q^{2n}`, sorted.
pub fn enumerate_lagrangians(n: usize, f: &FieldSpec, limit: u128) -> Result<Vec<FqSubspace>> {
    guard("lagrangians", &lagrangian_count_closed(n as u32, f.q()), limit)?;
    Ok(enumerate_echelon(2 * n, n, f, &|prev, row| {
        prev.iter().all(|r| form(r, row, n, f).is_zero())
    }))
}

/// Counts complete flags `0 ⊂ U_1 ⊂ ... ⊂ U_top` by extending one vector at a time
/// and deduplicating the resulting subspaces.
fn count_flags(ambient: usize, top: usize, symplectic: bool, f: &FieldSpec) -> BigUint {
    let n = ambient / 2;
    let vectors: Vec<Vec<Fq>> = (1..f.q().pow(ambient as u32))
        .map(|code| {
            let mut c = code;
            (0..ambient)
                .map(|_| {
                    let x = Fq((c % f.q()) as u32);
                    c /= f.q();
                    x
                })
                .collect()
        })
        .collect();
    // completions above a subspace depend only on the subspace
    let mut memo: HashMap<FqSubspace, BigUint> = HashMap::new();
    fn rec(
        u: &FqSubspace,
        top: usize,
        symplectic: bool,
        n: usize,
        vectors: &[Vec<Fq>],
        f: &FieldSpec,
        memo: &mut HashMap<FqSubspace, BigUint>,
    ) -> BigUint {
        if u.dim() == top {
            return BigUint::one();
        }
        if let Some(c) = memo.get(u) {
            return c.clone();
        }
        let mut next = BTreeSet::new();
        for v in vectors {
            if symplectic && !u.basis.iter().all(|b| form(b, v, n, f).is_zero()) {
                continue;
            }
            if u.contains(v, f) {
                continue;
            }
            let mut rows = u.basis.clone();
            rows.push(v.clone());
            next.insert(FqSubspace::span(u.ambient, &rows, f));
        }
        let total = next
            .iter()
            .map(|w| rec(w, top, symplectic, n, vectors, f, memo))
            .sum::<BigUint>();
        memo.insert(u.clone(), total.clone());
        total
    }
    let zero = FqSubspace {
        ambient,
        basis: Vec::new(),
    };
    rec(&zero, top, symplectic, n, &vectors, f, &mut memo)
}

/// Complete isotropic flags in `F_q^{2n}`, by enumeration.
pub fn count_isotropic_flags(n: usize, f: &FieldSpec, limit: u128) -> Result<BigUint> {
    guard("isotropic flags", &isotropic_flag_count_closed(n as u32, f.q()), limit)?;
    Ok(count_flags(2 * n, n, true, f))
}

/// Complete flags in `F_q^dim`, by enumeration.
pub fn count_full_flags(dim: usize, f: &FieldSpec, limit: u128) -> Result<BigUint> {
    guard("flags", &full_flag_count_closed(dim as u32, f.q()), limit)?;
    Ok(count_flags(dim, dim, false, f))
}

// ---------------------------------------------------------------- signatures

/// `Σ_{i<j} max(0, eps_i - eps_j)`: the number of 0s following each 1.
pub fn m_stat(eps: &[u8]) -> u64 {
    let mut ones = 0;
    let mut total = 0;
    for &e in eps {
        if e == 1 {
            ones += 1;
        } else {
            total += ones;
        }
    }
    total
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EpsilonSignature {
    pub bits: Vec<u8>,
}

impl EpsilonSignature {
    pub fn new(bits: Vec<u8>) -> Self {
        EpsilonSignature { bits }
    }

    pub fn all(n: usize) -> Vec<EpsilonSignature> {
        (0..1u32 << n)
            .map(|code| {
                // most significant bit first so that the list is lexicographic
                Self::new((0..n).map(|i| ((code >> (n - 1 - i)) & 1) as u8).collect())
            })
            .collect()
    }

    pub fn m(&self) -> u64 {
        self.bits.iter().map(|&b| b as u64).sum()
    }

    pub fn big_m(&self) -> u64 {
        m_stat(&self.bits)
    }

    /// `M + m(m+1)/2`, the exponent of `q` in the predicted orbit size.
    pub fn orbit_exponent(&self) -> u64 {
        let m = self.m();
        self.big_m() + m * (m + 1) / 2
    }

    pub fn complement(&self) -> Self {
        Self::new(self.bits.iter().map(|&b| 1 - b).collect())
    }

    pub fn label(&self) -> String {
        self.bits.iter().map(|b| b.to_string()).collect()
    }
}

/// The signature of a Lagrangian: `eps_i = 0` exactly when intersecting with
/// `span(e_1..e_i)` gains a dimension over `span(e_1..e_{i-1})`. These
/// intersection dimensions are invariant under the Borel group.
pub fn signature(u: &FqSubspace, f: &FieldSpec) -> Result<EpsilonSignature> {
    if !is_lagrangian(u, f) {
        return Err(Error::NotLagrangian);
    }
    let n = u.ambient / 2;
    let mut rows = u.basis.clone();
    let mut prev = 0;
    let mut bits = Vec::with_capacity(n);
    for i in 0..n {
        let mut e = vec![Fq::ZERO; 2 * n];
        e[i] = Fq::ONE;
        rows.push(e);
        let meet = n + i + 1 - rref(&rows, f).len();
        bits.push(if meet > prev { 0 } else { 1 });
        prev = meet;
    }
    Ok(EpsilonSignature::new(bits))
}

/// Generators of the finite Borel group of `GSp_{2n}(F_q)` (upper-triangular
/// `A`, `C = 0`): torus elements built from a primitive element, the similitude
/// scaling, `A`-block root elements `I + c E_ij` (with `D = I - c E_ji`) and the
/// symmetric `B`-block elements, for every `c ∈ F_q^×`.
pub fn borel_generators(n: usize, f: &FieldSpec) -> Vec<Vec<Vec<Fq>>> {
    let dim = 2 * n;
    let id = || -> Vec<Vec<Fq>> {
        (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { Fq::ONE } else { Fq::ZERO }).collect())
            .collect()
    };
    let w = f.primitive_element();
    let mut gens = Vec::new();
    if w != Fq::ONE {
        for i in 0..n {
            let mut g = id();
            g[i][i] = w;
            g[n + i][n + i] = f.inv(w).unwrap();
            gens.push(g);
        }
        let mut g = id();
        for i in 0..n {
            g[n + i][n + i] = w;
        }
        gens.push(g);
    }
    for c in f.nonzero_elements() {
        for i in 0..n {
            for j in i + 1..n {
                let mut g = id();
                g[i][j] = c;
                g[n + j][n + i] = f.neg(c);
                gens.push(g);
            }
            for j in i..n {
                let mut g = id();
                g[i][n + j] = c;
                g[j][n + i] = c;
                gens.push(g);
            }
        }
    }
    gens
}

/// Orbits of the finite Borel group on the Lagrangians of `F_q^{2n}`, keyed by
/// the signature of the coordinate Lagrangian each orbit contains.
pub fn borel_orbits(
    n: usize,
    f: &FieldSpec,
    limit: u128,
) -> Result<BTreeMap<EpsilonSignature, Vec<FqSubspace>>> {
    let lags = enumerate_lagrangians(n, f, limit)?;
    let index: HashMap<&FqSubspace, usize> = lags.iter().enumerate().map(|(i, u)| (u, i)).collect();
    let mut parent: Vec<usize> = (0..lags.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for g in borel_generators(n, f) {
        for (i, u) in lags.iter().enumerate() {
            let image = u.transformed(&g, f);
            let j = *index
                .get(&image)
                .ok_or_else(|| Error::ModelViolation("Borel image is not a Lagrangian".into()))?;
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut classes: BTreeMap<usize, Vec<FqSubspace>> = BTreeMap::new();
    for (i, u) in lags.iter().enumerate() {
        let root = find(&mut parent, i);
        classes.entry(root).or_default().push(u.clone());
    }
    let coords: HashMap<FqSubspace, EpsilonSignature> = EpsilonSignature::all(n)
        .into_iter()
        .map(|s| (FqSubspace::coordinate_lagrangian(&s.bits), s))
        .collect();
    let mut out = BTreeMap::new();
    for members in classes.into_values() {
        let reps: Vec<&EpsilonSignature> = members.iter().filter_map(|u| coords.get(u)).collect();
        if reps.len() != 1 {
            return Err(Error::OrbitWithoutRepresentative(members.len()));
        }
        out.insert(reps[0].clone(), members);
    }
    Ok(out)
}

/// `W(n, m) = Σ_{|eps| = m} q^{M(eps)}`.
pub fn weighted_signature_count(n: usize, m: usize, q: u64) -> BigUint {
    EpsilonSignature::all(n)
        .iter()
        .filter(|s| s.m() == m as u64)
        .map(|s| BigUint::from(q).pow(s.big_m() as u32))
        .sum()
}

/// Both sides of `∏_{m=1}^n (1 + q^m) = Σ_i q^{i(i+1)/2} binom(n, i)_q`.
pub fn lagrangian_identity_sides(n: u32, q: u64) -> (BigUint, BigUint) {
    let lhs = lagrangian_count_closed(n, q);
    let rhs = (0..=n)
        .map(|i| BigUint::from(q).pow(i * (i + 1) / 2) * gauss_binomial(n, i, q))
        .sum();
    (lhs, rhs)
}
