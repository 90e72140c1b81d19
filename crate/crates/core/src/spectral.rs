//! Spectral radius of the special-vertex graph: the closed form, the orbit sum
//! over signatures, power iteration on finite balls and return probabilities of
//! the simple random walk, plus the strict expansion inequality.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::fq_symplectic::{lagrangian_count_closed, EpsilonSignature};
use crate::graph::BallGraph;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_ITERATION_CAP: usize = 100_000;
/// Return probabilities are exact up to this `k` and floating point beyond.
pub const DEFAULT_EXACT_WALK_STEPS: usize = 4;

/// Integers above `2^53` are emitted as strings so that JSON readers keep them exact.
pub fn json_uint(x: &BigUint) -> Value {
    match x.to_u64() {
        Some(v) if v <= 1 << 53 => json!(v),
        _ => json!(x.to_string()),
    }
}

/// `coeff * base^(quarter_exp / 4)`.
#[derive(Clone, Debug)]
pub struct QuarterPower {
    pub coeff: BigUint,
    pub base: u64,
    pub quarter_exp: u64,
}

impl QuarterPower {
    pub fn new(coeff: BigUint, base: u64, quarter_exp: u64) -> Self {
        QuarterPower {
            coeff,
            base,
            quarter_exp,
        }
    }

    /// `value^4` as an exact integer.
    pub fn fourth_power(&self) -> BigUint {
        self.coeff.pow(4) * BigUint::from(self.base).pow(self.quarter_exp as u32)
    }

    /// The value when it is an integer.
    pub fn integral_value(&self) -> Option<BigUint> {
        let v4 = self.fourth_power();
        let r = v4.nth_root(4);
        (r.pow(4) == v4).then_some(r)
    }

    pub fn to_f64(&self) -> f64 {
        self.coeff.to_f64().unwrap_or(f64::INFINITY)
            * (self.base as f64).powf(self.quarter_exp as f64 / 4.0)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "coeff": json_uint(&self.coeff),
            "base": self.base,
            "quarter_exponent": self.quarter_exp,
            "integral": self.integral_value().map(|v| json_uint(&v)),
            "approx": self.to_f64(),
        })
    }
}

impl PartialEq for QuarterPower {
    fn eq(&self, other: &Self) -> bool {
        self.fourth_power() == other.fourth_power()
    }
}

impl Eq for QuarterPower {}

impl PartialOrd for QuarterPower {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QuarterPower {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.fourth_power().cmp(&other.fourth_power())
    }
}

impl fmt::Display for QuarterPower {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}*{}^({}/4)", self.coeff, self.base, self.quarter_exp)
    }
}

/// `∏_{m=1}^n (q^m + 1)`.
pub fn degree_closed(n: u32, q: u64) -> BigUint {
    lagrangian_count_closed(n, q)
}

/// `2^n q^{n(n+1)/4}`.
pub fn rho_closed(n: u32, q: u64) -> QuarterPower {
    QuarterPower::new(BigUint::from(2u32).pow(n), q, (n * (n + 1)) as u64)
}

/// A sum `Σ c_k q^{k/4}` with `q` left symbolic.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct QuarterSum {
    pub terms: BTreeMap<u64, BigUint>,
}

impl QuarterSum {
    pub fn add_term(&mut self, quarter_exp: u64, coeff: BigUint) {
        *self.terms.entry(quarter_exp).or_insert_with(BigUint::zero) += coeff;
    }

    /// The single monomial `c q^{k/4}`, if the sum is one.
    pub fn as_monomial(&self) -> Option<(BigUint, u64)> {
        match self.terms.iter().collect::<Vec<_>>().as_slice() {
            [(k, c)] => Some(((*c).clone(), **k)),
            _ => None,
        }
    }

    /// Evaluates at a concrete `q`, merging exponents that differ by multiples of 4.
    pub fn at(&self, q: u64) -> Result<QuarterPower> {
        let mut by_class: BTreeMap<u64, (u64, BigUint)> = BTreeMap::new();
        for (&k, c) in &self.terms {
            let entry = by_class.entry(k % 4).or_insert((k, BigUint::zero()));
            let lo = entry.0.min(k);
            let rescale = |coeff: &BigUint, from: u64| coeff * BigUint::from(q).pow(((from - lo) / 4) as u32);
            entry.1 = rescale(&entry.1, entry.0) + rescale(c, k);
            entry.0 = lo;
        }
        match by_class.into_values().collect::<Vec<_>>().as_slice() {
            [(k, c)] => Ok(QuarterPower::new(c.clone(), q, *k)),
            _ => Err(Error::ModelViolation("sum is not a single quarter power".into())),
        }
    }
}

/// Exponent of `Card(Q_o x_eps)` and of `Card(Q_{x_eps} o) = Card(Q_o x_{1-eps})`.
fn orbit_exponents(eps: &EpsilonSignature) -> (u64, u64) {
    (eps.orbit_exponent(), eps.complement().orbit_exponent())
}

/// `Σ_eps Card(Q_o x_eps) sqrt(Card(Q_{x_eps} o) / Card(Q_o x_eps))` with `q`
/// symbolic. Each summand is `q^{(a + b)/2}` for the two orbit exponents.
pub fn rho_orbit_sum_symbolic(n: usize) -> QuarterSum {
    let mut sum = QuarterSum::default();
    for eps in EpsilonSignature::all(n) {
        let (a, b) = orbit_exponents(&eps);
        sum.add_term(2 * (a + b), BigUint::one());
    }
    sum
}

pub fn rho_orbit_sum(n: usize, q: u64) -> Result<QuarterPower> {
    rho_orbit_sum_symbolic(n).at(q)
}

/// The orbit sum from enumerated orbit sizes: each summand `sqrt(c_eps c_{1-eps})`
/// must be a power of `sqrt(q)`.
pub fn rho_orbit_sum_from_cards(
    q: u64,
    cards: &BTreeMap<EpsilonSignature, BigUint>,
) -> Result<QuarterPower> {
    let mut sum = QuarterSum::default();
    for (eps, c1) in cards {
        let c2 = cards
            .get(&eps.complement())
            .ok_or_else(|| Error::ModelViolation(format!("missing orbit {}", eps.label())))?;
        let mut prod = c1 * c2;
        let mut k = 0u64;
        let qb = BigUint::from(q);
        while prod > BigUint::one() && (&prod % &qb).is_zero() {
            prod /= &qb;
            k += 1;
        }
        if !prod.is_one() {
            return Err(Error::ModelViolation(format!(
                "orbit sizes for {} multiply to a non-power of q",
                eps.label()
            )));
        }
        sum.add_term(2 * k, BigUint::one());
    }
    sum.at(q)
}

/// `(lhs^4, rhs^4, lhs < rhs)` for `2^n q^{n(n+1)/4} < ∏ (q^m + 1)`.
pub fn expansion_inequality(n: u32, q: u64) -> (BigUint, BigUint, bool) {
    let lhs4 = rho_closed(n, q).fourth_power();
    let rhs4 = degree_closed(n, q).pow(4);
    let ok = lhs4 < rhs4;
    (lhs4, rhs4, ok)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PowerIteration {
    pub estimate: f64,
    pub iterations: usize,
}

/// Largest adjacency eigenvalue by power iteration from the all-ones vector.
///
/// Balls are bipartite, so the estimate is `||A x||` for the normalized iterate
/// `x` (the square root of the Rayleigh quotient of `A^2`); it increases
/// monotonically towards the top eigenvalue. Stops when successive estimates
/// differ by at most `tol` relative to the estimate.
pub fn power_iteration_adj(adj: &[Vec<usize>], tol: f64, cap: usize) -> Result<PowerIteration> {
    let n = adj.len();
    if n == 0 {
        return Ok(PowerIteration {
            estimate: 0.0,
            iterations: 0,
        });
    }
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut prev = f64::NEG_INFINITY;
    for it in 1..=cap {
        let y: Vec<f64> = adj
            .par_iter()
            .map(|nbrs| nbrs.iter().map(|&j| x[j]).sum())
            .collect();
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(PowerIteration {
                estimate: 0.0,
                iterations: it,
            });
        }
        x = y.into_iter().map(|v| v / norm).collect();
        if (norm - prev).abs() <= tol * norm {
            return Ok(PowerIteration {
                estimate: norm,
                iterations: it,
            });
        }
        prev = norm;
    }
    Err(Error::NonConvergence(cap))
}

pub fn power_iteration<V>(b: &BallGraph<V>, tol: f64) -> Result<f64> {
    Ok(power_iteration_adj(&b.adjacency, tol, DEFAULT_ITERATION_CAP)?.estimate)
}

/// Closed-walk counts `W_{2k}(o, o)` for `k = 0..=k_max` on a ball of radius at
/// least `k_max` around `o`; walks of length `2k` from `o` never leave `B_k`.
pub fn closed_walk_counts<V: Ord>(b: &BallGraph<V>, k_max: usize) -> Result<Vec<BigUint>> {
    if b.radius < k_max {
        return Err(Error::Shape(format!("ball radius {} is below {k_max}", b.radius)));
    }
    let o = b.center_index();
    let mut w = vec![BigUint::zero(); b.len()];
    w[o] = BigUint::one();
    let mut out = vec![BigUint::one()];
    for step in 1..=2 * k_max {
        w = b
            .adjacency
            .par_iter()
            .map(|nbrs| nbrs.iter().map(|&j| &w[j]).sum())
            .collect();
        if step % 2 == 0 {
            out.push(w[o].clone());
        }
    }
    Ok(out)
}

/// Floating-point return probabilities `p^{(2k)}(o, o)` for `k = 0..=k_max`.
pub fn return_probabilities_f64<V: Ord>(b: &BallGraph<V>, degree: usize, k_max: usize) -> Result<Vec<f64>> {
    if b.radius < k_max {
        return Err(Error::Shape(format!("ball radius {} is below {k_max}", b.radius)));
    }
    let o = b.center_index();
    let r = degree as f64;
    let mut w = vec![0.0; b.len()];
    w[o] = 1.0;
    let mut out = vec![1.0];
    for step in 1..=2 * k_max {
        w = b
            .adjacency
            .par_iter()
            .map(|nbrs| nbrs.iter().map(|&j| w[j]).sum::<f64>() / r)
            .collect();
        if step % 2 == 0 {
            out.push(w[o]);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct WalkBound {
    pub k: usize,
    pub exact: Option<BigRational>,
    pub probability: f64,
    /// `r * p^{(2k)}(o, o)^{1/(2k)}`, a lower bound for the spectral radius.
    pub bound: f64,
}

/// Return probabilities for `k = 1..=k_max`: exact rationals up to `exact_steps`,
/// floating point beyond. Both regimes are computed at the switch point and must
/// agree to `1e-12`.
pub fn return_probabilities<V: Ord>(
    b: &BallGraph<V>,
    degree: usize,
    k_max: usize,
    exact_steps: usize,
) -> Result<Vec<WalkBound>> {
    let exact_k = exact_steps.min(k_max);
    let counts = closed_walk_counts(b, exact_k)?;
    let floats = return_probabilities_f64(b, degree, k_max)?;
    let r = BigUint::from(degree);
    let mut out = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let exact = (k <= exact_k).then(|| {
            BigRational::new(counts[k].clone().into(), r.pow(2 * k as u32).into())
        });
        let probability = match &exact {
            Some(q) => q.to_f64().unwrap_or(f64::NAN),
            None => floats[k],
        };
        if k == exact_k && (probability - floats[k]).abs() > 1e-12 {
            return Err(Error::ModelViolation(format!(
                "exact and floating return probabilities disagree at k = {k}"
            )));
        }
        out.push(WalkBound {
            k,
            exact,
            probability,
            bound: degree as f64 * probability.powf(1.0 / (2 * k) as f64),
        });
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct SpectralReport {
    pub n: usize,
    pub q: u64,
    pub rho_closed: QuarterPower,
    pub degree: BigUint,
    pub rho_orbit_sum: Option<QuarterPower>,
    pub power_iter: Vec<(usize, f64)>,
    pub walk_bounds: Vec<WalkBound>,
    pub inequality_ok: bool,
}

impl SpectralReport {
    /// Checks every invariant the report should satisfy; returns the names of
    /// the ones that fail.
    pub fn failed_invariants(&self) -> Vec<String> {
        let rho = self.rho_closed.to_f64();
        let mut bad = Vec::new();
        if let Some(s) = &self.rho_orbit_sum {
            if s != &self.rho_closed {
                bad.push("orbit_sum_equals_closed".to_string());
            }
        }
        if !self.inequality_ok {
            bad.push("expansion_inequality".into());
        }
        if self.power_iter.iter().any(|&(_, x)| x > rho + 1e-9) {
            bad.push("power_iteration_below_rho".into());
        }
        if self.power_iter.windows(2).any(|w| w[1].1 + 1e-9 < w[0].1) {
            bad.push("power_iteration_monotone".into());
        }
        if self.walk_bounds.iter().any(|w| w.bound > rho + 1e-9) {
            bad.push("walk_bound_below_rho".into());
        }
        if self.walk_bounds.windows(2).any(|w| w[1].bound + 1e-12 < w[0].bound) {
            bad.push("walk_bound_monotone".into());
        }
        bad
    }

    pub fn to_json(&self) -> Value {
        json!({
            "n": self.n,
            "q": self.q,
            "rho_closed": self.rho_closed.to_json(),
            "degree": json_uint(&self.degree),
            "rho_orbit_sum": self.rho_orbit_sum.as_ref().map(QuarterPower::to_json),
            "power_iter": self.power_iter.iter().map(|(r, x)| json!({"radius": r, "estimate": x})).collect::<Vec<_>>(),
            "walk_bounds": self.walk_bounds.iter().map(|w| json!({
                "k": w.k,
                "exact": w.exact.as_ref().map(|q| json!({"num": q.numer().to_string(), "den": q.denom().to_string()})),
                "probability": w.probability,
                "bound": w.bound,
            })).collect::<Vec<_>>(),
            "inequality_ok": self.inequality_ok,
            "failed_invariants": self.failed_invariants(),
        })
    }
}
