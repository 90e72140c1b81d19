//! Finite fields `F_q` and truncated Laurent series over them.
//!
//! The residue field is `F_q` with `q = p^e`, realized as `F_p[x]/(m(x))` for the
//! lexicographically least monic irreducible `m`. Elements are encoded as the
//! integer `c_0 + c_1 p + ... + c_{e-1} p^{e-1}` of their coefficient vector, so
//! `0` and `1` are the field's zero and one.
//!
//! [`LocalScalar`] is an element of `K = F_q((t))` with the uniformizer fixed to
//! `t`. A scalar is either exact (a Laurent polynomial) or known modulo `t^N` for
//! an absolute exponent bound `N`.

use std::fmt;

use serde_json::{json, Value};

use crate::error::{Error, Result};

/// Fields up to this order get full addition and multiplication tables.
const TABLE_LIMIT: u64 = 512;
/// Hard cap on field order; larger fields are never needed by the graph code.
const MAX_ORDER: u64 = 1 << 24;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fq(pub(crate) u32);

impl Fq {
    pub const ZERO: Fq = Fq(0);
    pub const ONE: Fq = Fq(1);

    /// Integer encoding `sum c_i p^i` of the coefficient vector.
    pub fn index(self) -> u32 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

#[derive(Clone, Debug)]
struct Tables {
    add: Vec<u32>,
    mul: Vec<u32>,
    neg: Vec<u32>,
    inv: Vec<u32>,
}

/// The residue field `F_q`, `q = p^e`.
#[derive(Clone, Debug)]
pub struct FieldSpec {
    p: u32,
    e: u32,
    q: u32,
    /// Monic modulus, constant term first, length `e + 1`.
    modulus: Vec<u32>,
    tables: Option<Tables>,
}

impl PartialEq for FieldSpec {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.e == other.e && self.modulus == other.modulus
    }
}

impl Eq for FieldSpec {}

pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Builds `F_{p^e}`. The modulus is the least monic irreducible polynomial of
/// degree `e` in the order given by the integer encoding of its lower
/// coefficients, so the same `(p, e)` always yields the same field.
pub fn make_field(p: u64, e: u32) -> Result<FieldSpec> {
    if !is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    if e < 1 {
        return Err(Error::ExtensionDegree(e));
    }
    let q = (p as u128).checked_pow(e).filter(|&q| q <= MAX_ORDER as u128);
    let q = match q {
        Some(q) => q as u64,
        None => return Err(Error::FieldTooLarge { p, e }),
    };
    let p32 = p as u32;
    let modulus = if e == 1 {
        vec![0, 1]
    } else {
        least_irreducible(p32, e as usize)
    };
    let mut field = FieldSpec {
        p: p32,
        e,
        q: q as u32,
        modulus,
        tables: None,
    };
    if q <= TABLE_LIMIT {
        field.tables = Some(field.build_tables());
    }
    Ok(field)
}

fn poly_rem(num: &[u32], den: &[u32], p: u32) -> Vec<u32> {
    // den is monic
    let mut r = num.to_vec();
    let dd = den.len() - 1;
    while r.len() > dd {
        let lead = *r.last().unwrap();
        let shift = r.len() - 1 - dd;
        if lead != 0 {
            for (i, &c) in den.iter().enumerate() {
                let idx = shift + i;
                r[idx] = (r[idx] + p - (lead as u64 * c as u64 % p as u64) as u32) % p;
            }
        }
        r.pop();
    }
    r
}

fn least_irreducible(p: u32, e: usize) -> Vec<u32> {
    let count = (p as u64).pow(e as u32);
    for code in 0..count {
        let mut poly = digits(code, p, e);
        poly.push(1);
        if poly[0] == 0 {
            continue;
        }
        if is_irreducible(&poly, p) {
            return poly;
        }
    }
    unreachable!("irreducible polynomials exist in every degree")
}

/// Irreducibility by trial division with every monic polynomial of degree at
/// most `deg / 2`.
pub(crate) fn is_irreducible(poly: &[u32], p: u32) -> bool {
    let deg = poly.len() - 1;
    for d in 1..=deg / 2 {
        let count = (p as u64).pow(d as u32);
        for code in 0..count {
            let mut div = digits(code, p, d);
            div.push(1);
            if poly_rem(poly, &div, p).iter().all(|&c| c == 0) {
                return false;
            }
        }
    }
    true
}

fn digits(mut code: u64, p: u32, len: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push((code % p as u64) as u32);
        code /= p as u64;
    }
    out
}

impl FieldSpec {
    pub fn p(&self) -> u64 {
        self.p as u64
    }

    pub fn e(&self) -> u32 {
        self.e
    }

    pub fn q(&self) -> u64 {
        self.q as u64
    }

    /// Modulus coefficients, constant term first (`[0, 1]` for prime fields).
    pub fn modulus(&self) -> &[u32] {
        &self.modulus
    }

    pub fn elements(&self) -> impl Iterator<Item = Fq> {
        (0..self.q).map(Fq)
    }

    pub fn nonzero_elements(&self) -> impl Iterator<Item = Fq> {
        (1..self.q).map(Fq)
    }

    pub fn coeffs(&self, x: Fq) -> Vec<u32> {
        digits(x.0 as u64, self.p, self.e as usize)
    }

    pub fn from_coeffs(&self, c: &[u32]) -> Result<Fq> {
        if c.len() != self.e as usize || c.iter().any(|&x| x >= self.p) {
            return Err(Error::Parse(format!(
                "coefficient vector {c:?} is not an element of F_{}^{}",
                self.p, self.e
            )));
        }
        Ok(Fq(c.iter().rev().fold(0u32, |acc, &x| acc * self.p + x)))
    }

    /// Image of an integer in the prime subfield.
    pub fn from_int(&self, k: i64) -> Fq {
        Fq(k.rem_euclid(self.p as i64) as u32)
    }

    fn build_tables(&self) -> Tables {
        let q = self.q as usize;
        let mut add = vec![0u32; q * q];
        let mut mul = vec![0u32; q * q];
        for a in 0..q {
            for b in 0..q {
                add[a * q + b] = self.add_slow(a as u32, b as u32);
                mul[a * q + b] = self.mul_slow(a as u32, b as u32);
            }
        }
        let mut neg = vec![0u32; q];
        let mut inv = vec![0u32; q];
        for a in 0..q {
            neg[a] = (0..q).find(|&b| add[a * q + b] == 0).unwrap() as u32;
            if a != 0 {
                inv[a] = (1..q).find(|&b| mul[a * q + b] == 1).unwrap() as u32;
            }
        }
        Tables { add, mul, neg, inv }
    }

    fn add_slow(&self, a: u32, b: u32) -> u32 {
        if self.e == 1 {
            return ((a as u64 + b as u64) % self.p as u64) as u32;
        }
        let (mut a, mut b) = (a, b);
        let mut out = 0u32;
        let mut place = 1u32;
        for _ in 0..self.e {
            let d = (a % self.p + b % self.p) % self.p;
            out += d * place;
            place = place.wrapping_mul(self.p);
            a /= self.p;
            b /= self.p;
        }
        out
    }

    fn mul_slow(&self, a: u32, b: u32) -> u32 {
        let p = self.p as u64;
        if self.e == 1 {
            return ((a as u64 * b as u64) % p) as u32;
        }
        let e = self.e as usize;
        let da = digits(a as u64, self.p, e);
        let db = digits(b as u64, self.p, e);
        let mut prod = vec![0u32; 2 * e - 1];
        for i in 0..e {
            for j in 0..e {
                prod[i + j] = ((prod[i + j] as u64 + da[i] as u64 * db[j] as u64) % p) as u32;
            }
        }
        let r = poly_rem(&prod, &self.modulus, self.p);
        r.iter().rev().fold(0u32, |acc, &x| acc * self.p + x)
    }

    #[inline]
    pub fn add(&self, a: Fq, b: Fq) -> Fq {
        match &self.tables {
            Some(t) => Fq(t.add[(a.0 * self.q + b.0) as usize]),
            None => Fq(self.add_slow(a.0, b.0)),
        }
    }

    #[inline]
    pub fn mul(&self, a: Fq, b: Fq) -> Fq {
        match &self.tables {
            Some(t) => Fq(t.mul[(a.0 * self.q + b.0) as usize]),
            None => Fq(self.mul_slow(a.0, b.0)),
        }
    }

    #[inline]
    pub fn neg(&self, a: Fq) -> Fq {
        match &self.tables {
            Some(t) => Fq(t.neg[a.0 as usize]),
            None => {
                let c: Vec<u32> = self
                    .coeffs(a)
                    .iter()
                    .map(|&x| (self.p - x) % self.p)
                    .collect();
                self.from_coeffs(&c).unwrap()
            }
        }
    }

    #[inline]
    pub fn sub(&self, a: Fq, b: Fq) -> Fq {
        self.add(a, self.neg(b))
    }

    pub fn pow(&self, a: Fq, mut k: u64) -> Fq {
        let mut base = a;
        let mut acc = Fq::ONE;
        while k > 0 {
            if k & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            k >>= 1;
        }
        acc
    }

    /// Multiplicative inverse (`fq_inverse`).
    pub fn inv(&self, a: Fq) -> Result<Fq> {
        if a.is_zero() {
            return Err(Error::ZeroInverse);
        }
        Ok(match &self.tables {
            Some(t) => Fq(t.inv[a.0 as usize]),
            None => self.pow(a, self.q as u64 - 2),
        })
    }

    /// A generator of the cyclic group `F_q^x` (the least one by encoding).
    pub fn primitive_element(&self) -> Fq {
        let order = self.q as u64 - 1;
        let mut factors = Vec::new();
        let mut m = order;
        let mut d = 2;
        while d * d <= m {
            if m % d == 0 {
                factors.push(d);
                while m % d == 0 {
                    m /= d;
                }
            }
            d += 1;
        }
        if m > 1 {
            factors.push(m);
        }
        self.nonzero_elements()
            .find(|&g| factors.iter().all(|&r| self.pow(g, order / r) != Fq::ONE))
            .expect("F_q^x is cyclic")
    }
}

pub fn fq_inverse(x: Fq, f: &FieldSpec) -> Result<Fq> {
    f.inv(x)
}

/// `ord(x)`, with `Infinite` for zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Valuation {
    Finite(i64),
    Infinite,
}

impl Valuation {
    pub fn finite(self) -> Option<i64> {
        match self {
            Valuation::Finite(v) => Some(v),
            Valuation::Infinite => None,
        }
    }
}

/// A truncated Laurent series over `F_q`.
///
/// `coeffs[i]` is the coefficient of `t^(val + i)`; the first and last stored
/// coefficients are nonzero. `prec = Some(N)` means the series is known modulo
/// `t^N` (all stored exponents are below `N`); `None` means exact.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LocalScalar {
    val: i64,
    coeffs: Vec<Fq>,
    prec: Option<i64>,
}

impl LocalScalar {
    pub fn zero() -> Self {
        LocalScalar {
            val: 0,
            coeffs: Vec::new(),
            prec: None,
        }
    }

    /// Zero modulo `t^prec`: the "possibly inexact zero".
    pub fn zero_at(prec: i64) -> Self {
        LocalScalar {
            val: 0,
            coeffs: Vec::new(),
            prec: Some(prec),
        }
    }

    pub fn one() -> Self {
        Self::monomial(Fq::ONE, 0)
    }

    pub fn constant(c: Fq) -> Self {
        Self::monomial(c, 0)
    }

    /// `c * t^k`.
    pub fn monomial(c: Fq, k: i64) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        LocalScalar {
            val: k,
            coeffs: vec![c],
            prec: None,
        }
    }

    pub fn t_pow(k: i64) -> Self {
        Self::monomial(Fq::ONE, k)
    }

    /// Builds a scalar from `(exponent, coefficient)` terms; repeated exponents add.
    pub fn from_terms(terms: &[(i64, Fq)], prec: Option<i64>, f: &FieldSpec) -> Self {
        let live: Vec<_> = terms
            .iter()
            .filter(|(k, c)| !c.is_zero() && prec.map_or(true, |p| *k < p))
            .collect();
        if live.is_empty() {
            return LocalScalar {
                val: 0,
                coeffs: Vec::new(),
                prec,
            };
        }
        let lo = live.iter().map(|t| t.0).min().unwrap();
        let hi = live.iter().map(|t| t.0).max().unwrap();
        let mut coeffs = vec![Fq::ZERO; (hi - lo + 1) as usize];
        for (k, c) in live {
            let slot = &mut coeffs[(k - lo) as usize];
            *slot = f.add(*slot, *c);
        }
        Self::normalized(lo, coeffs, prec)
    }

    fn normalized(mut val: i64, mut coeffs: Vec<Fq>, prec: Option<i64>) -> Self {
        if let Some(p) = prec {
            let keep = (p - val).clamp(0, coeffs.len() as i64) as usize;
            coeffs.truncate(keep);
        }
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        let lead = coeffs.iter().take_while(|c| c.is_zero()).count();
        if lead == coeffs.len() {
            return LocalScalar {
                val: 0,
                coeffs: Vec::new(),
                prec,
            };
        }
        if lead > 0 {
            coeffs.drain(..lead);
            val += lead as i64;
        }
        LocalScalar { val, coeffs, prec }
    }

    pub fn valuation(&self) -> Valuation {
        if self.coeffs.is_empty() {
            Valuation::Infinite
        } else {
            Valuation::Finite(self.val)
        }
    }

    /// Valuation of a nonzero scalar.
    #[inline]
    pub(crate) fn val_opt(&self) -> Option<i64> {
        if self.coeffs.is_empty() {
            None
        } else {
            Some(self.val)
        }
    }

    /// Largest stored exponent plus one (the valuation for zero).
    fn end(&self) -> i64 {
        self.val + self.coeffs.len() as i64
    }

    pub fn precision(&self) -> Option<i64> {
        self.prec
    }

    pub fn is_exact(&self) -> bool {
        self.prec.is_none()
    }

    /// True for an exact zero and for a zero that is only known modulo `t^N`.
    pub fn is_zero_at_precision(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Zero modulo `t^N` but possibly nonzero beyond: the inexact-zero flag.
    pub fn is_inexact_zero(&self) -> bool {
        self.coeffs.is_empty() && self.prec.is_some()
    }

    /// Exact zero test; an inexact zero is an error rather than a guess.
    pub fn is_zero(&self) -> Result<bool> {
        match (self.coeffs.is_empty(), self.prec) {
            (false, _) => Ok(false),
            (true, None) => Ok(true),
            (true, Some(p)) => Err(Error::InexactZero(p)),
        }
    }

    pub fn is_one(&self) -> bool {
        self.val == 0 && self.coeffs.len() == 1 && self.coeffs[0] == Fq::ONE
    }

    pub fn coeff(&self, k: i64) -> Fq {
        if k < self.val || k >= self.end() {
            Fq::ZERO
        } else {
            self.coeffs[(k - self.val) as usize]
        }
    }

    pub fn leading_coeff(&self) -> Option<Fq> {
        self.coeffs.first().copied()
    }

    /// Nonzero `(exponent, coefficient)` pairs in increasing exponent order.
    pub fn terms(&self) -> impl Iterator<Item = (i64, Fq)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(move |(i, &c)| (self.val + i as i64, c))
    }

    /// Lower bound on the valuation; `None` stands for `+infinity`.
    fn val_lower_bound(&self) -> Option<i64> {
        match (self.coeffs.is_empty(), self.prec) {
            (false, _) => Some(self.val),
            (true, Some(p)) => Some(p),
            (true, None) => None,
        }
    }

    pub fn neg(&self, f: &FieldSpec) -> Self {
        LocalScalar {
            val: self.val,
            coeffs: self.coeffs.iter().map(|&c| f.neg(c)).collect(),
            prec: self.prec,
        }
    }

    pub fn add(&self, other: &Self, f: &FieldSpec) -> Self {
        let prec = min_prec(self.prec, other.prec);
        if self.coeffs.is_empty() {
            return other.clone().with_prec_cap(prec);
        }
        if other.coeffs.is_empty() {
            return self.clone().with_prec_cap(prec);
        }
        let lo = self.val.min(other.val);
        let hi = self.end().max(other.end());
        let mut coeffs = vec![Fq::ZERO; (hi - lo) as usize];
        for (i, &c) in self.coeffs.iter().enumerate() {
            coeffs[(self.val - lo) as usize + i] = c;
        }
        for (i, &c) in other.coeffs.iter().enumerate() {
            let slot = &mut coeffs[(other.val - lo) as usize + i];
            *slot = f.add(*slot, c);
        }
        Self::normalized(lo, coeffs, prec)
    }

    pub fn sub(&self, other: &Self, f: &FieldSpec) -> Self {
        self.add(&other.neg(f), f)
    }

    /// Product with precision `min(P_a + ord b, P_b + ord a)` (`series_mul`).
    pub fn mul(&self, other: &Self, f: &FieldSpec) -> Self {
        let (va, vb) = (self.val_lower_bound(), other.val_lower_bound());
        let (va, vb) = match (va, vb) {
            (Some(a), Some(b)) => (a, b),
            // exact zero times anything
            _ => return Self::zero(),
        };
        let prec = min_prec(
            self.prec.map(|p| p + vb),
            other.prec.map(|p| p + va),
        );
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return LocalScalar {
                val: 0,
                coeffs: Vec::new(),
                prec,
            };
        }
        let lo = self.val + other.val;
        let mut len = self.coeffs.len() + other.coeffs.len() - 1;
        if let Some(p) = prec {
            len = len.min((p - lo).max(0) as usize);
        }
        let mut coeffs = vec![Fq::ZERO; len];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a.is_zero() || i >= len {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate() {
                if i + j >= len {
                    break;
                }
                coeffs[i + j] = f.add(coeffs[i + j], f.mul(a, b));
            }
        }
        Self::normalized(lo, coeffs, prec)
    }

    /// Multiplication by a field constant.
    pub fn scale(&self, c: Fq, f: &FieldSpec) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        LocalScalar {
            val: self.val,
            coeffs: self.coeffs.iter().map(|&x| f.mul(x, c)).collect(),
            prec: self.prec,
        }
    }

    /// Multiplication by `t^k`.
    pub fn shift(&self, k: i64) -> Self {
        LocalScalar {
            val: if self.coeffs.is_empty() { 0 } else { self.val + k },
            coeffs: self.coeffs.clone(),
            prec: self.prec.map(|p| p + k),
        }
    }

    fn with_prec_cap(self, prec: Option<i64>) -> Self {
        match prec {
            Some(p) if self.prec.map_or(true, |q| p < q) => {
                Self::normalized(self.val, self.coeffs, Some(p))
            }
            _ => self,
        }
    }

    /// Reduces modulo `t^bound`, recording the loss of precision.
    pub fn truncate(&self, bound: i64) -> Self {
        self.clone().with_prec_cap(Some(bound))
    }

    /// Inverse of a nonzero scalar `u = t^v w` (`series_invert_unit`): the series
    /// `t^{-v} w^{-1}` known modulo `t^window` (or exactly when `w` is a
    /// constant and `u` is exact).
    pub fn invert_unit(&self, window: i64, f: &FieldSpec) -> Result<Self> {
        let v = match self.val_opt() {
            Some(v) => v,
            None => return Err(Error::ZeroInverse),
        };
        let inv0 = f.inv(self.coeffs[0])?;
        if self.prec.is_none() && self.coeffs.len() == 1 {
            return Ok(Self::monomial(inv0, -v));
        }
        let prec = match self.prec {
            Some(p) => window.min(p - 2 * v),
            None => window,
        };
        let count = (prec + v).max(0) as usize;
        let mut out = vec![Fq::ZERO; count];
        for k in 0..count {
            if k == 0 {
                out[0] = inv0;
                continue;
            }
            let mut acc = Fq::ZERO;
            for j in 1..=k.min(self.coeffs.len() - 1) {
                acc = f.add(acc, f.mul(self.coeffs[j], out[k - j]));
            }
            out[k] = f.neg(f.mul(inv0, acc));
        }
        Ok(Self::normalized(-v, out, Some(prec)))
    }

    // ---- exact polynomial helpers used by the lattice code (values in O mod t^bound) ----

    /// Drops every term of exponent `>= bound`, keeping the value exact. Used where
    /// the caller works in `O / t^bound` deliberately.
    pub(crate) fn reduce_mod(&self, bound: i64) -> Self {
        if self.end() <= bound {
            return self.clone();
        }
        Self::normalized(self.val, self.coeffs.clone(), Some(bound)).exact()
    }

    fn exact(mut self) -> Self {
        self.prec = None;
        self
    }

    /// `(low, high)` with `self = low + t^k * high`, `low` holding exponents `< k`.
    pub(crate) fn split_at(&self, k: i64) -> (Self, Self) {
        if self.coeffs.is_empty() || self.end() <= k {
            return (self.clone(), Self::zero());
        }
        if self.val >= k {
            return (Self::zero(), self.shift(-k));
        }
        let cut = (k - self.val) as usize;
        let low = Self::normalized(self.val, self.coeffs[..cut].to_vec(), None);
        let high = Self::normalized(0, self.coeffs[cut..].to_vec(), None);
        (low, high)
    }

    /// Product reduced modulo `t^bound`, exact result.
    pub(crate) fn mul_mod(&self, other: &Self, bound: i64, f: &FieldSpec) -> Self {
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return Self::zero();
        }
        let lo = self.val + other.val;
        let len = (self.coeffs.len() + other.coeffs.len() - 1).min((bound - lo).max(0) as usize);
        if len == 0 {
            return Self::zero();
        }
        let mut coeffs = vec![Fq::ZERO; len];
        for (i, &a) in self.coeffs.iter().enumerate().take(len) {
            if a.is_zero() {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate().take(len - i) {
                coeffs[i + j] = f.add(coeffs[i + j], f.mul(a, b));
            }
        }
        Self::normalized(lo, coeffs, None)
    }

    /// `self + c * y` reduced modulo `t^bound`, exact result.
    pub(crate) fn add_mul_mod(&self, c: &Self, y: &Self, bound: i64, f: &FieldSpec) -> Self {
        if c.coeffs.is_empty() || y.coeffs.is_empty() {
            return self.reduce_mod(bound);
        }
        let plo = c.val + y.val;
        let pend = (c.end() + y.end() - 1).min(bound);
        let lo = if self.coeffs.is_empty() {
            plo
        } else {
            self.val.min(plo)
        };
        let end = self.end().min(bound).max(pend);
        if end <= lo {
            return Self::zero();
        }
        let mut coeffs = vec![Fq::ZERO; (end - lo) as usize];
        for (i, &a) in self.coeffs.iter().enumerate() {
            let k = self.val + i as i64;
            if k >= bound {
                break;
            }
            coeffs[(k - lo) as usize] = a;
        }
        for (i, &a) in c.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            let base = c.val + i as i64 + y.val;
            if base >= bound {
                break;
            }
            for (j, &b) in y.coeffs.iter().enumerate() {
                let k = base + j as i64;
                if k >= bound {
                    break;
                }
                let slot = &mut coeffs[(k - lo) as usize];
                *slot = f.add(*slot, f.mul(a, b));
            }
        }
        Self::normalized(lo, coeffs, None)
    }

    /// Inverse of a unit (valuation 0) modulo `t^bound`, exact result.
    pub(crate) fn unit_inverse_mod(&self, bound: i64, f: &FieldSpec) -> Result<Self> {
        if self.val_opt() != Some(0) {
            return Err(Error::Precision("expected a unit of O".into()));
        }
        let inv = self.clone().exact().invert_unit(bound, f)?;
        Ok(inv.exact())
    }

    // ---- text format ----

    /// `[[exponent, coeff], ...]` with `coeff` an integer over a prime field and
    /// a coefficient vector otherwise. Inexact values are wrapped as
    /// `{"terms": [...], "prec": N}`.
    pub fn to_json(&self, f: &FieldSpec) -> Value {
        let terms: Vec<Value> = self
            .terms()
            .map(|(k, c)| {
                if f.e() == 1 {
                    json!([k, c.index()])
                } else {
                    json!([k, f.coeffs(c)])
                }
            })
            .collect();
        match self.prec {
            None => Value::Array(terms),
            Some(p) => json!({ "terms": terms, "prec": p }),
        }
    }

    pub fn from_json(v: &Value, f: &FieldSpec) -> Result<Self> {
        let bad = |m: &str| Error::Parse(format!("scalar {v}: {m}"));
        let (terms, prec) = match v {
            Value::Array(a) => (a, None),
            Value::Object(o) => {
                let t = o
                    .get("terms")
                    .and_then(Value::as_array)
                    .ok_or_else(|| bad("missing terms"))?;
                let p = o
                    .get("prec")
                    .and_then(Value::as_i64)
                    .ok_or_else(|| bad("missing prec"))?;
                (t, Some(p))
            }
            _ => return Err(bad("expected an array of [exponent, coeff] pairs")),
        };
        let mut parsed = Vec::with_capacity(terms.len());
        for term in terms {
            let pair = term
                .as_array()
                .filter(|a| a.len() == 2)
                .ok_or_else(|| bad("term is not a pair"))?;
            let k = pair[0].as_i64().ok_or_else(|| bad("exponent is not an integer"))?;
            let c = match &pair[1] {
                Value::Number(n) if f.e() == 1 => {
                    let c = n.as_u64().ok_or_else(|| bad("coefficient is not a natural number"))?;
                    if c >= f.p() {
                        return Err(bad("coefficient out of range"));
                    }
                    Fq(c as u32)
                }
                Value::Array(a) if f.e() > 1 => {
                    let digits: Option<Vec<u32>> =
                        a.iter().map(|x| x.as_u64().map(|d| d as u32)).collect();
                    f.from_coeffs(&digits.ok_or_else(|| bad("bad coefficient vector"))?)?
                }
                _ => return Err(bad("coefficient has the wrong shape for this field")),
            };
            parsed.push((k, c));
        }
        let out = Self::from_terms(&parsed, prec, f);
        let canonical_len = out.terms().count();
        if canonical_len != parsed.len() || parsed.iter().any(|(_, c)| c.is_zero()) {
            return Err(bad("terms must have distinct exponents and nonzero coefficients"));
        }
        Ok(out)
    }

    pub fn display<'a>(&'a self, f: &'a FieldSpec) -> ScalarDisplay<'a> {
        ScalarDisplay { s: self, f }
    }
}

fn min_prec(a: Option<i64>, b: Option<i64>) -> Option<i64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Free-function form of [`LocalScalar::valuation`].
pub fn valuation(x: &LocalScalar) -> Valuation {
    x.valuation()
}

pub fn series_mul(a: &LocalScalar, b: &LocalScalar, f: &FieldSpec) -> LocalScalar {
    a.mul(b, f)
}

pub fn series_invert_unit(u: &LocalScalar, window: i64, f: &FieldSpec) -> Result<LocalScalar> {
    u.invert_unit(window, f)
}

pub struct ScalarDisplay<'a> {
    s: &'a LocalScalar,
    f: &'a FieldSpec,
}

impl fmt::Display for ScalarDisplay<'_> {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, c) in self.s.terms() {
            if !first {
                write!(out, " + ")?;
            }
            first = false;
            let coeff = if self.f.e() == 1 {
                c.index().to_string()
            } else {
                format!("{:?}", self.f.coeffs(c))
            };
            match (coeff.as_str(), k) {
                (_, 0) => write!(out, "{coeff}")?,
                ("1", 1) => write!(out, "t")?,
                ("1", _) => write!(out, "t^{k}")?,
                (_, 1) => write!(out, "{coeff}*t")?,
                _ => write!(out, "{coeff}*t^{k}")?,
            }
        }
        if first {
            write!(out, "0")?;
        }
        if let Some(p) = self.s.prec {
            write!(out, " + O(t^{p})")?;
        }
        Ok(())
    }
}
