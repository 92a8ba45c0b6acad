//! Sparse arithmetic in the smooth noncommutative n-torus.
//!
//! An element is a finitely supported Fourier series `Σ a_r U^r` where
//! `U^r = U_1^{r_1} ··· U_n^{r_n}` is the normal-ordered monomial and the
//! generators obey `U_k U_m = exp(2πi Θ_km) U_m U_k`. Every product is
//! truncated to the box `[-R_max, R_max]^n` of the active
//! [`TruncationPolicy`]; dropped mass is tracked in `truncation_loss`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Skew-symmetry tolerance applied when a deformation matrix is loaded.
pub const THETA_LOAD_TOL: f64 = 1e-12;

/// Default drop threshold: only exact zeros are removed.
pub const DEFAULT_EPS_DROP: f64 = 1e-300;

const DENSE_LIMIT: usize = 1 << 22;

/// Real skew-symmetric `n × n` matrix fixing the commutation phases.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl DeformationMatrix {
    /// Builds a deformation matrix from row-major entries.
    ///
    /// Entries must be antisymmetric within [`THETA_LOAD_TOL`]; the stored
    /// matrix is then antisymmetrized exactly.
    pub fn new(n: usize, row_major: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidTheta(format!("n must be at least 2, got {n}")));
        }
        if row_major.len() != n * n {
            return Err(Error::InvalidTheta(format!(
                "expected {} entries for n = {n}, got {}",
                n * n,
                row_major.len()
            )));
        }
        if let Some(bad) = row_major.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidTheta(format!("non-finite entry {bad}")));
        }
        let mut entries = vec![0.0; n * n];
        for k in 0..n {
            for m in 0..n {
                let a = row_major[k * n + m];
                let b = row_major[m * n + k];
                if (a + b).abs() > THETA_LOAD_TOL {
                    return Err(Error::InvalidTheta(format!(
                        "not skew-symmetric at ({k}, {m}): {a} vs {b}"
                    )));
                }
                entries[k * n + m] = 0.5 * (a - b);
            }
        }
        Ok(Self { n, entries })
    }

    /// The undeformed (commutative) torus.
    pub fn zero(n: usize) -> Result<Self> {
        Self::new(n, vec![0.0; n * n])
    }

    /// Two-dimensional matrix with `Θ_21 = theta`, so `U_2 U_1 = e^{2πiθ} U_1 U_2`.
    pub fn planar(theta: f64) -> Self {
        Self {
            n: 2,
            entries: vec![0.0, -theta, theta, 0.0],
        }
    }

    /// Builds the matrix from its strictly lower triangle `Θ_km`, `k > m`,
    /// listed row by row.
    pub fn from_lower(n: usize, lower: &[f64]) -> Result<Self> {
        if lower.len() != n * n.saturating_sub(1) / 2 {
            return Err(Error::InvalidTheta(format!(
                "expected {} lower-triangle entries, got {}",
                n * n.saturating_sub(1) / 2,
                lower.len()
            )));
        }
        let mut entries = vec![0.0; n * n];
        let mut it = lower.iter();
        for k in 1..n {
            for m in 0..k {
                let v = *it.next().expect("length checked");
                entries[k * n + m] = v;
                entries[m * n + k] = -v;
            }
        }
        Self::new(n, entries)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, k: usize, m: usize) -> f64 {
        self.entries[k * self.n + m]
    }

    pub fn row_major(&self) -> &[f64] {
        &self.entries
    }

    /// Whether every entry is a rational number with denominator at most
    /// `max_den` (within 1e-12). The trace is unique only for irrational
    /// configurations, so callers surface this as a warning.
    pub fn looks_rational(&self, max_den: u32) -> bool {
        self.entries.iter().all(|&x| {
            (1..=max_den).any(|d| {
                let y = x * f64::from(d);
                (y - y.round()).abs() < 1e-12
            })
        })
    }

    /// `w_k = Σ_{m<k} Θ_km s_m` reduced mod 1 and kept as an unevaluated
    /// sum `hi + lo`; the phase of `U^r U^s` is `exp(2πi r·w)`.
    fn lower_weights(&self, s: &Exponent) -> SmallVec<[(f64, f64); 6]> {
        (0..self.n)
            .map(|k| {
                let mut acc = (0.0, 0.0);
                for m in 0..k {
                    acc = add_exact_product(acc, self.entries[k * self.n + m], f64::from(s.0[m]));
                }
                reduce_mod_one(acc)
            })
            .collect()
    }
}

/// `(hi, lo) + x·y` with the product split exactly and the sum compensated.
#[inline]
fn add_exact_product((hi, lo): (f64, f64), x: f64, y: f64) -> (f64, f64) {
    let p = x * y;
    let e = x.mul_add(y, -p);
    let s = hi + p;
    let bp = s - hi;
    let err = (hi - (s - bp)) + (p - bp);
    (s, lo + err + e)
}

#[inline]
fn reduce_mod_one((hi, lo): (f64, f64)) -> (f64, f64) {
    let hi = hi - hi.round();
    let s = hi + lo;
    (s, lo - (s - hi))
}

/// Fourier index `r ∈ Z^n` of the normal-ordered monomial `U^r`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Exponent(SmallVec<[i32; 6]>);

impl Exponent {
    pub fn new(components: &[i32]) -> Self {
        Self(SmallVec::from_slice(components))
    }

    pub fn zero(n: usize) -> Self {
        Self(SmallVec::from_elem(0, n))
    }

    /// Exponent of the generator `U_{axis+1}` (zero-based axis).
    pub fn unit(n: usize, axis: usize) -> Self {
        let mut e = Self::zero(n);
        e.0[axis] = 1;
        e
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i32] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0)
    }

    /// Sup-norm `max_k |r_k|`.
    pub fn radius(&self) -> i32 {
        self.0.iter().map(|x| x.abs()).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Exponent) -> Exponent {
        Exponent(self.0.iter().zip(other.0.iter()).map(|(a, b)| a + b).collect())
    }

    pub fn neg(&self) -> Exponent {
        Exponent(self.0.iter().map(|a| -a).collect())
    }
}

impl Ord for Exponent {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.as_slice().cmp(other.0.as_slice())
    }
}

impl PartialOrd for Exponent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0.as_slice())
    }
}

/// Phase `σ(r, s)` with `U^r U^s = σ(r, s) U^{r+s}` in normal order:
/// `σ(r, s) = exp(2πi Σ_{k>m} Θ_km r_k s_m)`.
pub fn weyl_phase(r: &Exponent, s: &Exponent, theta: &DeformationMatrix) -> Result<Complex64> {
    let n = theta.n();
    for e in [r, s] {
        if e.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: e.len(),
            });
        }
    }
    Ok(phase_from_weights(r, &theta.lower_weights(s)))
}

#[inline]
fn phase_from_weights(r: &Exponent, w: &[(f64, f64)]) -> Complex64 {
    let mut acc = (0.0, 0.0);
    for (&rk, &(hi, lo)) in r.0.iter().zip(w) {
        if rk != 0 {
            let rk = f64::from(rk);
            acc = add_exact_product(acc, rk, hi);
            acc.1 += rk * lo;
        }
    }
    let (t, _) = reduce_mod_one(acc);
    if t == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        Complex64::new(0.0, TAU * t).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TruncationMode {
    /// Out-of-box terms are an error.
    Strict,
    /// Out-of-box terms are dropped and their mass recorded.
    Lossy,
}

/// Finite-support policy replacing Schwartz decay.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TruncationPolicy {
    pub r_max: i32,
    pub mode: TruncationMode,
    pub eps_drop: f64,
}

impl TruncationPolicy {
    pub fn new(r_max: i32, mode: TruncationMode) -> Result<Self> {
        Self::with_eps(r_max, mode, DEFAULT_EPS_DROP)
    }

    pub fn with_eps(r_max: i32, mode: TruncationMode, eps_drop: f64) -> Result<Self> {
        if r_max < 1 {
            return Err(Error::InvalidParameter(format!("R_max must be >= 1, got {r_max}")));
        }
        if !(eps_drop >= 0.0 && eps_drop.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "eps_drop must be a finite non-negative number, got {eps_drop}"
            )));
        }
        Ok(Self {
            r_max,
            mode,
            eps_drop,
        })
    }

    pub fn strict(r_max: i32) -> Self {
        Self::new(r_max, TruncationMode::Strict).expect("r_max >= 1")
    }

    pub fn lossy(r_max: i32) -> Self {
        Self::new(r_max, TruncationMode::Lossy).expect("r_max >= 1")
    }

    pub fn contains(&self, e: &Exponent) -> bool {
        e.radius() <= self.r_max
    }

    pub fn validate(&self) -> Result<()> {
        Self::with_eps(self.r_max, self.mode, self.eps_drop).map(|_| ())
    }
}

/// Applies the box and drop threshold to a sorted stream of raw terms.
fn finalize<I>(raw: I, policy: &TruncationPolicy) -> Result<(Vec<(Exponent, Complex64)>, f64)>
where
    I: IntoIterator<Item = (Exponent, Complex64)>,
{
    let mut kept = Vec::new();
    let mut dropped = 0.0;
    for (e, c) in raw {
        let m = c.norm();
        if m == 0.0 {
            continue;
        }
        if !policy.contains(&e) {
            match policy.mode {
                TruncationMode::Strict if m > policy.eps_drop => {
                    return Err(Error::SupportOverflow {
                        exponent: e.as_slice().to_vec(),
                        r_max: policy.r_max,
                    })
                }
                _ => dropped += m,
            }
        } else if m <= policy.eps_drop {
            dropped += m;
        } else {
            kept.push((e, c));
        }
    }
    Ok((kept, dropped))
}

/// Finitely supported element `Σ a_r U^r` of the smooth noncommutative torus.
#[derive(Clone)]
pub struct TorusElement {
    theta: Arc<DeformationMatrix>,
    policy: TruncationPolicy,
    terms: Vec<(Exponent, Complex64)>,
    truncation_loss: f64,
}

impl fmt::Debug for TorusElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusElement")
            .field("terms", &self.terms)
            .field("truncation_loss", &self.truncation_loss)
            .finish()
    }
}

impl TorusElement {
    pub fn zero(theta: &Arc<DeformationMatrix>, policy: TruncationPolicy) -> Self {
        Self {
            theta: Arc::clone(theta),
            policy,
            terms: Vec::new(),
            truncation_loss: 0.0,
        }
    }

    pub fn scalar(theta: &Arc<DeformationMatrix>, policy: TruncationPolicy, c: Complex64) -> Self {
        let mut out = Self::zero(theta, policy);
        if c != Complex64::new(0.0, 0.0) {
            out.terms.push((Exponent::zero(theta.n()), c));
        }
        out
    }

    pub fn one(theta: &Arc<DeformationMatrix>, policy: TruncationPolicy) -> Self {
        Self::scalar(theta, policy, Complex64::new(1.0, 0.0))
    }

    /// `c · U^r`.
    pub fn monomial(
        theta: &Arc<DeformationMatrix>,
        policy: TruncationPolicy,
        r: Exponent,
        c: Complex64,
    ) -> Result<Self> {
        Self::from_terms(theta, policy, [(r, c)])
    }

    /// Generator `U_{axis+1}` (zero-based axis).
    pub fn generator(
        theta: &Arc<DeformationMatrix>,
        policy: TruncationPolicy,
        axis: usize,
    ) -> Result<Self> {
        let n = theta.n();
        if axis >= n {
            return Err(Error::AxisOutOfRange { axis, n });
        }
        Self::monomial(theta, policy, Exponent::unit(n, axis), Complex64::new(1.0, 0.0))
    }

    /// Builds an element from arbitrary `(exponent, coefficient)` pairs;
    /// repeated exponents are summed.
    pub fn from_terms<I>(theta: &Arc<DeformationMatrix>, policy: TruncationPolicy, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Exponent, Complex64)>,
    {
        policy.validate()?;
        let n = theta.n();
        let mut acc: BTreeMap<Exponent, Complex64> = BTreeMap::new();
        for (e, c) in terms {
            if e.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: e.len(),
                });
            }
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::Malformed(format!("non-finite coefficient at {e:?}")));
            }
            *acc.entry(e).or_default() += c;
        }
        let (terms, dropped) = finalize(acc, &policy)?;
        Ok(Self {
            theta: Arc::clone(theta),
            policy,
            terms,
            truncation_loss: dropped,
        })
    }

    pub fn theta(&self) -> &Arc<DeformationMatrix> {
        &self.theta
    }

    pub fn policy(&self) -> TruncationPolicy {
        self.policy
    }

    pub fn n(&self) -> usize {
        self.theta.n()
    }

    /// Stored terms in ascending lexicographic exponent order.
    pub fn terms(&self) -> &[(Exponent, Complex64)] {
        &self.terms
    }

    pub fn truncation_loss(&self) -> f64 {
        self.truncation_loss
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, r: &Exponent) -> Complex64 {
        self.terms
            .binary_search_by(|(e, _)| e.cmp(r))
            .map(|i| self.terms[i].1)
            .unwrap_or_default()
    }

    /// Largest `|r_k|` over the support; zero for the zero element.
    pub fn support_radius(&self) -> i32 {
        self.terms.iter().map(|(e, _)| e.radius()).max().unwrap_or(0)
    }

    pub fn same_algebra(&self, other: &TorusElement) -> Result<()> {
        if !(Arc::ptr_eq(&self.theta, &other.theta) || *self.theta == *other.theta) {
            return Err(Error::ThetaMismatch);
        }
        if self.policy != other.policy {
            return Err(Error::PolicyMismatch);
        }
        Ok(())
    }

    /// Twisted convolution: the coefficient of `U^t` is
    /// `Σ_{r+s=t} a_r b_s σ(r, s)`, accumulated in ascending `(r, s)` order.
    pub fn mul(&self, other: &TorusElement) -> Result<TorusElement> {
        self.same_algebra(other)?;
        let loss = self.truncation_loss.max(other.truncation_loss);
        if self.terms.is_empty() || other.terms.is_empty() {
            let mut out = Self::zero(&self.theta, self.policy);
            out.truncation_loss = loss;
            return Ok(out);
        }
        let raw = convolve(&self.terms, &other.terms, &self.theta);
        let (terms, dropped) = finalize(raw, &self.policy)?;
        Ok(Self {
            theta: Arc::clone(&self.theta),
            policy: self.policy,
            terms,
            truncation_loss: loss + dropped,
        })
    }

    /// Coefficientwise `Σ c_i x_i`.
    pub fn linear_combine(terms: &[(Complex64, &TorusElement)]) -> Result<TorusElement> {
        let (_, first) = terms
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty linear combination".into()))?;
        let mut acc: BTreeMap<Exponent, Complex64> = BTreeMap::new();
        let mut loss: f64 = 0.0;
        for (c, x) in terms {
            first.same_algebra(x)?;
            loss = loss.max(x.truncation_loss);
            for (e, a) in &x.terms {
                *acc.entry(e.clone()).or_default() += c * a;
            }
        }
        let (kept, dropped) = finalize(acc, &first.policy)?;
        Ok(Self {
            theta: Arc::clone(&first.theta),
            policy: first.policy,
            terms: kept,
            truncation_loss: loss + dropped,
        })
    }

    pub fn add(&self, other: &TorusElement) -> Result<TorusElement> {
        let one = Complex64::new(1.0, 0.0);
        Self::linear_combine(&[(one, self), (one, other)])
    }

    pub fn sub(&self, other: &TorusElement) -> Result<TorusElement> {
        Self::linear_combine(&[(Complex64::new(1.0, 0.0), self), (Complex64::new(-1.0, 0.0), other)])
    }

    pub fn scale(&self, c: Complex64) -> TorusElement {
        self.map_coeffs(|_, a| c * a)
    }

    pub fn neg(&self) -> TorusElement {
        self.map_coeffs(|_, a| -a)
    }

    /// Applies a coefficientwise map that keeps exponents fixed.
    fn map_coeffs<F>(&self, f: F) -> TorusElement
    where
        F: Fn(&Exponent, Complex64) -> Complex64,
    {
        let mut dropped = 0.0;
        let mut terms = Vec::with_capacity(self.terms.len());
        for (e, a) in &self.terms {
            let b = f(e, *a);
            let m = b.norm();
            if m == 0.0 {
                continue;
            }
            if m <= self.policy.eps_drop {
                dropped += m;
            } else {
                terms.push((e.clone(), b));
            }
        }
        TorusElement {
            theta: Arc::clone(&self.theta),
            policy: self.policy,
            terms,
            truncation_loss: self.truncation_loss + dropped,
        }
    }

    /// Involution: `(U^r)* = conj(σ(-r, r)) U^{-r}` and scalars conjugate.
    pub fn adjoint(&self) -> TorusElement {
        let terms = self
            .terms
            .iter()
            .rev()
            .map(|(e, a)| {
                let minus = e.neg();
                let s = phase_from_weights(&minus, &self.theta.lower_weights(e));
                (minus, a.conj() * s.conj())
            })
            .collect();
        TorusElement {
            theta: Arc::clone(&self.theta),
            policy: self.policy,
            terms,
            truncation_loss: self.truncation_loss,
        }
    }

    /// Canonical trace `τ(a) = a_0`.
    pub fn trace_tau(&self) -> Complex64 {
        self.coeff(&Exponent::zero(self.n()))
    }

    /// Derivation `δ̃_j`: `a_r ↦ i r_j a_r` (zero-based axis).
    pub fn delta_tilde(&self, axis: usize) -> Result<TorusElement> {
        self.check_axis(axis)?;
        Ok(self.map_coeffs(|e, a| Complex64::new(0.0, f64::from(e.0[axis])) * a))
    }

    /// `δ_j = -i δ̃_j`: `a_r ↦ r_j a_r` (zero-based axis).
    pub fn delta(&self, axis: usize) -> Result<TorusElement> {
        self.check_axis(axis)?;
        Ok(self.map_coeffs(|e, a| f64::from(e.0[axis]) * a))
    }

    fn check_axis(&self, axis: usize) -> Result<()> {
        let n = self.n();
        if axis >= n {
            Err(Error::AxisOutOfRange { axis, n })
        } else {
            Ok(())
        }
    }

    /// `Σ |a_r|`, an upper bound on the operator norm.
    pub fn l1_norm(&self) -> f64 {
        self.terms.iter().fold(0.0, |s, (_, a)| s + a.norm())
    }

    /// `τ(a* b) = Σ_r conj(a_r) b_r`, since the monomials are unitary and
    /// `τ((U^r)* U^s) = δ_rs`. Never forms the product.
    pub fn tau_inner(&self, other: &TorusElement) -> Result<Complex64> {
        self.same_algebra(other)?;
        let mut total = Complex64::new(0.0, 0.0);
        let (mut i, mut j) = (0, 0);
        while i < self.terms.len() && j < other.terms.len() {
            match self.terms[i].0.cmp(&other.terms[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    total += self.terms[i].1.conj() * other.terms[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        Ok(total)
    }

    /// `Σ |a_r|²`, which equals `τ(a* a)`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.terms.iter().fold(0.0, |s, (_, a)| s + a.norm_sqr())
    }
}

/// `exp(2πi r w)` for one axis, with `w = hi + lo` reduced mod 1.
#[inline]
fn axis_phase(r: i32, (hi, lo): (f64, f64)) -> Complex64 {
    if r == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let r = f64::from(r);
    let mut acc = add_exact_product((0.0, 0.0), r, hi);
    acc.1 += r * lo;
    let (t, _) = reduce_mod_one(acc);
    if t == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        Complex64::new(0.0, TAU * t).exp()
    }
}

/// Weighted phases `b_s σ(r, s)` for every pair of a product. When the left
/// factor has more terms than its per-axis exponent ranges have values,
/// `σ` is assembled from per-axis factors `exp(2πi r_k w_k(s))` tabulated
/// once per right term, with `b_s` folded into the first table; otherwise
/// each phase is evaluated directly.
enum Phases<'a> {
    Direct {
        b: &'a [(Exponent, Complex64)],
        weights: Vec<SmallVec<[(f64, f64); 6]>>,
    },
    Table {
        factors: Vec<Complex64>,
        offsets: Vec<usize>,
        lo: Vec<i32>,
        row: usize,
    },
}

impl<'a> Phases<'a> {
    fn new(theta: &DeformationMatrix, a_len: usize, lo_a: &[i32], hi_a: &[i32], b: &'a [(Exponent, Complex64)]) -> Self {
        let n = theta.n();
        let weights: Vec<_> = b.iter().map(|(s, _)| theta.lower_weights(s)).collect();
        let mut offsets = vec![0usize; n];
        let mut row = 0;
        for k in 1..n {
            offsets[k] = row;
            row += (hi_a[k] - lo_a[k] + 1) as usize;
        }
        if a_len <= row {
            return Phases::Direct { b, weights };
        }
        let mut factors = Vec::with_capacity(row * b.len());
        for ((_, y), w) in b.iter().zip(&weights) {
            factors.extend((lo_a[1]..=hi_a[1]).map(|r| y * axis_phase(r, w[1])));
            for k in 2..n {
                factors.extend((lo_a[k]..=hi_a[k]).map(|r| axis_phase(r, w[k])));
            }
        }
        Phases::Table {
            factors,
            offsets,
            lo: lo_a.to_vec(),
            row,
        }
    }

    /// Calls `f(j, b_j σ(r, s_j))` for every right term in order.
    #[inline]
    fn for_each<F: FnMut(usize, Complex64)>(&self, r: &Exponent, mut f: F) {
        match self {
            Phases::Direct { b, weights } => {
                for (j, ((_, y), w)) in b.iter().zip(weights).enumerate() {
                    f(j, y * phase_from_weights(r, w));
                }
            }
            Phases::Table {
                factors,
                offsets,
                lo,
                row,
            } => {
                let cols: SmallVec<[usize; 6]> =
                    (1..lo.len()).map(|k| offsets[k] + (r.0[k] - lo[k]) as usize).collect();
                for (j, chunk) in factors.chunks_exact(*row).enumerate() {
                    let mut z = chunk[cols[0]];
                    for &c in &cols[1..] {
                        z *= chunk[c];
                    }
                    f(j, z);
                }
            }
        }
    }
}

/// Raw twisted convolution of two sorted term lists, returned in ascending
/// exponent order. Uses a dense accumulator over the bounding box of the
/// result when it is small enough, otherwise an ordered map. Contributions
/// to each output are summed in ascending `(r, s)` order.
fn convolve(
    a: &[(Exponent, Complex64)],
    b: &[(Exponent, Complex64)],
    theta: &DeformationMatrix,
) -> Vec<(Exponent, Complex64)> {
    let n = theta.n();
    let bounds = |xs: &[(Exponent, Complex64)]| {
        let mut lo = vec![i32::MAX; n];
        let mut hi = vec![i32::MIN; n];
        for (e, _) in xs {
            for k in 0..n {
                lo[k] = lo[k].min(e.0[k]);
                hi[k] = hi[k].max(e.0[k]);
            }
        }
        (lo, hi)
    };
    let (lo_a, hi_a) = bounds(a);
    let (lo_b, hi_b) = bounds(b);
    let phases = Phases::new(theta, a.len(), &lo_a, &hi_a, b);
    let dims: Vec<usize> = (0..n)
        .map(|k| (hi_a[k] + hi_b[k] - lo_a[k] - lo_b[k] + 1) as usize)
        .collect();
    let volume = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .unwrap_or(usize::MAX);

    if volume <= DENSE_LIMIT && volume <= 8 * a.len() * b.len() + 4096 {
        let mut strides = vec![1usize; n];
        for k in (0..n.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        let offset = |e: &Exponent, lo: &[i32]| -> usize {
            (0..n).map(|k| (e.0[k] - lo[k]) as usize * strides[k]).sum()
        };
        let ib: Vec<usize> = b.iter().map(|(e, _)| offset(e, &lo_b)).collect();
        let mut acc = vec![Complex64::new(0.0, 0.0); volume];
        for (r, x) in a {
            let window = &mut acc[offset(r, &lo_a)..];
            phases.for_each(r, |j, z| window[ib[j]] += x * z);
        }
        let zero = Complex64::new(0.0, 0.0);
        let mut out = Vec::new();
        for (idx, c) in acc.into_iter().enumerate() {
            if c == zero {
                continue;
            }
            let mut rem = idx;
            let mut e = Exponent::zero(n);
            for k in 0..n {
                e.0[k] = (rem / strides[k]) as i32 + lo_a[k] + lo_b[k];
                rem %= strides[k];
            }
            out.push((e, c));
        }
        out
    } else {
        let mut acc: BTreeMap<Exponent, Complex64> = BTreeMap::new();
        for (r, x) in a {
            phases.for_each(r, |j, z| *acc.entry(r.add(&b[j].0)).or_default() += x * z);
        }
        acc.into_iter().collect()
    }
}
