//! Matrices and column vectors over the torus algebra.
//!
//! Besides the `M_q(A_Θ)` arithmetic this module carries the iterative
//! functional calculus used throughout the crate: Newton–Schulz inverses,
//! the coupled inverse-free square root, idempotent-to-projection
//! conversion and Hermitian-structure normalization. Every iteration
//! reports explicit residuals in the entrywise-l1 row-sum norm.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::torus::{DeformationMatrix, TorusElement, TruncationPolicy};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100;

const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A `q × q` matrix of torus elements sharing one algebra, row-major.
#[derive(Debug, Clone)]
pub struct TorusMatrix {
    q: usize,
    entries: Vec<TorusElement>,
}

impl TorusMatrix {
    pub fn from_entries(q: usize, entries: Vec<TorusElement>) -> Result<Self> {
        if q == 0 || entries.len() != q * q {
            return Err(Error::ShapeMismatch(format!(
                "{} entries for a {q}x{q} matrix",
                entries.len()
            )));
        }
        for e in &entries[1..] {
            entries[0].same_algebra(e)?;
        }
        Ok(Self { q, entries })
    }

    pub fn from_rows(rows: Vec<Vec<TorusElement>>) -> Result<Self> {
        let q = rows.len();
        if rows.iter().any(|r| r.len() != q) {
            return Err(Error::ShapeMismatch("rows of unequal length".into()));
        }
        Self::from_entries(q, rows.into_iter().flatten().collect())
    }

    pub fn zeros(theta: &Arc<DeformationMatrix>, policy: TruncationPolicy, q: usize) -> Self {
        Self {
            q,
            entries: vec![TorusElement::zero(theta, policy); q * q],
        }
    }

    pub fn scalar_identity(
        theta: &Arc<DeformationMatrix>,
        policy: TruncationPolicy,
        q: usize,
        c: Complex64,
    ) -> Self {
        let mut m = Self::zeros(theta, policy, q);
        for i in 0..q {
            m.entries[i * q + i] = TorusElement::scalar(theta, policy, c);
        }
        m
    }

    pub fn identity(theta: &Arc<DeformationMatrix>, policy: TruncationPolicy, q: usize) -> Self {
        Self::scalar_identity(theta, policy, q, ONE)
    }

    pub fn diag(diagonal: Vec<TorusElement>) -> Result<Self> {
        let q = diagonal.len();
        let first = diagonal
            .first()
            .ok_or_else(|| Error::ShapeMismatch("empty diagonal".into()))?;
        let mut m = Self::zeros(first.theta(), first.policy(), q);
        for (i, d) in diagonal.into_iter().enumerate() {
            m.entries[i * q + i] = d;
        }
        Self::from_entries(q, m.entries)
    }

    /// Matrix whose `k`-th column is `columns[k]`.
    pub fn from_columns(columns: &[ModuleVector]) -> Result<Self> {
        let q = columns.len();
        if columns.iter().any(|c| c.len() != q) {
            return Err(Error::ShapeMismatch("columns do not form a square matrix".into()));
        }
        let mut entries = Vec::with_capacity(q * q);
        for r in 0..q {
            for col in columns {
                entries.push(col.comps[r].clone());
            }
        }
        Self::from_entries(q, entries)
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n(&self) -> usize {
        self.entries[0].n()
    }

    pub fn theta(&self) -> &Arc<DeformationMatrix> {
        self.entries[0].theta()
    }

    pub fn policy(&self) -> TruncationPolicy {
        self.entries[0].policy()
    }

    pub fn get(&self, r: usize, c: usize) -> &TorusElement {
        &self.entries[r * self.q + c]
    }

    pub fn entries(&self) -> &[TorusElement] {
        &self.entries
    }

    pub fn column(&self, k: usize) -> ModuleVector {
        ModuleVector {
            comps: (0..self.q).map(|r| self.get(r, k).clone()).collect(),
        }
    }

    fn check_same(&self, other: &TorusMatrix) -> Result<()> {
        if self.q != other.q {
            return Err(Error::ShapeMismatch(format!("{}x{0} vs {}x{1}", self.q, other.q)));
        }
        self.entries[0].same_algebra(&other.entries[0])
    }

    pub fn mul(&self, other: &TorusMatrix) -> Result<TorusMatrix> {
        self.check_same(other)?;
        let q = self.q;
        let mut entries = Vec::with_capacity(q * q);
        for r in 0..q {
            for c in 0..q {
                let prods = (0..q)
                    .map(|s| self.get(r, s).mul(other.get(s, c)))
                    .collect::<Result<Vec<_>>>()?;
                let terms: Vec<_> = prods.iter().map(|p| (ONE, p)).collect();
                entries.push(TorusElement::linear_combine(&terms)?);
            }
        }
        Ok(Self { q, entries })
    }

    pub fn linear_combine(terms: &[(Complex64, &TorusMatrix)]) -> Result<TorusMatrix> {
        let (_, first) = terms
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty linear combination".into()))?;
        for (_, m) in terms {
            first.check_same(m)?;
        }
        let q = first.q;
        let entries = (0..q * q)
            .map(|i| {
                let parts: Vec<_> = terms.iter().map(|(c, m)| (*c, &m.entries[i])).collect();
                TorusElement::linear_combine(&parts)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { q, entries })
    }

    pub fn add(&self, other: &TorusMatrix) -> Result<TorusMatrix> {
        Self::linear_combine(&[(ONE, self), (ONE, other)])
    }

    pub fn sub(&self, other: &TorusMatrix) -> Result<TorusMatrix> {
        Self::linear_combine(&[(ONE, self), (-ONE, other)])
    }

    pub fn scale(&self, c: Complex64) -> TorusMatrix {
        self.map(|e| e.scale(c))
    }

    /// `[self, other] = self·other − other·self`.
    pub fn commutator(&self, other: &TorusMatrix) -> Result<TorusMatrix> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    /// Conjugate transpose using the torus involution entrywise.
    pub fn adjoint(&self) -> TorusMatrix {
        let q = self.q;
        let entries = (0..q * q)
            .map(|i| self.get(i % q, i / q).adjoint())
            .collect();
        Self { q, entries }
    }

    pub fn map<F: Fn(&TorusElement) -> TorusElement>(&self, f: F) -> TorusMatrix {
        Self {
            q: self.q,
            entries: self.entries.iter().map(f).collect(),
        }
    }

    pub fn delta_tilde(&self, axis: usize) -> Result<TorusMatrix> {
        let entries = self
            .entries
            .iter()
            .map(|e| e.delta_tilde(axis))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { q: self.q, entries })
    }

    pub fn delta(&self, axis: usize) -> Result<TorusMatrix> {
        let entries = self
            .entries
            .iter()
            .map(|e| e.delta(axis))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { q: self.q, entries })
    }

    /// Extended trace `Σ_r τ(M_rr)`, not normalized by `q`.
    pub fn tau_q(&self) -> Complex64 {
        (0..self.q).map(|r| self.get(r, r).trace_tau()).sum()
    }

    /// `τ_q(M* N) = Σ_{r,c} τ(M_rc* N_rc)`.
    pub fn tau_inner(&self, other: &TorusMatrix) -> Result<Complex64> {
        self.check_same(other)?;
        let mut total = Complex64::new(0.0, 0.0);
        for (a, b) in self.entries.iter().zip(&other.entries) {
            total += a.tau_inner(b)?;
        }
        Ok(total)
    }

    /// Maximum over rows of the summed entrywise l1 norms.
    pub fn l1_norm(&self) -> f64 {
        (0..self.q)
            .map(|r| (0..self.q).fold(0.0, |s, c| s + self.get(r, c).l1_norm()))
            .fold(0.0, f64::max)
    }

    pub fn support_radius(&self) -> i32 {
        self.entries.iter().map(|e| e.support_radius()).max().unwrap_or(0)
    }

    pub fn max_truncation_loss(&self) -> f64 {
        self.entries.iter().map(|e| e.truncation_loss()).fold(0.0, f64::max)
    }

    /// `‖self − other‖` in the l1 row-sum norm.
    pub fn distance(&self, other: &TorusMatrix) -> Result<f64> {
        Ok(self.sub(other)?.l1_norm())
    }

    /// `‖M* + M‖`, zero for skew-adjoint matrices.
    pub fn skew_residual(&self) -> Result<f64> {
        Ok(self.adjoint().add(self)?.l1_norm())
    }

    /// `‖M* − M‖`, zero for self-adjoint matrices.
    pub fn self_adjoint_residual(&self) -> Result<f64> {
        self.adjoint().distance(self)
    }

    /// `(M − M*)/2`.
    pub fn skew_part(&self) -> Result<TorusMatrix> {
        Self::linear_combine(&[(Complex64::new(0.5, 0.0), self), (Complex64::new(-0.5, 0.0), &self.adjoint())])
    }

    /// `(M + M*)/2`.
    pub fn hermitian_part(&self) -> Result<TorusMatrix> {
        Self::linear_combine(&[(Complex64::new(0.5, 0.0), self), (Complex64::new(0.5, 0.0), &self.adjoint())])
    }

    pub fn mul_vec(&self, v: &ModuleVector) -> Result<ModuleVector> {
        if v.len() != self.q {
            return Err(Error::ShapeMismatch(format!(
                "{}x{0} matrix times vector of length {}",
                self.q,
                v.len()
            )));
        }
        let comps = (0..self.q)
            .map(|r| {
                let prods = (0..self.q)
                    .map(|s| self.get(r, s).mul(&v.comps[s]))
                    .collect::<Result<Vec<_>>>()?;
                let terms: Vec<_> = prods.iter().map(|p| (ONE, p)).collect();
                TorusElement::linear_combine(&terms)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ModuleVector { comps })
    }

    fn identity_like(&self) -> TorusMatrix {
        Self::identity(self.theta(), self.policy(), self.q)
    }
}

/// Column vector `ξ ∈ A_Θ^q`.
#[derive(Debug, Clone)]
pub struct ModuleVector {
    comps: Vec<TorusElement>,
}

impl ModuleVector {
    pub fn new(comps: Vec<TorusElement>) -> Result<Self> {
        let first = comps
            .first()
            .ok_or_else(|| Error::ShapeMismatch("empty module vector".into()))?;
        for c in &comps[1..] {
            first.same_algebra(c)?;
        }
        Ok(Self { comps })
    }

    /// Standard basis vector `ẽ_k`.
    pub fn basis(theta: &Arc<DeformationMatrix>, policy: TruncationPolicy, q: usize, k: usize) -> Self {
        let comps = (0..q)
            .map(|i| {
                if i == k {
                    TorusElement::one(theta, policy)
                } else {
                    TorusElement::zero(theta, policy)
                }
            })
            .collect();
        Self { comps }
    }

    pub fn len(&self) -> usize {
        self.comps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comps.is_empty()
    }

    pub fn comps(&self) -> &[TorusElement] {
        &self.comps
    }

    pub fn get(&self, k: usize) -> &TorusElement {
        &self.comps[k]
    }

    fn zip_with<F>(&self, other: &ModuleVector, f: F) -> Result<ModuleVector>
    where
        F: Fn(&TorusElement, &TorusElement) -> Result<TorusElement>,
    {
        if self.len() != other.len() {
            return Err(Error::ShapeMismatch(format!(
                "vectors of length {} and {}",
                self.len(),
                other.len()
            )));
        }
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| f(a, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { comps })
    }

    pub fn add(&self, other: &ModuleVector) -> Result<ModuleVector> {
        self.zip_with(other, |a, b| a.add(b))
    }

    pub fn sub(&self, other: &ModuleVector) -> Result<ModuleVector> {
        self.zip_with(other, |a, b| a.sub(b))
    }

    pub fn scale(&self, c: Complex64) -> ModuleVector {
        Self {
            comps: self.comps.iter().map(|x| x.scale(c)).collect(),
        }
    }

    /// Right module action `ξ · a`.
    pub fn right_mul(&self, a: &TorusElement) -> Result<ModuleVector> {
        let comps = self
            .comps
            .iter()
            .map(|x| x.mul(a))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { comps })
    }

    /// Canonical pairing `Σ_k ξ_k* η_k`.
    pub fn pairing(&self, other: &ModuleVector) -> Result<TorusElement> {
        if self.len() != other.len() {
            return Err(Error::ShapeMismatch("pairing of unequal lengths".into()));
        }
        let prods = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.adjoint().mul(b))
            .collect::<Result<Vec<_>>>()?;
        let terms: Vec<_> = prods.iter().map(|p| (ONE, p)).collect();
        TorusElement::linear_combine(&terms)
    }

    pub fn delta_tilde(&self, axis: usize) -> Result<ModuleVector> {
        let comps = self
            .comps
            .iter()
            .map(|x| x.delta_tilde(axis))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { comps })
    }

    pub fn delta(&self, axis: usize) -> Result<ModuleVector> {
        let comps = self
            .comps
            .iter()
            .map(|x| x.delta(axis))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { comps })
    }

    /// Sum of the component l1 norms.
    pub fn l1_norm(&self) -> f64 {
        self.comps.iter().fold(0.0, |s, x| s + x.l1_norm())
    }
}

fn check_box(m: &TorusMatrix) -> Result<()> {
    let radius = m.support_radius();
    let r_max = m.policy().r_max;
    if r_max < 2 * radius {
        return Err(Error::BoxTooSmall { r_max, radius });
    }
    Ok(())
}

/// Newton–Schulz inverse `X ← X(2I − MX)`.
///
/// Without an initial guess the iteration starts from
/// `M* / (‖M‖ ‖M*‖)`, for which `I − X₀M` has spectrum in `[0, 1)`
/// whenever `M` is invertible.
pub fn newton_inverse(
    m: &TorusMatrix,
    tol: f64,
    max_iter: usize,
    initial: Option<&TorusMatrix>,
) -> Result<TorusMatrix> {
    check_box(m)?;
    let id = m.identity_like();
    let mut x = match initial {
        Some(x0) => x0.clone(),
        None => {
            let adj = m.adjoint();
            let s = m.l1_norm() * adj.l1_norm();
            if s == 0.0 {
                return Err(Error::NoConvergence {
                    iterations: 0,
                    residual: f64::INFINITY,
                });
            }
            adj.scale(Complex64::new(1.0 / s, 0.0))
        }
    };
    let two = Complex64::new(2.0, 0.0);
    let mut residual = f64::INFINITY;
    for it in 0..=max_iter {
        let mx = m.mul(&x)?;
        residual = mx.distance(&id)?;
        if !residual.is_finite() || residual > 1e12 {
            return Err(Error::NoConvergence {
                iterations: it,
                residual,
            });
        }
        if residual <= tol {
            let left = x.mul(m)?.distance(&id)?;
            if left <= tol {
                return Ok(x);
            }
            residual = left;
        }
        if it == max_iter {
            break;
        }
        let corr = TorusMatrix::linear_combine(&[(two, &id), (-ONE, &mx)])?;
        x = x.mul(&corr)?;
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual,
    })
}

#[derive(Debug, Clone)]
pub struct SqrtResult {
    pub sqrt: TorusMatrix,
    pub inv_sqrt: TorusMatrix,
    pub iterations: usize,
    /// `‖S² − A‖`.
    pub residual: f64,
    /// `‖S·S⁻¹ − I‖`.
    pub inverse_residual: f64,
}

/// Positive square root and its inverse by the coupled Newton–Schulz
/// iteration on `A / ‖A‖`:
/// `T = (3I − ZY)/2`, `Y ← YT`, `Z ← TZ`, with `Y → √Â`, `Z → Â^{-1/2}`.
pub fn newton_sqrt(a: &TorusMatrix, tol: f64, max_iter: usize) -> Result<SqrtResult> {
    check_box(a)?;
    let norm = a.l1_norm();
    if norm == 0.0 {
        return Err(Error::NoConvergence {
            iterations: 0,
            residual: f64::INFINITY,
        });
    }
    let id = a.identity_like();
    let three = Complex64::new(3.0, 0.0);
    let half = Complex64::new(0.5, 0.0);
    let root = norm.sqrt();

    let mut y = a.scale(Complex64::new(1.0 / norm, 0.0));
    let mut z = id.clone();
    let mut best = f64::INFINITY;
    let mut stalled = 0;
    let mut last = f64::INFINITY;
    for it in 0..max_iter {
        let zy = z.mul(&y)?;
        let err = zy.distance(&id)?;
        if !err.is_finite() || err > 1e6 {
            return Err(Error::NoConvergence {
                iterations: it,
                residual: err,
            });
        }
        if err < best * 0.5 {
            best = err;
            stalled = 0;
        } else {
            stalled += 1;
        }
        if err <= tol * 1e-2 || stalled >= 3 {
            let sqrt = y.scale(Complex64::new(root, 0.0)).hermitian_part()?;
            let inv_sqrt = z.scale(Complex64::new(1.0 / root, 0.0)).hermitian_part()?;
            let residual = sqrt.mul(&sqrt)?.distance(a)?;
            let inverse_residual = sqrt.mul(&inv_sqrt)?.distance(&id)?;
            last = residual.max(inverse_residual);
            if residual <= tol && inverse_residual <= tol {
                return Ok(SqrtResult {
                    sqrt,
                    inv_sqrt,
                    iterations: it,
                    residual,
                    inverse_residual,
                });
            }
            if stalled >= 3 {
                return Err(Error::NoConvergence {
                    iterations: it,
                    residual: last,
                });
            }
        }
        let t = TorusMatrix::linear_combine(&[(three * half, &id), (-half, &zy)])?;
        y = y.mul(&t)?;
        z = t.mul(&z)?;
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: last.min(best),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ProjectionCheck {
    pub is_projection: bool,
    /// `‖p² − p‖`.
    pub idempotency: f64,
    /// `‖p* − p‖`.
    pub self_adjointness: f64,
}

pub fn is_projection(p: &TorusMatrix, tol: f64) -> Result<ProjectionCheck> {
    let idempotency = p.mul(p)?.distance(p)?;
    let self_adjointness = p.self_adjoint_residual()?;
    Ok(ProjectionCheck {
        is_projection: idempotency <= tol && self_adjointness <= tol,
        idempotency,
        self_adjointness,
    })
}

#[derive(Debug, Clone)]
pub struct ProjectionResult {
    pub z: TorusMatrix,
    pub z_inv: TorusMatrix,
    pub p_tilde: TorusMatrix,
    pub check: ProjectionCheck,
    /// `‖z p − p̃ z‖`.
    pub similarity: f64,
}

/// Replaces an idempotent `p` by the similar projection `z p z⁻¹`, where
/// `z = ((2p* − 1)(2p − 1) + 1)^{1/2}`.
pub fn idempotent_to_projection(p: &TorusMatrix, tol: f64, max_iter: usize) -> Result<ProjectionResult> {
    let idem = p.mul(p)?.distance(p)?;
    if idem > tol {
        return Err(Error::NotIdempotent(idem));
    }
    let id = p.identity_like();
    let two = Complex64::new(2.0, 0.0);
    let reflect = TorusMatrix::linear_combine(&[(two, p), (-ONE, &id)])?;
    let zsq = reflect.adjoint().mul(&reflect)?.add(&id)?;
    let root = newton_sqrt(&zsq, tol, max_iter)?;
    let p_tilde = root.sqrt.mul(p)?.mul(&root.inv_sqrt)?;
    let check = is_projection(&p_tilde, 10.0 * tol)?;
    let similarity = root.sqrt.mul(p)?.distance(&p_tilde.mul(&root.sqrt)?)?;
    if !check.is_projection {
        return Err(Error::NotProjection {
            idempotency: check.idempotency,
            self_adjointness: check.self_adjointness,
        });
    }
    Ok(ProjectionResult {
        z: root.sqrt,
        z_inv: root.inv_sqrt,
        p_tilde,
        check,
        similarity,
    })
}

#[derive(Debug, Clone)]
pub struct HermitianNormalization {
    /// `Ψ = √T`.
    pub psi: TorusMatrix,
    pub psi_inv: TorusMatrix,
    pub residual: f64,
}

/// Isometry `Ψ = √T` from the structure `⟨ξ, η⟩_T = ξ* T η` to the
/// canonical one.
pub fn hermitian_normalize(t: &TorusMatrix, tol: f64, max_iter: usize) -> Result<HermitianNormalization> {
    let sa = t.self_adjoint_residual()?;
    if sa > tol {
        return Err(Error::InvalidParameter(format!(
            "Hermitian structure matrix is not self-adjoint (residual {sa:e})"
        )));
    }
    let root = newton_sqrt(t, tol, max_iter)?;
    Ok(HermitianNormalization {
        psi: root.sqrt,
        psi_inv: root.inv_sqrt,
        residual: root.residual,
    })
}
