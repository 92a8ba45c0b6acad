//! Projective modules `p A_Θ^q`, compatible connections and curvature.
//!
//! A connection is stored as the Grassmannian connection `ξ ↦ p D_j ξ`
//! plus potentials `A_j ∈ p M_q(A_Θ) p`, so that
//! `∇_j ξ = p D_j(ξ) + A_j ξ`. In the dynamical convention `D_j = δ̃_j` and
//! compatibility forces skew-adjoint potentials; in the spectral convention
//! `D_j = δ_j = −i δ̃_j` and the potentials are self-adjoint.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{is_projection, ModuleVector, ProjectionCheck, TorusMatrix};
use crate::random;
use crate::torus::{DeformationMatrix, TorusElement, TruncationPolicy};

/// Tolerance of the projection check on module construction.
pub const PROJECTION_TOL: f64 = 1e-8;
/// Tolerance on the skew/self-adjoint and compression invariants of
/// potentials. Under lossy truncation the compression bound is widened by
/// the recorded truncation loss.
pub const POTENTIAL_TOL: f64 = 1e-10;
/// Tolerance for module membership of vectors handed to the pairing.
pub const MEMBERSHIP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    Dynamical,
    Spectral,
}

impl Convention {
    fn name(self) -> &'static str {
        match self {
            Convention::Dynamical => "dynamical",
            Convention::Spectral => "spectral",
        }
    }
}

/// `E = p A_Θ^q` with the Hermitian structure restricted from the
/// canonical one.
#[derive(Debug, Clone)]
pub struct ProjectiveModule {
    p: TorusMatrix,
    check: ProjectionCheck,
}

impl ProjectiveModule {
    pub fn new(p: TorusMatrix) -> Result<Self> {
        let check = is_projection(&p, PROJECTION_TOL)?;
        if !check.is_projection {
            return Err(Error::NotProjection {
                idempotency: check.idempotency,
                self_adjointness: check.self_adjointness,
            });
        }
        Ok(Self { p, check })
    }

    /// The free module `A_Θ^q`.
    pub fn free(theta: &Arc<DeformationMatrix>, policy: TruncationPolicy, q: usize) -> Self {
        Self {
            p: TorusMatrix::identity(theta, policy, q),
            check: ProjectionCheck {
                is_projection: true,
                idempotency: 0.0,
                self_adjointness: 0.0,
            },
        }
    }

    pub fn p(&self) -> &TorusMatrix {
        &self.p
    }

    pub fn q(&self) -> usize {
        self.p.q()
    }

    pub fn n(&self) -> usize {
        self.p.n()
    }

    pub fn theta(&self) -> &Arc<DeformationMatrix> {
        self.p.theta()
    }

    pub fn policy(&self) -> TruncationPolicy {
        self.p.policy()
    }

    /// Residuals recorded when the projection was checked.
    pub fn check(&self) -> ProjectionCheck {
        self.check
    }

    pub fn project(&self, v: &ModuleVector) -> Result<ModuleVector> {
        self.p.mul_vec(v)
    }

    /// `p A p`.
    pub fn compress(&self, a: &TorusMatrix) -> Result<TorusMatrix> {
        self.p.mul(a)?.mul(&self.p)
    }

    /// `(pAp − (pAp)*)/2`: skew-adjoint exactly, `p`-compressed up to
    /// truncation.
    pub fn project_skew(&self, a: &TorusMatrix) -> Result<TorusMatrix> {
        self.compress(a)?.skew_part()
    }

    /// `(pAp + (pAp)*)/2`.
    pub fn project_hermitian(&self, a: &TorusMatrix) -> Result<TorusMatrix> {
        self.compress(a)?.hermitian_part()
    }

    /// Admissible `‖pAp − A‖` for a potential: [`POTENTIAL_TOL`] plus the
    /// truncation loss carried by `pAp`, amplified by `q (1 + ‖p‖)²`.
    pub fn compression_tolerance(&self, compressed: &TorusMatrix) -> f64 {
        let pn = self.p.l1_norm();
        POTENTIAL_TOL + self.q() as f64 * (1.0 + pn) * (1.0 + pn) * compressed.max_truncation_loss()
    }

    /// `‖pAp − A‖` and its admissible bound.
    pub fn compression_residual(&self, a: &TorusMatrix) -> Result<(f64, f64)> {
        let pap = self.compress(a)?;
        Ok((pap.distance(a)?, self.compression_tolerance(&pap)))
    }

    /// `‖p ξ − ξ‖`.
    pub fn membership_residual(&self, v: &ModuleVector) -> Result<f64> {
        Ok(self.project(v)?.sub(v)?.l1_norm())
    }

    /// `⟨ξ, η⟩ = Σ_k ξ_k* η_k` for vectors in the module.
    pub fn hermitian_pairing(&self, xi: &ModuleVector, eta: &ModuleVector) -> Result<TorusElement> {
        for v in [xi, eta] {
            let r = self.membership_residual(v)?;
            if r > MEMBERSHIP_TOL {
                return Err(Error::OutsideModule(r));
            }
        }
        xi.pairing(eta)
    }
}

/// Components `F_jk`, `j < k`, of a curvature in ascending pair order.
#[derive(Debug, Clone)]
pub struct CurvatureForm {
    n: usize,
    components: Vec<TorusMatrix>,
}

/// Index of the pair `(j, k)`, `j < k`, in ascending lexicographic order.
pub fn pair_index(n: usize, j: usize, k: usize) -> usize {
    debug_assert!(j < k && k < n);
    j * (2 * n - j - 1) / 2 + (k - j - 1)
}

/// All pairs `j < k` in ascending order.
pub fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |j| (j + 1..n).map(move |k| (j, k)))
}

impl CurvatureForm {
    pub(crate) fn from_components(n: usize, components: Vec<TorusMatrix>) -> Self {
        debug_assert_eq!(components.len(), n * (n - 1) / 2);
        Self { n, components }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, j: usize, k: usize) -> &TorusMatrix {
        &self.components[pair_index(self.n, j, k)]
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), &TorusMatrix)> {
        pairs(self.n).zip(self.components.iter())
    }

    /// `Σ_{j<k} τ_q(F_jk* F_jk)`, reduced in ascending pair order.
    pub fn squared_norm(&self) -> Result<f64> {
        let mut total = 0.0;
        for f in &self.components {
            total += f.tau_inner(f)?.re;
        }
        Ok(total)
    }

    /// Largest `‖F* + F‖` over the components.
    pub fn skew_residual(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for f in &self.components {
            worst = worst.max(f.skew_residual()?);
        }
        Ok(worst)
    }

    pub fn max_truncation_loss(&self) -> f64 {
        self.components
            .iter()
            .map(|f| f.max_truncation_loss())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct Connection {
    module: ProjectiveModule,
    convention: Convention,
    potentials: Vec<TorusMatrix>,
}

impl Connection {
    /// Validates the compression and (skew/self-)adjointness invariants.
    pub fn new(module: ProjectiveModule, convention: Convention, potentials: Vec<TorusMatrix>) -> Result<Self> {
        let c = Self::new_unchecked(module, convention, potentials)?;
        for (j, a) in c.potentials.iter().enumerate() {
            let (compression, bound) = c.module.compression_residual(a)?;
            if compression > bound {
                return Err(Error::InvalidPotential(format!(
                    "A_{} is not p-compressed (residual {compression:e})",
                    j + 1
                )));
            }
            let adj = match convention {
                Convention::Dynamical => a.skew_residual()?,
                Convention::Spectral => a.self_adjoint_residual()?,
            };
            if adj > POTENTIAL_TOL {
                return Err(Error::InvalidPotential(format!(
                    "A_{} violates the {} adjointness condition (residual {adj:e})",
                    j + 1,
                    convention.name()
                )));
            }
        }
        Ok(c)
    }

    /// Builds a connection checking shapes only. Used to audit
    /// non-compatible inputs with [`Connection::check_compatibility`].
    pub fn new_unchecked(module: ProjectiveModule, convention: Convention, potentials: Vec<TorusMatrix>) -> Result<Self> {
        let n = module.n();
        if potentials.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: potentials.len(),
            });
        }
        for a in &potentials {
            if a.q() != module.q() {
                return Err(Error::ShapeMismatch(format!(
                    "potential of size {} on a module of rank {}",
                    a.q(),
                    module.q()
                )));
            }
            a.get(0, 0).same_algebra(module.p().get(0, 0))?;
        }
        Ok(Self {
            module,
            convention,
            potentials,
        })
    }

    /// Grassmannian connection `ξ ↦ p D ξ` (all potentials zero).
    pub fn grassmannian(module: &ProjectiveModule, convention: Convention) -> Self {
        let zero = TorusMatrix::zeros(module.theta(), module.policy(), module.q());
        Self {
            module: module.clone(),
            convention,
            potentials: vec![zero; module.n()],
        }
    }

    pub fn module(&self) -> &ProjectiveModule {
        &self.module
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn potentials(&self) -> &[TorusMatrix] {
        &self.potentials
    }

    pub fn n(&self) -> usize {
        self.module.n()
    }

    pub(crate) fn expect(&self, convention: Convention) -> Result<()> {
        if self.convention != convention {
            return Err(Error::WrongConvention {
                expected: convention.name(),
            });
        }
        Ok(())
    }

    fn check_axis(&self, axis: usize) -> Result<()> {
        let n = self.n();
        if axis >= n {
            return Err(Error::AxisOutOfRange { axis, n });
        }
        Ok(())
    }

    fn derive_vec(&self, axis: usize, v: &ModuleVector) -> Result<ModuleVector> {
        match self.convention {
            Convention::Dynamical => v.delta_tilde(axis),
            Convention::Spectral => v.delta(axis),
        }
    }

    fn derive_mat(&self, axis: usize, m: &TorusMatrix) -> Result<TorusMatrix> {
        match self.convention {
            Convention::Dynamical => m.delta_tilde(axis),
            Convention::Spectral => m.delta(axis),
        }
    }

    fn derive_elem(&self, axis: usize, a: &TorusElement) -> Result<TorusElement> {
        match self.convention {
            Convention::Dynamical => a.delta_tilde(axis),
            Convention::Spectral => a.delta(axis),
        }
    }

    /// `∇_j ξ = p D_j(ξ) + A_j ξ` (zero-based axis).
    pub fn apply(&self, axis: usize, xi: &ModuleVector) -> Result<ModuleVector> {
        self.check_axis(axis)?;
        let grass = self.module.project(&self.derive_vec(axis, xi)?)?;
        grass.add(&self.potentials[axis].mul_vec(xi)?)
    }

    /// `[∇_j, ∇_k] ξ`.
    pub fn commutator_apply(&self, j: usize, k: usize, xi: &ModuleVector) -> Result<ModuleVector> {
        let jk = self.apply(j, &self.apply(k, xi)?)?;
        let kj = self.apply(k, &self.apply(j, xi)?)?;
        jk.sub(&kj)
    }

    /// Largest l1 residual of the compatibility identity over `samples`
    /// random pairs of module vectors and all axes:
    /// `⟨∇ξ,η⟩ + ⟨ξ,∇η⟩ − δ̃⟨ξ,η⟩` (dynamical) or
    /// `⟨ξ,∇η⟩ − ⟨∇ξ,η⟩ − δ⟨ξ,η⟩` (spectral).
    pub fn check_compatibility(&self, samples: usize, seed: u64) -> Result<f64> {
        let mut rng = random::rng(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let xi = random::module_vector(&mut rng, &self.module, 1, 0.5)?;
            let eta = random::module_vector(&mut rng, &self.module, 1, 0.5)?;
            let base = xi.pairing(&eta)?;
            for axis in 0..self.n() {
                let left = self.apply(axis, &xi)?.pairing(&eta)?;
                let right = xi.pairing(&self.apply(axis, &eta)?)?;
                let d = self.derive_elem(axis, &base)?;
                let one = Complex64::new(1.0, 0.0);
                let residual = match self.convention {
                    Convention::Dynamical => TorusElement::linear_combine(&[(one, &left), (one, &right), (-one, &d)])?,
                    Convention::Spectral => TorusElement::linear_combine(&[(one, &right), (-one, &left), (-one, &d)])?,
                };
                worst = worst.max(residual.l1_norm());
            }
        }
        Ok(worst)
    }

    /// Matrix of `[∇_j, ∇_k]` assembled from its action on the columns
    /// `p ẽ_1, …, p ẽ_q`.
    pub fn commutator_matrix(&self, j: usize, k: usize) -> Result<TorusMatrix> {
        let q = self.module.q();
        let columns = (0..q)
            .map(|c| self.commutator_apply(j, k, &self.module.p().column(c)))
            .collect::<Result<Vec<_>>>()?;
        TorusMatrix::from_columns(&columns)
    }

    /// Curvature `F_jk = [∇_j, ∇_k]` by column assembly.
    pub fn curvature(&self) -> Result<CurvatureForm> {
        let n = self.n();
        let components = pairs(n)
            .map(|(j, k)| self.commutator_matrix(j, k))
            .collect::<Result<Vec<_>>>()?;
        Ok(CurvatureForm::from_components(n, components))
    }

    /// Curvature from the closed form
    /// `p(D_j p D_k p − D_k p D_j p)p + p(D_j A_k − D_k A_j)p + [A_j, A_k]`.
    pub fn curvature_closed_form(&self) -> Result<CurvatureForm> {
        let n = self.n();
        let p = self.module.p();
        let dp = (0..n)
            .map(|j| self.derive_mat(j, p))
            .collect::<Result<Vec<_>>>()?;
        let mut components = Vec::with_capacity(n * (n - 1) / 2);
        for (j, k) in pairs(n) {
            let grass = dp[j].mul(&dp[k])?.sub(&dp[k].mul(&dp[j])?)?;
            let grass = self.module.compress(&grass)?;
            let a = &self.potentials;
            let da = self.derive_mat(j, &a[k])?.sub(&self.derive_mat(k, &a[j])?)?;
            let da = self.module.compress(&da)?;
            let comm = a[j].commutator(&a[k])?;
            components.push(grass.add(&da)?.add(&comm)?);
        }
        Ok(CurvatureForm::from_components(n, components))
    }

    /// `YM(∇) = Σ_{j<k} τ_q(F_jk* F_jk)` for a dynamical connection.
    pub fn ym_dynamical(&self) -> Result<f64> {
        self.expect(Convention::Dynamical)?;
        self.curvature()?.squared_norm()
    }

    /// Dynamical → spectral: `∇̃_j = −i ∇_j`, i.e. `A_j ↦ −i A_j`.
    pub fn phi_map(&self) -> Result<Connection> {
        self.expect(Convention::Dynamical)?;
        Ok(self.rotate(Complex64::new(0.0, -1.0), Convention::Spectral))
    }

    /// Spectral → dynamical: `∇_j = i ∇̃_j`.
    pub fn phi_inverse(&self) -> Result<Connection> {
        self.expect(Convention::Spectral)?;
        Ok(self.rotate(Complex64::new(0.0, 1.0), Convention::Dynamical))
    }

    fn rotate(&self, factor: Complex64, convention: Convention) -> Connection {
        Connection {
            module: self.module.clone(),
            convention,
            potentials: self.potentials.iter().map(|a| a.scale(factor)).collect(),
        }
    }

    /// Same module and convention with new potentials, re-validated.
    pub fn with_potentials(&self, potentials: Vec<TorusMatrix>) -> Result<Connection> {
        Connection::new(self.module.clone(), self.convention, potentials)
    }

    pub fn max_truncation_loss(&self) -> f64 {
        self.potentials
            .iter()
            .map(|a| a.max_truncation_loss())
            .fold(self.module.p().max_truncation_loss(), f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn free2(r: i32) -> (Arc<DeformationMatrix>, TruncationPolicy, ProjectiveModule) {
        let th = Arc::new(DeformationMatrix::planar(0.27));
        let pol = TruncationPolicy::strict(r);
        let m = ProjectiveModule::free(&th, pol, 1);
        (th, pol, m)
    }

    fn hand_example() -> Connection {
        let (th, pol, m) = free2(4);
        let u1 = TorusElement::generator(&th, pol, 0).unwrap();
        let a2 = u1.sub(&u1.adjoint()).unwrap();
        let a2 = TorusMatrix::from_entries(1, vec![a2]).unwrap();
        let zero = TorusMatrix::zeros(&th, pol, 1);
        Connection::new(m, Convention::Dynamical, vec![zero, a2]).unwrap()
    }

    #[test]
    fn pair_indexing() {
        let got: Vec<_> = pairs(4).map(|(j, k)| pair_index(4, j, k)).collect();
        assert_eq!(got, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn module_construction() {
        let (th, pol, _) = free2(3);
        let d = TorusMatrix::diag(vec![TorusElement::one(&th, pol), TorusElement::zero(&th, pol)]).unwrap();
        assert!(ProjectiveModule::new(d).is_ok());
        let half = TorusMatrix::scalar_identity(&th, pol, 2, c(0.5, 0.0));
        assert!(matches!(ProjectiveModule::new(half), Err(Error::NotProjection { .. })));
    }

    #[test]
    fn pairing_on_free_module() {
        let (th, pol, _) = free2(3);
        let m = ProjectiveModule::free(&th, pol, 2);
        let e1 = ModuleVector::basis(&th, pol, 2, 0);
        assert_eq!(m.hermitian_pairing(&e1, &e1).unwrap().trace_tau(), c(1.0, 0.0));

        let d = TorusMatrix::diag(vec![TorusElement::one(&th, pol), TorusElement::zero(&th, pol)]).unwrap();
        let m = ProjectiveModule::new(d).unwrap();
        let e2 = ModuleVector::basis(&th, pol, 2, 1);
        assert!(matches!(m.hermitian_pairing(&e2, &e2), Err(Error::OutsideModule(_))));
    }

    #[test]
    fn grassmannian_on_free_module_is_derivation() {
        let (th, pol, m) = free2(3);
        let g = Connection::grassmannian(&m, Convention::Spectral);
        let u1 = TorusElement::generator(&th, pol, 0).unwrap();
        let xi = ModuleVector::new(vec![u1.clone()]).unwrap();
        let out = g.apply(0, &xi).unwrap();
        assert!(out.get(0).sub(&u1).unwrap().l1_norm() < 1e-15);
        assert!(g.potentials().iter().all(|a| a.l1_norm() == 0.0));
        assert!(g.check_compatibility(5, 1).unwrap() <= 1e-12);
        assert!(g.apply(2, &xi).is_err());
    }

    #[test]
    fn potential_acts_by_multiplication() {
        let c = hand_example();
        let th = c.module().theta().clone();
        let pol = c.module().policy();
        let e1 = ModuleVector::basis(&th, pol, 1, 0);
        let out = c.apply(1, &e1).unwrap();
        assert!(out.get(0).sub(c.potentials()[1].get(0, 0)).unwrap().l1_norm() < 1e-15);
    }

    #[test]
    fn hand_example_curvature_and_value() {
        let c = hand_example();
        let f = c.curvature().unwrap();
        let th = c.module().theta().clone();
        let pol = c.module().policy();
        let u1 = TorusElement::generator(&th, pol, 0).unwrap();
        let want = u1.add(&u1.adjoint()).unwrap().scale(Complex64::new(0.0, 1.0));
        assert!(f.get(0, 1).get(0, 0).sub(&want).unwrap().l1_norm() < 1e-14);
        assert!((c.ym_dynamical().unwrap() - 2.0).abs() < 1e-12);
        assert!(c.check_compatibility(5, 3).unwrap() <= 1e-10);
    }

    #[test]
    fn invariants_enforced_on_construction() {
        let (th, pol, m) = free2(3);
        let u1 = TorusElement::generator(&th, pol, 0).unwrap();
        let herm = TorusMatrix::from_entries(1, vec![u1.add(&u1.adjoint()).unwrap()]).unwrap();
        let zero = TorusMatrix::zeros(&th, pol, 1);
        assert!(Connection::new(m.clone(), Convention::Dynamical, vec![zero.clone(), herm.clone()]).is_err());
        assert!(Connection::new(m.clone(), Convention::Spectral, vec![zero.clone(), herm]).is_ok());
        assert!(Connection::new(m, Convention::Spectral, vec![zero]).is_err());
    }

    #[test]
    fn phi_round_trip_and_conventions() {
        let c = hand_example();
        let s = c.phi_map().unwrap();
        assert_eq!(s.convention(), Convention::Spectral);
        assert!(s.potentials()[1].self_adjoint_residual().unwrap() < 1e-15);
        let back = s.phi_inverse().unwrap();
        for (a, b) in back.potentials().iter().zip(c.potentials()) {
            assert!(a.distance(b).unwrap() == 0.0);
        }
        assert!(s.phi_map().is_err());
        assert!(c.phi_inverse().is_err());
        assert!(s.ym_dynamical().is_err());
    }

    #[test]
    fn constant_potentials_are_flat() {
        let th = Arc::new(DeformationMatrix::from_lower(3, &[0.1, 0.2, 0.3]).unwrap());
        let pol = TruncationPolicy::strict(2);
        let m = ProjectiveModule::free(&th, pol, 2);
        let pots = [0.3, -1.2, 2.0]
            .iter()
            .map(|&cj| TorusMatrix::scalar_identity(&th, pol, 2, c(0.0, cj)))
            .collect();
        let conn = Connection::new(m, Convention::Dynamical, pots).unwrap();
        let f = conn.curvature().unwrap();
        for (_, fjk) in f.iter() {
            assert_eq!(fjk.l1_norm(), 0.0);
        }
        assert_eq!(conn.ym_dynamical().unwrap(), 0.0);
    }
}
