//! Differential forms induced by the Dirac operator `D = Σ δ_j ⊗ γ_j`.
//!
//! One-forms are stored in the basis `σ_j = 1 ⊗ γ_j`, two-forms in the
//! quotient basis `σ_pσ_q = 1 ⊗ γ_pγ_q`, `p < q`. A two-form may carry the
//! scalar `I`-component of a representative before the junk projection.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::clifford::CliffordRep;
use crate::connection::{pair_index, pairs, Connection, Convention, CurvatureForm};
use crate::error::{Error, Result};
use crate::matrix::{ModuleVector, TorusMatrix};
use crate::torus::{DeformationMatrix, TorusElement, TruncationPolicy};

/// Relative agreement required between the two spectral YM paths.
pub const CROSS_CHECK_TOL: f64 = 1e-10;
/// Absolute scale below which the cross-check compares absolutely.
pub const CROSS_CHECK_FLOOR: f64 = 1e-14;

const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

fn same_all(items: &[TorusElement]) -> Result<()> {
    for e in &items[1..] {
        items[0].same_algebra(e)?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct OmegaD1Element {
    components: Vec<TorusElement>,
}

impl OmegaD1Element {
    pub fn new(components: Vec<TorusElement>) -> Result<Self> {
        if components.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "one-forms need n >= 2 components, got {}",
                components.len()
            )));
        }
        same_all(&components)?;
        Ok(Self { components })
    }

    pub fn zero(theta: &Arc<DeformationMatrix>, policy: TruncationPolicy) -> Self {
        Self {
            components: vec![TorusElement::zero(theta, policy); theta.n()],
        }
    }

    /// `σ_k`, zero-based.
    pub fn sigma(theta: &Arc<DeformationMatrix>, policy: TruncationPolicy, k: usize) -> Result<Self> {
        let n = theta.n();
        if k >= n {
            return Err(Error::AxisOutOfRange { axis: k, n });
        }
        let mut out = Self::zero(theta, policy);
        out.components[k] = TorusElement::one(theta, policy);
        Ok(out)
    }

    pub fn n(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[TorusElement] {
        &self.components
    }

    pub fn get(&self, j: usize) -> &TorusElement {
        &self.components[j]
    }

    fn zip_with<F>(&self, other: &Self, f: F) -> Result<Self>
    where
        F: Fn(&TorusElement, &TorusElement) -> Result<TorusElement>,
    {
        check_len(self.n(), other.n())?;
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| f(a, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { components })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a.add(b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a.sub(b))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            components: self.components.iter().map(|a| a.scale(c)).collect(),
        }
    }

    /// `a·ω`.
    pub fn left_mul(&self, a: &TorusElement) -> Result<Self> {
        let components = self
            .components
            .iter()
            .map(|x| a.mul(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { components })
    }

    /// `ω·a`.
    pub fn right_mul(&self, a: &TorusElement) -> Result<Self> {
        let components = self
            .components
            .iter()
            .map(|x| x.mul(a))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { components })
    }

    /// Largest l1 norm over the components.
    pub fn max_norm(&self) -> f64 {
        self.components.iter().map(|a| a.l1_norm()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct OmegaD2Element {
    n: usize,
    components: Vec<TorusElement>,
    junk: Option<TorusElement>,
}

impl OmegaD2Element {
    /// Components in ascending pair order `(0,1), (0,2), …, (n−2,n−1)`.
    pub fn new(n: usize, components: Vec<TorusElement>, junk: Option<TorusElement>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("two-forms need n >= 2, got {n}")));
        }
        check_len(n * (n - 1) / 2, components.len())?;
        same_all(&components)?;
        if let Some(j) = &junk {
            components[0].same_algebra(j)?;
        }
        Ok(Self { n, components, junk })
    }

    pub fn zero(theta: &Arc<DeformationMatrix>, policy: TruncationPolicy) -> Self {
        let n = theta.n();
        Self {
            n,
            components: vec![TorusElement::zero(theta, policy); n * (n - 1) / 2],
            junk: None,
        }
    }

    /// A representative with only the scalar `I`-component.
    pub fn pure_junk(junk: TorusElement) -> Self {
        let mut out = Self::zero(junk.theta(), junk.policy());
        out.junk = Some(junk);
        out
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn components(&self) -> &[TorusElement] {
        &self.components
    }

    /// Coefficient of `σ_pσ_q`, `p < q`.
    pub fn get(&self, p: usize, q: usize) -> &TorusElement {
        &self.components[pair_index(self.n, p, q)]
    }

    pub fn junk(&self) -> Option<&TorusElement> {
        self.junk.as_ref()
    }

    fn combine(terms: &[(Complex64, &Self)]) -> Result<Self> {
        let first = terms[0].1;
        for (_, x) in terms {
            check_len(first.n, x.n)?;
        }
        let components = (0..first.components.len())
            .map(|i| {
                let parts: Vec<_> = terms.iter().map(|(c, x)| (*c, &x.components[i])).collect();
                TorusElement::linear_combine(&parts)
            })
            .collect::<Result<Vec<_>>>()?;
        let junk_parts: Vec<_> = terms
            .iter()
            .filter_map(|(c, x)| x.junk.as_ref().map(|j| (*c, j)))
            .collect();
        let junk = if junk_parts.is_empty() {
            None
        } else {
            Some(TorusElement::linear_combine(&junk_parts)?)
        };
        Ok(Self {
            n: first.n,
            components,
            junk,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Self::combine(&[(ONE, self), (ONE, other)])
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Self::combine(&[(ONE, self), (-ONE, other)])
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            n: self.n,
            components: self.components.iter().map(|a| a.scale(c)).collect(),
            junk: self.junk.as_ref().map(|j| j.scale(c)),
        }
    }

    /// `a·x`, applied to the junk part as well.
    pub fn left_mul(&self, a: &TorusElement) -> Result<Self> {
        let components = self
            .components
            .iter()
            .map(|x| a.mul(x))
            .collect::<Result<Vec<_>>>()?;
        let junk = self.junk.as_ref().map(|j| a.mul(j)).transpose()?;
        Ok(Self {
            n: self.n,
            components,
            junk,
        })
    }

    /// Largest l1 norm over the two-form components (junk excluded).
    pub fn max_norm(&self) -> f64 {
        self.components.iter().map(|a| a.l1_norm()).fold(0.0, f64::max)
    }
}

/// `d̃a = (δ_1 a, …, δ_n a)`.
pub fn d0(a: &TorusElement) -> Result<OmegaD1Element> {
    let components = (0..a.n())
        .map(|j| a.delta(j))
        .collect::<Result<Vec<_>>>()?;
    OmegaD1Element::new(components)
}

/// `d̃` on one-forms: the component `a` in slot `j` contributes
/// `δ_p(aU_j*)δ_q(U_j) − δ_q(aU_j*)δ_p(U_j)` to the pair `(p, q)`.
pub fn d1(w: &OmegaD1Element) -> Result<OmegaD2Element> {
    let n = w.n();
    let first = w.get(0);
    let (theta, policy) = (first.theta().clone(), first.policy());
    let mut acc: Vec<Vec<TorusElement>> = vec![Vec::new(); n * (n - 1) / 2];
    for j in 0..n {
        let a = w.get(j);
        if a.is_zero() {
            continue;
        }
        let uj = TorusElement::generator(&theta, policy, j)?;
        let au = a.mul(&uj.adjoint())?;
        let d_au = (0..n).map(|p| au.delta(p)).collect::<Result<Vec<_>>>()?;
        let d_u = (0..n).map(|p| uj.delta(p)).collect::<Result<Vec<_>>>()?;
        for (idx, (p, q)) in pairs(n).enumerate() {
            acc[idx].push(d_au[p].mul(&d_u[q])?);
            acc[idx].push(d_au[q].mul(&d_u[p])?.neg());
        }
    }
    let components = acc
        .iter()
        .map(|parts| {
            if parts.is_empty() {
                Ok(TorusElement::zero(&theta, policy))
            } else {
                let terms: Vec<_> = parts.iter().map(|x| (ONE, x)).collect();
                TorusElement::linear_combine(&terms)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    OmegaD2Element::new(n, components, None)
}

/// Product map `Ω_D¹ × Ω_D¹ → Ω_D²`: `(a_p b_q − a_q b_p)_{p<q}`, with the
/// scalar part `Σ_j a_j b_j` kept as junk.
pub fn omega1_product(a: &OmegaD1Element, b: &OmegaD1Element) -> Result<OmegaD2Element> {
    check_len(a.n(), b.n())?;
    let n = a.n();
    let components = pairs(n)
        .map(|(p, q)| a.get(p).mul(b.get(q))?.sub(&a.get(q).mul(b.get(p))?))
        .collect::<Result<Vec<_>>>()?;
    let diag = (0..n)
        .map(|j| a.get(j).mul(b.get(j)))
        .collect::<Result<Vec<_>>>()?;
    let terms: Vec<_> = diag.iter().map(|x| (ONE, x)).collect();
    let junk = TorusElement::linear_combine(&terms)?;
    OmegaD2Element::new(n, components, Some(junk))
}

/// The projection onto the orthogonal complement of the junk forms.
pub fn project_junk(x: &OmegaD2Element) -> OmegaD2Element {
    OmegaD2Element {
        n: x.n,
        components: x.components.clone(),
        junk: None,
    }
}

/// `c(n) Σ_{p<q} τ(x_pq* y_pq)`. Junk parts are orthogonal and ignored.
pub fn omega2_inner(x: &OmegaD2Element, y: &OmegaD2Element) -> Result<Complex64> {
    check_len(x.n, y.n)?;
    let c = dixmier_constant(x.n)?;
    let mut total = Complex64::new(0.0, 0.0);
    for (a, b) in x.components.iter().zip(&y.components) {
        total += a.tau_inner(b)?;
    }
    Ok(total * c)
}

fn gamma_half(n: usize) -> f64 {
    // Γ(1) = 1, Γ(1/2) = √π, Γ(x + 1) = x Γ(x)
    let (mut x, mut g) = if n.is_multiple_of(2) {
        (1.0, 1.0)
    } else {
        (0.5, std::f64::consts::PI.sqrt())
    };
    while x < n as f64 / 2.0 {
        g *= x;
        x += 1.0;
    }
    g
}

/// `c = 2Nπ^{n/2} / (n (2π)^n Γ(n/2))`, `N = 2^⌊n/2⌋`.
pub fn dixmier_constant(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("the constant needs n >= 2, got {n}")));
    }
    let pi = std::f64::consts::PI;
    let big_n = (1u64 << (n / 2)) as f64;
    let nf = n as f64;
    Ok(2.0 * big_n * pi.powf(nf / 2.0) / (nf * (2.0 * pi).powi(n as i32) * gamma_half(n)))
}

fn gamma_element_matrix(terms: &[(&TorusElement, crate::clifford::CMatrix)]) -> Result<TorusMatrix> {
    let size = terms[0].1.nrows();
    let mut entries = Vec::with_capacity(size * size);
    for r in 0..size {
        for c in 0..size {
            let parts: Vec<_> = terms.iter().map(|(a, g)| (g[(r, c)], *a)).collect();
            entries.push(TorusElement::linear_combine(&parts)?);
        }
    }
    TorusMatrix::from_entries(size, entries)
}

/// `π(ω) = Σ_j a_j ⊗ γ_j` as an `N × N` matrix over the algebra.
pub fn pi_represent1(w: &OmegaD1Element, g: &CliffordRep) -> Result<TorusMatrix> {
    check_len(g.n(), w.n())?;
    let terms: Vec<_> = (0..w.n()).map(|j| (w.get(j), g.gamma(j).clone())).collect();
    gamma_element_matrix(&terms)
}

/// `π(x) = Σ_{p<q} x_pq ⊗ γ_pγ_q + junk ⊗ I`.
pub fn pi_represent2(x: &OmegaD2Element, g: &CliffordRep) -> Result<TorusMatrix> {
    check_len(g.n(), x.n)?;
    let mut terms: Vec<_> = pairs(x.n)
        .map(|(p, q)| (x.get(p, q), g.gamma(p) * g.gamma(q)))
        .collect();
    if let Some(j) = &x.junk {
        let size = g.size();
        terms.push((j, crate::clifford::CMatrix::identity(size, size)));
    }
    gamma_element_matrix(&terms)
}

/// Curvature `Θ = Σ_{m<j} F̃_mj ⊗ σ_mσ_j` of a spectral connection.
#[derive(Debug, Clone)]
pub struct SpectralCurvature {
    form: CurvatureForm,
}

impl SpectralCurvature {
    pub fn form(&self) -> &CurvatureForm {
        &self.form
    }

    pub fn get(&self, m: usize, j: usize) -> &TorusMatrix {
        self.form.get(m, j)
    }

    /// `⟨⟨Θ, Θ⟩⟩ = c(n) Σ_{m<j} τ_q(F̃_mj* F̃_mj)`.
    pub fn squared_norm(&self) -> Result<f64> {
        Ok(dixmier_constant(self.form.n())? * self.form.squared_norm()?)
    }
}

pub fn curvature_spectral(c: &Connection) -> Result<SpectralCurvature> {
    c.expect(Convention::Spectral)?;
    Ok(SpectralCurvature { form: c.curvature()? })
}

/// Both evaluations of the spectral Yang–Mills value.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpectralYm {
    /// `Σ_k Σ_s ⟨x_s, x_s⟩` over the columns `p ẽ_k`.
    pub columns: f64,
    /// `c(n) Σ τ_q(F̃* F̃)` with `F̃` from the closed-form curvature.
    pub closed_form: f64,
    pub relative_deviation: f64,
}

fn relative_deviation(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(CROSS_CHECK_FLOOR)
}

/// Applies `Θ = ∇̃∘∇̃` to `ξ` and returns the `Ω_D²` coefficients of every
/// vector component, junk projected out.
pub fn theta_apply(c: &Connection, xi: &ModuleVector) -> Result<Vec<OmegaD2Element>> {
    c.expect(Convention::Spectral)?;
    let n = c.n();
    let theta = c.module().theta().clone();
    let policy = c.module().policy();
    let sigmas = (0..n)
        .map(|m| OmegaD1Element::sigma(&theta, policy, m))
        .collect::<Result<Vec<_>>>()?;
    let zetas = (0..n).map(|m| c.apply(m, xi)).collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(xi.len());
    for s in 0..xi.len() {
        let mut x = OmegaD2Element::zero(&theta, policy);
        for (m, zeta) in zetas.iter().enumerate() {
            for (j, sigma_j) in sigmas.iter().enumerate() {
                let eta = c.apply(j, zeta)?;
                x = x.add(&omega1_product(sigma_j, &sigmas[m])?.left_mul(eta.get(s))?)?;
            }
            x = x.add(&d1(&sigmas[m])?.left_mul(zeta.get(s))?)?;
        }
        out.push(project_junk(&x));
    }
    Ok(out)
}

/// Runs both paths and fails if they disagree by more than
/// [`CROSS_CHECK_TOL`] relative.
pub fn ym_spectral_paths(c: &Connection) -> Result<SpectralYm> {
    c.expect(Convention::Spectral)?;
    let mut columns = 0.0;
    for k in 0..c.module().q() {
        for x in theta_apply(c, &c.module().p().column(k))? {
            columns += omega2_inner(&x, &x)?.re;
        }
    }
    let closed_form = dixmier_constant(c.n())? * c.curvature_closed_form()?.squared_norm()?;
    let relative_deviation = relative_deviation(columns, closed_form);
    if relative_deviation > CROSS_CHECK_TOL {
        return Err(Error::CrossCheck {
            what: "spectral Yang-Mills paths",
            left: columns,
            right: closed_form,
        });
    }
    Ok(SpectralYm {
        columns,
        closed_form,
        relative_deviation,
    })
}

/// `⟨⟨Θ, Θ⟩⟩` for a spectral connection (column path, cross-checked).
pub fn ym_spectral(c: &Connection) -> Result<f64> {
    Ok(ym_spectral_paths(c)?.columns)
}
