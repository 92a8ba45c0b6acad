//! Projected gradient descent for the dynamical Yang–Mills functional.
//!
//! The tangent space at a connection is the real vector space of tuples of
//! skew-adjoint `p`-compressed matrices with inner product
//! `(H, H′) = Σ_j Re τ_q(H_j* H′_j)`.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::connection::{pairs, Connection, Convention, ProjectiveModule};
use crate::error::{Error, Result};
use crate::matrix::TorusMatrix;
use crate::random;
use crate::torus::{Exponent, TorusElement};

const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Step for the central finite-difference audit.
pub const FD_STEP: f64 = 1e-5;
/// Denominator floor of the finite-difference relative error, as a
/// fraction of `‖G‖·‖H‖`. Directions nearly orthogonal to the gradient
/// have derivatives at the roundoff level of the difference quotient.
pub const FD_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DescentParams {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub armijo_c: f64,
    pub step_init: f64,
    pub step_shrink: f64,
    /// Line search gives up below this step.
    pub min_step: f64,
    pub seed: u64,
}

impl Default for DescentParams {
    fn default() -> Self {
        Self {
            max_iter: 200,
            grad_tol: 1e-8,
            armijo_c: 1e-4,
            step_init: 1.0,
            step_shrink: 0.5,
            min_step: 1e-14,
            seed: 0,
        }
    }
}

impl DescentParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return bad("armijo_c must lie in (0, 1)");
        }
        if !(self.step_shrink > 0.0 && self.step_shrink < 1.0) {
            return bad("step_shrink must lie in (0, 1)");
        }
        if !(self.step_init > 0.0 && self.step_init.is_finite()) {
            return bad("step_init must be positive");
        }
        if !(self.min_step > 0.0 && self.min_step <= self.step_init) {
            return bad("min_step must lie in (0, step_init]");
        }
        if self.grad_tol.is_nan() || self.grad_tol < 0.0 {
            return bad("grad_tol must be nonnegative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub ym: f64,
    pub grad_norm: f64,
    /// Accepted step leading to this iterate; zero for the start.
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct DescentTrace {
    pub records: Vec<IterationRecord>,
    pub final_connection: Connection,
    pub converged: bool,
    pub line_search_failed: bool,
}

impl DescentTrace {
    pub fn final_ym(&self) -> f64 {
        self.records.last().map(|r| r.ym).unwrap_or(f64::NAN)
    }

    pub fn is_monotone(&self) -> bool {
        self.records.windows(2).all(|w| w[1].ym <= w[0].ym)
    }
}

/// Skew-adjoint part of `p G p`.
pub fn project_tangent(module: &ProjectiveModule, g: &TorusMatrix) -> Result<TorusMatrix> {
    module.project_skew(g)
}

/// `Σ_j Re τ_q(G_j* H_j)`.
pub fn gradient_pairing(g: &[TorusMatrix], h: &[TorusMatrix]) -> Result<f64> {
    if g.len() != h.len() {
        return Err(Error::DimensionMismatch {
            expected: g.len(),
            got: h.len(),
        });
    }
    let mut total = 0.0;
    for (a, b) in g.iter().zip(h) {
        total += a.tau_inner(b)?.re;
    }
    Ok(total)
}

pub fn tangent_norm(g: &[TorusMatrix]) -> Result<f64> {
    Ok(gradient_pairing(g, g)?.max(0.0).sqrt())
}

/// Gradient of `YM` with respect to the potentials, projected to the
/// tangent space. For each pair `j < k` with `F = F_jk`:
/// `G_j += 2(δ̃_k F + [A_k, F])`, `G_k += 2(−δ̃_j F + [F, A_j])`.
pub fn ym_gradient(c: &Connection) -> Result<Vec<TorusMatrix>> {
    c.expect(Convention::Dynamical)?;
    let f = c.curvature()?;
    ym_gradient_from(c, &f)
}

fn ym_gradient_from(c: &Connection, f: &crate::connection::CurvatureForm) -> Result<Vec<TorusMatrix>> {
    let n = c.n();
    let a = c.potentials();
    let mut parts: Vec<Vec<TorusMatrix>> = vec![Vec::new(); n];
    for (j, k) in pairs(n) {
        let fjk = f.get(j, k);
        parts[j].push(fjk.delta_tilde(k)?);
        parts[j].push(a[k].commutator(fjk)?);
        parts[k].push(fjk.delta_tilde(j)?.scale(-ONE));
        parts[k].push(fjk.commutator(&a[j])?);
    }
    let two = Complex64::new(2.0, 0.0);
    parts
        .iter()
        .map(|list| {
            let terms: Vec<_> = list.iter().map(|m| (two, m)).collect();
            project_tangent(c.module(), &TorusMatrix::linear_combine(&terms)?)
        })
        .collect()
}

fn step_potentials(c: &Connection, g: &[TorusMatrix], alpha: f64) -> Result<Vec<TorusMatrix>> {
    c.potentials()
        .iter()
        .zip(g)
        .map(|(a, gj)| {
            let next = TorusMatrix::linear_combine(&[(ONE, a), (Complex64::new(-alpha, 0.0), gj)])?;
            project_tangent(c.module(), &next)
        })
        .collect()
}

/// Projected gradient descent with Armijo backtracking.
pub fn minimize_ym(c0: &Connection, params: &DescentParams) -> Result<DescentTrace> {
    c0.expect(Convention::Dynamical)?;
    params.validate()?;
    let mut current = c0.clone();
    let mut f = current.curvature()?;
    let mut ym = f.squared_norm()?;
    let mut g = ym_gradient_from(&current, &f)?;
    let mut gnorm = tangent_norm(&g)?;
    let mut records = vec![IterationRecord {
        iteration: 0,
        ym,
        grad_norm: gnorm,
        step: 0.0,
    }];
    let mut converged = gnorm <= params.grad_tol;
    let mut line_search_failed = false;
    let mut iteration = 0;
    while !converged && iteration < params.max_iter {
        let mut alpha = params.step_init;
        let accepted = loop {
            if alpha < params.min_step {
                break None;
            }
            let trial = Connection::new_unchecked(
                current.module().clone(),
                Convention::Dynamical,
                step_potentials(&current, &g, alpha)?,
            )?;
            let tf = trial.curvature()?;
            let tym = tf.squared_norm()?;
            if tym <= ym - params.armijo_c * alpha * gnorm * gnorm {
                break Some((trial, tf, tym));
            }
            alpha *= params.step_shrink;
        };
        let Some((next, nf, nym)) = accepted else {
            line_search_failed = true;
            break;
        };
        iteration += 1;
        current = next;
        f = nf;
        ym = nym;
        g = ym_gradient_from(&current, &f)?;
        gnorm = tangent_norm(&g)?;
        records.push(IterationRecord {
            iteration,
            ym,
            grad_norm: gnorm,
            step: alpha,
        });
        converged = gnorm <= params.grad_tol;
    }
    Ok(DescentTrace {
        records,
        final_connection: current,
        converged,
        line_search_failed,
    })
}

/// One finite-difference audit sample.
#[derive(Debug, Clone, Serialize)]
pub struct FdSample {
    pub axis: usize,
    pub row: usize,
    pub col: usize,
    pub exponent: Vec<i32>,
    pub imaginary: bool,
    pub analytic: f64,
    pub finite_difference: f64,
    pub relative_error: f64,
}

fn ym_at(c: &Connection, potentials: Vec<TorusMatrix>) -> Result<f64> {
    Connection::new_unchecked(c.module().clone(), Convention::Dynamical, potentials)?
        .curvature()?
        .squared_norm()
}

/// Central difference of `YM` along the tangent direction `h`.
pub fn fd_directional(c: &Connection, h: &[TorusMatrix], step: f64) -> Result<f64> {
    let shifted = |s: f64| -> Result<Vec<TorusMatrix>> {
        c.potentials()
            .iter()
            .zip(h)
            .map(|(a, hj)| TorusMatrix::linear_combine(&[(ONE, a), (Complex64::new(s, 0.0), hj)]))
            .collect()
    };
    let plus = ym_at(c, shifted(step)?)?;
    let minus = ym_at(c, shifted(-step)?)?;
    Ok((plus - minus) / (2.0 * step))
}

/// Compares the analytic gradient with central differences along
/// `samples` random coefficient coordinates. Each coordinate `E` (one real
/// or imaginary Fourier coefficient of one entry of one potential) is
/// projected to the tangent space, `H = p (E − E*)/2 p`, before
/// differencing; coordinates killed by the projection are redrawn.
pub fn fd_audit(c: &Connection, samples: usize, radius: i32, seed: u64) -> Result<Vec<FdSample>> {
    c.expect(Convention::Dynamical)?;
    let n = c.n();
    let q = c.module().q();
    let theta = c.module().theta().clone();
    let policy = c.module().policy();
    let radius = radius.min(policy.r_max);
    let g = ym_gradient(c)?;
    let gnorm = tangent_norm(&g)?;
    let zero = TorusMatrix::zeros(&theta, policy, q);
    let mut rng = random::rng(seed);
    let mut out = Vec::with_capacity(samples);
    let mut attempts = 0;
    while out.len() < samples {
        attempts += 1;
        if attempts > 100 * samples.max(1) {
            return Err(Error::InvalidParameter("no tangent coordinates survive the projection".into()));
        }
        let axis = rng.gen_range(0..n);
        let (row, col) = (rng.gen_range(0..q), rng.gen_range(0..q));
        let exponent: Vec<i32> = (0..n).map(|_| rng.gen_range(-radius..=radius)).collect();
        let imaginary = rng.gen_bool(0.5);
        let coeff = if imaginary { Complex64::new(0.0, 1.0) } else { ONE };
        let mono = TorusElement::monomial(&theta, policy, Exponent::new(&exponent), coeff)?;
        let mut entries = zero.entries().to_vec();
        entries[row * q + col] = mono;
        let e = TorusMatrix::from_entries(q, entries)?;
        let hj = project_tangent(c.module(), &e)?;
        if hj.l1_norm() < 1e-12 {
            continue;
        }
        let mut h = vec![zero.clone(); n];
        h[axis] = hj;
        let analytic = gradient_pairing(&g, &h)?;
        let finite_difference = fd_directional(c, &h, FD_STEP)?;
        let floor = FD_FLOOR * gnorm * tangent_norm(&h)?;
        let relative_error = (analytic - finite_difference).abs()
            / analytic.abs().max(finite_difference.abs()).max(floor).max(f64::MIN_POSITIVE);
        out.push(FdSample {
            axis,
            row,
            col,
            exponent,
            imaginary,
            analytic,
            finite_difference,
            relative_error,
        });
    }
    Ok(out)
}
