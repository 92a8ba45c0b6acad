//! Seeded generators for test inputs and random starting points.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::connection::{Connection, Convention, ProjectiveModule};
use crate::error::Result;
use crate::matrix::{ModuleVector, TorusMatrix};
use crate::torus::{DeformationMatrix, Exponent, TorusElement, TruncationPolicy};

pub type DetRng = ChaCha8Rng;

pub fn rng(seed: u64) -> DetRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn box_exponents(n: usize, radius: i32) -> Vec<Exponent> {
    let mut out = vec![Exponent::zero(n)];
    for k in 0..n {
        let mut next = Vec::with_capacity(out.len() * (2 * radius as usize + 1));
        for e in &out {
            for v in -radius..=radius {
                let mut c = e.as_slice().to_vec();
                c[k] = v;
                next.push(Exponent::new(&c));
            }
        }
        out = next;
    }
    out
}

fn coeff<R: Rng>(rng: &mut R, scale: f64) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale
}

/// Dense random element on the box `[-radius, radius]^n`.
pub fn element<R: Rng>(
    rng: &mut R,
    theta: &Arc<DeformationMatrix>,
    policy: TruncationPolicy,
    radius: i32,
    scale: f64,
) -> TorusElement {
    let terms: Vec<_> = box_exponents(theta.n(), radius)
        .into_iter()
        .map(|e| (e, coeff(rng, scale)))
        .collect();
    TorusElement::from_terms(theta, policy, terms).expect("box radius within policy")
}

/// Random element with a few monomials on the box.
pub fn sparse_element<R: Rng>(
    rng: &mut R,
    theta: &Arc<DeformationMatrix>,
    policy: TruncationPolicy,
    radius: i32,
    terms: usize,
    scale: f64,
) -> TorusElement {
    let n = theta.n();
    let list: Vec<_> = (0..terms)
        .map(|_| {
            let e: Vec<i32> = (0..n).map(|_| rng.gen_range(-radius..=radius)).collect();
            (Exponent::new(&e), coeff(rng, scale))
        })
        .collect();
    TorusElement::from_terms(theta, policy, list).expect("box radius within policy")
}

pub fn matrix<R: Rng>(
    rng: &mut R,
    theta: &Arc<DeformationMatrix>,
    policy: TruncationPolicy,
    q: usize,
    radius: i32,
    scale: f64,
) -> TorusMatrix {
    let entries = (0..q * q)
        .map(|_| element(rng, theta, policy, radius, scale))
        .collect();
    TorusMatrix::from_entries(q, entries).expect("shared algebra")
}

pub fn vector<R: Rng>(
    rng: &mut R,
    theta: &Arc<DeformationMatrix>,
    policy: TruncationPolicy,
    q: usize,
    radius: i32,
    scale: f64,
) -> ModuleVector {
    ModuleVector::new((0..q).map(|_| element(rng, theta, policy, radius, scale)).collect())
        .expect("shared algebra")
}

/// Random vector in the range of the module's projection.
pub fn module_vector<R: Rng>(rng: &mut R, module: &ProjectiveModule, radius: i32, scale: f64) -> Result<ModuleVector> {
    let v = vector(rng, module.theta(), module.policy(), module.q(), radius, scale);
    module.p().mul_vec(&v)
}

/// A random skew-adjoint `p`-compressed potential, the skew part of `pBp`.
pub fn skew_potential<R: Rng>(rng: &mut R, module: &ProjectiveModule, radius: i32, scale: f64) -> Result<TorusMatrix> {
    let b = matrix(rng, module.theta(), module.policy(), module.q(), radius, scale);
    module.project_skew(&b)
}

/// Dynamical connection with random skew potentials on every axis.
pub fn dynamical_connection<R: Rng>(
    rng: &mut R,
    module: &ProjectiveModule,
    radius: i32,
    scale: f64,
) -> Result<Connection> {
    let potentials = (0..module.n())
        .map(|_| skew_potential(rng, module, radius, scale))
        .collect::<Result<Vec<_>>>()?;
    Connection::new(module.clone(), Convention::Dynamical, potentials)
}

/// Exact rank-one projection `[[a, b w], [b̄ w*, 1 − a]]` with
/// `|b|² = a(1 − a)` and `w` a random unit-modulus monomial.
pub fn rank_one_projection<R: Rng>(
    rng: &mut R,
    theta: &Arc<DeformationMatrix>,
    policy: TruncationPolicy,
    radius: i32,
) -> TorusMatrix {
    let n = theta.n();
    let a: f64 = rng.gen_range(0.1..0.9);
    let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let b = Complex64::from_polar((a * (1.0 - a)).sqrt(), phase);
    let exp: Vec<i32> = loop {
        let e: Vec<i32> = (0..n).map(|_| rng.gen_range(-radius..=radius)).collect();
        if e.iter().any(|&x| x != 0) {
            break e;
        }
    };
    let w = TorusElement::monomial(theta, policy, Exponent::new(&exp), Complex64::new(1.0, 0.0))
        .expect("radius within policy");
    TorusMatrix::from_rows(vec![
        vec![TorusElement::scalar(theta, policy, Complex64::new(a, 0.0)), w.scale(b)],
        vec![w.adjoint().scale(b.conj()), TorusElement::scalar(theta, policy, Complex64::new(1.0 - a, 0.0))],
    ])
    .expect("shared algebra")
}

/// Idempotent `v w` built from `v = (1, x)ᵀ`, `w = (1 − y x, y)`, so that
/// `w v = 1`. Not self-adjoint in general.
pub fn idempotent<R: Rng>(
    rng: &mut R,
    theta: &Arc<DeformationMatrix>,
    policy: TruncationPolicy,
    radius: i32,
    terms: usize,
    scale: f64,
) -> Result<TorusMatrix> {
    let one = TorusElement::one(theta, policy);
    let x = sparse_element(rng, theta, policy, radius, terms, scale);
    let y = sparse_element(rng, theta, policy, radius, terms, scale);
    let yx = y.mul(&x)?;
    let w0 = one.sub(&yx)?;
    TorusMatrix::from_rows(vec![vec![w0.clone(), y.clone()], vec![x.mul(&w0)?, x.mul(&y)?]])
}

/// Positive-definite `B* B + shift·I`.
pub fn positive<R: Rng>(
    rng: &mut R,
    theta: &Arc<DeformationMatrix>,
    policy: TruncationPolicy,
    q: usize,
    radius: i32,
    scale: f64,
    shift: f64,
) -> Result<TorusMatrix> {
    let b = matrix(rng, theta, policy, q, radius, scale);
    let shift = TorusMatrix::scalar_identity(theta, policy, q, Complex64::new(shift, 0.0));
    b.adjoint().mul(&b)?.add(&shift)
}

/// Random skew-symmetric deformation with entries in `(-0.5, 0.5)`.
pub fn theta<R: Rng>(rng: &mut R, n: usize) -> DeformationMatrix {
    let lower: Vec<f64> = (0..n * (n - 1) / 2).map(|_| rng.gen_range(-0.5..0.5)).collect();
    DeformationMatrix::from_lower(n, &lower).expect("valid size")
}
