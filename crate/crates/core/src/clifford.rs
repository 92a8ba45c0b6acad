//! Clifford gamma matrices and the normalized matrix trace.
//!
//! For `n = 2m` the generators are the Jordan–Wigner strings
//! `σz ⊗ … ⊗ σz ⊗ σx ⊗ 1 ⊗ …` and `σz ⊗ … ⊗ σz ⊗ σy ⊗ 1 ⊗ …`; odd `n`
//! appends the full `σz ⊗ … ⊗ σz`. Entries lie in `{0, ±1, ±i}`, so every
//! relation holds exactly in floating point.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

#[derive(Debug, Clone, PartialEq)]
pub struct CliffordRep {
    n: usize,
    gammas: Vec<CMatrix>,
}

fn pauli_x() -> CMatrix {
    let o = Complex64::new(0.0, 0.0);
    let l = Complex64::new(1.0, 0.0);
    CMatrix::from_row_slice(2, 2, &[o, l, l, o])
}

fn pauli_y() -> CMatrix {
    let o = Complex64::new(0.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    CMatrix::from_row_slice(2, 2, &[o, -i, i, o])
}

fn pauli_z() -> CMatrix {
    let o = Complex64::new(0.0, 0.0);
    let l = Complex64::new(1.0, 0.0);
    CMatrix::from_row_slice(2, 2, &[l, o, o, -l])
}

fn kron_all(factors: &[CMatrix]) -> CMatrix {
    factors
        .iter()
        .fold(CMatrix::identity(1, 1), |acc, f| acc.kronecker(f))
}

/// Generates `n` self-adjoint `N × N` matrices, `N = 2^⌊n/2⌋`, with
/// `γ_r γ_s + γ_s γ_r = 2 δ_rs`.
pub fn gamma_generate(n: usize) -> Result<CliffordRep> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "Clifford generators need n >= 2, got {n}"
        )));
    }
    let m = n / 2;
    let id = CMatrix::identity(2, 2);
    let mut gammas = Vec::with_capacity(n);
    for k in 0..m {
        for middle in [pauli_x(), pauli_y()] {
            let factors: Vec<CMatrix> = (0..m)
                .map(|i| match i.cmp(&k) {
                    std::cmp::Ordering::Less => pauli_z(),
                    std::cmp::Ordering::Equal => middle.clone(),
                    std::cmp::Ordering::Greater => id.clone(),
                })
                .collect();
            gammas.push(kron_all(&factors));
        }
    }
    if n % 2 == 1 {
        gammas.push(kron_all(&vec![pauli_z(); m]));
    }
    Ok(CliffordRep { n, gammas })
}

impl CliffordRep {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Representation size `N = 2^⌊n/2⌋`.
    pub fn size(&self) -> usize {
        self.gammas[0].nrows()
    }

    pub fn gamma(&self, j: usize) -> &CMatrix {
        &self.gammas[j]
    }

    pub fn gammas(&self) -> &[CMatrix] {
        &self.gammas
    }

    /// Largest entry of `γ_rγ_s + γ_sγ_r − 2δ_rs I` over all pairs.
    pub fn anticommutator_residual(&self) -> f64 {
        let big_n = self.size();
        let mut worst: f64 = 0.0;
        for r in 0..self.n {
            for s in 0..self.n {
                let mut ac = &self.gammas[r] * &self.gammas[s] + &self.gammas[s] * &self.gammas[r];
                if r == s {
                    ac -= CMatrix::identity(big_n, big_n) * Complex64::new(2.0, 0.0);
                }
                worst = worst.max(ac.iter().map(|z| z.norm()).fold(0.0, f64::max));
            }
        }
        worst
    }
}

/// `(1/N) Σ_i M_ii`.
pub fn mat_trace_normalized(m: &CMatrix) -> Result<Complex64> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::ShapeMismatch(format!(
            "trace of a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.trace() / m.nrows() as f64)
}
