//! Resonant driving of the weak transition.
//!
//! With `hbar = 1` the interaction is `H = (Omega/2) f(n) |1><2| + h.c.`,
//! `Omega = |Omega| e^{i phi}` and `f(n) = e^{-eta^2/2} L_n(eta^2)`. `H`
//! commutes with the phonon number, so each Fock index `n` carries its own
//! two-level Rabi oscillation at `Omega_n = |Omega| f(n)`.
//!
//! Composite matrices use the ordering `(level, n) -> level * N + n`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, FockOperator};
use crate::linalg::{self, CMatrix, I, ZERO};
use crate::special;
use crate::vibronic::{NumberStatisticsMatrix, VibronicDensity};

/// `|L_m(eta^2)|` below which the Rabi frequency of `m` counts as vanishing.
pub const RABI_NULL_THRESHOLD: f64 = 1e-6;

/// Laser drive on the weak transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveConfig {
    /// `|Omega|` in rad per unit time.
    pub rabi_magnitude: f64,
    /// Laser phase `phi` in radians.
    pub phase: f64,
    /// Lamb-Dicke parameter `eta`.
    pub lamb_dicke: f64,
}

impl DriveConfig {
    pub fn new(rabi_magnitude: f64, phase: f64, lamb_dicke: f64) -> Result<Self> {
        let d = Self {
            rabi_magnitude,
            phase,
            lamb_dicke,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rabi_magnitude > 0.0) || !self.rabi_magnitude.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "Rabi frequency must be positive, got {}",
                self.rabi_magnitude
            )));
        }
        if !(self.lamb_dicke >= 0.0) || !self.lamb_dicke.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "Lamb-Dicke parameter must be non-negative, got {}",
                self.lamb_dicke
            )));
        }
        if !(self.phase > -PI && self.phase <= PI) {
            return Err(Error::InvalidArgument(format!(
                "laser phase must lie in (-pi, pi], got {}",
                self.phase
            )));
        }
        Ok(())
    }

    /// Same drive with the laser phase set to `phase` wrapped into
    /// `(-pi, pi]`.
    pub fn with_phase(&self, phase: f64) -> Self {
        Self {
            phase: wrap_phase(phase),
            ..*self
        }
    }

    /// Signed `Omega_n`.
    pub fn rabi_frequency(&self, n: usize) -> f64 {
        self.rabi_magnitude * coupling_diagonal(self.lamb_dicke, n)
    }

    /// `Omega_m`, refusing a vanishing Rabi frequency.
    pub fn checked_rabi_frequency(&self, m: usize) -> Result<f64> {
        let x = self.lamb_dicke * self.lamb_dicke;
        let l = special::laguerre(m, x);
        if l.abs() < RABI_NULL_THRESHOLD {
            return Err(Error::RabiNull { m, laguerre: l });
        }
        Ok(self.rabi_magnitude * l * (-0.5 * x).exp())
    }
}

/// Maps an angle into `(-pi, pi]`.
pub fn wrap_phase(phase: f64) -> f64 {
    let w = phase.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// `Omega_n` for `n < len`.
#[derive(Debug, Clone, PartialEq)]
pub struct RabiSpectrum {
    pub omega: Vec<f64>,
}

impl RabiSpectrum {
    pub fn new(drive: &DriveConfig, len: usize) -> Self {
        let x = drive.lamb_dicke * drive.lamb_dicke;
        let scale = drive.rabi_magnitude * (-0.5 * x).exp();
        Self {
            omega: special::laguerre_table(len, x).into_iter().map(|l| scale * l).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }
}

/// Diagonal element `<n| f(a^dagger a) |n> = e^{-eta^2/2} L_n(eta^2)`.
pub fn coupling_diagonal(eta: f64, n: usize) -> f64 {
    let x = eta * eta;
    (-0.5 * x).exp() * special::laguerre(n, x)
}

/// Interaction Hamiltonian on the composite space (`2N x 2N`).
pub fn build_hamiltonian(drive: &DriveConfig, dimension: usize) -> Result<CMatrix> {
    drive.validate()?;
    fock::check_dimension(dimension)?;
    let spectrum = RabiSpectrum::new(drive, dimension);
    let mut h = CMatrix::zeros(2 * dimension, 2 * dimension);
    let phase = Complex64::from_polar(1.0, drive.phase);
    for n in 0..dimension {
        let g = phase * (0.5 * spectrum.omega[n]);
        h[(n, dimension + n)] = g;
        h[(dimension + n, n)] = g.conj();
    }
    Ok(h)
}

/// `n ⊗ 1` on the composite space.
pub fn composite_number_operator(dimension: usize) -> Result<CMatrix> {
    fock::check_dimension(dimension)?;
    Ok(CMatrix::from_fn(2 * dimension, 2 * dimension, |r, c| {
        if r == c {
            Complex64::new((r % dimension) as f64, 0.0)
        } else {
            ZERO
        }
    }))
}

/// Dense propagator `exp(-i H tau)`.
pub fn propagator(drive: &DriveConfig, dimension: usize, tau: f64) -> Result<CMatrix> {
    let h = build_hamiltonian(drive, dimension)?;
    Ok(linalg::expm(&(h * (-I * tau))))
}

/// Largest propagator entry connecting different Fock indices.
pub fn block_leakage(u: &CMatrix, dimension: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for r in 0..u.nrows() {
        for c in 0..u.ncols() {
            if r % dimension != c % dimension {
                worst = worst.max(u[(r, c)].norm());
            }
        }
    }
    worst
}

/// `U rho U^dagger` with the dense matrix-exponential propagator.
pub fn evolve_oracle(state: &VibronicDensity, drive: &DriveConfig, tau: f64) -> Result<VibronicDensity> {
    let u = propagator(drive, state.dim(), tau)?;
    let rho = &u * state.to_full_matrix() * u.adjoint();
    let rho = (&rho + rho.adjoint()).scale(0.5);
    from_full_unchecked(&rho, state.is_normalised())
}

fn from_full_unchecked(m: &CMatrix, normalised: bool) -> Result<VibronicDensity> {
    let n = m.nrows() / 2;
    let block = |i: usize, j: usize| {
        FockOperator::from_matrix(m.view((i * n, j * n), (n, n)).into_owned())
    };
    Ok(VibronicDensity::from_blocks_trusted(
        [[block(0, 0)?, block(0, 1)?], [block(1, 0)?, block(1, 1)?]],
        normalised,
    ))
}

/// Unnormalised state after a dark probe: `|2><2| ⊗ <2|rho|2>`.
pub fn project_dark(state: &VibronicDensity) -> Result<VibronicDensity> {
    let n = state.dim();
    let z = FockOperator::zeros(n)?;
    let rho22 = state.blocks()[1][1].clone();
    Ok(VibronicDensity::from_blocks_trusted(
        [[z.clone(), z.clone()], [z, rho22]],
        false,
    ))
}

/// Diagonal of the motional operator left after a dark probe following the
/// first interaction of duration `tau1`:
///
/// `rho_22^{nn} cos^2(Omega_n tau1 / 2) + rho_11^{nn} sin^2(Omega_n tau1 / 2)
///  + Im[rho_12^{nn} e^{-i phi}] sin(Omega_n tau1)`.
pub fn reduced_after_first_cycle(stats: &NumberStatisticsMatrix, drive: &DriveConfig, tau1: f64) -> Vec<f64> {
    let spectrum = RabiSpectrum::new(drive, stats.len());
    let rot = Complex64::from_polar(1.0, -drive.phase);
    stats
        .values()
        .iter()
        .zip(&spectrum.omega)
        .map(|(b, &om)| {
            let half = 0.5 * om * tau1;
            let (s, c) = half.sin_cos();
            b[1][1].re * c * c + b[0][0].re * s * s + (b[0][1] * rot).im * (om * tau1).sin()
        })
        .collect()
}

/// Applies the dark-probe filter of the subsequent cycles:
/// `prod_q cos^2(Omega_n tau_q / 2)`.
pub fn cycle_product(reduced_tau1: &[f64], drive: &DriveConfig, taus: &[f64]) -> Vec<f64> {
    let spectrum = RabiSpectrum::new(drive, reduced_tau1.len());
    reduced_tau1
        .iter()
        .zip(&spectrum.omega)
        .map(|(&r, &om)| {
            taus.iter()
                .map(|&t| (0.5 * om * t).cos().powi(2))
                .product::<f64>()
                * r
        })
        .collect()
}

/// Probability of an all-dark sequence: `sum_n filtered[n]`.
pub fn success_probability(filtered: &[f64]) -> f64 {
    filtered.iter().sum()
}

/// Per-Fock 2x2 propagator `exp(-i H_n tau)` in the basis `(|1,n>, |2,n>)`.
pub fn two_level_propagator(omega_n: f64, phase: f64, tau: f64) -> [[Complex64; 2]; 2] {
    let theta = 0.5 * omega_n * tau;
    let (s, c) = theta.sin_cos();
    let e = Complex64::from_polar(1.0, phase);
    [
        [Complex64::new(c, 0.0), -I * e * s],
        [-I * e.conj() * s, Complex64::new(c, 0.0)],
    ]
}
