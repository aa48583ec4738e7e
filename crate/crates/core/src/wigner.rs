//! Wigner-function matrix of a vibronic state.
//!
//! `W_ij(alpha) = (2/pi) Tr[rho_ij D(alpha) (-1)^n D^dagger(alpha)]`. The
//! diagonal entries are the unnormalised Wigner functions of the motion
//! conditioned on the electronic level and integrate to the level
//! populations; the off-diagonal entry integrates to the electronic
//! coherence. The `2/pi` prefactor is applied here and nowhere else.
//!
//! # Cat-state closed form
//!
//! For `(|beta>|2> - |-beta>|1>)/sqrt(2)` the brute-force kernel trace gives
//!
//! ```text
//! W_11 = (1/pi) exp(-2|alpha + beta|^2)
//! W_22 = (1/pi) exp(-2|alpha - beta|^2)
//! W_12 = -(1/pi) exp(-2|alpha|^2) exp(+4i Im(alpha beta^*)),   W_21 = W_12^*
//! ```
//!
//! The variant with prefactor `2/pi` on the diagonal and phase
//! `exp(2i Im(alpha beta^*))` that circulates for this state is not
//! consistent with the normalisation `int W_ii = 1/2` nor with
//! `int W_12 = -exp(-2|beta|^2)/2`; [`analytic_cat_wigner`] implements the
//! numerically verified form above.

use std::f64::consts::{FRAC_1_PI, FRAC_2_PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, FockOperator, PhaseSpacePoint};
use crate::linalg::{self, CMatrix, ZERO};
use crate::vibronic::{self, Block2, Level, NumberStatisticsMatrix, VibronicDensity};

/// Bound on `|W_ij|` for any physical state.
pub const WIGNER_BOUND: f64 = FRAC_2_PI;

/// Wigner-function matrix at one phase-space point, with optional standard
/// errors of `W_11, W_22, Re W_12, Im W_12` for sampled estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WignerMatrixSample {
    pub alpha: PhaseSpacePoint,
    pub w: Block2,
    pub stderr: Option<ComponentErrors>,
}

/// Per-component standard errors of a sampled Wigner matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ComponentErrors {
    pub w11: f64,
    pub w22: f64,
    pub re_w12: f64,
    pub im_w12: f64,
}

/// The four independent real components of a hermitian 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Component {
    W11,
    W22,
    ReW12,
    ImW12,
}

impl Component {
    pub const ALL: [Component; 4] = [Component::W11, Component::W22, Component::ReW12, Component::ImW12];

    pub fn name(self) -> &'static str {
        match self {
            Component::W11 => "w11",
            Component::W22 => "w22",
            Component::ReW12 => "re_w12",
            Component::ImW12 => "im_w12",
        }
    }

    pub fn of(self, w: &Block2) -> f64 {
        match self {
            Component::W11 => w[0][0].re,
            Component::W22 => w[1][1].re,
            Component::ReW12 => w[0][1].re,
            Component::ImW12 => w[0][1].im,
        }
    }
}

impl ComponentErrors {
    pub fn get(&self, c: Component) -> f64 {
        match c {
            Component::W11 => self.w11,
            Component::W22 => self.w22,
            Component::ReW12 => self.re_w12,
            Component::ImW12 => self.im_w12,
        }
    }
}

impl WignerMatrixSample {
    pub fn exact(alpha: PhaseSpacePoint, w: Block2) -> Self {
        Self {
            alpha,
            w,
            stderr: None,
        }
    }

    pub fn get(&self, i: Level, j: Level) -> Complex64 {
        self.w[i.index()][j.index()]
    }

    pub fn component(&self, c: Component) -> f64 {
        c.of(&self.w)
    }

    pub fn hermiticity_residual(&self) -> f64 {
        (self.w[0][1] - self.w[1][0].conj())
            .norm()
            .max(self.w[0][0].im.abs())
            .max(self.w[1][1].im.abs())
    }

    /// Builds the hermitian matrix from its four real components.
    pub fn from_components(alpha: PhaseSpacePoint, w11: f64, w22: f64, re12: f64, im12: f64) -> Self {
        let w12 = Complex64::new(re12, im12);
        Self::exact(
            alpha,
            [
                [Complex64::new(w11, 0.0), w12],
                [w12.conj(), Complex64::new(w22, 0.0)],
            ],
        )
    }
}

/// Rectangular phase-space lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub re_min: f64,
    pub re_max: f64,
    pub n_re: usize,
    pub im_min: f64,
    pub im_max: f64,
    pub n_im: usize,
}

impl Grid {
    /// Covers both lobes of a `|beta| = 2` cat and the interference region.
    pub const DEFAULT: Grid = Grid {
        re_min: -3.5,
        re_max: 3.5,
        n_re: 25,
        im_min: -2.0,
        im_max: 2.0,
        n_im: 15,
    };

    pub fn square(half_width: f64, n: usize) -> Self {
        Self {
            re_min: -half_width,
            re_max: half_width,
            n_re: n,
            im_min: -half_width,
            im_max: half_width,
            n_im: n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let axis = |lo: f64, hi: f64, n: usize, name: &str| -> Result<()> {
            if n == 0 {
                return Err(Error::InvalidArgument(format!("{name}: grid needs at least one point")));
            }
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidArgument(format!("{name}: non-finite bounds")));
            }
            if n > 1 && hi <= lo {
                return Err(Error::InvalidArgument(format!(
                    "{name}: bounds must be strictly increasing, got [{lo}, {hi}]"
                )));
            }
            if n == 1 && hi != lo {
                return Err(Error::InvalidArgument(format!(
                    "{name}: single-point axis needs equal bounds, got [{lo}, {hi}]"
                )));
            }
            Ok(())
        };
        axis(self.re_min, self.re_max, self.n_re, "re")?;
        axis(self.im_min, self.im_max, self.n_im, "im")
    }

    pub fn len(&self) -> usize {
        self.n_re * self.n_im
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn re_step(&self) -> f64 {
        step(self.re_min, self.re_max, self.n_re)
    }

    pub fn im_step(&self) -> f64 {
        step(self.im_min, self.im_max, self.n_im)
    }

    pub fn cell_area(&self) -> f64 {
        self.re_step() * self.im_step()
    }

    /// Point with linear index `k`; `Re alpha` runs fastest.
    pub fn point(&self, k: usize) -> PhaseSpacePoint {
        let (i_im, i_re) = (k / self.n_re, k % self.n_re);
        PhaseSpacePoint::new(
            self.re_min + i_re as f64 * self.re_step(),
            self.im_min + i_im as f64 * self.im_step(),
        )
    }

    pub fn points(&self) -> impl Iterator<Item = PhaseSpacePoint> + '_ {
        (0..self.len()).map(|k| self.point(k))
    }

    pub fn max_magnitude(&self) -> f64 {
        let re = self.re_min.abs().max(self.re_max.abs());
        let im = self.im_min.abs().max(self.im_max.abs());
        re.hypot(im)
    }

    fn is_boundary(&self, k: usize) -> bool {
        let (i_im, i_re) = (k / self.n_re, k % self.n_re);
        i_re == 0 || i_re + 1 == self.n_re || i_im == 0 || i_im + 1 == self.n_im
    }
}

impl Default for Grid {
    fn default() -> Self {
        Self::DEFAULT
    }
}

fn step(lo: f64, hi: f64, n: usize) -> f64 {
    if n > 1 {
        (hi - lo) / (n - 1) as f64
    } else {
        0.0
    }
}

/// Wigner-matrix samples over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerMatrixField {
    pub grid: Grid,
    pub samples: Vec<WignerMatrixSample>,
}

impl WignerMatrixField {
    pub fn new(grid: Grid, samples: Vec<WignerMatrixSample>) -> Result<Self> {
        grid.validate()?;
        if samples.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                actual: samples.len(),
            });
        }
        Ok(Self { grid, samples })
    }

    /// All-zero field.
    pub fn zeros(grid: Grid) -> Result<Self> {
        grid.validate()?;
        let samples = grid.points().map(|a| WignerMatrixSample::exact(a, [[ZERO; 2]; 2])).collect();
        Ok(Self { grid, samples })
    }
}

/// Quality issues detected while integrating or inverting a field.
#[derive(Debug, Clone, PartialEq)]
pub enum QualityWarning {
    /// Field is still significant on the grid edge.
    InsufficientCoverage { boundary_ratio: f64 },
    /// Grid spacing coarser than the inversion heuristic allows.
    CoarseGrid { spacing: f64 },
}

fn check_scalar_guard(rho: &FockOperator, alpha: PhaseSpacePoint) -> Result<()> {
    let dim = rho.dim();
    let tr = rho.trace().re;
    let mean: f64 = (0..dim).map(|n| n as f64 * rho.get(n, n).re).sum();
    let support = if tr > 0.0 { (mean / tr).max(0.0).sqrt() } else { 0.0 };
    fock::check_guard(support + alpha.magnitude(), dim)
}

/// `W(alpha) = (2/pi) Tr[rho D(alpha) (-1)^n D^dagger(alpha)]` of a motional
/// operator.
pub fn wigner_scalar(rho: &FockOperator, alpha: PhaseSpacePoint) -> Result<f64> {
    check_scalar_guard(rho, alpha)?;
    let k = fock::displaced_parity(alpha, rho.dim())?;
    let t = linalg::trace_product(rho.matrix(), k.matrix()) * FRAC_2_PI;
    if t.im.abs() > 1e-10 {
        return Err(Error::InvalidState(format!(
            "Wigner value has imaginary part {:.3e}; operator not hermitian",
            t.im
        )));
    }
    Ok(t.re)
}

/// Kernel-trace evaluation `W_ij = (2/pi) Tr[rho_ij K(alpha)]`.
pub fn wigner_matrix_exact(state: &VibronicDensity, alpha: PhaseSpacePoint) -> Result<WignerMatrixSample> {
    state.check_displacement(alpha)?;
    let k = fock::displaced_parity(alpha, state.dim())?;
    Ok(wigner_with_kernel(state, alpha, k.matrix()))
}

fn wigner_with_kernel(state: &VibronicDensity, alpha: PhaseSpacePoint, k: &CMatrix) -> WignerMatrixSample {
    let t = |i: Level, j: Level| linalg::trace_product(state.block(i, j).matrix(), k) * FRAC_2_PI;
    let w12 = t(Level::One, Level::Two);
    let w21 = t(Level::Two, Level::One);
    WignerMatrixSample::exact(
        alpha,
        [
            [Complex64::new(t(Level::One, Level::One).re, 0.0), w12],
            [w21, Complex64::new(t(Level::Two, Level::Two).re, 0.0)],
        ],
    )
}

/// Exact field over a grid, evaluated in parallel.
pub fn exact_field(state: &VibronicDensity, grid: &Grid) -> Result<WignerMatrixField> {
    grid.validate()?;
    let samples = (0..grid.len())
        .into_par_iter()
        .map(|k| wigner_matrix_exact(state, grid.point(k)))
        .collect::<Result<Vec<_>>>()?;
    WignerMatrixField::new(*grid, samples)
}

/// Series `W_ij = (2/pi) sum_n (-1)^n rho_ij^{nn}(alpha)` over the supplied
/// statistics. With `tail_tolerance`, the missing probability mass
/// `1 - sum_n occupation(n)` must stay below it.
pub fn wigner_from_number_statistics(
    stats: &NumberStatisticsMatrix,
    tail_tolerance: Option<f64>,
) -> Result<WignerMatrixSample> {
    if let Some(tol) = tail_tolerance {
        let deficit = 1.0 - stats.total_mass();
        if deficit > tol {
            return Err(Error::SeriesTruncation {
                deficit,
                tolerance: tol,
            });
        }
    }
    let mut w = [[ZERO; 2]; 2];
    for (n, block) in stats.values().iter().enumerate() {
        let s = if n % 2 == 0 { 1.0 } else { -1.0 };
        for i in 0..2 {
            for j in 0..2 {
                w[i][j] += block[i][j] * s;
            }
        }
    }
    for row in w.iter_mut() {
        for z in row.iter_mut() {
            *z *= FRAC_2_PI;
        }
    }
    Ok(WignerMatrixSample::exact(stats.alpha, w))
}

/// Wigner function of the motional marginal: `W_11 + W_22`.
pub fn wigner_reduced(sample: &WignerMatrixSample) -> f64 {
    sample.w[0][0].re + sample.w[1][1].re
}

/// Unnormalised Wigner function of the motion conditioned on finding the
/// electron in `sum_i psi_i |i>`.
pub fn wigner_conditioned(sample: &WignerMatrixSample, psi: [Complex64; 2]) -> Result<f64> {
    vibronic::check_unit_superposition(&psi)?;
    let mut acc = ZERO;
    for i in 0..2 {
        for j in 0..2 {
            acc += psi[i].conj() * psi[j] * sample.w[i][j];
        }
    }
    if acc.im.abs() > 1e-10 {
        return Err(Error::InvalidState(format!(
            "conditioned Wigner value has imaginary part {:.3e}",
            acc.im
        )));
    }
    Ok(acc.re)
}

/// Riemann-sum integral of a field with a quadrature error estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldIntegral {
    /// `int W_ij d^2 alpha`, an estimate of `sigma_ij`.
    pub sigma: Block2,
    /// `|S(h) - S(2h)|` from the every-other-point subgrid; zero when the grid
    /// is too small to coarsen.
    pub quadrature_error: f64,
    /// Largest boundary magnitude relative to the field maximum.
    pub boundary_ratio: f64,
    pub warnings: Vec<QualityWarning>,
}

/// Boundary-to-peak ratio above which the field is not considered covered.
pub const COVERAGE_THRESHOLD: f64 = 1e-3;

pub fn integrate_field(field: &WignerMatrixField) -> FieldIntegral {
    let grid = &field.grid;
    let area = grid.cell_area();
    let mut fine = [[ZERO; 2]; 2];
    let mut coarse = [[ZERO; 2]; 2];
    let coarsenable = grid.n_re >= 3 && grid.n_im >= 3;
    for (k, s) in field.samples.iter().enumerate() {
        let (i_im, i_re) = (k / grid.n_re, k % grid.n_re);
        let on_coarse = i_re % 2 == 0 && i_im % 2 == 0;
        for i in 0..2 {
            for j in 0..2 {
                fine[i][j] += s.w[i][j] * area;
                if on_coarse {
                    coarse[i][j] += s.w[i][j] * (4.0 * area);
                }
            }
        }
    }
    let quadrature_error = if coarsenable {
        vibronic::max_abs_diff2(&fine, &coarse)
    } else {
        0.0
    };
    let boundary_ratio = boundary_ratio(field);
    let mut warnings = Vec::new();
    if boundary_ratio > COVERAGE_THRESHOLD {
        warnings.push(QualityWarning::InsufficientCoverage { boundary_ratio });
    }
    FieldIntegral {
        sigma: fine,
        quadrature_error,
        boundary_ratio,
        warnings,
    }
}

fn boundary_ratio(field: &WignerMatrixField) -> f64 {
    let mag = |s: &WignerMatrixSample| {
        s.w.iter()
            .flat_map(|r| r.iter())
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    };
    let peak = field.samples.iter().map(mag).fold(0.0, f64::max);
    if peak == 0.0 {
        return 0.0;
    }
    let edge = field
        .samples
        .iter()
        .enumerate()
        .filter(|(k, _)| field.grid.is_boundary(*k))
        .map(|(_, s)| mag(s))
        .fold(0.0, f64::max);
    edge / peak
}

/// Largest grid spacing the inversion heuristic accepts.
pub const INVERSION_MAX_SPACING: f64 = 0.125;

/// Density operator recovered from a Wigner-matrix field.
#[derive(Debug, Clone, PartialEq)]
pub struct Inversion {
    /// Raw quadrature result, flagged unnormalised; its trace is reported.
    pub density: VibronicDensity,
    pub trace: f64,
    pub min_eigenvalue: f64,
    pub warnings: Vec<QualityWarning>,
}

impl Inversion {
    /// Fidelity with `reference` after renormalising the reconstruction.
    pub fn fidelity(&self, reference: &VibronicDensity) -> f64 {
        state_fidelity(reference, &self.density)
    }
}

/// Uhlmann fidelity between two composite states (each renormalised).
pub fn state_fidelity(a: &VibronicDensity, b: &VibronicDensity) -> f64 {
    let norm = |s: &VibronicDensity| {
        let m = s.to_full_matrix();
        let tr = s.trace();
        if tr > 0.0 {
            m / Complex64::new(tr, 0.0)
        } else {
            m
        }
    };
    linalg::fidelity(&norm(a), &norm(b))
}

/// `rho_ij = 2 sum_grid W_ij(alpha) D(alpha)(-1)^n D^dagger(alpha) dA`.
///
/// The kernel entries come from the closed-form displacement elements, so the
/// recovered blocks carry no truncation artefacts near `dimension`. Plain
/// Riemann quadrature, no regularisation. Rows of the grid are reduced in a
/// fixed order so the result does not depend on the thread count.
pub fn invert_to_density(field: &WignerMatrixField, dimension: usize) -> Result<Inversion> {
    let grid = &field.grid;
    grid.validate()?;
    fock::check_dimension(dimension)?;
    let area = grid.cell_area();
    let rows: Vec<[CMatrix; 3]> = (0..grid.n_im)
        .into_par_iter()
        .map(|i_im| -> Result<[CMatrix; 3]> {
            let mut acc = [
                CMatrix::zeros(dimension, dimension),
                CMatrix::zeros(dimension, dimension),
                CMatrix::zeros(dimension, dimension),
            ];
            for i_re in 0..grid.n_re {
                let s = &field.samples[i_im * grid.n_re + i_re];
                if s.w.iter().flat_map(|r| r.iter()).all(|z| *z == ZERO) {
                    continue;
                }
                let k = fock::displaced_parity_elements(s.alpha, dimension)?;
                let km = k.matrix();
                let f = 2.0 * area;
                for (target, weight) in acc.iter_mut().zip([s.w[0][0], s.w[1][1], s.w[0][1]]) {
                    let coef = weight * f;
                    target.zip_apply(km, |t, k| *t += k * coef);
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut r11 = CMatrix::zeros(dimension, dimension);
    let mut r22 = CMatrix::zeros(dimension, dimension);
    let mut r12 = CMatrix::zeros(dimension, dimension);
    for [a, b, c] in rows {
        r11 += a;
        r22 += b;
        r12 += c;
    }
    let herm = |m: CMatrix| (&m + m.adjoint()).scale(0.5);
    let r11 = herm(r11);
    let r22 = herm(r22);
    let r21 = r12.adjoint();
    let density = VibronicDensity::from_blocks_trusted(
        [
            [FockOperator::from_matrix_unchecked(r11), FockOperator::from_matrix_unchecked(r12)],
            [FockOperator::from_matrix_unchecked(r21), FockOperator::from_matrix_unchecked(r22)],
        ],
        false,
    );
    let mut warnings = Vec::new();
    let spacing = grid.re_step().max(grid.im_step());
    if spacing > INVERSION_MAX_SPACING {
        warnings.push(QualityWarning::CoarseGrid { spacing });
    }
    let ratio = boundary_ratio(field);
    if ratio > COVERAGE_THRESHOLD {
        warnings.push(QualityWarning::InsufficientCoverage { boundary_ratio: ratio });
    }
    Ok(Inversion {
        trace: density.trace(),
        min_eigenvalue: density.min_eigenvalue(),
        density,
        warnings,
    })
}

/// Closed-form Wigner matrix of `(|beta>|2> - |-beta>|1>)/sqrt(2)`; see the
/// module docs for the verified coefficients.
pub fn analytic_cat_wigner(beta: Complex64, alpha: PhaseSpacePoint) -> WignerMatrixSample {
    let a = alpha.alpha();
    let w11 = FRAC_1_PI * (-2.0 * (a + beta).norm_sqr()).exp();
    let w22 = FRAC_1_PI * (-2.0 * (a - beta).norm_sqr()).exp();
    let w12 = -FRAC_1_PI
        * (-2.0 * a.norm_sqr()).exp()
        * Complex64::from_polar(1.0, 4.0 * (a * beta.conj()).im);
    WignerMatrixSample::exact(
        alpha,
        [
            [Complex64::new(w11, 0.0), w12],
            [w12.conj(), Complex64::new(w22, 0.0)],
        ],
    )
}
