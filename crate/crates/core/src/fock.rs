//! Truncated Fock-space states and operators.
//!
//! Every operator lives on the span of `|0>, ..., |N_max - 1>`. Operators that
//! move amplitude towards high occupation numbers (displacements, coherent
//! states) are only trusted while the reachable amplitude respects the guard
//! band `(|alpha| + 3)^2 <= N_max`, which keeps the Poisson tail beyond the
//! cut below ~1e-10.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, ONE, ZERO};
use crate::special;

/// Default Fock-space truncation.
pub const DEFAULT_DIMENSION: usize = 64;

/// Smallest truncation for which an amplitude stays inside the guard band.
pub fn guard_dimension(amplitude: f64) -> usize {
    let a = amplitude.abs();
    let need = (a + 3.0) * (a + 3.0);
    // tolerate rounding at exact integers
    (need - 1e-9).ceil().max(2.0) as usize
}

/// `DEFAULT_DIMENSION`, raised as far as the guard band demands.
pub fn dimension_for(amplitude: f64) -> usize {
    DEFAULT_DIMENSION.max(guard_dimension(amplitude))
}

/// A zero amplitude is exact at any truncation and always passes.
pub fn check_guard(amplitude: f64, dimension: usize) -> Result<()> {
    if amplitude == 0.0 {
        return Ok(());
    }
    let required = guard_dimension(amplitude);
    if required > dimension {
        return Err(Error::TruncationUnsafe {
            amplitude,
            dimension,
            required,
        });
    }
    Ok(())
}

pub(crate) fn check_dimension(dimension: usize) -> Result<()> {
    if dimension < 2 {
        Err(Error::InvalidDimension(dimension))
    } else {
        Ok(())
    }
}

/// A point `alpha` of the oscillator phase space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpacePoint(pub Complex64);

impl PhaseSpacePoint {
    pub const ORIGIN: PhaseSpacePoint = PhaseSpacePoint(ZERO);

    pub fn new(re: f64, im: f64) -> Self {
        Self(Complex64::new(re, im))
    }

    pub fn alpha(self) -> Complex64 {
        self.0
    }

    pub fn re(self) -> f64 {
        self.0.re
    }

    pub fn im(self) -> f64 {
        self.0.im
    }

    pub fn magnitude(self) -> f64 {
        self.0.norm()
    }
}

impl From<Complex64> for PhaseSpacePoint {
    fn from(z: Complex64) -> Self {
        Self(z)
    }
}

/// State vector in the truncated number basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    amplitudes: DVector<Complex64>,
}

impl FockVector {
    pub fn new(amplitudes: DVector<Complex64>) -> Result<Self> {
        check_dimension(amplitudes.len())?;
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidState("non-finite amplitude".into()));
        }
        Ok(Self { amplitudes })
    }

    /// Number state `|n>`.
    pub fn number(n: usize, dimension: usize) -> Result<Self> {
        check_dimension(dimension)?;
        if n >= dimension {
            return Err(Error::InvalidArgument(format!(
                "Fock index {n} outside truncation {dimension}"
            )));
        }
        let mut v = DVector::zeros(dimension);
        v[n] = ONE;
        Ok(Self { amplitudes: v })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &FockVector) -> Complex64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// `|self><other|`.
    pub fn outer(&self, other: &FockVector) -> FockOperator {
        FockOperator {
            matrix: &self.amplitudes * other.amplitudes.adjoint(),
        }
    }

    pub fn projector(&self) -> FockOperator {
        self.outer(self)
    }
}

/// Square operator on the truncated motional space.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    matrix: CMatrix,
}

impl FockOperator {
    pub fn from_matrix(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                actual: matrix.ncols(),
            });
        }
        check_dimension(matrix.nrows())?;
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidState("non-finite operator entry".into()));
        }
        Ok(Self { matrix })
    }

    pub(crate) fn from_matrix_unchecked(matrix: CMatrix) -> Self {
        debug_assert_eq!(matrix.nrows(), matrix.ncols());
        Self { matrix }
    }

    pub fn zeros(dimension: usize) -> Result<Self> {
        check_dimension(dimension)?;
        Ok(Self {
            matrix: CMatrix::zeros(dimension, dimension),
        })
    }

    pub fn identity(dimension: usize) -> Result<Self> {
        check_dimension(dimension)?;
        Ok(Self {
            matrix: CMatrix::identity(dimension, dimension),
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[(row, col)]
    }

    pub fn adjoint(&self) -> FockOperator {
        Self {
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        linalg::trace(&self.matrix)
    }

    pub fn scale(&self, factor: Complex64) -> FockOperator {
        Self {
            matrix: &self.matrix * factor,
        }
    }

    pub fn apply(&self, v: &FockVector) -> Result<FockVector> {
        if v.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: v.dim(),
            });
        }
        Ok(FockVector {
            amplitudes: &self.matrix * &v.amplitudes,
        })
    }

    pub fn mul(&self, other: &FockOperator) -> FockOperator {
        Self {
            matrix: &self.matrix * &other.matrix,
        }
    }

    pub fn add(&self, other: &FockOperator) -> FockOperator {
        Self {
            matrix: &self.matrix + &other.matrix,
        }
    }

    pub fn max_abs_diff(&self, other: &FockOperator) -> f64 {
        linalg::max_abs_diff(&self.matrix, &other.matrix)
    }

    pub fn hermiticity_residual(&self) -> f64 {
        linalg::hermiticity_residual(&self.matrix)
    }

    pub fn unitarity_residual(&self) -> f64 {
        linalg::unitarity_residual(&self.matrix)
    }

    /// Zero-padded copy on a larger truncation.
    pub fn embed(&self, dimension: usize) -> Result<FockOperator> {
        if dimension < self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: dimension,
            });
        }
        let mut m = CMatrix::zeros(dimension, dimension);
        m.view_mut((0, 0), (self.dim(), self.dim())).copy_from(&self.matrix);
        Ok(Self { matrix: m })
    }

    /// Checks that the operator is a density matrix: hermitian, unit trace,
    /// and positive semidefinite to `tol`.
    pub fn validate_density(&self, tol: f64) -> Result<()> {
        let herm = self.hermiticity_residual();
        if herm > tol {
            return Err(Error::InvalidState(format!(
                "density not hermitian (residual {herm:.3e})"
            )));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(Error::InvalidState(format!("density trace {tr} != 1")));
        }
        let min = linalg::hermitian_eigenvalues(&self.matrix)[0];
        if min < -tol {
            return Err(Error::InvalidState(format!(
                "density has negative eigenvalue {min:.3e}"
            )));
        }
        Ok(())
    }
}

/// Lowering operator: `<n-1| a |n> = sqrt(n)`.
pub fn annihilation(dimension: usize) -> Result<FockOperator> {
    check_dimension(dimension)?;
    let mut m = CMatrix::zeros(dimension, dimension);
    for n in 1..dimension {
        m[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    Ok(FockOperator { matrix: m })
}

/// `a^dagger a = diag(0, 1, ..., N_max - 1)`.
pub fn number_operator(dimension: usize) -> Result<FockOperator> {
    check_dimension(dimension)?;
    let diag = DVector::from_fn(dimension, |n, _| Complex64::new(n as f64, 0.0));
    Ok(FockOperator {
        matrix: CMatrix::from_diagonal(&diag),
    })
}

/// `(-1)^{a^dagger a}`.
pub fn parity_operator(dimension: usize) -> Result<FockOperator> {
    check_dimension(dimension)?;
    let diag = DVector::from_fn(dimension, |n, _| parity_sign(n));
    Ok(FockOperator {
        matrix: CMatrix::from_diagonal(&diag),
    })
}

#[inline]
pub(crate) fn parity_sign(n: usize) -> Complex64 {
    if n % 2 == 0 {
        ONE
    } else {
        -ONE
    }
}

/// Coherent state `|gamma>` with amplitudes `e^{-|gamma|^2/2} gamma^n / sqrt(n!)`.
pub fn coherent_state(gamma: Complex64, dimension: usize) -> Result<FockVector> {
    check_dimension(dimension)?;
    check_guard(gamma.norm(), dimension)?;
    let mut v = DVector::zeros(dimension);
    v[0] = Complex64::new((-0.5 * gamma.norm_sqr()).exp(), 0.0);
    for n in 1..dimension {
        v[n] = v[n - 1] * gamma / (n as f64).sqrt();
    }
    Ok(FockVector { amplitudes: v })
}

/// Displacement `D(alpha) = exp(alpha a^dagger - alpha^* a)` of the truncated
/// generator. Exactly unitary up to rounding regardless of truncation.
pub fn displacement_operator(alpha: PhaseSpacePoint, dimension: usize) -> Result<FockOperator> {
    check_dimension(dimension)?;
    check_guard(alpha.magnitude(), dimension)?;
    Ok(FockOperator {
        matrix: linalg::expm(&displacement_generator(alpha.alpha(), dimension)),
    })
}

fn displacement_generator(alpha: Complex64, dimension: usize) -> CMatrix {
    let mut g = CMatrix::zeros(dimension, dimension);
    for n in 1..dimension {
        let s = (n as f64).sqrt();
        // alpha a^dagger: <n|.|n-1> ; -alpha^* a: <n-1|.|n>
        g[(n, n - 1)] = alpha * s;
        g[(n - 1, n)] = -alpha.conj() * s;
    }
    g
}

/// Displaced parity `D(alpha) (-1)^{a^dagger a} D^dagger(alpha)`, the Wigner
/// kernel without its `2/pi` prefactor.
pub fn displaced_parity(alpha: PhaseSpacePoint, dimension: usize) -> Result<FockOperator> {
    let d = displacement_operator(alpha, dimension)?;
    Ok(FockOperator {
        matrix: displaced_parity_from(&d.matrix),
    })
}

pub(crate) fn displaced_parity_from(d: &CMatrix) -> CMatrix {
    let mut dp = d.clone();
    for (n, mut col) in dp.column_iter_mut().enumerate() {
        if n % 2 == 1 {
            col.neg_mut();
        }
    }
    dp * d.adjoint()
}

/// Matrix elements `<n| D(beta) |m>` for `n, m < dimension` of the untruncated
/// displacement, from
///
/// `<n|D|m> = sqrt(m!/n!) beta^{n-m} e^{-|beta|^2/2} L_m^{(n-m)}(|beta|^2)`, `n >= m`,
///
/// and `<m|D|n> = (-1)^{n-m} <n|D|m>^*` above the diagonal. No guard band
/// applies: the entries are those of the infinite-dimensional operator.
pub fn displacement_elements(beta: Complex64, dimension: usize) -> Result<CMatrix> {
    check_dimension(dimension)?;
    let x = beta.norm_sqr();
    let (ln_r, theta) = (beta.norm().ln(), beta.arg());
    let ln_fact: Vec<f64> = (0..dimension).map(special::ln_factorial).collect();
    let mut m = CMatrix::zeros(dimension, dimension);
    // diagonal offset k = row - col; L_col^{(k)} by the recurrence in col
    for k in 0..dimension {
        let kf = k as f64;
        let (mut prev, mut cur) = (0.0, 1.0);
        for col in 0..dimension - k {
            if col > 0 {
                let j = (col - 1) as f64;
                let next = ((2.0 * j + 1.0 + kf - x) * cur - (j + kf) * prev) / (j + 1.0);
                prev = cur;
                cur = next;
            }
            let row = col + k;
            let power = if k > 0 { kf * ln_r } else { 0.0 };
            let mag = (power - 0.5 * x + 0.5 * (ln_fact[col] - ln_fact[row])).exp();
            let v = Complex64::from_polar(cur * mag, kf * theta);
            m[(row, col)] = v;
            if k > 0 {
                m[(col, row)] = if k % 2 == 0 { v.conj() } else { -v.conj() };
            }
        }
    }
    Ok(m)
}

/// Displaced parity from [`displacement_elements`] via
/// `D(alpha)(-1)^n D^dagger(alpha) = D(2 alpha)(-1)^n`; exact entries at any
/// amplitude.
pub fn displaced_parity_elements(alpha: PhaseSpacePoint, dimension: usize) -> Result<FockOperator> {
    let mut m = displacement_elements(alpha.alpha() * 2.0, dimension)?;
    for (n, mut col) in m.column_iter_mut().enumerate() {
        if n % 2 == 1 {
            col.neg_mut();
        }
    }
    Ok(FockOperator { matrix: m })
}
