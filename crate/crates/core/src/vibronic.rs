//! Composite motional ⊗ two-level electronic states.
//!
//! A [`VibronicDensity`] is stored as its four electronic blocks
//! `rho_ij = <i| rho |j>`, each an operator on the truncated motional space.
//! Levels are `|1>` (lower, fluorescing on the probe transition) and `|2>`
//! (upper level of the weak transition).

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, FockOperator, FockVector, PhaseSpacePoint};
use crate::linalg::{self, CMatrix, ZERO};

/// Tolerance used when validating constructed states.
pub const STATE_TOLERANCE: f64 = 1e-10;

/// Electronic level of the weak transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Level {
    /// `|1>`: probe fluoresces.
    One,
    /// `|2>`: probe stays dark.
    Two,
}

impl Level {
    pub const BOTH: [Level; 2] = [Level::One, Level::Two];

    pub fn index(self) -> usize {
        match self {
            Level::One => 0,
            Level::Two => 1,
        }
    }
}

pub type Block2 = [[Complex64; 2]; 2];

/// Reduced electronic density `sigma_ij`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElectronicDensity {
    sigma: Block2,
}

impl ElectronicDensity {
    pub fn new(sigma: Block2) -> Result<Self> {
        let tol = 1e-12;
        let herm = (sigma[0][1] - sigma[1][0].conj()).norm();
        if herm > tol || sigma[0][0].im.abs() > tol || sigma[1][1].im.abs() > tol {
            return Err(Error::InvalidState("electronic density not hermitian".into()));
        }
        let tr = sigma[0][0].re + sigma[1][1].re;
        if (tr - 1.0).abs() > tol {
            return Err(Error::InvalidState(format!("electronic trace {tr} != 1")));
        }
        let (lo, _) = eig2(&sigma);
        if lo < -tol {
            return Err(Error::InvalidState(format!(
                "electronic density has negative eigenvalue {lo:.3e}"
            )));
        }
        Ok(Self { sigma })
    }

    /// `|1><1|` weight `p1`, `|2><2|` weight `1 - p1`, no coherence.
    pub fn diagonal(p1: f64) -> Result<Self> {
        Self::new([
            [Complex64::new(p1, 0.0), ZERO],
            [ZERO, Complex64::new(1.0 - p1, 0.0)],
        ])
    }

    pub(crate) fn from_block_unchecked(sigma: Block2) -> Self {
        Self { sigma }
    }

    pub fn get(&self, i: Level, j: Level) -> Complex64 {
        self.sigma[i.index()][j.index()]
    }

    pub fn matrix(&self) -> &Block2 {
        &self.sigma
    }

    pub fn max_abs_diff(&self, other: &ElectronicDensity) -> f64 {
        max_abs_diff2(&self.sigma, &other.sigma)
    }
}

pub(crate) fn max_abs_diff2(a: &Block2, b: &Block2) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            m = m.max((a[i][j] - b[i][j]).norm());
        }
    }
    m
}

/// Eigenvalues of the hermitian part of a 2x2 block, ascending.
pub(crate) fn eig2(m: &Block2) -> (f64, f64) {
    let a = m[0][0].re;
    let d = m[1][1].re;
    let b = 0.5 * (m[0][1] + m[1][0].conj());
    let mean = 0.5 * (a + d);
    let r = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    (mean - r, mean + r)
}

/// Amplitude of the entangled cat `(|beta>|2> - |-beta>|1>)/sqrt(2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CatStateSpec {
    pub beta: Complex64,
}

/// Density operator of the composite system.
#[derive(Debug, Clone, PartialEq)]
pub struct VibronicDensity {
    blocks: [[FockOperator; 2]; 2],
    normalised: bool,
}

impl VibronicDensity {
    /// Builds a state from its blocks and checks hermiticity, unit trace and
    /// positivity.
    pub fn from_blocks(blocks: [[FockOperator; 2]; 2]) -> Result<Self> {
        let s = Self::from_blocks_unnormalised(blocks)?;
        let tr = s.trace();
        if (tr - 1.0).abs() > STATE_TOLERANCE {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        s.check_positive()?;
        Ok(Self {
            normalised: true,
            ..s
        })
    }

    /// Conditioned (sub-normalised) operator: trace may be below one.
    pub fn from_blocks_unnormalised(blocks: [[FockOperator; 2]; 2]) -> Result<Self> {
        let n = blocks[0][0].dim();
        for row in &blocks {
            for b in row {
                if b.dim() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        actual: b.dim(),
                    });
                }
            }
        }
        let herm = blocks[0][0]
            .hermiticity_residual()
            .max(blocks[1][1].hermiticity_residual())
            .max(blocks[0][1].max_abs_diff(&blocks[1][0].adjoint()));
        if herm > 1e-12 {
            return Err(Error::InvalidState(format!(
                "blocks violate rho_ij = rho_ji^dagger (residual {herm:.3e})"
            )));
        }
        let s = Self {
            blocks,
            normalised: false,
        };
        let tr = s.trace();
        if tr > 1.0 + STATE_TOLERANCE || tr < -STATE_TOLERANCE {
            return Err(Error::InvalidState(format!("trace {tr} outside [0, 1]")));
        }
        Ok(s)
    }

    /// From a `2N x 2N` matrix ordered `(level, n) -> level * N + n`.
    pub fn from_full_matrix(m: &CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "composite matrix must be square with even size, got {:?}",
                m.shape()
            )));
        }
        let n = m.nrows() / 2;
        fock::check_dimension(n)?;
        let block = |i: usize, j: usize| {
            FockOperator::from_matrix_unchecked(m.view((i * n, j * n), (n, n)).into_owned())
        };
        Self::from_blocks([[block(0, 0), block(0, 1)], [block(1, 0), block(1, 1)]])
    }

    pub(crate) fn from_blocks_trusted(blocks: [[FockOperator; 2]; 2], normalised: bool) -> Self {
        Self { blocks, normalised }
    }

    /// Random mixed state of the given rank from a uniform Ginibre-like draw.
    pub fn random_mixed<R: Rng + ?Sized>(dimension: usize, rank: usize, rng: &mut R) -> Result<Self> {
        fock::check_dimension(dimension)?;
        let total = 2 * dimension;
        let rank = rank.clamp(1, total);
        let g = CMatrix::from_fn(total, rank, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let mut rho = &g * g.adjoint();
        let tr = linalg::trace(&rho).re;
        rho /= Complex64::new(tr, 0.0);
        // exact hermiticity
        let rho = (&rho + rho.adjoint()).scale(0.5);
        Self::from_full_matrix(&rho)
    }

    pub fn dim(&self) -> usize {
        self.blocks[0][0].dim()
    }

    /// Same state on a larger truncation, zero-padded.
    pub fn embed(&self, dimension: usize) -> Result<Self> {
        let mut out = Vec::with_capacity(4);
        for row in &self.blocks {
            for b in row {
                out.push(b.embed(dimension)?);
            }
        }
        let mut it = out.into_iter();
        let mut next = || it.next().expect("four blocks");
        let blocks = [[next(), next()], [next(), next()]];
        Ok(Self::from_blocks_trusted(blocks, self.normalised))
    }

    pub fn is_normalised(&self) -> bool {
        self.normalised
    }

    pub fn block(&self, i: Level, j: Level) -> &FockOperator {
        &self.blocks[i.index()][j.index()]
    }

    pub fn blocks(&self) -> &[[FockOperator; 2]; 2] {
        &self.blocks
    }

    pub fn trace(&self) -> f64 {
        self.blocks[0][0].trace().re + self.blocks[1][1].trace().re
    }

    pub fn to_full_matrix(&self) -> CMatrix {
        let n = self.dim();
        let mut m = CMatrix::zeros(2 * n, 2 * n);
        for i in 0..2 {
            for j in 0..2 {
                m.view_mut((i * n, j * n), (n, n))
                    .copy_from(self.blocks[i][j].matrix());
            }
        }
        m
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::hermitian_eigenvalues(&self.to_full_matrix())[0]
    }

    fn check_positive(&self) -> Result<()> {
        let min = self.min_eigenvalue();
        if min < -STATE_TOLERANCE {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min:.3e}"
            )));
        }
        Ok(())
    }

    /// `Tr[rho^2]`.
    pub fn purity(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                acc += linalg::trace_product(self.blocks[i][j].matrix(), self.blocks[j][i].matrix()).re;
            }
        }
        acc
    }

    /// Explicit renormalisation of a conditioned operator.
    pub fn normalize(&self) -> Result<Self> {
        let tr = self.trace();
        if tr <= 0.0 {
            return Err(Error::InvalidState("cannot normalise a zero-trace operator".into()));
        }
        let f = Complex64::new(1.0 / tr, 0.0);
        let blocks = self.blocks.clone().map(|row| row.map(|b| b.scale(f)));
        Ok(Self {
            blocks,
            normalised: true,
        })
    }

    /// `sqrt(<n>)` of the motional marginal; the amplitude the state occupies
    /// in phase space, used for guard-band checks.
    pub fn support_radius(&self) -> f64 {
        let tr = self.trace();
        if tr <= 0.0 {
            return 0.0;
        }
        let mean: f64 = (0..self.dim())
            .map(|n| n as f64 * (self.blocks[0][0].get(n, n).re + self.blocks[1][1].get(n, n).re))
            .sum();
        (mean / tr).max(0.0).sqrt()
    }

    pub fn max_abs_diff(&self, other: &VibronicDensity) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                m = m.max(self.blocks[i][j].max_abs_diff(&other.blocks[i][j]));
            }
        }
        m
    }

    /// Guard check for displacing this state by `alpha`. No displacement is
    /// always exact.
    pub fn check_displacement(&self, alpha: PhaseSpacePoint) -> Result<()> {
        if alpha.magnitude() == 0.0 {
            return Ok(());
        }
        fock::check_guard(self.support_radius() + alpha.magnitude(), self.dim())
    }
}

/// `(|beta>|2> - |-beta>|1>)/sqrt(2)` as a density operator.
pub fn make_cat_state(spec: CatStateSpec, dimension: usize) -> Result<VibronicDensity> {
    let plus = fock::coherent_state(spec.beta, dimension)?;
    let minus = fock::coherent_state(-spec.beta, dimension)?;
    let half = Complex64::new(0.5, 0.0);
    let rho22 = plus.outer(&plus).scale(half);
    let rho11 = minus.outer(&minus).scale(half);
    let rho21 = plus.outer(&minus).scale(-half);
    let rho12 = rho21.adjoint();
    let state = VibronicDensity::from_blocks_trusted([[rho11, rho12], [rho21, rho22]], true);
    let tr = state.trace();
    if (tr - 1.0).abs() > STATE_TOLERANCE {
        return Err(Error::TruncationUnsafe {
            amplitude: spec.beta.norm(),
            dimension,
            required: fock::guard_dimension(spec.beta.norm()),
        });
    }
    Ok(state)
}

/// Uncorrelated state `rho ⊗ sigma`.
pub fn make_product_state(rho: &FockOperator, sigma: &ElectronicDensity) -> Result<VibronicDensity> {
    rho.validate_density(STATE_TOLERANCE)?;
    let blocks = [
        [rho.scale(sigma.sigma[0][0]), rho.scale(sigma.sigma[0][1])],
        [rho.scale(sigma.sigma[1][0]), rho.scale(sigma.sigma[1][1])],
    ];
    Ok(VibronicDensity::from_blocks_trusted(blocks, true))
}

/// Pure state `|psi_1>|1> + |psi_2>|2>` (amplitudes in the product basis).
pub fn make_pure_state(level1: &FockVector, level2: &FockVector) -> Result<VibronicDensity> {
    if level1.dim() != level2.dim() {
        return Err(Error::DimensionMismatch {
            expected: level1.dim(),
            actual: level2.dim(),
        });
    }
    let norm = level1.norm_squared() + level2.norm_squared();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidState(format!("pure state norm {norm} != 1")));
    }
    let v = [level1, level2];
    let blocks = [
        [v[0].outer(v[0]), v[0].outer(v[1])],
        [v[1].outer(v[0]), v[1].outer(v[1])],
    ];
    Ok(VibronicDensity::from_blocks_trusted(blocks, true))
}

/// Motional marginal `rho_11 + rho_22`.
pub fn reduce_motional(state: &VibronicDensity) -> FockOperator {
    state.blocks[0][0].add(&state.blocks[1][1])
}

/// Electronic marginal `sigma_ij = Tr rho_ij`.
pub fn reduce_electronic(state: &VibronicDensity) -> ElectronicDensity {
    let t = |i: usize, j: usize| state.blocks[i][j].trace();
    let mut sigma = [[t(0, 0), t(0, 1)], [t(1, 0), t(1, 1)]];
    sigma[0][0].im = 0.0;
    sigma[1][1].im = 0.0;
    ElectronicDensity::from_block_unchecked(sigma)
}

pub(crate) fn check_unit_superposition(psi: &[Complex64; 2]) -> Result<()> {
    let n = psi[0].norm_sqr() + psi[1].norm_sqr();
    if (n - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "electronic superposition has squared norm {n}, expected 1"
        )));
    }
    Ok(())
}

/// Unnormalised motional operator after finding the electron in
/// `sum_i psi_i |i>`: `sum_ij psi_i^* psi_j rho_ij`. Its trace is the
/// detection probability.
pub fn condition_on_superposition(state: &VibronicDensity, psi: [Complex64; 2]) -> Result<FockOperator> {
    check_unit_superposition(&psi)?;
    let n = state.dim();
    let mut acc = CMatrix::zeros(n, n);
    for i in 0..2 {
        for j in 0..2 {
            let w = psi[i].conj() * psi[j];
            if w != ZERO {
                acc += state.blocks[i][j].matrix() * w;
            }
        }
    }
    Ok(FockOperator::from_matrix_unchecked(acc))
}

/// `D^dagger(alpha) rho D(alpha)`, blockwise on the motional factor.
pub fn displace_state(state: &VibronicDensity, alpha: PhaseSpacePoint) -> Result<VibronicDensity> {
    state.check_displacement(alpha)?;
    let d = fock::displacement_operator(alpha, state.dim())?;
    let dm = d.matrix();
    let dh = dm.adjoint();
    let blocks = state
        .blocks
        .clone()
        .map(|row| row.map(|b| FockOperator::from_matrix_unchecked(&dh * b.matrix() * dm)));
    Ok(VibronicDensity::from_blocks_trusted(blocks, state.normalised))
}

/// Motional-diagonal elements `rho_ij^{nn}(alpha)` of the displaced state.
#[derive(Debug, Clone, PartialEq)]
pub struct NumberStatisticsMatrix {
    pub alpha: PhaseSpacePoint,
    values: Vec<Block2>,
}

impl NumberStatisticsMatrix {
    pub fn new(alpha: PhaseSpacePoint, values: Vec<Block2>) -> Self {
        Self { alpha, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Block2] {
        &self.values
    }

    pub fn get(&self, n: usize, i: Level, j: Level) -> Complex64 {
        self.values[n][i.index()][j.index()]
    }

    /// Total occupation of Fock state `n` (both levels).
    pub fn occupation(&self, n: usize) -> f64 {
        self.values[n][0][0].re + self.values[n][1][1].re
    }

    /// `sum_n (rho_11^{nn} + rho_22^{nn})`.
    pub fn total_mass(&self) -> f64 {
        (0..self.len()).map(|n| self.occupation(n)).sum()
    }

    /// Smallest count `N` such that the occupation of `n >= N` sums below
    /// `tail`.
    pub fn cutoff(&self, tail: f64) -> usize {
        let mut remaining: f64 = self.total_mass();
        for n in 0..self.len() {
            if remaining < tail {
                return n.max(1);
            }
            remaining -= self.occupation(n);
        }
        self.len()
    }

    pub fn truncated(&self, n_stat: usize) -> Self {
        Self {
            alpha: self.alpha,
            values: self.values[..n_stat.min(self.len())].to_vec(),
        }
    }
}

/// `rho_ij^{nn}(alpha) = <n| D^dagger(alpha) rho_ij D(alpha) |n>` for
/// `n < n_stat`.
pub fn displaced_number_statistics(
    state: &VibronicDensity,
    alpha: PhaseSpacePoint,
    n_stat: usize,
) -> Result<NumberStatisticsMatrix> {
    let dim = state.dim();
    if n_stat > dim {
        return Err(Error::InvalidArgument(format!(
            "N_stat = {n_stat} exceeds truncation {dim}"
        )));
    }
    state.check_displacement(alpha)?;
    let d = fock::displacement_operator(alpha, dim)?;
    Ok(statistics_with_displacement(state, alpha, d.matrix(), n_stat))
}

/// Same as [`displaced_number_statistics`] with a precomputed `D(alpha)`.
pub(crate) fn statistics_with_displacement(
    state: &VibronicDensity,
    alpha: PhaseSpacePoint,
    d: &CMatrix,
    n_stat: usize,
) -> NumberStatisticsMatrix {
    let dim = state.dim();
    let diag = |b: &FockOperator| -> DVector<Complex64> {
        let x = b.matrix() * d;
        DVector::from_fn(n_stat, |n, _| {
            let mut acc = ZERO;
            for k in 0..dim {
                acc += d[(k, n)].conj() * x[(k, n)];
            }
            acc
        })
    };
    let d11 = diag(&state.blocks[0][0]);
    let d22 = diag(&state.blocks[1][1]);
    let d12 = diag(&state.blocks[0][1]);
    let values = (0..n_stat)
        .map(|n| {
            [
                [Complex64::new(d11[n].re, 0.0), d12[n]],
                [d12[n].conj(), Complex64::new(d22[n].re, 0.0)],
            ]
        })
        .collect();
    NumberStatisticsMatrix { alpha, values }
}

/// Pure electronic superposition helper, `(a, b)` normalised.
pub fn superposition(a: Complex64, b: Complex64) -> Result<[Complex64; 2]> {
    let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
    if n == 0.0 {
        return Err(Error::InvalidArgument("zero superposition".into()));
    }
    Ok([a / n, b / n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cat(beta: f64, dim: usize) -> VibronicDensity {
        make_cat_state(CatStateSpec { beta: c(beta, 0.0) }, dim).unwrap()
    }

    fn vacuum_product(p1: f64, dim: usize) -> VibronicDensity {
        let rho = FockVector::number(0, dim).unwrap().projector();
        make_product_state(&rho, &ElectronicDensity::diagonal(p1).unwrap()).unwrap()
    }

    #[test]
    fn degenerate_cat_is_vacuum_superposition() {
        let s = cat(0.0, 16);
        assert!((s.block(Level::Two, Level::Two).trace().re - 0.5).abs() < 1e-15);
        assert!((s.block(Level::One, Level::One).get(0, 0).re - 0.5).abs() < 1e-15);
        assert!((s.block(Level::Two, Level::One).get(0, 0).re + 0.5).abs() < 1e-15);
        assert!((s.purity() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn cat_coherence_trace_is_overlap() {
        let s = cat(2.0, 64);
        let t = s.block(Level::Two, Level::One).trace();
        assert!((t.re + 0.5 * (-8.0f64).exp()).abs() < 1e-14);
        assert!((s.purity() - 1.0).abs() < 1e-10);
        assert!(s.min_eigenvalue() > -1e-10);
        let sigma = reduce_electronic(&s);
        assert!((sigma.get(Level::One, Level::One).re - 0.5).abs() < 1e-12);
        assert!((sigma.get(Level::Two, Level::Two).re - 0.5).abs() < 1e-12);
        assert!((sigma.get(Level::Two, Level::One).re + 0.5 * (-8.0f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn cat_motional_marginal_is_incoherent_mixture() {
        let s = cat(2.0, 64);
        let plus = fock::coherent_state(c(2.0, 0.0), 64).unwrap().projector();
        let minus = fock::coherent_state(c(-2.0, 0.0), 64).unwrap().projector();
        let expected = plus.add(&minus).scale(c(0.5, 0.0));
        assert!(reduce_motional(&s).max_abs_diff(&expected) < 1e-14);
        assert!((reduce_motional(&s).trace().re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn product_state_marginals() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mixed = VibronicDensity::random_mixed(6, 3, &mut rng).unwrap();
        let rho = reduce_motional(&mixed);
        let sigma = ElectronicDensity::new([[c(0.3, 0.0), c(0.1, 0.2)], [c(0.1, -0.2), c(0.7, 0.0)]]).unwrap();
        let p = make_product_state(&rho, &sigma).unwrap();
        assert!(reduce_electronic(&p).max_abs_diff(&sigma) < 1e-12);
        assert!(reduce_motional(&p).max_abs_diff(&rho) < 1e-12);

        let only11 = vacuum_product(1.0, 8);
        assert!(only11.block(Level::Two, Level::Two).matrix().iter().all(|z| *z == ZERO));
        assert!(only11.block(Level::One, Level::Two).matrix().iter().all(|z| *z == ZERO));
        assert_eq!(only11.block(Level::One, Level::One).get(0, 0), ONE);
    }

    #[test]
    fn product_state_rejects_invalid_marginal() {
        let rho = FockVector::number(0, 4).unwrap().projector().scale(c(2.0, 0.0));
        let sigma = ElectronicDensity::diagonal(0.5).unwrap();
        assert!(matches!(make_product_state(&rho, &sigma), Err(Error::InvalidState(_))));
        assert!(ElectronicDensity::diagonal(1.5).is_err());
    }

    #[test]
    fn conditioning_reads_blocks() {
        let s = cat(2.0, 64);
        let r1 = condition_on_superposition(&s, [ONE, ZERO]).unwrap();
        assert_eq!(r1, s.block(Level::One, Level::One).clone());
        let r2 = condition_on_superposition(&s, [ZERO, ONE]).unwrap();
        let half_plus = fock::coherent_state(c(2.0, 0.0), 64).unwrap().projector().scale(c(0.5, 0.0));
        assert!(r2.max_abs_diff(&half_plus) < 1e-15);
        assert!(matches!(
            condition_on_superposition(&s, [ONE, ONE]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn conditioning_probability_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = VibronicDensity::random_mixed(8, 4, &mut rng).unwrap();
        for _ in 0..100 {
            let psi = superposition(
                c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            )
            .unwrap();
            let p = condition_on_superposition(&s, psi).unwrap().trace();
            assert!(p.re >= -1e-12 && p.re <= 1.0 + 1e-12 && p.im.abs() < 1e-12);
        }
    }

    #[test]
    fn displacement_of_states() {
        let s = cat(1.0, 64);
        assert!(displace_state(&s, PhaseSpacePoint::ORIGIN).unwrap().max_abs_diff(&s) < 1e-14);

        let a = PhaseSpacePoint::new(0.7, -1.2);
        let v = vacuum_product(0.4, 64);
        let dv = displace_state(&v, a).unwrap();
        let motional = reduce_motional(&dv);
        let expected = fock::coherent_state(-a.alpha(), 64).unwrap().projector();
        assert!(motional.max_abs_diff(&expected) < 1e-10);
        assert!((dv.trace() - 1.0).abs() < 1e-10);

        let back = displace_state(&dv, PhaseSpacePoint(-a.alpha())).unwrap();
        assert!(back.max_abs_diff(&v) < 1e-10);
    }

    #[test]
    fn combined_guard_band() {
        let s = cat(2.0, 64);
        // 2 + 3 = 5 fits 64 exactly; 2 + 4 does not
        assert!(displace_state(&s, PhaseSpacePoint::new(3.0, 0.0)).is_ok());
        assert!(matches!(
            displaced_number_statistics(&s, PhaseSpacePoint::new(4.0, 0.0), 10),
            Err(Error::TruncationUnsafe { required: 81, .. })
        ));
    }

    #[test]
    fn vacuum_statistics_follow_sigma() {
        let v = vacuum_product(0.3, 16);
        let st = displaced_number_statistics(&v, PhaseSpacePoint::ORIGIN, 8).unwrap();
        assert!((st.get(0, Level::One, Level::One).re - 0.3).abs() < 1e-15);
        assert!((st.get(0, Level::Two, Level::Two).re - 0.7).abs() < 1e-15);
        for n in 1..8 {
            assert!(st.occupation(n).abs() < 1e-15);
        }
    }

    #[test]
    fn cat_statistics_are_poisson() {
        let s = cat(2.0, 64);
        let st = displaced_number_statistics(&s, PhaseSpacePoint::ORIGIN, 40).unwrap();
        let mut p = 0.5 * (-4.0f64).exp();
        for n in 0..40 {
            if n > 0 {
                p *= 4.0 / n as f64;
            }
            assert!((st.get(n, Level::Two, Level::Two).re - p).abs() < 1e-14);
            assert!((st.get(n, Level::One, Level::One).re - p).abs() < 1e-14);
        }
    }

    #[test]
    fn statistics_match_displaced_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = VibronicDensity::random_mixed(6, 5, &mut rng).unwrap().embed(40).unwrap();
        let a = PhaseSpacePoint::new(-0.4, 0.9);
        let st = displaced_number_statistics(&s, a, 40).unwrap();
        let ds = displace_state(&s, a).unwrap();
        for n in 0..40 {
            for i in Level::BOTH {
                for j in Level::BOTH {
                    let diff = st.get(n, i, j) - ds.block(i, j).get(n, n);
                    assert!(diff.norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn statistics_cutoff_rule() {
        let s = cat(2.0, 64);
        let st = displaced_number_statistics(&s, PhaseSpacePoint::ORIGIN, 64).unwrap();
        let n = st.cutoff(1e-6);
        let tail: f64 = (n..64).map(|k| st.occupation(k)).sum();
        let tail_before: f64 = (n - 1..64).map(|k| st.occupation(k)).sum();
        assert!(tail < 1e-6);
        assert!(tail_before >= 1e-6);
    }

    #[test]
    fn unnormalised_and_normalise() {
        let s = cat(1.0, 32);
        let cond = VibronicDensity::from_blocks_unnormalised([
            [s.block(Level::One, Level::One).scale(c(0.5, 0.0)), FockOperator::zeros(32).unwrap()],
            [FockOperator::zeros(32).unwrap(), FockOperator::zeros(32).unwrap()],
        ])
        .unwrap();
        assert!(!cond.is_normalised());
        assert!((cond.trace() - 0.25).abs() < 1e-12);
        let n = cond.normalize().unwrap();
        assert!(n.is_normalised());
        assert!((n.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_matrix_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = VibronicDensity::random_mixed(5, 10, &mut rng).unwrap();
        let back = VibronicDensity::from_full_matrix(&s.to_full_matrix()).unwrap();
        assert_eq!(back, s);
    }
}
