//! Stochastic emulation of interaction/probe sequences.
//!
//! Probes are ideal projective measurements: fluorescence projects onto
//! `|1>` and ends the trial (the atom is discarded), no fluorescence
//! projects onto `|2>`. Each trial re-prepares the displaced state.
//!
//! Every `(grid point, m, setting)` task draws from its own ChaCha8 stream
//! seeded by [`stream_seed`], so results do not depend on scheduling or
//! thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{two_level_propagator, DriveConfig, RabiSpectrum};
use crate::error::{Error, Result};
use crate::fock::PhaseSpacePoint;
use crate::tomography::{
    assemble_wigner, invert_with_errors, success_from_statistics, CycleSchedule, EstimationRecord, Setting,
    TomographyPlan,
};
use crate::vibronic::{self, NumberStatisticsMatrix, VibronicDensity};
use crate::wigner::{Grid, WignerMatrixField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// One Bernoulli draw per trial with the exact sequence probability.
    FastAnalytic,
    /// Cycle-by-cycle simulation of the conditioned state.
    Trajectory,
    /// Infinite-trial limit: exact probabilities, zero standard error.
    Exact,
}

/// How `trials` is spread over the four settings of one Fock state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialAllocation {
    /// `trials` for each setting.
    PerVariant,
    /// `trials / 4` for each setting (at least one).
    PerElement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub trials: u64,
    pub master_seed: u64,
    pub mode: SamplingMode,
    pub parallel: bool,
    pub allocation: TrialAllocation,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            trials: 1000,
            master_seed: 0,
            mode: SamplingMode::FastAnalytic,
            parallel: true,
            allocation: TrialAllocation::PerVariant,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        Ok(())
    }

    pub fn trials_per_setting(&self) -> u64 {
        match self.allocation {
            TrialAllocation::PerVariant => self.trials,
            TrialAllocation::PerElement => (self.trials / 4).max(1),
        }
    }
}

/// Result of one trial. `failure_cycle` is the 1-based cycle of the first
/// fluorescence, present iff `success` is false.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    pub success: bool,
    pub failure_cycle: Option<usize>,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the task at `coords`:
/// `h_0 = mix64(master + G)`, `h_{i+1} = mix64(h_i ^ mix64(c_i + (i+1) G))`
/// with `G = 0x9E3779B97F4A7C15` and wrapping arithmetic.
pub fn stream_seed(master_seed: u64, coords: &[u64]) -> u64 {
    let mut h = mix64(master_seed.wrapping_add(GOLDEN));
    for (i, &c) in coords.iter().enumerate() {
        h = mix64(h ^ mix64(c.wrapping_add((i as u64 + 1).wrapping_mul(GOLDEN))));
    }
    h
}

pub fn stream_rng(master_seed: u64, coords: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master_seed, coords))
}

/// Sequence of one setting applied to a fixed displaced state.
///
/// The state conditioned on `q` dark probes is the same for every trial, so
/// the dark probability of each cycle given the previous ones is computed
/// once by propagating the per-Fock 2x2 blocks.
#[derive(Debug, Clone)]
pub struct TrialSimulator {
    conditional: Vec<f64>,
    exact: f64,
}

impl TrialSimulator {
    pub fn new(stats: &NumberStatisticsMatrix, drive: &DriveConfig, schedule: &CycleSchedule) -> Self {
        let d = schedule.drive_for(drive);
        let spectrum = RabiSpectrum::new(&d, stats.len());
        let mut weights: Vec<f64> = stats
            .values()
            .iter()
            .zip(&spectrum.omega)
            .map(|(b, &om)| {
                let u = two_level_propagator(om, d.phase, schedule.tau1);
                // <2| U B U^dagger |2>
                let mut acc = num_complex::Complex64::new(0.0, 0.0);
                for j in 0..2 {
                    for k in 0..2 {
                        acc += u[1][j] * b[j][k] * u[1][k].conj();
                    }
                }
                acc.re
            })
            .collect();
        let mut conditional = Vec::with_capacity(schedule.k());
        let mut exact = 1.0;
        let mut step = |weights: &mut Vec<f64>, cond: &mut Vec<f64>| {
            let p: f64 = weights.iter().sum();
            cond.push(p.clamp(0.0, 1.0));
            exact *= p;
            if p > 0.0 {
                weights.iter_mut().for_each(|w| *w /= p);
            }
        };
        step(&mut weights, &mut conditional);
        for &tau in &schedule.taus {
            for (w, &om) in weights.iter_mut().zip(&spectrum.omega) {
                *w *= two_level_propagator(om, d.phase, tau)[1][1].norm_sqr();
            }
            step(&mut weights, &mut conditional);
        }
        Self { conditional, exact }
    }

    /// Dark probability of each cycle given dark outcomes before it.
    pub fn conditional_probabilities(&self) -> &[f64] {
        &self.conditional
    }

    /// Product of the conditional probabilities.
    pub fn success_probability(&self) -> f64 {
        self.exact
    }

    pub fn run<R: Rng + ?Sized>(&self, rng: &mut R) -> TrialOutcome {
        for (q, &p) in self.conditional.iter().enumerate() {
            if rng.random::<f64>() >= p {
                return TrialOutcome {
                    success: false,
                    failure_cycle: Some(q + 1),
                };
            }
        }
        TrialOutcome {
            success: true,
            failure_cycle: None,
        }
    }
}

/// Single trajectory-mode trial from scratch.
pub fn run_trial<R: Rng + ?Sized>(
    state: &VibronicDensity,
    alpha: PhaseSpacePoint,
    drive: &DriveConfig,
    schedule: &CycleSchedule,
    rng: &mut R,
) -> Result<TrialOutcome> {
    let stats = vibronic::displaced_number_statistics(state, alpha, state.dim())?;
    Ok(TrialSimulator::new(&stats, drive, schedule).run(rng))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbabilityEstimate {
    pub p_hat: f64,
    pub stderr: f64,
    pub successes: u64,
    pub trials: u64,
}

impl ProbabilityEstimate {
    fn from_counts(successes: u64, trials: u64) -> Self {
        let p = successes as f64 / trials as f64;
        Self {
            p_hat: p,
            stderr: (p * (1.0 - p) / trials as f64).sqrt(),
            successes,
            trials,
        }
    }
}

/// Estimate for one setting from precomputed statistics.
pub fn estimate_from_statistics<R: Rng + ?Sized>(
    stats: &NumberStatisticsMatrix,
    drive: &DriveConfig,
    schedule: &CycleSchedule,
    mode: SamplingMode,
    trials: u64,
    rng: &mut R,
) -> ProbabilityEstimate {
    match mode {
        SamplingMode::Exact => ProbabilityEstimate {
            p_hat: success_from_statistics(stats, drive, schedule).total,
            stderr: 0.0,
            successes: 0,
            trials: 0,
        },
        SamplingMode::FastAnalytic => {
            let p = success_from_statistics(stats, drive, schedule).total.clamp(0.0, 1.0);
            let successes = (0..trials).filter(|_| rng.random::<f64>() < p).count() as u64;
            ProbabilityEstimate::from_counts(successes, trials)
        }
        SamplingMode::Trajectory => {
            let sim = TrialSimulator::new(stats, drive, schedule);
            let successes = (0..trials).filter(|_| sim.run(rng).success).count() as u64;
            ProbabilityEstimate::from_counts(successes, trials)
        }
    }
}

/// `(p_hat, stderr)` of the dark-sequence probability with `config.trials`
/// trials drawn from `rng`.
pub fn estimate_probability<R: Rng + ?Sized>(
    state: &VibronicDensity,
    alpha: PhaseSpacePoint,
    drive: &DriveConfig,
    schedule: &CycleSchedule,
    config: &SamplerConfig,
    rng: &mut R,
) -> Result<ProbabilityEstimate> {
    config.validate()?;
    let stats = vibronic::displaced_number_statistics(state, alpha, state.dim())?;
    Ok(estimate_from_statistics(&stats, drive, schedule, config.mode, config.trials, rng))
}

/// Records for `m < M` at one point. `point_index` is the first stream
/// coordinate.
pub fn sample_statistics(
    stats: &NumberStatisticsMatrix,
    plan: &TomographyPlan,
    config: &SamplerConfig,
    point_index: u64,
) -> Vec<EstimationRecord> {
    let trials = config.trials_per_setting();
    plan.schedules
        .iter()
        .map(|base| {
            let mut p = [0.0; 4];
            let mut se = [0.0; 4];
            for (s, setting) in Setting::ALL.iter().enumerate() {
                let schedule = base.with_setting(*setting);
                let mut rng = stream_rng(config.master_seed, &[point_index, base.target_m as u64, s as u64]);
                let est = estimate_from_statistics(stats, &plan.drive, &schedule, config.mode, trials, &mut rng);
                p[s] = est.p_hat;
                se[s] = est.stderr;
            }
            let (value, stderr) = invert_with_errors(p, se, base.rabi_m, plan.drive.phase);
            EstimationRecord {
                alpha: stats.alpha,
                m: base.target_m,
                value,
                stderr,
                trials: if config.mode == SamplingMode::Exact { 0 } else { trials },
                leakage_bound: base.leakage,
            }
        })
        .collect()
}

pub fn sample_point(
    state: &VibronicDensity,
    alpha: PhaseSpacePoint,
    plan: &TomographyPlan,
    config: &SamplerConfig,
    point_index: u64,
) -> Result<Vec<EstimationRecord>> {
    config.validate()?;
    let stats = vibronic::displaced_number_statistics(state, alpha, state.dim())?;
    Ok(sample_statistics(&stats, plan, config, point_index))
}

/// Sampled field with the per-point records it was assembled from.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    pub field: WignerMatrixField,
    pub records: Vec<Vec<EstimationRecord>>,
}

/// Samples every grid point; point `k` uses stream coordinates
/// `(k, m, setting)`.
pub fn sample_grid(
    state: &VibronicDensity,
    grid: &Grid,
    plan: &TomographyPlan,
    config: &SamplerConfig,
) -> Result<SampledField> {
    grid.validate()?;
    config.validate()?;
    let task = |k: usize| -> Result<(crate::wigner::WignerMatrixSample, Vec<EstimationRecord>)> {
        let records = sample_point(state, grid.point(k), plan, config, k as u64)?;
        Ok((assemble_wigner(&records, None)?, records))
    };
    let results: Vec<_> = if config.parallel {
        (0..grid.len()).into_par_iter().map(task).collect::<Result<_>>()?
    } else {
        (0..grid.len()).map(task).collect::<Result<_>>()?
    };
    let (samples, records) = results.into_iter().unzip();
    Ok(SampledField {
        field: WignerMatrixField::new(*grid, samples)?,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::FockVector;
    use crate::tomography::{build_schedule, exact_records, ScheduleOptions};
    use crate::vibronic::{make_cat_state, make_product_state, CatStateSpec, ElectronicDensity};
    use crate::Complex64;

    fn drive() -> DriveConfig {
        DriveConfig::new(1.0, 0.0, 0.1).unwrap()
    }

    fn vacuum_product(p1: f64) -> VibronicDensity {
        let rho = FockVector::number(0, 8).unwrap().projector();
        make_product_state(&rho, &ElectronicDensity::diagonal(p1).unwrap()).unwrap()
    }

    #[test]
    fn stream_seeds_separate_coordinates() {
        let a = stream_seed(7, &[0, 1, 2]);
        assert_eq!(a, stream_seed(7, &[0, 1, 2]));
        assert_ne!(a, stream_seed(7, &[0, 2, 1]));
        assert_ne!(a, stream_seed(8, &[0, 1, 2]));
        assert_ne!(a, stream_seed(7, &[1, 1, 2]));
        assert_eq!(mix64(0), 0);
    }

    #[test]
    fn certain_outcomes() {
        let d = drive();
        let schedule = build_schedule(&d, 0, 1, &ScheduleOptions::default()).unwrap();
        let mut rng = stream_rng(1, &[]);
        let dark = vacuum_product(0.0);
        let bright = vacuum_product(1.0);
        for _ in 0..200 {
            let t = run_trial(&dark, PhaseSpacePoint::ORIGIN, &d, &schedule, &mut rng).unwrap();
            assert_eq!(t, TrialOutcome { success: true, failure_cycle: None });
            let t = run_trial(&bright, PhaseSpacePoint::ORIGIN, &d, &schedule, &mut rng).unwrap();
            assert_eq!(t, TrialOutcome { success: false, failure_cycle: Some(1) });
        }
        let cfg = SamplerConfig { trials: 500, ..SamplerConfig::default() };
        for mode in [SamplingMode::FastAnalytic, SamplingMode::Trajectory] {
            let cfg = SamplerConfig { mode, ..cfg };
            let e = estimate_probability(&dark, PhaseSpacePoint::ORIGIN, &d, &schedule, &cfg, &mut rng).unwrap();
            assert_eq!((e.p_hat, e.stderr), (1.0, 0.0));
            let e = estimate_probability(&bright, PhaseSpacePoint::ORIGIN, &d, &schedule, &cfg, &mut rng).unwrap();
            assert_eq!((e.p_hat, e.stderr), (0.0, 0.0));
        }
    }

    #[test]
    fn half_probability_concentrates() {
        let d = drive();
        let schedule = build_schedule(&d, 0, 1, &ScheduleOptions::default()).unwrap();
        let state = vacuum_product(0.5);
        let cfg = SamplerConfig { trials: 1000, ..SamplerConfig::default() };
        let inside = (0..200u64)
            .filter(|&seed| {
                let mut rng = stream_rng(seed, &[]);
                let e = estimate_probability(&state, PhaseSpacePoint::ORIGIN, &d, &schedule, &cfg, &mut rng).unwrap();
                (0.45..=0.55).contains(&e.p_hat)
            })
            .count();
        assert!(inside >= 196, "{inside} of 200");
    }

    #[test]
    fn trajectory_chain_reproduces_exact_probability() {
        let state = make_cat_state(CatStateSpec { beta: Complex64::new(2.0, 0.0) }, 40).unwrap();
        let d = drive();
        let alpha = PhaseSpacePoint::new(-0.5, 0.7);
        let stats = vibronic::displaced_number_statistics(&state, alpha, 40).unwrap();
        let base = build_schedule(&d, 3, 30, &ScheduleOptions::default()).unwrap();
        for setting in Setting::ALL {
            let s = base.with_setting(setting);
            let sim = TrialSimulator::new(&stats, &d, &s);
            let exact = success_from_statistics(&stats, &d, &s).total;
            assert!((sim.success_probability() - exact).abs() < 1e-12);
            assert_eq!(sim.conditional_probabilities().len(), s.k());
        }
    }

    #[test]
    fn exact_mode_matches_tomography() {
        let state = make_cat_state(CatStateSpec { beta: Complex64::new(1.0, 0.5) }, 30).unwrap();
        let plan = TomographyPlan::build(&drive(), 20, &ScheduleOptions::default()).unwrap();
        let alpha = PhaseSpacePoint::new(0.4, 0.1);
        let cfg = SamplerConfig { mode: SamplingMode::Exact, ..SamplerConfig::default() };
        let sampled = sample_point(&state, alpha, &plan, &cfg, 0).unwrap();
        let stats = vibronic::displaced_number_statistics(&state, alpha, 30).unwrap();
        assert_eq!(sampled, exact_records(&stats, &plan));
    }

    #[test]
    fn vacuum_product_population_estimate() {
        let state = vacuum_product(0.3);
        let plan = TomographyPlan::build(&drive(), 1, &ScheduleOptions::default()).unwrap();
        let cfg = SamplerConfig { trials: 2000, master_seed: 11, ..SamplerConfig::default() };
        let r = sample_point(&state, PhaseSpacePoint::ORIGIN, &plan, &cfg, 0).unwrap();
        assert!((r[0].value.rho22 - 0.7).abs() <= 4.0 * r[0].stderr.rho22);
        assert!((r[0].value.rho11 - 0.3).abs() <= 4.0 * r[0].stderr.rho11);
    }

    #[test]
    fn grid_is_deterministic_across_parallelism() {
        let state = make_cat_state(CatStateSpec { beta: Complex64::new(1.0, 0.0) }, 30).unwrap();
        let plan = TomographyPlan::build(&drive(), 12, &ScheduleOptions::default()).unwrap();
        let grid = Grid { re_min: -1.0, re_max: 1.0, n_re: 3, im_min: -0.5, im_max: 0.5, n_im: 2 };
        let cfg = SamplerConfig { trials: 50, master_seed: 99, ..SamplerConfig::default() };
        let a = sample_grid(&state, &grid, &plan, &cfg).unwrap();
        let b = sample_grid(&state, &grid, &plan, &SamplerConfig { parallel: false, ..cfg }).unwrap();
        assert_eq!(a, b);
        let c = sample_grid(&state, &grid, &plan, &SamplerConfig { master_seed: 100, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn per_element_allocation() {
        let cfg = SamplerConfig { trials: 1000, allocation: TrialAllocation::PerElement, ..SamplerConfig::default() };
        assert_eq!(cfg.trials_per_setting(), 250);
        let cfg = SamplerConfig { trials: 2, ..cfg };
        assert_eq!(cfg.trials_per_setting(), 1);
        assert!(SamplerConfig { trials: 0, ..cfg }.validate().is_err());
    }
}
