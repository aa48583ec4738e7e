//! Fock filtering and the inversion of measured dark-sequence probabilities.
//!
//! A schedule for target `m` follows the first pulse `tau_1` with cycles of
//! duration `tau_q = 2 pi p_q / |Omega_m|`. Fock state `m` completes whole
//! Rabi periods and survives every dark probe with certainty, while every
//! other `n` is suppressed by `S_n = prod_q cos^2(pi p_q Omega_n / Omega_m)`.
//! Multipliers are chosen greedily: each added cycle takes the `p` that
//! minimises the worst surviving `S_n`.

use std::f64::consts::{FRAC_2_PI, FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, DriveConfig, RabiSpectrum};
use crate::error::{Error, Result};
use crate::fock::PhaseSpacePoint;
use crate::vibronic::{self, NumberStatisticsMatrix, VibronicDensity};
use crate::wigner::{ComponentErrors, Grid, WignerMatrixSample};

/// First-pulse choice of an interaction/probe sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Tau1Zero,
    Tau1Pi,
    Tau1HalfPi,
}

impl Variant {
    /// `Omega_m tau_1` in units of pi.
    fn pulse_area(self) -> f64 {
        match self {
            Variant::Tau1Zero => 0.0,
            Variant::Tau1Pi => PI,
            Variant::Tau1HalfPi => FRAC_PI_2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Tau1Zero => "tau1_zero",
            Variant::Tau1Pi => "tau1_pi",
            Variant::Tau1HalfPi => "tau1_half_pi",
        }
    }
}

/// One of the four measurement settings per target Fock state. `phase` is
/// an offset from the reference laser phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Setting {
    pub variant: Variant,
    pub phase: f64,
}

impl Setting {
    /// `rho_22`, `rho_11`, `Im rho_12` and `Re rho_12` settings, in this
    /// order. The order fixes the RNG stream coordinates.
    pub const ALL: [Setting; 4] = [
        Setting {
            variant: Variant::Tau1Zero,
            phase: 0.0,
        },
        Setting {
            variant: Variant::Tau1Pi,
            phase: 0.0,
        },
        Setting {
            variant: Variant::Tau1HalfPi,
            phase: 0.0,
        },
        Setting {
            variant: Variant::Tau1HalfPi,
            phase: -FRAC_PI_2,
        },
    ];
}

/// Options for [`build_schedule`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleOptions {
    /// Required bound on `max_{n != m} S_n`.
    pub leakage_budget: f64,
    /// Largest multiplier tried.
    pub p_max: u32,
    /// Largest admissible cycle count `k` (including the first pulse).
    pub k_cap: usize,
    /// Build exactly this many cycles instead of stopping at the budget.
    pub fixed_cycles: Option<usize>,
}

impl Default for ScheduleOptions {
    fn default() -> Self {
        Self {
            leakage_budget: 1e-3,
            p_max: 200,
            k_cap: 60,
            fixed_cycles: None,
        }
    }
}

impl ScheduleOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.leakage_budget > 0.0 && self.leakage_budget < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "leakage budget must lie in (0, 1), got {}",
                self.leakage_budget
            )));
        }
        if self.p_max < 1 || self.k_cap < 1 {
            return Err(Error::InvalidArgument("p_max and k_cap must be at least 1".into()));
        }
        if let Some(k) = self.fixed_cycles {
            if k < 1 || k > self.k_cap {
                return Err(Error::InvalidArgument(format!(
                    "fixed cycle count {k} outside [1, k_cap = {}]",
                    self.k_cap
                )));
            }
        }
        Ok(())
    }
}

/// Interaction times of one sequence targeting Fock state `target_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleSchedule {
    pub target_m: usize,
    pub variant: Variant,
    pub phase: f64,
    /// Signed `Omega_m`.
    pub rabi_m: f64,
    /// `p_2 ... p_k`.
    pub multipliers: Vec<u32>,
    pub tau1: f64,
    /// `tau_2 ... tau_k`.
    pub taus: Vec<f64>,
    /// `max_{n != m, n < n_stat} S_n` at construction.
    pub leakage: f64,
    pub n_stat: usize,
}

impl CycleSchedule {
    /// Total cycle count including the first pulse.
    pub fn k(&self) -> usize {
        self.multipliers.len() + 1
    }

    /// Sequence of the first pulse alone (`k = 1`), which isolates nothing.
    pub fn first_pulse_only(drive: &DriveConfig, target_m: usize) -> Result<Self> {
        Ok(Self {
            target_m,
            variant: Variant::Tau1Zero,
            phase: 0.0,
            rabi_m: drive.checked_rabi_frequency(target_m)?,
            multipliers: Vec::new(),
            tau1: 0.0,
            taus: Vec::new(),
            leakage: 1.0,
            n_stat: target_m + 1,
        })
    }

    /// Same suppression cycles with another first pulse.
    pub fn with_setting(&self, setting: Setting) -> Self {
        Self {
            variant: setting.variant,
            phase: setting.phase,
            tau1: setting.variant.pulse_area() / self.rabi_m.abs(),
            ..self.clone()
        }
    }

    /// Drive of this sequence: `phase` is added to the reference phase of
    /// `drive`.
    pub fn drive_for(&self, drive: &DriveConfig) -> DriveConfig {
        drive.with_phase(drive.phase + self.phase)
    }
}

fn ratios(drive: &DriveConfig, m: usize, n_stat: usize) -> Result<(f64, Vec<f64>)> {
    let rabi_m = drive.checked_rabi_frequency(m)?;
    let spectrum = RabiSpectrum::new(drive, n_stat.max(m + 1));
    Ok((rabi_m, spectrum.omega.iter().map(|w| w / rabi_m).collect()))
}

fn suppression(ratio: f64, p: u32) -> f64 {
    (PI * p as f64 * ratio).cos().powi(2)
}

/// `S_n` for `n < n_stat`, with `S_m = 1`.
pub fn suppression_factors(drive: &DriveConfig, schedule: &CycleSchedule, n_stat: usize) -> Result<Vec<f64>> {
    let (_, r) = ratios(drive, schedule.target_m, n_stat)?;
    Ok((0..n_stat)
        .map(|n| {
            if n == schedule.target_m {
                1.0
            } else {
                schedule.multipliers.iter().map(|&p| suppression(r[n], p)).product()
            }
        })
        .collect())
}

fn worst_leakage(s: &[f64], m: usize) -> f64 {
    s.iter()
        .enumerate()
        .filter(|&(n, _)| n != m)
        .map(|(_, &v)| v)
        .fold(0.0, f64::max)
}

/// Greedy minimax schedule for target `m` with leakage checked over
/// `n < n_stat`. The returned schedule carries [`Variant::Tau1Zero`].
pub fn build_schedule(
    drive: &DriveConfig,
    target_m: usize,
    n_stat: usize,
    options: &ScheduleOptions,
) -> Result<CycleSchedule> {
    drive.validate()?;
    options.validate()?;
    if target_m >= n_stat {
        return Err(Error::InvalidArgument(format!(
            "target m = {target_m} must lie below n_stat = {n_stat}"
        )));
    }
    let (rabi_m, r) = ratios(drive, target_m, n_stat)?;
    let others: Vec<usize> = (0..n_stat).filter(|&n| n != target_m).collect();
    let mut s = vec![1.0; n_stat];
    let mut multipliers = Vec::new();
    let mut leakage = worst_leakage(&s[..n_stat], target_m);
    let done = |k: usize, leak: f64| match options.fixed_cycles {
        Some(fixed) => k >= fixed,
        None => leak <= options.leakage_budget,
    };
    while !done(multipliers.len() + 1, leakage) && multipliers.len() + 1 < options.k_cap {
        let mut best = (f64::INFINITY, 1);
        for p in 1..=options.p_max {
            let worst = others
                .iter()
                .map(|&n| s[n] * suppression(r[n], p))
                .fold(0.0, f64::max);
            if worst < best.0 {
                best = (worst, p);
            }
        }
        let p = best.1;
        for &n in &others {
            s[n] *= suppression(r[n], p);
        }
        multipliers.push(p);
        leakage = worst_leakage(&s[..n_stat], target_m);
    }
    if leakage > options.leakage_budget {
        return Err(Error::ScheduleInfeasible {
            m: target_m,
            budget: options.leakage_budget,
            achieved: leakage,
            k_cap: options.k_cap,
        });
    }
    let taus = multipliers
        .iter()
        .map(|&p| 2.0 * PI * p as f64 / rabi_m.abs())
        .collect();
    Ok(CycleSchedule {
        target_m,
        variant: Variant::Tau1Zero,
        phase: 0.0,
        rabi_m,
        multipliers,
        tau1: 0.0,
        taus,
        leakage,
        n_stat,
    })
}

/// Dark-sequence probability split into the target contribution and the
/// leakage of all other Fock states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbabilityBreakdown {
    pub total: f64,
    pub target: f64,
    pub leakage: f64,
}

/// Probability of `k` consecutive dark probes from displaced statistics.
pub fn success_from_statistics(
    stats: &NumberStatisticsMatrix,
    drive: &DriveConfig,
    schedule: &CycleSchedule,
) -> ProbabilityBreakdown {
    let d = schedule.drive_for(drive);
    let reduced = dynamics::reduced_after_first_cycle(stats, &d, schedule.tau1);
    let filtered = dynamics::cycle_product(&reduced, &d, &schedule.taus);
    let total = dynamics::success_probability(&filtered);
    let target = filtered.get(schedule.target_m).copied().unwrap_or(0.0);
    ProbabilityBreakdown {
        total,
        target,
        leakage: total - target,
    }
}

/// `P(tau_k, ..., tau_1)` after displacing `state` by `-alpha`, using the
/// whole truncated Fock space.
pub fn exact_success_probability(
    state: &VibronicDensity,
    alpha: PhaseSpacePoint,
    drive: &DriveConfig,
    schedule: &CycleSchedule,
) -> Result<f64> {
    let stats = vibronic::displaced_number_statistics(state, alpha, state.dim())?;
    Ok(success_from_statistics(&stats, drive, schedule).total)
}

/// Statistics of one target Fock state recovered from the four settings.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Estimates {
    pub rho11: f64,
    pub rho22: f64,
    pub re12: f64,
    pub im12: f64,
}

/// Estimated `rho_ij^{mm}(alpha)` with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationRecord {
    pub alpha: PhaseSpacePoint,
    pub m: usize,
    pub value: Estimates,
    pub stderr: Estimates,
    /// Trials per setting.
    pub trials: u64,
    /// Bound on the systematic leakage of each probability,
    /// `max_{n != m} S_n`.
    pub leakage_bound: f64,
}

/// Inverts `(P_zero, P_pi, P_half(phi=0), P_half(phi=-pi/2))` for a
/// positive `Omega_m`.
pub fn invert_statistics(p_zero: f64, p_pi: f64, p_half_phi0: f64, p_half_phineg: f64) -> Estimates {
    let mean = 0.5 * (p_zero + p_pi);
    Estimates {
        rho11: p_pi,
        rho22: p_zero,
        re12: p_half_phineg - mean,
        im12: p_half_phi0 - mean,
    }
}

/// [`invert_statistics`] for a drive with reference phase `phase0` and
/// signed `Omega_m`, with standard errors propagated to first order.
///
/// The half-pulse settings measure `c' = sign(Omega_m) rho_12 e^{-i phase0}`;
/// `re'` and `im'` share the `P_zero`, `P_pi` terms, whose covariance enters
/// the rotated errors.
pub fn invert_with_errors(p: [f64; 4], se: [f64; 4], rabi_m: f64, phase0: f64) -> (Estimates, Estimates) {
    let raw = invert_statistics(p[0], p[1], p[2], p[3]);
    let sign = rabi_m.signum();
    let (s, c) = phase0.sin_cos();
    let mut v = raw;
    v.re12 = sign * (c * raw.re12 - s * raw.im12);
    v.im12 = sign * (s * raw.re12 + c * raw.im12);
    let cov = 0.25 * (se[0] * se[0] + se[1] * se[1]);
    let var_re = se[3] * se[3] + cov;
    let var_im = se[2] * se[2] + cov;
    let e = Estimates {
        rho11: se[1],
        rho22: se[0],
        re12: (c * c * var_re + s * s * var_im - 2.0 * c * s * cov).max(0.0).sqrt(),
        im12: (s * s * var_re + c * c * var_im + 2.0 * c * s * cov).max(0.0).sqrt(),
    };
    (v, e)
}

/// `w_ij = (2/pi) sum_m (-1)^m rho_ij^{mm}` from records covering `m < M`.
/// With `tail_tolerance`, the estimated missing mass must stay below it
/// plus four standard errors.
pub fn assemble_wigner(records: &[EstimationRecord], tail_tolerance: Option<f64>) -> Result<WignerMatrixSample> {
    let first = records
        .first()
        .ok_or_else(|| Error::InsufficientCoverage("no records".into()))?;
    for (k, r) in records.iter().enumerate() {
        if r.m != k {
            return Err(Error::InsufficientCoverage(format!(
                "records must cover m = 0, 1, ... in order; position {k} holds m = {}",
                r.m
            )));
        }
        if r.alpha != first.alpha {
            return Err(Error::InvalidArgument("records mix phase-space points".into()));
        }
    }
    let mut sum = Estimates::default();
    let mut var = Estimates::default();
    let mut mass = 0.0;
    let mut mass_var = 0.0;
    for r in records {
        let s = if r.m % 2 == 0 { 1.0 } else { -1.0 };
        sum.rho11 += s * r.value.rho11;
        sum.rho22 += s * r.value.rho22;
        sum.re12 += s * r.value.re12;
        sum.im12 += s * r.value.im12;
        var.rho11 += r.stderr.rho11 * r.stderr.rho11;
        var.rho22 += r.stderr.rho22 * r.stderr.rho22;
        var.re12 += r.stderr.re12 * r.stderr.re12;
        var.im12 += r.stderr.im12 * r.stderr.im12;
        mass += r.value.rho11 + r.value.rho22;
        mass_var += r.stderr.rho11 * r.stderr.rho11 + r.stderr.rho22 * r.stderr.rho22;
    }
    if let Some(tol) = tail_tolerance {
        let deficit = 1.0 - mass;
        if deficit > tol + 4.0 * mass_var.sqrt() {
            return Err(Error::InsufficientCoverage(format!(
                "estimated probability mass beyond m = {} is {deficit:.3e}",
                records.len() - 1
            )));
        }
    }
    let mut sample = WignerMatrixSample::from_components(
        first.alpha,
        FRAC_2_PI * sum.rho11,
        FRAC_2_PI * sum.rho22,
        FRAC_2_PI * sum.re12,
        FRAC_2_PI * sum.im12,
    );
    sample.stderr = Some(ComponentErrors {
        w11: FRAC_2_PI * var.rho11.sqrt(),
        w22: FRAC_2_PI * var.rho22.sqrt(),
        re_w12: FRAC_2_PI * var.re12.sqrt(),
        im_w12: FRAC_2_PI * var.im12.sqrt(),
    });
    Ok(sample)
}

/// Protocol parameters shared by all phase-space points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TomographyConfig {
    /// Number of filtered Fock states `M`. `None` derives it from the tail
    /// rule over the grid.
    pub fock_count: Option<usize>,
    /// Tail mass allowed beyond `M`.
    pub tail_tolerance: f64,
    pub schedule: ScheduleOptions,
}

impl Default for TomographyConfig {
    fn default() -> Self {
        Self {
            fock_count: None,
            tail_tolerance: 1e-6,
            schedule: ScheduleOptions::default(),
        }
    }
}

/// Smallest `M` such that the displaced statistics at every grid point have
/// tail mass below `tail` beyond `M`, capped at the truncation dimension.
pub fn required_fock_count(state: &VibronicDensity, grid: &Grid, tail: f64) -> Result<usize> {
    grid.validate()?;
    let dim = state.dim();
    let counts: Result<Vec<usize>> = (0..grid.len())
        .into_par_iter()
        .map(|k| Ok(vibronic::displaced_number_statistics(state, grid.point(k), dim)?.cutoff(tail)))
        .collect();
    Ok(counts?.into_iter().max().unwrap_or(1).min(dim))
}

/// Suppression schedules for every target `m < M`, shared across the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyPlan {
    pub drive: DriveConfig,
    pub fock_count: usize,
    pub schedules: Vec<CycleSchedule>,
}

impl TomographyPlan {
    /// Builds one schedule per `m < fock_count`, checking leakage over all
    /// `n < fock_count`.
    pub fn build(drive: &DriveConfig, fock_count: usize, options: &ScheduleOptions) -> Result<Self> {
        if fock_count == 0 {
            return Err(Error::InvalidArgument("fock count must be at least 1".into()));
        }
        let schedules = (0..fock_count)
            .into_par_iter()
            .map(|m| build_schedule(drive, m, fock_count, options))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            drive: *drive,
            fock_count,
            schedules,
        })
    }

    pub fn max_leakage(&self) -> f64 {
        self.schedules.iter().map(|s| s.leakage).fold(0.0, f64::max)
    }

    /// `max_n sum_{m != n} S_n^{(m)}` over `n < M`: the largest total
    /// weight with which one Fock state leaks into the filtered
    /// probabilities of the other targets.
    pub fn cross_leakage(&self) -> Result<f64> {
        let mut total = vec![0.0; self.fock_count];
        for s in &self.schedules {
            for (n, f) in suppression_factors(&self.drive, s, self.fock_count)?.into_iter().enumerate() {
                if n != s.target_m {
                    total[n] += f;
                }
            }
        }
        Ok(total.into_iter().fold(0.0, f64::max))
    }

    /// Bound on the filtering error of any Wigner-matrix component:
    /// `(2/pi) * 2 * cross_leakage`. Coherences combine three probabilities,
    /// hence the factor two.
    pub fn wigner_leakage_bound(&self) -> Result<f64> {
        Ok(2.0 * FRAC_2_PI * self.cross_leakage()?)
    }

    pub fn max_cycles(&self) -> usize {
        self.schedules.iter().map(CycleSchedule::k).max().unwrap_or(1)
    }
}

/// Records from exact probabilities (the infinite-trial limit).
pub fn exact_records(
    stats: &NumberStatisticsMatrix,
    plan: &TomographyPlan,
) -> Vec<EstimationRecord> {
    plan.schedules
        .iter()
        .map(|base| {
            let p = Setting::ALL.map(|s| success_from_statistics(stats, &plan.drive, &base.with_setting(s)).total);
            let (value, stderr) = invert_with_errors(p, [0.0; 4], base.rabi_m, plan.drive.phase);
            EstimationRecord {
                alpha: stats.alpha,
                m: base.target_m,
                value,
                stderr,
                trials: 0,
                leakage_bound: base.leakage,
            }
        })
        .collect()
}
