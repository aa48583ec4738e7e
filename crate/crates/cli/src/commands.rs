//! The `exact`, `sample` and `compare` subcommands.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use wigmat::montecarlo;
use wigmat::tomography::{self, TomographyPlan};
use wigmat::vibronic::reduce_electronic;
use wigmat::wigner::{self, QualityWarning};
use wigmat::{Component, SamplingMode};

use crate::config::{Format, RunConfig};
use crate::output::{to_pretty_json, write_file, FieldDocument, FieldMetadata, WrittenFile};
use crate::CliError;

/// Fraction of points that must lie within four standard errors.
pub const WITHIN_4_MIN: f64 = 0.95;
/// Mean absolute error allowed, in units of the mean standard error.
pub const MEAN_ERROR_FACTOR: f64 = 2.0;

/// Files and summary of a finished `exact` or `sample` run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub files: Vec<WrittenFile>,
    pub summary: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a RunConfig,
    config_hash: String,
    threads: usize,
    dimension: usize,
    fock_count: Option<usize>,
    time_unit_seconds: f64,
    outputs: &'a [WrittenFile],
    timings: Vec<(&'static str, f64)>,
}

#[derive(Serialize)]
struct MarginalReport {
    /// Quadrature of the field, `[re, im]` per entry.
    sigma: [[[f64; 2]; 2]; 2],
    /// Trace of the electronic blocks of the prepared state.
    reference: [[[f64; 2]; 2]; 2],
    quadrature_error: f64,
    boundary_ratio: f64,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct ScheduleEntry {
    m: usize,
    k: usize,
    multipliers: Vec<u32>,
    rabi_m: f64,
    leakage: f64,
    tau1_pi_seconds: f64,
    tau1_half_pi_seconds: f64,
    cycle_seconds: Vec<f64>,
    sequence_seconds: f64,
}

#[derive(Serialize)]
struct ScheduleReport {
    rabi_hz: f64,
    eta: f64,
    fock_count: usize,
    max_leakage: f64,
    max_cycles: usize,
    wigner_leakage_bound: f64,
    schedules: Vec<ScheduleEntry>,
}

fn pair(z: wigmat::Complex64) -> [f64; 2] {
    [z.re, z.im]
}

fn warning_text(w: &QualityWarning) -> String {
    match w {
        QualityWarning::InsufficientCoverage { boundary_ratio } => {
            format!("field still significant on the grid edge (ratio {boundary_ratio:.3e})")
        }
        QualityWarning::CoarseGrid { spacing } => format!("grid spacing {spacing} is coarse"),
    }
}

fn mode_name(mode: SamplingMode) -> String {
    serde_json::to_value(mode)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn write_field(
    cfg: &RunConfig,
    stem: &str,
    doc: &FieldDocument,
    files: &mut Vec<WrittenFile>,
) -> Result<(), CliError> {
    let dir = &cfg.output.directory;
    for format in &cfg.output.formats {
        let f = match format {
            Format::Json => write_file(dir, &format!("{stem}.json"), &doc.to_json()),
            Format::Csv => doc.to_csv().and_then(|t| write_file(dir, &format!("{stem}.csv"), &t)),
        };
        files.push(f.map_err(CliError::Runtime)?);
    }
    Ok(())
}

fn write_manifest(
    cfg: &RunConfig,
    command: &'static str,
    dimension: usize,
    fock_count: Option<usize>,
    files: &[WrittenFile],
    timings: Vec<(&'static str, f64)>,
) -> Result<(), CliError> {
    let manifest = Manifest {
        tool: "wigmat",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config: cfg,
        config_hash: cfg.hash(),
        threads: rayon::current_num_threads(),
        dimension,
        fock_count,
        time_unit_seconds: cfg.time_unit_seconds(),
        outputs: files,
        timings,
    };
    write_file(&cfg.output.directory, "manifest.json", &to_pretty_json(&manifest)).map_err(CliError::Runtime)?;
    Ok(())
}

/// Exact field by kernel trace, plus the electronic marginal by quadrature.
pub fn cmd_exact(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    cfg.validate().map_err(CliError::Config)?;
    let start = Instant::now();
    let state = cfg.build_state().map_err(CliError::classify)?;
    let field = wigner::exact_field(&state, &cfg.grid).map_err(CliError::core)?;
    let field_seconds = start.elapsed().as_secs_f64();

    let integral = wigner::integrate_field(&field);
    let reference = reduce_electronic(&state);
    let marginal = MarginalReport {
        sigma: integral.sigma.map(|r| r.map(pair)),
        reference: reference.matrix().map(|r| r.map(pair)),
        quadrature_error: integral.quadrature_error,
        boundary_ratio: integral.boundary_ratio,
        warnings: integral.warnings.iter().map(warning_text).collect(),
    };
    let meta = FieldMetadata {
        kind: "exact".into(),
        grid: cfg.grid,
        config_hash: cfg.hash(),
        seed: None,
        mode: None,
        dimension: state.dim(),
        fock_count: None,
        trials: None,
    };
    let doc = FieldDocument::new(meta, &field, None);
    let mut files = Vec::new();
    write_field(cfg, "exact", &doc, &mut files)?;
    files.push(
        write_file(&cfg.output.directory, "marginal.json", &to_pretty_json(&marginal)).map_err(CliError::Runtime)?,
    );
    let total = start.elapsed().as_secs_f64();
    write_manifest(
        cfg,
        "exact",
        state.dim(),
        None,
        &files,
        vec![("field_seconds", field_seconds), ("total_seconds", total)],
    )?;
    let mut summary = vec![
        format!("exact field: {} points, truncation {}", cfg.grid.len(), state.dim()),
        format!(
            "electronic marginal by quadrature: sigma_11 = {:.6}, sigma_22 = {:.6} (quadrature error {:.1e})",
            integral.sigma[0][0].re, integral.sigma[1][1].re, integral.quadrature_error
        ),
    ];
    summary.extend(integral.warnings.iter().map(|w| format!("warning: {}", warning_text(w))));
    Ok(RunOutcome {
        out_dir: cfg.output.directory.clone(),
        files,
        summary,
    })
}

/// Monte-Carlo emulation of the protocol over the grid.
pub fn cmd_sample(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    cfg.validate().map_err(CliError::Config)?;
    let start = Instant::now();
    let state = cfg.build_state().map_err(CliError::classify)?;
    let drive = cfg.drive_config().map_err(CliError::Config)?;
    let fock_count = match cfg.tomography.fock_count {
        Some(m) if m > state.dim() => {
            return Err(CliError::Config(anyhow::anyhow!(
                "fock_count {m} exceeds the truncation {}",
                state.dim()
            )))
        }
        Some(m) => m,
        None => tomography::required_fock_count(&state, &cfg.grid, cfg.tomography.tail_tolerance)
            .map_err(CliError::core)?,
    };
    let plan = TomographyPlan::build(&drive, fock_count, &cfg.tomography.schedule_options()).map_err(CliError::core)?;
    let plan_seconds = start.elapsed().as_secs_f64();
    let bound = plan.wigner_leakage_bound().map_err(CliError::core)?;
    let sampler = cfg.sampler_config();
    let sampled = montecarlo::sample_grid(&state, &cfg.grid, &plan, &sampler).map_err(CliError::core)?;
    let sample_seconds = start.elapsed().as_secs_f64() - plan_seconds;

    let unit = cfg.time_unit_seconds();
    let schedules = ScheduleReport {
        rabi_hz: cfg.drive.rabi_hz,
        eta: cfg.drive.eta,
        fock_count,
        max_leakage: plan.max_leakage(),
        max_cycles: plan.max_cycles(),
        wigner_leakage_bound: bound,
        schedules: plan
            .schedules
            .iter()
            .map(|s| {
                let tau_pi = std::f64::consts::PI / s.rabi_m.abs();
                let cycles: Vec<f64> = s.taus.iter().map(|t| t * unit).collect();
                ScheduleEntry {
                    m: s.target_m,
                    k: s.k(),
                    multipliers: s.multipliers.clone(),
                    rabi_m: s.rabi_m,
                    leakage: s.leakage,
                    tau1_pi_seconds: tau_pi * unit,
                    tau1_half_pi_seconds: 0.5 * tau_pi * unit,
                    sequence_seconds: tau_pi * unit + cycles.iter().sum::<f64>(),
                    cycle_seconds: cycles,
                }
            })
            .collect(),
    };
    let meta = FieldMetadata {
        kind: "sampled".into(),
        grid: cfg.grid,
        config_hash: cfg.hash(),
        seed: Some(sampler.master_seed),
        mode: Some(mode_name(sampler.mode)),
        dimension: state.dim(),
        fock_count: Some(fock_count),
        trials: Some(sampler.trials_per_setting()),
    };
    let doc = FieldDocument::new(meta, &sampled.field, Some(bound));
    let mut files = Vec::new();
    write_field(cfg, "sampled", &doc, &mut files)?;
    files.push(
        write_file(&cfg.output.directory, "schedules.json", &to_pretty_json(&schedules)).map_err(CliError::Runtime)?,
    );
    let total = start.elapsed().as_secs_f64();
    write_manifest(
        cfg,
        "sample",
        state.dim(),
        Some(fock_count),
        &files,
        vec![
            ("plan_seconds", plan_seconds),
            ("sample_seconds", sample_seconds),
            ("total_seconds", total),
        ],
    )?;
    Ok(RunOutcome {
        out_dir: cfg.output.directory.clone(),
        files,
        summary: vec![
            format!(
                "sampled field: {} points, M = {fock_count}, truncation {}, mode {}, {} trials per setting",
                cfg.grid.len(),
                state.dim(),
                mode_name(sampler.mode),
                sampler.trials_per_setting()
            ),
            format!(
                "schedules: up to k = {} cycles, worst leakage {:.2e}, Wigner leakage bound {:.2e}",
                plan.max_cycles(),
                plan.max_leakage(),
                bound
            ),
        ],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub component: String,
    pub max_abs_error: f64,
    pub mean_abs_error: f64,
    pub mean_stderr: f64,
    pub within_3_stderr: f64,
    pub within_4_stderr: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub exact_file: PathBuf,
    pub sampled_file: PathBuf,
    pub points: usize,
    pub within_4_min: f64,
    pub mean_error_factor: f64,
    pub components: Vec<ComponentReport>,
    pub pass: bool,
}

impl ComparisonReport {
    pub fn summary(&self) -> Vec<String> {
        let mut lines: Vec<String> = self
            .components
            .iter()
            .map(|c| {
                format!(
                    "{:<7} max |err| {:.3e}  mean |err| {:.3e}  mean stderr {:.3e}  within 3se {:5.1}%  within 4se {:5.1}%  {}",
                    c.component,
                    c.max_abs_error,
                    c.mean_abs_error,
                    c.mean_stderr,
                    100.0 * c.within_3_stderr,
                    100.0 * c.within_4_stderr,
                    if c.pass { "pass" } else { "FAIL" }
                )
            })
            .collect();
        lines.push(format!("comparison {}", if self.pass { "passed" } else { "failed" }));
        lines
    }
}

/// Compares two field documents point by point.
pub fn compare_documents(exact: &FieldDocument, sampled: &FieldDocument) -> Result<Vec<ComponentReport>, CliError> {
    if exact.metadata.grid != sampled.metadata.grid || exact.records.len() != sampled.records.len() {
        return Err(CliError::Config(anyhow::anyhow!("grid mismatch between the two fields")));
    }
    for (a, b) in exact.records.iter().zip(&sampled.records) {
        if a.re_alpha != b.re_alpha || a.im_alpha != b.im_alpha {
            return Err(CliError::Config(anyhow::anyhow!(
                "grid mismatch at alpha = {} + {}i",
                a.re_alpha,
                a.im_alpha
            )));
        }
    }
    let e: Vec<_> = exact.records.iter().map(|r| r.to_sample()).collect();
    let s: Vec<_> = sampled.records.iter().map(|r| r.to_sample()).collect();
    let n = e.len() as f64;
    Ok(Component::ALL
        .iter()
        .map(|&c| {
            let mut max_err: f64 = 0.0;
            let (mut sum_err, mut sum_se, mut in3, mut in4) = (0.0, 0.0, 0usize, 0usize);
            for (x, y) in e.iter().zip(&s) {
                let err = (y.component(c) - x.component(c)).abs();
                let se = y.stderr.map_or(0.0, |v| v.get(c));
                max_err = max_err.max(err);
                sum_err += err;
                sum_se += se;
                in3 += usize::from(err <= 3.0 * se);
                in4 += usize::from(err <= 4.0 * se);
            }
            let (mean_err, mean_se) = (sum_err / n, sum_se / n);
            let within_4 = in4 as f64 / n;
            ComponentReport {
                component: c.name().to_string(),
                max_abs_error: max_err,
                mean_abs_error: mean_err,
                mean_stderr: mean_se,
                within_3_stderr: in3 as f64 / n,
                within_4_stderr: within_4,
                pass: within_4 >= WITHIN_4_MIN && mean_err <= MEAN_ERROR_FACTOR * mean_se,
            }
        })
        .collect())
}

/// Reads both files, writes `comparison.json` into `out_dir` when given and
/// fails with [`CliError::ComparisonFailed`] below the thresholds.
pub fn cmd_compare(exact: &Path, sampled: &Path, out_dir: Option<&Path>) -> Result<ComparisonReport, CliError> {
    let a = FieldDocument::read(exact).map_err(CliError::Config)?;
    let b = FieldDocument::read(sampled).map_err(CliError::Config)?;
    let components = compare_documents(&a, &b)?;
    let report = ComparisonReport {
        exact_file: exact.to_path_buf(),
        sampled_file: sampled.to_path_buf(),
        points: a.records.len(),
        within_4_min: WITHIN_4_MIN,
        mean_error_factor: MEAN_ERROR_FACTOR,
        pass: components.iter().all(|c| c.pass),
        components,
    };
    if let Some(dir) = out_dir {
        write_file(dir, "comparison.json", &to_pretty_json(&report)).map_err(CliError::Runtime)?;
    }
    if report.pass {
        Ok(report)
    } else {
        Err(CliError::ComparisonFailed(Box::new(report)))
    }
}
