//! Run configuration: JSON file, command-line overrides and validation.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use wigmat::fock;
use wigmat::linalg::CMatrix;
use wigmat::vibronic::{make_cat_state, make_product_state};
use wigmat::{
    CatStateSpec, Complex64, DriveConfig, ElectronicDensity, FockOperator, Grid, SamplerConfig, SamplingMode,
    ScheduleOptions, TrialAllocation, VibronicDensity,
};

/// Prepared state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    /// `(|beta>|2> - |-beta>|1>)/sqrt(2)`.
    Cat {
        beta_re: f64,
        #[serde(default)]
        beta_im: f64,
    },
    /// Product state read from a JSON file, see [`ProductStateFile`].
    Product { path: PathBuf },
}

impl Default for StateSpec {
    fn default() -> Self {
        StateSpec::Cat {
            beta_re: 2.0,
            beta_im: 0.0,
        }
    }
}

/// `rho ⊗ sigma` with complex entries written as `[re, im]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductStateFile {
    /// Motional density matrix, row-major.
    pub motional: Vec<Vec<[f64; 2]>>,
    /// Electronic density matrix in the order `(|1>, |2>)`.
    pub electronic: [[[f64; 2]; 2]; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveSection {
    /// `|Omega| / 2 pi` in Hz.
    pub rabi_hz: f64,
    /// Reference laser phase in radians.
    pub phase: f64,
    pub eta: f64,
}

impl Default for DriveSection {
    fn default() -> Self {
        Self {
            rabi_hz: 5.0e5,
            phase: 0.0,
            eta: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TomographySection {
    /// Filtered Fock states `M`; derived from `tail_tolerance` when absent.
    pub fock_count: Option<usize>,
    pub tail_tolerance: f64,
    pub leakage_budget: f64,
    pub p_max: u32,
    pub k_cap: usize,
    /// Exact cycle count per sequence; the greedy builder stops at the
    /// budget when absent.
    pub cycles: Option<usize>,
}

impl Default for TomographySection {
    fn default() -> Self {
        let s = ScheduleOptions::default();
        Self {
            fock_count: None,
            tail_tolerance: 1e-6,
            leakage_budget: s.leakage_budget,
            p_max: s.p_max,
            k_cap: s.k_cap,
            cycles: None,
        }
    }
}

impl TomographySection {
    pub fn schedule_options(&self) -> ScheduleOptions {
        ScheduleOptions {
            leakage_budget: self.leakage_budget,
            p_max: self.p_max,
            k_cap: self.k_cap,
            fixed_cycles: self.cycles,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSection {
    pub trials: u64,
    pub master_seed: u64,
    pub mode: SamplingMode,
    pub allocation: TrialAllocation,
}

impl Default for SamplerSection {
    fn default() -> Self {
        Self {
            trials: 1000,
            master_seed: 1,
            mode: SamplingMode::FastAnalytic,
            allocation: TrialAllocation::PerVariant,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("wigmat-out"),
            formats: vec![Format::Json, Format::Csv],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub state: StateSpec,
    pub grid: Grid,
    pub drive: DriveSection,
    pub tomography: TomographySection,
    pub sampler: SamplerSection,
    pub output: OutputSection,
    /// Fock-space dimension; the guard-band minimum when absent.
    pub truncation: Option<usize>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub grid: Option<Grid>,
    pub beta: Option<Complex64>,
    pub eta: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub mode: Option<SamplingMode>,
    pub fock_count: Option<usize>,
    pub cycles: Option<usize>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        serde_json::from_str(text).context("invalid configuration")
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.sampler.master_seed = v;
        }
        if let Some(v) = o.trials {
            self.sampler.trials = v;
        }
        if let Some(v) = o.grid {
            self.grid = v;
        }
        if let Some(b) = o.beta {
            self.state = StateSpec::Cat {
                beta_re: b.re,
                beta_im: b.im,
            };
        }
        if let Some(v) = o.eta {
            self.drive.eta = v;
        }
        if let Some(v) = &o.out_dir {
            self.output.directory = v.clone();
        }
        if let Some(v) = o.mode {
            self.sampler.mode = v;
        }
        if let Some(v) = o.fock_count {
            self.tomography.fock_count = Some(v);
        }
        if let Some(v) = o.cycles {
            self.tomography.cycles = Some(v);
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.grid.validate()?;
        if let StateSpec::Cat { beta_re, beta_im } = self.state {
            if !beta_re.is_finite() || !beta_im.is_finite() {
                bail!("cat amplitude must be finite");
            }
        }
        if !(self.drive.rabi_hz > 0.0 && self.drive.rabi_hz.is_finite()) {
            bail!("drive.rabi_hz must be positive, got {}", self.drive.rabi_hz);
        }
        self.drive_config()?;
        let t = &self.tomography;
        if !(t.tail_tolerance > 0.0 && t.tail_tolerance < 1.0) {
            bail!("tomography.tail_tolerance must lie in (0, 1)");
        }
        if t.fock_count == Some(0) {
            bail!("tomography.fock_count must be at least 1");
        }
        t.schedule_options().validate()?;
        if self.sampler.trials < 1 {
            bail!("sampler.trials must be at least 1");
        }
        if self.output.formats.is_empty() {
            bail!("output.formats must name at least one format");
        }
        if self.truncation == Some(0) {
            bail!("truncation must be at least 1");
        }
        Ok(())
    }

    /// Internal drive: `|Omega| = 1`, times in units of `1/|Omega|`.
    pub fn drive_config(&self) -> anyhow::Result<DriveConfig> {
        Ok(DriveConfig::new(1.0, self.drive.phase, self.drive.eta)?)
    }

    /// Seconds per internal time unit.
    pub fn time_unit_seconds(&self) -> f64 {
        1.0 / (2.0 * PI * self.drive.rabi_hz)
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            trials: self.sampler.trials,
            master_seed: self.sampler.master_seed,
            mode: self.sampler.mode,
            parallel: true,
            allocation: self.sampler.allocation,
        }
    }

    /// SHA-256 of the canonical JSON encoding.
    /// SHA-256 of everything that determines the results; the output section
    /// is left out so relocated runs hash alike.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("configuration serialises");
        if let Some(map) = value.as_object_mut() {
            map.remove("output");
        }
        let canonical = serde_json::to_vec(&value).expect("configuration serialises");
        hex::encode(Sha256::digest(&canonical))
    }

    /// Builds the state at the configured or guard-band dimension.
    pub fn build_state(&self) -> anyhow::Result<VibronicDensity> {
        match &self.state {
            StateSpec::Cat { beta_re, beta_im } => {
                let beta = Complex64::new(*beta_re, *beta_im);
                let dim = self
                    .truncation
                    .unwrap_or_else(|| fock::dimension_for(beta.norm() + self.grid.max_magnitude()));
                Ok(make_cat_state(CatStateSpec { beta }, dim)?)
            }
            StateSpec::Product { path } => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let file: ProductStateFile =
                    serde_json::from_str(&text).with_context(|| format!("invalid product state in {}", path.display()))?;
                let state = file.build()?;
                match self.truncation {
                    Some(d) if d > state.dim() => Ok(state.embed(d)?),
                    _ => {
                        let need = fock::dimension_for(state.support_radius() + self.grid.max_magnitude());
                        Ok(if need > state.dim() { state.embed(need)? } else { state })
                    }
                }
            }
        }
    }
}

impl ProductStateFile {
    pub fn build(&self) -> anyhow::Result<VibronicDensity> {
        let n = self.motional.len();
        if n == 0 || self.motional.iter().any(|row| row.len() != n) {
            bail!("motional matrix must be square and non-empty");
        }
        let c = |z: &[f64; 2]| Complex64::new(z[0], z[1]);
        let rho = FockOperator::from_matrix(CMatrix::from_fn(n, n, |r, k| c(&self.motional[r][k])))?;
        let sigma = ElectronicDensity::new([
            [c(&self.electronic[0][0]), c(&self.electronic[0][1])],
            [c(&self.electronic[1][0]), c(&self.electronic[1][1])],
        ])?;
        Ok(make_product_state(&rho, &sigma)?)
    }
}

/// Parses `re_min:re_max:n_re,im_min:im_max:n_im`.
pub fn parse_grid(s: &str) -> Result<Grid, String> {
    let axis = |part: &str| -> Result<(f64, f64, usize), String> {
        let f: Vec<&str> = part.split(':').collect();
        if f.len() != 3 {
            return Err(format!("axis `{part}` must be min:max:count"));
        }
        let lo = f[0].trim().parse::<f64>().map_err(|e| format!("{}: {e}", f[0]))?;
        let hi = f[1].trim().parse::<f64>().map_err(|e| format!("{}: {e}", f[1]))?;
        let n = f[2].trim().parse::<usize>().map_err(|e| format!("{}: {e}", f[2]))?;
        Ok((lo, hi, n))
    };
    let (re, im) = s
        .split_once(',')
        .ok_or_else(|| "grid must be re_min:re_max:n_re,im_min:im_max:n_im".to_string())?;
    let (re_min, re_max, n_re) = axis(re)?;
    let (im_min, im_max, n_im) = axis(im)?;
    let g = Grid {
        re_min,
        re_max,
        n_re,
        im_min,
        im_max,
        n_im,
    };
    g.validate().map_err(|e| e.to_string())?;
    Ok(g)
}

/// Parses `re` or `re,im`.
pub fn parse_complex(s: &str) -> Result<Complex64, String> {
    let parse = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t}: {e}"));
    match s.split_once(',') {
        Some((re, im)) => Ok(Complex64::new(parse(re)?, parse(im)?)),
        None => Ok(Complex64::new(parse(s)?, 0.0)),
    }
}
