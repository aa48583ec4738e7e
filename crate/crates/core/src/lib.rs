//! Simulation and reconstruction of the Wigner-function matrix of an
//! entangled motional/electronic state of a trapped ion.
//!
//! The crate is layered bottom-up:
//!
//! * [`fock`]: truncated Fock-space vectors and operators, displacement and
//!   parity.
//! * [`vibronic`]: composite density operators, marginals, conditioning and
//!   displaced number statistics.
//! * [`wigner`]: exact, series and closed-form Wigner-matrix evaluation,
//!   quadrature and inversion.
//! * [`dynamics`]: the resonantly driven weak transition with its
//!   Fock-dependent Rabi frequencies.
//! * [`tomography`]: Fock-filtering schedules and inversion of the measured
//!   probabilities.
//! * [`montecarlo`]: stochastic emulation of the interaction/probe
//!   sequences and grid sweeps.

pub mod dynamics;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod montecarlo;
pub mod special;
pub mod tomography;
pub mod vibronic;
pub mod wigner;

pub use dynamics::{DriveConfig, RabiSpectrum};
pub use error::{Error, Result};
pub use fock::{FockOperator, FockVector, PhaseSpacePoint};
pub use montecarlo::{SampledField, SamplerConfig, SamplingMode, TrialAllocation, TrialOutcome};
pub use tomography::{
    CycleSchedule, EstimationRecord, Estimates, ScheduleOptions, Setting, TomographyConfig, TomographyPlan, Variant,
};
pub use vibronic::{CatStateSpec, ElectronicDensity, Level, NumberStatisticsMatrix, VibronicDensity};
pub use wigner::{Component, ComponentErrors, Grid, WignerMatrixField, WignerMatrixSample};

pub use num_complex::Complex64;
