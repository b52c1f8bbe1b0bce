//! Gaussian two-sideband states, homodyne and resonator detection models,
//! and least-squares tomography of the sideband pair.
//!
//! Everything is generic over the scalar type ([`Real`], implemented for
//! `f32` and `f64`); the aliases below fix the precision.

pub mod cavity;
pub mod detection;
pub mod error;
pub mod grid;
pub mod io;
pub mod lsq;
pub mod preparation;
pub mod reconstruct;
pub mod scalar;
pub mod state;

pub use cavity::{CavityParams, Coupling, SidebandResponse};
pub use detection::{
    hd_scan, rd_locked_scan, rd_scan, s_hd, s_rd, LockedScan, NoiseModel, PhotocurrentMoments, RdCoefficients,
    ScanCurve, ScanKind,
};
pub use error::{Error, Result};
pub use grid::{linspace, GridSpec};
pub use preparation::{prepare_psi1, prepare_psi2, prepare_rho, prepare_rho_r, PreparationParams};
pub use reconstruct::{
    compare_states, fit_hd_curve, fit_rd_power_curve, identifiability_report, reconstruct_covariance, Comparison,
    FitReport, ReconstructOptions, ReconstructionResult, Technique, Verdict,
};
pub use scalar::Real;
pub use state::{canonical_hd_state, Basis, EnergySummary, HDCoefficients, ModeIndex, TwoModeState};

pub type State = TwoModeState<f64>;
pub type Cavity = CavityParams<f64>;
pub type Curve = ScanCurve<f64>;
pub type Locked = LockedScan<f64>;
pub type Report = FitReport<f64>;
pub type Reconstruction = ReconstructionResult<f64>;

pub type State32 = TwoModeState<f32>;
pub type Cavity32 = CavityParams<f32>;
pub type Curve32 = ScanCurve<f32>;
