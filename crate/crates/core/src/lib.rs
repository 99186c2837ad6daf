//! Simulation library for multipath error correction in radio-interferometric
//! ranging.
//!
//! Two senders (A, B) emit close-spaced tones that two receivers (C, D)
//! observe across a stepped frequency grid; the four-channel phase
//! difference encodes the q-range `d_AD − d_BD + d_BC − d_AC`. Reflected
//! paths distort each channel's phase, and — because the same reflections
//! also shape the amplitude-vs-frequency curve — the distortion can be
//! estimated from amplitude data alone and subtracted.
//!
//! The crate is organized around that pipeline:
//!
//! * [`grid`] — the stepped two-tone measurement grid and channel naming.
//! * [`channel`] — LOS phase/amplitude models, multipath profiles, and
//!   noisy quad-observation synthesis.
//! * [`phase`] — phase wrapping and the four-channel phase difference.
//! * [`estimator`] — per-channel multipath profile estimation from
//!   amplitudes, phase-error prediction, and correction.
//! * [`qrange`] — q-range recovery from a wrapped phase-difference series.
//! * [`montecarlo`] — randomized RMSE sweeps and q-range error CDFs with
//!   deterministic, thread-count-independent seeding.
//! * [`report`] — CSV/JSON emitters, atomic writes, and run manifests.
//!
//! Everything is deterministic given a seed: estimators contain no
//! randomness, and experiment trials each derive their own RNG stream.

pub mod channel;
pub mod error;
pub mod estimator;
pub mod grid;
pub mod montecarlo;
pub mod phase;
pub mod qrange;
pub mod report;

pub use channel::{
    composite_channel_response, free_space_amplitude, los_phase, synthesize_observation,
    LosAmplitudeMode, MultipathProfile, PathComponent, QuadObservation, QuadScenario,
};
pub use error::{Error, Result};
pub use estimator::{
    correct_phase_difference, estimate_channel_profile, predict_phase_error, ChannelEstimate,
    EstimatorConfig,
};
pub use grid::{ChannelId, MeasurementGrid, PerChannel, Receiver, Sender, SPEED_OF_LIGHT};
pub use montecarlo::{
    percentile, run_phase_sweep, run_qrange_cdf, sample_scenario, wrapped_rmse, ExperimentConfig,
    ParamDistribution, QRangeCdf, ScenarioKind, SweepParam, SweepResult,
};
pub use phase::{
    measured_phase_difference, receiver_phase_offset, true_phase_difference, wrap_to_pi,
};
pub use qrange::{estimate_qrange, qrange_phase_model, qrange_score, QRangeSearchConfig};
pub use report::RunManifest;
