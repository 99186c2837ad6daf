//! Randomized experiments: scenario sampling, single-channel RMSE sweeps
//! (multipath-free / distorted / corrected), and q-range error CDFs.
//!
//! Determinism contract: every trial seeds its own RNG stream from
//! `(seed, point index, trial index)`, trials may run on any number of
//! worker threads, and reductions always walk results in trial-index order —
//! so identical configs produce bit-identical outputs regardless of
//! parallelism.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    composite_channel_response, los_phase, synthesize_observation, LosAmplitudeMode,
    MultipathProfile, PathComponent, QuadScenario,
};
use crate::error::{Error, Result};
use crate::estimator::{
    correct_phase_difference, estimate_channel_profile, predict_phase_error, EstimatorConfig,
};
use crate::grid::{MeasurementGrid, PerChannel, Sender};
use crate::phase::{measured_phase_difference, wrap_to_pi};
use crate::qrange::{estimate_qrange, QRangeSearchConfig};

/// Sender→receiver distance for the single-channel pipeline (sweeps and
/// `ScenarioKind::SingleChannel` sampling). The value only sets the LOS
/// phase ramp that every reported error is measured against; it cancels out
/// of all RMSE figures.
pub const SINGLE_CHANNEL_DISTANCE_M: f64 = 100.0;

/// Distance distribution for quad geometry sampling, in meters.
const QUAD_DISTANCE_LO_M: f64 = 20.0;
const QUAD_DISTANCE_HI_M: f64 = 120.0;

/// Transmit epochs are drawn from `U(0, this)` seconds for quad scenarios.
const MAX_TRANSMIT_EPOCH_S: f64 = 1e-6;

/// Redraw budget for rejection sampling (quad geometry with a non-positive
/// implied d_AD, or coincident path delays within one profile).
const MAX_REDRAWS: usize = 100;

/// A scalar sampling rule for one scenario parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamDistribution {
    /// Always the same value; consumes no randomness.
    Fixed { value: f64 },
    /// Uniform on `[lo, hi)`; degenerates to a point when `lo == hi`.
    Uniform { lo: f64, hi: f64 },
}

impl ParamDistribution {
    pub fn fixed(value: f64) -> Self {
        Self::Fixed { value }
    }

    pub fn uniform(lo: f64, hi: f64) -> Self {
        Self::Uniform { lo, hi }
    }

    /// Checks bounds are finite and ordered.
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bounds();
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::NonFinite("distribution bounds".into()));
        }
        if lo > hi {
            return Err(Error::InvalidConfig(format!(
                "distribution bounds inverted: lo {lo} > hi {hi}"
            )));
        }
        Ok(())
    }

    /// Smallest and largest values this distribution can produce.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Self::Fixed { value } => (value, value),
            Self::Uniform { lo, hi } => (lo, hi),
        }
    }

    /// Draws one value; `Fixed` consumes no randomness.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Fixed { value } => value,
            Self::Uniform { lo, hi } => {
                if lo == hi {
                    lo
                } else {
                    rng.random_range(lo..hi)
                }
            }
        }
    }
}

/// Which scenario family an experiment samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// One populated channel (B→C) with fixed geometry and zero nuisance
    /// parameters; used by the phase-RMSE sweeps.
    SingleChannel,
    /// All four channels populated, geometry drawn to hit `dq_target`.
    Quad,
}

/// Everything a randomized experiment needs: grid, noise level, trial count,
/// seeding, parameter distributions, and estimator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub grid: MeasurementGrid,
    /// Signal-to-noise ratio in dB (total complex noise power 1/SNR).
    pub snr_db: f64,
    /// Trials per experiment (per sweep point for sweeps).
    pub trials: usize,
    /// Base RNG seed; per-trial streams derive from it.
    pub seed: u64,
    pub alpha_dist: ParamDistribution,
    /// Path delay distribution in seconds.
    pub tau_dist: ParamDistribution,
    pub theta_dist: ParamDistribution,
    /// Reflected paths per populated channel (0 = clean channels).
    pub paths_per_channel: usize,
    pub scenario_kind: ScenarioKind,
    pub estimator_cfg: EstimatorConfig,
    /// Q-range every sampled quad geometry encodes, in meters.
    pub dq_target: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            grid: MeasurementGrid::default(),
            snr_db: 30.0,
            trials: 10_000,
            seed: 0,
            alpha_dist: ParamDistribution::uniform(0.0, 1.0),
            tau_dist: ParamDistribution::uniform(5e-9, 50e-9),
            theta_dist: ParamDistribution::uniform(0.0, TAU),
            paths_per_channel: 1,
            scenario_kind: ScenarioKind::Quad,
            estimator_cfg: EstimatorConfig::default(),
            dq_target: 75.0,
        }
    }
}

impl ExperimentConfig {
    /// Checks the grid, estimator settings, trial count, noise level, and
    /// that the distributions stay inside their physical domains.
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.estimator_cfg.validate()?;
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::NonFinite("snr_db".into()));
        }
        for dist in [&self.alpha_dist, &self.tau_dist, &self.theta_dist] {
            dist.validate()?;
        }
        let (alpha_lo, alpha_hi) = self.alpha_dist.bounds();
        if alpha_lo < 0.0 || alpha_hi > 1.0 {
            return Err(Error::InvalidConfig(format!(
                "alpha_dist must stay within [0, 1], got [{alpha_lo}, {alpha_hi}]"
            )));
        }
        let (tau_lo, _) = self.tau_dist.bounds();
        if tau_lo <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "tau_dist must be strictly positive, got lower bound {tau_lo}"
            )));
        }
        if !self.dq_target.is_finite() {
            return Err(Error::NonFinite("dq_target".into()));
        }
        Ok(())
    }

    /// Linear SNR, `10^(snr_db/10)`.
    pub fn snr_linear(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }
}

/// RNG for one trial: ChaCha8 keyed by the experiment seed, on a stream
/// unique to `(point index, trial index)`.
fn trial_rng(seed: u64, point_index: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((point_index as u64) << 40) | trial as u64);
    rng
}

/// Draws one channel profile: `paths_per_channel` components, each sampling
/// (alpha, tau, theta) in that order. Coincident delays (closer than the
/// profile's distinguishability limit) trigger a full redraw.
fn sample_profile<R: Rng + ?Sized>(cfg: &ExperimentConfig, rng: &mut R) -> Result<MultipathProfile> {
    for _ in 0..MAX_REDRAWS {
        let comps = (0..cfg.paths_per_channel)
            .map(|_| {
                let alpha = cfg.alpha_dist.sample(rng);
                let tau = cfg.tau_dist.sample(rng);
                let theta = cfg.theta_dist.sample(rng);
                PathComponent::new(alpha, tau, theta)
            })
            .collect::<Result<Vec<_>>>()?;
        if let Ok(profile) = MultipathProfile::new(comps) {
            return Ok(profile);
        }
    }
    Err(Error::InvalidConfig(
        "could not draw distinct path delays; a Fixed tau_dist with \
         paths_per_channel > 1 always collides"
            .into(),
    ))
}

/// Samples one scenario.
///
/// `Quad`: draws distances d_AC, d_BC, d_BD ~ U(20 m, 120 m) and sets
/// d_AD = dq_target + d_BD − d_BC + d_AC (redrawing the rare triple whose
/// implied d_AD would be non-positive), then transmit epochs t_a, t_b ~
/// U(0, 1 µs), receiver phases β_C, β_D ~ U(0, 2π), then one profile per
/// channel in AC, AD, BC, BD order.
///
/// `SingleChannel`: fixed 100 m geometry, zero nuisances, and only the B→C
/// profile populated — with all distributions `Fixed` the result is fully
/// deterministic regardless of seed.
pub fn sample_scenario<R: Rng + ?Sized>(
    cfg: &ExperimentConfig,
    rng: &mut R,
) -> Result<QuadScenario> {
    cfg.validate()?;
    match cfg.scenario_kind {
        ScenarioKind::SingleChannel => Ok(QuadScenario {
            distances: PerChannel {
                ac: SINGLE_CHANNEL_DISTANCE_M,
                ad: SINGLE_CHANNEL_DISTANCE_M,
                bc: SINGLE_CHANNEL_DISTANCE_M,
                bd: SINGLE_CHANNEL_DISTANCE_M,
            },
            t_a: 0.0,
            t_b: 0.0,
            beta_c: 0.0,
            beta_d: 0.0,
            profiles: PerChannel {
                ac: MultipathProfile::empty(),
                ad: MultipathProfile::empty(),
                bc: sample_profile(cfg, rng)?,
                bd: MultipathProfile::empty(),
            },
            los_amplitude_mode: LosAmplitudeMode::Normalized,
        }),
        ScenarioKind::Quad => {
            let mut geometry = None;
            for _ in 0..MAX_REDRAWS {
                let ac = rng.random_range(QUAD_DISTANCE_LO_M..QUAD_DISTANCE_HI_M);
                let bc = rng.random_range(QUAD_DISTANCE_LO_M..QUAD_DISTANCE_HI_M);
                let bd = rng.random_range(QUAD_DISTANCE_LO_M..QUAD_DISTANCE_HI_M);
                let ad = cfg.dq_target + bd - bc + ac;
                if ad > 0.0 {
                    geometry = Some(PerChannel { ac, ad, bc, bd });
                    break;
                }
            }
            let distances = geometry.ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "dq_target {} is unreachable with U(20, 120) m distances",
                    cfg.dq_target
                ))
            })?;
            let t_a = rng.random_range(0.0..MAX_TRANSMIT_EPOCH_S);
            let t_b = rng.random_range(0.0..MAX_TRANSMIT_EPOCH_S);
            let beta_c = rng.random_range(0.0..TAU);
            let beta_d = rng.random_range(0.0..TAU);
            Ok(QuadScenario {
                distances,
                t_a,
                t_b,
                beta_c,
                beta_d,
                profiles: PerChannel {
                    ac: sample_profile(cfg, rng)?,
                    ad: sample_profile(cfg, rng)?,
                    bc: sample_profile(cfg, rng)?,
                    bd: sample_profile(cfg, rng)?,
                },
                los_amplitude_mode: LosAmplitudeMode::Normalized,
            })
        }
    }
}

/// Root-mean-square of the wrapped difference between two phase series.
/// Immune to whole-turn offsets up to the rounding of the inputs themselves.
pub fn wrapped_rmse(estimates: &[f64], truth: &[f64]) -> Result<f64> {
    if estimates.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            got: estimates.len(),
        });
    }
    if estimates.is_empty() {
        return Err(Error::TooFewSamples("wrapped_rmse of empty series".into()));
    }
    let sum: f64 = estimates
        .iter()
        .zip(truth)
        .map(|(e, t)| wrap_to_pi(e - t).powi(2))
        .sum();
    Ok((sum / estimates.len() as f64).sqrt())
}

/// Which single-channel parameter a sweep holds fixed per point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Reflection coefficient α.
    Alpha,
    /// Path delay τ (sweep points in seconds).
    Tau,
}

/// Phase RMSE curves for one sweep: one row of three RMSE figures per
/// sweep value, each pooled over `trials_per_point` trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub sweep_values: Vec<f64>,
    /// Noise-only floor: multipath removed, same noise draws.
    pub rmse_free: Vec<f64>,
    /// Uncorrected measured phase.
    pub rmse_distorted: Vec<f64>,
    /// Measured phase minus the estimated multipath phase error.
    pub rmse_corrected: Vec<f64>,
    pub trials_per_point: usize,
}

/// Squared-error sums for one sweep trial: (free, distorted, corrected).
type TrialSquares = (f64, f64, f64);

fn sweep_trial(
    cfg: &ExperimentConfig,
    freqs: &[f64],
    phibar: &[f64],
    roll: &[f64],
    sigma: f64,
    point_index: usize,
    trial: usize,
) -> Result<TrialSquares> {
    let mut rng = trial_rng(cfg.seed, point_index, trial);
    let profile = sample_profile(cfg, &mut rng)?;
    let k = freqs.len();

    // One noise vector per trial, shared by the free and distorted scenarios
    // so their RMSE difference isolates the multipath effect.
    let mut measured_phase = Vec::with_capacity(k);
    let mut amplitudes = Vec::with_capacity(k);
    let mut se_free = 0.0;
    let mut se_distorted = 0.0;
    for i in 0..k {
        let noise_re: f64 = rng.sample(StandardNormal);
        let noise_im: f64 = rng.sample(StandardNormal);
        let noise = Complex64::new(sigma * noise_re, sigma * noise_im);
        let (gain, eps) = composite_channel_response(&profile, freqs[i]);
        let distorted = Complex64::from_polar(roll[i] * gain, phibar[i] + eps) + noise;
        let free = Complex64::from_polar(roll[i], phibar[i]) + noise;
        measured_phase.push(distorted.arg());
        amplitudes.push(distorted.norm());
        se_free += wrap_to_pi(free.arg() - phibar[i]).powi(2);
        se_distorted += wrap_to_pi(distorted.arg() - phibar[i]).powi(2);
    }

    let estimate = estimate_channel_profile(&amplitudes, &cfg.grid, Sender::B, &cfg.estimator_cfg)?;
    let mut se_corrected = 0.0;
    for i in 0..k {
        let eps_hat = predict_phase_error(&estimate, freqs[i]);
        se_corrected += wrap_to_pi(measured_phase[i] - eps_hat - phibar[i]).powi(2);
    }
    Ok((se_free, se_distorted, se_corrected))
}

/// Runs the single-channel RMSE sweep: at each point the swept parameter is
/// fixed, the others are drawn per the config, and three wrapped-RMSE
/// figures (multipath-free / distorted / corrected, against the LOS truth)
/// are pooled over all trials.
pub fn run_phase_sweep(
    cfg: &ExperimentConfig,
    sweep: SweepParam,
    points: &[f64],
) -> Result<SweepResult> {
    cfg.validate()?;
    if points.is_empty() {
        return Err(Error::InvalidConfig("sweep needs at least one point".into()));
    }
    for &p in points {
        let valid = match sweep {
            SweepParam::Alpha => (0.0..=1.0).contains(&p),
            SweepParam::Tau => p.is_finite() && p > 0.0,
        };
        if !valid {
            return Err(Error::InvalidParameter(format!(
                "sweep point {p} outside the {sweep:?} domain"
            )));
        }
    }

    let grid = &cfg.grid;
    let freqs = grid.sender_freqs(Sender::B);
    let phibar = (0..grid.num_freqs)
        .map(|k| los_phase(grid, Sender::B, k, 0.0, SINGLE_CHANNEL_DISTANCE_M))
        .collect::<Result<Vec<_>>>()?;
    let roll: Vec<f64> = freqs.iter().map(|&f| freqs[0] / f).collect();
    let sigma = (0.5 / cfg.snr_linear()).sqrt();
    let samples_per_point = (cfg.trials * grid.num_freqs) as f64;

    let mut result = SweepResult {
        sweep_values: points.to_vec(),
        rmse_free: Vec::with_capacity(points.len()),
        rmse_distorted: Vec::with_capacity(points.len()),
        rmse_corrected: Vec::with_capacity(points.len()),
        trials_per_point: cfg.trials,
    };
    for (point_index, &point) in points.iter().enumerate() {
        let mut point_cfg = cfg.clone();
        match sweep {
            SweepParam::Alpha => point_cfg.alpha_dist = ParamDistribution::fixed(point),
            SweepParam::Tau => point_cfg.tau_dist = ParamDistribution::fixed(point),
        }
        // Parallel trials, reduced afterwards in trial-index order.
        let squares: Vec<TrialSquares> = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| sweep_trial(&point_cfg, &freqs, &phibar, &roll, sigma, point_index, trial))
            .collect::<Result<Vec<_>>>()?;
        let (mut se_f, mut se_d, mut se_c) = (0.0, 0.0, 0.0);
        for (f, d, c) in squares {
            se_f += f;
            se_d += d;
            se_c += c;
        }
        result.rmse_free.push((se_f / samples_per_point).sqrt());
        result.rmse_distorted.push((se_d / samples_per_point).sqrt());
        result.rmse_corrected.push((se_c / samples_per_point).sqrt());
    }
    Ok(result)
}

/// Sorted q-range error magnitudes with their 50th/95th percentiles, for the
/// uncorrected and multipath-corrected estimates of the same trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QRangeCdf {
    /// |d_hat − dq_target| per trial from the raw phase difference, sorted.
    pub errors_distorted: Vec<f64>,
    /// Same trials after per-channel multipath correction, sorted.
    pub errors_corrected: Vec<f64>,
    pub median_distorted: f64,
    pub p95_distorted: f64,
    pub median_corrected: f64,
    pub p95_corrected: f64,
}

fn cdf_trial(cfg: &ExperimentConfig, search: &QRangeSearchConfig, trial: usize) -> Result<(f64, f64)> {
    let mut rng = trial_rng(cfg.seed, 0, trial);
    let scenario = sample_scenario(cfg, &mut rng)?;
    let observation =
        synthesize_observation(&scenario, &cfg.grid, cfg.snr_linear(), &mut rng)?;
    let measured = measured_phase_difference(&observation);
    let (d_raw, _) = estimate_qrange(&measured, &cfg.grid, search)?;

    let estimates = PerChannel::try_from_fn(|id| {
        estimate_channel_profile(
            &observation.amplitudes(id),
            &cfg.grid,
            id.sender(),
            &cfg.estimator_cfg,
        )
    })?;
    let corrected = correct_phase_difference(&measured, &estimates, &cfg.grid)?;
    let (d_corr, _) = estimate_qrange(&corrected, &cfg.grid, search)?;
    Ok((
        (d_raw - cfg.dq_target).abs(),
        (d_corr - cfg.dq_target).abs(),
    ))
}

/// Runs the quad-scenario q-range benchmark: per trial, estimate the q-range
/// from the raw and from the multipath-corrected phase difference, and
/// report both error distributions.
pub fn run_qrange_cdf(cfg: &ExperimentConfig) -> Result<QRangeCdf> {
    cfg.validate()?;
    if cfg.scenario_kind != ScenarioKind::Quad {
        return Err(Error::InvalidConfig(
            "q-range CDF requires scenario_kind = quad".into(),
        ));
    }
    let search = QRangeSearchConfig::for_grid(&cfg.grid);
    let errors: Vec<(f64, f64)> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| cdf_trial(cfg, &search, trial))
        .collect::<Result<Vec<_>>>()?;

    let mut distorted: Vec<f64> = errors.iter().map(|e| e.0).collect();
    let mut corrected: Vec<f64> = errors.iter().map(|e| e.1).collect();
    distorted.sort_by(f64::total_cmp);
    corrected.sort_by(f64::total_cmp);
    Ok(QRangeCdf {
        median_distorted: percentile(&distorted, 50.0)?,
        p95_distorted: percentile(&distorted, 95.0)?,
        median_corrected: percentile(&corrected, 50.0)?,
        p95_corrected: percentile(&corrected, 95.0)?,
        errors_distorted: distorted,
        errors_corrected: corrected,
    })
}

/// Percentile of an ascending-sorted array under the linear-interpolation
/// convention: rank `p/100·(n−1)`, interpolating between the neighbours.
pub fn percentile(sorted: &[f64], p: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::TooFewSamples("percentile of empty array".into()));
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "percentile must be in [0, 100], got {p}"
        )));
    }
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    if lo + 1 < sorted.len() {
        Ok(sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]))
    } else {
        Ok(sorted[sorted.len() - 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    /// Wrap immunity is limited by the rounding of `truth + 2π` itself.
    const WHOLE_TURN_TOL: f64 = 1e-12;

    fn quick_cfg() -> ExperimentConfig {
        ExperimentConfig {
            trials: 25,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn percentile_matches_the_linear_interpolation_fixture() {
        let arr: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_relative_eq!(percentile(&arr, 95.0).unwrap(), 95.05, epsilon = 1e-12);
        assert_eq!(percentile(&arr, 0.0).unwrap(), 1.0);
        assert_eq!(percentile(&arr, 100.0).unwrap(), 100.0);
        assert_relative_eq!(
            percentile(&[1.0, 2.0, 3.0, 4.0], 50.0).unwrap(),
            2.5,
            epsilon = 1e-12
        );
        assert!(percentile(&[], 50.0).is_err());
        assert!(percentile(&arr, 101.0).is_err());
    }

    #[test]
    fn wrapped_rmse_handles_offsets_and_whole_turns() {
        let truth: Vec<f64> = (0..16).map(|k| 0.37 * k as f64 - 2.0).collect();
        assert_eq!(wrapped_rmse(&truth, &truth).unwrap(), 0.0);

        let offset: Vec<f64> = truth.iter().map(|t| t + PI).collect();
        assert_relative_eq!(wrapped_rmse(&offset, &truth).unwrap(), PI, epsilon = 1e-9);

        let turned: Vec<f64> = truth.iter().map(|t| t + TAU).collect();
        assert!(wrapped_rmse(&turned, &truth).unwrap() <= WHOLE_TURN_TOL);

        assert!(wrapped_rmse(&truth[..3], &truth).is_err());
    }

    #[test]
    fn fixed_distributions_make_single_channel_scenarios_seed_independent() {
        let cfg = ExperimentConfig {
            alpha_dist: ParamDistribution::fixed(0.4),
            tau_dist: ParamDistribution::fixed(25e-9),
            theta_dist: ParamDistribution::fixed(1.0),
            scenario_kind: ScenarioKind::SingleChannel,
            ..ExperimentConfig::default()
        };
        let a = sample_scenario(&cfg, &mut trial_rng(1, 0, 0)).unwrap();
        let b = sample_scenario(&cfg, &mut trial_rng(99, 7, 3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.profiles.bc.len(), 1);
        assert!(a.profiles.ac.is_empty());
    }

    #[test]
    fn uniform_sampling_has_the_right_mean() {
        let dist = ParamDistribution::uniform(0.0, 1.0);
        let mut rng = trial_rng(42, 0, 0);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| dist.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
        // Degenerate interval and Fixed never consult the RNG.
        assert_eq!(ParamDistribution::uniform(3.0, 3.0).sample(&mut rng), 3.0);
        assert_eq!(ParamDistribution::fixed(-2.5).sample(&mut rng), -2.5);
    }

    #[test]
    fn quad_scenarios_hit_the_target_qrange() {
        let cfg = ExperimentConfig::default();
        let mut rng = trial_rng(7, 0, 0);
        for _ in 0..200 {
            let s = sample_scenario(&cfg, &mut rng).unwrap();
            assert!((s.dq() - 75.0).abs() <= 1e-9, "dq {}", s.dq());
            for d in [s.distances.ac, s.distances.bc, s.distances.bd] {
                assert!((QUAD_DISTANCE_LO_M..QUAD_DISTANCE_HI_M).contains(&d));
            }
            assert!(s.distances.ad > 0.0);
            assert_eq!(s.profiles.ad.len(), 1);
        }
    }

    #[test]
    fn config_validation_rejects_out_of_domain_distributions() {
        let mut cfg = ExperimentConfig::default();
        cfg.alpha_dist = ParamDistribution::uniform(0.0, 1.5);
        assert!(cfg.validate().is_err());
        cfg = ExperimentConfig::default();
        cfg.tau_dist = ParamDistribution::fixed(0.0);
        assert!(cfg.validate().is_err());
        cfg = ExperimentConfig::default();
        cfg.trials = 0;
        assert!(cfg.validate().is_err());
        cfg = ExperimentConfig::default();
        cfg.snr_db = f64::INFINITY;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn tau_sweep_with_multiple_paths_cannot_draw_distinct_delays() {
        let cfg = ExperimentConfig {
            trials: 2,
            paths_per_channel: 2,
            ..ExperimentConfig::default()
        };
        let err = run_phase_sweep(&cfg, SweepParam::Tau, &[20e-9]).unwrap_err();
        assert!(err.to_string().contains("distinct path delays"), "{err}");
    }

    #[test]
    fn sweep_rejects_bad_points() {
        let cfg = quick_cfg();
        assert!(run_phase_sweep(&cfg, SweepParam::Alpha, &[]).is_err());
        assert!(run_phase_sweep(&cfg, SweepParam::Alpha, &[1.2]).is_err());
        assert!(run_phase_sweep(&cfg, SweepParam::Tau, &[0.0]).is_err());
    }

    #[test]
    fn alpha_zero_sweep_point_degenerates_to_the_noise_floor() {
        let result = run_phase_sweep(&quick_cfg(), SweepParam::Alpha, &[0.0]).unwrap();
        // A zero-amplitude reflection leaves the phasors bit-identical, so
        // the distorted series IS the free series.
        assert_eq!(result.rmse_distorted[0], result.rmse_free[0]);
        // Correction may add only what spurious-component pruning lets
        // through (deterministic under the fixed seed).
        assert!(
            result.rmse_corrected[0] <= 1.5 * result.rmse_free[0],
            "corrected {} vs free {}",
            result.rmse_corrected[0],
            result.rmse_free[0]
        );
    }

    #[test]
    fn sweep_results_are_identical_across_thread_counts() {
        let cfg = ExperimentConfig {
            trials: 12,
            ..ExperimentConfig::default()
        };
        let run = || {
            run_phase_sweep(&cfg, SweepParam::Tau, &[20e-9, 35e-9]).unwrap()
        };
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(run);
        let multi = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap()
            .install(run);
        assert_eq!(single, multi);
    }

    #[test]
    fn qrange_cdf_requires_quad_scenarios_and_sorts_its_errors() {
        let mut cfg = ExperimentConfig {
            trials: 6,
            snr_db: 60.0,
            alpha_dist: ParamDistribution::fixed(0.2),
            tau_dist: ParamDistribution::fixed(30e-9),
            ..ExperimentConfig::default()
        };
        let cdf = run_qrange_cdf(&cfg).unwrap();
        assert_eq!(cdf.errors_distorted.len(), cfg.trials);
        assert_eq!(cdf.errors_corrected.len(), cfg.trials);
        assert!(cdf.errors_distorted.windows(2).all(|w| w[0] <= w[1]));
        assert!(cdf.errors_corrected.windows(2).all(|w| w[0] <= w[1]));
        assert!(cdf.errors_corrected.iter().all(|e| e.is_finite() && *e >= 0.0));
        // At 60 dB the corrected estimate sits within centimeters.
        assert!(cdf.median_corrected <= 0.05, "median {}", cdf.median_corrected);

        cfg.scenario_kind = ScenarioKind::SingleChannel;
        assert!(run_qrange_cdf(&cfg).is_err());
    }
}
