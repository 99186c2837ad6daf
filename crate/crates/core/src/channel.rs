//! Channel model: line-of-sight propagation, multipath profiles, the
//! composite (distorted) channel response, and phasor-level synthesis of a
//! four-channel ranging observation.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ChannelId, MeasurementGrid, PerChannel, Sender, SPEED_OF_LIGHT};
use crate::phase::wrap_to_pi;

/// Two path components closer than this in delay are considered duplicates.
pub const MIN_TAU_DISTINCTION: f64 = 1e-12;

/// One reflected path relative to the direct path: amplitude ratio `alpha`,
/// excess delay `tau` (seconds), reflection phase `theta` (radians, stored
/// normalized to `[0, 2π)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathComponent {
    pub alpha: f64,
    pub tau: f64,
    pub theta: f64,
}

impl PathComponent {
    /// Validating constructor for physical (synthesis-side) components:
    /// `0 ≤ alpha ≤ 1`, `tau > 0`, finite `theta` (normalized into `[0, 2π)`).
    ///
    /// Estimator outputs are built directly from fit coefficients and may
    /// carry `alpha` slightly above 1 under heavy noise; this constructor is
    /// for channels being simulated, where the direct path dominates.
    pub fn new(alpha: f64, tau: f64, theta: f64) -> Result<Self> {
        if !(alpha.is_finite() && (0.0..=1.0).contains(&alpha)) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be in [0, 1], got {alpha}"
            )));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tau must be finite and > 0, got {tau}"
            )));
        }
        if !theta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "theta must be finite, got {theta}"
            )));
        }
        Ok(PathComponent {
            alpha,
            tau,
            theta: theta.rem_euclid(std::f64::consts::TAU),
        })
    }
}

/// An ordered set of reflected paths for one channel (possibly empty).
/// Components are stored sorted by ascending delay; no two delays coincide
/// within [`MIN_TAU_DISTINCTION`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MultipathProfile {
    components: Vec<PathComponent>,
}

impl MultipathProfile {
    /// A profile with no reflected paths (pure line of sight).
    pub fn empty() -> Self {
        MultipathProfile::default()
    }

    /// Builds a profile, sorting by delay and rejecting near-duplicate delays.
    pub fn new(mut components: Vec<PathComponent>) -> Result<Self> {
        components.sort_by(|a, b| a.tau.total_cmp(&b.tau));
        for pair in components.windows(2) {
            if pair[1].tau - pair[0].tau < MIN_TAU_DISTINCTION {
                return Err(Error::InvalidParameter(format!(
                    "path delays {} and {} coincide within {} s",
                    pair[0].tau, pair[1].tau, MIN_TAU_DISTINCTION
                )));
            }
        }
        Ok(MultipathProfile { components })
    }

    /// The components, sorted by ascending delay.
    pub fn components(&self) -> &[PathComponent] {
        &self.components
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }
}

/// Phase of the undistorted direct path at step `k`:
/// `wrap(−2π·f_X(k)·(t_x + d_xy/c))`.
pub fn los_phase(
    grid: &MeasurementGrid,
    sender: Sender,
    k: usize,
    t_x: f64,
    d_xy: f64,
) -> Result<f64> {
    grid.check_index(k)?;
    if !(d_xy.is_finite() && d_xy > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "distance must be finite and > 0, got {d_xy}"
        )));
    }
    if !t_x.is_finite() {
        return Err(Error::NonFinite("transmit epoch".into()));
    }
    let f = grid.freq(sender, k);
    Ok(wrap_to_pi(
        -std::f64::consts::TAU * f * (t_x + d_xy / SPEED_OF_LIGHT),
    ))
}

/// Free-space LOS amplitude `c·sqrt(power·gain)/(4π·f·d)`.
pub fn free_space_amplitude(power: f64, gain: f64, f: f64, d: f64) -> Result<f64> {
    for (name, v) in [("power", power), ("gain", gain), ("f", f), ("d", d)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "{name} must be finite and > 0, got {v}"
            )));
        }
    }
    Ok(SPEED_OF_LIGHT * (power * gain).sqrt() / (4.0 * std::f64::consts::PI * f * d))
}

/// Amplitude gain and phase error of the composite (LOS + reflections)
/// channel at frequency `f`, with the LOS amplitude factored out:
///
/// the composite signal is `1 + Σ_i α_i·exp(−j·ψ_i)` with
/// `ψ_i = 2π·τ_i·f + θ_i`; returns `(|·|, arg(·))`, the phase in `(−π, π]`.
pub fn composite_channel_response(profile: &MultipathProfile, f: f64) -> (f64, f64) {
    let mut in_phase = 1.0;
    let mut quadrature = 0.0;
    for c in profile.components() {
        let psi = std::f64::consts::TAU * c.tau * f + c.theta;
        in_phase += c.alpha * psi.cos();
        quadrature += c.alpha * psi.sin();
    }
    let gain = in_phase.hypot(quadrature);
    let phase_error = wrap_to_pi(-f64::atan2(quadrature, in_phase));
    (gain, phase_error)
}

/// Small-`alpha` approximation of the composite amplitude gain:
/// `1 + Σ_i α_i·cos(2π·τ_i·f + θ_i)`.
pub fn approx_amplitude_gain(profile: &MultipathProfile, f: f64) -> f64 {
    let mut gain = 1.0;
    for c in profile.components() {
        gain += c.alpha * (std::f64::consts::TAU * c.tau * f + c.theta).cos();
    }
    gain
}

/// How the LOS amplitude of each channel varies across the band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LosAmplitudeMode {
    /// Unit LOS amplitude at step 0 with the free-space `1/f` roll-off across
    /// the band (`Ā(k) = f_X(0)/f_X(k)`). The roll-off matters: the
    /// estimator's `f(k)/f(0)` amplitude weighting is designed to cancel it,
    /// so an undistorted channel weights to an exactly flat series.
    Normalized,
    /// Physical free-space amplitude from transmit power and antenna gain.
    FreeSpace { power: f64, gain: f64 },
}

/// Geometry, nuisance parameters, and per-channel multipath for one
/// four-channel ranging quad (senders A, B; receivers C, D).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadScenario {
    /// Sender→receiver distances in meters.
    pub distances: PerChannel<f64>,
    /// Transmit epochs in seconds (unknown to estimators; must cancel).
    pub t_a: f64,
    pub t_b: f64,
    /// Receiver down-conversion phase shifts in radians (must cancel).
    pub beta_c: f64,
    pub beta_d: f64,
    /// Reflected-path profile per channel.
    pub profiles: PerChannel<MultipathProfile>,
    pub los_amplitude_mode: LosAmplitudeMode,
}

impl QuadScenario {
    /// Checks distances and nuisance parameters.
    pub fn validate(&self) -> Result<()> {
        for id in ChannelId::ALL {
            let d = *self.distances.get(id);
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "distance for {id:?} must be finite and > 0, got {d}"
                )));
            }
        }
        for (name, v) in [
            ("t_a", self.t_a),
            ("t_b", self.t_b),
            ("beta_c", self.beta_c),
            ("beta_d", self.beta_d),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFinite(name.into()));
            }
        }
        Ok(())
    }

    /// The q-range `d_q = d_AD − d_BD + d_BC − d_AC` this geometry encodes.
    pub fn dq(&self) -> f64 {
        self.distances.ad - self.distances.bd + self.distances.bc - self.distances.ac
    }

    /// LOS amplitude of one channel at step `k` under the scenario's mode.
    pub fn los_amplitude(&self, grid: &MeasurementGrid, id: ChannelId, k: usize) -> Result<f64> {
        grid.check_index(k)?;
        let sender = id.sender();
        match self.los_amplitude_mode {
            LosAmplitudeMode::Normalized => Ok(grid.freq(sender, 0) / grid.freq(sender, k)),
            LosAmplitudeMode::FreeSpace { power, gain } => {
                free_space_amplitude(power, gain, grid.freq(sender, k), *self.distances.get(id))
            }
        }
    }

    /// A multipath-free copy (same geometry and nuisances, no reflections).
    pub fn without_multipath(&self) -> QuadScenario {
        QuadScenario {
            profiles: PerChannel::from_fn(|_| MultipathProfile::empty()),
            ..self.clone()
        }
    }
}

/// K complex phasors per channel plus the grid they were measured on.
/// Amplitude and phase views are derived from the stored phasors.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadObservation {
    grid: MeasurementGrid,
    phasors: PerChannel<Vec<Complex64>>,
}

impl QuadObservation {
    /// Wraps per-channel phasor series, checking all lengths against the grid.
    pub fn new(grid: MeasurementGrid, phasors: PerChannel<Vec<Complex64>>) -> Result<Self> {
        for id in ChannelId::ALL {
            grid.check_len(phasors.get(id).len())?;
        }
        Ok(QuadObservation { grid, phasors })
    }

    pub fn grid(&self) -> &MeasurementGrid {
        &self.grid
    }

    pub fn phasors(&self, id: ChannelId) -> &[Complex64] {
        self.phasors.get(id)
    }

    /// Amplitude view `|γ(k)|` of one channel.
    pub fn amplitudes(&self, id: ChannelId) -> Vec<f64> {
        self.phasors.get(id).iter().map(|g| g.norm()).collect()
    }

    /// Phase view `arg(γ(k))` of one channel.
    pub fn phases(&self, id: ChannelId) -> Vec<f64> {
        self.phasors.get(id).iter().map(|g| g.arg()).collect()
    }
}

/// Noiseless composite phasor of one channel at step `k`:
/// `Ā·gain·exp(j(φ̄ + ε − β_Y))`.
fn noiseless_phasor(
    scenario: &QuadScenario,
    grid: &MeasurementGrid,
    id: ChannelId,
    k: usize,
) -> Result<Complex64> {
    let sender = id.sender();
    let t_x = match sender {
        Sender::A => scenario.t_a,
        Sender::B => scenario.t_b,
    };
    let beta = match id.receiver() {
        crate::grid::Receiver::C => scenario.beta_c,
        crate::grid::Receiver::D => scenario.beta_d,
    };
    let los = los_phase(grid, sender, k, t_x, *scenario.distances.get(id))?;
    let (gain, eps) = composite_channel_response(scenario.profiles.get(id), grid.freq(sender, k));
    let amp = scenario.los_amplitude(grid, id, k)? * gain;
    Ok(Complex64::from_polar(amp, los + eps - beta))
}

/// Synthesizes the four-channel observation at the given linear SNR.
///
/// Noise is zero-mean circular complex Gaussian with total variance
/// `σ² = 1/snr_linear` (σ²/2 per quadrature), independent across channels and
/// steps, added to the composite phasor. `snr_linear = ∞` disables noise and
/// draws nothing from `rng`. Draw order is fixed — channels AC, AD, BC, BD;
/// within a channel steps ascending; per step the real then the imaginary
/// normal deviate — so equal seeds give equal observations.
pub fn synthesize_observation<R: Rng + ?Sized>(
    scenario: &QuadScenario,
    grid: &MeasurementGrid,
    snr_linear: f64,
    rng: &mut R,
) -> Result<QuadObservation> {
    scenario.validate()?;
    if !(snr_linear > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "snr_linear must be > 0, got {snr_linear}"
        )));
    }
    let sigma_q = if snr_linear.is_finite() {
        (0.5 / snr_linear).sqrt()
    } else {
        0.0
    };
    let phasors = PerChannel::try_from_fn(|id| {
        (0..grid.num_freqs())
            .map(|k| {
                let mut g = noiseless_phasor(scenario, grid, id, k)?;
                if sigma_q > 0.0 {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    g += Complex64::new(sigma_q * re, sigma_q * im);
                }
                Ok(g)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    QuadObservation::new(*grid, phasors)
}
