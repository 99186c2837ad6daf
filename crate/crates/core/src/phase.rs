//! Phase extraction: the wrap convention, per-receiver tone offsets, and the
//! four-channel phase difference that carries the q-range.

use std::f64::consts::{PI, TAU};

use crate::channel::{los_phase, QuadObservation, QuadScenario};
use crate::error::Result;
use crate::grid::{ChannelId, MeasurementGrid, Receiver, Sender};

/// Wraps an angle to `(−π, π]`, differing from the input by a multiple of 2π.
///
/// Exactly −π maps to +π. Non-finite inputs propagate as NaN.
pub fn wrap_to_pi(angle: f64) -> f64 {
    let w = angle.rem_euclid(TAU); // [0, 2π), NaN for non-finite input
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Phase offset between the two senders' tones seen at one receiver:
/// `φ_Y(k) = wrap(arg(γ_AY(k)) − arg(γ_BY(k)))`.
///
/// The receiver's own down-conversion phase `β_Y` enters both arguments
/// identically, so it cancels here (to floating-point precision).
pub fn receiver_phase_offset(obs: &QuadObservation, receiver: Receiver) -> Vec<f64> {
    let (upper, lower) = match receiver {
        Receiver::C => (ChannelId::Ac, ChannelId::Bc),
        Receiver::D => (ChannelId::Ad, ChannelId::Bd),
    };
    obs.phasors(upper)
        .iter()
        .zip(obs.phasors(lower))
        .map(|(a, b)| wrap_to_pi(a.arg() - b.arg()))
        .collect()
}

/// The measured four-channel phase difference
/// `Δφ(k) = wrap(φ_C(k) − φ_D(k)) = wrap(φ_AC − φ_BC − φ_AD + φ_BD)`.
///
/// Transmit epochs and receiver phases all cancel in this combination.
pub fn measured_phase_difference(obs: &QuadObservation) -> Vec<f64> {
    let c = receiver_phase_offset(obs, Receiver::C);
    let d = receiver_phase_offset(obs, Receiver::D);
    c.iter()
        .zip(&d)
        .map(|(pc, pd)| wrap_to_pi(pc - pd))
        .collect()
}

/// LOS-only oracle for the phase difference:
/// `Δφ̄(k) = wrap(φ̄_AC − φ̄_BC − φ̄_AD + φ̄_BD)`.
///
/// With noise and multipath absent the measured series equals this one (to
/// floating-point precision). Its deviation from the single-frequency model
/// `2π·f_center(k)·d_q/c` is the tone-gap error term
/// `π·tone_gap·(d_AD − d_AC − d_BC + d_BD)/c`, a few times 1e−5 rad at
/// default scales.
pub fn true_phase_difference(scenario: &QuadScenario, grid: &MeasurementGrid) -> Result<Vec<f64>> {
    scenario.validate()?;
    (0..grid.num_freqs())
        .map(|k| {
            let ac = los_phase(grid, Sender::A, k, scenario.t_a, scenario.distances.ac)?;
            let bc = los_phase(grid, Sender::B, k, scenario.t_b, scenario.distances.bc)?;
            let ad = los_phase(grid, Sender::A, k, scenario.t_a, scenario.distances.ad)?;
            let bd = los_phase(grid, Sender::B, k, scenario.t_b, scenario.distances.bd)?;
            Ok(wrap_to_pi(ac - bc - ad + bd))
        })
        .collect()
}
