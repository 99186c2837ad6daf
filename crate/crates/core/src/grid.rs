//! Measurement-frequency bookkeeping: the two-sender tone ladder that every
//! other module indexes into.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s (exact by definition).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Transmitting node. Sender `A` runs `tone_gap` above sender `B` at every step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sender {
    A,
    B,
}

/// Receiving node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Receiver {
    C,
    D,
}

/// One of the four sender→receiver channels in a ranging quad.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelId {
    Ac,
    Ad,
    Bc,
    Bd,
}

impl ChannelId {
    /// All four channels in canonical order (AC, AD, BC, BD).
    pub const ALL: [ChannelId; 4] = [ChannelId::Ac, ChannelId::Ad, ChannelId::Bc, ChannelId::Bd];

    /// The transmitting side of this channel.
    pub fn sender(self) -> Sender {
        match self {
            ChannelId::Ac | ChannelId::Ad => Sender::A,
            ChannelId::Bc | ChannelId::Bd => Sender::B,
        }
    }

    /// The receiving side of this channel.
    pub fn receiver(self) -> Receiver {
        match self {
            ChannelId::Ac | ChannelId::Bc => Receiver::C,
            ChannelId::Ad | ChannelId::Bd => Receiver::D,
        }
    }
}

/// A value per channel, addressed by [`ChannelId`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PerChannel<T> {
    pub ac: T,
    pub ad: T,
    pub bc: T,
    pub bd: T,
}

impl<T> PerChannel<T> {
    /// Builds a value for every channel from a closure.
    pub fn from_fn(mut f: impl FnMut(ChannelId) -> T) -> Self {
        PerChannel {
            ac: f(ChannelId::Ac),
            ad: f(ChannelId::Ad),
            bc: f(ChannelId::Bc),
            bd: f(ChannelId::Bd),
        }
    }

    /// Fallible variant of [`PerChannel::from_fn`].
    pub fn try_from_fn(mut f: impl FnMut(ChannelId) -> Result<T>) -> Result<Self> {
        Ok(PerChannel {
            ac: f(ChannelId::Ac)?,
            ad: f(ChannelId::Ad)?,
            bc: f(ChannelId::Bc)?,
            bd: f(ChannelId::Bd)?,
        })
    }

    /// Borrow the entry for one channel.
    pub fn get(&self, id: ChannelId) -> &T {
        match id {
            ChannelId::Ac => &self.ac,
            ChannelId::Ad => &self.ad,
            ChannelId::Bc => &self.bc,
            ChannelId::Bd => &self.bd,
        }
    }

    /// Apply a function to every entry, preserving channel order.
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> PerChannel<U> {
        PerChannel {
            ac: f(&self.ac),
            ad: f(&self.ad),
            bc: f(&self.bc),
            bd: f(&self.bd),
        }
    }
}

/// The stepped two-tone measurement grid.
///
/// At step `k` (`0 ≤ k < num_freqs`) sender B transmits `f_b0 + k·delta_f`
/// and sender A transmits `tone_gap` above it. All frequencies are in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementGrid {
    /// Sender B's frequency at step 0, Hz.
    pub f_b0: f64,
    /// Constant offset of sender A above sender B, Hz.
    pub tone_gap: f64,
    /// Step size of the frequency ladder, Hz.
    pub delta_f: f64,
    /// Number of steps K.
    pub num_freqs: usize,
}

impl Default for MeasurementGrid {
    /// 2.4 GHz start, 20 kHz tone gap, 1 MHz steps, 100 steps.
    fn default() -> Self {
        MeasurementGrid {
            f_b0: 2.4e9,
            tone_gap: 20e3,
            delta_f: 1e6,
            num_freqs: 100,
        }
    }
}

impl MeasurementGrid {
    /// Validating constructor.
    pub fn new(f_b0: f64, tone_gap: f64, delta_f: f64, num_freqs: usize) -> Result<Self> {
        let grid = MeasurementGrid {
            f_b0,
            tone_gap,
            delta_f,
            num_freqs,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Checks the grid invariants; call after deserializing untrusted config.
    ///
    /// `tone_gap = 0` is accepted (both senders on one frequency) because the
    /// q-range search's periodicity properties are stated at zero gap.
    pub fn validate(&self) -> Result<()> {
        if !(self.f_b0.is_finite() && self.f_b0 > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "f_b0 must be finite and > 0, got {}",
                self.f_b0
            )));
        }
        if !(self.delta_f.is_finite() && self.delta_f > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "delta_f must be finite and > 0, got {}",
                self.delta_f
            )));
        }
        if !(self.tone_gap.is_finite() && (0.0..self.delta_f).contains(&self.tone_gap)) {
            return Err(Error::InvalidConfig(format!(
                "tone_gap must satisfy 0 <= tone_gap < delta_f, got {}",
                self.tone_gap
            )));
        }
        if self.num_freqs == 0 {
            return Err(Error::InvalidConfig("num_freqs must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of steps K.
    pub fn num_freqs(&self) -> usize {
        self.num_freqs
    }

    /// The given sender's frequency at step `k`.
    ///
    /// # Panics
    /// Panics if `k >= num_freqs`; callers that take `k` from outside use
    /// [`MeasurementGrid::check_index`] first.
    pub fn freq(&self, sender: Sender, k: usize) -> f64 {
        assert!(k < self.num_freqs, "step {k} out of range");
        let base = self.f_b0 + k as f64 * self.delta_f;
        match sender {
            Sender::A => base + self.tone_gap,
            Sender::B => base,
        }
    }

    /// Midpoint of the two senders' frequencies at step `k` (the single
    /// frequency the ranging model treats both tones as sharing).
    pub fn center_freq(&self, k: usize) -> f64 {
        assert!(k < self.num_freqs, "step {k} out of range");
        self.f_b0 + k as f64 * self.delta_f + 0.5 * self.tone_gap
    }

    /// All K frequencies of one sender.
    pub fn sender_freqs(&self, sender: Sender) -> Vec<f64> {
        (0..self.num_freqs).map(|k| self.freq(sender, k)).collect()
    }

    /// All K center frequencies.
    pub fn center_freqs(&self) -> Vec<f64> {
        (0..self.num_freqs).map(|k| self.center_freq(k)).collect()
    }

    /// Validates an externally supplied step index.
    pub fn check_index(&self, k: usize) -> Result<()> {
        if k < self.num_freqs {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: k,
                len: self.num_freqs,
            })
        }
    }

    /// Validates that a per-step series has exactly K entries.
    pub fn check_len(&self, len: usize) -> Result<()> {
        if len == self.num_freqs {
            Ok(())
        } else {
            Err(Error::LengthMismatch {
                expected: self.num_freqs,
                got: len,
            })
        }
    }
}
