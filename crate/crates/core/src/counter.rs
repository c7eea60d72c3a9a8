//! Decimal counters built from nanowire segments.
//!
//! Each digit is the five-domain window between a track's two access
//! ports. An increment transverse-writes the complement of the P bit (the
//! bit under the high port) into the low port, so a digit walks the ten
//! Johnson states:
//!
//! ```text
//! value  window (low port .. high port)   P
//!   0    0 0 0 0 0                         0
//!   4    1 1 1 1 0                         0
//!   5    1 1 1 1 1                         1
//!   9    0 0 0 0 1                         1
//! ```
//!
//! A digit is decoded from the transverse-read count `c` and `P`:
//! `c` when `P = 0`, `10 - c` when `P = 1`. The controller carries into the
//! next digit whenever a digit wraps from 9 to 0.

use crate::cost::CostLedger;
use crate::device::{Dbc, DeviceError};

pub const DIGIT_WIDTH: usize = 5;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum CounterError {
    #[error("counter capacity must be at least 1")]
    Capacity,
    #[error("unreachable digit state: count {count}, P {p}")]
    InvalidState { count: u8, p: bool },
    #[error("increment by {by} from {value} exceeds maximum {max}")]
    Overflow { value: u64, by: u64, max: u64 },
    #[error("preset value {value} exceeds maximum {max}")]
    Preset { value: u64, max: u64 },
    #[error(transparent)]
    Device(#[from] DeviceError),
}

pub type Result<T, E = CounterError> = std::result::Result<T, E>;

/// Number of decimal digits needed to count up to `capacity`.
pub fn digits_required(capacity: u64) -> Result<usize> {
    if capacity < 1 {
        return Err(CounterError::Capacity);
    }
    Ok(capacity.ilog10() as usize + 1)
}

pub fn decode_digit(tr_count: u8, p: bool) -> Result<u8> {
    match (tr_count, p) {
        (0..=4, false) => Ok(tr_count),
        (1..=5, true) => Ok(10 - tr_count),
        _ => Err(CounterError::InvalidState { count: tr_count, p }),
    }
}

/// Window contents (low port first) that encode `value` in 0..=9.
pub fn johnson_window(value: u8) -> [bool; DIGIT_WIDTH] {
    assert!(value <= 9, "digit value {value} out of range");
    let mut w = [false; DIGIT_WIDTH];
    if value < 5 {
        w.iter_mut().take(value as usize).for_each(|b| *b = true);
    } else {
        w.iter_mut().skip((value - 5) as usize).for_each(|b| *b = true);
    }
    w
}

/// One digit's window state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CounterDigit {
    pub window: [bool; DIGIT_WIDTH],
}

impl CounterDigit {
    pub fn from_value(value: u8) -> Self {
        Self {
            window: johnson_window(value),
        }
    }

    pub fn p(&self) -> bool {
        self.window[DIGIT_WIDTH - 1]
    }

    pub fn tr_count(&self) -> u8 {
        self.window.iter().filter(|&&b| b).count() as u8
    }

    pub fn decode(&self) -> Result<u8> {
        if !self.is_reachable() {
            return Err(CounterError::InvalidState {
                count: self.tr_count(),
                p: self.p(),
            });
        }
        decode_digit(self.tr_count(), self.p())
    }

    pub fn is_reachable(&self) -> bool {
        (0..10).any(|v| johnson_window(v) == self.window)
    }

    /// One Johnson step: shift in the complement of P.
    pub fn step(&self) -> Self {
        let mut w = [false; DIGIT_WIDTH];
        w[0] = !self.p();
        w[1..].copy_from_slice(&self.window[..DIGIT_WIDTH - 1]);
        Self { window: w }
    }
}

fn digit_on(dbc: &Dbc, track: usize) -> Result<CounterDigit> {
    let bits = dbc.window_bits(track)?;
    let window: [bool; DIGIT_WIDTH] = bits.try_into().map_err(|b: Vec<bool>| {
        CounterError::Device(DeviceError::Width {
            expected: DIGIT_WIDTH,
            got: b.len(),
        })
    })?;
    Ok(CounterDigit { window })
}

/// Decodes a counter whose digits live on `tracks` (least significant
/// first) of an independent-mode cluster.
pub fn decode_tracks(dbc: &Dbc, tracks: &[usize]) -> Result<u64> {
    let mut v = 0u64;
    for &t in tracks.iter().rev() {
        v = v * 10 + digit_on(dbc, t)?.decode()? as u64;
    }
    Ok(v)
}

/// One unit increment of the counter on `tracks`. Each digit write is one
/// transverse write; a 9 -> 0 wrap carries into the next track. Returns
/// true if the most significant digit wrapped.
pub fn unit_increment_tracks(dbc: &mut Dbc, tracks: &[usize], ledger: &mut CostLedger) -> Result<bool> {
    for &t in tracks {
        let p = digit_on(dbc, t)?.p();
        let dropped = dbc.transverse_write(t, !p, ledger)?;
        let new_p = digit_on(dbc, t)?.p();
        // P falls from 1 to 0 only on the 9 -> 0 step
        if !(dropped && !new_p) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// A standalone multi-digit counter on its own small cluster: one track
/// per digit, ports spanning the five-domain window.
#[derive(Debug, Clone)]
pub struct RtmCounter {
    dbc: Dbc,
    tracks: Vec<usize>,
    saturating: bool,
    ledger: CostLedger,
}

impl RtmCounter {
    pub fn new(digits: usize) -> Self {
        assert!(digits >= 1, "a counter needs at least one digit");
        let mut dbc = Dbc::with_shape(digits, DIGIT_WIDTH, 0, DIGIT_WIDTH - 1);
        dbc.set_independent(true).expect("fresh cluster is aligned");
        Self {
            dbc,
            tracks: (0..digits).collect(),
            saturating: false,
            ledger: CostLedger::new(),
        }
    }

    /// Smallest counter able to hold `capacity`.
    pub fn with_capacity(capacity: u64) -> Result<Self> {
        Ok(Self::new(digits_required(capacity)?))
    }

    pub fn saturating(mut self, on: bool) -> Self {
        self.saturating = on;
        self
    }

    pub fn digits(&self) -> usize {
        self.tracks.len()
    }

    /// Largest representable value, `10^d - 1`.
    pub fn max_value(&self) -> u64 {
        10u64.pow(self.digits() as u32) - 1
    }

    pub fn ledger(&self) -> &CostLedger {
        &self.ledger
    }

    pub fn digit(&self, i: usize) -> CounterDigit {
        digit_on(&self.dbc, self.tracks[i]).expect("counter window is always addressable")
    }

    pub fn value(&self) -> Result<u64> {
        decode_tracks(&self.dbc, &self.tracks)
    }

    pub fn increment(&mut self, by: u64) -> Result<()> {
        let max = self.max_value();
        let value = self.value()?;
        if !self.saturating && value + by > max {
            return Err(CounterError::Overflow { value, by, max });
        }
        let steps = if self.saturating { by.min(max - value) } else { by };
        for _ in 0..steps {
            unit_increment_tracks(&mut self.dbc, &self.tracks, &mut self.ledger)?;
        }
        Ok(())
    }

    /// Writes the Johnson encoding of `value` into every digit directly.
    pub fn preset(&mut self, value: u64) -> Result<()> {
        let max = self.max_value();
        if value > max {
            return Err(CounterError::Preset { value, max });
        }
        let mut rest = value;
        for &t in &self.tracks {
            let d = (rest % 10) as u8;
            rest /= 10;
            self.dbc.write_window(t, &johnson_window(d), &mut self.ledger)?;
        }
        Ok(())
    }

    /// Configures threshold detection: after this, [`Self::threshold_hit`]
    /// turns true exactly when `threshold` increments have arrived.
    pub fn preset_threshold(&mut self, threshold: u64) -> Result<()> {
        let max = self.max_value();
        if threshold > max {
            return Err(CounterError::Preset { value: threshold, max });
        }
        self.saturating = true;
        self.preset(max - threshold)
    }

    pub fn threshold_hit(&self) -> Result<bool> {
        Ok(self.value()? == self.max_value())
    }

    /// P bit of the most significant digit. Diagnostic only: it rises when
    /// the counter enters the upper half of the MSD range, which matches
    /// the threshold only for specific thresholds.
    pub fn msd_p_bit(&self) -> bool {
        self.digit(self.digits() - 1).p()
    }
}
