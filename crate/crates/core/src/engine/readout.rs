//! Counter readout packing.
//!
//! Each digit contributes its five transverse-read threshold flags followed
//! by its P bit. A counter's digits are concatenated least significant
//! first, and whole counters are packed into rows with a zero tail:
//!
//! ```text
//! bit   0..4   5    6..10  11   ...
//!       TR0    P0   TR1    P1   ...
//! ```

use crate::bits::BitBuf;
use crate::cim::{flags_from_count, ThresholdFlags};
use crate::counter::{decode_digit, CounterError};

pub const BITS_PER_DIGIT: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DigitSnapshot {
    pub flags: ThresholdFlags,
    pub p: bool,
}

impl DigitSnapshot {
    pub fn from_sense(tr_count: u8, p: bool) -> Self {
        Self {
            flags: flags_from_count(tr_count).expect("a five-domain window holds at most five ones"),
            p,
        }
    }

    pub fn decode(&self) -> Result<u8, CounterError> {
        decode_digit(self.flags.count(), self.p)
    }
}

/// Digits of one counter, least significant first.
pub type CounterSnapshot = Vec<DigitSnapshot>;

fn counters_per_row(digits: usize, width: usize) -> usize {
    let per = width / (digits * BITS_PER_DIGIT);
    assert!(per > 0, "a {digits}-digit counter does not fit a {width}-bit row");
    per
}

pub fn pack_counters(counters: &[CounterSnapshot], digits: usize, width: usize) -> Vec<BitBuf> {
    let per = counters_per_row(digits, width);
    counters
        .chunks(per)
        .map(|group| {
            let mut row = BitBuf::zeros(width);
            for (c, counter) in group.iter().enumerate() {
                assert_eq!(counter.len(), digits);
                for (d, digit) in counter.iter().enumerate() {
                    let base = (c * digits + d) * BITS_PER_DIGIT;
                    for (k, f) in digit.flags.as_array().into_iter().enumerate() {
                        row.set(base + k, f);
                    }
                    row.set(base + 5, digit.p);
                }
            }
            row
        })
        .collect()
}

/// Decodes `count` counters from packed rows.
pub fn unpack_counters(rows: &[BitBuf], digits: usize, count: usize) -> Result<Vec<u64>, CounterError> {
    let width = rows.first().map_or(0, |r| r.width());
    let per = counters_per_row(digits, width);
    assert!(rows.len() * per >= count, "not enough rows for {count} counters");
    (0..count)
        .map(|i| {
            let row = &rows[i / per];
            let c = i % per;
            let mut v = 0u64;
            for d in (0..digits).rev() {
                let base = (c * digits + d) * BITS_PER_DIGIT;
                let flags = ThresholdFlags::from_array(std::array::from_fn(|k| row.get(base + k)));
                if !flags.is_monotone() {
                    return Err(CounterError::InvalidState {
                        count: flags.count(),
                        p: row.get(base + 5),
                    });
                }
                v = v * 10 + decode_digit(flags.count(), row.get(base + 5))? as u64;
            }
            Ok(v)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counter::johnson_window;

    fn snapshot(value: u64, digits: usize) -> CounterSnapshot {
        let mut v = value;
        (0..digits)
            .map(|_| {
                let w = johnson_window((v % 10) as u8);
                v /= 10;
                DigitSnapshot::from_sense(w.iter().filter(|&&b| b).count() as u8, w[4])
            })
            .collect()
    }

    #[test]
    fn four_digit_layout() {
        let rows = pack_counters(&[snapshot(4096, 4)], 4, 512);
        assert_eq!(rows.len(), 1);
        let r = &rows[0];
        // digit 0 is 6: window 0 1 1 1 1, four ones, P = 1
        assert_eq!(
            (0..5).map(|i| r.get(i)).collect::<Vec<_>>(),
            [true, true, true, true, false]
        );
        assert!(r.get(5));
        // digit 3 is 4: four ones, P = 0
        assert!(!r.get(23));
        assert!((24..512).all(|i| !r.get(i)));
        assert_eq!(unpack_counters(&rows, 4, 1).unwrap(), vec![4096]);
    }

    #[test]
    fn six_digit_counters_fill_37_rows() {
        let values: Vec<u64> = (0..512).map(|i| i * 1953).collect();
        let snaps: Vec<_> = values.iter().map(|&v| snapshot(v, 6)).collect();
        let rows = pack_counters(&snaps, 6, 512);
        assert_eq!(rows.len(), 37);
        assert_eq!(unpack_counters(&rows, 6, 512).unwrap(), values);
        // 14 counters use 504 bits, the rest of each row stays clear
        assert!((504..512).all(|i| !rows[0].get(i)));
    }

    #[test]
    fn invalid_digit_is_rejected() {
        let mut rows = pack_counters(&[snapshot(0, 1)], 1, 512);
        rows[0].set(5, true);
        assert!(unpack_counters(&rows, 1, 1).is_err());
    }
}
