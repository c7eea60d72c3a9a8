//! One processing group: encoder ring, bundling counters and readout.
//!
//! The encoder keeps the last `N` symbol chunks in a ring of `N + 1` slots
//! at locations `0..=N` of DBC 9. At step `s` role `k` (the symbol `k`
//! characters back, rotated `k` times) lives in slot `(k - s) mod (N + 1)`
//! and the remaining slot holds zeros. Each step runs:
//!
//! 1. rotate-read roles `0..N-2` and write each back in place,
//! 2. clear the outgoing role `N - 1`,
//! 3. rotate role `N - 2` in place,
//! 4. fetch the new symbol from the item memory into the zero slot,
//! 5. once `N` symbols are in, one XOR cim operation over locations
//!    `0..trd` yields the n-gram chunk.
//!
//! Relabelling instead of moving means the ring never copies rows, at the
//! price of a per-step alignment pattern that repeats every `N + 1` steps.

use serde::Serialize;

use super::placement::{ImPlacement, ImSlot};
use super::readout::{pack_counters, unpack_counters, DigitSnapshot};
use super::{BundlingMode, EngineError, HdcrConfig, Result, COUNTER_DBC, COUNTER_DIGITS, ENCODER_DBC, IM_DBCS};
use crate::bits::BitBuf;
use crate::cim::{cimop, rotate_read_at, CimOpKind, CimRequest, Rotation};
use crate::corpus::Symbol;
use crate::cost::{EventClass, Phase, PhaseLedger};
use crate::counter::johnson_window;
use crate::device::{DbcAddr, Device, Port, RowWord};
use crate::hdc::{Hypervector, ItemMemory, CHUNK_BITS};

/// Fetch and schedule statistics.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct EncodeStats {
    /// Item-memory fetches, counted once per subarray.
    pub fetches: u64,
    /// `fetch_shifts[k]` is the number of fetches that needed `k` shifts.
    pub fetch_shifts: Vec<u64>,
    /// Encode-phase cycles of each step of the most recent segment, as
    /// seen by one subarray.
    pub step_cycles: Vec<u64>,
}

impl EncodeStats {
    fn record_fetch(&mut self, shifts: u64) {
        let k = shifts as usize;
        if self.fetch_shifts.len() <= k {
            self.fetch_shifts.resize(k + 1, 0);
        }
        self.fetch_shifts[k] += 1;
        self.fetches += 1;
    }

    pub fn max_fetch_shifts(&self) -> u64 {
        self.fetch_shifts.iter().rposition(|&c| c > 0).unwrap_or(0) as u64
    }

    pub(super) fn absorb(&mut self, other: &EncodeStats) {
        self.fetches += other.fetches;
        if self.fetch_shifts.len() < other.fetch_shifts.len() {
            self.fetch_shifts.resize(other.fetch_shifts.len(), 0);
        }
        for (a, b) in self.fetch_shifts.iter_mut().zip(&other.fetch_shifts) {
            *a += b;
        }
        if !other.step_cycles.is_empty() {
            self.step_cycles = other.step_cycles.clone();
        }
    }
}

/// Per-PG encode output, before the controller combines groups.
#[derive(Debug, Clone, Default)]
pub struct SegmentResult {
    /// Decoded counter value of every bit position of this PG.
    pub counts: Vec<u32>,
    /// Latched threshold bits (preset mode only).
    pub flags: Option<BitBuf>,
    pub ngrams: u64,
    pub stats: EncodeStats,
}

#[derive(Debug, Clone)]
pub struct ProcessingGroup {
    index: usize,
    device: Device,
    subarrays: Vec<(usize, usize)>,
    tile: usize,
}

/// Writes `value` into every counter on the cluster at once: five
/// row-parallel transverse writes per digit, last window bit first.
fn fill_counters(dev: &mut Device, digits: &[DbcAddr], value: u64) -> Result<()> {
    let all = RowWord::ones(CHUNK_BITS);
    let mut v = value;
    for &a in digits {
        let w = johnson_window((v % 10) as u8);
        v /= 10;
        for &bit in w.iter().rev() {
            let values = if bit { all.clone() } else { RowWord::zeros(CHUNK_BITS) };
            dev.transverse_write_masked(a, &all, &values)?;
        }
    }
    Ok(())
}

/// One unit increment on every counter selected by `mask`. Each digit is a
/// masked transverse write of its complemented P bits; tracks whose digit
/// wrapped from 9 to 0 carry into the next digit. Returns the tracks that
/// carried out of the most significant digit.
fn increment_counters(dev: &mut Device, digits: &[DbcAddr], mask: &RowWord) -> Result<RowWord> {
    let mut carry = mask.clone();
    for &a in digits {
        if carry.is_zero() {
            break;
        }
        let p = dev.with_dbc(a, |d, _| d.peek_port(Port::High))?;
        let dropped = dev.transverse_write_masked(a, &carry, &p.not())?;
        let new_p = dev.with_dbc(a, |d, _| d.peek_port(Port::High))?;
        carry = dropped;
        carry.and_assign(&new_p.not());
    }
    Ok(carry)
}

/// Senses every counter (one transverse read and one P read per digit).
fn sense_counters(dev: &mut Device, digits: &[DbcAddr], tracks: usize) -> Result<Vec<Vec<DigitSnapshot>>> {
    let mut snaps = vec![Vec::with_capacity(digits.len()); tracks];
    for &a in digits {
        let counts = dev.tr_read(a)?;
        let p = dev.read_row(a, Port::High)?;
        for (t, s) in snaps.iter_mut().enumerate() {
            s.push(DigitSnapshot::from_sense(counts[t], p.get(t)));
        }
    }
    Ok(snaps)
}

impl ProcessingGroup {
    pub fn new(config: &HdcrConfig, index: usize) -> Result<Self> {
        let g = &config.geometry;
        let chunks = config.chunks();
        let subarrays = (0..chunks)
            .map(|j| g.subarray_at(index * chunks + j))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let mut pg = Self {
            index,
            device: Device::new(g.clone())?,
            subarrays,
            tile: g.cim_tile(),
        };
        for j in 0..chunks {
            for d in 0..COUNTER_DIGITS {
                let a = pg.addr(j, COUNTER_DBC + d);
                pg.device.set_independent(a, true)?;
            }
        }
        Ok(pg)
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn chunks(&self) -> usize {
        self.subarrays.len()
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    pub fn addr(&self, chunk: usize, dbc: usize) -> DbcAddr {
        let (bank, sub) = self.subarrays[chunk];
        DbcAddr::new(bank, sub, self.tile, dbc)
    }

    pub fn take_ledger(&mut self) -> PhaseLedger {
        self.device.take_ledger()
    }

    fn lane_addrs(&self) -> Vec<[DbcAddr; 16]> {
        (0..self.chunks())
            .map(|j| std::array::from_fn(|d| self.addr(j, d)))
            .collect()
    }

    /// Writes chunk `j` of every symbol to subarray `j` at its placed slot,
    /// then returns the item-memory DBCs to home alignment.
    pub fn write_item_memory(&mut self, im: &ItemMemory, placement: &ImPlacement) -> Result<()> {
        let lanes = self.lane_addrs();
        self.device.set_phase(Phase::Io);
        self.device.lanes(lanes.len(), |dev, j| -> Result<()> {
            for (s, slot) in placement.iter() {
                dev.write_at(lanes[j][slot.dbc].at(slot.location), &im.get(s).chunk(j))?;
            }
            for a in &lanes[j][..IM_DBCS] {
                dev.shift_dbc(*a, 0, Port::Low)?;
            }
            Ok(())
        })?;
        Ok(())
    }

    /// Writes a hypervector into one spare row of every subarray, then
    /// returns that DBC to home alignment.
    pub fn store_row(&mut self, slot: ImSlot, hv: &Hypervector) -> Result<()> {
        let lanes = self.lane_addrs();
        self.device.set_phase(Phase::Io);
        self.device.lanes(lanes.len(), |dev, j| -> Result<()> {
            let a = lanes[j][slot.dbc];
            dev.write_at(a.at(slot.location), &hv.chunk(j))?;
            dev.shift_dbc(a, 0, Port::Low)?;
            Ok(())
        })?;
        Ok(())
    }

    pub fn peek_row(&self, slot: ImSlot, chunks: usize) -> Hypervector {
        let rows: Vec<BitBuf> = (0..chunks)
            .map(|j| {
                self.device
                    .dbc(self.addr(j, slot.dbc))
                    .map(|d| d.peek_row(slot.location).clone())
                    .unwrap_or_else(|| BitBuf::zeros(CHUNK_BITS))
            })
            .collect();
        Hypervector::from_chunks(&rows).expect("chunk rows are 512 bits")
    }

    /// Encodes one text segment. `total_ngrams` is the n-gram count of the
    /// whole text, which sets the preset in preset mode.
    pub fn encode_segment(
        &mut self,
        seg: &[Symbol],
        n: usize,
        placement: &ImPlacement,
        mode: BundlingMode,
        total_ngrams: u64,
    ) -> Result<SegmentResult> {
        let chunks = self.chunks();
        if seg.is_empty() {
            return Ok(SegmentResult {
                counts: vec![0; chunks * CHUNK_BITS],
                flags: (mode == BundlingMode::Preset).then(|| BitBuf::zeros(chunks * CHUNK_BITS)),
                ..Default::default()
            });
        }
        let max = 10u64.pow(COUNTER_DIGITS as u32) - 1;
        let preset = match mode {
            BundlingMode::ExactSum => {
                if total_ngrams > max {
                    return Err(EngineError::Capacity(format!(
                        "{total_ngrams} n-grams overflow {COUNTER_DIGITS}-digit counters"
                    )));
                }
                0
            }
            BundlingMode::Preset => {
                // overflow of the top digit marks count >= total/2 + 1
                let target = total_ngrams / 2 + 1;
                if target > max {
                    return Err(EngineError::Capacity(format!(
                        "threshold {target} exceeds {COUNTER_DIGITS}-digit counters"
                    )));
                }
                max + 1 - target
            }
        };
        let ring = n + 1;
        let lanes = self.lane_addrs();
        let mut stats = EncodeStats::default();
        let mut ngrams = 0;
        let results = self.device.lanes(chunks, |dev, j| -> Result<_> {
            let addrs = &lanes[j];
            let enc = addrs[ENCODER_DBC];
            let counters = &addrs[COUNTER_DBC..COUNTER_DBC + COUNTER_DIGITS];
            let mut latched = RowWord::zeros(CHUNK_BITS);
            dev.set_phase(Phase::Bundle);
            fill_counters(dev, counters, preset)?;

            let rotate = |dev: &mut Device, loc: usize| -> Result<()> {
                let (port, _) = dev.align_nearest(enc, loc)?;
                let row = rotate_read_at(dev, enc, port, Rotation::Left)?;
                dev.write_row(enc, port, &row)?;
                Ok(())
            };
            let mut lane_ngrams = 0;
            for (s, &sym) in seg.iter().enumerate() {
                dev.set_phase(Phase::Encode);
                let start = dev.ledger().get(Phase::Encode).cycles;
                let slot = |k: usize| (k + ring - s % ring) % ring;
                for k in 0..n.saturating_sub(2) {
                    rotate(dev, slot(k))?;
                }
                let (port, _) = dev.align_nearest(enc, slot(n - 1))?;
                dev.write_row(enc, port, &RowWord::zeros(CHUNK_BITS))?;
                if n >= 2 {
                    rotate(dev, slot(n - 2))?;
                }
                let im_slot = placement.slot(sym);
                let im = addrs[im_slot.dbc];
                let (port, shifts) = dev.align_nearest(im, im_slot.location)?;
                stats.record_fetch(shifts);
                let row = dev.read_row(im, port)?;
                let (port, _) = dev.align_nearest(enc, slot(n))?;
                dev.write_row(enc, port, &row)?;

                if s + 1 >= n {
                    let x = cimop(
                        dev,
                        CimRequest {
                            src: enc.at(0),
                            size: n as u8,
                            op: CimOpKind::Xor,
                        },
                    )?;
                    dev.set_phase(Phase::Bundle);
                    let mut mask = x;
                    mask.and_assign(&latched.not());
                    let over = increment_counters(dev, counters, &mask)?;
                    if !over.is_zero() {
                        if mode == BundlingMode::ExactSum {
                            return Err(EngineError::Capacity("bundling counter overflow".into()));
                        }
                        latched.or_assign(&over);
                    }
                    lane_ngrams += 1;
                }
                if j == 0 {
                    let cycles = dev.ledger().get(Phase::Encode).cycles - start;
                    if s == 0 {
                        stats.step_cycles.clear();
                    }
                    stats.step_cycles.push(cycles);
                }
            }

            if mode == BundlingMode::Preset {
                dev.set_phase(Phase::Io);
                dev.charge(EventClass::Read, CHUNK_BITS as u64, 1);
                return Ok((None, Some(latched), lane_ngrams));
            }
            dev.set_phase(Phase::Bundle);
            let snaps = sense_counters(dev, counters, CHUNK_BITS)?;
            let rows = pack_counters(&snaps, COUNTER_DIGITS, CHUNK_BITS);
            dev.set_phase(Phase::Io);
            for _ in &rows {
                dev.charge(EventClass::Read, CHUNK_BITS as u64, 1);
            }
            let counts = unpack_counters(&rows, COUNTER_DIGITS, CHUNK_BITS)?;
            Ok((Some(counts), None, lane_ngrams))
        });
        let results = results?;
        let mut out = SegmentResult {
            counts: Vec::with_capacity(chunks * CHUNK_BITS),
            ..Default::default()
        };
        let mut flags = BitBuf::zeros(chunks * CHUNK_BITS);
        for (j, (counts, latched, lane_ngrams)) in results.into_iter().enumerate() {
            ngrams = lane_ngrams;
            if let Some(c) = counts {
                out.counts.extend(c.into_iter().map(|v| v as u32));
            }
            if let Some(l) = latched {
                flags.splice(j * CHUNK_BITS, &l);
            }
        }
        if mode == BundlingMode::Preset {
            out.counts = vec![0; chunks * CHUNK_BITS];
            out.flags = Some(flags);
        }
        out.ngrams = ngrams;
        out.stats = stats;
        Ok(out)
    }
}
