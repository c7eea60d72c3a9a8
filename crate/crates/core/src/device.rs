//! Racetrack memory array model.
//!
//! A DBC stores `K` rows of `T` bits. Its position relative to the two
//! access ports is an offset: location `l` of a track sits at physical
//! position `l + offset`, and a port at physical index `p` sees location
//! `p - offset`. Overhead domains are not modeled, so any offset that puts
//! some location under some port is legal and no data falls off the ends.
//!
//! Every primitive records its events into a [`CostLedger`].

use crate::bits::BitBuf;
use crate::cost::{CostLedger, EventClass, Phase, PhaseLedger};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;

pub type RowWord = BitBuf;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum DeviceError {
    #[error("alignment: {0}")]
    Alignment(String),
    #[error("address out of range: {0}")]
    OutOfBounds(String),
    #[error("row width mismatch: expected {expected} bits, got {got}")]
    Width { expected: usize, got: usize },
    #[error("mode: {0}")]
    Mode(String),
    #[error("operation requires the cim-tile, got tile {0}")]
    NotCimTile(usize),
    #[error("invalid geometry: {0}")]
    Geometry(String),
}

pub type Result<T, E = DeviceError> = std::result::Result<T, E>;

/// Array dimensions and access-port placement. Field names are the JSON keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceGeometry {
    pub banks: usize,
    pub subarrays_per_bank: usize,
    pub tiles_per_subarray: usize,
    pub dbcs_per_tile: usize,
    pub tracks_per_dbc: usize,
    pub domains_per_track: usize,
    pub ap_low: usize,
    pub ap_high: usize,
    pub trd: usize,
    pub clock_hz: f64,
}

impl Default for DeviceGeometry {
    fn default() -> Self {
        Self {
            banks: 32,
            subarrays_per_bank: 64,
            tiles_per_subarray: 16,
            dbcs_per_tile: 16,
            tracks_per_dbc: 512,
            domains_per_track: 32,
            ap_low: 13,
            ap_high: 17,
            trd: 5,
            clock_hz: 1e9,
        }
    }
}

impl DeviceGeometry {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("banks", self.banks),
            ("subarrays_per_bank", self.subarrays_per_bank),
            ("tiles_per_subarray", self.tiles_per_subarray),
            ("dbcs_per_tile", self.dbcs_per_tile),
            ("tracks_per_dbc", self.tracks_per_dbc),
            ("domains_per_track", self.domains_per_track),
            ("trd", self.trd),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(DeviceError::Geometry(format!("{name} must be positive")));
            }
        }
        if self.ap_low > self.ap_high || self.ap_high >= self.domains_per_track {
            return Err(DeviceError::Geometry(format!(
                "access ports {}..={} must lie within 0..{}",
                self.ap_low, self.ap_high, self.domains_per_track
            )));
        }
        if self.ap_high - self.ap_low + 1 != self.trd {
            return Err(DeviceError::Geometry(format!(
                "port span {} does not equal trd {}",
                self.ap_high - self.ap_low + 1,
                self.trd
            )));
        }
        if !(self.clock_hz.is_finite() && self.clock_hz > 0.0) {
            return Err(DeviceError::Geometry("clock_hz must be positive".into()));
        }
        Ok(())
    }

    pub fn total_subarrays(&self) -> usize {
        self.banks * self.subarrays_per_bank
    }

    /// The compute tile of every subarray is the last one.
    pub fn cim_tile(&self) -> usize {
        self.tiles_per_subarray - 1
    }

    /// Splits a flat subarray index into (bank, subarray).
    pub fn subarray_at(&self, flat: usize) -> Result<(usize, usize)> {
        if flat >= self.total_subarrays() {
            return Err(DeviceError::OutOfBounds(format!(
                "subarray {flat} of {}",
                self.total_subarrays()
            )));
        }
        Ok((flat / self.subarrays_per_bank, flat % self.subarrays_per_bank))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DbcAddr {
    pub bank: usize,
    pub subarray: usize,
    pub tile: usize,
    pub dbc: usize,
}

impl DbcAddr {
    pub fn new(bank: usize, subarray: usize, tile: usize, dbc: usize) -> Self {
        Self {
            bank,
            subarray,
            tile,
            dbc,
        }
    }

    pub fn at(self, location: usize) -> Address {
        Address {
            bank: self.bank,
            subarray: self.subarray,
            tile: self.tile,
            dbc: self.dbc,
            location,
        }
    }
}

impl fmt::Display for DbcAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}.{}", self.bank, self.subarray, self.tile, self.dbc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Address {
    pub bank: usize,
    pub subarray: usize,
    pub tile: usize,
    pub dbc: usize,
    pub location: usize,
}

impl Address {
    pub fn dbc_addr(&self) -> DbcAddr {
        DbcAddr::new(self.bank, self.subarray, self.tile, self.dbc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Port {
    /// AP1, the lower-index port. Transverse writes insert here.
    Low,
    /// AP2, the higher-index port. Counter P bits sit here.
    High,
}

/// Read-only view of one track.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Nanowire {
    pub domains: Vec<bool>,
    pub offset: i64,
}

/// A cluster of `T` nanowires with `K` addressable domains each.
#[derive(Clone)]
pub struct Dbc {
    tracks: usize,
    domains: usize,
    ap_low: usize,
    ap_high: usize,
    rows: Vec<RowWord>,
    shared_offset: i64,
    // Some(..) in independent mode; entry t is track t's offset
    track_offsets: Option<Vec<i64>>,
}

impl fmt::Debug for Dbc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dbc")
            .field("tracks", &self.tracks)
            .field("domains", &self.domains)
            .field("ports", &(self.ap_low, self.ap_high))
            .field("offset", &self.shared_offset)
            .field("independent", &self.track_offsets.is_some())
            .finish()
    }
}

impl Dbc {
    pub fn new(geometry: &DeviceGeometry) -> Self {
        Self::with_shape(
            geometry.tracks_per_dbc,
            geometry.domains_per_track,
            geometry.ap_low,
            geometry.ap_high,
        )
    }

    /// A zeroed DBC at home alignment: location 0 under the low port, so the
    /// transverse-read window spans locations `0..trd`.
    pub fn with_shape(tracks: usize, domains: usize, ap_low: usize, ap_high: usize) -> Self {
        assert!(ap_low <= ap_high && ap_high - ap_low < domains);
        Self {
            tracks,
            domains,
            ap_low,
            ap_high,
            rows: vec![RowWord::zeros(tracks); domains],
            shared_offset: ap_low as i64,
            track_offsets: None,
        }
    }

    pub fn tracks(&self) -> usize {
        self.tracks
    }

    pub fn domains(&self) -> usize {
        self.domains
    }

    pub fn trd(&self) -> usize {
        self.ap_high - self.ap_low + 1
    }

    pub fn home_offset(&self) -> i64 {
        self.ap_low as i64
    }

    pub fn offset(&self) -> i64 {
        self.shared_offset
    }

    pub fn is_independent(&self) -> bool {
        self.track_offsets.is_some()
    }

    /// Switches between lock-step and independent shifting. Leaving
    /// independent mode requires all tracks to share one offset.
    pub fn set_independent(&mut self, on: bool) -> Result<()> {
        match (on, &self.track_offsets) {
            (true, None) => self.track_offsets = Some(vec![self.shared_offset; self.tracks]),
            (false, Some(offs)) => {
                if offs.iter().any(|&o| o != offs[0]) {
                    return Err(DeviceError::Mode(
                        "tracks are not aligned; cannot enter lock-step".into(),
                    ));
                }
                self.shared_offset = offs[0];
                self.track_offsets = None;
            }
            _ => {}
        }
        Ok(())
    }

    pub fn port_position(&self, port: Port) -> usize {
        match port {
            Port::Low => self.ap_low,
            Port::High => self.ap_high,
        }
    }

    fn offset_valid(&self, offset: i64) -> bool {
        offset >= self.ap_low as i64 - (self.domains as i64 - 1) && offset <= self.ap_high as i64
    }

    fn location_at(&self, physical: usize, offset: i64) -> Option<usize> {
        let l = physical as i64 - offset;
        (0..self.domains as i64).contains(&l).then_some(l as usize)
    }

    fn uniform_offset(&self) -> Option<i64> {
        match &self.track_offsets {
            None => Some(self.shared_offset),
            Some(offs) => offs.iter().all(|&o| o == offs[0]).then(|| offs[0]),
        }
    }

    fn track_offset(&self, track: usize) -> i64 {
        match &self.track_offsets {
            None => self.shared_offset,
            Some(offs) => offs[track],
        }
    }

    /// Location currently under `port` (lock-step view).
    pub fn location_under(&self, port: Port) -> Option<usize> {
        self.location_at(self.port_position(port), self.uniform_offset()?)
    }

    /// Offset that puts `location` under `port`.
    pub fn alignment_for(&self, location: usize, port: Port) -> i64 {
        self.port_position(port) as i64 - location as i64
    }

    /// Shift steps needed to bring `location` under `port`.
    pub fn distance_to(&self, location: usize, port: Port) -> u64 {
        (self.alignment_for(location, port) - self.shared_offset).unsigned_abs()
    }

    /// The port that reaches `location` with fewer shifts (low port on ties).
    pub fn nearest_port(&self, location: usize) -> Port {
        if self.distance_to(location, Port::High) < self.distance_to(location, Port::Low) {
            Port::High
        } else {
            Port::Low
        }
    }

    fn check_row_width(&self, word: &RowWord) -> Result<()> {
        if word.width() != self.tracks {
            return Err(DeviceError::Width {
                expected: self.tracks,
                got: word.width(),
            });
        }
        Ok(())
    }

    fn set_offset(&mut self, offset: i64) {
        self.shared_offset = offset;
        if let Some(offs) = &mut self.track_offsets {
            offs.iter_mut().for_each(|o| *o = offset);
        }
    }

    /// Shifts the whole cluster so `target` sits under `port`. Returns the
    /// number of single-position steps; each costs one shift event of `T`
    /// bits and one cycle.
    pub fn shift_to(&mut self, target: usize, port: Port, ledger: &mut CostLedger) -> Result<u64> {
        if target >= self.domains {
            return Err(DeviceError::Alignment(format!(
                "location {target} outside 0..{}",
                self.domains
            )));
        }
        let current = self
            .uniform_offset()
            .ok_or_else(|| DeviceError::Mode("lock-step shift on a cluster whose tracks are misaligned".into()))?;
        let wanted = self.alignment_for(target, port);
        let steps = (wanted - current).unsigned_abs();
        self.set_offset(wanted);
        ledger.record(EventClass::Shift, steps * self.tracks as u64, steps);
        Ok(steps)
    }

    /// Aligns the transverse-read window so that `start` sits under the low
    /// port and `start + trd - 1` under the high port.
    pub fn align_window(&mut self, start: usize, ledger: &mut CostLedger) -> Result<u64> {
        if start + self.trd() > self.domains {
            return Err(DeviceError::Alignment(format!(
                "window {start}..{} exceeds {} domains",
                start + self.trd(),
                self.domains
            )));
        }
        self.shift_to(start, Port::Low, ledger)
    }

    fn gather_under(&self, port: Port) -> Result<RowWord> {
        let phys = self.port_position(port);
        if let Some(off) = self.uniform_offset() {
            let loc = self
                .location_at(phys, off)
                .ok_or_else(|| DeviceError::Alignment(format!("no location under {port:?} at offset {off}")))?;
            return Ok(self.rows[loc].clone());
        }
        let mut out = RowWord::zeros(self.tracks);
        for t in 0..self.tracks {
            let loc = self
                .location_at(phys, self.track_offset(t))
                .ok_or_else(|| DeviceError::Alignment(format!("track {t} has no location under {port:?}")))?;
            out.set(t, self.rows[loc].get(t));
        }
        Ok(out)
    }

    pub fn read_row(&self, port: Port, ledger: &mut CostLedger) -> Result<RowWord> {
        let row = self.gather_under(port)?;
        ledger.record(EventClass::Read, self.tracks as u64, 1);
        Ok(row)
    }

    pub fn write_row(&mut self, port: Port, word: &RowWord, ledger: &mut CostLedger) -> Result<()> {
        self.check_row_width(word)?;
        let phys = self.port_position(port);
        if let Some(off) = self.uniform_offset() {
            let loc = self
                .location_at(phys, off)
                .ok_or_else(|| DeviceError::Alignment(format!("no location under {port:?} at offset {off}")))?;
            self.rows[loc] = word.clone();
        } else {
            for t in 0..self.tracks {
                let loc = self
                    .location_at(phys, self.track_offset(t))
                    .ok_or_else(|| DeviceError::Alignment(format!("track {t} has no location under {port:?}")))?;
                self.rows[loc].set(t, word.get(t));
            }
        }
        ledger.record(EventClass::Write, self.tracks as u64, 1);
        Ok(())
    }

    fn window_locations(&self, track: usize) -> Result<Vec<usize>> {
        let off = self.track_offset(track);
        (self.ap_low..=self.ap_high)
            .map(|p| {
                self.location_at(p, off).ok_or_else(|| {
                    DeviceError::Alignment(format!("track {track}: port window leaves the addressable range"))
                })
            })
            .collect()
    }

    /// Per-track count of ones between the two ports (inclusive).
    pub fn tr_read(&self, ledger: &mut CostLedger) -> Result<Vec<u8>> {
        let counts = self.tr_counts()?;
        ledger.record(EventClass::TransverseRead, self.tracks as u64, 1);
        Ok(counts)
    }

    fn tr_counts(&self) -> Result<Vec<u8>> {
        let mut counts = vec![0u8; self.tracks];
        if let Some(off) = self.uniform_offset() {
            for p in self.ap_low..=self.ap_high {
                let loc = self
                    .location_at(p, off)
                    .ok_or_else(|| DeviceError::Alignment("port window leaves the addressable range".into()))?;
                for t in self.rows[loc].iter_ones() {
                    counts[t] += 1;
                }
            }
        } else {
            for (t, c) in counts.iter_mut().enumerate() {
                for loc in self.window_locations(t)? {
                    *c += self.rows[loc].get(t) as u8;
                }
            }
        }
        Ok(counts)
    }

    /// Moves one track by `delta` positions; other tracks stay put.
    pub fn shift_nanowire(&mut self, track: usize, delta: i64, ledger: &mut CostLedger) -> Result<()> {
        if track >= self.tracks {
            return Err(DeviceError::OutOfBounds(format!("track {track} of {}", self.tracks)));
        }
        let valid = self.offset_valid(self.track_offset(track) + delta);
        let Some(offs) = &mut self.track_offsets else {
            return Err(DeviceError::Mode("per-track shift on a lock-step cluster".into()));
        };
        if !valid {
            return Err(DeviceError::Alignment(format!("track {track} cannot move by {delta}")));
        }
        offs[track] += delta;
        let steps = delta.unsigned_abs();
        ledger.record(EventClass::Shift, steps, steps);
        Ok(())
    }

    /// Writes `bit` under the low port while the bits between the ports move
    /// one step toward the high port. Returns the bit pushed out from under
    /// the high port.
    pub fn transverse_write(&mut self, track: usize, bit: bool, ledger: &mut CostLedger) -> Result<bool> {
        if self.track_offsets.is_none() {
            return Err(DeviceError::Mode("transverse write needs independent mode".into()));
        }
        if track >= self.tracks {
            return Err(DeviceError::OutOfBounds(format!("track {track} of {}", self.tracks)));
        }
        let locs = self.window_locations(track)?;
        let dropped = self.rows[*locs.last().unwrap()].get(track);
        for i in (1..locs.len()).rev() {
            let b = self.rows[locs[i - 1]].get(track);
            self.rows[locs[i]].set(track, b);
        }
        self.rows[locs[0]].set(track, bit);
        ledger.record(EventClass::TransverseWrite, 1, 1);
        Ok(dropped)
    }

    /// Row-parallel transverse write on every track selected by `mask`,
    /// inserting the matching bit of `values`. One cycle; energy is charged
    /// per written bit. An empty mask is a no-op. Returns the dropped bits
    /// (zero on unselected tracks).
    pub fn transverse_write_masked(
        &mut self,
        mask: &RowWord,
        values: &RowWord,
        ledger: &mut CostLedger,
    ) -> Result<RowWord> {
        if self.track_offsets.is_none() {
            return Err(DeviceError::Mode("transverse write needs independent mode".into()));
        }
        self.check_row_width(mask)?;
        self.check_row_width(values)?;
        let written = mask.count_ones() as u64;
        if written == 0 {
            return Ok(RowWord::zeros(self.tracks));
        }
        let mut dropped = RowWord::zeros(self.tracks);
        if let Some(off) = self.uniform_offset() {
            let locs: Vec<usize> = (self.ap_low..=self.ap_high)
                .map(|p| {
                    self.location_at(p, off)
                        .ok_or_else(|| DeviceError::Alignment("port window leaves the addressable range".into()))
                })
                .collect::<Result<_>>()?;
            let m = mask.words();
            let last = *locs.last().unwrap();
            for (d, (r, mw)) in dropped
                .words_mut()
                .iter_mut()
                .zip(self.rows[last].words().iter().zip(m))
            {
                *d = r & mw;
            }
            for i in (1..locs.len()).rev() {
                let src = self.rows[locs[i - 1]].clone();
                let dst = &mut self.rows[locs[i]];
                for ((d, s), mw) in dst.words_mut().iter_mut().zip(src.words()).zip(m) {
                    *d = (s & mw) | (*d & !mw);
                }
            }
            let dst = &mut self.rows[locs[0]];
            for ((d, v), mw) in dst.words_mut().iter_mut().zip(values.words()).zip(m) {
                *d = (v & mw) | (*d & !mw);
            }
        } else {
            let mut scratch = CostLedger::new();
            for t in mask.iter_ones() {
                let b = self.transverse_write(t, values.get(t), &mut scratch)?;
                dropped.set(t, b);
            }
        }
        ledger.record(EventClass::TransverseWrite, written, 1);
        Ok(dropped)
    }

    /// Controller-level write of one track's whole port window (low port
    /// first). One write event of `trd` bits, one cycle.
    pub fn write_window(&mut self, track: usize, bits: &[bool], ledger: &mut CostLedger) -> Result<()> {
        if bits.len() != self.trd() {
            return Err(DeviceError::Width {
                expected: self.trd(),
                got: bits.len(),
            });
        }
        if track >= self.tracks {
            return Err(DeviceError::OutOfBounds(format!("track {track} of {}", self.tracks)));
        }
        for (loc, &b) in self.window_locations(track)?.into_iter().zip(bits) {
            self.rows[loc].set(track, b);
        }
        ledger.record(EventClass::Write, bits.len() as u64, 1);
        Ok(())
    }

    /// Row currently under `port`, without any access cost. Models the
    /// sense path the transverse-write feedback and carry logic use.
    pub fn peek_port(&self, port: Port) -> Result<RowWord> {
        self.gather_under(port)
    }

    /// Row stored at `location`, without any access cost.
    pub fn peek_row(&self, location: usize) -> &RowWord {
        &self.rows[location]
    }

    /// Bit of `track` currently at physical position `pos`, if any.
    pub fn peek_physical(&self, track: usize, pos: usize) -> Option<bool> {
        self.location_at(pos, self.track_offset(track))
            .map(|l| self.rows[l].get(track))
    }

    pub fn track(&self, t: usize) -> Nanowire {
        Nanowire {
            domains: self.rows.iter().map(|r| r.get(t)).collect(),
            offset: self.track_offset(t),
        }
    }

    /// Transverse-read window of one track, low port first.
    pub fn window_bits(&self, track: usize) -> Result<Vec<bool>> {
        Ok(self
            .window_locations(track)?
            .into_iter()
            .map(|l| self.rows[l].get(track))
            .collect())
    }
}

/// A partition of the array: the subarrays one controller drives as a unit,
/// holding lazily created DBCs and a per-phase ledger.
///
/// Lane execution ([`Device::lanes`]) models subarrays operating in lock
/// step: bit events of every lane are charged, elapsed cycles are those of
/// the slowest lane.
#[derive(Debug, Clone)]
pub struct Device {
    geometry: DeviceGeometry,
    dbcs: HashMap<DbcAddr, Dbc>,
    ledger: PhaseLedger,
    phase: Phase,
}

impl Device {
    pub fn new(geometry: DeviceGeometry) -> Result<Self> {
        geometry.validate()?;
        Ok(Self {
            geometry,
            dbcs: HashMap::new(),
            ledger: PhaseLedger::new(),
            phase: Phase::Io,
        })
    }

    pub fn geometry(&self) -> &DeviceGeometry {
        &self.geometry
    }

    pub fn ledger(&self) -> &PhaseLedger {
        &self.ledger
    }

    pub fn take_ledger(&mut self) -> PhaseLedger {
        std::mem::take(&mut self.ledger)
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn set_phase(&mut self, phase: Phase) {
        self.phase = phase;
    }

    fn check(&self, a: DbcAddr) -> Result<()> {
        let g = &self.geometry;
        if a.bank >= g.banks
            || a.subarray >= g.subarrays_per_bank
            || a.tile >= g.tiles_per_subarray
            || a.dbc >= g.dbcs_per_tile
        {
            return Err(DeviceError::OutOfBounds(format!("dbc {a}")));
        }
        Ok(())
    }

    fn check_cim(&self, a: DbcAddr) -> Result<()> {
        if a.tile != self.geometry.cim_tile() {
            return Err(DeviceError::NotCimTile(a.tile));
        }
        Ok(())
    }

    /// Mutable access to a DBC together with the active phase ledger.
    pub fn with_dbc<R>(&mut self, a: DbcAddr, f: impl FnOnce(&mut Dbc, &mut CostLedger) -> Result<R>) -> Result<R> {
        self.check(a)?;
        let geometry = &self.geometry;
        let dbc = self.dbcs.entry(a).or_insert_with(|| Dbc::new(geometry));
        f(dbc, self.ledger.get_mut(self.phase))
    }

    pub fn dbc(&self, a: DbcAddr) -> Option<&Dbc> {
        self.dbcs.get(&a)
    }

    pub fn set_independent(&mut self, a: DbcAddr, on: bool) -> Result<()> {
        self.with_dbc(a, |d, _| d.set_independent(on))
    }

    pub fn shift_dbc(&mut self, a: DbcAddr, target: usize, port: Port) -> Result<u64> {
        self.with_dbc(a, |d, l| d.shift_to(target, port, l))
    }

    /// Aligns `location` to whichever port needs fewer shifts.
    pub fn align_nearest(&mut self, a: DbcAddr, location: usize) -> Result<(Port, u64)> {
        self.with_dbc(a, |d, l| {
            if location >= d.domains() {
                return Err(DeviceError::Alignment(format!(
                    "location {location} outside 0..{}",
                    d.domains()
                )));
            }
            let port = d.nearest_port(location);
            let steps = d.shift_to(location, port, l)?;
            Ok((port, steps))
        })
    }

    pub fn read_row(&mut self, a: DbcAddr, port: Port) -> Result<RowWord> {
        self.with_dbc(a, |d, l| d.read_row(port, l))
    }

    pub fn write_row(&mut self, a: DbcAddr, port: Port, word: &RowWord) -> Result<()> {
        self.with_dbc(a, |d, l| d.write_row(port, word, l))
    }

    /// Aligns `addr` to its nearest port and writes `word` there.
    pub fn write_at(&mut self, addr: Address, word: &RowWord) -> Result<()> {
        let (port, _) = self.align_nearest(addr.dbc_addr(), addr.location)?;
        self.write_row(addr.dbc_addr(), port, word)
    }

    /// Aligns `addr` to its nearest port and reads it.
    pub fn read_at(&mut self, addr: Address) -> Result<RowWord> {
        let (port, _) = self.align_nearest(addr.dbc_addr(), addr.location)?;
        self.read_row(addr.dbc_addr(), port)
    }

    pub fn tr_read(&mut self, a: DbcAddr) -> Result<Vec<u8>> {
        self.with_dbc(a, |d, l| d.tr_read(l))
    }

    pub fn shift_nanowire(&mut self, a: DbcAddr, track: usize, delta: i64) -> Result<()> {
        self.with_dbc(a, |d, l| d.shift_nanowire(track, delta, l))
    }

    pub fn transverse_write(&mut self, a: DbcAddr, track: usize, bit: bool) -> Result<bool> {
        self.check_cim(a)?;
        self.with_dbc(a, |d, l| d.transverse_write(track, bit, l))
    }

    pub fn transverse_write_masked(&mut self, a: DbcAddr, mask: &RowWord, values: &RowWord) -> Result<RowWord> {
        self.check_cim(a)?;
        self.with_dbc(a, |d, l| d.transverse_write_masked(mask, values, l))
    }

    /// Charges an event that has no cluster-level model, such as a row
    /// transfer to the controller, to the active phase.
    pub fn charge(&mut self, class: EventClass, bits: u64, cycles: u64) {
        self.ledger.get_mut(self.phase).record(class, bits, cycles);
    }

    pub(crate) fn require_cim(&self, a: DbcAddr) -> Result<()> {
        self.check(a)?;
        self.check_cim(a)
    }

    /// Runs `f` once per lane as if the lanes executed concurrently.
    pub fn lanes<R, E>(
        &mut self,
        n: usize,
        mut f: impl FnMut(&mut Device, usize) -> std::result::Result<R, E>,
    ) -> std::result::Result<Vec<R>, E> {
        let start: Vec<u64> = Phase::ALL.iter().map(|&p| self.ledger.get(p).cycles).collect();
        let mut longest = vec![0u64; Phase::ALL.len()];
        let mut out = Vec::with_capacity(n);
        for lane in 0..n {
            out.push(f(self, lane)?);
            for (i, &p) in Phase::ALL.iter().enumerate() {
                let c = &mut self.ledger.get_mut(p).cycles;
                longest[i] = longest[i].max(*c - start[i]);
                *c = start[i];
            }
        }
        for (i, &p) in Phase::ALL.iter().enumerate() {
            self.ledger.get_mut(p).cycles = start[i] + longest[i];
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small() -> Dbc {
        Dbc::with_shape(8, 32, 13, 17)
    }

    fn row(bits: &[u8]) -> RowWord {
        RowWord::from_bools(&bits.iter().map(|&b| b == 1).collect::<Vec<_>>())
    }

    #[test]
    fn geometry_defaults_are_consistent() {
        let g = DeviceGeometry::default();
        g.validate().unwrap();
        assert_eq!(g.ap_high - g.ap_low + 1, g.trd);
        assert_eq!((g.trd, g.tracks_per_dbc, g.domains_per_track), (5, 512, 32));
    }

    #[test]
    fn geometry_json_field_names() {
        let v = serde_json::to_value(DeviceGeometry::default()).unwrap();
        for k in [
            "banks",
            "subarrays_per_bank",
            "tiles_per_subarray",
            "dbcs_per_tile",
            "tracks_per_dbc",
            "domains_per_track",
            "ap_low",
            "ap_high",
            "trd",
            "clock_hz",
        ] {
            assert!(v.get(k).is_some(), "{k}");
        }
        let bad = DeviceGeometry {
            ap_high: 18,
            ..DeviceGeometry::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn shift_already_aligned_is_free() {
        let mut d = small();
        let mut l = CostLedger::new();
        assert_eq!(d.shift_to(0, Port::Low, &mut l).unwrap(), 0);
        assert_eq!(l.cycles, 0);
        assert!(l.is_empty());
    }

    #[test]
    fn shift_v0_to_v3() {
        let mut d = small();
        let mut l = CostLedger::new();
        assert_eq!(d.shift_to(3, Port::Low, &mut l).unwrap(), 3);
        assert_eq!(l.cycles, 3);
        assert_eq!(l.shift_bits, 3 * 8);
        assert_eq!(d.location_under(Port::Low), Some(3));
    }

    #[test]
    fn shift_past_end_is_alignment_error() {
        let mut d = small();
        let mut l = CostLedger::new();
        assert!(matches!(
            d.shift_to(32, Port::Low, &mut l),
            Err(DeviceError::Alignment(_))
        ));
    }

    #[test]
    fn read_write_roundtrips() {
        let mut d = small();
        let mut l = CostLedger::new();
        assert!(d.read_row(Port::Low, &mut l).unwrap().is_zero());
        let w = row(&[1, 0, 1, 1, 0, 0, 1, 0]);
        d.write_row(Port::Low, &w, &mut l).unwrap();
        assert_eq!(d.read_row(Port::Low, &mut l).unwrap(), w);
        let w2 = row(&[0, 1, 1, 1, 0, 0, 1, 1]);
        d.write_row(Port::Low, &w2, &mut l).unwrap();
        assert_eq!(d.read_row(Port::Low, &mut l).unwrap(), w2);
        d.write_row(Port::Low, &RowWord::ones(8), &mut l).unwrap();
        assert_eq!(d.read_row(Port::Low, &mut l).unwrap(), RowWord::ones(8));
        assert_eq!(l.read_bits, 4 * 8);
        assert_eq!(l.write_bits, 3 * 8);
        assert_eq!(l.cycles, 7);
    }

    #[test]
    fn write_through_shift() {
        let mut d = small();
        let mut l = CostLedger::new();
        let w = row(&[1, 1, 0, 0, 1, 0, 1, 0]);
        d.shift_to(2, Port::Low, &mut l).unwrap();
        d.write_row(Port::Low, &w, &mut l).unwrap();
        d.shift_to(0, Port::Low, &mut l).unwrap();
        d.shift_to(2, Port::Low, &mut l).unwrap();
        assert_eq!(d.read_row(Port::Low, &mut l).unwrap(), w);
        // V1 was never written
        d.shift_to(1, Port::Low, &mut l).unwrap();
        assert!(d.read_row(Port::Low, &mut l).unwrap().is_zero());
    }

    #[test]
    fn write_width_mismatch() {
        let mut d = small();
        let mut l = CostLedger::new();
        assert!(matches!(
            d.write_row(Port::Low, &RowWord::zeros(9), &mut l),
            Err(DeviceError::Width { expected: 8, got: 9 })
        ));
    }

    #[test]
    fn tr_counts_window() {
        let mut d = small();
        let mut l = CostLedger::new();
        assert_eq!(d.tr_read(&mut l).unwrap(), vec![0; 8]);
        // track 0 gets (1,0,1,1,0) in window rows 0..5
        for (loc, b) in [1u8, 0, 1, 1, 0].iter().enumerate() {
            d.shift_to(loc, Port::Low, &mut l).unwrap();
            let mut w = RowWord::zeros(8);
            w.set(0, *b == 1);
            d.write_row(Port::Low, &w, &mut l).unwrap();
        }
        d.align_window(0, &mut l).unwrap();
        let before = l;
        let c = d.tr_read(&mut l).unwrap();
        assert_eq!(c[0], 3);
        assert_eq!(l.tr_bits - before.tr_bits, 8);
        assert_eq!(l.cycles - before.cycles, 1);
        for loc in 0..5 {
            d.shift_to(loc, Port::Low, &mut l).unwrap();
            d.write_row(Port::Low, &RowWord::ones(8), &mut l).unwrap();
        }
        d.align_window(0, &mut l).unwrap();
        assert_eq!(d.tr_read(&mut l).unwrap(), vec![5; 8]);
    }

    #[test]
    fn window_out_of_range() {
        let mut d = small();
        let mut l = CostLedger::new();
        assert!(d.align_window(28, &mut l).is_err());
        d.align_window(27, &mut l).unwrap();
        // push the window partly off the end
        d.shift_to(31, Port::Low, &mut l).unwrap();
        assert!(matches!(d.tr_read(&mut l), Err(DeviceError::Alignment(_))));
    }

    #[test]
    fn nanowire_shift_modes() {
        let mut d = small();
        let mut l = CostLedger::new();
        assert!(matches!(d.shift_nanowire(0, 1, &mut l), Err(DeviceError::Mode(_))));
        d.set_independent(true).unwrap();
        d.shift_nanowire(0, 0, &mut l).unwrap();
        assert!(l.is_empty());
        // put a 1 at location 2 of track 3 (physical 15)
        d.shift_to(2, Port::Low, &mut l).unwrap();
        let mut w = RowWord::zeros(8);
        w.set(3, true);
        d.write_row(Port::Low, &w, &mut l).unwrap();
        let phys = 13;
        assert_eq!(d.peek_physical(3, phys), Some(true));
        let before = l;
        d.shift_nanowire(3, 1, &mut l).unwrap();
        assert_eq!(d.peek_physical(3, phys + 1), Some(true));
        assert_eq!(d.peek_physical(3, phys), Some(false));
        assert_eq!(l.shift_bits - before.shift_bits, 1);
        // other tracks did not move
        assert_eq!(d.track(2).offset, d.track(3).offset - 1);
        assert!(d.set_independent(false).is_err());
        d.shift_nanowire(3, -1, &mut l).unwrap();
        d.set_independent(false).unwrap();
    }

    #[test]
    fn transverse_write_shift_register() {
        let mut d = Dbc::with_shape(1, 5, 0, 4);
        let mut l = CostLedger::new();
        assert!(d.transverse_write(0, true, &mut l).is_err());
        d.set_independent(true).unwrap();
        let dropped = d.transverse_write(0, true, &mut l).unwrap();
        assert!(!dropped);
        assert_eq!(d.window_bits(0).unwrap(), vec![true, false, false, false, false]);
        for _ in 0..4 {
            d.transverse_write(0, true, &mut l).unwrap();
        }
        assert_eq!(d.window_bits(0).unwrap(), vec![true; 5]);
        assert!(d.transverse_write(0, false, &mut l).unwrap());
        assert_eq!(d.window_bits(0).unwrap(), vec![false, true, true, true, true]);
        assert_eq!(l.tw_bits, 6);
        assert_eq!(l.cycles, 6);
    }

    #[test]
    fn masked_tw_matches_per_track() {
        let mut a = Dbc::with_shape(70, 8, 1, 5);
        a.set_independent(true).unwrap();
        let mut b = a.clone();
        let mut la = CostLedger::new();
        let mut lb = CostLedger::new();
        let mut rng = 0x1234_5678_u64;
        for _ in 0..40 {
            let mut mask = RowWord::zeros(70);
            let mut vals = RowWord::zeros(70);
            for t in 0..70 {
                rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                mask.set(t, rng >> 63 == 1);
                vals.set(t, (rng >> 62) & 1 == 1);
            }
            let da = a.transverse_write_masked(&mask, &vals, &mut la).unwrap();
            for t in mask.iter_ones() {
                let dropped = b.transverse_write(t, vals.get(t), &mut lb).unwrap();
                assert_eq!(da.get(t), dropped);
            }
        }
        for t in 0..70 {
            assert_eq!(a.window_bits(t).unwrap(), b.window_bits(t).unwrap());
        }
        assert_eq!(la.tw_bits, lb.tw_bits);
        assert_eq!(la.cycles, 40);
    }

    #[test]
    fn lanes_charge_slowest_cycles() {
        let mut dev = Device::new(DeviceGeometry::default()).unwrap();
        let cim = dev.geometry().cim_tile();
        dev.lanes(3, |d, lane| -> Result<()> {
            d.shift_dbc(DbcAddr::new(0, lane, cim, 0), lane, Port::Low)?;
            Ok(())
        })
        .unwrap();
        let l = dev.ledger().get(Phase::Io);
        assert_eq!(l.cycles, 2);
        assert_eq!(l.shift_bits, (1 + 2) * 512);
    }

    #[test]
    fn cim_only_ops_rejected_elsewhere() {
        let mut dev = Device::new(DeviceGeometry::default()).unwrap();
        assert!(matches!(
            dev.transverse_write(DbcAddr::new(0, 0, 0, 0), 0, true),
            Err(DeviceError::NotCimTile(0))
        ));
        assert!(matches!(
            dev.read_row(DbcAddr::new(32, 0, 0, 0), Port::Low),
            Err(DeviceError::OutOfBounds(_))
        ));
    }

    proptest! {
        #[test]
        fn shifts_summing_to_zero_restore_content(
            rows in proptest::collection::vec(any::<u8>(), 32),
            moves in proptest::collection::vec(-3i64..=3, 1..20),
        ) {
            let mut d = Dbc::with_shape(8, 32, 13, 17);
            let mut l = CostLedger::new();
            d.set_independent(true).unwrap();
            for (loc, byte) in rows.iter().enumerate() {
                d.shift_to(loc, Port::Low, &mut l).unwrap();
                d.write_row(Port::Low, &RowWord::from_words(vec![*byte as u64], 8), &mut l).unwrap();
            }
            d.shift_to(0, Port::Low, &mut l).unwrap();
            let snapshot: Vec<_> = (0..8).map(|t| d.track(t)).collect();
            let mut applied = Vec::new();
            for (i, m) in moves.iter().enumerate() {
                let t = i % 8;
                if d.shift_nanowire(t, *m, &mut l).is_ok() {
                    applied.push((t, *m));
                }
            }
            for (t, m) in applied.into_iter().rev() {
                d.shift_nanowire(t, -m, &mut l).unwrap();
            }
            let after: Vec<_> = (0..8).map(|t| d.track(t)).collect();
            prop_assert_eq!(snapshot, after);
        }

        #[test]
        fn reads_are_pure(rows in proptest::collection::vec(any::<u8>(), 32), start in 0usize..28) {
            let mut d = Dbc::with_shape(8, 32, 13, 17);
            let mut l = CostLedger::new();
            for (loc, byte) in rows.iter().enumerate() {
                d.shift_to(loc, Port::High, &mut l).unwrap();
                d.write_row(Port::High, &RowWord::from_words(vec![*byte as u64], 8), &mut l).unwrap();
            }
            d.align_window(start, &mut l).unwrap();
            let before: Vec<_> = (0..8).map(|t| d.track(t)).collect();
            for _ in 0..3 {
                d.read_row(Port::Low, &mut l).unwrap();
                d.read_row(Port::High, &mut l).unwrap();
                d.tr_read(&mut l).unwrap();
            }
            let after: Vec<_> = (0..8).map(|t| d.track(t)).collect();
            prop_assert_eq!(before, after);
        }

        #[test]
        fn tr_equals_brute_force_popcount(rows in proptest::collection::vec(any::<u8>(), 32), start in 0usize..28) {
            let mut d = Dbc::with_shape(8, 32, 13, 17);
            let mut l = CostLedger::new();
            for (loc, byte) in rows.iter().enumerate() {
                d.shift_to(loc, Port::Low, &mut l).unwrap();
                d.write_row(Port::Low, &RowWord::from_words(vec![*byte as u64], 8), &mut l).unwrap();
            }
            d.align_window(start, &mut l).unwrap();
            let counts = d.tr_read(&mut l).unwrap();
            for (t, &c) in counts.iter().enumerate() {
                let brute = (start..start + 5).filter(|&loc| (rows[loc] >> t) & 1 == 1).count();
                prop_assert_eq!(c as usize, brute);
            }
        }

        #[test]
        fn every_op_advances_cycles_by_latency(ops in proptest::collection::vec(0u8..4, 1..30)) {
            let mut d = Dbc::with_shape(8, 32, 13, 17);
            d.set_independent(true).unwrap();
            let mut l = CostLedger::new();
            for op in ops {
                let before = l.cycles;
                match op {
                    0 => { d.read_row(Port::Low, &mut l).unwrap(); prop_assert_eq!(l.cycles, before + 1); }
                    1 => { d.write_row(Port::High, &RowWord::ones(8), &mut l).unwrap(); prop_assert_eq!(l.cycles, before + 1); }
                    2 => { d.tr_read(&mut l).unwrap(); prop_assert_eq!(l.cycles, before + 1); }
                    _ => { d.transverse_write(1, true, &mut l).unwrap(); prop_assert_eq!(l.cycles, before + 1); }
                }
            }
        }
    }
}
