//! Event ledger and energy/latency accounting.
//!
//! Every device primitive records how many bits it touched per event class
//! and how many cycles it took. Energy is derived from the ledger only:
//! `Σ bits × pJ/bit + background power × busy time`.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::ops::{Add, AddAssign};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventClass {
    Shift,
    Read,
    Write,
    TransverseRead,
    TransverseWrite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Encode,
    Bundle,
    Search,
    Io,
}

impl Phase {
    pub const ALL: [Phase; 4] = [Phase::Encode, Phase::Bundle, Phase::Search, Phase::Io];

    fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Phase::Encode => "encode",
            Phase::Bundle => "bundle",
            Phase::Search => "search",
            Phase::Io => "io",
        }
    }
}

/// Bit-event counts per event class plus elapsed cycles.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CostLedger {
    pub shift_bits: u64,
    pub read_bits: u64,
    pub write_bits: u64,
    pub tr_bits: u64,
    pub tw_bits: u64,
    pub cycles: u64,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, class: EventClass, bits: u64, cycles: u64) {
        match class {
            EventClass::Shift => self.shift_bits += bits,
            EventClass::Read => self.read_bits += bits,
            EventClass::Write => self.write_bits += bits,
            EventClass::TransverseRead => self.tr_bits += bits,
            EventClass::TransverseWrite => self.tw_bits += bits,
        }
        self.cycles += cycles;
    }

    pub fn bits(&self, class: EventClass) -> u64 {
        match class {
            EventClass::Shift => self.shift_bits,
            EventClass::Read => self.read_bits,
            EventClass::Write => self.write_bits,
            EventClass::TransverseRead => self.tr_bits,
            EventClass::TransverseWrite => self.tw_bits,
        }
    }

    /// Sequential composition: every field adds.
    pub fn merge(&self, other: &CostLedger) -> CostLedger {
        CostLedger {
            shift_bits: self.shift_bits + other.shift_bits,
            read_bits: self.read_bits + other.read_bits,
            write_bits: self.write_bits + other.write_bits,
            tr_bits: self.tr_bits + other.tr_bits,
            tw_bits: self.tw_bits + other.tw_bits,
            cycles: self.cycles + other.cycles,
        }
    }

    /// Concurrent composition of independent devices: bits add, elapsed
    /// cycles are the longer of the two.
    pub fn merge_parallel(&self, other: &CostLedger) -> CostLedger {
        CostLedger {
            cycles: self.cycles.max(other.cycles),
            ..self.merge(other)
        }
    }

    pub fn is_empty(&self) -> bool {
        *self == CostLedger::default()
    }
}

impl Add for CostLedger {
    type Output = CostLedger;
    fn add(self, rhs: CostLedger) -> CostLedger {
        self.merge(&rhs)
    }
}

impl AddAssign for CostLedger {
    fn add_assign(&mut self, rhs: CostLedger) {
        *self = self.merge(&rhs);
    }
}

/// One [`CostLedger`] per [`Phase`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhaseLedger {
    phases: [CostLedger; 4],
}

impl PhaseLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, phase: Phase) -> &CostLedger {
        &self.phases[phase.index()]
    }

    pub fn get_mut(&mut self, phase: Phase) -> &mut CostLedger {
        &mut self.phases[phase.index()]
    }

    pub fn total(&self) -> CostLedger {
        self.phases.iter().fold(CostLedger::default(), |a, b| a + *b)
    }

    pub fn merge(&self, other: &PhaseLedger) -> PhaseLedger {
        let mut out = *self;
        for (a, b) in out.phases.iter_mut().zip(&other.phases) {
            *a = a.merge(b);
        }
        out
    }

    pub fn merge_parallel(&self, other: &PhaseLedger) -> PhaseLedger {
        let mut out = *self;
        for (a, b) in out.phases.iter_mut().zip(&other.phases) {
            *a = a.merge_parallel(b);
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = (Phase, &CostLedger)> {
        Phase::ALL.into_iter().map(move |p| (p, self.get(p)))
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ParamError {
    #[error("energy parameter `{0}` must be finite and non-negative, got {1}")]
    Negative(&'static str, f64),
    #[error("clock frequency must be positive, got {0}")]
    Clock(f64),
}

/// Per-bit energies in pJ, background power in mW.
///
/// Read, shift and background values are the published device figures.
/// Write, transverse-read and transverse-write energies are not published;
/// they default to write = read, TR = read and TW = shift + write.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyParams {
    pub read_pj_per_bit: f64,
    pub shift_pj_per_bit: f64,
    pub write_pj_per_bit: f64,
    pub tr_pj_per_bit: f64,
    pub tw_pj_per_bit: f64,
    pub background_mw: f64,
    pub clock_hz: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            read_pj_per_bit: 0.5,
            shift_pj_per_bit: 0.3,
            write_pj_per_bit: 0.5,
            tr_pj_per_bit: 0.5,
            tw_pj_per_bit: 0.3 + 0.5,
            background_mw: 212.0,
            clock_hz: 1e9,
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        let fields = [
            ("read_pj_per_bit", self.read_pj_per_bit),
            ("shift_pj_per_bit", self.shift_pj_per_bit),
            ("write_pj_per_bit", self.write_pj_per_bit),
            ("tr_pj_per_bit", self.tr_pj_per_bit),
            ("tw_pj_per_bit", self.tw_pj_per_bit),
            ("background_mw", self.background_mw),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(ParamError::Negative(name, v));
            }
        }
        if !self.clock_hz.is_finite() || self.clock_hz <= 0.0 {
            return Err(ParamError::Clock(self.clock_hz));
        }
        Ok(())
    }

    pub fn pj_per_bit(&self, class: EventClass) -> f64 {
        match class {
            EventClass::Shift => self.shift_pj_per_bit,
            EventClass::Read => self.read_pj_per_bit,
            EventClass::Write => self.write_pj_per_bit,
            EventClass::TransverseRead => self.tr_pj_per_bit,
            EventClass::TransverseWrite => self.tw_pj_per_bit,
        }
    }
}

const CLASSES: [EventClass; 5] = [
    EventClass::Shift,
    EventClass::Read,
    EventClass::Write,
    EventClass::TransverseRead,
    EventClass::TransverseWrite,
];

/// Dynamic (per-bit) energy in nJ.
pub fn dynamic_energy_nj(ledger: &CostLedger, params: &EnergyParams) -> f64 {
    CLASSES
        .iter()
        .map(|&c| ledger.bits(c) as f64 * params.pj_per_bit(c))
        .sum::<f64>()
        / 1000.0
}

/// Background energy in nJ over the ledger's busy cycles.
pub fn background_energy_nj(ledger: &CostLedger, params: &EnergyParams) -> f64 {
    // mW * s = mJ; 1 mJ = 1e6 nJ
    params.background_mw * (ledger.cycles as f64 / params.clock_hz) * 1e6
}

pub fn energy_nj(ledger: &CostLedger, params: &EnergyParams) -> f64 {
    dynamic_energy_nj(ledger, params) + background_energy_nj(ledger, params)
}

pub fn latency_ns(ledger: &CostLedger, params: &EnergyParams) -> f64 {
    ledger.cycles as f64 / params.clock_hz * 1e9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub dynamic_nj: f64,
    pub background_nj: f64,
    pub total_nj: f64,
    pub cycles: u64,
    pub latency_ns: f64,
    pub events: CostLedger,
}

impl PhaseReport {
    pub fn new(ledger: &CostLedger, params: &EnergyParams) -> Self {
        let dynamic_nj = dynamic_energy_nj(ledger, params);
        let background_nj = background_energy_nj(ledger, params);
        Self {
            dynamic_nj,
            background_nj,
            total_nj: dynamic_nj + background_nj,
            cycles: ledger.cycles,
            latency_ns: latency_ns(ledger, params),
            events: *ledger,
        }
    }
}

/// Energy/latency report. `encoder_nj` covers the encode and bundle
/// phases, `simcheck_nj` the search phase; `total_nj` is the sum over all
/// phases including io.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub encoder_nj: f64,
    pub simcheck_nj: f64,
    pub io_nj: f64,
    pub total_nj: f64,
    pub dynamic_nj: f64,
    pub background_nj: f64,
    pub cycles: u64,
    pub runtime_ns: f64,
    pub phases: BTreeMap<String, PhaseReport>,
    pub params_echo: EnergyParams,
}

pub fn report(ledgers: &PhaseLedger, params: &EnergyParams) -> Report {
    let phases: BTreeMap<String, PhaseReport> = ledgers
        .iter()
        .map(|(p, l)| (p.name().to_string(), PhaseReport::new(l, params)))
        .collect();
    let nj = |p: Phase| phases[p.name()].total_nj;
    let total = ledgers.total();
    let dynamic_nj = phases.values().map(|p| p.dynamic_nj).sum();
    let background_nj = phases.values().map(|p| p.background_nj).sum();
    Report {
        encoder_nj: nj(Phase::Encode) + nj(Phase::Bundle),
        simcheck_nj: nj(Phase::Search),
        io_nj: nj(Phase::Io),
        total_nj: phases.values().map(|p| p.total_nj).sum(),
        dynamic_nj,
        background_nj,
        cycles: total.cycles,
        runtime_ns: latency_ns(&total, params),
        phases,
        params_echo: *params,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_ledger() -> impl Strategy<Value = CostLedger> {
        (
            0u64..1 << 30,
            0u64..1 << 30,
            0u64..1 << 30,
            0u64..1 << 30,
            0u64..1 << 30,
            0u64..1 << 30,
        )
            .prop_map(|(s, r, w, t, tw, c)| CostLedger {
                shift_bits: s,
                read_bits: r,
                write_bits: w,
                tr_bits: t,
                tw_bits: tw,
                cycles: c,
            })
    }

    #[test]
    fn record_read() {
        let mut l = CostLedger::new();
        l.record(EventClass::Read, 512, 1);
        assert_eq!(l.read_bits, 512);
        assert_eq!(l.cycles, 1);
    }

    #[test]
    fn two_records_equal_one_combined() {
        let mut a = CostLedger::new();
        a.record(EventClass::Write, 100, 1);
        a.record(EventClass::Write, 28, 2);
        let mut b = CostLedger::new();
        b.record(EventClass::Write, 128, 3);
        assert_eq!(a, b);
    }

    #[test]
    fn empty_ledger_has_no_energy() {
        assert_eq!(energy_nj(&CostLedger::new(), &EnergyParams::default()), 0.0);
    }

    #[test]
    fn thousand_shift_bits() {
        let mut l = CostLedger::new();
        l.record(EventClass::Shift, 1000, 0);
        let e = energy_nj(&l, &EnergyParams::default());
        assert!((e - 0.3).abs() < 1e-12, "{e}");
    }

    #[test]
    fn manual_arithmetic() {
        let l = CostLedger {
            shift_bits: 8192,
            read_bits: 4096,
            write_bits: 2048,
            tr_bits: 1024,
            tw_bits: 333,
            cycles: 77,
        };
        let p = EnergyParams::default();
        let manual =
            (8192.0 * 0.3 + 4096.0 * 0.5 + 2048.0 * 0.5 + 1024.0 * 0.5 + 333.0 * 0.8) / 1000.0 + 212e-3 * 77e-9 * 1e9;
        assert!((energy_nj(&l, &p) - manual).abs() < 1e-9);
        assert!((latency_ns(&l, &p) - 77.0).abs() < 1e-12);
    }

    #[test]
    fn negative_params_rejected() {
        let p = EnergyParams {
            shift_pj_per_bit: -0.1,
            ..EnergyParams::default()
        };
        assert!(matches!(p.validate(), Err(ParamError::Negative("shift_pj_per_bit", _))));
        let p = EnergyParams {
            clock_hz: 0.0,
            ..EnergyParams::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn report_totals() {
        let mut pl = PhaseLedger::new();
        pl.get_mut(Phase::Encode).record(EventClass::Read, 512, 3);
        let p = EnergyParams::default();
        let r = report(&pl, &p);
        assert_eq!(r.total_nj, r.encoder_nj);
        assert_eq!(r.cycles, 3);
        pl.get_mut(Phase::Search).record(EventClass::TransverseRead, 512, 1);
        let r = report(&pl, &p);
        assert!((r.total_nj - (r.encoder_nj + r.simcheck_nj)).abs() < 1e-12);
        let json = serde_json::to_value(&r).unwrap();
        for key in [
            "encoder_nj",
            "simcheck_nj",
            "total_nj",
            "cycles",
            "runtime_ns",
            "params_echo",
        ] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
    }

    proptest! {
        #[test]
        fn merge_commutes_and_associates(a in arb_ledger(), b in arb_ledger(), c in arb_ledger()) {
            prop_assert_eq!(a.merge(&b), b.merge(&a));
            prop_assert_eq!(a.merge(&b).merge(&c), a.merge(&b.merge(&c)));
            prop_assert_eq!(a.merge_parallel(&b), b.merge_parallel(&a));
            prop_assert_eq!(a.merge_parallel(&b).merge_parallel(&c), a.merge_parallel(&b.merge_parallel(&c)));
        }

        #[test]
        fn energy_is_linear(a in arb_ledger(), b in arb_ledger()) {
            let p = EnergyParams::default();
            let lhs = energy_nj(&a.merge(&b), &p);
            let rhs = energy_nj(&a, &p) + energy_nj(&b, &p);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0));
            let lat = latency_ns(&a.merge(&b), &p) - latency_ns(&a, &p) - latency_ns(&b, &p);
            prop_assert!(lat.abs() <= 1e-6);
        }

        #[test]
        fn scaling_a_parameter_scales_its_class(a in arb_ledger(), c in 0.0f64..10.0) {
            let p = EnergyParams { background_mw: 0.0, ..EnergyParams::default() };
            let only_tw = CostLedger { tw_bits: a.tw_bits, ..CostLedger::default() };
            let scaled = EnergyParams { tw_pj_per_bit: p.tw_pj_per_bit * c, ..p };
            let base = dynamic_energy_nj(&only_tw, &p);
            prop_assert!((dynamic_energy_nj(&only_tw, &scaled) - c * base).abs() <= 1e-9 * base.max(1.0));
        }
    }
}
