//! The HDC pipeline mapped onto the simulated racetrack array.
//!
//! Every subarray's compute tile is laid out the same way:
//!
//! ```text
//! DBC 0..=8    item memory (three symbols each), class vectors in spare rows
//! DBC 9        encoder ring
//! DBC 10..=15  bundling counter digits, DBC 10 least significant
//! ```
//!
//! A processing group (PG) is `D / 512` subarrays, chunk `j` of every
//! hypervector living in the group's `j`-th subarray. The similarity search
//! module uses one further subarray per class, laid out differently (see
//! [`SearchModule`]).

mod pg;
mod placement;
mod readout;
mod search;

pub use pg::{EncodeStats, ProcessingGroup, SegmentResult};
pub use placement::{plan_placement, ImPlacement, ImSlot};
pub use readout::{pack_counters, unpack_counters, CounterSnapshot, DigitSnapshot};
pub use search::SearchModule;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Symbol, ALPHABET};
use crate::cost::PhaseLedger;
use crate::counter::CounterError;
use crate::device::{DeviceError, DeviceGeometry};
use crate::hdc::{self, AssociativeMemory, HdcError, Hypervector, ItemMemory, CHUNK_BITS};

pub const IM_DBCS: usize = 9;
pub const ENCODER_DBC: usize = 9;
pub const COUNTER_DBC: usize = 10;
pub const COUNTER_DIGITS: usize = 6;
pub const SEARCH_RESULT_DBC: usize = 14;
pub const SEARCH_COUNTER_DBC: usize = 15;

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Hdc(#[from] HdcError),
    #[error(transparent)]
    Counter(#[from] CounterError),
    #[error("invalid engine configuration: {0}")]
    Config(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("{0}")]
    Mode(String),
}

pub type Result<T, E = EngineError> = std::result::Result<T, E>;

/// How per-bit counters turn into a class vector.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BundlingMode {
    /// Counters are read out and the controller thresholds the summed
    /// counts of all PGs against the global majority threshold.
    #[default]
    ExactSum,
    /// Counters are preset so that reaching the threshold overflows the
    /// most significant digit; the overflow latches the output bit and
    /// masks further increments. Single PG only.
    Preset,
}

impl std::str::FromStr for BundlingMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "exact-sum" => Ok(Self::ExactSum),
            "preset" => Ok(Self::Preset),
            _ => Err(format!("unknown bundling mode {s:?} (expected exact-sum or preset)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HdcrConfig {
    pub geometry: DeviceGeometry,
    pub num_pgs: usize,
    pub dim: usize,
    pub n: usize,
    pub seed: u64,
    pub mode: BundlingMode,
}

impl Default for HdcrConfig {
    fn default() -> Self {
        Self {
            geometry: DeviceGeometry::default(),
            num_pgs: 1,
            dim: hdc::DEFAULT_DIM,
            n: 4,
            seed: 0,
            mode: BundlingMode::ExactSum,
        }
    }
}

impl HdcrConfig {
    pub fn chunks(&self) -> usize {
        self.dim / CHUNK_BITS
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        g.validate()?;
        hdc::check_dim(self.dim)?;
        let bad = |m: String| Err(EngineError::Config(m));
        if self.num_pgs == 0 {
            return bad("num_pgs must be at least 1".into());
        }
        if g.tracks_per_dbc != CHUNK_BITS {
            return bad(format!("tracks_per_dbc must be {CHUNK_BITS}"));
        }
        if g.trd != crate::counter::DIGIT_WIDTH {
            return bad(format!("counters need trd = {}", crate::counter::DIGIT_WIDTH));
        }
        if g.dbcs_per_tile < 16 {
            return bad("the compute tile needs 16 DBCs".into());
        }
        if g.domains_per_track < 4 * g.trd {
            return bad(format!("need at least {} domains per track", 4 * g.trd));
        }
        if self.n == 0 || self.n >= g.trd {
            return bad(format!("n-gram length {} outside 1..={}", self.n, g.trd - 1));
        }
        if self.mode == BundlingMode::Preset && self.num_pgs != 1 {
            return Err(EngineError::Mode(
                "preset bundling thresholds each PG on its own; use exact-sum with several PGs".into(),
            ));
        }
        let need = self.num_pgs * self.chunks();
        if need > g.total_subarrays() {
            return Err(EngineError::Capacity(format!(
                "{} PGs of {} subarrays exceed the {} available",
                self.num_pgs,
                self.chunks(),
                g.total_subarrays()
            )));
        }
        Ok(())
    }
}

/// Splits the n-grams of a `len`-symbol text into `parts` contiguous runs
/// and returns the symbol range each run needs; consecutive ranges
/// overlap by `n - 1` symbols. Empty runs yield empty ranges.
pub fn split_segments(len: usize, n: usize, parts: usize) -> Vec<std::ops::Range<usize>> {
    let grams = (len + 1).saturating_sub(n);
    let (base, extra) = (grams / parts, grams % parts);
    let mut start = 0;
    (0..parts)
        .map(|p| {
            let count = base + usize::from(p < extra);
            let r = if count == 0 {
                start..start
            } else {
                start..start + count + n - 1
            };
            start += count;
            r
        })
        .collect()
}

/// Result of encoding one text on the device.
#[derive(Debug, Clone)]
pub struct Encoded {
    pub hv: Hypervector,
    pub ngrams: u64,
    pub ledger: PhaseLedger,
}

/// Processing groups sharing one item memory placement.
#[derive(Debug)]
pub struct Engine {
    config: HdcrConfig,
    im: ItemMemory,
    placement: ImPlacement,
    pgs: Vec<ProcessingGroup>,
    am_rows: Vec<ImSlot>,
    am_used: usize,
    setup: PhaseLedger,
    stats: EncodeStats,
}

impl Engine {
    /// Builds the PGs and writes the item memory into each of them.
    pub fn new(config: HdcrConfig, placement: ImPlacement) -> Result<Self> {
        config.validate()?;
        let im = hdc::gen_item_memory(config.seed, config.dim)?;
        let mut pgs = (0..config.num_pgs)
            .map(|p| ProcessingGroup::new(&config, p))
            .collect::<Result<Vec<_>>>()?;
        let mut setup = PhaseLedger::new();
        for pg in &mut pgs {
            pg.write_item_memory(&im, &placement)?;
            setup = setup.merge_parallel(&pg.take_ledger());
        }
        let am_rows = placement.spare_rows(config.geometry.domains_per_track);
        Ok(Self {
            config,
            im,
            placement,
            pgs,
            am_rows,
            am_used: 0,
            setup,
            stats: EncodeStats::default(),
        })
    }

    pub fn config(&self) -> &HdcrConfig {
        &self.config
    }

    pub fn item_memory(&self) -> &ItemMemory {
        &self.im
    }

    pub fn placement(&self) -> &ImPlacement {
        &self.placement
    }

    /// Cost of writing the item memory into every PG.
    pub fn setup_ledger(&self) -> &PhaseLedger {
        &self.setup
    }

    /// Fetch and schedule statistics accumulated over all encodes.
    pub fn stats(&self) -> &EncodeStats {
        &self.stats
    }

    pub fn pg(&self, i: usize) -> &ProcessingGroup {
        &self.pgs[i]
    }

    /// Encodes `text` across all PGs. PGs run concurrently, so their
    /// ledgers merge with the slowest group's cycle count.
    pub fn encode(&mut self, text: &[Symbol]) -> Result<Encoded> {
        let n = self.config.n;
        if text.len() < n {
            return Err(HdcError::TextTooShort { len: text.len(), n }.into());
        }
        for &s in text {
            debug_assert!(s.index() < ALPHABET);
        }
        let segments = split_segments(text.len(), n, self.pgs.len());
        let total = (text.len() + 1 - n) as u64;
        let (placement, mode) = (&self.placement, self.config.mode);
        let results: Vec<(SegmentResult, PhaseLedger)> = self
            .pgs
            .par_iter_mut()
            .zip(segments)
            .map(|(pg, r)| {
                let res = pg.encode_segment(&text[r], n, placement, mode, total)?;
                Ok((res, pg.take_ledger()))
            })
            .collect::<Result<_>>()?;

        let mut ledger = PhaseLedger::new();
        let mut sums = vec![0u64; self.config.dim];
        let mut flags = None;
        let mut ngrams = 0;
        for (res, l) in &results {
            ledger = ledger.merge_parallel(l);
            ngrams += res.ngrams;
            self.stats.absorb(&res.stats);
            for (a, &c) in sums.iter_mut().zip(&res.counts) {
                *a += c as u64;
            }
            if res.flags.is_some() {
                flags = res.flags.clone();
            }
        }
        debug_assert_eq!(ngrams, total);
        let hv = match (mode, flags) {
            (BundlingMode::Preset, Some(f)) => Hypervector::from_bits(f)?,
            _ => {
                let thr = total / 2;
                let bools: Vec<bool> = sums.iter().map(|&c| c > thr).collect();
                Hypervector::from_bits(crate::bits::BitBuf::from_bools(&bools))?
            }
        };
        Ok(Encoded { hv, ngrams, ledger })
    }

    /// Stores a class vector in the spare item-memory rows of the first PG.
    pub fn store_class(&mut self, hv: &Hypervector) -> Result<PhaseLedger> {
        let slot = *self.am_rows.get(self.am_used).ok_or_else(|| {
            EngineError::Capacity(format!(
                "associative memory holds at most {} classes",
                self.am_rows.len()
            ))
        })?;
        self.pgs[0].store_row(slot, hv)?;
        self.am_used += 1;
        Ok(self.pgs[0].take_ledger())
    }

    /// Reads back the `i`-th stored class vector (no cost recorded).
    pub fn peek_class(&self, i: usize) -> Option<Hypervector> {
        (i < self.am_used).then(|| self.pgs[0].peek_row(self.am_rows[i], self.config.chunks()))
    }
}

/// Training output: the memory plus its cost, in total and per class.
#[derive(Debug, Clone)]
pub struct Trained {
    pub am: AssociativeMemory,
    pub placement: ImPlacement,
    /// Everything: setup plus every class.
    pub ledger: PhaseLedger,
    /// Writing the item memory.
    pub setup: PhaseLedger,
    pub per_class: Vec<(String, PhaseLedger)>,
    pub stats: EncodeStats,
}

/// Symbol frequencies over every training text, for placement.
pub fn corpus_frequencies<'a>(texts: impl IntoIterator<Item = &'a [Symbol]>) -> [u64; ALPHABET] {
    let mut f = [0u64; ALPHABET];
    for t in texts {
        for s in t {
            f[s.index()] += 1;
        }
    }
    f
}

/// Trains every class on the device. The ledger includes writing the item
/// memory, encoding each text and storing each class vector.
pub fn train_on_device<L, T>(config: &HdcrConfig, corpus: &[(L, T)]) -> Result<Trained>
where
    L: AsRef<str>,
    T: AsRef<[Symbol]>,
{
    let freq = corpus_frequencies(corpus.iter().map(|(_, t)| t.as_ref()));
    let placement = plan_placement(&freq)?;
    let mut engine = Engine::new(config.clone(), placement.clone())?;
    let setup = *engine.setup_ledger();
    let mut ledger = setup;
    let mut am = AssociativeMemory::new();
    let mut per_class = Vec::new();
    for (label, text) in corpus {
        let enc = engine.encode(text.as_ref())?;
        let store = engine.store_class(&enc.hv)?;
        let l = enc.ledger.merge(&store);
        ledger = ledger.merge(&l);
        per_class.push((label.as_ref().to_string(), l));
        am.insert(label.as_ref(), enc.hv)?;
    }
    Ok(Trained {
        am,
        placement,
        ledger,
        setup,
        per_class,
        stats: engine.stats().clone(),
    })
}

/// One on-device classification.
#[derive(Debug, Clone)]
pub struct DeviceClassification {
    pub label: String,
    pub distances: Vec<(String, u32)>,
    pub query: Hypervector,
    pub ngrams: u64,
    pub ledger: PhaseLedger,
}

/// Encoder plus similarity search, set up once and reused per query.
#[derive(Debug)]
pub struct Pipeline {
    pub engine: Engine,
    pub search: SearchModule,
}

impl Pipeline {
    pub fn new(config: &HdcrConfig, placement: ImPlacement, am: &AssociativeMemory) -> Result<Self> {
        let engine = Engine::new(config.clone(), placement)?;
        let search = SearchModule::load(config, am)?;
        Ok(Self { engine, search })
    }

    /// Setup cost: item memory plus class vectors in the search subarrays.
    pub fn setup_ledger(&self) -> PhaseLedger {
        self.engine.setup_ledger().merge(self.search.setup_ledger())
    }

    pub fn classify(&mut self, text: &[Symbol]) -> Result<DeviceClassification> {
        let enc = self.engine.encode(text)?;
        let (distances, search) = self.search.search(&enc.hv)?;
        let d: Vec<u32> = distances.iter().map(|(_, d)| *d).collect();
        let best = hdc::argmin_first(&d).ok_or(HdcError::EmptyMemory)?;
        Ok(DeviceClassification {
            label: distances[best].0.clone(),
            distances,
            query: enc.hv,
            ngrams: enc.ngrams,
            ledger: enc.ledger.merge(&search),
        })
    }
}

/// Encodes and classifies one text on a freshly set-up device. Setup cost
/// is not part of the returned ledger.
pub fn classify_on_device(
    config: &HdcrConfig,
    placement: ImPlacement,
    am: &AssociativeMemory,
    text: &[Symbol],
) -> Result<DeviceClassification> {
    Pipeline::new(config, placement, am)?.classify(text)
}
