//! Embedded oracle checks, runnable from the command line.

use std::time::Instant;

use serde::Serialize;

use crate::bits::BitBuf;
use crate::cim::{cimop, CimOpKind, CimRequest};
use crate::corpus::{synth_corpus, Symbol, SynthOptions};
use crate::counter::RtmCounter;
use crate::device::{DbcAddr, Device, DeviceGeometry};
use crate::engine::{train_on_device, BundlingMode, HdcrConfig, Pipeline};
use crate::hdc::{self, AssociativeMemory, EncodeParams};

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub millis: u128,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelftestReport {
    pub quick: bool,
    pub checks: Vec<CheckResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

type Check = fn(bool) -> Result<String, String>;

const CHECKS: &[(&str, Check)] = &[
    ("counter-exhaustive", counter_exhaustive),
    ("counter-threshold", counter_threshold),
    ("tr-logic", tr_logic),
    ("container-roundtrip", container_roundtrip),
    ("pipeline-equivalence", pipeline_equivalence),
    ("partition-invariance", partition_invariance),
];

/// Runs every check. `quick` shrinks the pipeline checks to a sub-second
/// budget; the counter and logic checks are always exhaustive.
pub fn run(quick: bool) -> SelftestReport {
    let checks = CHECKS
        .iter()
        .map(|(name, f)| {
            let t = Instant::now();
            let r = f(quick);
            let millis = t.elapsed().as_millis();
            let (passed, detail) = match r {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            CheckResult {
                name,
                passed,
                detail,
                millis,
            }
        })
        .collect();
    SelftestReport { quick, checks }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn counter_exhaustive(_: bool) -> Result<String, String> {
    let mut c = RtmCounter::new(3);
    for k in 0..=999u64 {
        let v = c.value().map_err(|e| e.to_string())?;
        ensure(v == k, || format!("after {k} increments the counter reads {v}"))?;
        if k < 999 {
            c.increment(1).map_err(|e| e.to_string())?;
        }
    }
    ensure(c.increment(1).is_err(), || "increment past 999 was accepted".into())?;
    Ok("0..=999 on 3 digits".into())
}

fn counter_threshold(_: bool) -> Result<String, String> {
    for t in 1..=99u64 {
        let mut c = RtmCounter::new(2);
        c.preset_threshold(t).map_err(|e| e.to_string())?;
        for k in 0..=99u64 {
            let hit = c.threshold_hit().map_err(|e| e.to_string())?;
            ensure(hit == (k >= t), || format!("threshold {t}: hit={hit} after {k}"))?;
            c.increment(1).map_err(|e| e.to_string())?;
        }
    }
    Ok("thresholds 1..=99 on 2 digits".into())
}

fn tr_logic(_: bool) -> Result<String, String> {
    let g = DeviceGeometry::default();
    let mut dev = Device::new(g.clone()).map_err(|e| e.to_string())?;
    let addr = DbcAddr::new(0, 0, g.cim_tile(), 0);
    for size in 1..=g.trd as u8 {
        // track t holds column pattern t mod 2^size in its first `size` rows
        let patterns = 1usize << size;
        let rows: Vec<BitBuf> = (0..g.trd)
            .map(|r| {
                let bools: Vec<bool> = (0..g.tracks_per_dbc)
                    .map(|t| r < size as usize && (t % patterns) >> r & 1 == 1)
                    .collect();
                BitBuf::from_bools(&bools)
            })
            .collect();
        for (r, row) in rows.iter().enumerate() {
            dev.write_at(addr.at(r), row).map_err(|e| e.to_string())?;
        }
        for op in [CimOpKind::And, CimOpKind::Or, CimOpKind::Xor] {
            let out = cimop(
                &mut dev,
                CimRequest {
                    src: addr.at(0),
                    size,
                    op,
                },
            )
            .map_err(|e| e.to_string())?;
            for t in 0..g.tracks_per_dbc {
                let ones = (t % patterns).count_ones();
                let want = match op {
                    CimOpKind::And => ones == size as u32,
                    CimOpKind::Or => ones > 0,
                    _ => ones % 2 == 1,
                };
                ensure(out.get(t) == want, || {
                    format!("{op} size {size} column {:05b}: got {}", t % patterns, out.get(t))
                })?;
            }
        }
    }
    Ok("AND/OR/XOR over every column of sizes 1..=5".into())
}

fn container_roundtrip(_: bool) -> Result<String, String> {
    let im = hdc::gen_item_memory(11, 1024).map_err(|e| e.to_string())?;
    let bytes = im.to_container_bytes();
    let c = hdc::read_container(&mut bytes.as_slice()).map_err(|e| e.to_string())?;
    ensure(c.entries.len() == 27 && c.seed == 11 && c.dim == 1024, || {
        "header mismatch".into()
    })?;
    for ((label, hv), (s, want)) in c.entries.iter().zip(im.iter()) {
        ensure(*label == s.to_char().to_string() && hv == want, || {
            format!("entry {s} differs")
        })?;
    }
    Ok(format!("{} bytes", bytes.len()))
}

type Texts = Vec<(String, Vec<Symbol>)>;

fn tiny_corpus(quick: bool) -> (HdcrConfig, Texts, Texts) {
    let ds = synth_corpus(
        7,
        &SynthOptions {
            languages: 3,
            train_len: if quick { 300 } else { 1500 },
            sentences: if quick { 3 } else { 10 },
            sentence_len: 120,
            ..Default::default()
        },
    );
    let config = HdcrConfig {
        dim: if quick { 1024 } else { hdc::DEFAULT_DIM },
        seed: 7,
        ..Default::default()
    };
    let train = ds
        .train
        .iter()
        .map(|(l, t)| (l.clone(), t.symbols().to_vec()))
        .collect();
    let tests = ds
        .usable_tests(config.n)
        .map(|(l, s)| (l.to_string(), s.symbols().to_vec()))
        .collect();
    (config, train, tests)
}

fn reference_am(config: &HdcrConfig, train: &[(String, Vec<Symbol>)]) -> Result<AssociativeMemory, String> {
    let p = EncodeParams {
        n: config.n,
        dim: config.dim,
        seed: config.seed,
    };
    hdc::train(train.iter().map(|(l, t)| (l.clone(), t)), &p).map_err(|e| e.to_string())
}

fn pipeline_equivalence(quick: bool) -> Result<String, String> {
    let (config, train, tests) = tiny_corpus(quick);
    let reference = reference_am(&config, &train)?;
    let trained = train_on_device(&config, &train).map_err(|e| e.to_string())?;
    ensure(trained.am == reference, || {
        "class vectors differ from the reference".into()
    })?;
    ensure(trained.stats.max_fetch_shifts() <= 1, || {
        "a symbol fetch needed more than one shift".into()
    })?;
    let mut pipe = Pipeline::new(&config, trained.placement, &trained.am).map_err(|e| e.to_string())?;
    let im = hdc::gen_item_memory(config.seed, config.dim).map_err(|e| e.to_string())?;
    for (label, s) in &tests {
        let dev = pipe.classify(s).map_err(|e| e.to_string())?;
        let q = hdc::encode_with(s, config.n, &im).map_err(|e| e.to_string())?;
        let r = hdc::classify(&q, &reference).map_err(|e| e.to_string())?;
        ensure(dev.query == q, || {
            format!("query vector differs for a {label} sentence")
        })?;
        ensure(dev.distances == r.distances, || {
            format!("distances differ for a {label} sentence")
        })?;
    }
    Ok(format!(
        "D={} {} classes {} queries",
        config.dim,
        train.len(),
        tests.len()
    ))
}

fn partition_invariance(quick: bool) -> Result<String, String> {
    let (config, train, _) = tiny_corpus(quick);
    let reference = reference_am(&config, &train)?;
    let mut variants = vec![(2usize, BundlingMode::ExactSum), (1, BundlingMode::Preset)];
    if !quick {
        variants.push((4, BundlingMode::ExactSum));
    }
    for (num_pgs, mode) in variants {
        let c = HdcrConfig {
            num_pgs,
            mode,
            ..config.clone()
        };
        let am = train_on_device(&c, &train).map_err(|e| e.to_string())?.am;
        ensure(am == reference, || {
            format!("{num_pgs} PGs ({mode:?}) differ from the reference")
        })?;
    }
    Ok(if quick {
        "1 and 2 PGs, preset"
    } else {
        "1, 2 and 4 PGs, preset"
    }
    .into())
}
