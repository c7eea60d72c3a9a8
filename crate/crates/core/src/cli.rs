//! The `hdcr` command line. The binary only calls [`main`]; everything
//! else lives here so it can be tested in-process.
//!
//! Exit codes: 0 success, 2 input or configuration error, 3 precondition
//! violation (text too short, empty input), 4 internal invariant failure
//! (including any device/reference disagreement).

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, RunConfig};
use crate::corpus::{self, normalize, synth_corpus, NormalizedText, SynthOptions};
use crate::cost::{report, EnergyParams, Report};
use crate::device::Device;
use crate::engine::{train_on_device, BundlingMode, EngineError, ImPlacement, Pipeline};
use crate::hdc::{self, AssociativeMemory, HdcError};
use crate::{selftest, trace};

pub const LAYOUT_FORMAT: &str = "hdcr-layout";
pub const LAYOUT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Precondition(String),
    #[error("{0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Precondition(_) => 3,
            CliError::Invariant(_) => 4,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<corpus::CorpusError> for CliError {
    fn from(e: corpus::CorpusError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<HdcError> for CliError {
    fn from(e: HdcError) -> Self {
        match e {
            HdcError::TextTooShort { .. } => CliError::Precondition(e.to_string()),
            HdcError::Container(_) | HdcError::Dimension(_) | HdcError::NgramZero | HdcError::DuplicateLabel(_) => {
                CliError::Input(e.to_string())
            }
            _ => CliError::Invariant(e.to_string()),
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Hdc(h) => h.into(),
            EngineError::Config(_) | EngineError::Mode(_) | EngineError::Capacity(_) => CliError::Input(e.to_string()),
            EngineError::Device(_) | EngineError::Counter(_) => CliError::Invariant(e.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Input(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(
    name = "hdcr",
    version,
    about = "Racetrack-memory HDC language recognition simulator"
)]
pub struct Cli {
    #[command(flatten)]
    pub opts: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalOpts {
    /// JSON run configuration; flags override it
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Hypervector dimension, a multiple of 512
    #[arg(long, global = true, value_name = "D")]
    pub dim: Option<usize>,
    #[arg(long, global = true, value_name = "N")]
    pub ngram: Option<usize>,
    /// Processing groups used by the encoder
    #[arg(long, global = true, value_name = "COUNT")]
    pub pgs: Option<usize>,
    /// exact-sum or preset
    #[arg(long, global = true)]
    pub mode: Option<BundlingMode>,
    /// Print machine-readable JSON instead of text
    #[arg(long, global = true)]
    pub json: bool,
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// selftest: sub-second subset; eval: at most 10 sentences per language
    #[arg(long, global = true)]
    pub quick: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train class vectors on the device from DIR/<label>.txt (or DIR/train/)
    Train { data: PathBuf },
    /// Classify one text with a trained model
    Classify {
        model: PathBuf,
        /// Text to classify; otherwise --file, otherwise stdin
        #[arg(long, conflicts_with = "file")]
        text: Option<String>,
        #[arg(long, value_name = "PATH")]
        file: Option<PathBuf>,
    },
    /// Accuracy of both pipelines on DIR/<label>.txt (or DIR/test/), one sentence per line
    Eval {
        model: PathBuf,
        data: PathBuf,
        /// At most this many sentences per language
        #[arg(long)]
        limit: Option<usize>,
        /// Also write one CSV row per query
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
    },
    /// Run the embedded oracle checks
    Selftest,
    /// Write a synthetic corpus to --out DIR (train/ and test/)
    Synth {
        #[arg(long, default_value_t = 5)]
        languages: usize,
        #[arg(long, default_value_t = 5000)]
        train_len: usize,
        #[arg(long, default_value_t = 100)]
        sentences: usize,
        #[arg(long, default_value_t = 150)]
        sentence_len: usize,
    },
    /// Cost of one average query against a memory of synthetic classes
    Cost {
        #[arg(long, default_value_t = 150)]
        length: usize,
        #[arg(long, default_value_t = 22)]
        classes: usize,
    },
    /// Execute a micro-op trace file
    Trace { file: PathBuf },
}

/// Everything a model needs besides its class vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layout {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub config: RunConfig,
    pub num_pgs: usize,
    pub labels: Vec<String>,
    pub placement: ImPlacement,
}

pub fn layout_path(model: &Path) -> PathBuf {
    let mut s = model.as_os_str().to_owned();
    s.push(".layout.json");
    PathBuf::from(s)
}

pub fn train_report_path(model: &Path) -> PathBuf {
    let mut s = model.as_os_str().to_owned();
    s.push(".train.json");
    PathBuf::from(s)
}

/// Base config from `--config` (or defaults), then flag overrides.
pub fn resolve_config(opts: &GlobalOpts) -> Result<RunConfig, CliError> {
    let mut c = match &opts.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let e = &mut c.engine;
    if let Some(v) = opts.seed {
        e.seed = v;
    }
    if let Some(v) = opts.dim {
        e.dim = v;
    }
    if let Some(v) = opts.ngram {
        e.n = v;
    }
    if let Some(v) = opts.pgs {
        e.num_pgs = v;
    }
    if let Some(v) = opts.mode {
        e.mode = v;
    }
    c.validate()?;
    Ok(c)
}

pub struct Model {
    pub am: AssociativeMemory,
    pub layout: Layout,
    pub config: RunConfig,
}

/// Loads a model and its sidecar. Dimension, n-gram length and seed come
/// from the model; geometry, PG count, mode and energy parameters may be
/// overridden, and overriding a model-defining value is an error.
pub fn load_model(path: &Path, opts: &GlobalOpts) -> Result<Model, CliError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    let (am, seed) = AssociativeMemory::from_container_bytes(&bytes)?;
    let lp = layout_path(path);
    let text = std::fs::read_to_string(&lp).map_err(io_err(&lp))?;
    let layout: Layout = serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", lp.display())))?;
    if layout.format != LAYOUT_FORMAT || layout.version != LAYOUT_VERSION {
        return Err(CliError::Input(format!(
            "{}: not a version {LAYOUT_VERSION} layout",
            lp.display()
        )));
    }
    let m = &layout.config.engine;
    if seed != m.seed || am.dim() != Some(m.dim) || am.labels().ne(layout.labels.iter().map(String::as_str)) {
        return Err(CliError::Input(format!(
            "{} does not match its layout sidecar",
            path.display()
        )));
    }
    for (flag, given, model) in [
        ("--seed", opts.seed.map(|v| v as usize), m.seed as usize),
        ("--dim", opts.dim, m.dim),
        ("--ngram", opts.ngram, m.n),
    ] {
        if given.is_some_and(|g| g != model) {
            return Err(CliError::Input(format!("{flag} conflicts with the model ({model})")));
        }
    }
    let mut config = layout.config.clone();
    if let Some(p) = &opts.config {
        let file = RunConfig::load(p)?;
        config.energy = file.energy;
        config.engine.geometry = file.engine.geometry;
        config.engine.num_pgs = file.engine.num_pgs;
        config.engine.mode = file.engine.mode;
    }
    if let Some(v) = opts.pgs {
        config.engine.num_pgs = v;
    }
    if let Some(v) = opts.mode {
        config.engine.mode = v;
    }
    config.validate()?;
    Ok(Model { am, layout, config })
}

fn data_subdir(dir: &Path, sub: &str) -> PathBuf {
    let d = dir.join(sub);
    if d.is_dir() {
        d
    } else {
        dir.to_path_buf()
    }
}

fn write_out(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(io_err(path))
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes") + "\n"
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassCost {
    pub label: String,
    pub symbols: usize,
    pub ngrams: u64,
    pub cycles: u64,
    pub energy_nj: f64,
    pub report: Report,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub config_hash: String,
    pub config: RunConfig,
    pub model: String,
    pub classes: Vec<ClassCost>,
    /// Writing the item memory into every PG.
    pub setup: Report,
    /// Setup plus every class.
    pub total: Report,
    /// Number of symbol fetches needing 0, 1, ... shifts.
    pub fetch_shift_histogram: Vec<u64>,
}

fn cmd_train(opts: &GlobalOpts, data: &Path) -> Result<String, CliError> {
    let config = resolve_config(opts)?;
    let dir = data_subdir(data, "train");
    let train = corpus::load_train_dir(&dir)?;
    let n = config.engine.n;
    if let Some((l, t)) = train.iter().find(|(_, t)| t.len() < n) {
        return Err(CliError::Precondition(format!(
            "training text {l:?} has {} symbols, fewer than n = {n}",
            t.len()
        )));
    }
    let pairs: Vec<(&String, &[corpus::Symbol])> = train.iter().map(|(l, t)| (l, t.symbols())).collect();
    let trained = train_on_device(&config.engine, &pairs)?;

    let out = opts.out.clone().unwrap_or_else(|| PathBuf::from("model.hdcv"));
    let layout = Layout {
        format: LAYOUT_FORMAT.into(),
        version: LAYOUT_VERSION,
        config_hash: config.hash(),
        config: config.clone(),
        num_pgs: config.engine.num_pgs,
        labels: trained.am.labels().map(str::to_string).collect(),
        placement: trained.placement.clone(),
    };
    let classes: Vec<ClassCost> = trained
        .per_class
        .iter()
        .map(|(label, l)| {
            let r = report(l, &config.energy);
            let symbols = train[label].len();
            ClassCost {
                label: label.clone(),
                symbols,
                ngrams: (symbols + 1 - n) as u64,
                cycles: r.cycles,
                energy_nj: r.total_nj,
                report: r,
            }
        })
        .collect();
    let rep = TrainReport {
        config_hash: config.hash(),
        config: config.clone(),
        model: out.display().to_string(),
        classes,
        setup: report(&trained.setup, &config.energy),
        total: report(&trained.ledger, &config.energy),
        fetch_shift_histogram: trained.stats.fetch_shifts.clone(),
    };

    write_out(&out, &trained.am.to_container_bytes(config.engine.seed))?;
    write_out(&layout_path(&out), to_json(&layout).as_bytes())?;
    write_out(&train_report_path(&out), to_json(&rep).as_bytes())?;

    if opts.json {
        return Ok(to_json(&rep));
    }
    let mut s = format!("trained {} classes into {}\n", rep.classes.len(), out.display());
    s += &format!(
        "{:<12} {:>9} {:>12} {:>14}\n",
        "language", "symbols", "cycles", "energy [nJ]"
    );
    for c in &rep.classes {
        s += &format!(
            "{:<12} {:>9} {:>12} {:>14.1}\n",
            c.label, c.symbols, c.cycles, c.energy_nj
        );
    }
    s += &format!(
        "{:<12} {:>9} {:>12} {:>14.1}\n",
        "total", "", rep.total.cycles, rep.total.total_nj
    );
    s += &format!("config {}\n", rep.config_hash);
    Ok(s)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Distance {
    pub label: String,
    pub distance: u32,
}

/// One classified query.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryRecord {
    pub label: String,
    pub distances: Vec<Distance>,
    pub symbols: usize,
    pub ngrams: u64,
    pub cycles: u64,
    pub energy_nj: f64,
    pub report: Report,
    pub config_hash: String,
}

fn read_query(text: Option<&str>, file: Option<&Path>) -> Result<NormalizedText, CliError> {
    let raw = match (text, file) {
        (Some(t), _) => t.to_string(),
        (None, Some(p)) => std::fs::read_to_string(p).map_err(io_err(p))?,
        (None, None) => {
            let mut s = String::new();
            std::io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| CliError::Input(format!("stdin: {e}")))?;
            s
        }
    };
    // a single trailing line break is not part of the text
    let raw = raw.strip_suffix('\n').unwrap_or(&raw);
    let raw = raw.strip_suffix('\r').unwrap_or(raw);
    if raw.is_empty() {
        return Err(CliError::Precondition("empty input".into()));
    }
    Ok(normalize(raw))
}

fn cmd_classify(opts: &GlobalOpts, model: &Path, text: Option<&str>, file: Option<&Path>) -> Result<String, CliError> {
    let m = load_model(model, opts)?;
    let q = read_query(text, file)?;
    let mut pipe = Pipeline::new(&m.config.engine, m.layout.placement.clone(), &m.am)?;
    let out = pipe.classify(q.symbols())?;
    let r = report(&out.ledger, &m.config.energy);
    let rec = QueryRecord {
        label: out.label,
        distances: out
            .distances
            .into_iter()
            .map(|(label, distance)| Distance { label, distance })
            .collect(),
        symbols: q.len(),
        ngrams: out.ngrams,
        cycles: r.cycles,
        energy_nj: r.total_nj,
        report: r,
        config_hash: m.config.hash(),
    };
    Ok(if opts.json {
        to_json(&rec)
    } else {
        format!("{}\n", rec.label)
    })
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LanguageAccuracy {
    pub label: String,
    pub sentences: usize,
    /// Sentences shorter than n, not classified.
    pub skipped: usize,
    pub reference_correct: usize,
    pub device_correct: usize,
    pub reference_accuracy: f64,
    pub device_accuracy: f64,
    pub agreement: f64,
}

/// Mean cost of one query, split as encoder / similarity check / total.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AverageQuery {
    pub encoder_nj: f64,
    pub simcheck_nj: f64,
    pub io_nj: f64,
    pub total_nj: f64,
    pub dynamic_nj: f64,
    pub background_nj: f64,
    pub cycles: f64,
    pub runtime_ns: f64,
    pub symbols: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub config_hash: String,
    pub config: RunConfig,
    pub languages: Vec<LanguageAccuracy>,
    pub overall: LanguageAccuracy,
    pub average_query: AverageQuery,
    /// Writing the item memory and the class vectors.
    pub setup: Report,
    pub params_echo: EnergyParams,
}

#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    label: &'a str,
    index: usize,
    symbols: usize,
    reference: &'a str,
    device: &'a str,
    agree: bool,
    cycles: u64,
    encoder_nj: f64,
    simcheck_nj: f64,
    total_nj: f64,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn cmd_eval(
    opts: &GlobalOpts,
    model: &Path,
    data: &Path,
    limit: Option<usize>,
    csv_path: Option<&Path>,
) -> Result<String, CliError> {
    let m = load_model(model, opts)?;
    let tests = corpus::load_test_dir(&data_subdir(data, "test"))?;
    if let Some(l) = tests.keys().find(|l| m.am.get(l).is_none()) {
        return Err(CliError::Input(format!("test label {l:?} is not in the model")));
    }
    let limit = limit.or(opts.quick.then_some(10)).unwrap_or(usize::MAX);
    let e = &m.config.engine;
    let im = hdc::gen_item_memory(e.seed, e.dim)?;
    let mut pipe = Pipeline::new(e, m.layout.placement.clone(), &m.am)?;
    let setup = pipe.setup_ledger();
    let mut csv = match csv_path {
        Some(p) => Some(csv::Writer::from_path(p).map_err(|err| CliError::Input(format!("{}: {err}", p.display())))?),
        None => None,
    };

    let mut languages = Vec::new();
    let mut sum = AverageQuery::default();
    let mut queries = 0usize;
    let mut disagreements = Vec::new();
    for (label, sentences) in &tests {
        let mut acc = LanguageAccuracy {
            label: label.clone(),
            ..Default::default()
        };
        let mut agree = 0;
        for (i, s) in sentences.iter().take(limit).enumerate() {
            if s.len() < e.n {
                acc.skipped += 1;
                continue;
            }
            acc.sentences += 1;
            let q = hdc::encode_with(s.symbols(), e.n, &im)?;
            let r = hdc::classify(&q, &m.am)?;
            let d = pipe.classify(s.symbols())?;
            let same = d.query == q && d.distances == r.distances && d.label == r.label;
            if same {
                agree += 1;
            } else {
                disagreements.push(format!("{label} sentence {i}"));
            }
            acc.reference_correct += usize::from(r.label == *label);
            acc.device_correct += usize::from(d.label == *label);
            let rep = report(&d.ledger, &m.config.energy);
            sum.encoder_nj += rep.encoder_nj;
            sum.simcheck_nj += rep.simcheck_nj;
            sum.io_nj += rep.io_nj;
            sum.total_nj += rep.total_nj;
            sum.dynamic_nj += rep.dynamic_nj;
            sum.background_nj += rep.background_nj;
            sum.cycles += rep.cycles as f64;
            sum.runtime_ns += rep.runtime_ns;
            sum.symbols += s.len() as f64;
            queries += 1;
            if let Some(w) = csv.as_mut() {
                w.serialize(CsvRow {
                    label,
                    index: i,
                    symbols: s.len(),
                    reference: &r.label,
                    device: &d.label,
                    agree: same,
                    cycles: rep.cycles,
                    encoder_nj: rep.encoder_nj,
                    simcheck_nj: rep.simcheck_nj,
                    total_nj: rep.total_nj,
                })
                .map_err(|err| CliError::Input(format!("csv: {err}")))?;
            }
        }
        acc.reference_accuracy = ratio(acc.reference_correct, acc.sentences);
        acc.device_accuracy = ratio(acc.device_correct, acc.sentences);
        acc.agreement = ratio(agree, acc.sentences);
        languages.push(acc);
    }
    if let Some(mut w) = csv {
        w.flush().map_err(|err| CliError::Input(format!("csv: {err}")))?;
    }
    if queries == 0 {
        return Err(CliError::Precondition("no test sentence holds a full n-gram".into()));
    }

    let mut overall = LanguageAccuracy {
        label: "overall".into(),
        ..Default::default()
    };
    for l in &languages {
        overall.sentences += l.sentences;
        overall.skipped += l.skipped;
        overall.reference_correct += l.reference_correct;
        overall.device_correct += l.device_correct;
    }
    overall.reference_accuracy = ratio(overall.reference_correct, overall.sentences);
    overall.device_accuracy = ratio(overall.device_correct, overall.sentences);
    overall.agreement = ratio(overall.sentences - disagreements.len(), overall.sentences);
    let k = queries as f64;
    let average_query = AverageQuery {
        encoder_nj: sum.encoder_nj / k,
        simcheck_nj: sum.simcheck_nj / k,
        io_nj: sum.io_nj / k,
        total_nj: sum.total_nj / k,
        dynamic_nj: sum.dynamic_nj / k,
        background_nj: sum.background_nj / k,
        cycles: sum.cycles / k,
        runtime_ns: sum.runtime_ns / k,
        symbols: sum.symbols / k,
    };
    let rep = EvalReport {
        config_hash: m.config.hash(),
        config: m.config.clone(),
        languages,
        overall,
        average_query,
        setup: report(&setup, &m.config.energy),
        params_echo: m.config.energy,
    };
    if let Some(p) = &opts.out {
        write_out(p, to_json(&rep).as_bytes())?;
    }
    if !disagreements.is_empty() {
        return Err(CliError::Invariant(format!(
            "device and reference pipelines disagree on {} queries, first {}",
            disagreements.len(),
            disagreements[0]
        )));
    }
    if opts.json {
        return Ok(to_json(&rep));
    }
    let pct = |x: f64| format!("{:.2}%", 100.0 * x);
    let mut s = format!(
        "{:<12} {:>9} {:>10} {:>10} {:>10}\n",
        "language", "sentences", "reference", "device", "agreement"
    );
    for l in rep.languages.iter().chain([&rep.overall]) {
        s += &format!(
            "{:<12} {:>9} {:>10} {:>10} {:>10}\n",
            l.label,
            l.sentences,
            pct(l.reference_accuracy),
            pct(l.device_accuracy),
            pct(l.agreement)
        );
    }
    let a = &rep.average_query;
    s += &format!("\naverage energy per query ({:.1} symbols)\n", a.symbols);
    s += &format!("{:<10} {:>10} {:>10} {:>10}\n", "", "Encoder", "Sim_Check", "Total");
    s += &format!(
        "{:<10} {:>10.2} {:>10.2} {:>10.2}\n",
        "HDCR [nJ]", a.encoder_nj, a.simcheck_nj, a.total_nj
    );
    s += &format!("cycles per query {:.1}\n", a.cycles);
    let p = &rep.params_echo;
    s += &format!(
        "pJ/bit: read {} shift {} write {} tr {} tw {}; background {} mW; clock {} Hz\n",
        p.read_pj_per_bit,
        p.shift_pj_per_bit,
        p.write_pj_per_bit,
        p.tr_pj_per_bit,
        p.tw_pj_per_bit,
        p.background_mw,
        p.clock_hz
    );
    s += &format!("config {}\n", rep.config_hash);
    Ok(s)
}

fn cmd_selftest(opts: &GlobalOpts) -> Result<String, CliError> {
    if let Some(p) = &opts.config {
        RunConfig::load(p)?.validate()?;
    }
    let r = selftest::run(opts.quick);
    let text = if opts.json {
        to_json(&r)
    } else {
        let mut s = String::new();
        for c in &r.checks {
            let verdict = if c.passed { "ok  " } else { "FAIL" };
            s += &format!("{verdict} {:<22} {:>6} ms  {}\n", c.name, c.millis, c.detail);
        }
        s
    };
    if r.passed() {
        Ok(text)
    } else {
        print!("{text}");
        Err(CliError::Invariant("selftest failed".into()))
    }
}

fn cmd_synth(opts: &GlobalOpts, synth: SynthOptions) -> Result<String, CliError> {
    let out = opts
        .out
        .clone()
        .ok_or_else(|| CliError::Input("synth needs --out DIR".into()))?;
    if synth.languages == 0 || synth.train_len == 0 || synth.sentences == 0 || synth.sentence_len == 0 {
        return Err(CliError::Input("synthetic corpus sizes must be positive".into()));
    }
    let ds = synth_corpus(opts.seed.unwrap_or(0), &synth);
    corpus::write_dataset(&ds, &out)?;
    Ok(format!("wrote {} languages to {}\n", ds.train.len(), out.display()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostReport {
    pub config_hash: String,
    pub classes: usize,
    pub symbols: usize,
    pub query: Report,
}

fn cmd_cost(opts: &GlobalOpts, length: usize, classes: usize) -> Result<String, CliError> {
    let config = resolve_config(opts)?;
    if classes == 0 || length < config.engine.n {
        return Err(CliError::Precondition(format!(
            "need at least one class and a query of at least {} symbols",
            config.engine.n
        )));
    }
    let ds = synth_corpus(
        opts.seed.unwrap_or(0),
        &SynthOptions {
            languages: classes,
            train_len: 2000,
            sentences: 1,
            sentence_len: length,
            ..Default::default()
        },
    );
    let pairs: Vec<(&String, &[corpus::Symbol])> = ds.train.iter().map(|(l, t)| (l, t.symbols())).collect();
    let trained = train_on_device(&config.engine, &pairs)?;
    let mut pipe = Pipeline::new(&config.engine, trained.placement, &trained.am)?;
    let query = &ds.test.values().next().expect("one language")[0];
    let out = pipe.classify(query.symbols())?;
    let rep = CostReport {
        config_hash: config.hash(),
        classes,
        symbols: query.len(),
        query: report(&out.ledger, &config.energy),
    };
    if opts.json {
        return Ok(to_json(&rep));
    }
    let q = &rep.query;
    let mut s = format!("one {}-symbol query against {classes} classes\n", rep.symbols);
    s += &format!("{:<10} {:>10} {:>10} {:>10}\n", "", "Encoder", "Sim_Check", "Total");
    s += &format!(
        "{:<10} {:>10.2} {:>10.2} {:>10.2}\n",
        "HDCR [nJ]", q.encoder_nj, q.simcheck_nj, q.total_nj
    );
    s += &format!("dynamic {:.2} nJ, background {:.2} nJ\n", q.dynamic_nj, q.background_nj);
    s += &format!("cycles {} ({:.0} ns)\n", q.cycles, q.runtime_ns);
    for (phase, p) in &q.phases {
        s += &format!("  {phase:<7} {:>8} cycles {:>12.2} nJ\n", p.cycles, p.total_nj);
    }
    s += &format!("config {}\n", rep.config_hash);
    Ok(s)
}

#[derive(Debug, Clone, Serialize)]
struct TraceLine {
    line: usize,
    op: String,
    cycles: u64,
    row: Option<String>,
    ones: Option<usize>,
}

fn cmd_trace(opts: &GlobalOpts, file: &Path) -> Result<String, CliError> {
    let config = resolve_config(opts)?;
    let text = std::fs::read_to_string(file).map_err(io_err(file))?;
    let ops = trace::parse_trace(&text).map_err(|e| CliError::Input(format!("{}: {e}", file.display())))?;
    let mut dev = Device::new(config.engine.geometry.clone()).map_err(|e| CliError::Input(e.to_string()))?;
    let out = trace::run_trace(&mut dev, &ops).map_err(|e| match e {
        trace::TraceError::Parse { .. } => CliError::Input(format!("{}: {e}", file.display())),
        trace::TraceError::Device { .. } => CliError::Precondition(format!("{}: {e}", file.display())),
    })?;
    let lines: Vec<TraceLine> = out
        .iter()
        .map(|o| TraceLine {
            line: o.line,
            op: o.op.to_string(),
            cycles: o.cycles,
            row: o.row.as_ref().map(|r| r.to_hex()),
            ones: o.row.as_ref().map(|r| r.count_ones()),
        })
        .collect();
    let rep = report(dev.ledger(), &config.energy);
    if opts.json {
        let mut m = BTreeMap::new();
        m.insert("ops", serde_json::to_value(&lines).expect("serializes"));
        m.insert("report", serde_json::to_value(&rep).expect("serializes"));
        return Ok(to_json(&m));
    }
    let mut s = String::new();
    for l in &lines {
        s += &format!("{:>4}  {:<40} {:>3} cyc", l.line, l.op, l.cycles);
        if let (Some(row), Some(ones)) = (&l.row, l.ones) {
            s += &format!("  ones={ones:<3} {}...", &row[..16.min(row.len())]);
        }
        s += "\n";
    }
    s += &format!("total {} cycles, {:.3} nJ\n", rep.cycles, rep.total_nj);
    Ok(s)
}

pub fn run(cli: Cli) -> Result<String, CliError> {
    let o = &cli.opts;
    match cli.command {
        Command::Train { data } => cmd_train(o, &data),
        Command::Classify { model, text, file } => cmd_classify(o, &model, text.as_deref(), file.as_deref()),
        Command::Eval {
            model,
            data,
            limit,
            csv,
        } => cmd_eval(o, &model, &data, limit, csv.as_deref()),
        Command::Selftest => cmd_selftest(o),
        Command::Synth {
            languages,
            train_len,
            sentences,
            sentence_len,
        } => cmd_synth(
            o,
            SynthOptions {
                languages,
                train_len,
                sentences,
                sentence_len,
                ..Default::default()
            },
        ),
        Command::Cost { length, classes } => cmd_cost(o, length, classes),
        Command::Trace { file } => cmd_trace(o, &file),
    }
}

/// Parses `std::env::args`, runs the command and returns the exit code.
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            0
        }
        Err(e) => {
            eprintln!("hdcr: {e}");
            e.exit_code()
        }
    }
}
