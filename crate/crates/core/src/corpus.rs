//! Text ingestion over the 27-symbol alphabet (a..z plus space).

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const ALPHABET: usize = 27;

/// One alphabet symbol. Indices 0..26 are `a`..`z`; 26 is the space symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(u8);

impl Symbol {
    pub const SPACE: Symbol = Symbol(26);

    pub fn all() -> impl Iterator<Item = Symbol> {
        (0..ALPHABET as u8).map(Symbol)
    }

    pub fn from_index(i: usize) -> Option<Symbol> {
        (i < ALPHABET).then_some(Symbol(i as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Normalizing conversion: ASCII letters map to themselves (lowercased),
    /// anything else to space.
    pub fn from_char(c: char) -> Symbol {
        if c.is_ascii_alphabetic() {
            Symbol(c.to_ascii_lowercase() as u8 - b'a')
        } else {
            Symbol::SPACE
        }
    }

    /// Strict conversion, for trace files and tests.
    pub fn parse(c: char) -> Option<Symbol> {
        match c {
            'a'..='z' => Some(Symbol(c as u8 - b'a')),
            ' ' => Some(Symbol::SPACE),
            _ => None,
        }
    }

    pub fn to_char(self) -> char {
        if self == Symbol::SPACE {
            ' '
        } else {
            (b'a' + self.0) as char
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_char())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct NormalizedText(Vec<Symbol>);

impl NormalizedText {
    pub fn from_symbols(symbols: Vec<Symbol>) -> Self {
        Self(symbols)
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn render(&self) -> String {
        self.0.iter().map(|s| s.to_char()).collect()
    }

    /// Occurrences of each symbol, indexed by [`Symbol::index`].
    pub fn frequencies(&self) -> [u64; ALPHABET] {
        let mut f = [0u64; ALPHABET];
        for s in &self.0 {
            f[s.index()] += 1;
        }
        f
    }
}

impl AsRef<[Symbol]> for NormalizedText {
    fn as_ref(&self) -> &[Symbol] {
        &self.0
    }
}

impl fmt::Display for NormalizedText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

pub fn normalize(raw: &str) -> NormalizedText {
    NormalizedText(raw.chars().map(Symbol::from_char).collect())
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0} contains no <label>.txt files")]
    Empty(PathBuf),
    #[error("test label {0:?} has no training file")]
    UnknownTestLabel(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    pub train: BTreeMap<String, NormalizedText>,
    pub test: BTreeMap<String, Vec<NormalizedText>>,
}

impl Dataset {
    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.train.keys().map(String::as_str)
    }

    /// Test sentences long enough to hold at least one n-gram, with labels.
    pub fn usable_tests(&self, n: usize) -> impl Iterator<Item = (&str, &NormalizedText)> {
        self.test
            .iter()
            .flat_map(|(l, ss)| ss.iter().map(move |s| (l.as_str(), s)))
            .filter(move |(_, s)| s.len() >= n)
    }

    /// Frequency of each symbol over all training text.
    pub fn train_frequencies(&self) -> [u64; ALPHABET] {
        let mut f = [0u64; ALPHABET];
        for t in self.train.values() {
            for (a, b) in f.iter_mut().zip(t.frequencies()) {
                *a += b;
            }
        }
        f
    }
}

fn read_dir_texts(dir: &Path) -> Result<BTreeMap<String, String>, CorpusError> {
    let io = |source| CorpusError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("txt") {
            continue;
        }
        let Some(label) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        let text = std::fs::read_to_string(&path).map_err(|source| CorpusError::Io {
            path: path.clone(),
            source,
        })?;
        out.insert(label.to_string(), text);
    }
    if out.is_empty() {
        return Err(CorpusError::Empty(dir.to_path_buf()));
    }
    Ok(out)
}

/// Loads `<label>.txt` training files, each normalized whole.
pub fn load_train_dir(dir: &Path) -> Result<BTreeMap<String, NormalizedText>, CorpusError> {
    Ok(read_dir_texts(dir)?
        .iter()
        .map(|(l, t)| (l.clone(), normalize(t)))
        .collect())
}

/// Loads `<label>.txt` test files, one sentence per non-empty line.
pub fn load_test_dir(dir: &Path) -> Result<BTreeMap<String, Vec<NormalizedText>>, CorpusError> {
    Ok(read_dir_texts(dir)?
        .iter()
        .map(|(l, t)| {
            let sentences = t.lines().filter(|s| !s.trim().is_empty()).map(normalize).collect();
            (l.clone(), sentences)
        })
        .collect())
}

pub fn load_dataset(train_dir: &Path, test_dir: &Path) -> Result<Dataset, CorpusError> {
    let train = load_train_dir(train_dir)?;
    let test = load_test_dir(test_dir)?;
    if let Some(l) = test.keys().find(|l| !train.contains_key(*l)) {
        return Err(CorpusError::UnknownTestLabel(l.clone()));
    }
    for l in train.keys().filter(|l| !test.contains_key(*l)) {
        log::warn!("training label {l:?} has no test file");
    }
    Ok(Dataset { train, test })
}

/// Writes a dataset back out as `train/<label>.txt` and `test/<label>.txt`
/// under `root`, one test sentence per line. Training files get no
/// trailing newline, which would load back as an extra space.
pub fn write_dataset(ds: &Dataset, root: &Path) -> Result<(), CorpusError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CorpusError::Io { path, source }
    };
    for (sub, files) in [
        (
            "train",
            ds.train.iter().map(|(l, t)| (l, t.render())).collect::<Vec<_>>(),
        ),
        (
            "test",
            ds.test
                .iter()
                .map(|(l, ss)| (l, ss.iter().map(|s| s.render() + "\n").collect::<String>()))
                .collect(),
        ),
    ] {
        let dir = root.join(sub);
        std::fs::create_dir_all(&dir).map_err(io(&dir))?;
        for (label, body) in files {
            let path = dir.join(format!("{label}.txt"));
            std::fs::write(&path, body).map_err(io(&path))?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub languages: usize,
    pub train_len: usize,
    pub sentences: usize,
    pub sentence_len: usize,
    /// Zipf exponent of every categorical distribution drawn from.
    pub skew: f64,
    /// Likely successors per symbol. `None` draws symbols independently
    /// from a single distribution; `Some(k)` makes each language a
    /// first-order chain where each symbol is followed by one of `k`
    /// language-specific successors.
    pub successors: Option<usize>,
    /// Give languages non-overlapping symbol sets (requires languages <= 27).
    pub disjoint: bool,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            languages: 3,
            train_len: 2000,
            sentences: 100,
            sentence_len: 150,
            skew: 1.0,
            successors: Some(4),
            disjoint: false,
        }
    }
}

fn zipf(len: usize, skew: f64) -> WeightedIndex<f64> {
    let weights: Vec<f64> = (1..=len).map(|r| (r as f64).powf(-skew)).collect();
    WeightedIndex::new(&weights).expect("weights are positive")
}

struct Language {
    support: Vec<Symbol>,
    start: WeightedIndex<f64>,
    // per support position: successor positions and their weights
    next: Vec<(Vec<usize>, WeightedIndex<f64>)>,
}

impl Language {
    fn new(support: Vec<Symbol>, opts: &SynthOptions, rng: &mut ChaCha8Rng) -> Self {
        let m = support.len();
        let k = opts.successors.unwrap_or(m).clamp(1, m);
        let next = (0..m)
            .map(|_| {
                let mut succ: Vec<usize> = (0..m).collect();
                succ.shuffle(rng);
                succ.truncate(k);
                (succ, zipf(k, opts.skew))
            })
            .collect();
        Self {
            start: zipf(m, opts.skew),
            support,
            next,
        }
    }

    fn draw(&self, len: usize, chain: bool, rng: &mut ChaCha8Rng) -> NormalizedText {
        let mut out = Vec::with_capacity(len);
        let mut cur = self.start.sample(rng);
        for _ in 0..len {
            out.push(self.support[cur]);
            cur = if chain {
                let (succ, w) = &self.next[cur];
                succ[w.sample(rng)]
            } else {
                self.start.sample(rng)
            };
        }
        NormalizedText(out)
    }
}

/// A deterministic corpus of synthetic languages, each with its own
/// seeded symbol statistics over a private ordering of the alphabet.
pub fn synth_corpus(seed: u64, opts: &SynthOptions) -> Dataset {
    assert!(opts.languages >= 1, "need at least one language");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ds = Dataset::default();
    let mut pool: Vec<Symbol> = Symbol::all().collect();
    pool.shuffle(&mut rng);
    for lang in 0..opts.languages {
        let support: Vec<Symbol> = if opts.disjoint {
            assert!(
                opts.languages <= ALPHABET,
                "disjoint supports need at most 27 languages"
            );
            pool.iter().copied().skip(lang).step_by(opts.languages).collect()
        } else {
            let mut s: Vec<Symbol> = Symbol::all().collect();
            s.shuffle(&mut rng);
            s
        };
        let language = Language::new(support, opts, &mut rng);
        let chain = opts.successors.is_some();
        let label = format!("syn{lang:02}");
        let train = language.draw(opts.train_len, chain, &mut rng);
        let tests = (0..opts.sentences)
            .map(|_| language.draw(opts.sentence_len, chain, &mut rng))
            .collect();
        ds.train.insert(label.clone(), train);
        ds.test.insert(label, tests);
    }
    ds
}
