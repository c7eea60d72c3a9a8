//! Reference binary spatter code HDC in plain software.
//!
//! This is the oracle the in-memory pipeline is checked against, so it
//! favours obviousness over speed.

use std::io::{Read, Write};

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bits::BitBuf;
use crate::corpus::{Symbol, ALPHABET};

pub const CHUNK_BITS: usize = 512;
pub const DEFAULT_DIM: usize = 8192;

/// Generator used for item memories. Each hypervector takes `D / 64`
/// consecutive `next_u64` words, bit `i` of the vector being bit `i % 64`
/// of word `i / 64`; symbols are generated in alphabet order.
pub const PRNG_ID: &str = "rand_chacha-0.3/ChaCha8Rng/seed_from_u64/next_u64-lsb-first";

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum HdcError {
    #[error("dimension {0} is not a positive multiple of {CHUNK_BITS}")]
    Dimension(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("n-gram length must be at least 1")]
    NgramZero,
    #[error("text of {len} symbols is shorter than the n-gram length {n}")]
    TextTooShort { len: usize, n: usize },
    #[error("associative memory is empty")]
    EmptyMemory,
    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),
    #[error("malformed container: {0}")]
    Container(String),
}

pub type Result<T, E = HdcError> = std::result::Result<T, E>;

pub fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 || !dim.is_multiple_of(CHUNK_BITS) {
        return Err(HdcError::Dimension(dim));
    }
    Ok(())
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Hypervector(BitBuf);

impl Hypervector {
    pub fn zeros(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self(BitBuf::zeros(dim)))
    }

    pub fn from_bits(bits: BitBuf) -> Result<Self> {
        check_dim(bits.width())?;
        Ok(Self(bits))
    }

    pub fn random(dim: usize, rng: &mut impl RngCore) -> Result<Self> {
        check_dim(dim)?;
        let words = (0..dim / 64).map(|_| rng.next_u64()).collect();
        Ok(Self(BitBuf::from_words(words, dim)))
    }

    pub fn from_chunks(chunks: &[BitBuf]) -> Result<Self> {
        let mut b = BitBuf::zeros(chunks.len() * CHUNK_BITS);
        for (j, c) in chunks.iter().enumerate() {
            if c.width() != CHUNK_BITS {
                return Err(HdcError::DimMismatch(c.width(), CHUNK_BITS));
            }
            b.splice(j * CHUNK_BITS, c);
        }
        Self::from_bits(b)
    }

    pub fn dim(&self) -> usize {
        self.0.width()
    }

    pub fn chunks(&self) -> usize {
        self.dim() / CHUNK_BITS
    }

    pub fn chunk(&self, j: usize) -> BitBuf {
        self.0.slice(j * CHUNK_BITS, CHUNK_BITS)
    }

    pub fn bits(&self) -> &BitBuf {
        &self.0
    }

    pub fn get(&self, i: usize) -> bool {
        self.0.get(i)
    }

    pub fn xor(&self, other: &Hypervector) -> Result<Hypervector> {
        if self.dim() != other.dim() {
            return Err(HdcError::DimMismatch(self.dim(), other.dim()));
        }
        let mut b = self.0.clone();
        b.xor_assign(&other.0);
        Ok(Self(b))
    }

    pub fn not(&self) -> Hypervector {
        Self(self.0.not())
    }

    pub fn density(&self) -> f64 {
        self.0.count_ones() as f64 / self.dim() as f64
    }
}

impl std::fmt::Debug for Hypervector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Hypervector[{}; ones={}]", self.dim(), self.0.count_ones())
    }
}

/// Rotates every 512-bit chunk left by `n`: bit `i` of a chunk moves to
/// `(i + n) % 512`.
pub fn permute(hv: &Hypervector, n: usize) -> Hypervector {
    let chunks: Vec<BitBuf> = (0..hv.chunks()).map(|j| hv.chunk(j).rotate_up(n)).collect();
    Hypervector::from_chunks(&chunks).expect("chunking preserves the dimension")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemMemory {
    seed: u64,
    hvs: Vec<Hypervector>,
}

impl ItemMemory {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.hvs[0].dim()
    }

    pub fn get(&self, s: Symbol) -> &Hypervector {
        &self.hvs[s.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Symbol, &Hypervector)> {
        Symbol::all().zip(&self.hvs)
    }
}

pub fn gen_item_memory(seed: u64, dim: usize) -> Result<ItemMemory> {
    check_dim(dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hvs = (0..ALPHABET)
        .map(|_| Hypervector::random(dim, &mut rng))
        .collect::<Result<_>>()?;
    Ok(ItemMemory { seed, hvs })
}

/// XOR of `rho^(N-1)(first) .. rho^0(last)`.
pub fn bind_ngram(window: &[Symbol], im: &ItemMemory) -> Result<Hypervector> {
    let n = window.len();
    if n == 0 {
        return Err(HdcError::NgramZero);
    }
    let mut acc = Hypervector::zeros(im.dim())?;
    for (k, &s) in window.iter().enumerate() {
        acc = acc.xor(&permute(im.get(s), n - 1 - k))?;
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct EncodeParams {
    pub n: usize,
    pub dim: usize,
    pub seed: u64,
}

impl Default for EncodeParams {
    fn default() -> Self {
        Self {
            n: 4,
            dim: DEFAULT_DIM,
            seed: 0,
        }
    }
}

impl EncodeParams {
    pub fn validate(&self) -> Result<()> {
        check_dim(self.dim)?;
        if self.n == 0 {
            return Err(HdcError::NgramZero);
        }
        Ok(())
    }
}

/// Per-bit counters of a majority bundle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bundle {
    counts: Vec<u32>,
    added: u64,
}

impl Bundle {
    pub fn new(dim: usize) -> Self {
        Self {
            counts: vec![0; dim],
            added: 0,
        }
    }

    pub fn add(&mut self, hv: &Hypervector) {
        for i in hv.bits().iter_ones() {
            self.counts[i] += 1;
        }
        self.added += 1;
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn added(&self) -> u64 {
        self.added
    }

    /// Majority threshold: a bit is set iff its count exceeds `added / 2`.
    pub fn threshold(&self) -> u64 {
        self.added / 2
    }

    pub fn majority(&self) -> Hypervector {
        let thr = self.threshold();
        let bools: Vec<bool> = self.counts.iter().map(|&c| c as u64 > thr).collect();
        Hypervector(BitBuf::from_bools(&bools))
    }
}

/// Feeds every n-gram of `text` into `bundle`.
pub fn accumulate(bundle: &mut Bundle, text: &[Symbol], n: usize, im: &ItemMemory) -> Result<()> {
    if n == 0 {
        return Err(HdcError::NgramZero);
    }
    for w in text.windows(n) {
        bundle.add(&bind_ngram(w, im)?);
    }
    Ok(())
}

pub fn encode_with(text: &[Symbol], n: usize, im: &ItemMemory) -> Result<Hypervector> {
    if n == 0 {
        return Err(HdcError::NgramZero);
    }
    if text.len() < n {
        return Err(HdcError::TextTooShort { len: text.len(), n });
    }
    let mut b = Bundle::new(im.dim());
    accumulate(&mut b, text, n, im)?;
    Ok(b.majority())
}

pub fn encode(text: &[Symbol], params: &EncodeParams) -> Result<Hypervector> {
    params.validate()?;
    encode_with(text, params.n, &gen_item_memory(params.seed, params.dim)?)
}

pub fn hamming(a: &Hypervector, b: &Hypervector) -> Result<u32> {
    if a.dim() != b.dim() {
        return Err(HdcError::DimMismatch(a.dim(), b.dim()));
    }
    Ok(a.bits().distance(b.bits()) as u32)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AssociativeMemory {
    entries: Vec<(String, Hypervector)>,
}

impl AssociativeMemory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, label: impl Into<String>, hv: Hypervector) -> Result<()> {
        let label = label.into();
        if self.entries.iter().any(|(l, _)| *l == label) {
            return Err(HdcError::DuplicateLabel(label));
        }
        if let Some((_, first)) = self.entries.first() {
            if first.dim() != hv.dim() {
                return Err(HdcError::DimMismatch(first.dim(), hv.dim()));
            }
        }
        self.entries.push((label, hv));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.entries.first().map(|(_, h)| h.dim())
    }

    pub fn get(&self, label: &str) -> Option<&Hypervector> {
        self.entries.iter().find(|(l, _)| l == label).map(|(_, h)| h)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Hypervector)> {
        self.entries.iter().map(|(l, h)| (l.as_str(), h))
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(l, _)| l.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Classification {
    pub label: String,
    /// Distance to every class, in memory order.
    pub distances: Vec<(String, u32)>,
}

/// First index holding the minimum; the insertion-order tie rule.
pub fn argmin_first(distances: &[u32]) -> Option<usize> {
    let min = *distances.iter().min()?;
    distances.iter().position(|&d| d == min)
}

pub fn classify(query: &Hypervector, am: &AssociativeMemory) -> Result<Classification> {
    let distances: Vec<(String, u32)> = am
        .iter()
        .map(|(l, h)| Ok((l.to_string(), hamming(query, h)?)))
        .collect::<Result<_>>()?;
    let d: Vec<u32> = distances.iter().map(|(_, d)| *d).collect();
    let best = argmin_first(&d).ok_or(HdcError::EmptyMemory)?;
    Ok(Classification {
        label: distances[best].0.clone(),
        distances,
    })
}

pub fn train<L, T>(corpus: impl IntoIterator<Item = (L, T)>, params: &EncodeParams) -> Result<AssociativeMemory>
where
    L: Into<String>,
    T: AsRef<[Symbol]>,
{
    params.validate()?;
    let im = gen_item_memory(params.seed, params.dim)?;
    let mut am = AssociativeMemory::new();
    for (label, text) in corpus {
        am.insert(label, encode_with(text.as_ref(), params.n, &im)?)?;
    }
    Ok(am)
}

const MAGIC: &[u8; 4] = b"HDCV";
const VERSION: u32 = 1;

/// Writes labelled hypervectors in the binary container format:
/// `"HDCV"`, version, D, seed, count, then per entry a u16 label length,
/// the UTF-8 label and `D / 8` payload bytes. Integers are little-endian.
pub fn write_container<'a>(
    w: &mut impl Write,
    dim: usize,
    seed: u64,
    entries: impl ExactSizeIterator<Item = (&'a str, &'a Hypervector)>,
) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(dim as u32).to_le_bytes())?;
    w.write_all(&seed.to_le_bytes())?;
    w.write_all(&(entries.len() as u32).to_le_bytes())?;
    for (label, hv) in entries {
        assert_eq!(hv.dim(), dim, "entry dimension differs from header");
        let lb = label.as_bytes();
        let len = u16::try_from(lb.len()).map_err(|_| std::io::Error::other("label longer than 65535 bytes"))?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(lb)?;
        w.write_all(&hv.bits().to_le_bytes())?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Container {
    pub dim: usize,
    pub seed: u64,
    pub entries: Vec<(String, Hypervector)>,
}

fn take<const K: usize>(r: &mut impl Read) -> Result<[u8; K]> {
    let mut b = [0u8; K];
    r.read_exact(&mut b)
        .map_err(|e| HdcError::Container(format!("truncated: {e}")))?;
    Ok(b)
}

pub fn read_container(r: &mut impl Read) -> Result<Container> {
    if &take::<4>(r)? != MAGIC {
        return Err(HdcError::Container("bad magic".into()));
    }
    let version = u32::from_le_bytes(take(r)?);
    if version != VERSION {
        return Err(HdcError::Container(format!("unsupported version {version}")));
    }
    let dim = u32::from_le_bytes(take(r)?) as usize;
    check_dim(dim)?;
    let seed = u64::from_le_bytes(take(r)?);
    let count = u32::from_le_bytes(take(r)?);
    let mut entries = Vec::new();
    for _ in 0..count {
        let len = u16::from_le_bytes(take(r)?) as usize;
        let mut lb = vec![0u8; len];
        r.read_exact(&mut lb)
            .map_err(|e| HdcError::Container(format!("truncated label: {e}")))?;
        let label = String::from_utf8(lb).map_err(|_| HdcError::Container("label is not UTF-8".into()))?;
        let mut payload = vec![0u8; dim / 8];
        r.read_exact(&mut payload)
            .map_err(|e| HdcError::Container(format!("truncated payload: {e}")))?;
        let bits = BitBuf::from_le_bytes(&payload, dim).expect("payload length matches dimension");
        entries.push((label, Hypervector(bits)));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(|e| HdcError::Container(e.to_string()))? != 0 {
        return Err(HdcError::Container("trailing bytes".into()));
    }
    Ok(Container { dim, seed, entries })
}

impl AssociativeMemory {
    pub fn to_container_bytes(&self, seed: u64) -> Vec<u8> {
        let mut out = Vec::new();
        let dim = self.dim().unwrap_or(DEFAULT_DIM);
        write_container(&mut out, dim, seed, self.entries.iter().map(|(l, h)| (l.as_str(), h)))
            .expect("writing to a Vec cannot fail");
        out
    }

    /// Returns the memory and the seed recorded with it.
    pub fn from_container_bytes(bytes: &[u8]) -> Result<(Self, u64)> {
        let c = read_container(&mut &bytes[..])?;
        let mut am = AssociativeMemory::new();
        for (l, h) in c.entries {
            am.insert(l, h)?;
        }
        Ok((am, c.seed))
    }
}

impl ItemMemory {
    pub fn to_container_bytes(&self) -> Vec<u8> {
        let labels: Vec<String> = Symbol::all().map(|s| s.to_string()).collect();
        let mut out = Vec::new();
        write_container(
            &mut out,
            self.dim(),
            self.seed,
            labels.iter().map(String::as_str).zip(&self.hvs),
        )
        .expect("writing to a Vec cannot fail");
        out
    }
}
