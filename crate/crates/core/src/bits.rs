//! Packed bit storage shared by device rows and hypervectors.
//!
//! Bit `i` lives in word `i / 64` at position `i % 64`. Bits past `width`
//! in the last word are kept at zero.

use std::fmt;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitBuf {
    words: Vec<u64>,
    width: usize,
}

fn words_for(width: usize) -> usize {
    width.div_ceil(64)
}

impl BitBuf {
    pub fn zeros(width: usize) -> Self {
        Self {
            words: vec![0; words_for(width)],
            width,
        }
    }

    pub fn ones(width: usize) -> Self {
        let mut b = Self {
            words: vec![u64::MAX; words_for(width)],
            width,
        };
        b.mask_tail();
        b
    }

    pub fn from_words(words: Vec<u64>, width: usize) -> Self {
        assert_eq!(words.len(), words_for(width), "word count does not match width");
        let mut b = Self { words, width };
        b.mask_tail();
        b
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut b = Self::zeros(bits.len());
        for (i, &bit) in bits.iter().enumerate() {
            b.set(i, bit);
        }
        b
    }

    fn mask_tail(&mut self) {
        let rem = self.width % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn words_mut(&mut self) -> &mut [u64] {
        &mut self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.width);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, bit: bool) {
        debug_assert!(i < self.width);
        let m = 1u64 << (i % 64);
        if bit {
            self.words[i / 64] |= m;
        } else {
            self.words[i / 64] &= !m;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn xor_assign(&mut self, other: &BitBuf) {
        assert_eq!(self.width, other.width);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn and_assign(&mut self, other: &BitBuf) {
        assert_eq!(self.width, other.width);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    pub fn or_assign(&mut self, other: &BitBuf) {
        assert_eq!(self.width, other.width);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn not(&self) -> BitBuf {
        let mut out = BitBuf {
            words: self.words.iter().map(|w| !w).collect(),
            width: self.width,
        };
        out.mask_tail();
        out
    }

    /// Hamming distance without materializing the XOR.
    pub fn distance(&self, other: &BitBuf) -> usize {
        assert_eq!(self.width, other.width);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + b)
            })
        })
    }

    /// Copies `len` bits starting at `start` into a new buffer.
    pub fn slice(&self, start: usize, len: usize) -> BitBuf {
        assert!(start + len <= self.width);
        if start.is_multiple_of(64) && len.is_multiple_of(64) {
            let w0 = start / 64;
            return BitBuf::from_words(self.words[w0..w0 + len / 64].to_vec(), len);
        }
        let mut out = BitBuf::zeros(len);
        for i in 0..len {
            out.set(i, self.get(start + i));
        }
        out
    }

    /// Overwrites `src.width()` bits starting at `start`.
    pub fn splice(&mut self, start: usize, src: &BitBuf) {
        assert!(start + src.width <= self.width);
        if start.is_multiple_of(64) && src.width.is_multiple_of(64) {
            let w0 = start / 64;
            self.words[w0..w0 + src.words.len()].copy_from_slice(&src.words);
            return;
        }
        for i in 0..src.width {
            self.set(start + i, src.get(i));
        }
    }

    /// Circular rotation toward higher indices: bit `i` moves to `(i + n) % width`.
    pub fn rotate_up(&self, n: usize) -> BitBuf {
        let w = self.width;
        if w == 0 {
            return self.clone();
        }
        let n = n % w;
        if n == 0 {
            return self.clone();
        }
        if !w.is_multiple_of(64) {
            let mut out = BitBuf::zeros(w);
            for i in self.iter_ones() {
                out.set((i + n) % w, true);
            }
            return out;
        }
        let nw = self.words.len();
        let q = n / 64;
        let r = n % 64;
        let mut out = vec![0u64; nw];
        for (i, o) in out.iter_mut().enumerate() {
            let src = (i + nw - q) % nw;
            let lo = self.words[src];
            *o = if r == 0 {
                lo
            } else {
                let prev = self.words[(src + nw - 1) % nw];
                (lo << r) | (prev >> (64 - r))
            };
        }
        BitBuf { words: out, width: w }
    }

    /// Inverse of [`BitBuf::rotate_up`].
    pub fn rotate_down(&self, n: usize) -> BitBuf {
        if self.width == 0 {
            return self.clone();
        }
        let n = n % self.width;
        self.rotate_up(self.width - n)
    }

    /// Little-endian byte packing: bit `8k + j` is bit `j` of byte `k`.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let nbytes = self.width.div_ceil(8);
        self.words.iter().flat_map(|w| w.to_le_bytes()).take(nbytes).collect()
    }

    pub fn from_le_bytes(bytes: &[u8], width: usize) -> Option<BitBuf> {
        if bytes.len() != width.div_ceil(8) {
            return None;
        }
        let mut words = vec![0u64; words_for(width)];
        for (k, &b) in bytes.iter().enumerate() {
            words[k / 8] |= (b as u64) << (8 * (k % 8));
        }
        let b = BitBuf { words, width };
        // reject set bits past the width
        let mut masked = b.clone();
        masked.mask_tail();
        (masked == b).then_some(b)
    }

    pub fn to_hex(&self) -> String {
        self.to_le_bytes().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_hex(s: &str, width: usize) -> Option<BitBuf> {
        if !s.len().is_multiple_of(2) {
            return None;
        }
        let bytes: Option<Vec<u8>> = (0..s.len())
            .step_by(2)
            .map(|i| u8::from_str_radix(s.get(i..i + 2)?, 16).ok())
            .collect();
        BitBuf::from_le_bytes(&bytes?, width)
    }
}

impl fmt::Debug for BitBuf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitBuf[{}; ones={}]", self.width, self.count_ones())
    }
}
