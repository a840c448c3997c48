//! Separated ±1 address codes for hard-selection attention.
//!
//! An interleaved query `Q(c) = (c₁, 1, …, c_m, 1)` and key
//! `K(d) = (d₁, −1, …, d_m, −1)` satisfy `⟨Q(c), K(d)⟩ = −2Δ(c, d)`, so the
//! rounded score is `0` on a match and at most `[−√(2m)/3]_s` otherwise.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::fixed::{exp_s, round_sqrt_quotient, Exact, FixedError, FixedVector, Precision};

/// Growth constant: `m = max(m₀(s), GROWTH · ⌈log₂(n + 3)⌉)`.
pub const GROWTH: usize = 24;
/// Resamples allowed per codeword before giving up.
pub const MAX_RETRIES: usize = 64;
/// The separation property is checked up to `M0_HORIZON_FACTOR · m₀`.
pub const M0_HORIZON_FACTOR: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodeError {
    #[error("no codeword at distance ≥ {min_distance} found for symbol {symbol} after {retries} draws (m = {m})")]
    CodeSearchExhausted {
        symbol: String,
        m: usize,
        min_distance: usize,
        retries: usize,
    },
    #[error("table size n must be at least 1")]
    EmptyTable,
    #[error("code table text: {0}")]
    Parse(String),
    #[error(transparent)]
    Fixed(#[from] FixedError),
}

/// Coded alphabet: table addresses `1..=n` plus three markers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum CodeSymbol {
    Address(usize),
    Mark,
    Blank,
    Dummy,
}

impl fmt::Display for CodeSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CodeSymbol::Address(l) => write!(f, "{l}"),
            CodeSymbol::Mark => f.write_str("MARK"),
            CodeSymbol::Blank => f.write_str("BLANK"),
            CodeSymbol::Dummy => f.write_str("DUMMY"),
        }
    }
}

impl FromStr for CodeSymbol {
    type Err = CodeError;
    fn from_str(s: &str) -> Result<Self, CodeError> {
        match s {
            "MARK" => Ok(CodeSymbol::Mark),
            "BLANK" => Ok(CodeSymbol::Blank),
            "DUMMY" => Ok(CodeSymbol::Dummy),
            _ => s
                .parse::<usize>()
                .ok()
                .filter(|&l| l >= 1)
                .map(CodeSymbol::Address)
                .ok_or_else(|| CodeError::Parse(format!("unknown symbol {s:?}"))),
        }
    }
}

/// `[−√(2m)/3]_s`, an upper bound on every mismatch score `[−2Δ/√(2m)]_s`
/// with `Δ ≥ m/3`.
fn worst_mismatch_score(p: Precision, m: usize) -> Result<crate::fixed::FixedScalar, FixedError> {
    // −√(2m)/3 = −1 / √(9 / 2m)
    round_sqrt_quotient(p, Exact::from_int(-1), Exact::from_int(9), 2 * m as u64)
}

/// Whether `[exp([−√(2m)/3]_s)]_s = 0`.
pub fn separation_holds(p: Precision, m: usize) -> Result<bool, FixedError> {
    Ok(exp_s(worst_mismatch_score(p, m)?)?.is_zero())
}

/// Smallest `m` from which the separation condition holds, checked on every
/// length up to `M0_HORIZON_FACTOR · m₀`.
pub fn compute_m0(p: Precision) -> Result<usize, FixedError> {
    let mut m = 1;
    'scan: loop {
        while !separation_holds(p, m)? {
            m += 1;
        }
        for later in m + 1..=M0_HORIZON_FACTOR * m {
            if !separation_holds(p, later)? {
                m = later + 1;
                continue 'scan;
            }
        }
        return Ok(m);
    }
}

/// Codeword length for a table of size `n`.
pub fn code_length(n: usize, m0: usize) -> usize {
    let bits = usize::BITS - (n + 2).leading_zeros();
    m0.max(GROWTH * bits as usize)
}

/// `⌈m/3⌉`
pub fn min_distance_for(m: usize) -> usize {
    m.div_ceil(3)
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct PackedWord(Vec<u64>);

impl PackedWord {
    fn from_signs(word: &[i8]) -> Self {
        let mut bits = vec![0u64; word.len().div_ceil(64)];
        for (i, &c) in word.iter().enumerate() {
            if c < 0 {
                bits[i / 64] |= 1 << (i % 64);
            }
        }
        PackedWord(bits)
    }

    fn distance(&self, other: &Self) -> usize {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }
}

/// Address code with the sampling provenance needed to regenerate it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodeTable {
    pub n: usize,
    pub m: usize,
    pub s: u32,
    pub seed: u64,
    symbols: Vec<CodeSymbol>,
    words: Vec<Vec<i8>>,
    packed: Vec<PackedWord>,
}

impl CodeTable {
    fn from_words(n: usize, m: usize, s: u32, seed: u64, words: Vec<Vec<i8>>) -> Self {
        let symbols = Self::alphabet(n);
        let packed = words.iter().map(|w| PackedWord::from_signs(w)).collect();
        Self {
            n,
            m,
            s,
            seed,
            symbols,
            words,
            packed,
        }
    }

    /// `1, …, n, MARK, BLANK, DUMMY` in storage order.
    pub fn alphabet(n: usize) -> Vec<CodeSymbol> {
        (1..=n)
            .map(CodeSymbol::Address)
            .chain([CodeSymbol::Mark, CodeSymbol::Blank, CodeSymbol::Dummy])
            .collect()
    }

    fn index(&self, symbol: CodeSymbol) -> usize {
        match symbol {
            CodeSymbol::Address(l) => {
                assert!((1..=self.n).contains(&l), "address {l} outside 1..={}", self.n);
                l - 1
            }
            CodeSymbol::Mark => self.n,
            CodeSymbol::Blank => self.n + 1,
            CodeSymbol::Dummy => self.n + 2,
        }
    }

    pub fn symbols(&self) -> &[CodeSymbol] {
        &self.symbols
    }

    pub fn word(&self, symbol: CodeSymbol) -> &[i8] {
        &self.words[self.index(symbol)]
    }

    pub fn distance(&self, a: CodeSymbol, b: CodeSymbol) -> usize {
        self.packed[self.index(a)].distance(&self.packed[self.index(b)])
    }

    /// Minimum pairwise distance, by brute force over all pairs.
    pub fn min_distance(&self) -> usize {
        let mut best = self.m;
        for i in 0..self.packed.len() {
            for j in i + 1..self.packed.len() {
                best = best.min(self.packed[i].distance(&self.packed[j]));
            }
        }
        best
    }

    pub fn is_separated(&self) -> bool {
        self.min_distance() >= min_distance_for(self.m)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# hybridsim address code\nn={} m={} s={} seed={}\n",
            self.n, self.m, self.s, self.seed
        );
        for (sym, word) in self.symbols.iter().zip(&self.words) {
            let row: String = word.iter().map(|&c| if c > 0 { '+' } else { '-' }).collect();
            out.push_str(&format!("{sym} {row}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, CodeError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| CodeError::Parse("missing header".into()))?;
        let mut fields = [None; 4];
        for part in header.split_whitespace() {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| CodeError::Parse(format!("bad header field {part:?}")))?;
            let slot = match key {
                "n" => 0,
                "m" => 1,
                "s" => 2,
                "seed" => 3,
                _ => return Err(CodeError::Parse(format!("unknown header key {key:?}"))),
            };
            fields[slot] = Some(
                value
                    .parse::<u64>()
                    .map_err(|_| CodeError::Parse(format!("bad value for {key}")))?,
            );
        }
        let [Some(n), Some(m), Some(s), Some(seed)] = fields else {
            return Err(CodeError::Parse("header needs n, m, s and seed".into()));
        };
        let (n, m) = (n as usize, m as usize);
        let alphabet = Self::alphabet(n);
        let mut words = Vec::with_capacity(alphabet.len());
        for expected in &alphabet {
            let line = lines
                .next()
                .ok_or_else(|| CodeError::Parse(format!("missing row for {expected}")))?;
            let (sym, row) = line
                .split_once(' ')
                .ok_or_else(|| CodeError::Parse(format!("bad row {line:?}")))?;
            if sym.parse::<CodeSymbol>()? != *expected {
                return Err(CodeError::Parse(format!("expected row {expected}, found {sym}")));
            }
            let word = row
                .trim()
                .chars()
                .map(|ch| match ch {
                    '+' => Ok(1),
                    '-' => Ok(-1),
                    _ => Err(CodeError::Parse(format!("bad sign {ch:?}"))),
                })
                .collect::<Result<Vec<i8>, _>>()?;
            if word.len() != m {
                return Err(CodeError::Parse(format!("row {sym} has length {} ≠ {m}", word.len())));
            }
            words.push(word);
        }
        if lines.next().is_some() {
            return Err(CodeError::Parse("trailing rows".into()));
        }
        Ok(Self::from_words(n, m, s as u32, seed, words))
    }
}

/// Samples an `(n + 3)`-word code of length `code_length(n, m₀(s))`.
///
/// Words are drawn in storage order; a draw closer than `⌈m/3⌉` to an
/// accepted word is discarded and redrawn.
pub fn build_code(n: usize, p: Precision, seed: u64) -> Result<CodeTable, CodeError> {
    build_code_with_length(n, code_length(n, compute_m0(p)?), p, seed)
}

pub fn build_code_with_length(
    n: usize,
    m: usize,
    p: Precision,
    seed: u64,
) -> Result<CodeTable, CodeError> {
    if n == 0 {
        return Err(CodeError::EmptyTable);
    }
    let need = min_distance_for(m);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut words: Vec<Vec<i8>> = Vec::with_capacity(n + 3);
    let mut packed: Vec<PackedWord> = Vec::with_capacity(n + 3);
    for symbol in CodeTable::alphabet(n) {
        let mut accepted = false;
        for _ in 0..MAX_RETRIES {
            let word: Vec<i8> = (0..m).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
            let pw = PackedWord::from_signs(&word);
            if packed.iter().all(|q| q.distance(&pw) >= need) {
                words.push(word);
                packed.push(pw);
                accepted = true;
                break;
            }
        }
        if !accepted {
            return Err(CodeError::CodeSearchExhausted {
                symbol: symbol.to_string(),
                m,
                min_distance: need,
                retries: MAX_RETRIES,
            });
        }
    }
    Ok(CodeTable::from_words(n, m, p.bits(), seed, words))
}

/// Raw numerators of `(c₁, 1, c₂, 1, …, c_m, 1)`.
pub fn interleave_query_raw(p: Precision, c: &[i8]) -> Vec<i64> {
    let one = p.one_raw();
    c.iter().flat_map(|&x| [x as i64 * one, one]).collect()
}

/// Raw numerators of `(d₁, −1, d₂, −1, …, d_m, −1)`.
pub fn interleave_key_raw(p: Precision, d: &[i8]) -> Vec<i64> {
    let one = p.one_raw();
    d.iter().flat_map(|&x| [x as i64 * one, -one]).collect()
}

pub fn interleave_query(p: Precision, c: &[i8]) -> FixedVector {
    FixedVector::from_raw(p, interleave_query_raw(p, c)).expect("±1 is on every grid")
}

pub fn interleave_key(p: Precision, d: &[i8]) -> FixedVector {
    FixedVector::from_raw(p, interleave_key_raw(p, d)).expect("±1 is on every grid")
}
