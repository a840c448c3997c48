//! Parity-Conditioned Retrieval: given table bits `Y` and an address `j`,
//! answer `Y_j ⊕ p(Y)` where `p(Y) = Y₁ ⊕ … ⊕ Y_n`.

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::nn::Answer;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PcrError {
    #[error("table must have at least one bit")]
    EmptyTable,
    #[error("query index {j} outside 1..={n}")]
    QueryOutOfRange { j: usize, n: usize },
    #[error("cannot parse instance {0:?}")]
    Parse(String),
}

/// Prompt alphabet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum PromptToken {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
    #[serde(rename = "MARK")]
    Mark,
    #[serde(rename = "BLANK")]
    Blank,
}

impl PromptToken {
    pub fn symbol(self) -> &'static str {
        match self {
            PromptToken::Zero => "0",
            PromptToken::One => "1",
            PromptToken::Mark => "MARK",
            PromptToken::Blank => "BLANK",
        }
    }

    pub fn bit(b: bool) -> Self {
        if b {
            PromptToken::One
        } else {
            PromptToken::Zero
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PcrInstance {
    table: Vec<bool>,
    query: usize,
}

impl PcrInstance {
    /// `query` is 1-based.
    pub fn new(table: Vec<bool>, query: usize) -> Result<Self, PcrError> {
        if table.is_empty() {
            return Err(PcrError::EmptyTable);
        }
        if !(1..=table.len()).contains(&query) {
            return Err(PcrError::QueryOutOfRange {
                j: query,
                n: table.len(),
            });
        }
        Ok(Self { table, query })
    }

    /// Table from the low `n` bits of `mask`, bit `i` holding `Y_{i+1}`.
    pub fn from_mask(n: usize, mask: u64, query: usize) -> Result<Self, PcrError> {
        Self::new(table_from_mask(n, mask), query)
    }

    pub fn n(&self) -> usize {
        self.table.len()
    }

    pub fn table(&self) -> &[bool] {
        &self.table
    }

    pub fn query(&self) -> usize {
        self.query
    }

    pub fn parity(&self) -> bool {
        parity(&self.table)
    }
}

impl fmt::Display for PcrInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Y=")?;
        for &b in &self.table {
            f.write_str(if b { "1" } else { "0" })?;
        }
        write!(f, ";j={}", self.query)
    }
}

impl FromStr for PcrInstance {
    type Err = PcrError;
    fn from_str(s: &str) -> Result<Self, PcrError> {
        let bad = || PcrError::Parse(s.to_string());
        let (y, j) = s.split_once(';').ok_or_else(bad)?;
        let bits = y.strip_prefix("Y=").ok_or_else(bad)?;
        let j = j.strip_prefix("j=").ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let table = bits
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(bad()),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(table, j)
    }
}

impl Serialize for PcrInstance {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

pub fn table_from_mask(n: usize, mask: u64) -> Vec<bool> {
    (0..n).map(|i| mask >> i & 1 == 1).collect()
}

pub fn parity(bits: &[bool]) -> bool {
    bits.iter().fold(false, |acc, &b| acc ^ b)
}

/// Doubled table encoding `B(Y₁)…B(Y_n)` with `B(a) = a a`.
pub fn encode_table(table: &[bool]) -> Vec<PromptToken> {
    table.iter().flat_map(|&b| [PromptToken::bit(b); 2]).collect()
}

/// Query segment: `MARK` at offset `j`, `BLANK` elsewhere.
pub fn encode_query(n: usize, j: usize) -> Vec<PromptToken> {
    (1..=n)
        .map(|l| if l == j { PromptToken::Mark } else { PromptToken::Blank })
        .collect()
}

/// Length-`3n` prompt: doubled table followed by the query segment.
pub fn encode_prompt(inst: &PcrInstance) -> Vec<PromptToken> {
    let mut tokens = encode_table(&inst.table);
    tokens.extend(encode_query(inst.n(), inst.query));
    tokens
}

pub fn ground_truth(inst: &PcrInstance) -> Answer {
    Answer::from_bit(inst.table[inst.query - 1] ^ inst.parity())
}

/// `R(Y) = Y ⊕ p(Y)·1ⁿ`.
pub fn response_vector(table: &[bool]) -> Vec<bool> {
    let p = parity(table);
    table.iter().map(|&b| b ^ p).collect()
}

/// All `2ⁿ · n` instances in (table mask, query) order.
pub fn all_instances(n: usize) -> impl Iterator<Item = PcrInstance> {
    assert!((1..64).contains(&n), "enumeration supports 1 ≤ n < 64");
    (0..1u64 << n).flat_map(move |mask| {
        (1..=n).map(move |j| PcrInstance::from_mask(n, mask, j).expect("valid by construction"))
    })
}

/// Instance realizing parity of `x` through PCR: `Y₁ = 0`, `Y_{i+1} = x_i`,
/// `j = 1`, so the answer is YES iff `x` has odd parity.
pub fn parity_projection(x: &[bool]) -> PcrInstance {
    let mut table = Vec::with_capacity(x.len() + 1);
    table.push(false);
    table.extend_from_slice(x);
    PcrInstance::new(table, 1).expect("nonempty table, j = 1")
}
