use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::Serialize;

use crate::construct::{prompt_ids, token_id};
use crate::nn::{greedy_decode, scan_prefix, Answer, DecoderSpec};
use crate::pcr::{encode_table, ground_truth, response_vector, table_from_mask, PcrInstance};

use super::AnalysisError;

/// Largest table size the census enumerates.
pub const MAX_CENSUS_N: usize = 20;

/// Two instances with the same post-table state but different answers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub first: PcrInstance,
    pub second: PcrInstance,
}

/// Tables sharing one post-table state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CollisionClass {
    pub state: usize,
    /// `Y₁…Y_n` bit strings
    pub tables: Vec<String>,
    pub distinct_responses: usize,
}

/// Information-bottleneck census of a pure-GDN decoder at table size `n`.
///
/// `Q` is reported in two readings: the full grid `|𝔽_s|`, and the set of
/// scalar values actually observed in the recorded states.
#[derive(Clone, Debug, Serialize)]
pub struct CensusReport {
    pub n: usize,
    pub s: u32,
    pub tables: usize,
    /// `D`: recurrent-state scalars
    pub state_dim: usize,
    pub distinct_states: usize,
    /// `2^{n−1}`: lower bound on distinct states for a correct decoder
    pub required_states: u64,
    pub count_bound_violated: bool,
    pub grid_alphabet: u64,
    pub realized_alphabet: usize,
    /// `D · log₂|𝔽_s| ≥ n − 1`
    pub grid_bound_holds: bool,
    /// `D · log₂|Q_realized| ≥ n − 1`
    pub realized_bound_holds: bool,
    /// state id of each table, indexed by table mask (bit `i` is `Y_{i+1}`)
    pub table_state: Vec<usize>,
    /// nonzero `(index, numerator)` entries of each distinct state
    pub states: Vec<Vec<(usize, i64)>>,
    pub collisions: Vec<CollisionClass>,
    pub witnesses: Vec<Witness>,
}

fn bits_string(table: &[bool]) -> String {
    table.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

fn log2_bound_holds(d: usize, alphabet: u64, n: usize) -> bool {
    // D·log₂|Q| ≥ n − 1  ⟺  |Q|^D ≥ 2^{n−1}, decided in integers
    if n <= 1 {
        return true;
    }
    if alphabet <= 1 {
        return false;
    }
    let need = n as u32 - 1;
    let mut acc: u128 = 1;
    for _ in 0..d {
        acc = acc.saturating_mul(alphabet as u128);
        if acc >= 1u128 << need {
            return true;
        }
    }
    false
}

/// Snapshots the recurrent state after every table prefix `B(Y₁)…B(Y_n)`,
/// groups tables by exact state, and extracts one witness query per
/// collision class whose members disagree on some response bit.
pub fn state_census(spec: &DecoderSpec, n: usize) -> Result<CensusReport, AnalysisError> {
    if !spec.is_pure_gdn() {
        return Err(AnalysisError::NotPureGdn);
    }
    if n == 0 || n > MAX_CENSUS_N {
        return Err(AnalysisError::TableSize(n));
    }
    let masks: Vec<u64> = (0..1u64 << n).collect();
    let fingerprints = masks
        .par_iter()
        .map(|&mask| {
            let prefix: Vec<usize> = encode_table(&table_from_mask(n, mask))
                .into_iter()
                .map(token_id)
                .collect();
            Ok(scan_prefix(spec, &prefix)?.fingerprint())
        })
        .collect::<Result<Vec<Vec<i64>>, AnalysisError>>()?;

    // exact grouping: the map compares whole fingerprints, hashes only bucket them
    let mut ids: HashMap<&[i64], usize> = HashMap::new();
    let mut states: Vec<&[i64]> = Vec::new();
    let mut table_state = Vec::with_capacity(masks.len());
    for fp in &fingerprints {
        let id = *ids.entry(fp.as_slice()).or_insert_with(|| {
            states.push(fp);
            states.len() - 1
        });
        table_state.push(id);
    }
    let mut alphabet: BTreeSet<i64> = BTreeSet::new();
    for st in &states {
        alphabet.extend(st.iter().copied());
    }

    let mut members: Vec<Vec<u64>> = vec![Vec::new(); states.len()];
    for (&mask, &id) in masks.iter().zip(&table_state) {
        members[id].push(mask);
    }
    let mut collisions = Vec::new();
    let mut witnesses = Vec::new();
    for (id, class) in members.iter().enumerate().filter(|(_, c)| c.len() >= 2) {
        let responses: Vec<Vec<bool>> = class
            .iter()
            .map(|&m| response_vector(&table_from_mask(n, m)))
            .collect();
        let distinct: BTreeSet<&Vec<bool>> = responses.iter().collect();
        collisions.push(CollisionClass {
            state: id,
            tables: class.iter().map(|&m| bits_string(&table_from_mask(n, m))).collect(),
            distinct_responses: distinct.len(),
        });
        if let Some(other) = (1..class.len()).find(|&k| responses[k] != responses[0]) {
            let j = (0..n)
                .find(|&i| responses[0][i] != responses[other][i])
                .expect("responses differ")
                + 1;
            witnesses.push(Witness {
                first: PcrInstance::from_mask(n, class[0], j)?,
                second: PcrInstance::from_mask(n, class[other], j)?,
            });
        }
    }

    let p = spec.precision;
    let state_dim = spec.state_scalar_count();
    let required_states = 1u64 << (n - 1);
    Ok(CensusReport {
        n,
        s: p.bits(),
        tables: masks.len(),
        state_dim,
        distinct_states: states.len(),
        required_states,
        count_bound_violated: (states.len() as u64) < required_states,
        grid_alphabet: p.grid_size(),
        realized_alphabet: alphabet.len(),
        grid_bound_holds: log2_bound_holds(state_dim, p.grid_size(), n),
        realized_bound_holds: log2_bound_holds(state_dim, alphabet.len() as u64, n),
        table_state,
        states: states
            .iter()
            .map(|st| st.iter().copied().enumerate().filter(|&(_, k)| k != 0).collect())
            .collect(),
        collisions,
        witnesses,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WitnessCheck {
    pub witness: Witness,
    pub first_answer: Option<Answer>,
    pub second_answer: Option<Answer>,
    pub first_truth: Answer,
    pub second_truth: Answer,
}

impl WitnessCheck {
    /// Identical decoder answers on two instances whose ground truths differ,
    /// so the decoder errs on one of them.
    pub fn confirmed(&self) -> bool {
        self.first_answer == self.second_answer && self.first_truth != self.second_truth
    }
}

/// Executes both witness instances end to end.
pub fn confirm_witness(spec: &DecoderSpec, witness: &Witness, budget: usize) -> Result<WitnessCheck, AnalysisError> {
    let run = |inst: &PcrInstance| -> Result<Option<Answer>, AnalysisError> {
        Ok(greedy_decode(spec, &prompt_ids(inst), budget)?.answer())
    };
    Ok(WitnessCheck {
        witness: witness.clone(),
        first_answer: run(&witness.first)?,
        second_answer: run(&witness.second)?,
        first_truth: ground_truth(&witness.first),
        second_truth: ground_truth(&witness.second),
    })
}
