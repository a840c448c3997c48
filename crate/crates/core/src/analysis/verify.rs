use std::fmt;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::construct::prompt_ids;
use crate::nn::{forward_trace, greedy_decode, Answer, DecodeOutcome, DecoderSpec, LayerKind};
use crate::pcr::{all_instances, ground_truth, parity_projection, PcrInstance};

use super::AnalysisError;

/// What a decoder produced on one instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Observed {
    Answer(Answer),
    BudgetExceeded,
    /// The decoder raised an error, e.g. emitted a non-scratch token.
    Error(String),
}

impl fmt::Display for Observed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observed::Answer(a) => f.write_str(a.as_str()),
            Observed::BudgetExceeded => f.write_str("BUDGET_EXCEEDED"),
            Observed::Error(e) => write!(f, "ERROR: {e}"),
        }
    }
}

impl Serialize for Observed {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub instance: PcrInstance,
    pub expected: Answer,
    pub got: Observed,
    pub scratch: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub n: usize,
    pub s: u32,
    pub budget: usize,
    pub total: usize,
    pub passed: usize,
    pub max_scratch: usize,
    pub failures: Vec<Failure>,
    /// Not serialized, so reports of identical runs are byte-identical.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl VerificationReport {
    pub fn pass(&self) -> bool {
        self.failures.is_empty()
    }
}

struct Outcome {
    instance: PcrInstance,
    expected: Answer,
    got: Observed,
    scratch: usize,
}

fn run_one(spec: &DecoderSpec, instance: PcrInstance, budget: usize) -> Outcome {
    let expected = ground_truth(&instance);
    let (got, scratch) = match greedy_decode(spec, &prompt_ids(&instance), budget) {
        Ok(t) => (
            match t.outcome {
                DecodeOutcome::Answer(a) => Observed::Answer(a),
                DecodeOutcome::BudgetExceeded => Observed::BudgetExceeded,
            },
            t.scratch_count(),
        ),
        Err(e) => (Observed::Error(e.to_string()), 0),
    };
    Outcome {
        instance,
        expected,
        got,
        scratch,
    }
}

fn verify_instances(
    spec: &DecoderSpec,
    n: usize,
    budget: usize,
    instances: Vec<PcrInstance>,
) -> Result<VerificationReport, AnalysisError> {
    let needed = 3 * n + budget;
    if spec.max_context < needed {
        return Err(AnalysisError::ContextTooShort {
            needed,
            max: spec.max_context,
        });
    }
    let start = Instant::now();
    // collect keeps enumeration order, so the report does not depend on scheduling
    let outcomes: Vec<Outcome> = instances
        .into_par_iter()
        .map(|inst| run_one(spec, inst, budget))
        .collect();
    let total = outcomes.len();
    let max_scratch = outcomes.iter().map(|o| o.scratch).max().unwrap_or(0);
    let failures: Vec<Failure> = outcomes
        .into_iter()
        .filter(|o| o.got != Observed::Answer(o.expected))
        .map(|o| Failure {
            instance: o.instance,
            expected: o.expected,
            got: o.got,
            scratch: o.scratch,
        })
        .collect();
    Ok(VerificationReport {
        n,
        s: spec.precision.bits(),
        budget,
        total,
        passed: total - failures.len(),
        max_scratch,
        failures,
        wall_time: start.elapsed(),
    })
}

/// Greedy-decodes all `2ⁿ · n` instances and compares with the ground truth.
pub fn exhaustive_verify(spec: &DecoderSpec, n: usize, budget: usize) -> Result<VerificationReport, AnalysisError> {
    if n == 0 || n >= 32 {
        return Err(AnalysisError::TableSize(n));
    }
    verify_instances(spec, n, budget, all_instances(n).collect())
}

/// Runs a pure-GA decoder on the `2^r` parity instances `Y = 0x, j = 1`.
pub fn ga_parity_probe(spec: &DecoderSpec, r: usize, budget: usize) -> Result<VerificationReport, AnalysisError> {
    if !spec.is_pure_ga() {
        return Err(AnalysisError::NotPureGa);
    }
    if r >= 31 {
        return Err(AnalysisError::TableSize(r + 1));
    }
    let instances = (0..1u64 << r)
        .map(|mask| parity_projection(&crate::pcr::table_from_mask(r, mask)))
        .collect();
    verify_instances(spec, r + 1, budget, instances)
}

/// Checks that, at the last prompt position, the active head of every
/// attention layer puts weight exactly 1 on one position and 0 elsewhere.
/// Returns the selected position per layer (`None` when not one-hot).
pub fn attention_selection(spec: &DecoderSpec, instance: &PcrInstance) -> Result<Vec<Option<usize>>, AnalysisError> {
    let trace = forward_trace(spec, &prompt_ids(instance))?;
    let one = spec.precision.one_raw();
    Ok(trace
        .attention
        .iter()
        .map(|(_, heads)| {
            let w = heads[0].raw();
            let hot: Vec<usize> = (0..w.len()).filter(|&i| w[i] != 0).collect();
            match hot.as_slice() {
                [i] if w[*i] == one => Some(*i),
                _ => None,
            }
        })
        .collect())
}

/// Instances on which the hybrid's attention layers do not select exactly
/// the MARK position and then the first token of block `j`.
#[derive(Clone, Debug, Serialize)]
pub struct AttentionAudit {
    pub n: usize,
    pub checked: usize,
    pub violations: Vec<PcrInstance>,
}

pub fn attention_audit(spec: &DecoderSpec, n: usize) -> Result<AttentionAudit, AnalysisError> {
    if spec.layers.iter().filter(|l| l.kind() == LayerKind::Ga).count() != 2 {
        return Err(AnalysisError::Unsupported("attention audit expects two attention layers".into()));
    }
    let instances: Vec<PcrInstance> = all_instances(n).collect();
    let checks = instances
        .par_iter()
        .map(|inst| {
            let sel = attention_selection(spec, inst)?;
            let j = inst.query();
            Ok(sel == [Some(2 * n + j - 1), Some(2 * (j - 1))])
        })
        .collect::<Result<Vec<bool>, AnalysisError>>()?;
    Ok(AttentionAudit {
        n,
        checked: instances.len(),
        violations: instances
            .into_iter()
            .zip(checks)
            .filter(|(_, ok)| !ok)
            .map(|(i, _)| i)
            .collect(),
    })
}
