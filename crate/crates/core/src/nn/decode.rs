use serde::{Deserialize, Serialize};

use crate::fixed::FixedVector;

use super::decoder::decoder_forward;
use super::params::DecoderSpec;
use super::NnError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Answer {
    #[serde(rename = "YES")]
    Yes,
    #[serde(rename = "NO")]
    No,
}

impl Answer {
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Answer::Yes
        } else {
            Answer::No
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Answer::Yes => "YES",
            Answer::No => "NO",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DecodeOutcome {
    #[serde(rename = "answer")]
    Answer(Answer),
    /// A scratch token was emitted after the budget was used up.
    #[serde(rename = "budget_exceeded")]
    BudgetExceeded,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StepRecord {
    pub emitted: String,
    pub logits: FixedVector,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Transcript {
    pub prompt: Vec<String>,
    pub scratch: Vec<String>,
    pub outcome: DecodeOutcome,
    pub steps: Vec<StepRecord>,
}

impl Transcript {
    pub fn answer(&self) -> Option<Answer> {
        match self.outcome {
            DecodeOutcome::Answer(a) => Some(a),
            DecodeOutcome::BudgetExceeded => None,
        }
    }

    pub fn scratch_count(&self) -> usize {
        self.scratch.len()
    }

    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("transcript serializes")
    }
}

/// Greedy argmax; among equal logits the token earlier in `tie_order` wins.
pub(crate) fn argmax(spec: &DecoderSpec, logits: &FixedVector) -> usize {
    let mut best = spec.tie_order[0];
    for &t in &spec.tie_order[1..] {
        if logits.get(t).raw() > logits.get(best).raw() {
            best = t;
        }
    }
    best
}

/// Decodes greedily until the first YES/NO, allowing at most `budget`
/// scratch tokens before it.
pub fn greedy_decode(
    spec: &DecoderSpec,
    prompt: &[usize],
    budget: usize,
) -> Result<Transcript, NnError> {
    let vocab = &spec.vocab;
    let mut tokens = prompt.to_vec();
    let mut transcript = Transcript {
        prompt: prompt.iter().map(|&t| vocab.name(t).to_string()).collect(),
        scratch: Vec::new(),
        outcome: DecodeOutcome::BudgetExceeded,
        steps: Vec::new(),
    };
    loop {
        let logits = decoder_forward(spec, &tokens)?;
        let next = argmax(spec, &logits);
        transcript.steps.push(StepRecord {
            emitted: vocab.name(next).to_string(),
            logits,
        });
        if next == vocab.yes || next == vocab.no {
            transcript.outcome = DecodeOutcome::Answer(Answer::from_bit(next == vocab.yes));
            return Ok(transcript);
        }
        if !vocab.is_scratch(next) {
            return Err(NnError::NonScratchNonAnswerEmission(vocab.name(next).to_string()));
        }
        if transcript.scratch.len() == budget {
            transcript.outcome = DecodeOutcome::BudgetExceeded;
            return Ok(transcript);
        }
        transcript.scratch.push(vocab.name(next).to_string());
        tokens.push(next);
    }
}
