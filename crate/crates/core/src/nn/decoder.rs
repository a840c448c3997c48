use crate::fixed::{FixedMatrix, FixedVector};

use super::layers::{ga_layer_forward, gdn_layer_step};
use super::params::{DecoderSpec, LayerKind, Mixer};
use super::NnError;

/// Rounded recurrent matrices of every GDN head, indexed `[layer][head]`.
/// GA layers hold no state.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GdnState {
    layers: Vec<Vec<FixedMatrix>>,
}

impl GdnState {
    pub fn initial(spec: &DecoderSpec) -> Self {
        let p = spec.precision;
        let layers = spec
            .layers
            .iter()
            .map(|layer| match &layer.mixer {
                Mixer::Ga(_) => Vec::new(),
                Mixer::Gdn(heads) => heads
                    .iter()
                    .map(|h| {
                        FixedMatrix::from_raw(p, layer.head_dim, layer.head_dim, h.initial_state.clone())
                            .expect("validated initial state")
                    })
                    .collect(),
            })
            .collect();
        Self { layers }
    }

    pub fn layer(&self, index: usize) -> &[FixedMatrix] {
        &self.layers[index]
    }

    pub fn head(&self, layer: usize, head: usize) -> &FixedMatrix {
        &self.layers[layer][head]
    }

    /// All state numerators in layer, head, row-major order.
    pub fn fingerprint(&self) -> Vec<i64> {
        self.layers
            .iter()
            .flatten()
            .flat_map(|m| m.raw().iter().copied())
            .collect()
    }

    pub fn scalar_count(&self) -> usize {
        self.layers.iter().flatten().map(|m| m.raw().len()).sum()
    }
}

/// Everything observable from one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    /// Final-layer hidden vector at every position.
    pub hiddens: Vec<FixedVector>,
    /// `(layer index, per-head last-position attention weights)` for GA layers.
    pub attention: Vec<(usize, Vec<FixedVector>)>,
    /// Recurrent state after the last position.
    pub state: GdnState,
    /// Rounded logits at the last position.
    pub logits: FixedVector,
}

fn run(
    spec: &DecoderSpec,
    tokens: &[usize],
    start: usize,
    mut state: GdnState,
) -> Result<ForwardTrace, NnError> {
    if tokens.is_empty() {
        return Err(NnError::EmptyPrompt);
    }
    let len = start + tokens.len();
    if len > spec.max_context {
        return Err(NnError::ContextOverflow {
            len,
            max: spec.max_context,
        });
    }
    let mut hiddens = tokens
        .iter()
        .enumerate()
        .map(|(i, &t)| spec.embed(t, start + i))
        .collect::<Result<Vec<_>, _>>()?;
    let mut attention = Vec::new();
    for (li, layer) in spec.layers.iter().enumerate() {
        match layer.kind() {
            LayerKind::Ga => {
                if start > 0 {
                    return Err(NnError::NotPureGdn);
                }
                let out = ga_layer_forward(layer, &hiddens)?;
                hiddens = out.hiddens;
                attention.push((li, out.last_weights));
            }
            LayerKind::Gdn => {
                let heads = &mut state.layers[li];
                for h in hiddens.iter_mut() {
                    *h = gdn_layer_step(layer, heads, h)?;
                }
            }
        }
    }
    let logits = spec.output.apply(hiddens.last().expect("nonempty"))?;
    Ok(ForwardTrace {
        hiddens,
        attention,
        state,
        logits,
    })
}

/// Full forward pass with intermediate observations.
pub fn forward_trace(spec: &DecoderSpec, tokens: &[usize]) -> Result<ForwardTrace, NnError> {
    run(spec, tokens, 0, GdnState::initial(spec))
}

/// Last-position logits.
pub fn decoder_forward(spec: &DecoderSpec, tokens: &[usize]) -> Result<FixedVector, NnError> {
    Ok(forward_trace(spec, tokens)?.logits)
}

/// Recurrent state of a pure-GDN decoder after reading `prefix`.
pub fn scan_prefix(spec: &DecoderSpec, prefix: &[usize]) -> Result<GdnState, NnError> {
    if !spec.is_pure_gdn() {
        return Err(NnError::NotPureGdn);
    }
    if prefix.is_empty() {
        return Ok(GdnState::initial(spec));
    }
    Ok(run(spec, prefix, 0, GdnState::initial(spec))?.state)
}

/// Continues a pure-GDN decoder from `state`, which must be the state after
/// `start` tokens, and returns the logits after `suffix`.
pub fn forward_from_state(
    spec: &DecoderSpec,
    state: &GdnState,
    start: usize,
    suffix: &[usize],
) -> Result<FixedVector, NnError> {
    if !spec.is_pure_gdn() {
        return Err(NnError::NotPureGdn);
    }
    Ok(run(spec, suffix, start, state.clone())?.logits)
}
