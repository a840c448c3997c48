use crate::fixed::{
    dot_strict, l2norm_s, rmsnorm_s, score_s, sigmoid_s, softmax_s, FixedMatrix, FixedScalar,
    FixedVector,
};

use super::params::{Activation, GaHeadParams, GdnHeadParams, LayerSpec, Mixer};
use super::NnError;

/// Per-position outputs of a GA layer plus the rounded attention weights of
/// the last position for every head.
#[derive(Clone, Debug)]
pub struct GaLayerOutput {
    pub hiddens: Vec<FixedVector>,
    pub last_weights: Vec<FixedVector>,
}

fn gate(g: &FixedVector) -> Result<FixedVector, NnError> {
    let out = g.iter().map(sigmoid_s).collect::<Result<Vec<_>, _>>()?;
    Ok(FixedVector::from_scalars(g.precision(), &out))
}

fn activate(act: Activation, x: FixedScalar) -> Result<FixedScalar, NnError> {
    let p = x.precision();
    Ok(match act {
        Activation::ClampUnit => x.clamp_to(p.zero(), p.one()),
        Activation::Sigmoid => sigmoid_s(x)?,
    })
}

/// Output projection, rounded residual add, then the residual MLP.
fn finish_block(layer: &LayerSpec, h: &FixedVector, heads: &[FixedVector]) -> Result<FixedVector, NnError> {
    let o = FixedVector::concat(h.precision(), heads);
    let t = layer.out_proj.apply(&o)?;
    let mixed = h.add_s(&t)?;
    match &layer.mlp {
        None => Ok(mixed),
        Some(mlp) => {
            let hidden = mlp.up.apply(&mixed)?.relu();
            let out = mlp.down.apply(&hidden)?;
            Ok(mixed.add_s(&out)?)
        }
    }
}

struct GaProjections {
    queries: Vec<FixedVector>,
    keys: Vec<FixedVector>,
    values: Vec<FixedVector>,
    gates: Vec<FixedVector>,
}

fn project_ga(head: &GaHeadParams, hiddens: &[FixedVector]) -> Result<GaProjections, NnError> {
    let mut pr = GaProjections {
        queries: Vec::with_capacity(hiddens.len()),
        keys: Vec::with_capacity(hiddens.len()),
        values: Vec::with_capacity(hiddens.len()),
        gates: Vec::with_capacity(hiddens.len()),
    };
    for h in hiddens {
        pr.queries.push(rmsnorm_s(&head.query.apply(h)?)?);
        pr.keys.push(rmsnorm_s(&head.key.apply(h)?)?);
        pr.values.push(head.value.apply(h)?);
        pr.gates.push(gate(&head.gate.apply(h)?)?);
    }
    Ok(pr)
}

/// Attention weights of position `i` over the causal prefix `0..=i`.
fn prefix_weights(pr: &GaProjections, i: usize) -> Result<FixedVector, NnError> {
    let p = pr.queries[i].precision();
    let q = &pr.queries[i];
    let scores = if q.is_zero() {
        vec![p.zero(); i + 1]
    } else {
        pr.keys[..=i]
            .iter()
            .map(|k| score_s(q, k))
            .collect::<Result<Vec<_>, _>>()?
    };
    Ok(softmax_s(&FixedVector::from_scalars(p, &scores))?)
}

/// Rounded value mixing `u = sum_s(A_1 ⊗ v_1, …, A_i ⊗ v_i)` per coordinate.
fn mix_values(weights: &FixedVector, values: &[FixedVector], dim: usize) -> FixedVector {
    let p = weights.precision();
    let mut u = FixedVector::zeros(p, dim);
    // zero weights contribute exact zeros, which leave a strict fold unchanged
    let active: Vec<usize> = (0..weights.len()).filter(|&j| !weights.get(j).is_zero()).collect();
    for c in 0..dim {
        let acc = active
            .iter()
            .map(|&j| weights.get(j).mul_s(values[j].get(c)))
            .reduce(FixedScalar::add_s)
            .unwrap_or(p.zero());
        u.set(c, acc);
    }
    u
}

/// Causal Gated Attention layer over a whole sequence.
pub fn ga_layer_forward(layer: &LayerSpec, hiddens: &[FixedVector]) -> Result<GaLayerOutput, NnError> {
    let Mixer::Ga(heads) = &layer.mixer else {
        return Err(NnError::WrongLayerKind {
            index: 0,
            expected: super::LayerKind::Ga,
        });
    };
    let n = hiddens.len();
    let projections = heads
        .iter()
        .map(|head| project_ga(head, hiddens))
        .collect::<Result<Vec<_>, _>>()?;
    let mut outputs = Vec::with_capacity(n);
    let mut last_weights = Vec::new();
    // before a head's first nonzero value its mixture is exactly zero
    let first_value: Vec<usize> = projections
        .iter()
        .map(|pr| pr.values.iter().position(|v| !v.is_zero()).unwrap_or(n))
        .collect();
    for (i, hidden) in hiddens.iter().enumerate() {
        let last = i + 1 == n;
        let mut head_outs = Vec::with_capacity(heads.len());
        for (pr, &first) in projections.iter().zip(&first_value) {
            if i < first && !last {
                head_outs.push(FixedVector::zeros(pr.gates[i].precision(), layer.head_dim));
                continue;
            }
            let weights = prefix_weights(pr, i)?;
            let u = mix_values(&weights, &pr.values[..=i], layer.head_dim);
            head_outs.push(pr.gates[i].hadamard_s(&u)?);
            if last {
                last_weights.push(weights);
            }
        }
        outputs.push(finish_block(layer, hidden, &head_outs)?);
    }
    Ok(GaLayerOutput {
        hiddens: outputs,
        last_weights,
    })
}

/// One recurrent update of a DeltaNet head under the strict convention:
/// `S ← α(S − β(S k)kᵀ) + β v kᵀ`, rounding after every scalar operation.
pub(crate) fn gdn_head_update(
    state: &mut FixedMatrix,
    alpha: FixedScalar,
    beta: FixedScalar,
    key: &FixedVector,
    value: &FixedVector,
) -> Result<(), NnError> {
    let d = state.rows();
    for r in 0..d {
        let row = state.row(r);
        let t = beta.mul_s(dot_strict(&row, key)?);
        let w = beta.mul_s(value.get(r));
        for c in 0..d {
            let k = key.get(c);
            let erased = row.get(c).sub_s(t.mul_s(k));
            state.set(r, c, alpha.mul_s(erased).add_s(w.mul_s(k)));
        }
    }
    Ok(())
}

fn gdn_head_step(
    head: &GdnHeadParams,
    state: &mut FixedMatrix,
    h: &FixedVector,
) -> Result<FixedVector, NnError> {
    let k = l2norm_s(&head.key.apply(h)?)?;
    let v = head.value.apply(h)?;
    if k.is_zero() && v.is_zero() && state.raw().iter().all(|&x| x == 0) {
        // a zero state with zero key and value stays zero and reads out zero
        return Ok(FixedVector::zeros(h.precision(), state.rows()));
    }
    let q = l2norm_s(&head.query.apply(h)?)?;
    let alpha = activate(head.alpha_activation, head.alpha.apply(h)?.get(0))?;
    let beta = activate(head.beta_activation, head.beta.apply(h)?.get(0))?;
    let gamma = gate(&head.gate.apply(h)?)?;
    gdn_head_update(state, alpha, beta, &k, &v)?;
    let read: Vec<FixedScalar> = (0..state.rows())
        .map(|r| dot_strict(&state.row(r), &q))
        .collect::<Result<_, _>>()?;
    let u = FixedVector::from_scalars(h.precision(), &read);
    Ok(gamma.hadamard_s(&rmsnorm_s(&u)?)?)
}

/// Advances every head of a GDN layer by one token and returns the block output.
pub fn gdn_layer_step(
    layer: &LayerSpec,
    states: &mut [FixedMatrix],
    h: &FixedVector,
) -> Result<FixedVector, NnError> {
    let Mixer::Gdn(heads) = &layer.mixer else {
        return Err(NnError::WrongLayerKind {
            index: 0,
            expected: super::LayerKind::Gdn,
        });
    };
    if states.len() != heads.len() {
        return Err(NnError::DimensionMismatch {
            what: "GDN head states",
            expected: heads.len(),
            got: states.len(),
        });
    }
    let outs = heads
        .iter()
        .zip(states.iter_mut())
        .map(|(head, st)| gdn_head_step(head, st, h))
        .collect::<Result<Vec<_>, _>>()?;
    finish_block(layer, h, &outs)
}
