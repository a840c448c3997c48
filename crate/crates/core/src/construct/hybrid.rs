use std::collections::BTreeMap;
use std::ops::Range;

use serde::Serialize;

use crate::codes::{build_code, interleave_query_raw, CodeSymbol, CodeTable};
use crate::fixed::Precision;
use crate::nn::{
    DecoderSpec, Embedding, GaHeadParams, LayerSpec, MlpParams, Mixer, PairEmbedding,
    SparseAffine, SparseVec, Vocabulary,
};

use super::cell::{build_parity_cell, inert_gdn_head, saturated_gate, CellPorts};
use super::ConstructError;

/// Vocabulary of every built decoder, in tie-breaking order.
pub const SYMBOLS: [&str; 7] = ["YES", "NO", "#", "0", "1", "MARK", "BLANK"];
pub const TOKEN_YES: usize = 0;
pub const TOKEN_NO: usize = 1;
pub const TOKEN_SCRATCH: usize = 2;
pub const TOKEN_ZERO: usize = 3;
pub const TOKEN_ONE: usize = 4;
pub const TOKEN_MARK: usize = 5;
pub const TOKEN_BLANK: usize = 6;

/// Positions beyond the `3n` prompt that the decoder still accepts.
pub const CONTEXT_HEADROOM: usize = 4;

pub fn vocabulary() -> Vocabulary {
    Vocabulary {
        symbols: SYMBOLS.iter().map(|s| s.to_string()).collect(),
        yes: TOKEN_YES,
        no: TOKEN_NO,
        scratch: vec![TOKEN_SCRATCH],
    }
}

fn tie_order() -> Vec<usize> {
    (0..SYMBOLS.len()).collect()
}

/// Prompt token id for a PCR prompt symbol.
pub fn token_id(t: crate::pcr::PromptToken) -> usize {
    use crate::pcr::PromptToken::*;
    match t {
        Zero => TOKEN_ZERO,
        One => TOKEN_ONE,
        Mark => TOKEN_MARK,
        Blank => TOKEN_BLANK,
    }
}

pub fn prompt_ids(inst: &crate::pcr::PcrInstance) -> Vec<usize> {
    crate::pcr::encode_prompt(inst).into_iter().map(token_id).collect()
}

/// Residual-stream coordinates of the hybrid decoder.
///
/// Code slots hold `m` signs each; the scalar slots follow them. Only the
/// layer named next to a slot writes it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EmbeddingLayout {
    pub m: usize,
    pub d_model: usize,
    /// attention-1 key code, by token type (embedding)
    pub key1: Range<usize>,
    /// address code `E(ℓ)` at query offset `ℓ` (embedding)
    pub val1: Range<usize>,
    /// retrieved address (attention 1)
    pub addr: Range<usize>,
    /// attention-2 key code `E(ℓ)` on the first token of block `ℓ` (embedding)
    pub key2: Range<usize>,
    /// toggle-phase selectors (embedding)
    pub gsel: usize,
    pub fsel: usize,
    /// table bit on the first token of its block (embedding)
    pub yval: usize,
    /// parity head readout (GDN)
    pub praw: usize,
    /// parity bit (GDN MLP)
    pub par: usize,
    /// retrieved bit (attention 2)
    pub bit: usize,
    /// answer bit (final MLP)
    pub ans: usize,
}

impl EmbeddingLayout {
    pub fn new(m: usize) -> Self {
        let scalars = 4 * m;
        let used = scalars + 7;
        // every layer splits d_model evenly into heads of width 2 or 2m
        let d_model = used.div_ceil(2 * m) * 2 * m;
        Self {
            m,
            d_model,
            key1: 0..m,
            val1: m..2 * m,
            addr: 2 * m..3 * m,
            key2: 3 * m..4 * m,
            gsel: scalars,
            fsel: scalars + 1,
            yval: scalars + 2,
            praw: scalars + 3,
            par: scalars + 4,
            bit: scalars + 5,
            ans: scalars + 6,
        }
    }

    fn ports(&self) -> CellPorts {
        CellPorts {
            d_model: self.d_model,
            gsel: self.gsel,
            fsel: self.fsel,
        }
    }
}

fn code_entries(p: Precision, slot: &Range<usize>, word: &[i8]) -> SparseVec {
    slot.clone()
        .zip(word)
        .map(|(i, &c)| (i, c as i64 * p.one_raw()))
        .collect()
}

fn selector_pairs(p: Precision, n: usize, gsel: usize, fsel: usize, yval: Option<usize>) -> Vec<PairEmbedding> {
    let one = p.one_raw();
    (0..n)
        .flat_map(|block| {
            let mut first = vec![(gsel, one)];
            if let Some(y) = yval {
                first.push((y, one));
            }
            first.sort_unstable();
            [
                PairEmbedding {
                    token: TOKEN_ONE,
                    position: 2 * block,
                    vector: first,
                },
                PairEmbedding {
                    token: TOKEN_ONE,
                    position: 2 * block + 1,
                    vector: vec![(fsel, one)],
                },
            ]
        })
        .collect()
}

fn embedding(p: Precision, n: usize, max_context: usize, lay: &EmbeddingLayout, code: &CodeTable) -> Embedding {
    let mut token = vec![SparseVec::new(); SYMBOLS.len()];
    let dummy = code.word(CodeSymbol::Dummy);
    token[TOKEN_ZERO] = code_entries(p, &lay.key1, dummy);
    token[TOKEN_ONE] = code_entries(p, &lay.key1, dummy);
    token[TOKEN_MARK] = code_entries(p, &lay.key1, code.word(CodeSymbol::Mark));
    token[TOKEN_BLANK] = code_entries(p, &lay.key1, code.word(CodeSymbol::Blank));
    let position = (0..max_context)
        .map(|i| {
            if i < 2 * n && i % 2 == 0 {
                code_entries(p, &lay.key2, code.word(CodeSymbol::Address(i / 2 + 1)))
            } else if (2 * n..3 * n).contains(&i) {
                let mut v = code_entries(p, &lay.val1, code.word(CodeSymbol::Address(i - 2 * n + 1)));
                v.extend(code_entries(p, &lay.key2, dummy));
                v
            } else {
                code_entries(p, &lay.key2, dummy)
            }
        })
        .collect();
    Embedding {
        token,
        position,
        pair: selector_pairs(p, n, lay.gsel, lay.fsel, Some(lay.yval)),
    }
}

/// GDN layer: the parity head plus inert padding heads, and an MLP that
/// clips the readout to a bit, `par = relu(praw) − relu(praw − 1)`.
fn parity_layer(p: Precision, ports: CellPorts, praw: usize, par: usize) -> LayerSpec {
    let one = p.one_raw();
    let d = ports.d_model;
    let mut heads = vec![build_parity_cell(p, ports)];
    heads.extend((1..d / 2).map(|_| inert_gdn_head(d, 2)));
    let mut out_proj = SparseAffine::zero(d, d);
    out_proj.set_weight(praw, 0, one);
    let mut up = SparseAffine::zero(d, 2);
    up.set_weight(0, praw, one);
    up.set_weight(1, praw, one);
    up.set_bias(1, -one);
    let mut down = SparseAffine::zero(2, d);
    down.set_weight(par, 0, one);
    down.set_weight(par, 1, -one);
    LayerSpec {
        head_dim: 2,
        mixer: Mixer::Gdn(heads),
        out_proj,
        mlp: Some(MlpParams { up, down }),
    }
}

fn inert_ga_head(d_model: usize, head_dim: usize) -> GaHeadParams {
    GaHeadParams {
        query: SparseAffine::zero(d_model, head_dim),
        key: SparseAffine::zero(d_model, head_dim),
        value: SparseAffine::zero(d_model, head_dim),
        gate: SparseAffine::zero(d_model, head_dim),
    }
}

/// Interleaved key `(c₁, −1, …, c_m, −1)` read from a code slot.
fn key_from_slot(p: Precision, d: usize, m: usize, slot: &Range<usize>) -> SparseAffine {
    let one = p.one_raw();
    let mut key = SparseAffine::zero(d, 2 * m);
    for (i, c) in slot.clone().enumerate() {
        key.set_weight(2 * i, c, one);
        key.set_bias(2 * i + 1, -one);
    }
    key
}

fn ga_layer(d: usize, head_dim: usize, head: GaHeadParams, out_proj: SparseAffine, mlp: Option<MlpParams>) -> LayerSpec {
    let mut heads = vec![head];
    heads.extend((1..d / head_dim).map(|_| inert_ga_head(d, head_dim)));
    LayerSpec {
        head_dim,
        mixer: Mixer::Ga(heads),
        out_proj,
        mlp,
    }
}

/// Attention 1: the constant query `Q(E(MARK))` selects the marked query
/// position, whose value `E(j)` is copied into `addr`.
fn retrieval_layer_address(p: Precision, lay: &EmbeddingLayout, code: &CodeTable) -> LayerSpec {
    let (d, m, one) = (lay.d_model, lay.m, p.one_raw());
    let mut query = SparseAffine::zero(d, 2 * m);
    for (r, k) in interleave_query_raw(p, code.word(CodeSymbol::Mark)).into_iter().enumerate() {
        query.set_bias(r, k);
    }
    let mut value = SparseAffine::zero(d, 2 * m);
    let mut out_proj = SparseAffine::zero(d, d);
    for (i, (src, dst)) in lay.val1.clone().zip(lay.addr.clone()).enumerate() {
        value.set_weight(i, src, one);
        out_proj.set_weight(dst, i, one);
    }
    let head = GaHeadParams {
        query,
        key: key_from_slot(p, d, m, &lay.key1),
        value,
        gate: saturated_gate(p, d, 2 * m),
    };
    ga_layer(d, 2 * m, head, out_proj, None)
}

/// Attention 2: the query `Q(addr)` selects the first token of block `j`,
/// whose value `Y_j` lands in `bit`; the MLP then writes
/// `ans = relu(bit) + relu(par) − 2 relu(bit + par − 1)`.
fn retrieval_layer_bit(p: Precision, lay: &EmbeddingLayout) -> LayerSpec {
    let (d, m, one) = (lay.d_model, lay.m, p.one_raw());
    let mut query = SparseAffine::zero(d, 2 * m);
    for (i, c) in lay.addr.clone().enumerate() {
        query.set_weight(2 * i, c, one);
        query.set_bias(2 * i + 1, one);
    }
    let mut value = SparseAffine::zero(d, 2 * m);
    value.set_weight(0, lay.yval, one);
    let mut out_proj = SparseAffine::zero(d, d);
    out_proj.set_weight(lay.bit, 0, one);
    let head = GaHeadParams {
        query,
        key: key_from_slot(p, d, m, &lay.key2),
        value,
        gate: saturated_gate(p, d, 2 * m),
    };
    let mut up = SparseAffine::zero(d, 3);
    up.set_weight(0, lay.bit, one);
    up.set_weight(1, lay.par, one);
    up.set_weight(2, lay.bit, one);
    up.set_weight(2, lay.par, one);
    up.set_bias(2, -one);
    let mut down = SparseAffine::zero(3, d);
    down.set_weight(lay.ans, 0, one);
    down.set_weight(lay.ans, 1, one);
    down.set_weight(lay.ans, 2, -2 * one);
    ga_layer(d, 2 * m, head, out_proj, Some(MlpParams { up, down }))
}

/// YES logit `b`, NO logit `1 − b`, every other token `−1`.
fn answer_map(p: Precision, d: usize, bit: usize) -> SparseAffine {
    let one = p.one_raw();
    let mut out = SparseAffine::zero(d, SYMBOLS.len());
    for t in 0..SYMBOLS.len() {
        out.set_bias(t, -one);
    }
    out.set_weight(TOKEN_YES, bit, one);
    out.set_bias(TOKEN_YES, 0);
    out.set_weight(TOKEN_NO, bit, -one);
    out.set_bias(TOKEN_NO, one);
    out
}

/// Hybrid decoder answering PCR on tables of size `n` with no scratch tokens:
/// one GDN layer computing parity, then two hard-selection attention layers.
pub fn build_hybrid_decoder(n: usize, p: Precision, seed: u64) -> Result<DecoderSpec, ConstructError> {
    let code = build_code(n, p, seed)?;
    build_hybrid_with_code(n, p, &code)
}

pub fn build_hybrid_with_code(n: usize, p: Precision, code: &CodeTable) -> Result<DecoderSpec, ConstructError> {
    if n == 0 || code.n != n {
        return Err(ConstructError::CodeMismatch { n, code_n: code.n });
    }
    let lay = EmbeddingLayout::new(code.m);
    let max_context = 3 * n + CONTEXT_HEADROOM;
    let layers = vec![
        parity_layer(p, lay.ports(), lay.praw, lay.par),
        retrieval_layer_address(p, &lay, code),
        retrieval_layer_bit(p, &lay),
    ];
    let mut spec = DecoderSpec::new(
        p,
        lay.d_model,
        max_context,
        vocabulary(),
        tie_order(),
        embedding(p, n, max_context, &lay, code),
        layers,
        answer_map(p, lay.d_model, lay.ans),
    )?;
    spec.meta = BTreeMap::from([
        ("builder".to_string(), "hybrid".to_string()),
        ("n".to_string(), n.to_string()),
        ("s".to_string(), p.bits().to_string()),
        ("seed".to_string(), code.seed.to_string()),
        ("code_length".to_string(), code.m.to_string()),
        ("layout".to_string(), serde_json::to_string(&lay).expect("layout serializes")),
    ]);
    Ok(spec)
}

/// Pure-GDN decoder that answers `p(Y)`: the parity head alone, ignoring the
/// query. It has two reachable post-table states.
pub fn build_parity_only_decoder(n: usize, p: Precision) -> Result<DecoderSpec, ConstructError> {
    if n == 0 {
        return Err(ConstructError::EmptyTable);
    }
    let (gsel, fsel, praw, par, d) = (0, 1, 2, 3, 4);
    let ports = CellPorts { d_model: d, gsel, fsel };
    let max_context = 3 * n + CONTEXT_HEADROOM;
    let mut spec = DecoderSpec::new(
        p,
        d,
        max_context,
        vocabulary(),
        tie_order(),
        Embedding {
            token: vec![SparseVec::new(); SYMBOLS.len()],
            position: Vec::new(),
            pair: selector_pairs(p, n, gsel, fsel, None),
        },
        vec![parity_layer(p, ports, praw, par)],
        answer_map(p, d, par),
    )?;
    spec.meta = BTreeMap::from([
        ("builder".to_string(), "parity-only".to_string()),
        ("n".to_string(), n.to_string()),
        ("s".to_string(), p.bits().to_string()),
    ]);
    Ok(spec)
}
