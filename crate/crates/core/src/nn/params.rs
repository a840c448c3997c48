use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::fixed::{FixedScalar, FixedVector, Precision};

use super::NnError;

pub const DECODER_FORMAT: &str = "hybridsim.decoder";
pub const DECODER_FORMAT_VERSION: u32 = 1;

/// Sparse vector of grid numerators: `(index, raw)` pairs with nonzero raw.
pub type SparseVec = Vec<(usize, i64)>;

/// Affine map `x ↦ W x + b` with sparse grid coefficients.
///
/// Evaluated under the strict convention: each row is the left fold of the
/// rounded products over its nonzero entries in column order, then `⊕ b`.
/// Omitting zero coefficients is exact since `a ⊕ 0 = a` on the grid.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "AffineDoc", into = "AffineDoc")]
pub struct SparseAffine {
    in_dim: usize,
    out_dim: usize,
    rows: Vec<SparseVec>,
    bias: Vec<i64>,
}

#[derive(Serialize, Deserialize)]
struct AffineDoc {
    in_dim: usize,
    out_dim: usize,
    /// `[row, col, raw]`
    weights: Vec<(usize, usize, i64)>,
    /// `[row, raw]`
    bias: Vec<(usize, i64)>,
}

impl TryFrom<AffineDoc> for SparseAffine {
    type Error = String;
    fn try_from(doc: AffineDoc) -> Result<Self, String> {
        let mut map = SparseAffine::zero(doc.in_dim, doc.out_dim);
        for (r, c, k) in doc.weights {
            if r >= doc.out_dim || c >= doc.in_dim {
                return Err(format!("weight index ({r}, {c}) outside {}x{}", doc.out_dim, doc.in_dim));
            }
            map.rows[r].push((c, k));
        }
        for (r, k) in doc.bias {
            if r >= doc.out_dim {
                return Err(format!("bias index {r} outside {}", doc.out_dim));
            }
            map.bias[r] = k;
        }
        for row in &mut map.rows {
            row.sort_by_key(|&(c, _)| c);
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err("duplicate weight entry".into());
            }
        }
        Ok(map)
    }
}

impl From<SparseAffine> for AffineDoc {
    fn from(map: SparseAffine) -> Self {
        let weights = map
            .rows
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.iter().map(move |&(c, k)| (r, c, k)))
            .collect();
        let bias = map
            .bias
            .iter()
            .enumerate()
            .filter(|(_, &k)| k != 0)
            .map(|(r, &k)| (r, k))
            .collect();
        AffineDoc {
            in_dim: map.in_dim,
            out_dim: map.out_dim,
            weights,
            bias,
        }
    }
}

impl SparseAffine {
    pub fn zero(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            rows: vec![Vec::new(); out_dim],
            bias: vec![0; out_dim],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    /// Sets `W[row, col] = raw` (zero removes the entry).
    pub fn set_weight(&mut self, row: usize, col: usize, raw: i64) {
        assert!(row < self.out_dim && col < self.in_dim, "weight index out of bounds");
        let entries = &mut self.rows[row];
        match entries.binary_search_by_key(&col, |&(c, _)| c) {
            Ok(i) if raw == 0 => {
                entries.remove(i);
            }
            Ok(i) => entries[i].1 = raw,
            Err(_) if raw == 0 => {}
            Err(i) => entries.insert(i, (col, raw)),
        }
    }

    pub fn set_bias(&mut self, row: usize, raw: i64) {
        self.bias[row] = raw;
    }

    pub fn weight(&self, row: usize, col: usize) -> i64 {
        self.rows[row]
            .binary_search_by_key(&col, |&(c, _)| c)
            .map_or(0, |i| self.rows[row][i].1)
    }

    pub fn bias(&self, row: usize) -> i64 {
        self.bias[row]
    }

    pub fn nonzeros(&self) -> usize {
        self.rows.iter().map(Vec::len).sum::<usize>() + self.bias.iter().filter(|&&b| b != 0).count()
    }

    pub fn apply(&self, x: &FixedVector) -> Result<FixedVector, NnError> {
        if x.len() != self.in_dim {
            return Err(NnError::DimensionMismatch {
                what: "affine input",
                expected: self.in_dim,
                got: x.len(),
            });
        }
        let p = x.precision();
        let mut out = FixedVector::zeros(p, self.out_dim);
        for (r, row) in self.rows.iter().enumerate() {
            let acc = row
                .iter()
                .map(|&(c, w)| coeff(p, w).mul_s(x.get(c)))
                .reduce(FixedScalar::add_s)
                .unwrap_or(p.zero());
            out.set(r, acc.add_s(coeff(p, self.bias[r])));
        }
        Ok(out)
    }

    fn validate(&self, p: Precision, what: &str) -> Result<(), NnError> {
        if self.rows.len() != self.out_dim || self.bias.len() != self.out_dim {
            return Err(NnError::invalid(format!("{what}: row count differs from out_dim")));
        }
        for row in &self.rows {
            for &(c, k) in row {
                if c >= self.in_dim {
                    return Err(NnError::invalid(format!("{what}: column {c} ≥ in_dim")));
                }
                p.scalar(k)?;
            }
        }
        for &k in &self.bias {
            p.scalar(k)?;
        }
        Ok(())
    }

    fn check_shape(&self, what: &str, in_dim: usize, out_dim: usize) -> Result<(), NnError> {
        if self.in_dim != in_dim || self.out_dim != out_dim {
            return Err(NnError::invalid(format!(
                "{what}: expected {in_dim}→{out_dim}, found {}→{}",
                self.in_dim, self.out_dim
            )));
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn coeff(p: Precision, raw: i64) -> FixedScalar {
    // coefficients are range-checked by DecoderSpec::validate
    p.scalar(raw).unwrap_or_else(|_| p.max_value())
}

/// Scalar activation used for the DeltaNet decay and write strength.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// `clamp(x, 0, 1)`
    ClampUnit,
    /// `[σ(x)]_s`
    Sigmoid,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaHeadParams {
    pub query: SparseAffine,
    pub key: SparseAffine,
    pub value: SparseAffine,
    pub gate: SparseAffine,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GdnHeadParams {
    pub query: SparseAffine,
    pub key: SparseAffine,
    pub value: SparseAffine,
    /// Pre-activation of the decay `α`; output dimension 1.
    pub alpha: SparseAffine,
    /// Pre-activation of the write strength `β`; output dimension 1.
    pub beta: SparseAffine,
    pub gate: SparseAffine,
    pub alpha_activation: Activation,
    pub beta_activation: Activation,
    /// Row-major `d_h × d_h` initial state numerators.
    pub initial_state: Vec<i64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LayerKind {
    #[serde(rename = "GA")]
    Ga,
    #[serde(rename = "GDN")]
    Gdn,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "heads")]
pub enum Mixer {
    #[serde(rename = "GA")]
    Ga(Vec<GaHeadParams>),
    #[serde(rename = "GDN")]
    Gdn(Vec<GdnHeadParams>),
}

/// One hidden layer ReLU network; the block output is added residually.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpParams {
    pub up: SparseAffine,
    pub down: SparseAffine,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub head_dim: usize,
    pub mixer: Mixer,
    pub out_proj: SparseAffine,
    pub mlp: Option<MlpParams>,
}

impl LayerSpec {
    pub fn kind(&self) -> LayerKind {
        match self.mixer {
            Mixer::Ga(_) => LayerKind::Ga,
            Mixer::Gdn(_) => LayerKind::Gdn,
        }
    }

    pub fn num_heads(&self) -> usize {
        match &self.mixer {
            Mixer::Ga(h) => h.len(),
            Mixer::Gdn(h) => h.len(),
        }
    }
}

/// `Emb(z, i) = [tok(z) + pos(i) + pair(z, i)]_s` with 0-based positions.
///
/// `pair` holds the few entries that depend jointly on token and position.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Embedding {
    pub token: Vec<SparseVec>,
    pub position: Vec<SparseVec>,
    pub pair: Vec<PairEmbedding>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairEmbedding {
    pub token: usize,
    pub position: usize,
    pub vector: SparseVec,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub symbols: Vec<String>,
    pub yes: usize,
    pub no: usize,
    pub scratch: Vec<usize>,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn id(&self, symbol: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == symbol)
    }

    pub fn name(&self, id: usize) -> &str {
        &self.symbols[id]
    }

    pub fn encode<S: AsRef<str>>(&self, symbols: &[S]) -> Result<Vec<usize>, NnError> {
        symbols
            .iter()
            .map(|s| {
                self.id(s.as_ref())
                    .ok_or_else(|| NnError::UnknownToken(s.as_ref().to_string()))
            })
            .collect()
    }

    pub fn is_scratch(&self, id: usize) -> bool {
        self.scratch.contains(&id)
    }
}

/// Complete architecture description. Immutable once validated.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoderSpec {
    pub format: String,
    pub version: u32,
    pub precision: Precision,
    pub d_model: usize,
    pub max_context: usize,
    pub vocab: Vocabulary,
    /// Argmax tie-breaking order over token ids; earlier wins.
    pub tie_order: Vec<usize>,
    pub embedding: Embedding,
    pub layers: Vec<LayerSpec>,
    pub output: SparseAffine,
    /// Free-form provenance (builder name, n, seed, ...).
    #[serde(default)]
    pub meta: std::collections::BTreeMap<String, String>,
    #[serde(skip)]
    pair_index: HashMap<(usize, usize), usize>,
}

impl DecoderSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        precision: Precision,
        d_model: usize,
        max_context: usize,
        vocab: Vocabulary,
        tie_order: Vec<usize>,
        embedding: Embedding,
        layers: Vec<LayerSpec>,
        output: SparseAffine,
    ) -> Result<Self, NnError> {
        let mut spec = Self {
            format: DECODER_FORMAT.to_string(),
            version: DECODER_FORMAT_VERSION,
            precision,
            d_model,
            max_context,
            vocab,
            tie_order,
            embedding,
            layers,
            output,
            meta: Default::default(),
            pair_index: HashMap::new(),
        };
        spec.finish()?;
        Ok(spec)
    }

    fn finish(&mut self) -> Result<(), NnError> {
        self.validate()?;
        self.pair_index = self
            .embedding
            .pair
            .iter()
            .enumerate()
            .map(|(i, e)| ((e.token, e.position), i))
            .collect();
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, NnError> {
        let mut spec: DecoderSpec =
            serde_json::from_str(text).map_err(|e| NnError::Json(e.to_string()))?;
        if spec.format != DECODER_FORMAT || spec.version != DECODER_FORMAT_VERSION {
            return Err(NnError::invalid(format!(
                "unsupported document {} v{}",
                spec.format, spec.version
            )));
        }
        spec.finish()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("decoder spec serializes")
    }

    pub fn is_hybrid(&self) -> bool {
        self.has_kind(LayerKind::Ga) && self.has_kind(LayerKind::Gdn)
    }

    pub fn is_pure_ga(&self) -> bool {
        self.layers.iter().all(|l| l.kind() == LayerKind::Ga)
    }

    pub fn is_pure_gdn(&self) -> bool {
        self.layers.iter().all(|l| l.kind() == LayerKind::Gdn)
    }

    fn has_kind(&self, kind: LayerKind) -> bool {
        self.layers.iter().any(|l| l.kind() == kind)
    }

    /// Copy of this spec with every layer of `kind` removed.
    pub fn without_layers(&self, kind: LayerKind) -> Result<Self, NnError> {
        let mut spec = self.clone();
        spec.layers.retain(|l| l.kind() != kind);
        spec.meta
            .insert("removed_layers".into(), format!("{kind:?}").to_uppercase());
        spec.finish()?;
        Ok(spec)
    }

    /// Number of recurrent-state scalars, `Σ_layers Σ_heads d_h²`.
    pub fn state_scalar_count(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| l.kind() == LayerKind::Gdn)
            .map(|l| l.num_heads() * l.head_dim * l.head_dim)
            .sum()
    }

    pub fn embed(&self, token: usize, position: usize) -> Result<FixedVector, NnError> {
        if token >= self.vocab.len() {
            return Err(NnError::UnknownToken(format!("#{token}")));
        }
        if position >= self.max_context {
            return Err(NnError::ContextOverflow {
                len: position + 1,
                max: self.max_context,
            });
        }
        let p = self.precision;
        let mut h = FixedVector::zeros(p, self.d_model);
        let mut add = |entries: &SparseVec| {
            for &(i, k) in entries {
                let v = h.get(i).add_s(coeff(p, k));
                h.set(i, v);
            }
        };
        add(&self.embedding.token[token]);
        if let Some(pos) = self.embedding.position.get(position) {
            add(pos);
        }
        if let Some(&i) = self.pair_index.get(&(token, position)) {
            add(&self.embedding.pair[i].vector);
        }
        Ok(h)
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let p = self.precision;
        let d = self.d_model;
        let nv = self.vocab.len();
        if d == 0 || nv == 0 || self.max_context == 0 {
            return Err(NnError::invalid("empty model dimension, vocabulary or context"));
        }
        if self.vocab.yes >= nv || self.vocab.no >= nv || self.vocab.yes == self.vocab.no {
            return Err(NnError::invalid("YES/NO must be distinct vocabulary entries"));
        }
        if self.vocab.scratch.iter().any(|&t| t >= nv || t == self.vocab.yes || t == self.vocab.no) {
            return Err(NnError::invalid("scratch symbols must be non-answer vocabulary entries"));
        }
        let mut seen = vec![false; nv];
        for &t in &self.tie_order {
            if t >= nv || std::mem::replace(&mut seen[t], true) {
                return Err(NnError::invalid("tie order must be a permutation of the vocabulary"));
            }
        }
        if self.tie_order.len() != nv {
            return Err(NnError::invalid("tie order must be a permutation of the vocabulary"));
        }
        let check_sparse = |v: &SparseVec, what: &str| -> Result<(), NnError> {
            for &(i, k) in v {
                if i >= d {
                    return Err(NnError::invalid(format!("{what}: index {i} ≥ d_model")));
                }
                p.scalar(k)?;
            }
            Ok(())
        };
        if self.embedding.token.len() != nv {
            return Err(NnError::invalid("token embedding must cover the vocabulary"));
        }
        if self.embedding.position.len() > self.max_context {
            return Err(NnError::invalid("position embedding longer than max_context"));
        }
        for v in &self.embedding.token {
            check_sparse(v, "token embedding")?;
        }
        for v in &self.embedding.position {
            check_sparse(v, "position embedding")?;
        }
        for e in &self.embedding.pair {
            if e.token >= nv || e.position >= self.max_context {
                return Err(NnError::invalid("pair embedding key out of range"));
            }
            check_sparse(&e.vector, "pair embedding")?;
        }
        for (li, layer) in self.layers.iter().enumerate() {
            let dh = layer.head_dim;
            let h = layer.num_heads();
            if h == 0 || dh == 0 || h * dh != d {
                return Err(NnError::invalid(format!(
                    "layer {li}: heads × head_dim = {h} × {dh} must equal d_model {d}"
                )));
            }
            match &layer.mixer {
                Mixer::Ga(heads) => {
                    for head in heads {
                        for (m, what) in [
                            (&head.query, "GA query"),
                            (&head.key, "GA key"),
                            (&head.value, "GA value"),
                            (&head.gate, "GA gate"),
                        ] {
                            m.check_shape(what, d, dh)?;
                            m.validate(p, what)?;
                        }
                    }
                }
                Mixer::Gdn(heads) => {
                    for head in heads {
                        for (m, what, out) in [
                            (&head.query, "GDN query", dh),
                            (&head.key, "GDN key", dh),
                            (&head.value, "GDN value", dh),
                            (&head.gate, "GDN gate", dh),
                            (&head.alpha, "GDN alpha", 1),
                            (&head.beta, "GDN beta", 1),
                        ] {
                            m.check_shape(what, d, out)?;
                            m.validate(p, what)?;
                        }
                        if head.initial_state.len() != dh * dh {
                            return Err(NnError::invalid(format!(
                                "layer {li}: initial state must have {} entries",
                                dh * dh
                            )));
                        }
                        for &k in &head.initial_state {
                            p.scalar(k)?;
                        }
                    }
                }
            }
            layer.out_proj.check_shape("output projection", d, d)?;
            layer.out_proj.validate(p, "output projection")?;
            if let Some(mlp) = &layer.mlp {
                let hidden = mlp.up.out_dim();
                mlp.up.check_shape("MLP up", d, hidden)?;
                mlp.down.check_shape("MLP down", hidden, d)?;
                mlp.up.validate(p, "MLP up")?;
                mlp.down.validate(p, "MLP down")?;
            }
        }
        self.output.check_shape("output map", d, nv)?;
        self.output.validate(p, "output map")?;
        Ok(())
    }
}
