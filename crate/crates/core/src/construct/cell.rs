use serde::Serialize;

use crate::fixed::{round_sqrt_quotient, Exact, FixedMatrix, FixedScalar, FixedVector, Precision};
use crate::nn::{gdn_head_update, Activation, GdnHeadParams, SparseAffine};

/// The three single-token updates of the parity cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum MacroKind {
    /// hold
    Z,
    /// first half of the toggle
    G,
    /// second half of the toggle
    F,
}

impl MacroKind {
    /// Updates applied by the two tokens of a doubled bit.
    pub fn for_bit(bit: bool) -> [MacroKind; 2] {
        if bit {
            [MacroKind::G, MacroKind::F]
        } else {
            [MacroKind::Z, MacroKind::Z]
        }
    }
}

/// `U_{α,β,k,v}(x) = α(x − β⟨x,k⟩k) + βvk` on a two-dimensional row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MacroUpdate {
    pub alpha: FixedScalar,
    pub beta: FixedScalar,
    pub key: FixedVector,
    pub value: FixedScalar,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ParityCellParams {
    pub precision: Precision,
    pub delta: FixedScalar,
    /// `[1/√2]_s`
    pub kappa: FixedScalar,
    pub p0: FixedVector,
    pub p1: FixedVector,
    pub h0: FixedVector,
    pub h1: FixedVector,
    pub z: MacroUpdate,
    pub g: MacroUpdate,
    pub f: MacroUpdate,
    pub query: FixedVector,
}

fn frac(p: Precision, num: i64, den: i64) -> FixedScalar {
    // only called with dyadic constants that lie on every grid s ≥ 2
    p.scalar(num * p.one_raw() / den).expect("grid constant")
}

impl ParityCellParams {
    pub fn new(p: Precision) -> Self {
        let d = p.delta().raw();
        let kappa = round_sqrt_quotient(p, Exact::from_int(1), Exact::from_int(2), 1)
            .expect("positive radicand");
        let k = kappa.raw();
        let vec = |a: i64, b: i64| FixedVector::from_raw(p, vec![a, b]).expect("cell constant");
        Self {
            precision: p,
            delta: p.delta(),
            kappa,
            p0: vec(0, d),
            p1: vec(d, 0),
            h0: vec(2 * d, 3 * d),
            h1: vec(3 * d, 2 * d),
            z: MacroUpdate {
                alpha: frac(p, 3, 4),
                beta: frac(p, 1, 4),
                key: vec(p.one_raw(), 0),
                value: p.zero(),
            },
            g: MacroUpdate {
                alpha: frac(p, 3, 4),
                beta: frac(p, 1, 2),
                key: vec(k, k),
                value: p.scalar(6 * d).expect("6δ on grid"),
            },
            f: MacroUpdate {
                alpha: frac(p, 1, 4),
                beta: frac(p, 3, 4),
                key: vec(-k, k),
                value: p.zero(),
            },
            query: vec(p.one_raw(), 0),
        }
    }

    pub fn update(&self, kind: MacroKind) -> &MacroUpdate {
        match kind {
            MacroKind::Z => &self.z,
            MacroKind::G => &self.g,
            MacroKind::F => &self.f,
        }
    }

    pub fn state(&self, parity: bool) -> &FixedVector {
        if parity {
            &self.p1
        } else {
            &self.p0
        }
    }

    /// Cell state after the doubled encoding of `bits`, starting from `P₀`.
    pub fn run(&self, bits: &[bool]) -> FixedVector {
        bits.iter()
            .flat_map(|&b| MacroKind::for_bit(b))
            .fold(self.p0.clone(), |x, kind| self.apply(&x, kind))
    }

    pub fn apply(&self, x: &FixedVector, kind: MacroKind) -> FixedVector {
        let u = self.update(kind);
        let p = self.precision;
        // a 2×2 state whose second row is zero and receives no value
        let mut state = FixedMatrix::zeros(p, 2, 2);
        state.set(0, 0, x.get(0));
        state.set(0, 1, x.get(1));
        let value = FixedVector::from_scalars(p, &[u.value, p.zero()]);
        gdn_head_update(&mut state, u.alpha, u.beta, &u.key, &value).expect("2-dimensional cell");
        state.row(0)
    }
}

/// Applies one macro to a cell state using the DeltaNet row update.
pub fn apply_macro_update(x: &FixedVector, kind: MacroKind, p: Precision) -> FixedVector {
    ParityCellParams::new(p).apply(x, kind)
}

/// One row of the rounding table behind the cell's exactness.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RoundingIdentity {
    pub name: &'static str,
    /// exact computed value
    pub value: String,
    /// exact expected value
    pub expected: String,
    pub holds: bool,
}

/// `[κδ] = δ`, `[2κδ] = δ`, `[3κδ] = 2δ`, `[δ/2] = 0`, `[3δ/4] = δ` and `1/2 < κ ≤ 3/4`.
pub fn rounding_identities(p: Precision) -> Vec<RoundingIdentity> {
    let c = ParityCellParams::new(p);
    let (delta, kappa) = (c.delta, c.kappa);
    let one = p.one_raw();
    let multiple = |k: i64| p.scalar(k * kappa.raw()).expect("3κ ≤ 9/4 is on every grid");
    let row = |name, got: FixedScalar, want: FixedScalar| RoundingIdentity {
        name,
        value: got.to_fraction_string(),
        expected: want.to_fraction_string(),
        holds: got == want,
    };
    let twice = p.scalar(2).expect("2δ on grid");
    let bracket = 2 * kappa.raw() > one && 4 * kappa.raw() <= 3 * one;
    vec![
        row("[κδ]=δ", kappa.mul_s(delta), delta),
        row("[2κδ]=δ", multiple(2).mul_s(delta), delta),
        row("[3κδ]=2δ", multiple(3).mul_s(delta), twice),
        row("[(1/2)δ]=0", p.scalar(one / 2).expect("1/2").mul_s(delta), p.zero()),
        row("[(3/4)δ]=δ", p.scalar(3 * one / 4).expect("3/4").mul_s(delta), delta),
        RoundingIdentity {
            name: "1/2<κ≤3/4",
            value: kappa.to_fraction_string(),
            expected: "(1/2, 3/4]".into(),
            holds: bracket,
        },
    ]
}

/// Residual coordinates the parity head reads.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CellPorts {
    pub d_model: usize,
    /// 1 on the first token of a 1-bit
    pub gsel: usize,
    /// 1 on the second token of a 1-bit
    pub fsel: usize,
}

/// Two-dimensional GDN head realizing the cell.
///
/// Pre-activations, as functions of the selectors:
/// `α = 3/4 − fsel/2`, `β = 1/4 + gsel/4 + fsel/2`,
/// `k = (1 − 2 fsel, gsel + fsel)` (ℓ2-normalized to `(1,0)`, `(κ,κ)`, `(−κ,κ)`),
/// `v = (6δ gsel, 0)` and `q = (1, 0)`. The state starts with first row `P₀`.
pub fn build_parity_cell(p: Precision, ports: CellPorts) -> GdnHeadParams {
    let one = p.one_raw();
    let d = ports.d_model;
    let mut query = SparseAffine::zero(d, 2);
    query.set_bias(0, one);
    let mut key = SparseAffine::zero(d, 2);
    key.set_bias(0, one);
    key.set_weight(0, ports.fsel, -2 * one);
    key.set_weight(1, ports.gsel, one);
    key.set_weight(1, ports.fsel, one);
    let mut value = SparseAffine::zero(d, 2);
    value.set_weight(0, ports.gsel, 6 * p.delta().raw());
    let mut alpha = SparseAffine::zero(d, 1);
    alpha.set_bias(0, 3 * one / 4);
    alpha.set_weight(0, ports.fsel, -one / 2);
    let mut beta = SparseAffine::zero(d, 1);
    beta.set_bias(0, one / 4);
    beta.set_weight(0, ports.gsel, one / 4);
    beta.set_weight(0, ports.fsel, one / 2);
    GdnHeadParams {
        query,
        key,
        value,
        alpha,
        beta,
        gate: saturated_gate(p, d, 2),
        alpha_activation: Activation::ClampUnit,
        beta_activation: Activation::ClampUnit,
        initial_state: vec![0, p.delta().raw(), 0, 0],
    }
}

/// Gate map with constant pre-activation `B_s`, so `[σ(B_s)]_s = 1`.
pub(crate) fn saturated_gate(p: Precision, d_model: usize, width: usize) -> SparseAffine {
    let mut gate = SparseAffine::zero(d_model, width);
    for r in 0..width {
        gate.set_bias(r, p.max_raw());
    }
    gate
}

/// Head that never writes: zero maps, zero state.
pub(crate) fn inert_gdn_head(d_model: usize, head_dim: usize) -> GdnHeadParams {
    GdnHeadParams {
        query: SparseAffine::zero(d_model, head_dim),
        key: SparseAffine::zero(d_model, head_dim),
        value: SparseAffine::zero(d_model, head_dim),
        alpha: SparseAffine::zero(d_model, 1),
        beta: SparseAffine::zero(d_model, 1),
        gate: SparseAffine::zero(d_model, head_dim),
        alpha_activation: Activation::ClampUnit,
        beta_activation: Activation::ClampUnit,
        initial_state: vec![0; head_dim * head_dim],
    }
}
