mod common;

use common::p;
use hybridsim::construct::{build_parity_only_decoder, TOKEN_ONE, TOKEN_ZERO};
use hybridsim::fixed::{FixedMatrix, FixedVector, Precision};
use hybridsim::nn::*;
use proptest::prelude::*;

const D: usize = 4;
const SYMBOLS: [&str; 5] = ["YES", "NO", "#", "a", "b"];

fn vocab() -> Vocabulary {
    Vocabulary {
        symbols: SYMBOLS.iter().map(|s| s.to_string()).collect(),
        yes: 0,
        no: 1,
        scratch: vec![2],
    }
}

fn affine(prec: Precision, out: usize, raws: &[i64]) -> SparseAffine {
    let mut m = SparseAffine::zero(D, out);
    let mut it = raws.iter().cycle();
    for r in 0..out {
        for c in 0..D {
            m.set_weight(r, c, *it.next().unwrap() % (prec.max_raw() + 1));
        }
        m.set_bias(r, *it.next().unwrap() % (prec.max_raw() + 1));
    }
    m
}

#[derive(Clone, Debug)]
struct SpecSeed {
    s: u32,
    kinds: Vec<bool>,
    raws: Vec<i64>,
    sigmoid: bool,
}

fn spec_seed(pure_gdn: bool) -> impl Strategy<Value = SpecSeed> {
    (
        2u32..=3,
        proptest::collection::vec(any::<bool>(), 1..=3),
        proptest::collection::vec(-12i64..=12, 64),
        any::<bool>(),
    )
        .prop_map(move |(s, kinds, raws, sigmoid)| SpecSeed {
            s,
            kinds: if pure_gdn { vec![true; kinds.len()] } else { kinds },
            raws,
            sigmoid,
        })
}

/// Random dense spec over `d_model = 4` with heads of width 2.
fn build(seed: &SpecSeed) -> DecoderSpec {
    let prec = p(seed.s);
    let r = |offset: usize| -> Vec<i64> {
        seed.raws.iter().cycle().skip(offset).take(seed.raws.len()).copied().collect()
    };
    let act = if seed.sigmoid { Activation::Sigmoid } else { Activation::ClampUnit };
    let layers = seed
        .kinds
        .iter()
        .enumerate()
        .map(|(li, &gdn)| {
            let o = 7 * li;
            let mixer = if gdn {
                Mixer::Gdn(
                    (0..2)
                        .map(|h| GdnHeadParams {
                            query: affine(prec, 2, &r(o + h)),
                            key: affine(prec, 2, &r(o + h + 1)),
                            value: affine(prec, 2, &r(o + h + 2)),
                            alpha: affine(prec, 1, &r(o + h + 3)),
                            beta: affine(prec, 1, &r(o + h + 4)),
                            gate: affine(prec, 2, &r(o + h + 5)),
                            alpha_activation: act,
                            beta_activation: Activation::ClampUnit,
                            initial_state: r(o + h + 6).iter().take(4).map(|k| k % 5).collect(),
                        })
                        .collect(),
                )
            } else {
                Mixer::Ga(
                    (0..2)
                        .map(|h| GaHeadParams {
                            query: affine(prec, 2, &r(o + h)),
                            key: affine(prec, 2, &r(o + h + 1)),
                            value: affine(prec, 2, &r(o + h + 2)),
                            gate: affine(prec, 2, &r(o + h + 3)),
                        })
                        .collect(),
                )
            };
            LayerSpec {
                head_dim: 2,
                mixer,
                out_proj: affine(prec, D, &r(o + 4)),
                mlp: Some(MlpParams {
                    up: affine(prec, D, &r(o + 5)),
                    down: affine(prec, D, &r(o + 6)),
                }),
            }
        })
        .collect();
    let embedding = Embedding {
        token: (0..SYMBOLS.len())
            .map(|t| (0..D).map(|i| (i, seed.raws[(t * D + i) % 64] % 9)).filter(|e| e.1 != 0).collect())
            .collect(),
        position: (0..12)
            .map(|i| vec![(i % D, seed.raws[(40 + i) % 64] % 5)].into_iter().filter(|e| e.1 != 0).collect())
            .collect(),
        pair: Vec::new(),
    };
    let mut output = SparseAffine::zero(D, SYMBOLS.len());
    for t in 0..SYMBOLS.len() {
        for c in 0..D {
            output.set_weight(t, c, seed.raws[(t * 3 + c * 5) % 64] % 7);
        }
    }
    DecoderSpec::new(prec, D, 12, vocab(), (0..SYMBOLS.len()).collect(), embedding, layers, output).unwrap()
}

fn tokens() -> impl Strategy<Value = Vec<usize>> {
    proptest::collection::vec(0usize..SYMBOLS.len(), 1..=8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn causal_prefix_outputs_unchanged(seed in spec_seed(false), toks in tokens()) {
        let spec = build(&seed);
        let full = forward_trace(&spec, &toks).unwrap();
        for k in 1..toks.len() {
            let prefix = forward_trace(&spec, &toks[..k]).unwrap();
            prop_assert_eq!(&prefix.hiddens[..], &full.hiddens[..k]);
        }
    }

    #[test]
    fn hiddens_stay_on_grid(seed in spec_seed(false), toks in tokens()) {
        let spec = build(&seed);
        let trace = forward_trace(&spec, &toks).unwrap();
        let max = spec.precision.max_raw();
        for h in &trace.hiddens {
            prop_assert!(h.raw().iter().all(|k| k.abs() <= max));
        }
        prop_assert!(trace.state.fingerprint().iter().all(|k| k.abs() <= max));
    }

    #[test]
    fn pure_gdn_state_is_sufficient(seed in spec_seed(true), prefix in tokens(), suffix in tokens()) {
        let spec = build(&seed);
        prop_assume!(prefix.len() + suffix.len() <= spec.max_context);
        let state = scan_prefix(&spec, &prefix).unwrap();
        let mut joined = prefix.clone();
        joined.extend(&suffix);
        prop_assert_eq!(
            forward_from_state(&spec, &state, prefix.len(), &suffix).unwrap(),
            decoder_forward(&spec, &joined).unwrap()
        );
    }

    #[test]
    fn zero_state_zero_value_is_fixed(seed in spec_seed(true), toks in tokens()) {
        let mut spec = build(&seed);
        for layer in &mut spec.layers {
            if let Mixer::Gdn(heads) = &mut layer.mixer {
                for h in heads {
                    h.value = SparseAffine::zero(D, 2);
                    h.initial_state = vec![0; 4];
                }
            }
        }
        let trace = forward_trace(&spec, &toks).unwrap();
        prop_assert!(trace.state.fingerprint().iter().all(|&k| k == 0));
    }

    #[test]
    fn single_token_attends_to_itself(seed in spec_seed(false), tok in 0usize..SYMBOLS.len()) {
        let spec = build(&seed);
        let trace = forward_trace(&spec, &[tok]).unwrap();
        for (_, heads) in &trace.attention {
            for w in heads {
                prop_assert!(w.raw() == [spec.precision.one_raw()] || w.raw() == [0]);
            }
        }
    }

    #[test]
    fn spec_json_round_trips(seed in spec_seed(false)) {
        let spec = build(&seed);
        let back = DecoderSpec::from_json(&spec.to_json()).unwrap();
        prop_assert_eq!(back.to_json(), spec.to_json());
        prop_assert_eq!(back, spec);
    }
}

#[test]
fn identical_states_give_identical_futures() {
    // tables 110 and 000 both leave the parity cell in P₀
    let spec = build_parity_only_decoder(3, p(2)).unwrap();
    let a = [TOKEN_ONE, TOKEN_ONE, TOKEN_ONE, TOKEN_ONE, TOKEN_ZERO, TOKEN_ZERO];
    let b = [TOKEN_ZERO; 6];
    let sa = scan_prefix(&spec, &a).unwrap();
    assert_eq!(sa, scan_prefix(&spec, &b).unwrap());
    for suffix in [vec![5, 6, 6], vec![6, 5, 6], vec![6, 6, 5]] {
        let mut ja = a.to_vec();
        ja.extend(&suffix);
        let mut jb = b.to_vec();
        jb.extend(&suffix);
        assert_eq!(decoder_forward(&spec, &ja).unwrap(), decoder_forward(&spec, &jb).unwrap());
    }
}

#[test]
fn gdn_step_follows_update_rule() {
    // a one-head layer with constant α = 1/2, β = 1, k = (1, 0), v = (1, 0)
    let prec = p(3);
    let one = prec.one_raw();
    let mut key = SparseAffine::zero(D, 2);
    key.set_bias(0, one);
    let mut value = SparseAffine::zero(D, 2);
    value.set_bias(0, one);
    let mut alpha = SparseAffine::zero(D, 1);
    alpha.set_bias(0, one / 2);
    let mut beta = SparseAffine::zero(D, 1);
    beta.set_bias(0, one);
    let head = GdnHeadParams {
        query: key.clone(),
        key,
        value,
        alpha,
        beta,
        gate: SparseAffine::zero(D, 2),
        alpha_activation: Activation::ClampUnit,
        beta_activation: Activation::ClampUnit,
        initial_state: vec![0; 4],
    };
    let inert = GdnHeadParams {
        initial_state: vec![0; 4],
        ..head.clone()
    };
    let layer = LayerSpec {
        head_dim: 2,
        mixer: Mixer::Gdn(vec![head, inert]),
        out_proj: SparseAffine::zero(D, D),
        mlp: None,
    };
    let mut states = vec![FixedMatrix::zeros(prec, 2, 2), FixedMatrix::zeros(prec, 2, 2)];
    let h = FixedVector::zeros(prec, D);
    // S₁ = 1/2 (0 − 0) + 1·(1,0)ᵀ(1,0) → S₁[0,0] = 1
    gdn_layer_step(&layer, &mut states, &h).unwrap();
    assert_eq!(states[0].raw(), &[one, 0, 0, 0]);
    // S₂[0,0] = 1/2 (1 − 1·1·1) + 1 = 1
    gdn_layer_step(&layer, &mut states, &h).unwrap();
    assert_eq!(states[0].raw(), &[one, 0, 0, 0]);
    let wrong = LayerSpec {
        mixer: Mixer::Ga(Vec::new()),
        ..layer.clone()
    };
    assert!(matches!(
        gdn_layer_step(&wrong, &mut states, &h),
        Err(NnError::WrongLayerKind { .. })
    ));
}

/// Spec whose logits are the constant biases given per token.
fn constant_spec(biases: [i64; 5]) -> DecoderSpec {
    let prec = p(2);
    let mut output = SparseAffine::zero(D, SYMBOLS.len());
    for (t, b) in biases.iter().enumerate() {
        output.set_bias(t, *b);
    }
    let embedding = Embedding {
        token: vec![Vec::new(); SYMBOLS.len()],
        position: Vec::new(),
        pair: Vec::new(),
    };
    DecoderSpec::new(prec, D, 6, vocab(), (0..SYMBOLS.len()).collect(), embedding, Vec::new(), output).unwrap()
}

#[test]
fn greedy_decode_budget_semantics() {
    let scratchy = constant_spec([0, 0, 4, 0, 0]);
    let t = greedy_decode(&scratchy, &[3], 0).unwrap();
    assert_eq!(t.outcome, DecodeOutcome::BudgetExceeded);
    assert_eq!(t.scratch_count(), 0);
    let t = greedy_decode(&scratchy, &[3], 2).unwrap();
    assert_eq!(t.outcome, DecodeOutcome::BudgetExceeded);
    assert_eq!((t.scratch_count(), t.step_count()), (2, 3));
    assert!(matches!(greedy_decode(&scratchy, &[3], 10), Err(NnError::ContextOverflow { .. })));

    let rogue = constant_spec([0, 0, 0, 4, 0]);
    assert!(matches!(
        greedy_decode(&rogue, &[3], 3),
        Err(NnError::NonScratchNonAnswerEmission(_))
    ));
}

#[test]
fn greedy_decode_ties_follow_declaration_order() {
    let tied = constant_spec([4, 4, 4, 0, 0]);
    let t = greedy_decode(&tied, &[4], 0).unwrap();
    assert_eq!(t.answer(), Some(Answer::Yes));
    let no_first = constant_spec([0, 4, 4, 0, 0]);
    assert_eq!(greedy_decode(&no_first, &[4], 0).unwrap().answer(), Some(Answer::No));
}

#[test]
fn transcript_replay_and_json() {
    let spec = build_parity_only_decoder(2, p(2)).unwrap();
    let prompt = [TOKEN_ONE, TOKEN_ONE, TOKEN_ZERO, TOKEN_ZERO, 5, 6];
    let a = greedy_decode(&spec, &prompt, 0).unwrap();
    let b = greedy_decode(&spec, &prompt, 0).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_json(), b.to_json());
    let json: serde_json::Value = serde_json::from_str(&a.to_json()).unwrap();
    assert_eq!(json["prompt"][0], "1");
    assert_eq!(json["outcome"]["answer"], "YES");
    assert_eq!(json["steps"].as_array().unwrap().len(), 1);
}

#[test]
fn forward_errors() {
    let spec = constant_spec([0; 5]);
    assert!(matches!(decoder_forward(&spec, &[]), Err(NnError::EmptyPrompt)));
    assert!(matches!(decoder_forward(&spec, &[0; 7]), Err(NnError::ContextOverflow { len: 7, max: 6 })));
    assert!(matches!(decoder_forward(&spec, &[9]), Err(NnError::UnknownToken(_))));
}

#[test]
fn invalid_specs_rejected() {
    let spec = build_parity_only_decoder(2, p(2)).unwrap();
    let mut bad = spec.clone();
    bad.layers[0].head_dim = 4;
    assert!(bad.validate().is_err());
    let mut json: serde_json::Value = serde_json::from_str(&spec.to_json()).unwrap();
    json["version"] = 99.into();
    assert!(DecoderSpec::from_json(&json.to_string()).is_err());
    let mut json: serde_json::Value = serde_json::from_str(&spec.to_json()).unwrap();
    json["precision"] = 1.into();
    assert!(DecoderSpec::from_json(&json.to_string()).is_err());
}
