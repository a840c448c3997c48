mod common;

use common::p;
use hybridsim::analysis::*;
use hybridsim::construct::*;
use hybridsim::nn::{scan_prefix, DecoderSpec, LayerKind};
use hybridsim::pcr::{encode_table, response_vector, PcrInstance};

fn table_tokens(inst: &PcrInstance) -> Vec<usize> {
    encode_table(inst.table()).into_iter().map(token_id).collect()
}

#[test]
fn hybrid_n4_passes_exhaustively() {
    let spec = build_hybrid_decoder(4, p(2), 3).unwrap();
    let r = exhaustive_verify(&spec, 4, 0).unwrap();
    assert_eq!((r.total, r.passed, r.max_scratch), (64, 64, 0));
    assert!(r.pass());
    assert!(r.failures.is_empty());
}

#[test]
fn hybrid_n1_passes() {
    let spec = build_hybrid_decoder(1, p(2), 0).unwrap();
    let r = exhaustive_verify(&spec, 1, 0).unwrap();
    assert_eq!((r.total, r.passed), (2, 2));
}

#[test]
fn hybrid_small_grid_all_precisions() {
    for s in 2..=4 {
        for n in 1..=5 {
            let spec = build_hybrid_decoder(n, p(s), 7).unwrap();
            let r = exhaustive_verify(&spec, n, 0).unwrap();
            assert!(r.pass() && r.max_scratch == 0, "n={n} s={s}: {:?}", r.failures.first());
        }
    }
}

#[test]
fn corrupted_output_projection_fails() {
    let spec = build_hybrid_decoder(4, p(2), 3).unwrap();
    let mut bad: DecoderSpec = spec.clone();
    let bit = {
        let layout: serde_json::Value = serde_json::from_str(&spec.meta["layout"]).unwrap();
        layout["bit"].as_u64().unwrap() as usize
    };
    let w = bad.layers[2].out_proj.weight(bit, 0);
    assert_ne!(w, 0);
    bad.layers[2].out_proj.set_weight(bit, 0, -w);
    let r = exhaustive_verify(&bad, 4, 0).unwrap();
    assert!(!r.pass());
    assert!(!r.failures.is_empty());
    assert_eq!(r.passed + r.failures.len(), r.total);
}

#[test]
fn verify_rejects_short_context() {
    let spec = build_hybrid_decoder(2, p(2), 0).unwrap();
    assert!(matches!(
        exhaustive_verify(&spec, 2, 5),
        Err(AnalysisError::ContextTooShort { needed: 11, max: 10 })
    ));
}

#[test]
fn parity_only_census_n3() {
    let spec = build_parity_only_decoder(3, p(2)).unwrap();
    let c = state_census(&spec, 3).unwrap();
    assert_eq!(c.tables, 8);
    assert_eq!(c.distinct_states, 2);
    assert_eq!(c.required_states, 4);
    assert!(c.count_bound_violated);
    assert_eq!(c.witnesses.len(), 2);
    for w in &c.witnesses {
        // the witness pair shares a state yet disagrees on the queried response bit
        assert_eq!(w.first.query(), w.second.query());
        let j = w.first.query() - 1;
        assert_ne!(response_vector(w.first.table())[j], response_vector(w.second.table())[j]);
        assert_eq!(
            scan_prefix(&spec, &table_tokens(&w.first)).unwrap(),
            scan_prefix(&spec, &table_tokens(&w.second)).unwrap()
        );
        let check = confirm_witness(&spec, w, 0).unwrap();
        assert!(check.confirmed());
        assert_eq!(check.first_answer, check.second_answer);
        assert_ne!(check.first_truth, check.second_truth);
    }
}

#[test]
fn census_n1_never_violates() {
    let spec = build_parity_only_decoder(1, p(2)).unwrap();
    let c = state_census(&spec, 1).unwrap();
    assert_eq!(c.required_states, 1);
    assert!(!c.count_bound_violated);
    assert!(c.grid_bound_holds && c.realized_bound_holds);
}

#[test]
fn hybrid_gdn_layer_has_two_states() {
    for n in 1..=12 {
        let gdn = build_hybrid_decoder(n, p(2), 0).unwrap().without_layers(LayerKind::Ga).unwrap();
        let c = state_census(&gdn, n).unwrap();
        assert_eq!(c.distinct_states, 2.min(1 << n), "n={n}");
    }
}

#[test]
fn census_errors() {
    let hybrid = build_hybrid_decoder(2, p(2), 0).unwrap();
    assert!(matches!(state_census(&hybrid, 2), Err(AnalysisError::NotPureGdn)));
    let spec = build_parity_only_decoder(2, p(2)).unwrap();
    assert!(matches!(state_census(&spec, 0), Err(AnalysisError::TableSize(0))));
    assert!(matches!(state_census(&spec, MAX_CENSUS_N + 1), Err(AnalysisError::TableSize(_))));
}

#[test]
fn ga_probe_without_gdn_fails() {
    let ga = build_hybrid_decoder(9, p(2), 0).unwrap().without_layers(LayerKind::Gdn).unwrap();
    let r = ga_parity_probe(&ga, 8, 0).unwrap();
    assert_eq!(r.total, 256);
    assert!(r.passed < r.total);
    let hybrid = build_hybrid_decoder(9, p(2), 0).unwrap();
    assert!(matches!(ga_parity_probe(&hybrid, 8, 0), Err(AnalysisError::NotPureGa)));
}

#[test]
fn ga_probe_r0_is_constant_no() {
    // with the GDN layer removed the parity bit reads 0, which is right when r = 0
    let ga = build_hybrid_decoder(1, p(2), 0).unwrap().without_layers(LayerKind::Gdn).unwrap();
    let r = ga_parity_probe(&ga, 0, 0).unwrap();
    assert_eq!((r.total, r.passed), (1, 1));
}

#[test]
fn attention_is_exactly_one_hot() {
    for n in 1..=5 {
        let spec = build_hybrid_decoder(n, p(2), 2).unwrap();
        let audit = attention_audit(&spec, n).unwrap();
        assert_eq!(audit.checked, n << n);
        assert!(audit.violations.is_empty(), "n={n}: {:?}", audit.violations);
    }
    let spec = build_hybrid_decoder(3, p(2), 2).unwrap();
    let inst: PcrInstance = "Y=101;j=2".parse().unwrap();
    // MARK sits at 2n + j − 1; block j starts at 2(j − 1)
    assert_eq!(attention_selection(&spec, &inst).unwrap(), vec![Some(7), Some(2)]);
}

#[test]
fn scaling_fit_bounds_points() {
    let r = dimension_scaling(&[4, 16, 64], p(2), 0).unwrap();
    assert!(r.bound_holds);
    let ds: Vec<usize> = r.points.iter().map(|pt| pt.d_model).collect();
    assert_eq!(ds, [432, 720, 1008]);
    // exactly linear in log₂ n: slope 144 per doubling
    assert!((r.b - 144.0).abs() < 1e-9 && r.max_residual.abs() < 1e-9);
    assert!(dimension_scaling(&[4], p(2), 0).is_err());
}

#[test]
fn reports_serialize() {
    let spec = build_hybrid_decoder(2, p(2), 0).unwrap();
    let v = serde_json::to_value(exhaustive_verify(&spec, 2, 0).unwrap()).unwrap();
    assert_eq!(v["total"], 8);
    assert!(v.get("wall_time").is_none());
    let c = state_census(&build_parity_only_decoder(3, p(2)).unwrap(), 3).unwrap();
    let v = serde_json::to_value(&c).unwrap();
    assert!(v["witnesses"][0]["first"].as_str().unwrap().starts_with("Y="));
}
