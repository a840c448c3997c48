use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use hybridsim::analysis::{
    confirm_witness, exhaustive_verify, ga_parity_probe, state_census, VerificationReport, WitnessCheck,
};
use hybridsim::codes::{build_code, compute_m0, min_distance_for};
use hybridsim::construct::{build_hybrid_decoder, build_parity_only_decoder, rounding_identities};
use hybridsim::fixed::Precision;
use hybridsim::nn::{DecoderSpec, LayerKind};
use serde_json::{json, Value};

use crate::output::{destination, emit, Artifact, Table, VERSION};
use crate::{Format, OutputArgs, Status};

fn prec(s: u32) -> Precision {
    Precision::new(s).expect("validated by the argument parser")
}

fn write(artifact: &Artifact, out: &OutputArgs) -> Result<()> {
    let ext = match out.format {
        Format::Json => "json",
        Format::Csv => "csv",
    };
    let text = artifact.render(out.format)?;
    emit(&text, destination(out.out.as_deref(), out.out_dir.as_deref(), &artifact.stem, ext).as_deref())
}

fn to_cell(v: Value) -> String {
    match v {
        Value::String(s) => s,
        other => other.to_string(),
    }
}

fn load_decoder(path: &Path) -> Result<DecoderSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    DecoderSpec::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn verification_rows(reports: &[VerificationReport]) -> Table {
    let mut rows = Vec::new();
    for r in reports {
        let base = [r.n.to_string(), r.budget.to_string(), r.total.to_string(), r.passed.to_string(), r.max_scratch.to_string()];
        if r.failures.is_empty() {
            rows.push(base.iter().cloned().chain(["".into(), "".into(), "".into(), "".into()]).collect());
        }
        for f in &r.failures {
            let cells = [
                f.instance.to_string(),
                f.expected.as_str().to_string(),
                to_cell(serde_json::to_value(&f.got).unwrap_or(Value::Null)),
                f.scratch.to_string(),
            ];
            rows.push(base.iter().cloned().chain(cells).collect());
        }
    }
    Table {
        header: vec!["n", "budget", "total", "passed", "max_scratch", "failed_instance", "expected", "got", "scratch"],
        rows,
    }
}

pub fn verify_hybrid(ns: &[usize], s: u32, seed: u64, budget: usize, out: &OutputArgs) -> Result<Status> {
    let mut reports = Vec::with_capacity(ns.len());
    for &n in ns {
        let spec = build_hybrid_decoder(n, prec(s), seed)?;
        let r = exhaustive_verify(&spec, n, budget)?;
        eprintln!(
            "n={n} s={s}: {}/{} correct, max scratch {}, {:.2}s",
            r.passed,
            r.total,
            r.max_scratch,
            r.wall_time.as_secs_f64()
        );
        reports.push(r);
    }
    let all_pass = reports.iter().all(|r| r.pass());
    let (lo, hi) = (ns.iter().min().copied().unwrap_or(0), ns.iter().max().copied().unwrap_or(0));
    let artifact = Artifact {
        command: "verify-hybrid",
        stem: format!("verify-hybrid-n{lo}-{hi}-s{s}-seed{seed}"),
        s,
        n: json!(ns),
        seed: Some(seed),
        report: json!({ "budget": budget, "pass": all_pass, "runs": reports }),
        table: Some(verification_rows(&reports)),
    };
    write(&artifact, out)?;
    Ok(if all_pass { Status::Pass } else { Status::Findings })
}

pub fn census(decoder: &Path, n: usize, budget: usize, out: &OutputArgs) -> Result<Status> {
    let spec = load_decoder(decoder)?;
    let report = state_census(&spec, n)?;
    let checks: Vec<WitnessCheck> = report
        .witnesses
        .iter()
        .map(|w| confirm_witness(&spec, w, budget))
        .collect::<Result<_, _>>()?;
    let confirmed = checks.iter().filter(|c| c.confirmed()).count();
    eprintln!(
        "n={n}: {} distinct states, {} required, {} witnesses ({confirmed} confirmed)",
        report.distinct_states,
        report.required_states,
        checks.len()
    );
    let answer = |a: Option<hybridsim::nn::Answer>| a.map_or("none", |a| a.as_str()).to_string();
    let rows = checks
        .iter()
        .map(|c| {
            vec![
                n.to_string(),
                report.distinct_states.to_string(),
                report.required_states.to_string(),
                c.witness.first.to_string(),
                c.witness.second.to_string(),
                answer(c.first_answer),
                answer(c.second_answer),
                c.first_truth.as_str().to_string(),
                c.second_truth.as_str().to_string(),
                c.confirmed().to_string(),
            ]
        })
        .collect();
    let seed = spec.meta.get("seed").and_then(|v| v.parse().ok());
    let found = !checks.is_empty();
    let artifact = Artifact {
        command: "census",
        stem: format!("census-n{n}-s{}", spec.precision.bits()),
        s: spec.precision.bits(),
        n: json!(n),
        seed,
        report: json!({
            "decoder": spec.meta,
            "census": report,
            "witness_checks": checks,
            "confirmed_witnesses": confirmed,
        }),
        table: Some(Table {
            header: vec![
                "n",
                "distinct_states",
                "required_states",
                "first",
                "second",
                "first_answer",
                "second_answer",
                "first_truth",
                "second_truth",
                "confirmed",
            ],
            rows,
        }),
    };
    write(&artifact, out)?;
    Ok(if found { Status::Findings } else { Status::Pass })
}

pub fn round_table(s: u32, out: &OutputArgs) -> Result<Status> {
    let rows = rounding_identities(prec(s));
    let holds = rows.iter().all(|r| r.holds);
    for r in &rows {
        eprintln!("{:<12} {:>8}  expected {:<10} {}", r.name, r.value, r.expected, if r.holds { "ok" } else { "VIOLATED" });
    }
    let table = Table {
        header: vec!["identity", "value", "expected", "holds"],
        rows: rows
            .iter()
            .map(|r| vec![r.name.to_string(), r.value.clone(), r.expected.clone(), r.holds.to_string()])
            .collect(),
    };
    let artifact = Artifact {
        command: "round-table",
        stem: format!("round-table-s{s}"),
        s,
        n: Value::Null,
        seed: None,
        report: json!({ "identities": rows, "all_hold": holds }),
        table: Some(table),
    };
    write(&artifact, out)?;
    Ok(if holds { Status::Pass } else { Status::Findings })
}

pub fn code_search(s: u32, n: usize, seed: u64, table: Option<&Path>, out: &OutputArgs) -> Result<Status> {
    let p = prec(s);
    let m0 = compute_m0(p)?;
    let code = build_code(n, p, seed)?;
    let name = format!("code-n{n}-s{s}-seed{seed}.txt");
    let path: PathBuf = match (table, out.out_dir.as_deref()) {
        (Some(t), _) => t.to_path_buf(),
        (None, Some(dir)) => dir.join(&name),
        (None, None) => PathBuf::from(&name),
    };
    emit(&code.to_text(), Some(&path))?;
    let required = min_distance_for(code.m);
    let min = code.min_distance();
    let separated = code.is_separated();
    eprintln!("m0={m0} m={} min distance {min} (required {required})", code.m);
    let artifact = Artifact {
        command: "code-search",
        stem: format!("code-search-n{n}-s{s}-seed{seed}"),
        s,
        n: json!(n),
        seed: Some(seed),
        report: json!({
            "m0": m0,
            "m": code.m,
            "words": code.symbols().len(),
            "min_distance": min,
            "required_distance": required,
            "separated": separated,
            "table_file": path.display().to_string(),
        }),
        table: Some(Table {
            header: vec!["n", "m0", "m", "words", "min_distance", "required_distance", "separated"],
            rows: vec![vec![
                n.to_string(),
                m0.to_string(),
                code.m.to_string(),
                code.symbols().len().to_string(),
                min.to_string(),
                required.to_string(),
                separated.to_string(),
            ]],
        }),
    };
    write(&artifact, out)?;
    Ok(if separated { Status::Pass } else { Status::Findings })
}

fn write_decoder(mut spec: DecoderSpec, stem: String, out: &OutputArgs) -> Result<Status> {
    if out.format != Format::Json {
        return Ok(Status::Usage("decoders are written as JSON only".into()));
    }
    spec.meta.insert("tool_version".into(), VERSION.into());
    eprintln!("d_model={} layers={} max_context={}", spec.d_model, spec.layers.len(), spec.max_context);
    let dest = destination(out.out.as_deref(), out.out_dir.as_deref(), &stem, "json");
    emit(&(spec.to_json() + "\n"), dest.as_deref())?;
    Ok(Status::Pass)
}

pub fn build_hybrid(n: usize, s: u32, seed: u64, out: &OutputArgs) -> Result<Status> {
    write_decoder(build_hybrid_decoder(n, prec(s), seed)?, format!("hybrid-n{n}-s{s}-seed{seed}"), out)
}

pub fn build_parity_only(n: usize, s: u32, out: &OutputArgs) -> Result<Status> {
    write_decoder(build_parity_only_decoder(n, prec(s))?, format!("parity-only-n{n}-s{s}"), out)
}

pub fn ga_probe(r: usize, s: u32, seed: u64, budget: usize, decoder: Option<&Path>, out: &OutputArgs) -> Result<Status> {
    let spec = match decoder {
        Some(path) => load_decoder(path)?,
        None => build_hybrid_decoder(r + 1, prec(s), seed)?.without_layers(LayerKind::Gdn)?,
    };
    let s = spec.precision.bits();
    let start = Instant::now();
    let report = ga_parity_probe(&spec, r, budget)?;
    eprintln!(
        "r={r}: {}/{} parity instances correct, {:.2}s",
        report.passed,
        report.total,
        start.elapsed().as_secs_f64()
    );
    let pass = report.pass();
    let artifact = Artifact {
        command: "ga-probe",
        stem: format!("ga-probe-r{r}-s{s}-seed{seed}"),
        s,
        n: json!(r + 1),
        seed: Some(seed),
        report: json!({ "r": r, "probe": report }),
        table: Some(verification_rows(std::slice::from_ref(&report))),
    };
    write(&artifact, out)?;
    Ok(if pass { Status::Pass } else { Status::Findings })
}
