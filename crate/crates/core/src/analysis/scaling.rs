use serde::Serialize;

use crate::construct::build_hybrid_decoder;
use crate::fixed::Precision;

use super::AnalysisError;

/// Slack allowed when checking points against the fitted line.
pub const FIT_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingPoint {
    pub n: usize,
    pub code_length: usize,
    pub d_model: usize,
}

/// Least-squares line `d = a + b·log₂ n`, with `a` raised by the largest
/// residual so that every measured point lies on or below it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingReport {
    pub s: u32,
    pub seed: u64,
    pub points: Vec<ScalingPoint>,
    pub a: f64,
    pub b: f64,
    pub max_residual: f64,
    pub bound_holds: bool,
}

pub fn dimension_scaling(ns: &[usize], p: Precision, seed: u64) -> Result<ScalingReport, AnalysisError> {
    if ns.len() < 2 {
        return Err(AnalysisError::Unsupported("scaling fit needs at least two sizes".into()));
    }
    let mut points = Vec::with_capacity(ns.len());
    for &n in ns {
        let spec = build_hybrid_decoder(n, p, seed)?;
        let code_length = spec
            .meta
            .get("code_length")
            .and_then(|m| m.parse().ok())
            .unwrap_or(0);
        points.push(ScalingPoint {
            n,
            code_length,
            d_model: spec.d_model,
        });
    }
    let xs: Vec<f64> = points.iter().map(|pt| (pt.n as f64).log2()).collect();
    let ys: Vec<f64> = points.iter().map(|pt| pt.d_model as f64).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a0 = my - b * mx;
    let max_residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| y - (a0 + b * x))
        .fold(0.0f64, f64::max);
    let a = a0 + max_residual;
    let bound_holds = xs
        .iter()
        .zip(&ys)
        .all(|(x, y)| *y <= a + b * x + FIT_TOLERANCE);
    Ok(ScalingReport {
        s: p.bits(),
        seed,
        points,
        a,
        b,
        max_residual,
        bound_holds,
    })
}
