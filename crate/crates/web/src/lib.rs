//! Browser bindings for the demo page. Every export returns a JSON string;
//! failures come back as `{"error": "..."}`.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use dtpc_ident::bounds::{converse_trend as converse, dif_capacity_lower};
use dtpc_ident::channel::{ChannelParams, PowerConstraints};
use dtpc_ident::measures::{bhattacharyya, poisson_bhattacharyya_sq, poisson_pmf_truncated, tv_distance};

const PMF_TAIL: f64 = 1e-9;

#[derive(Debug, Serialize, PartialEq)]
pub struct TrendPoint {
    pub n: usize,
    pub memory: usize,
    pub normalized: f64,
}

#[derive(Debug, Serialize, PartialEq)]
pub struct Trend {
    pub target: f64,
    pub points: Vec<TrendPoint>,
}

/// Normalized converse over `n = 2^4 .. 2^20` for a memoryless-shaped ball.
pub fn trend(kappa: f64, lambda1: f64, lambda2: f64, dark_current: f64, energy_ts: f64) -> Result<Trend, String> {
    let params = ChannelParams::memoryless(1.0, dark_current).map_err(|e| e.to_string())?;
    let c = PowerConstraints::new(energy_ts, energy_ts).map_err(|e| e.to_string())?;
    let ns: Vec<usize> = (4..=20).map(|k| 1usize << k).collect();
    let values = converse(&ns, kappa, &params, &c, lambda1, lambda2).map_err(|e| e.to_string())?;
    Ok(Trend {
        target: (1.0 + kappa) / 2.0,
        points: values
            .iter()
            .map(|v| TrendPoint {
                n: v.n,
                memory: v.memory,
                normalized: v.normalized,
            })
            .collect(),
    })
}

#[derive(Debug, Serialize, PartialEq)]
pub struct Overlap {
    pub bhattacharyya_sq: f64,
    pub fidelity: f64,
    pub tv: f64,
    pub tv_lower: f64,
    pub tv_upper: f64,
    pub pmf1: Vec<f64>,
    pub pmf2: Vec<f64>,
}

/// Two Poisson laws side by side with their TV distance and fidelity bounds.
pub fn overlap(mu1: f64, mu2: f64) -> Result<Overlap, String> {
    let q1 = poisson_pmf_truncated(mu1, PMF_TAIL).map_err(|e| e.to_string())?;
    let q2 = poisson_pmf_truncated(mu2, PMF_TAIL).map_err(|e| e.to_string())?;
    let f = bhattacharyya(&q1, &q2);
    let top = q1.max_value().unwrap_or(0).max(q2.max_value().unwrap_or(0));
    Ok(Overlap {
        bhattacharyya_sq: poisson_bhattacharyya_sq(mu1, mu2),
        fidelity: f,
        tv: tv_distance(&q1, &q2),
        tv_lower: 1.0 - f,
        tv_upper: (1.0 - f * f).max(0.0).sqrt(),
        pmf1: (0..=top).map(|v| q1.pmf(v)).collect(),
        pmf2: (0..=top).map(|v| q2.pmf(v)).collect(),
    })
}

#[derive(Debug, Serialize, PartialEq)]
pub struct LowerPoint {
    pub energy_ts: f64,
    pub exact: f64,
    pub asymptotic: f64,
}

/// DIF lower bound against `Ê T_s` on 60 log-spaced points up to `max_ets`.
pub fn lower_curve(hit_probs: Vec<f64>, dark_current: f64, max_ets: f64) -> Result<Vec<LowerPoint>, String> {
    if !(max_ets > 0.1 && max_ets.is_finite()) {
        return Err(format!("max_ets must be finite and > 0.1, got {max_ets}"));
    }
    let params = ChannelParams::new(hit_probs, 1.0, dark_current).map_err(|e| e.to_string())?;
    let (lo, hi) = (0.1f64.ln(), max_ets.ln());
    (0..60)
        .map(|k| {
            let e = (lo + (hi - lo) * k as f64 / 59.0).exp();
            let (exact, asymptotic) = dif_capacity_lower(&params, e).map_err(|e| e.to_string())?;
            Ok(LowerPoint {
                energy_ts: e,
                exact,
                asymptotic,
            })
        })
        .collect()
}

fn to_json<T: Serialize>(r: Result<T, String>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| error_json(&e.to_string())),
        Err(e) => error_json(&e),
    }
}

fn error_json(msg: &str) -> String {
    serde_json::json!({ "error": msg }).to_string()
}

#[wasm_bindgen]
pub fn converse_trend(kappa: f64, lambda1: f64, lambda2: f64, dark_current: f64, energy_ts: f64) -> String {
    to_json(trend(kappa, lambda1, lambda2, dark_current, energy_ts))
}

#[wasm_bindgen]
pub fn poisson_overlap(mu1: f64, mu2: f64) -> String {
    to_json(overlap(mu1, mu2))
}

#[wasm_bindgen]
pub fn dif_lower_curve(hit_probs: Vec<f64>, dark_current: f64, max_ets: f64) -> String {
    to_json(lower_curve(hit_probs, dark_current, max_ets))
}
