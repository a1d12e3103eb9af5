//! Run records and pass/fail checks of the discrete a-priori estimates.
//!
//! Every check reports a `margin`: the bound minus the measured quantity at
//! the tightest point, so a check passes iff `margin >= -tolerance`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub margin: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl CheckResult {
    fn new(name: &str, margin: f64, tolerance: f64, detail: Option<String>) -> Self {
        let pass = margin.is_finite() && margin >= -tolerance;
        Self {
            name: name.to_string(),
            pass,
            margin,
            tolerance,
            detail,
        }
    }

    /// A check that is true by construction or was only reported.
    pub fn info(
        name: &str,
        pass: bool,
        margin: f64,
        tolerance: f64,
        detail: impl Into<String>,
    ) -> Self {
        Self {
            name: name.to_string(),
            pass,
            margin,
            tolerance,
            detail: Some(detail.into()),
        }
    }
}

/// Time series of one run. Per-state series have `m + 1` entries for `m`
/// steps; per-step series have `m`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub times: Vec<f64>,
    pub taus: Vec<f64>,
    pub energy: Vec<f64>,
    pub entropy: Vec<f64>,
    /// `W2(u^k, u^{k+1})`.
    pub w2_increments: Vec<f64>,
    /// `Σ_i ‖∂x u_i^k‖²`, per state.
    pub gradient_norms: Vec<f64>,
    /// Per step, per species.
    pub residuals: Vec<Vec<f64>>,
    pub inner_iterations: Vec<usize>,
    pub tv: BTreeMap<String, Vec<f64>>,
    /// Other named series, e.g. pressure increments.
    #[serde(default)]
    pub series: BTreeMap<String, Vec<f64>>,
    pub notes: Vec<String>,
    pub checks: Vec<CheckResult>,
}

impl RunRecord {
    pub fn n_steps(&self) -> usize {
        self.taus.len()
    }

    /// Difference quotients `W2(u^k, u^{k+1}) / τ_k`.
    pub fn metric_speed(&self) -> Vec<f64> {
        self.w2_increments
            .iter()
            .zip(&self.taus)
            .map(|(w, t)| w / t)
            .collect()
    }

    pub fn tv_series(&self, field: &str) -> Result<&[f64]> {
        self.tv
            .get(field)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::UnknownField(field.to_string()))
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn push_check(&mut self, check: CheckResult) {
        self.checks.push(check);
    }

    /// JSON list of `{name, pass, margin, tolerance}`.
    pub fn checks_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.checks).expect("checks serialize")
    }
}

fn nonincreasing(name: &str, series: &[f64], tol: f64) -> CheckResult {
    let mut margin = f64::INFINITY;
    let mut worst = None;
    for (k, w) in series.windows(2).enumerate() {
        let m = w[0] - w[1];
        if m < margin {
            margin = m;
            worst = Some(k);
        }
    }
    if series.len() < 2 {
        margin = 0.0;
    }
    let detail = match worst {
        Some(k) if margin < -tol => Some(format!("increase at step {k}")),
        _ => None,
    };
    CheckResult::new(name, margin, tol, detail)
}

/// `E(k+1) <= E(k) + 1e-8 · |E(0)|`.
pub fn check_energy_monotone(record: &RunRecord) -> CheckResult {
    let tol = 1e-8 * record.energy.first().map_or(0.0, |e| e.abs());
    nonincreasing("energy_monotone", &record.energy, tol)
}

/// `Σ_k W2²(u^k, u^{k+1}) / (2τ_k) <= E0`.
pub fn check_telescoped_w2(record: &RunRecord, e0: f64) -> CheckResult {
    let lhs: f64 = record
        .w2_increments
        .iter()
        .zip(&record.taus)
        .map(|(w, t)| w * w / (2.0 * t))
        .sum();
    CheckResult::new("telescoped_w2", e0 - lhs, 1e-8 * e0.abs(), None)
}

/// At most this many pairs are evaluated by [`check_hoelder`].
pub const HOELDER_MAX_PAIRS: usize = 50;

/// Index pairs `(s, t)`, `s < t < n_states`, subsampled with a fixed stride.
pub fn hoelder_pairs(n_states: usize) -> Vec<(usize, usize)> {
    let all: Vec<(usize, usize)> = (0..n_states)
        .flat_map(|s| (s + 1..n_states).map(move |t| (s, t)))
        .collect();
    if all.len() <= HOELDER_MAX_PAIRS {
        return all;
    }
    let stride = all.len().div_ceil(HOELDER_MAX_PAIRS);
    let mut picked: Vec<(usize, usize)> = all.iter().copied().step_by(stride).collect();
    // Always include the longest lag.
    let longest = (0, n_states - 1);
    if !picked.contains(&longest) {
        picked.pop();
        picked.push(longest);
    }
    picked
}

/// `W2(u(s), u(t)) <= sqrt(2 E0 (t − s))` on a subsample of recorded pairs.
/// `distance(s, t)` must return the true distance between states `s` and `t`.
pub fn check_hoelder(
    record: &RunRecord,
    e0: f64,
    distance: impl Fn(usize, usize) -> f64,
    h: f64,
    levels: usize,
) -> CheckResult {
    let tol = 1e-6 + 2.0 * (h + 1.0 / levels as f64);
    let mut margin = f64::INFINITY;
    let mut worst = None;
    for (s, t) in hoelder_pairs(record.times.len()) {
        let bound = (2.0 * e0 * (record.times[t] - record.times[s]))
            .max(0.0)
            .sqrt();
        let m = bound - distance(s, t);
        if m < margin {
            margin = m;
            worst = Some((s, t));
        }
    }
    if !margin.is_finite() {
        margin = 0.0;
    }
    let detail = worst
        .filter(|_| margin < -tol)
        .map(|(s, t)| format!("pair ({s}, {t})"));
    CheckResult::new("hoelder", margin, tol, detail)
}

/// `H(u⁰) − H(u^k) >= λ Σ_{ℓ=1..k} τ_{ℓ−1} ‖∂x u^ℓ‖²` for every `k`.
///
/// The tolerance is `1e-6 |H(u⁰)| + h · λ Σ τ ‖∂x u‖²`: the second term
/// absorbs the first-order consistency error of the discrete gradient.
pub fn check_entropy_dissipation(record: &RunRecord, lambda_min: f64, h: f64) -> CheckResult {
    let h0 = record.entropy.first().copied().unwrap_or(0.0);
    let mut acc = 0.0;
    let mut margin = f64::INFINITY;
    let mut worst = None;
    for k in 1..record.entropy.len() {
        acc += lambda_min * record.taus[k - 1] * record.gradient_norms[k];
        let m = (h0 - record.entropy[k]) - acc;
        if m < margin {
            margin = m;
            worst = Some(k);
        }
    }
    if !margin.is_finite() {
        margin = 0.0;
    }
    let tol = 1e-6 * h0.abs() + h * acc;
    let detail = worst
        .filter(|_| margin < -tol)
        .map(|k| format!("violated at state {k}"));
    CheckResult::new("entropy_dissipation", margin, tol, detail)
}

/// Named TV series nonincreasing within `1e-8 · TV(0)`.
pub fn check_tv_monotone(record: &RunRecord, field: &str) -> Result<CheckResult> {
    let s = record.tv_series(field)?;
    let tol = 1e-8 * s.first().map_or(0.0, |v| v.abs());
    Ok(nonincreasing(&format!("tv_monotone[{field}]"), s, tol))
}

/// `W2(u^k, u^{k+1}) <= sqrt(N) · W2(p_k, p_{k+1}) + tol` at every step.
pub fn check_metric_speed(
    record: &RunRecord,
    pressure: &RunRecord,
    n_species: usize,
    tol: f64,
) -> Result<CheckResult> {
    if record.w2_increments.len() != pressure.w2_increments.len() {
        return Err(Error::DimensionMismatch {
            expected: pressure.w2_increments.len(),
            got: record.w2_increments.len(),
        });
    }
    let root = (n_species as f64).sqrt();
    let mut margin = f64::INFINITY;
    let mut worst = None;
    for (k, (u, p)) in record
        .w2_increments
        .iter()
        .zip(&pressure.w2_increments)
        .enumerate()
    {
        let m = root * p - u;
        if m < margin {
            margin = m;
            worst = Some(k);
        }
    }
    if !margin.is_finite() {
        margin = 0.0;
    }
    let detail = worst
        .filter(|_| margin < -tol)
        .map(|k| format!("violated at step {k}"));
    Ok(CheckResult::new("metric_speed", margin, tol, detail))
}
