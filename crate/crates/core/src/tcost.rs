//! T-gate cost models for the amplification strategies.
//!
//! Every strategy is costed as the T-count of one run that reaches success
//! probability at least `1 − δ`. Generalized reflections `S_φ` use the
//! Kliuchnikov–Maslov–Mosca fit `3.21 log₂(1/ε) − 6.93` at precision
//! `ε = δ/n_S`, where `n_S` counts the generalized reflections in the run.

use std::fmt::Write;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{invalid, Error, Result};
use crate::oaa::{fp_length_for, pi3_level_for, plan_deterministic, rotation_angle, standard_iterations};
use crate::table::{fmt_real, lambda_grid};

/// How generalized reflections are costed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReflectionPolicy {
    KmmFormula,
    Fixed(f64),
    Zero,
}

impl ReflectionPolicy {
    /// T-count of one generalized reflection at precision `epsilon`.
    pub fn cost(self, epsilon: f64) -> f64 {
        match self {
            ReflectionPolicy::KmmFormula => ct_reflection(epsilon),
            ReflectionPolicy::Fixed(v) => v,
            ReflectionPolicy::Zero => 0.0,
        }
    }

    /// T-count of one `S_π`. Free for the small registers considered here
    /// unless a fixed value is forced.
    pub fn pi_cost(self) -> f64 {
        match self {
            ReflectionPolicy::Fixed(v) => v,
            _ => 0.0,
        }
    }

    pub fn label(self) -> String {
        match self {
            ReflectionPolicy::KmmFormula => "kmm".into(),
            ReflectionPolicy::Fixed(v) => format!("fixed:{v}"),
            ReflectionPolicy::Zero => "zero".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostQuery {
    pub lambda0: f64,
    pub delta: f64,
    pub ct_a: f64,
    pub reflection_policy: ReflectionPolicy,
}

impl CostQuery {
    pub fn new(lambda0: f64, delta: f64, ct_a: f64, reflection_policy: ReflectionPolicy) -> Result<Self> {
        if lambda0 == 0.0 {
            return Err(Error::ZeroSuccessProbability);
        }
        if !(lambda0 > 0.0 && lambda0 <= 1.0) {
            return Err(invalid(format!("λ₀ = {lambda0} outside (0, 1]")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(invalid(format!("δ = {delta} outside (0, 1)")));
        }
        if !(ct_a >= 0.0 && ct_a.is_finite()) {
            return Err(invalid(format!("C_T(A) = {ct_a} must be a finite non-negative number")));
        }
        if let ReflectionPolicy::Fixed(v) = reflection_policy {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(format!("fixed reflection cost {v} must be finite and non-negative")));
            }
        }
        Ok(Self { lambda0, delta, ct_a, reflection_policy })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Classical,
    StandardOaa,
    DeterministicOaa,
    Pi3Oaa,
    FpOaa,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Classical,
        Strategy::StandardOaa,
        Strategy::DeterministicOaa,
        Strategy::Pi3Oaa,
        Strategy::FpOaa,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Strategy::Classical => "classical",
            Strategy::StandardOaa => "standard_oaa",
            Strategy::DeterministicOaa => "deterministic_oaa",
            Strategy::Pi3Oaa => "pi3_oaa",
            Strategy::FpOaa => "fp_oaa",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub j: Option<usize>,
    pub k: Option<u32>,
    #[serde(rename = "L")]
    pub length: Option<usize>,
    pub n_s: usize,
    pub epsilon: Option<f64>,
    /// Attempts of the (possibly amplified) circuit, for repeat strategies.
    pub attempts: Option<u64>,
    /// Fixed-point length forced to 1 because λ₀ already meets the target.
    pub length_floor: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostResult {
    pub strategy: Strategy,
    pub total_t: f64,
    pub params: CostParams,
}

/// `max(0, 3.21 log₂(1/ε) − 6.93)`
pub fn ct_reflection(epsilon: f64) -> f64 {
    (3.21 * (1.0 / epsilon).log2() - 6.93).max(0.0)
}

/// `max(1, ⌈ln δ / ln p_fail − 1⌉)`: repetitions until the failure
/// probability drops to `δ`.
fn repetitions(delta: f64, p_fail: f64) -> u64 {
    if p_fail <= 0.0 {
        return 1;
    }
    (delta.ln() / p_fail.ln() - 1.0).ceil().max(1.0) as u64
}

pub fn ct_classical(q: &CostQuery) -> CostResult {
    let attempts = repetitions(q.delta, 1.0 - q.lambda0);
    CostResult {
        strategy: Strategy::Classical,
        total_t: q.ct_a * attempts as f64,
        params: CostParams { attempts: Some(attempts), ..Default::default() },
    }
}

/// Amplify with `j` standard iterations, then repeat the amplified circuit.
pub fn ct_standard_oaa(q: &CostQuery) -> CostResult {
    let (j, chi) = standard_iterations(rotation_angle(q.lambda0));
    let attempts = repetitions(q.delta, chi.sin().powi(2));
    let per_run = (2 * j + 1) as f64 * q.ct_a + 2.0 * j as f64 * q.reflection_policy.pi_cost();
    CostResult {
        strategy: Strategy::StandardOaa,
        total_t: per_run * attempts as f64,
        params: CostParams { j: Some(j), attempts: Some(attempts), ..Default::default() },
    }
}

pub fn ct_deterministic_oaa(q: &CostQuery) -> Result<CostResult> {
    let plan = plan_deterministic(q.lambda0)?;
    let j = plan.j;
    let params = CostParams { j: Some(j), ..Default::default() };
    if plan.skips_generalized_step() {
        return Ok(CostResult {
            strategy: Strategy::DeterministicOaa,
            total_t: (2 * j + 1) as f64 * q.ct_a + 2.0 * j as f64 * q.reflection_policy.pi_cost(),
            params,
        });
    }
    let epsilon = q.delta / 2.0;
    Ok(CostResult {
        strategy: Strategy::DeterministicOaa,
        total_t: 2.0 * (j + 1) as f64 * q.ct_a + 2.0 * q.reflection_policy.cost(epsilon),
        params: CostParams { n_s: 2, epsilon: Some(epsilon), ..params },
    })
}

/// `(C_T(A) + C_S) 3^k − C_S`
pub fn pi3_cost(ct_a: f64, ct_s: f64, k: u32) -> f64 {
    (ct_a + ct_s) * 3f64.powi(k as i32) - ct_s
}

pub fn ct_pi3(q: &CostQuery) -> Result<CostResult> {
    let k = pi3_level_for(1.0 - q.lambda0, q.delta)?;
    let n_s = 3usize.pow(k) - 1;
    let (ct_s, epsilon) = if n_s == 0 {
        (0.0, None)
    } else {
        let eps = q.delta / n_s as f64;
        (q.reflection_policy.cost(eps), Some(eps))
    };
    Ok(CostResult {
        strategy: Strategy::Pi3Oaa,
        total_t: pi3_cost(q.ct_a, ct_s, k),
        params: CostParams { k: Some(k), n_s, epsilon, ..Default::default() },
    })
}

pub fn ct_fixed_point(q: &CostQuery) -> Result<CostResult> {
    let length_floor = q.lambda0 >= 1.0 - q.delta;
    let length = if length_floor { 1 } else { fp_length_for(q.lambda0, q.delta)? };
    let n_s = 2 * length;
    let epsilon = q.delta / n_s as f64;
    Ok(CostResult {
        strategy: Strategy::FpOaa,
        total_t: (2 * length + 1) as f64 * q.ct_a + n_s as f64 * q.reflection_policy.cost(epsilon),
        params: CostParams { length: Some(length), n_s, epsilon: Some(epsilon), length_floor, ..Default::default() },
    })
}

pub fn evaluate(q: &CostQuery, strategy: Strategy) -> Result<CostResult> {
    match strategy {
        Strategy::Classical => Ok(ct_classical(q)),
        Strategy::StandardOaa => Ok(ct_standard_oaa(q)),
        Strategy::DeterministicOaa => ct_deterministic_oaa(q),
        Strategy::Pi3Oaa => ct_pi3(q),
        Strategy::FpOaa => ct_fixed_point(q),
    }
}

pub fn evaluate_all(q: &CostQuery) -> Result<Vec<CostResult>> {
    Strategy::ALL.iter().map(|&s| evaluate(q, s)).collect()
}

/// Expected T-count of repeating `A` until success: `C_T(A)/λ₀`.
pub fn expected_cost_classical(lambda0: f64, ct_a: f64) -> f64 {
    ct_a / lambda0
}

/// Expected T-count of repeating `j` standard iterations until success:
/// `((2j+1) C_T(A) + 2j C_T(S_π)) / sin²((2j+1)θ)`.
pub fn expected_cost_standard(lambda0: f64, ct_a: f64, j: usize, ct_pi: f64) -> f64 {
    let theta = rotation_angle(lambda0);
    let n = (2 * j + 1) as f64;
    (n * ct_a + 2.0 * j as f64 * ct_pi) / (n * theta).sin().powi(2)
}

/// Whether one round of standard amplification with free `S_π` is cheaper
/// on average than plain repetition.
pub fn standard_beats_classical(lambda0: f64) -> bool {
    expected_cost_standard(lambda0, 1.0, 1, 0.0) < expected_cost_classical(lambda0, 1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostRow {
    pub lambda0: f64,
    pub result: CostResult,
}

/// Cost curves of all strategies over the λ₀ grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CostTable {
    pub name: String,
    pub ct_a: f64,
    pub delta: f64,
    pub rows: Vec<CostRow>,
    pub metadata: serde_json::Value,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl CostTable {
    pub const HEADER: &'static str = "lambda0,strategy,total_t,j,k,L,n_S,epsilon_reflection";

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(80 * (self.rows.len() + 1));
        out.push_str(Self::HEADER);
        out.push('\n');
        for r in &self.rows {
            let p = &r.result.params;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                fmt_real(r.lambda0),
                r.result.strategy.id(),
                fmt_real(r.result.total_t),
                opt(p.j),
                opt(p.k),
                opt(p.length),
                p.n_s,
                p.epsilon.map(fmt_real).unwrap_or_default()
            )
            .unwrap();
        }
        out
    }

    pub fn metadata_json(&self) -> String {
        serde_json::to_string_pretty(&self.metadata).expect("metadata serializes")
    }

    pub fn curve(&self, strategy: Strategy) -> Vec<&CostRow> {
        self.rows.iter().filter(|r| r.result.strategy == strategy).collect()
    }
}

/// All five strategies over the λ₀ grid with KMM-costed reflections.
pub fn figure2_data(ct_a: f64, delta: f64) -> Result<CostTable> {
    let policy = ReflectionPolicy::KmmFormula;
    let grid = lambda_grid();
    let mut rows = Vec::with_capacity(grid.len() * Strategy::ALL.len());
    let mut floors = Vec::new();
    for &lambda0 in &grid {
        let q = CostQuery::new(lambda0, delta, ct_a, policy)?;
        for result in evaluate_all(&q)? {
            if result.params.length_floor {
                floors.push(lambda0);
            }
            rows.push(CostRow { lambda0, result });
        }
    }
    let name = if delta == 1e-3 { "figd1" } else { "fig2" };
    let metadata = json!({
        "figure": name,
        "x": "lambda0",
        "ct_a": ct_a,
        "delta": delta,
        "reflection_policy": policy.label(),
        "s_pi_cost": 0.0,
        "reflection_precision": "delta / n_S",
        "grid": { "kind": "linear", "lo": 0.02, "hi": 0.98, "points": grid.len() },
        "strategies": Strategy::ALL.iter().map(|s| s.id()).collect::<Vec<_>>(),
        "fp_length_floor_at": floors,
    });
    Ok(CostTable { name: name.into(), ct_a, delta, rows, metadata })
}
