use std::str::FromStr;

use rusamp_core::oaa::{
    deterministic_compose, fp_compose, fp_length_for, fp_plan, pi3_compose, plan_deterministic, standard_compose,
    PhaseSign, Pi3Plan,
};
use rusamp_core::qcore::{StateVector, C64};
use rusamp_core::tcost::ReflectionPolicy;
use rusamp_core::{RngStream, RusCircuit};
use serde_json::{json, Value};

/// Amplification applied before the repeat loop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Protocol {
    None,
    Standard(usize),
    Deterministic,
    Pi3 { k: u32, sign: PhaseSign },
    FixedPoint { delta: f64, w_bound: Option<f64> },
}

fn number<T: FromStr>(text: &str, what: &str) -> Result<T, String> {
    text.parse().map_err(|_| format!("invalid {what} `{text}`"))
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["none"] => Ok(Protocol::None),
            ["standard", j] => Ok(Protocol::Standard(number(j, "iteration count")?)),
            ["deterministic"] => Ok(Protocol::Deterministic),
            ["pi3", k] => Ok(Protocol::Pi3 { k: number(k, "level")?, sign: PhaseSign::Positive }),
            ["pi3", k, "neg"] => Ok(Protocol::Pi3 { k: number(k, "level")?, sign: PhaseSign::Negative }),
            ["fp", d] => Ok(Protocol::FixedPoint { delta: number(d, "delta")?, w_bound: None }),
            ["fp", d, w] => Ok(Protocol::FixedPoint { delta: number(d, "delta")?, w_bound: Some(number(w, "bound")?) }),
            _ => Err(format!(
                "unknown protocol `{s}` (expected none, standard:J, deterministic, pi3:K[:neg] or fp:DELTA[:WBOUND])"
            )),
        }
    }
}

impl Protocol {
    /// Composes the protocol onto `c`; also returns the resolved parameters.
    pub fn apply(self, c: &RusCircuit) -> rusamp_core::Result<(RusCircuit, Value)> {
        Ok(match self {
            Protocol::None => (c.clone(), json!({ "name": "none" })),
            Protocol::Standard(j) => (standard_compose(c, j), json!({ "name": "standard", "j": j })),
            Protocol::Deterministic => {
                let plan = plan_deterministic(c.lambda0())?;
                let amplified = deterministic_compose(c, &plan)?;
                (amplified, json!({ "name": "deterministic", "plan": plan }))
            }
            Protocol::Pi3 { k, sign } => {
                let plan = Pi3Plan { k, sign };
                (pi3_compose(c, plan), json!({ "name": "pi3", "plan": plan }))
            }
            Protocol::FixedPoint { delta, w_bound } => {
                let bound = w_bound.unwrap_or_else(|| c.lambda0());
                let plan = fp_plan(fp_length_for(bound, delta)?, delta)?;
                let amplified = fp_compose(c, &plan);
                (
                    amplified,
                    json!({ "name": "fp", "delta": delta, "w_bound": bound, "L": plan.length, "w": plan.w }),
                )
            }
        })
    }
}

/// Data-qubit input: `0`, `1`, `+`, `-`, `random`, or `re,im,re,im`
/// (normalized on parse).
#[derive(Clone, Debug, PartialEq)]
pub enum PsiSpec {
    Named(String),
    Amplitudes([f64; 4]),
}

impl FromStr for PsiSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "0" | "1" | "+" | "-" | "random" => Ok(PsiSpec::Named(s.into())),
            _ => {
                let v: Vec<f64> = s.split(',').map(|p| number(p.trim(), "amplitude")).collect::<Result<_, _>>()?;
                let a: [f64; 4] = v.try_into().map_err(|_| format!("psi `{s}` needs four comma-separated reals"))?;
                if a.iter().all(|x| *x == 0.0) {
                    return Err("psi amplitudes are all zero".into());
                }
                Ok(PsiSpec::Amplitudes(a))
            }
        }
    }
}

impl PsiSpec {
    /// `random` draws from a stream reserved for the input state.
    pub fn state(&self, seed: u64) -> rusamp_core::Result<StateVector> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            PsiSpec::Named(n) => Ok(match n.as_str() {
                "0" => StateVector::basis(1, 0),
                "1" => StateVector::basis(1, 1),
                "+" => StateVector::plus(),
                "-" => StateVector::new(vec![C64::new(h, 0.0), C64::new(-h, 0.0)])?,
                _ => StateVector::random(1, &mut RngStream::substream(seed, u64::MAX)),
            }),
            PsiSpec::Amplitudes(a) => StateVector::normalized(vec![C64::new(a[0], a[1]), C64::new(a[2], a[3])]),
        }
    }
}

pub fn parse_policy(s: &str) -> Result<ReflectionPolicy, String> {
    match s {
        "kmm" => Ok(ReflectionPolicy::KmmFormula),
        "zero" => Ok(ReflectionPolicy::Zero),
        _ => match s.strip_prefix("fixed:") {
            Some(v) => Ok(ReflectionPolicy::Fixed(number(v, "reflection cost")?)),
            None => Err(format!("unknown reflection policy `{s}` (expected kmm, zero or fixed:V)")),
        },
    }
}
