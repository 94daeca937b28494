//! Generalized reflections and oblivious amplitude amplification protocols.
//!
//! With `sin θ = √λ₀`, every protocol here rotates inside the two-dimensional
//! space spanned by the desired state `|0^m⟩U|ψ⟩` and its failure complement,
//! so the result is again a RUS circuit with the original target and
//! recoveries. Global phases are kept exactly: the `−1` of each iterate and
//! the phases picked up by the fixed-point schemes stay in the matrices.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::qcore::{StateVector, UnitaryMatrix, C64};
use crate::rus::{success_probability, RusCircuit};

/// Slack when deciding whether one more standard iteration over-rotates.
const ANGLE_TOL: f64 = 1e-9;
/// Required agreement between a plan's λ₀ and the circuit it is applied to.
const PLAN_MATCH_TOL: f64 = 1e-9;
/// Largest protocol length considered by [`fp_length_for`].
pub const MAX_FP_LENGTH: usize = 1_000_000;

/// `S_φ = (I^m − (1 − e^{iφ})|0^m⟩⟨0^m|) ⊗ I`
pub fn reflection(m: usize, phi: f64) -> UnitaryMatrix {
    let dim = 2usize << m;
    let mut diag = vec![C64::new(1.0, 0.0); dim];
    let phase = C64::from_polar(1.0, phi);
    diag[0] = phase;
    diag[1] = phase;
    UnitaryMatrix::diagonal(&diag).expect("unit-modulus diagonal")
}

/// `−A S_φ A† S_φ′`; the `S_φ′` reflection acts first.
pub fn generalized_iterate(c: &RusCircuit, phi: f64, varphi: f64) -> UnitaryMatrix {
    iterate_for(c.a_matrix(), c.m(), phi, varphi)
}

fn iterate_for(a: &UnitaryMatrix, m: usize, phi: f64, varphi: f64) -> UnitaryMatrix {
    let a_dag = a.adjoint();
    let left = &(a * &reflection(m, phi)) * &a_dag;
    let g = &left * &reflection(m, varphi);
    negate(g)
}

fn negate(u: UnitaryMatrix) -> UnitaryMatrix {
    let dim = u.dim();
    UnitaryMatrix::from_entries_unchecked(dim, u.entries().iter().map(|z| -z).collect())
}

/// `−A S_π A† S_π`
pub fn standard_iterate(c: &RusCircuit) -> UnitaryMatrix {
    generalized_iterate(c, PI, PI)
}

fn power(u: &UnitaryMatrix, mut exp: usize) -> UnitaryMatrix {
    let mut result = UnitaryMatrix::identity(u.dim());
    let mut base = u.clone();
    while exp > 0 {
        if exp & 1 == 1 {
            result = &result * &base;
        }
        base = &base * &base;
        exp >>= 1;
    }
    result
}

/// `θ` with `sin θ = √λ₀`.
pub fn rotation_angle(lambda0: f64) -> f64 {
    lambda0.sqrt().min(1.0).asin()
}

/// Number of standard iterations before over-rotation and the residual
/// angle `χ = π/2 − (2j+1)θ ∈ [0, 2θ)`.
pub fn standard_iterations(theta: f64) -> (usize, f64) {
    let j = ((FRAC_PI_2 / theta - 1.0) / 2.0 + ANGLE_TOL).floor().max(0.0) as usize;
    let chi = FRAC_PI_2 - (2 * j + 1) as f64 * theta;
    (j, if chi.abs() < ANGLE_TOL { 0.0 } else { chi })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandardPlan {
    pub j: usize,
    pub theta: f64,
}

impl StandardPlan {
    pub fn new(lambda0: f64, j: usize) -> Result<Self> {
        if !(lambda0 > 0.0 && lambda0 <= 1.0) {
            return Err(invalid(format!("λ₀ = {lambda0} outside (0, 1]")));
        }
        Ok(Self { j, theta: rotation_angle(lambda0) })
    }

    /// `sin²((2j+1)θ)`
    pub fn success_probability(&self) -> f64 {
        ((2 * self.j + 1) as f64 * self.theta).sin().powi(2)
    }
}

/// `(−A S_π A† S_π)^j A`
pub fn standard_compose(c: &RusCircuit, j: usize) -> RusCircuit {
    let a = &power(&standard_iterate(c), j) * c.a_matrix();
    c.with_matrix(a)
}

/// `(−A S_π A† S_π)^j A (|0^m⟩ ⊗ ψ)`
pub fn standard_oaa_state(c: &RusCircuit, j: usize, psi: &StateVector) -> Result<StateVector> {
    let mut state = crate::rus::prepare(c, psi)?;
    let g = standard_iterate(c);
    for _ in 0..j {
        state = g.apply(&state)?;
    }
    Ok(state)
}

/// Which solution of the phase condition a [`DeterministicPlan`] uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseBranch {
    /// `cot(φ/2) = +√((sin 2θ / tan χ)² − cos² 2θ)`, `φ′ = arg(−cos 2θ + i cot(φ/2))`.
    PositiveCot,
    /// `χ = 0`: the generalized iterate is not applied.
    Skipped,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeterministicPlan {
    pub lambda0: f64,
    pub j: usize,
    pub theta: f64,
    pub chi: f64,
    pub phi: f64,
    pub varphi: f64,
    pub branch: PhaseBranch,
}

impl DeterministicPlan {
    pub fn skips_generalized_step(&self) -> bool {
        self.branch == PhaseBranch::Skipped
    }
}

/// `|tan χ − e^{iφ′} sin 2θ (−cos 2θ + i cot(φ/2))⁻¹|`
pub fn tan_chi_residual(theta: f64, chi: f64, phi: f64, varphi: f64) -> f64 {
    let denom = C64::new(-(2.0 * theta).cos(), 1.0 / (phi / 2.0).tan());
    let rhs = C64::from_polar(1.0, varphi) * (2.0 * theta).sin() / denom;
    (C64::new(chi.tan(), 0.0) - rhs).norm()
}

/// Iteration count and generalized phases that rotate exactly onto the
/// desired state when λ₀ is known.
pub fn plan_deterministic(lambda0: f64) -> Result<DeterministicPlan> {
    if lambda0 == 0.0 {
        return Err(Error::ZeroSuccessProbability);
    }
    if !(lambda0 > 0.0 && lambda0 <= 1.0) {
        return Err(invalid(format!("λ₀ = {lambda0} outside (0, 1]")));
    }
    let theta = rotation_angle(lambda0);
    let (j, chi) = standard_iterations(theta);
    if chi == 0.0 {
        return Ok(DeterministicPlan {
            lambda0,
            j,
            theta,
            chi,
            phi: 0.0,
            varphi: 0.0,
            branch: PhaseBranch::Skipped,
        });
    }
    let (s2, c2) = (2.0 * theta).sin_cos();
    let radicand = (s2 / chi.tan()).powi(2) - c2 * c2;
    // Non-negative whenever 0 < χ < 2θ; only rounding can push it below zero.
    if radicand < -1e-12 {
        return Err(invalid(format!("no real phase solution for λ₀ = {lambda0}")));
    }
    let cot_half = radicand.max(0.0).sqrt();
    let phi = 2.0 * 1f64.atan2(cot_half);
    let varphi = C64::new(-c2, cot_half).arg();
    Ok(DeterministicPlan {
        lambda0,
        j,
        theta,
        chi,
        phi,
        varphi,
        branch: PhaseBranch::PositiveCot,
    })
}

fn check_plan_matches(c: &RusCircuit, plan: &DeterministicPlan, psi: &StateVector) -> Result<()> {
    let actual = success_probability(c, psi)?;
    if (actual - plan.lambda0).abs() > PLAN_MATCH_TOL {
        return Err(Error::PlanMismatch { planned: plan.lambda0, actual });
    }
    Ok(())
}

/// `(−A S_φ A† S_φ′)(−A S_π A† S_π)^j A (|0^m⟩ ⊗ ψ)`, equal to `|0^m⟩U|ψ⟩` up
/// to a global phase.
pub fn apply_deterministic(c: &RusCircuit, plan: &DeterministicPlan, psi: &StateVector) -> Result<StateVector> {
    check_plan_matches(c, plan, psi)?;
    let mut state = standard_oaa_state(c, plan.j, psi)?;
    if !plan.skips_generalized_step() {
        state = generalized_iterate(c, plan.phi, plan.varphi).apply(&state)?;
    }
    Ok(state)
}

/// The deterministic protocol as a single circuit.
pub fn deterministic_compose(c: &RusCircuit, plan: &DeterministicPlan) -> Result<RusCircuit> {
    check_plan_matches(c, plan, &StateVector::basis(1, 0))?;
    let mut a = &power(&standard_iterate(c), plan.j) * c.a_matrix();
    if !plan.skips_generalized_step() {
        a = &generalized_iterate(c, plan.phi, plan.varphi) * &a;
    }
    Ok(c.with_matrix(a))
}

/// Selects `S_{+π/3}` or `S_{−π/3}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum PhaseSign {
    Positive,
    Negative,
}

impl From<PhaseSign> for i8 {
    fn from(s: PhaseSign) -> i8 {
        match s {
            PhaseSign::Positive => 1,
            PhaseSign::Negative => -1,
        }
    }
}

impl TryFrom<i8> for PhaseSign {
    type Error = String;

    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(PhaseSign::Positive),
            -1 => Ok(PhaseSign::Negative),
            _ => Err(format!("sign must be +1 or -1, got {v}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pi3Plan {
    pub k: u32,
    pub sign: PhaseSign,
}

/// `A_k = −A_{k−1} S A_{k−1}† S A_{k−1}` with `S = S_{±π/3}`, `A_0 = A`.
///
/// Each level cubes the failure probability.
pub fn pi3_compose(c: &RusCircuit, plan: Pi3Plan) -> RusCircuit {
    let angle = match plan.sign {
        PhaseSign::Positive => PI / 3.0,
        PhaseSign::Negative => -PI / 3.0,
    };
    let m = c.m();
    let s = reflection(m, angle);
    let mut a = c.a_matrix().clone();
    for _ in 0..plan.k {
        let inner = &(&(&s * &a.adjoint()) * &s) * &a;
        a = negate(&a * &inner);
    }
    c.with_matrix(a)
}

/// Smallest `k ≥ 0` with `ε^{3^k} ≤ δ`.
///
/// Evaluates `⌈(ln ln(1/δ) − ln ln(1/ε)) / ln 3⌉` and then corrects by one
/// level if rounding put the ceiling on the wrong side of an exact boundary.
pub fn pi3_level_for(epsilon: f64, delta: f64) -> Result<u32> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(invalid(format!("failure probability {epsilon} outside [0, 1)")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("δ = {delta} outside (0, 1)")));
    }
    if epsilon <= delta {
        return Ok(0);
    }
    let raw = ((1.0 / delta).ln().ln() - (1.0 / epsilon).ln().ln()) / 3f64.ln();
    let mut k = raw.ceil().max(0.0) as u32;
    let fails = |k: u32| (3f64.powi(k as i32) * epsilon.ln()).exp() > delta;
    while fails(k) {
        k += 1;
    }
    while k > 0 && !fails(k - 1) {
        k -= 1;
    }
    Ok(k)
}

/// `T_n(x)`: `cos(n·arccos x)` on `[−1, 1]`, `cosh(n·arccosh x)` above 1.
/// Fractional orders are allowed.
pub fn chebyshev_first_kind(order: f64, x: f64) -> Result<f64> {
    if !(order > 0.0 && order.is_finite()) {
        return Err(invalid(format!("Chebyshev order {order} must be positive")));
    }
    if x.is_nan() || x < -1.0 {
        return Err(invalid(format!("Chebyshev argument {x} below -1")));
    }
    Ok(if x <= 1.0 {
        (order * x.acos()).cos()
    } else {
        (order * x.acosh()).cosh()
    })
}

/// `γ` with `γ⁻¹ = T_{1/(2L+1)}(1/√δ)`.
fn fp_gamma(length: usize, delta: f64) -> f64 {
    let order = 1.0 / (2 * length + 1) as f64;
    1.0 / chebyshev_first_kind(order, 1.0 / delta.sqrt()).expect("argument above 1")
}

/// `w = 1 − γ²`: the smallest λ₀ for which length `L` guarantees `λ_L ≥ 1 − δ`.
pub fn fp_threshold(length: usize, delta: f64) -> Result<f64> {
    if length == 0 {
        return Err(invalid("protocol length must be at least 1"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("δ = {delta} outside (0, 1)")));
    }
    Ok(1.0 - fp_gamma(length, delta).powi(2))
}

/// Smallest `L ≥ 1` whose threshold `w(L, δ)` does not exceed `w_lower_bound`.
pub fn fp_length_for(w_lower_bound: f64, delta: f64) -> Result<usize> {
    if !(w_lower_bound > 0.0 && w_lower_bound <= 1.0) {
        return Err(invalid(format!("success-probability bound {w_lower_bound} outside (0, 1]")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("δ = {delta} outside (0, 1)")));
    }
    for length in 1..=MAX_FP_LENGTH {
        if fp_threshold(length, delta)? <= w_lower_bound {
            return Ok(length);
        }
    }
    Err(invalid(format!(
        "no protocol length up to {MAX_FP_LENGTH} reaches bound {w_lower_bound} at δ = {delta}"
    )))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPointPlan {
    pub length: usize,
    pub delta: f64,
    pub gamma: f64,
    pub w: f64,
    pub phis: Vec<f64>,
    pub varphis: Vec<f64>,
}

impl FixedPointPlan {
    /// Whether the `λ_L ≥ 1 − δ` guarantee applies at this λ₀.
    pub fn guarantees(&self, lambda0: f64) -> bool {
        lambda0 >= self.w
    }
}

/// Phase schedule `φ_j = φ′_{L−j+1} = −2 cot⁻¹(tan(2πj/(2L+1)) √(1−γ²))`.
pub fn fp_plan(length: usize, delta: f64) -> Result<FixedPointPlan> {
    let w = fp_threshold(length, delta)?;
    let gamma = fp_gamma(length, delta);
    let root = (1.0 - gamma * gamma).sqrt();
    let denom = (2 * length + 1) as f64;
    let phis: Vec<f64> = (1..=length)
        .map(|j| {
            let t = (2.0 * PI * j as f64 / denom).tan() * root;
            // cot⁻¹(t) = atan2(1, t); the branch only shifts φ by 2π.
            -2.0 * 1f64.atan2(t)
        })
        .collect();
    let varphis = phis.iter().rev().copied().collect();
    Ok(FixedPointPlan { length, delta, gamma, w, phis, varphis })
}

/// `G(φ_L, φ′_L) ⋯ G(φ_1, φ′_1) A` with `G(φ, φ′) = −A S_φ A† S_φ′`.
pub fn fp_compose(c: &RusCircuit, plan: &FixedPointPlan) -> RusCircuit {
    let mut a = c.a_matrix().clone();
    for (&phi, &varphi) in plan.phis.iter().zip(&plan.varphis) {
        a = &generalized_iterate(c, phi, varphi) * &a;
    }
    c.with_matrix(a)
}
