//! Amplitude distortion of RUS circuits executed under quantum control.
//!
//! The controlled operator is
//!
//! ```text
//! B′ = X ⊗ |0⟩⟨0| + A ⊗ |1⟩⟨1|,   X = I (operator B) or D ⊗ I
//! ```
//!
//! on (ancillas, data, control), where `D|0^m⟩ = Σ_i √γ_i |i⟩` lets the idle
//! branch mimic the outcome statistics of `A`. A superposition
//! `α|ψ₀⟩|0⟩ + β|ψ₁⟩|1⟩` comes out of the repeat loop with its weights
//! reshaped by the realized failure history; the average squared overlap with
//! `α|ψ₀⟩|0⟩ + βU|ψ₁⟩|1⟩` has the closed form
//!
//! ```text
//! F̄ = |α|⁴ + 2|α|²|β|² √(γ₀λ₀)/Γ + |β|⁴,   Γ = 1 − Σ_{i≠0} √(γ_iλ_i)
//! ```

use rayon::prelude::*;
use serde_json::json;

use crate::error::{invalid, Error, Result};
use crate::qcore::{complete_isometry, sample_index, StateVector, UnitaryMatrix, C64, NORM_TOL};
use crate::rng::RngStream;
use crate::rus::{check_distribution, RunRecord, RusCircuit};
use crate::table::{lambda_grid, log_grid, mean_std, FigureRow, FigureTable};

/// Relative offset between γ₀ and λ₀ used by the figure datasets.
pub const FIGURE_DELTA_REL: f64 = 0.3;
/// Random failure distributions drawn per figure point.
pub const FIGURE_DRAWS: usize = 1000;
/// Label for how random failure distributions are drawn.
pub const TAIL_DISTRIBUTION: &str = "independent uniforms on (0,1) rescaled to the failure mass";

/// `D` with `D|0^m⟩ = Σ_i √γ_i |i⟩`.
///
/// For one ancilla this is exactly `exp(−i(π/2 − θ)Y)` with `sin θ = √γ₀`;
/// otherwise the column is completed to a unitary with the seeded generator.
pub fn build_distorter(gammas: &[f64], seed: u64) -> Result<UnitaryMatrix> {
    if gammas.len() < 2 || !gammas.len().is_power_of_two() {
        return Err(invalid(format!("{} outcome weights is not 2^m with m >= 1", gammas.len())));
    }
    check_distribution(gammas)?;
    if gammas.len() == 2 {
        let theta = gammas[0].sqrt().min(1.0).asin();
        return Ok(UnitaryMatrix::exp_y(std::f64::consts::FRAC_PI_2 - theta));
    }
    let col: Vec<C64> = gammas.iter().map(|g| C64::new(g.sqrt(), 0.0)).collect();
    complete_isometry(&[col], gammas.len(), &mut RngStream::new(seed))
}

/// A RUS circuit under control of one extra (trailing) qubit.
#[derive(Clone, Debug)]
pub struct ConditionalCircuit {
    base: RusCircuit,
    gammas: Option<Vec<f64>>,
    b_matrix: UnitaryMatrix,
    undo: Vec<[C64; 4]>,
}

impl ConditionalCircuit {
    pub fn base(&self) -> &RusCircuit {
        &self.base
    }

    /// `None` for operator `B` (the idle branch is the identity).
    pub fn gammas(&self) -> Option<&[f64]> {
        self.gammas.as_deref()
    }

    /// Effective idle-branch outcome distribution (`(1, 0, …, 0)` for `B`).
    pub fn idle_distribution(&self) -> Vec<f64> {
        match &self.gammas {
            Some(g) => g.clone(),
            None => {
                let mut g = vec![0.0; 1 << self.base.m()];
                g[0] = 1.0;
                g
            }
        }
    }

    pub fn b_matrix(&self) -> &UnitaryMatrix {
        &self.b_matrix
    }
}

/// `B′ = X ⊗ |0⟩⟨0| + A ⊗ |1⟩⟨1|` with `X = D ⊗ I` when `gammas` is given,
/// `X = I` otherwise.
pub fn build_conditional(base: &RusCircuit, gammas: Option<&[f64]>, seed: u64) -> Result<ConditionalCircuit> {
    let m = base.m();
    let idle = match gammas {
        Some(g) => {
            if g.len() != 1 << m {
                return Err(Error::DimensionMismatch { expected: 1 << m, actual: g.len() });
            }
            build_distorter(g, seed)?.tensor(&UnitaryMatrix::identity(2))
        }
        None => UnitaryMatrix::identity(2 << m),
    };
    let a = base.a_matrix();
    let inner = a.dim();
    let dim = 2 * inner;
    let mut entries = vec![C64::new(0.0, 0.0); dim * dim];
    for x in 0..inner {
        for y in 0..inner {
            entries[(2 * x) * dim + 2 * y] = idle.get(x, y);
            entries[(2 * x + 1) * dim + 2 * y + 1] = a.get(x, y);
        }
    }
    let undo = base
        .spec()
        .recoveries
        .iter()
        .map(|r| {
            let d = r.adjoint();
            [d.get(0, 0), d.get(0, 1), d.get(1, 0), d.get(1, 1)]
        })
        .collect();
    Ok(ConditionalCircuit {
        base: base.clone(),
        gammas: gammas.map(<[f64]>::to_vec),
        b_matrix: UnitaryMatrix::from_entries_unchecked(dim, entries),
        undo,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistortionConfig {
    pub alpha: C64,
    pub beta: C64,
    pub psi0: StateVector,
    pub psi1: StateVector,
    pub trials: usize,
    pub seed: u64,
    pub max_attempts: usize,
}

impl DistortionConfig {
    pub fn new(
        alpha: C64,
        beta: C64,
        psi0: StateVector,
        psi1: StateVector,
        trials: usize,
        seed: u64,
        max_attempts: usize,
    ) -> Result<Self> {
        let norm = alpha.norm_sqr() + beta.norm_sqr();
        if !((norm - 1.0).abs() <= NORM_TOL) {
            return Err(Error::NotNormalized { norm_sqr: norm });
        }
        for psi in [&psi0, &psi1] {
            if psi.num_qubits() != 1 {
                return Err(Error::DimensionMismatch { expected: 2, actual: psi.dim() });
            }
        }
        if trials == 0 || max_attempts == 0 {
            return Err(invalid("trials and max_attempts must be at least 1"));
        }
        Ok(Self { alpha, beta, psi0, psi1, trials, seed, max_attempts })
    }

    /// `α|ψ₀⟩|0⟩ + β|ψ₁⟩|1⟩` on (data, control).
    pub fn initial_state(&self) -> [C64; 4] {
        let (p0, p1) = (self.psi0.amps(), self.psi1.amps());
        [self.alpha * p0[0], self.beta * p1[0], self.alpha * p0[1], self.beta * p1[1]]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FidelityEstimate {
    pub mean: f64,
    pub std_error: f64,
    /// Trials that reached success and enter the mean.
    pub trials: usize,
    /// Trials abandoned at `max_attempts`.
    pub exhausted: usize,
}

/// `(1 + √λ₀)² / (2(1 + λ₀))`: overlap after immediate success of operator
/// `B` on `|ψ⟩|+⟩`.
pub fn single_shot_overlap(lambda0: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda0) {
        return Err(invalid(format!("λ₀ = {lambda0} outside [0, 1]")));
    }
    Ok((1.0 + lambda0.sqrt()).powi(2) / (2.0 * (1.0 + lambda0)))
}

fn cross_term_weights(alpha: C64, beta: C64) -> (f64, f64) {
    (alpha.norm_sqr(), beta.norm_sqr())
}

fn closed_form(a2: f64, b2: f64, geo0: f64, gamma_sum: f64) -> Result<f64> {
    if geo0 == 0.0 {
        // One branch never succeeds: no cross term survives.
        return Ok(a2 * a2 + b2 * b2);
    }
    let big_gamma = 1.0 - gamma_sum;
    if !(big_gamma > 0.0) {
        return Err(invalid(format!("Γ = {big_gamma} with γ₀λ₀ > 0")));
    }
    Ok(a2 * a2 + 2.0 * a2 * b2 * geo0 / big_gamma + b2 * b2)
}

/// Average fidelity over all failure histories, for arbitrary `m`.
pub fn average_fidelity_closed(alpha: C64, beta: C64, gammas: &[f64], lambdas: &[f64]) -> Result<f64> {
    if gammas.len() != lambdas.len() {
        return Err(Error::DimensionMismatch { expected: lambdas.len(), actual: gammas.len() });
    }
    check_distribution(gammas)?;
    check_distribution(lambdas)?;
    let (a2, b2) = cross_term_weights(alpha, beta);
    let geo0 = (gammas[0] * lambdas[0]).sqrt();
    let tail: f64 = gammas[1..].iter().zip(&lambdas[1..]).map(|(g, l)| (g * l).sqrt()).sum();
    closed_form(a2, b2, geo0, tail)
}

/// Single-ancilla specialization with `γ₁ = 1 − γ₀`, `λ₁ = 1 − λ₀`.
pub fn average_fidelity_m1(alpha: C64, beta: C64, gamma0: f64, lambda0: f64) -> Result<f64> {
    for p in [gamma0, lambda0] {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid(format!("probability {p} outside [0, 1]")));
        }
    }
    let (a2, b2) = cross_term_weights(alpha, beta);
    closed_form(a2, b2, (gamma0 * lambda0).sqrt(), ((1.0 - gamma0) * (1.0 - lambda0)).sqrt())
}

/// `α|ψ₀⟩|0⟩ + βU|ψ₁⟩|1⟩` on (data, control).
pub fn ideal_state(cc: &ConditionalCircuit, cfg: &DistortionConfig) -> Result<StateVector> {
    let u_psi1 = cc.base.target().apply(&cfg.psi1)?;
    let (p0, p1) = (cfg.psi0.amps(), u_psi1.amps());
    Ok(StateVector::from_amps_unchecked(vec![
        cfg.alpha * p0[0],
        cfg.beta * p1[0],
        cfg.alpha * p0[1],
        cfg.beta * p1[1],
    ]))
}

/// Squared overlap with `ideal` after removing any relative phase between the
/// control branches, and that phase (`arg` of the control-|1⟩ overlap minus
/// `arg` of the control-|0⟩ overlap).
///
/// For circuits with real non-negative branch amplitudes the phase is zero
/// and the value is the plain `|⟨φ|φ_final⟩|²`.
pub fn branch_fidelity(ideal: &StateVector, final_state: &StateVector) -> (f64, f64) {
    let (p, f) = (ideal.amps(), final_state.amps());
    let o0 = p[0].conj() * f[0] + p[2].conj() * f[2];
    let o1 = p[1].conj() * f[1] + p[3].conj() * f[3];
    let fid = (o0.norm() + o1.norm()).powi(2);
    let phase = if o0.norm() > 0.0 && o1.norm() > 0.0 {
        (o1 / o0).arg()
    } else {
        0.0
    };
    (fid, phase)
}

/// One conditional repeat-until-success run.
///
/// Each attempt applies `B′` to `|0^m⟩ ⊗ state` and measures the ancillas; on
/// failure `i` the recovery `R_i†` is applied to the data only where the
/// control reads 1. The returned record's `final_state` is the two-qubit
/// (data, control) register after success.
pub fn simulate_conditional_rus(
    cc: &ConditionalCircuit,
    cfg: &DistortionConfig,
    rng: &mut RngStream,
) -> Result<RunRecord> {
    let outcomes = 1usize << cc.base.m();
    let mut v = cfg.initial_state();
    let mut out = vec![C64::new(0.0, 0.0); 4 * outcomes];
    let mut weights = vec![0.0; outcomes];
    let mut history = Vec::new();
    for _ in 0..cfg.max_attempts {
        cc.b_matrix.apply_leading(&v, &mut out);
        for (i, w) in weights.iter_mut().enumerate() {
            *w = out[4 * i..4 * i + 4].iter().map(C64::norm_sqr).sum();
        }
        let i = sample_index(&weights, rng);
        let scale = 1.0 / weights[i].sqrt();
        for (dst, src) in v.iter_mut().zip(&out[4 * i..4 * i + 4]) {
            *dst = src * scale;
        }
        history.push(i);
        if i == 0 {
            return Ok(RunRecord {
                attempts: history.len(),
                outcomes: history,
                final_state: StateVector::from_amps_unchecked(v.to_vec()),
            });
        }
        let r = &cc.undo[i - 1];
        let (d0, d1) = (v[1], v[3]);
        v[1] = r[0] * d0 + r[1] * d1;
        v[3] = r[2] * d0 + r[3] * d1;
    }
    Err(Error::MaxAttemptsExceeded(cfg.max_attempts))
}

/// Mean branch fidelity over `cfg.trials` independent runs; trial `t` uses
/// substream `t` of `cfg.seed`.
pub fn monte_carlo_fidelity(cc: &ConditionalCircuit, cfg: &DistortionConfig) -> Result<FidelityEstimate> {
    let ideal = ideal_state(cc, cfg)?;
    let samples: Vec<Option<f64>> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = RngStream::substream(cfg.seed, t);
            match simulate_conditional_rus(cc, cfg, &mut rng) {
                Ok(rec) => Ok(Some(branch_fidelity(&ideal, &rec.final_state).0)),
                Err(Error::MaxAttemptsExceeded(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let done: Vec<f64> = samples.iter().flatten().copied().collect();
    let exhausted = samples.len() - done.len();
    if done.is_empty() {
        return Err(Error::MaxAttemptsExceeded(cfg.max_attempts));
    }
    let (mean, std) = mean_std(&done);
    Ok(FidelityEstimate {
        mean,
        std_error: std / (done.len() as f64).sqrt(),
        trials: done.len(),
        exhausted,
    })
}

/// Full distribution `(head, t_1, …, t_{n−1})` where the tail entries are
/// independent uniforms rescaled to sum to `1 − head`.
pub fn random_distribution(outcomes: usize, head: f64, rng: &mut RngStream) -> Vec<f64> {
    let tail: Vec<f64> = (1..outcomes).map(|_| rng.uniform()).collect();
    let total: f64 = tail.iter().sum();
    let mass = 1.0 - head;
    std::iter::once(head)
        .chain(tail.iter().map(|t| if total > 0.0 { t / total * mass } else { mass / (outcomes - 1) as f64 }))
        .collect()
}

/// How the idle-branch success probability γ₀ follows λ₀.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GammaRelation {
    /// γ₀ = 1 (operator B)
    One,
    /// γ₀ = min(1, λ₀(1 + δ))
    Higher,
    /// γ₀ = λ₀(1 − δ)
    Lower,
    /// γ₀ = λ₀
    Equal,
}

impl GammaRelation {
    pub fn id(self) -> &'static str {
        match self {
            GammaRelation::One => "gamma0_one",
            GammaRelation::Higher => "gamma0_higher",
            GammaRelation::Lower => "gamma0_lower",
            GammaRelation::Equal => "gamma0_equal",
        }
    }

    pub fn gamma0(self, lambda0: f64, delta_rel: f64) -> f64 {
        match self {
            GammaRelation::One => 1.0,
            GammaRelation::Higher => (lambda0 * (1.0 + delta_rel)).min(1.0),
            GammaRelation::Lower => lambda0 * (1.0 - delta_rel),
            GammaRelation::Equal => lambda0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Panel {
    Left,
    Right,
}

const FIG1_CURVES: [GammaRelation; 4] =
    [GammaRelation::One, GammaRelation::Higher, GammaRelation::Lower, GammaRelation::Equal];
const FIG3_CURVES: [GammaRelation; 3] = [GammaRelation::One, GammaRelation::Lower, GammaRelation::Equal];

fn equal_superposition() -> (C64, C64) {
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    (h, h)
}

/// Mean and sample deviation of `F̄` over random failure distributions with
/// fixed heads `γ₀` and `λ₀`. Draw `d` uses substream `stream`.
fn random_tail_fidelity(m: usize, gamma0: f64, lambda0: f64, seed: u64, stream: u64) -> (f64, f64) {
    let (alpha, beta) = equal_superposition();
    let mut rng = RngStream::substream(seed, stream);
    let values: Vec<f64> = (0..FIGURE_DRAWS)
        .map(|_| {
            let gammas = random_distribution(1 << m, gamma0, &mut rng);
            let lambdas = random_distribution(1 << m, lambda0, &mut rng);
            average_fidelity_closed(alpha, beta, &gammas, &lambdas).expect("normalized draws")
        })
        .collect();
    mean_std(&values)
}

/// Average fidelity against λ₀ at α = β = 1/√2 with `δ = 0.3`.
///
/// Left: one ancilla, closed form. Right: four ancillas, mean and deviation
/// over [`FIGURE_DRAWS`] random failure distributions per point.
pub fn figure1_data(panel: Panel, seed: u64) -> FigureTable {
    let grid = lambda_grid();
    let (alpha, beta) = equal_superposition();
    let mut rows = Vec::with_capacity(grid.len() * FIG1_CURVES.len());
    for (g, &lambda0) in grid.iter().enumerate() {
        for (c, rel) in FIG1_CURVES.iter().enumerate() {
            let gamma0 = rel.gamma0(lambda0, FIGURE_DELTA_REL);
            let (mean, std, n_samples) = match panel {
                Panel::Left => {
                    (average_fidelity_m1(alpha, beta, gamma0, lambda0).expect("valid point"), 0.0, 1)
                }
                Panel::Right => {
                    let stream = (g * FIG1_CURVES.len() + c) as u64;
                    let (mean, std) = random_tail_fidelity(4, gamma0, lambda0, seed, stream);
                    (mean, std, FIGURE_DRAWS)
                }
            };
            rows.push(FigureRow { x: lambda0, curve_id: rel.id().into(), mean, std, n_samples, seed });
        }
    }
    let (name, m) = match panel {
        Panel::Left => ("fig1-left", 1),
        Panel::Right => ("fig1-right", 4),
    };
    let metadata = json!({
        "figure": name,
        "x": "lambda0",
        "m": m,
        "alpha": [alpha.re, alpha.im],
        "beta": [beta.re, beta.im],
        "delta_rel": FIGURE_DELTA_REL,
        "grid": { "kind": "linear", "lo": 0.02, "hi": 0.98, "points": grid.len() },
        "curves": FIG1_CURVES.iter().map(|c| c.id()).collect::<Vec<_>>(),
        "draws_per_point": if panel == Panel::Right { FIGURE_DRAWS } else { 1 },
        "tail_distribution": if panel == Panel::Right { TAIL_DISTRIBUTION } else { "none" },
        "seed": seed,
    });
    FigureTable { name: name.into(), rows, metadata }
}

/// Average fidelity against the amplified failure probability
/// `ε = 1 − λ₀^{FP}` on a log grid `10⁻⁶ … 10⁻¹`, four ancillas,
/// γ₀ relations {1, (1 − 0.3)λ₀^{FP}, λ₀^{FP}}.
pub fn figure3_data(seed: u64) -> FigureTable {
    let grid = log_grid(1e-6, 1e-1, 50);
    let mut rows = Vec::with_capacity(grid.len() * FIG3_CURVES.len());
    for (g, &eps) in grid.iter().enumerate() {
        let lambda0 = 1.0 - eps;
        for (c, rel) in FIG3_CURVES.iter().enumerate() {
            let gamma0 = rel.gamma0(lambda0, FIGURE_DELTA_REL);
            let stream = (g * FIG3_CURVES.len() + c) as u64;
            let (mean, std) = random_tail_fidelity(4, gamma0, lambda0, seed, stream);
            rows.push(FigureRow {
                x: eps,
                curve_id: rel.id().into(),
                mean,
                std,
                n_samples: FIGURE_DRAWS,
                seed,
            });
        }
    }
    let (alpha, beta) = equal_superposition();
    let metadata = json!({
        "figure": "fig3",
        "x": "epsilon_fp",
        "m": 4,
        "alpha": [alpha.re, alpha.im],
        "beta": [beta.re, beta.im],
        "delta_rel": FIGURE_DELTA_REL,
        "grid": { "kind": "log10", "lo": 1e-6, "hi": 1e-1, "points": grid.len() },
        "curves": FIG3_CURVES.iter().map(|c| c.id()).collect::<Vec<_>>(),
        "draws_per_point": FIGURE_DRAWS,
        "tail_distribution": TAIL_DISTRIBUTION,
        "seed": seed,
    });
    FigureTable { name: "fig3".into(), rows, metadata }
}
