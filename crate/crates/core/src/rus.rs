//! Repeat-until-success circuits: synthesis of the unitary `A`, the stochastic
//! repeat loop with recovery, and the inverse construction.
//!
//! A circuit acts on `m` ancillas followed by one data qubit and satisfies
//!
//! ```text
//! A |0^m⟩|ψ⟩ = Σ_i √λ_i |i⟩ W_i |ψ⟩,   W_0 = U,  W_i = R_i (i > 0)
//! ```
//!
//! Outcome 0 on the ancillas flags success; any other outcome `i` leaves
//! `R_i|ψ⟩` on the data, which the loop undoes with `R_i†` before retrying.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::qcore::{
    complete_isometry, sample_index, StateVector, UnitaryMatrix, C64, NORM_TOL, UNITARY_TOL,
};
use crate::rng::RngStream;

/// Default cap on attempts in [`run_rus`] callers that have no better bound.
pub const DEFAULT_MAX_ATTEMPTS: usize = 10_000;

/// Below this an outcome is treated as impossible when extracting recoveries.
const NEGLIGIBLE_PROBABILITY: f64 = 1e-14;

/// Parameters of a single-qubit RUS construction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RusSpec {
    pub m: usize,
    pub lambdas: Vec<f64>,
    pub target: UnitaryMatrix,
    pub recoveries: Vec<UnitaryMatrix>,
    pub seed: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RusSpecDoc {
    m: usize,
    lambdas: Vec<f64>,
    target: UnitaryMatrix,
    #[serde(default)]
    recoveries: Option<Vec<UnitaryMatrix>>,
    #[serde(default)]
    seed: u64,
}

pub(crate) fn check_distribution(p: &[f64]) -> Result<()> {
    let sum: f64 = p.iter().sum();
    let min = p.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min >= 0.0) || !((sum - 1.0).abs() <= NORM_TOL) {
        return Err(Error::InvalidDistribution { sum, min });
    }
    Ok(())
}

impl RusSpec {
    pub fn new(
        m: usize,
        lambdas: Vec<f64>,
        target: UnitaryMatrix,
        recoveries: Vec<UnitaryMatrix>,
        seed: u64,
    ) -> Result<Self> {
        if m == 0 || m > 10 {
            return Err(invalid(format!("ancilla count {m} outside 1..=10")));
        }
        let outcomes = 1usize << m;
        if lambdas.len() != outcomes {
            return Err(Error::DimensionMismatch { expected: outcomes, actual: lambdas.len() });
        }
        check_distribution(&lambdas)?;
        if target.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, actual: target.dim() });
        }
        if recoveries.len() != outcomes - 1 {
            return Err(Error::DimensionMismatch { expected: outcomes - 1, actual: recoveries.len() });
        }
        if let Some(r) = recoveries.iter().find(|r| r.dim() != 2) {
            return Err(Error::DimensionMismatch { expected: 2, actual: r.dim() });
        }
        Ok(Self { m, lambdas, target, recoveries, seed })
    }

    /// Spec whose failure branches all leave the data untouched (`R_i = I`).
    pub fn with_identity_recoveries(
        m: usize,
        lambdas: Vec<f64>,
        target: UnitaryMatrix,
        seed: u64,
    ) -> Result<Self> {
        let n = (1usize << m).saturating_sub(1);
        Self::new(m, lambdas, target, vec![UnitaryMatrix::identity(2); n], seed)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: RusSpecDoc = serde_json::from_str(text)?;
        let n = (1usize << doc.m.min(10)).saturating_sub(1);
        let recoveries = doc.recoveries.unwrap_or_else(|| vec![UnitaryMatrix::identity(2); n]);
        Self::new(doc.m, doc.lambdas, doc.target, recoveries, doc.seed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn lambda0(&self) -> f64 {
        self.lambdas[0]
    }

    /// `W_i`: the target for outcome 0, the recovery gate `R_i` otherwise.
    pub fn branch_gate(&self, outcome: usize) -> &UnitaryMatrix {
        if outcome == 0 {
            &self.target
        } else {
            &self.recoveries[outcome - 1]
        }
    }
}

/// An explicit RUS unitary together with the parameters it realizes.
///
/// Circuits derived by amplitude amplification keep the original target and
/// recoveries; their branch amplitudes may then carry phases, but each
/// failure block stays proportional to `R_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct RusCircuit {
    spec: RusSpec,
    a_matrix: UnitaryMatrix,
}

/// Record of one repeat-until-success execution.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    /// Ancilla outcomes in order; the last one is 0.
    pub outcomes: Vec<usize>,
    pub attempts: usize,
    /// Register left after success (data qubit, plus control if any).
    pub final_state: StateVector,
}

impl RusCircuit {
    pub fn spec(&self) -> &RusSpec {
        &self.spec
    }

    pub fn a_matrix(&self) -> &UnitaryMatrix {
        &self.a_matrix
    }

    pub fn m(&self) -> usize {
        self.spec.m
    }

    pub fn lambda0(&self) -> f64 {
        self.spec.lambda0()
    }

    pub fn target(&self) -> &UnitaryMatrix {
        &self.spec.target
    }

    /// The 2×2 data block `⟨i|A|0^m⟩`, row-major.
    pub fn branch_block(&self, outcome: usize) -> Vec<C64> {
        self.a_matrix.sub_block(2 * outcome, 0, 2)
    }

    /// Circuit with the same target and recoveries but a new unitary, with
    /// branch probabilities read off the new matrix.
    pub(crate) fn with_matrix(&self, a_matrix: UnitaryMatrix) -> RusCircuit {
        let lambdas = (0..1usize << self.spec.m)
            .map(|i| block_weight(&a_matrix.sub_block(2 * i, 0, 2)))
            .collect();
        RusCircuit {
            spec: RusSpec { lambdas, ..self.spec.clone() },
            a_matrix,
        }
    }
}

/// `‖B‖_F² / 2` for a 2×2 block `B`; equals `λ` when `B = √λ·W` with `W` unitary.
fn block_weight(block: &[C64]) -> f64 {
    block.iter().map(C64::norm_sqr).sum::<f64>() / 2.0
}

fn mat2_mul(a: &[C64], b: &[C64]) -> [C64; 4] {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

/// Builds `A` realizing the spec.
///
/// `A = (⊕_i W_i)(O ⊗ I)(⊕_k V_k)` with `V_0 = I`: `O` is the seeded
/// completion of the column `(√λ_i)_i` and `V_k` (k > 0) are seeded random
/// single-qubit unitaries. The `|0^m⟩` columns are then exactly
/// `Σ_i √λ_i |i⟩ W_i|d⟩`, and the adjoint has the same branch structure.
pub fn build_rus_unitary(spec: &RusSpec) -> Result<RusCircuit> {
    let outcomes = 1usize << spec.m;
    let mut rng = RngStream::new(spec.seed);
    let first: Vec<C64> = spec.lambdas.iter().map(|l| C64::new(l.sqrt(), 0.0)).collect();
    let mixer = complete_isometry(&[first], outcomes, &mut rng)?;
    let mut inputs = vec![UnitaryMatrix::identity(2)];
    inputs.extend((1..outcomes).map(|_| UnitaryMatrix::random(2, &mut rng)));

    let dim = 2 * outcomes;
    let mut entries = vec![C64::new(0.0, 0.0); dim * dim];
    for i in 0..outcomes {
        let w = spec.branch_gate(i);
        for (k, v) in inputs.iter().enumerate() {
            let o = mixer.get(i, k);
            let wv = if k == 0 {
                [w.get(0, 0), w.get(0, 1), w.get(1, 0), w.get(1, 1)]
            } else {
                mat2_mul(w.entries(), v.entries())
            };
            for r in 0..2 {
                for s in 0..2 {
                    entries[(2 * i + r) * dim + 2 * k + s] = o * wv[2 * r + s];
                }
            }
        }
    }
    let a_matrix = UnitaryMatrix::from_entries_unchecked(dim, entries);
    let residual = a_matrix.unitarity_residual();
    if residual > UNITARY_TOL {
        return Err(Error::NotUnitary { residual });
    }
    Ok(RusCircuit { spec: spec.clone(), a_matrix })
}

fn require_single_qubit(psi: &StateVector) -> Result<()> {
    if psi.num_qubits() != 1 {
        return Err(Error::DimensionMismatch { expected: 2, actual: psi.dim() });
    }
    Ok(())
}

/// `A(|0^m⟩ ⊗ ψ)`
pub fn prepare(c: &RusCircuit, psi: &StateVector) -> Result<StateVector> {
    require_single_qubit(psi)?;
    c.a_matrix.apply(&psi.with_zero_ancillas(c.m()))
}

/// `‖Π A(|0^m⟩⊗ψ)‖²` with `Π = |0^m⟩⟨0^m| ⊗ I`.
pub fn success_probability(c: &RusCircuit, psi: &StateVector) -> Result<f64> {
    Ok(prepare(c, psi)?.block_probability(c.m(), 0))
}

/// `⟨0^m| ⟨ψ|U† · A|0^m⟩|ψ⟩`: the complex amplitude on the desired state.
pub fn success_amplitude(c: &RusCircuit, psi: &StateVector) -> Result<C64> {
    let out = prepare(c, psi)?;
    let ideal = c.target().apply(psi)?;
    Ok(ideal.amps().iter().zip(out.block(c.m(), 0)).map(|(a, b)| a.conj() * b).sum())
}

/// Repeats `A` with fresh ancillas until outcome 0, undoing failure `i` with
/// `R_i†` on the data qubit.
pub fn run_rus(
    c: &RusCircuit,
    psi: &StateVector,
    rng: &mut RngStream,
    max_attempts: usize,
) -> Result<RunRecord> {
    require_single_qubit(psi)?;
    if max_attempts == 0 {
        return Err(invalid("max_attempts must be at least 1"));
    }
    let m = c.m();
    let outcomes = 1usize << m;
    let undo: Vec<UnitaryMatrix> = c.spec.recoveries.iter().map(UnitaryMatrix::adjoint).collect();
    let mut data = [psi.amps()[0], psi.amps()[1]];
    let mut out = vec![C64::new(0.0, 0.0); 2 * outcomes];
    let mut weights = vec![0.0; outcomes];
    let mut record = Vec::new();

    for _ in 0..max_attempts {
        c.a_matrix.apply_leading(&data, &mut out);
        for (i, w) in weights.iter_mut().enumerate() {
            *w = out[2 * i].norm_sqr() + out[2 * i + 1].norm_sqr();
        }
        let i = sample_index(&weights, rng);
        let scale = 1.0 / weights[i].sqrt();
        data = [out[2 * i] * scale, out[2 * i + 1] * scale];
        record.push(i);
        if i == 0 {
            return Ok(RunRecord {
                attempts: record.len(),
                outcomes: record,
                final_state: StateVector::from_amps_unchecked(data.to_vec()),
            });
        }
        let r = undo[i - 1].entries();
        data = [r[0] * data[0] + r[1] * data[1], r[2] * data[0] + r[3] * data[1]];
    }
    Err(Error::MaxAttemptsExceeded(max_attempts))
}

/// The RUS construction of `U†` given by `A†`.
///
/// Branch probabilities and recoveries of the inverse are read off the
/// `|0^m⟩` columns of `A†`; each failure block must be proportional to a
/// unitary, which holds for every circuit produced by [`build_rus_unitary`].
pub fn inverse_rus(c: &RusCircuit) -> Result<RusCircuit> {
    let a_inv = c.a_matrix.adjoint();
    let outcomes = 1usize << c.m();
    let mut lambdas = Vec::with_capacity(outcomes);
    let mut recoveries = Vec::with_capacity(outcomes - 1);
    for i in 0..outcomes {
        let block = a_inv.sub_block(2 * i, 0, 2);
        let weight = block_weight(&block);
        lambdas.push(weight);
        if i == 0 {
            continue;
        }
        if weight <= NEGLIGIBLE_PROBABILITY {
            recoveries.push(UnitaryMatrix::identity(2));
        } else {
            let scale = 1.0 / weight.sqrt();
            recoveries.push(UnitaryMatrix::new(2, block.iter().map(|z| z * scale).collect())?);
        }
    }
    let spec = RusSpec::new(c.m(), lambdas, c.target().adjoint(), recoveries, c.spec.seed)?;
    Ok(RusCircuit { spec, a_matrix: a_inv })
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use crate::qcore::fidelity;

    fn pi_block_residual(c: &RusCircuit, psi: &StateVector) -> f64 {
        let out = prepare(c, psi).unwrap();
        let ideal = c.target().apply(psi).unwrap();
        let s = c.lambda0().sqrt();
        out.block(c.m(), 0)
            .iter()
            .zip(ideal.amps())
            .map(|(a, b)| (a - b * s).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn deterministic_limit() {
        let mut rng = RngStream::new(1);
        let u = UnitaryMatrix::random(2, &mut rng);
        let spec = RusSpec::with_identity_recoveries(1, vec![1.0, 0.0], u.clone(), 3).unwrap();
        let c = build_rus_unitary(&spec).unwrap();
        for r in 0..2 {
            for s in 0..2 {
                assert_eq!(c.a_matrix().get(r, s), u.get(r, s));
            }
        }
        let psi = StateVector::random(1, &mut rng);
        assert!((success_probability(&c, &psi).unwrap() - 1.0).abs() < 1e-12);
        for _ in 0..20 {
            assert_eq!(run_rus(&c, &psi, &mut rng, 1).unwrap().attempts, 1);
        }
    }

    #[test]
    fn quarter_probability_x_target() {
        let spec = RusSpec::with_identity_recoveries(
            1,
            vec![0.25, 0.75],
            UnitaryMatrix::pauli_x(),
            8,
        )
        .unwrap();
        let c = build_rus_unitary(&spec).unwrap();
        let mut rng = RngStream::new(2);
        for _ in 0..10 {
            let psi = StateVector::random(1, &mut rng);
            // ⟨0|⊗⟨ψ|U† · A(|0⟩|ψ⟩) by direct matrix-vector evaluation
            let amp = success_amplitude(&c, &psi).unwrap();
            assert!((amp - C64::new(0.5, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn two_ancilla_success_probability() {
        let mut rng = RngStream::new(5);
        let spec = RusSpec::with_identity_recoveries(
            2,
            vec![0.4, 0.2, 0.2, 0.2],
            UnitaryMatrix::random(2, &mut rng),
            17,
        )
        .unwrap();
        let c = build_rus_unitary(&spec).unwrap();
        for _ in 0..10 {
            let psi = StateVector::random(1, &mut rng);
            let p = prepare(&c, &psi).unwrap().block_probability(2, 0);
            assert!((p - 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn success_probability_examples() {
        let c = random_circuit(1, 0.25, 4);
        let p0 = success_probability(&c, &StateVector::basis(1, 0)).unwrap();
        assert!((p0 - 0.25).abs() < 1e-12);
        let mut rng = RngStream::new(6);
        for _ in 0..100 {
            let psi = StateVector::random(1, &mut rng);
            assert!((success_probability(&c, &psi).unwrap() - 0.25).abs() <= 1e-12);
        }
        assert!(success_probability(&c, &StateVector::basis(2, 0)).is_err());
    }

    #[test]
    fn block_structure_for_random_specs() {
        let mut rng = RngStream::new(123);
        for k in 0..50 {
            let m = 1 + k % 4;
            let lambda0 = 0.01 + 0.98 * rng.uniform();
            let c = random_circuit(m, lambda0, 1000 + k as u64);
            assert!(c.a_matrix().unitarity_residual() <= UNITARY_TOL);
            for _ in 0..20 {
                let psi = StateVector::random(1, &mut rng);
                assert!(pi_block_residual(&c, &psi) <= 1e-10);
                // every failure branch is √λ_i R_i|ψ⟩
                let out = prepare(&c, &psi).unwrap();
                for i in 1..1usize << m {
                    let ideal = c.spec().recoveries[i - 1].apply(&psi).unwrap();
                    let s = c.spec().lambdas[i].sqrt();
                    let err: f64 = out
                        .block(m, i)
                        .iter()
                        .zip(ideal.amps())
                        .map(|(a, b)| (a - b * s).norm())
                        .sum();
                    assert!(err <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn spec_validation() {
        let u = UnitaryMatrix::identity(2);
        assert!(matches!(
            RusSpec::with_identity_recoveries(1, vec![0.5, 0.6], u.clone(), 0),
            Err(Error::InvalidDistribution { .. })
        ));
        assert!(RusSpec::with_identity_recoveries(1, vec![1.2, -0.2], u.clone(), 0).is_err());
        assert!(RusSpec::with_identity_recoveries(2, vec![0.5, 0.5], u.clone(), 0).is_err());
        assert!(RusSpec::new(1, vec![0.5, 0.5], UnitaryMatrix::identity(4), vec![u], 0).is_err());
    }

    #[test]
    fn json_round_trip_and_defaults() {
        let c = random_circuit(2, 0.3, 9);
        let text = c.spec().to_json();
        let back = RusSpec::from_json(&text).unwrap();
        assert_eq!(&back, c.spec());

        let doc = r#"{"m":1,"lambdas":[0.5,0.5],"target":[[0,0],[1,0],[1,0],[0,0]],"seed":4}"#;
        let spec = RusSpec::from_json(doc).unwrap();
        assert_eq!(spec.recoveries, vec![UnitaryMatrix::identity(2)]);
        assert_eq!(spec.target, UnitaryMatrix::pauli_x());

        let bad = r#"{"m":1,"lambdas":[0.5,0.5],"target":[[1,0],[1,0],[1,0],[0,0]]}"#;
        assert!(RusSpec::from_json(bad).is_err());
    }

    #[test]
    fn run_ends_in_target_state() {
        let c = random_circuit(2, 0.3, 21);
        let mut rng = RngStream::new(22);
        for _ in 0..500 {
            let psi = StateVector::random(1, &mut rng);
            let rec = run_rus(&c, &psi, &mut rng, DEFAULT_MAX_ATTEMPTS).unwrap();
            assert_eq!(*rec.outcomes.last().unwrap(), 0);
            assert!(rec.outcomes[..rec.attempts - 1].iter().all(|&i| i != 0));
            assert_eq!(rec.outcomes.len(), rec.attempts);
            let ideal = c.target().apply(&psi).unwrap();
            assert!((fidelity(&rec.final_state, &ideal).unwrap() - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn run_reports_exhaustion() {
        let spec = RusSpec::with_identity_recoveries(1, vec![0.0, 1.0], UnitaryMatrix::identity(2), 0)
            .unwrap();
        let c = build_rus_unitary(&spec).unwrap();
        let mut rng = RngStream::new(0);
        let err = run_rus(&c, &StateVector::basis(1, 0), &mut rng, 5);
        assert!(matches!(err, Err(Error::MaxAttemptsExceeded(5))));
        assert!(run_rus(&c, &StateVector::basis(1, 0), &mut rng, 0).is_err());
    }

    #[test]
    fn attempts_are_geometric() {
        let c = random_circuit(1, 0.5, 31);
        let psi = StateVector::plus();
        let mut rng = RngStream::new(32);
        let n = 100_000;
        let samples: Vec<usize> = (0..n)
            .map(|_| run_rus(&c, &psi, &mut rng, DEFAULT_MAX_ATTEMPTS).unwrap().attempts)
            .collect();
        let mean = samples.iter().sum::<usize>() as f64 / n as f64;
        let var = samples.iter().map(|&k| (k as f64 - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        // Geometric(0.5): mean 2, variance 2; sd of the mean √(2/n), of the
        // sample variance √((μ4 − σ⁴)/n) with μ4 = 26 for p = 1/2.
        let mean_sigma = (2.0 / n as f64).sqrt();
        let var_sigma = ((26.0 - 4.0) / n as f64).sqrt();
        assert!((mean - 2.0).abs() <= 3.0 * mean_sigma, "mean {mean}");
        assert!((var - 2.0).abs() <= 3.0 * var_sigma, "var {var}");

        // Kolmogorov-Smirnov distance to the geometric CDF.
        let max_k = *samples.iter().max().unwrap();
        let mut counts = vec![0usize; max_k + 1];
        for &k in &samples {
            counts[k] += 1;
        }
        let mut cum = 0usize;
        let mut ks = 0.0f64;
        for (k, &cnt) in counts.iter().enumerate().skip(1) {
            cum += cnt;
            let cdf = 1.0 - 0.5f64.powi(k as i32);
            ks = ks.max((cum as f64 / n as f64 - cdf).abs());
        }
        assert!(ks <= 0.01, "ks {ks}");
    }

    #[test]
    fn inverse_keeps_success_probability() {
        let c = random_circuit(1, 0.3, 41);
        let inv = inverse_rus(&c).unwrap();
        assert_eq!(inv.target(), &c.target().adjoint());
        let mut rng = RngStream::new(42);
        for _ in 0..20 {
            let psi = StateVector::random(1, &mut rng);
            assert!((success_probability(&inv, &psi).unwrap() - 0.3).abs() <= 1e-12);
        }
        assert!((inv.lambda0() - 0.3).abs() <= 1e-12);
    }

    #[test]
    fn inverse_then_original_is_identity() {
        for (m, seed) in [(1usize, 51u64), (3, 52)] {
            let c = random_circuit(m, 0.4, seed);
            let inv = inverse_rus(&c).unwrap();
            let mut rng = RngStream::new(seed + 100);
            for _ in 0..200 {
                let psi = StateVector::random(1, &mut rng);
                let mid = run_rus(&inv, &psi, &mut rng, DEFAULT_MAX_ATTEMPTS).unwrap();
                let end = run_rus(&c, &mid.final_state, &mut rng, DEFAULT_MAX_ATTEMPTS).unwrap();
                assert!((fidelity(&end.final_state, &psi).unwrap() - 1.0).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn inverse_of_inverse_matches_original() {
        let c = random_circuit(2, 0.35, 61);
        let back = inverse_rus(&inverse_rus(&c).unwrap()).unwrap();
        assert!(back.a_matrix().max_abs_diff(c.a_matrix()) <= 1e-10);
        for (a, b) in back.spec().lambdas.iter().zip(&c.spec().lambdas) {
            assert!((a - b).abs() <= 1e-10);
        }
        for i in 0..4 {
            let d: f64 = back
                .branch_block(i)
                .iter()
                .zip(c.branch_block(i))
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max);
            assert!(d <= 1e-10);
        }
    }
}
