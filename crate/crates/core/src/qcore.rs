//! Dense complex linear algebra for small registers.
//!
//! Register order is big-endian and shared by every module: ancillas first,
//! then the data qubit, then (when present) the control qubit. The amplitude
//! of `|a⟩|d⟩|c⟩` therefore lives at index `(a << 2) | (d << 1) | c`, and
//! without a control at `(a << 1) | d`.

use std::fmt;
use std::ops::Mul;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rng::RngStream;

pub type C64 = Complex64;

/// Tolerance on `Σ|amp|² = 1` for validated states.
pub const NORM_TOL: f64 = 1e-12;
/// Tolerance on `‖M†M − I‖_max` and on orthonormality of isometry columns.
pub const UNITARY_TOL: f64 = 1e-10;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

fn log2_exact(n: usize) -> Option<usize> {
    (n >= 2 && n.is_power_of_two()).then(|| n.trailing_zeros() as usize)
}

/// Normalized amplitude vector over `num_qubits` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<C64>,
}

impl StateVector {
    /// Validates length (a power of two, at least one qubit) and normalization.
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        let num_qubits = log2_exact(amps.len()).ok_or_else(|| {
            Error::InvalidParameter(format!("state length {} is not 2^n with n >= 1", amps.len()))
        })?;
        let norm_sqr: f64 = amps.iter().map(C64::norm_sqr).sum();
        if !((norm_sqr - 1.0).abs() <= NORM_TOL) {
            return Err(Error::NotNormalized { norm_sqr });
        }
        Ok(Self { num_qubits, amps })
    }

    /// Rescales `amps` to unit norm.
    pub fn normalized(amps: Vec<C64>) -> Result<Self> {
        let norm = amps.iter().map(C64::norm_sqr).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::NotNormalized { norm_sqr: norm * norm });
        }
        Self::new(amps.into_iter().map(|a| a / norm).collect())
    }

    pub(crate) fn from_amps_unchecked(amps: Vec<C64>) -> Self {
        let num_qubits = amps.len().trailing_zeros() as usize;
        Self { num_qubits, amps }
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(num_qubits: usize, index: usize) -> Self {
        assert!(num_qubits >= 1 && index < (1 << num_qubits));
        let mut amps = vec![ZERO; 1 << num_qubits];
        amps[index] = ONE;
        Self { num_qubits, amps }
    }

    /// `(|0⟩ + |1⟩)/√2`
    pub fn plus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self { num_qubits: 1, amps: vec![C64::new(h, 0.0), C64::new(h, 0.0)] }
    }

    /// Haar-random state (normalized complex Gaussian vector).
    pub fn random(num_qubits: usize, rng: &mut RngStream) -> Self {
        let amps: Vec<C64> = (0..1usize << num_qubits)
            .map(|_| C64::new(rng.normal(), rng.normal()))
            .collect();
        let norm = amps.iter().map(C64::norm_sqr).sum::<f64>().sqrt();
        Self::from_amps_unchecked(amps.into_iter().map(|a| a / norm).collect())
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(C64::norm_sqr).sum()
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: other.dim() });
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// Kronecker product `self ⊗ other`; `self` occupies the leading qubits.
    pub fn tensor(&self, other: &StateVector) -> StateVector {
        let amps = self
            .amps
            .iter()
            .flat_map(|a| other.amps.iter().map(move |b| a * b))
            .collect();
        StateVector { num_qubits: self.num_qubits + other.num_qubits, amps }
    }

    /// `|0^m⟩ ⊗ self`
    pub fn with_zero_ancillas(&self, m: usize) -> StateVector {
        let mut amps = vec![ZERO; self.dim() << m];
        amps[..self.dim()].copy_from_slice(&self.amps);
        StateVector { num_qubits: self.num_qubits + m, amps }
    }

    /// Squared norm of the block in which the leading `m` qubits read `outcome`.
    pub fn block_probability(&self, m: usize, outcome: usize) -> f64 {
        let rest = self.dim() >> m;
        self.amps[outcome * rest..(outcome + 1) * rest].iter().map(C64::norm_sqr).sum()
    }

    /// The unnormalized amplitudes of the trailing register given that the
    /// leading `m` qubits read `outcome`.
    pub fn block(&self, m: usize, outcome: usize) -> &[C64] {
        let rest = self.dim() >> m;
        &self.amps[outcome * rest..(outcome + 1) * rest]
    }
}

/// Unitary matrix of dimension `2^n`, stored row-major.
#[derive(Clone, PartialEq)]
pub struct UnitaryMatrix {
    dim: usize,
    entries: Vec<C64>,
}

impl fmt::Debug for UnitaryMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "UnitaryMatrix({}x{})", self.dim, self.dim)?;
        for r in 0..self.dim {
            let row: Vec<String> = self
                .row(r)
                .iter()
                .map(|z| format!("{:+.6}{:+.6}i", z.re, z.im))
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl UnitaryMatrix {
    /// Validates shape and unitarity to [`UNITARY_TOL`].
    pub fn new(dim: usize, entries: Vec<C64>) -> Result<Self> {
        if log2_exact(dim).is_none() {
            return Err(Error::InvalidParameter(format!("dimension {dim} is not 2^n with n >= 1")));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, actual: entries.len() });
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParameter("non-finite matrix entry".into()));
        }
        let m = Self { dim, entries };
        let residual = m.unitarity_residual();
        if !(residual <= UNITARY_TOL) {
            return Err(Error::NotUnitary { residual });
        }
        Ok(m)
    }

    pub(crate) fn from_entries_unchecked(dim: usize, entries: Vec<C64>) -> Self {
        debug_assert_eq!(entries.len(), dim * dim);
        Self { dim, entries }
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![ZERO; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = ONE;
        }
        Self { dim, entries }
    }

    /// Diagonal matrix; each entry must have unit modulus.
    pub fn diagonal(diag: &[C64]) -> Result<Self> {
        let dim = diag.len();
        let mut entries = vec![ZERO; dim * dim];
        for (i, d) in diag.iter().enumerate() {
            entries[i * dim + i] = *d;
        }
        Self::new(dim, entries)
    }

    pub fn hadamard() -> Self {
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self { dim: 2, entries: vec![h, h, h, -h] }
    }

    pub fn pauli_x() -> Self {
        Self { dim: 2, entries: vec![ZERO, ONE, ONE, ZERO] }
    }

    pub fn pauli_y() -> Self {
        let i = C64::i();
        Self { dim: 2, entries: vec![ZERO, -i, i, ZERO] }
    }

    pub fn pauli_z() -> Self {
        Self { dim: 2, entries: vec![ONE, ZERO, ZERO, -ONE] }
    }

    /// `exp(-i·angle·Y)`
    pub fn exp_y(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            dim: 2,
            entries: vec![C64::new(c, 0.0), C64::new(-s, 0.0), C64::new(s, 0.0), C64::new(c, 0.0)],
        }
    }

    /// Haar-random unitary of the given dimension.
    pub fn random(dim: usize, rng: &mut RngStream) -> Self {
        complete_isometry(&[], dim, rng).expect("empty column set is trivially orthonormal")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_qubits(&self) -> usize {
        self.dim.trailing_zeros() as usize
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.entries[row * self.dim + col]
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.entries[r * self.dim..(r + 1) * self.dim]
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.dim).map(|r| self.get(r, c)).collect()
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut entries = vec![ZERO; n * n];
        for r in 0..n {
            for c in 0..n {
                entries[c * n + r] = self.entries[r * n + c].conj();
            }
        }
        Self { dim: n, entries }
    }

    /// `‖M†M − I‖_max`
    pub fn unitarity_residual(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let mut acc = ZERO;
                for r in 0..n {
                    acc += self.entries[r * n + i].conj() * self.entries[r * n + j];
                }
                if i == j {
                    acc -= ONE;
                }
                worst = worst.max(acc.norm());
            }
        }
        worst
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &UnitaryMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn tensor(&self, other: &UnitaryMatrix) -> UnitaryMatrix {
        let (n, k) = (self.dim, other.dim);
        let dim = n * k;
        let mut entries = vec![ZERO; dim * dim];
        for r1 in 0..n {
            for c1 in 0..n {
                let a = self.entries[r1 * n + c1];
                if a == ZERO {
                    continue;
                }
                for r2 in 0..k {
                    for c2 in 0..k {
                        entries[(r1 * k + r2) * dim + c1 * k + c2] = a * other.entries[r2 * k + c2];
                    }
                }
            }
        }
        UnitaryMatrix { dim, entries }
    }

    pub fn apply(&self, s: &StateVector) -> Result<StateVector> {
        if s.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: s.dim() });
        }
        let mut out = vec![ZERO; self.dim];
        self.apply_leading(&s.amps, &mut out);
        Ok(StateVector::from_amps_unchecked(out))
    }

    /// `out = M · (v ⊕ 0)`, i.e. only the first `v.len()` columns contribute.
    pub(crate) fn apply_leading(&self, v: &[C64], out: &mut [C64]) {
        let n = self.dim;
        debug_assert!(v.len() <= n && out.len() == n);
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.entries[r * n..r * n + v.len()];
            *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }

    /// Copies the `size × size` block starting at (`row0`, `col0`).
    pub(crate) fn sub_block(&self, row0: usize, col0: usize, size: usize) -> Vec<C64> {
        let mut out = Vec::with_capacity(size * size);
        for r in row0..row0 + size {
            out.extend_from_slice(&self.entries[r * self.dim + col0..r * self.dim + col0 + size]);
        }
        out
    }
}

impl Mul for &UnitaryMatrix {
    type Output = UnitaryMatrix;

    fn mul(self, rhs: &UnitaryMatrix) -> UnitaryMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix product dimension mismatch");
        let n = self.dim;
        let mut entries = vec![ZERO; n * n];
        for r in 0..n {
            for k in 0..n {
                let a = self.entries[r * n + k];
                if a == ZERO {
                    continue;
                }
                let dst = &mut entries[r * n..(r + 1) * n];
                for (d, b) in dst.iter_mut().zip(&rhs.entries[k * n..(k + 1) * n]) {
                    *d += a * b;
                }
            }
        }
        UnitaryMatrix { dim: n, entries }
    }
}

impl Serialize for UnitaryMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = self.entries.iter().map(|z| [z.re, z.im]).collect();
        pairs.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for UnitaryMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(deserializer)?;
        let dim = (pairs.len() as f64).sqrt().round() as usize;
        let entries = pairs.into_iter().map(|[re, im]| C64::new(re, im)).collect();
        UnitaryMatrix::new(dim, entries).map_err(serde::de::Error::custom)
    }
}

/// Outcome of measuring the leading ancilla qubits.
#[derive(Clone, Debug)]
pub struct Measurement {
    pub outcome: usize,
    /// Full register after collapse, renormalized.
    pub collapsed: StateVector,
    pub probability: f64,
}

/// Samples an outcome index from unnormalized block weights.
pub(crate) fn sample_index(weights: &[f64], rng: &mut RngStream) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.uniform() * total;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = i;
            if u < w {
                return i;
            }
        }
        u -= w;
    }
    last_positive
}

/// Projective measurement of the leading `m` qubits in the computational basis.
pub fn measure_ancillas(s: &StateVector, m: usize, rng: &mut RngStream) -> Result<Measurement> {
    if m == 0 || m >= s.num_qubits() {
        return Err(Error::InvalidParameter(format!(
            "cannot measure {m} ancillas of a {}-qubit state",
            s.num_qubits()
        )));
    }
    let weights: Vec<f64> = (0..1usize << m).map(|i| s.block_probability(m, i)).collect();
    let outcome = sample_index(&weights, rng);
    let probability = weights[outcome];
    let rest = s.dim() >> m;
    let scale = 1.0 / probability.sqrt();
    let mut amps = vec![ZERO; s.dim()];
    for (dst, src) in amps[outcome * rest..(outcome + 1) * rest].iter_mut().zip(s.block(m, outcome)) {
        *dst = src * scale;
    }
    Ok(Measurement {
        outcome,
        collapsed: StateVector::from_amps_unchecked(amps),
        probability,
    })
}

/// Extends orthonormal `cols` to a full unitary of size `dim`.
///
/// The given columns are copied verbatim into the leading positions; the
/// remaining columns come from Gaussian random vectors orthonormalized by
/// modified Gram-Schmidt with one reorthogonalization pass.
pub fn complete_isometry(cols: &[Vec<C64>], dim: usize, rng: &mut RngStream) -> Result<UnitaryMatrix> {
    if log2_exact(dim).is_none() {
        return Err(Error::InvalidParameter(format!("dimension {dim} is not 2^n with n >= 1")));
    }
    if cols.len() > dim {
        return Err(Error::DimensionMismatch { expected: dim, actual: cols.len() });
    }
    for c in cols {
        if c.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: c.len() });
        }
    }
    let mut residual = 0.0f64;
    for (i, a) in cols.iter().enumerate() {
        for (j, b) in cols.iter().enumerate().skip(i) {
            let mut g: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
            if i == j {
                g -= ONE;
            }
            residual = residual.max(g.norm());
        }
    }
    if !(residual <= UNITARY_TOL) {
        return Err(Error::NotOrthonormal { residual });
    }

    let mut basis: Vec<Vec<C64>> = cols.to_vec();
    while basis.len() < dim {
        let mut v: Vec<C64> = (0..dim).map(|_| C64::new(rng.normal(), rng.normal())).collect();
        for _ in 0..2 {
            for q in &basis {
                let proj: C64 = q.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= proj * qi;
                }
            }
        }
        let norm = v.iter().map(C64::norm_sqr).sum::<f64>().sqrt();
        // A draw almost inside the current span is rejected and redrawn.
        if norm < 1e-6 {
            continue;
        }
        basis.push(v.into_iter().map(|x| x / norm).collect());
    }

    let mut entries = vec![ZERO; dim * dim];
    for (c, col) in basis.iter().enumerate() {
        for (r, z) in col.iter().enumerate() {
            entries[r * dim + c] = *z;
        }
    }
    Ok(UnitaryMatrix::from_entries_unchecked(dim, entries))
}

/// `|⟨a|b⟩|²`
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr())
}

/// `|⟨a|b⟩|²` on raw amplitude slices of equal length.
#[cfg(test)]
pub(crate) fn overlap_sqr(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C64>().norm_sqr()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn identity_leaves_state_unchanged() {
        let mut rng = RngStream::new(1);
        let s = StateVector::random(3, &mut rng);
        let out = UnitaryMatrix::identity(8).apply(&s).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn hadamard_on_zero() {
        let out = UnitaryMatrix::hadamard().apply(&StateVector::basis(1, 0)).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((out.amps()[0] - c(h, 0.0)).norm() < 1e-15);
        assert!((out.amps()[1] - c(h, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn sign_flip_on_zero_ancilla_block() {
        // (I − 2|0⟩⟨0|) ⊗ I for one ancilla
        let s_pi = UnitaryMatrix::diagonal(&[-ONE, -ONE, ONE, ONE]).unwrap();
        let mut rng = RngStream::new(2);
        let psi = StateVector::random(1, &mut rng);
        let input = psi.with_zero_ancillas(1);
        let out = s_pi.apply(&input).unwrap();
        for (o, i) in out.amps().iter().zip(input.amps()) {
            assert!((o + i).norm() < 1e-15);
        }
    }

    #[test]
    fn apply_rejects_wrong_dimension() {
        let err = UnitaryMatrix::identity(4).apply(&StateVector::basis(1, 0));
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn tensor_examples() {
        let i2 = UnitaryMatrix::identity(2);
        assert_eq!(i2.tensor(&i2), UnitaryMatrix::identity(4));

        let zi = UnitaryMatrix::pauli_z().tensor(&i2);
        let expected = UnitaryMatrix::diagonal(&[ONE, ONE, -ONE, -ONE]).unwrap();
        assert_eq!(zi, expected);

        let zz = UnitaryMatrix::pauli_z().tensor(&UnitaryMatrix::pauli_z());
        let out = zz.apply(&StateVector::basis(2, 3)).unwrap();
        assert_eq!(out.amps()[3], ONE);
    }

    #[test]
    fn new_rejects_non_unitary() {
        let err = UnitaryMatrix::new(2, vec![ONE, ONE, ZERO, ONE]);
        assert!(matches!(err, Err(Error::NotUnitary { .. })));
        assert!(UnitaryMatrix::new(3, vec![ONE; 9]).is_err());
    }

    #[test]
    fn state_requires_normalization() {
        assert!(matches!(
            StateVector::new(vec![ONE, ONE]),
            Err(Error::NotNormalized { .. })
        ));
        assert!(StateVector::new(vec![ONE]).is_err());
        assert!(StateVector::normalized(vec![ONE, ONE]).is_ok());
    }

    #[test]
    fn fidelity_examples() {
        let zero = StateVector::basis(1, 0);
        let one = StateVector::basis(1, 1);
        assert_eq!(fidelity(&zero, &zero).unwrap(), 1.0);
        assert_eq!(fidelity(&zero, &one).unwrap(), 0.0);
        assert!((fidelity(&zero, &StateVector::plus()).unwrap() - 0.5).abs() < 1e-15);
        assert!(fidelity(&zero, &StateVector::basis(2, 0)).is_err());
    }

    #[test]
    fn measuring_prepared_ancilla_is_certain() {
        let mut rng = RngStream::new(3);
        let psi = StateVector::random(1, &mut rng);
        let s = psi.with_zero_ancillas(1);
        for _ in 0..100 {
            let m = measure_ancillas(&s, 1, &mut rng).unwrap();
            assert_eq!(m.outcome, 0);
            assert!((m.probability - 1.0).abs() < 1e-12);
            assert!((fidelity(&m.collapsed, &s).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn measure_rejects_bad_ancilla_count() {
        let mut rng = RngStream::new(3);
        let s = StateVector::basis(2, 0);
        assert!(measure_ancillas(&s, 2, &mut rng).is_err());
        assert!(measure_ancillas(&s, 0, &mut rng).is_err());
    }

    #[test]
    fn uniform_two_ancilla_histogram() {
        // |++⟩|0⟩: four equiprobable ancilla outcomes.
        let h = UnitaryMatrix::hadamard();
        let prep = h.tensor(&h).tensor(&UnitaryMatrix::identity(2));
        let s = prep.apply(&StateVector::basis(3, 0)).unwrap();

        // Exhaustive enumeration of block norms.
        let expected: Vec<f64> = (0..4).map(|i| s.block_probability(2, i)).collect();
        for p in &expected {
            assert!((p - 0.25).abs() < 1e-15);
        }

        let n = 100_000;
        let mut counts = [0usize; 4];
        let mut rng = RngStream::new(11);
        for _ in 0..n {
            let m = measure_ancillas(&s, 2, &mut rng).unwrap();
            assert!((m.probability - 0.25).abs() < 1e-15);
            counts[m.outcome] += 1;
        }
        let chi2: f64 = counts
            .iter()
            .zip(&expected)
            .map(|(&o, &p)| {
                let e = p * n as f64;
                (o as f64 - e).powi(2) / e
            })
            .sum();
        // 99.9% quantile of χ² with 3 degrees of freedom.
        assert!(chi2 < 16.266, "chi2 = {chi2}");
    }

    #[test]
    fn measurement_frequencies_within_four_sigma() {
        let mut rng = RngStream::new(5);
        let s = StateVector::random(3, &mut rng);
        let probs: Vec<f64> = (0..4).map(|i| s.block_probability(2, i)).collect();
        let n = 100_000usize;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[measure_ancillas(&s, 2, &mut rng).unwrap().outcome] += 1;
        }
        for (&k, &p) in counts.iter().zip(&probs) {
            let sigma = (n as f64 * p * (1.0 - p)).sqrt();
            assert!((k as f64 - n as f64 * p).abs() <= 4.0 * sigma);
        }
    }

    #[test]
    fn completion_of_full_basis_is_identity() {
        let cols: Vec<Vec<C64>> = (0..4).map(|i| StateVector::basis(2, i).amps().to_vec()).collect();
        let mut rng = RngStream::new(0);
        let u = complete_isometry(&cols, 4, &mut rng).unwrap();
        assert_eq!(u, UnitaryMatrix::identity(4));
    }

    #[test]
    fn completion_keeps_given_column() {
        let col = vec![ONE, ZERO, ZERO, ZERO];
        let mut rng = RngStream::new(9);
        let u = complete_isometry(std::slice::from_ref(&col), 4, &mut rng).unwrap();
        assert_eq!(u.column(0), col);
        assert!(u.unitarity_residual() <= UNITARY_TOL);
    }

    #[test]
    fn completion_differs_across_seeds_but_not_on_given_columns() {
        let mut rng = RngStream::new(4);
        let cols: Vec<Vec<C64>> = {
            let u = UnitaryMatrix::random(8, &mut rng);
            (0..3).map(|c| u.column(c)).collect()
        };
        let a = complete_isometry(&cols, 8, &mut RngStream::new(100)).unwrap();
        let b = complete_isometry(&cols, 8, &mut RngStream::new(200)).unwrap();
        for (c, col) in cols.iter().enumerate() {
            assert_eq!(&a.column(c), col);
            assert_eq!(&b.column(c), col);
        }
        assert!(a.max_abs_diff(&b) > 1e-3);
        let a2 = complete_isometry(&cols, 8, &mut RngStream::new(100)).unwrap();
        assert_eq!(a, a2);
    }

    #[test]
    fn completion_rejects_non_orthonormal_columns() {
        let cols = vec![vec![ONE, ZERO], vec![ONE, ZERO]];
        let err = complete_isometry(&cols, 2, &mut RngStream::new(0));
        assert!(matches!(err, Err(Error::NotOrthonormal { .. })));
    }

    #[test]
    fn hundred_random_constructions_are_unitary() {
        let mut rng = RngStream::new(77);
        for k in 0..100 {
            let dim = 2 << (k % 5);
            let u = UnitaryMatrix::random(dim, &mut rng);
            assert!(u.unitarity_residual() <= UNITARY_TOL);
            let p = &u * &UnitaryMatrix::random(dim, &mut rng).adjoint();
            assert!(p.unitarity_residual() <= UNITARY_TOL);
        }
    }

    #[test]
    fn serde_round_trip() {
        let u = UnitaryMatrix::random(4, &mut RngStream::new(3));
        let json = serde_json::to_string(&u).unwrap();
        let back: UnitaryMatrix = serde_json::from_str(&json).unwrap();
        assert_eq!(u, back);
        assert!(serde_json::from_str::<UnitaryMatrix>("[[1,0],[1,0],[0,0],[1,0]]").is_err());
    }

    proptest! {
        #[test]
        fn apply_preserves_norm(seed in any::<u64>(), n in 1usize..6) {
            let mut rng = RngStream::new(seed);
            let u = UnitaryMatrix::random(1 << n, &mut rng);
            let s = StateVector::random(n, &mut rng);
            let out = u.apply(&s).unwrap();
            prop_assert!((out.norm_sqr() - 1.0).abs() <= NORM_TOL);
        }

        #[test]
        fn fidelity_is_a_probability(seed in any::<u64>(), n in 1usize..5) {
            let mut rng = RngStream::new(seed);
            let a = StateVector::random(n, &mut rng);
            let b = StateVector::random(n, &mut rng);
            let f = fidelity(&a, &b).unwrap();
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&f));
        }
    }
}
