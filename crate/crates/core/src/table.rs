//! CSV rendering for figure datasets.
//!
//! Reals are written with 17 significant digits (`{:.16e}`) so every value
//! round-trips exactly; a header row is always present.

use std::fmt::Write;

use serde_json::Value;

pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// `n` evenly spaced points on `[lo, hi]`, endpoints included.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// `n` logarithmically spaced points on `[lo, hi]`, endpoints included.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    linear_grid(a, b, n).into_iter().map(|e| 10f64.powf(e)).collect()
}

/// λ₀ grid shared by the figure datasets: 50 points on `[0.02, 0.98]`.
pub fn lambda_grid() -> Vec<f64> {
    linear_grid(0.02, 0.98, 50)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FigureRow {
    pub x: f64,
    pub curve_id: String,
    pub mean: f64,
    pub std: f64,
    pub n_samples: usize,
    pub seed: u64,
}

/// A fidelity dataset plus the configuration that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct FigureTable {
    pub name: String,
    pub rows: Vec<FigureRow>,
    pub metadata: Value,
}

impl FigureTable {
    pub const HEADER: &'static str = "x,curve_id,mean,std,n_samples,seed";

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(96 * (self.rows.len() + 1));
        out.push_str(Self::HEADER);
        out.push('\n');
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt_real(r.x),
                r.curve_id,
                fmt_real(r.mean),
                fmt_real(r.std),
                r.n_samples,
                r.seed
            )
            .unwrap();
        }
        out
    }

    pub fn metadata_json(&self) -> String {
        serde_json::to_string_pretty(&self.metadata).expect("metadata serializes")
    }

    pub fn curve(&self, id: &str) -> Vec<&FigureRow> {
        self.rows.iter().filter(|r| r.curve_id == id).collect()
    }
}

/// Sample mean and sample standard deviation (`n − 1` denominator).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, 0.0, -2.5] {
            let s = fmt_real(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_real(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn grids() {
        let g = lambda_grid();
        assert_eq!(g.len(), 50);
        assert_eq!(g[0], 0.02);
        assert!((g[49] - 0.98).abs() < 1e-15);
        let l = log_grid(1e-6, 1e-1, 6);
        for (a, b) in l.iter().zip([1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1]) {
            assert!((a / b - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_layout() {
        let t = FigureTable {
            name: "t".into(),
            rows: vec![FigureRow { x: 0.5, curve_id: "c".into(), mean: 1.0, std: 0.0, n_samples: 3, seed: 9 }],
            metadata: Value::Null,
        };
        assert_eq!(
            t.to_csv(),
            "x,curve_id,mean,std,n_samples,seed\n5.0000000000000000e-1,c,1.0000000000000000e0,0.0000000000000000e0,3,9\n"
        );
    }

    #[test]
    fn sample_statistics() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[7.0]), (7.0, 0.0));
    }
}
