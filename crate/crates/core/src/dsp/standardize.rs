use serde::{Deserialize, Serialize};

/// Per-dimension z-scoring fitted over a set of row-major matrices.
///
/// Dimensions with (near) zero variance keep unit scale so they map to 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Fits over every row of every `(data, cols)` matrix. Returns `None`
    /// when there are no rows.
    pub fn fit<'a>(matrices: impl IntoIterator<Item = &'a [f64]>, cols: usize) -> Option<Self> {
        let mut count = 0usize;
        let mut sum = vec![0.0; cols];
        let mut mats = Vec::new();
        for m in matrices {
            for row in m.chunks_exact(cols) {
                count += 1;
                for (s, v) in sum.iter_mut().zip(row) {
                    *s += v;
                }
            }
            mats.push(m);
        }
        if count == 0 || cols == 0 {
            return None;
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        let mut var = vec![0.0; cols];
        for m in mats {
            for row in m.chunks_exact(cols) {
                for ((acc, v), mu) in var.iter_mut().zip(row).zip(&mean) {
                    *acc += (v - mu) * (v - mu);
                }
            }
        }
        let std = var
            .iter()
            .map(|v| {
                let s = (v / count as f64).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Some(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, data: &[f64]) -> Vec<f64> {
        let cols = self.dim();
        data.chunks_exact(cols)
            .flat_map(|row| row.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardized_columns_have_zero_mean_unit_var() {
        let a = [1.0, 10.0, 3.0, 10.0];
        let b = [5.0, 10.0];
        let s = Standardizer::fit([&a[..], &b[..]], 2).unwrap();
        assert_eq!(s.mean, vec![3.0, 10.0]);
        assert_eq!(s.std[1], 1.0);
        let out = s.apply(&[1.0, 10.0, 3.0, 10.0, 5.0, 10.0]);
        let col0: Vec<f64> = out.iter().step_by(2).copied().collect();
        let m: f64 = col0.iter().sum::<f64>() / 3.0;
        let v: f64 = col0.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 3.0;
        assert!(m.abs() < 1e-12 && (v - 1.0).abs() < 1e-12);
        assert!(out.iter().skip(1).step_by(2).all(|&x| x == 0.0));
    }

    #[test]
    fn empty_input_has_no_fit() {
        assert!(Standardizer::fit(std::iter::empty::<&[f64]>(), 3).is_none());
    }
}
