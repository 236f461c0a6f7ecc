//! Dense symmetric positive-definite helpers, row-major `d × d`.

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Cholesky {
    dim: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    pub(crate) fn factor(a: &[f64], dim: usize) -> Result<Self> {
        debug_assert_eq!(a.len(), dim * dim);
        let mut l = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..=i {
                let mut sum = a[i * dim + j];
                for k in 0..j {
                    sum -= l[i * dim + k] * l[j * dim + k];
                }
                if i == j {
                    if sum <= 0.0 || !sum.is_finite() {
                        return Err(Error::Fit(format!(
                            "covariance is not positive definite (pivot {i} = {sum:e})"
                        )));
                    }
                    l[i * dim + i] = sum.sqrt();
                } else {
                    l[i * dim + j] = sum / l[j * dim + j];
                }
            }
        }
        Ok(Self { dim, lower: l })
    }

    /// `vᵀ A⁻¹ v` via forward substitution `L y = v`, returning `‖y‖²`.
    pub(crate) fn inv_quad_form(&self, v: &[f64]) -> f64 {
        let d = self.dim;
        let mut y = vec![0.0; d];
        let mut acc = 0.0;
        for i in 0..d {
            let mut s = v[i];
            for k in 0..i {
                s -= self.lower[i * d + k] * y[k];
            }
            y[i] = s / self.lower[i * d + i];
            acc += y[i] * y[i];
        }
        acc
    }
}
