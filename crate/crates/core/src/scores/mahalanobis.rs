use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::linalg::Cholesky;
use super::{common_shapes, labels, FeatureBundle};

/// Diagonal loading added to the pooled covariance before factoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Ridge {
    /// `λ = scale · trace(Σ) / d`.
    Relative(f64),
    /// Fixed `λ`.
    Absolute(f64),
}

impl Default for Ridge {
    fn default() -> Self {
        Ridge::Relative(1e-6)
    }
}

impl Ridge {
    fn lambda(self, cov: &[f64], dim: usize) -> f64 {
        match self {
            Ridge::Relative(s) => {
                let trace: f64 = (0..dim).map(|i| cov[i * dim + i]).sum();
                s * trace / dim as f64
            }
            Ridge::Absolute(l) => l,
        }
    }
}

/// Class means and tied covariance of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLayer", into = "RawLayer")]
pub struct MahalanobisLayer {
    dim: usize,
    class_means: Vec<Vec<f64>>,
    covariance: Vec<f64>,
    lambda: f64,
    factor: Cholesky,
}

#[derive(Serialize, Deserialize)]
struct RawLayer {
    dim: usize,
    class_means: Vec<Vec<f64>>,
    /// Row-major, ridge already included.
    covariance: Vec<f64>,
    lambda: f64,
}

impl TryFrom<RawLayer> for MahalanobisLayer {
    type Error = Error;
    fn try_from(raw: RawLayer) -> Result<Self> {
        if raw.covariance.len() != raw.dim * raw.dim
            || raw.class_means.iter().any(|m| m.len() != raw.dim)
        {
            return Err(Error::ShapeMismatch(format!(
                "Mahalanobis layer of dimension {} has inconsistent arrays",
                raw.dim
            )));
        }
        let factor = Cholesky::factor(&raw.covariance, raw.dim)?;
        Ok(Self {
            dim: raw.dim,
            class_means: raw.class_means,
            covariance: raw.covariance,
            lambda: raw.lambda,
            factor,
        })
    }
}

impl From<MahalanobisLayer> for RawLayer {
    fn from(l: MahalanobisLayer) -> Self {
        RawLayer {
            dim: l.dim,
            class_means: l.class_means,
            covariance: l.covariance,
            lambda: l.lambda,
        }
    }
}

impl MahalanobisLayer {
    pub fn class_means(&self) -> &[Vec<f64>] {
        &self.class_means
    }

    /// Row-major `d × d` covariance including the ridge.
    pub fn covariance(&self) -> &[f64] {
        &self.covariance
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `max_c −(x − μ_c)ᵀ Σ⁻¹ (x − μ_c)`.
    pub fn score(&self, x: &[f64]) -> f64 {
        let mut diff = vec![0.0; self.dim];
        self.class_means
            .iter()
            .map(|mu| {
                for ((d, xi), mi) in diff.iter_mut().zip(x).zip(mu) {
                    *d = xi - mi;
                }
                -self.factor.inv_quad_form(&diff)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MahalanobisStats {
    pub ridge: Ridge,
    pub layers: Vec<MahalanobisLayer>,
}

/// Class-wise means and the pooled within-class covariance (divided by the
/// total sample count) for every layer, plus a ridge.
pub fn fit_mahalanobis(train: &[FeatureBundle], ridge: Ridge) -> Result<MahalanobisStats> {
    let shapes = common_shapes(train)?;
    let (labels, n_classes) = labels(train)?;
    let mut counts = vec![0usize; n_classes];
    for &l in &labels {
        counts[l] += 1;
    }
    if let Some(c) = counts.iter().position(|&n| n < 2) {
        return Err(Error::Fit(format!(
            "class {c} has {} training sample(s); at least 2 are required",
            counts[c]
        )));
    }
    let n = train.len() as f64;
    let layers = (0..shapes.len())
        .map(|li| {
            let dim = train[0].layers[li].dim();
            let mut means = vec![vec![0.0; dim]; n_classes];
            for (b, &c) in train.iter().zip(&labels) {
                for (m, v) in means[c].iter_mut().zip(&b.layers[li].data) {
                    *m += v;
                }
            }
            for (m, &cnt) in means.iter_mut().zip(&counts) {
                m.iter_mut().for_each(|v| *v /= cnt as f64);
            }
            let mut cov = vec![0.0; dim * dim];
            let mut diff = vec![0.0; dim];
            for (b, &c) in train.iter().zip(&labels) {
                for ((d, x), m) in diff.iter_mut().zip(&b.layers[li].data).zip(&means[c]) {
                    *d = x - m;
                }
                for i in 0..dim {
                    for j in 0..=i {
                        cov[i * dim + j] += diff[i] * diff[j];
                    }
                }
            }
            for i in 0..dim {
                for j in 0..=i {
                    let v = cov[i * dim + j] / n;
                    cov[i * dim + j] = v;
                    cov[j * dim + i] = v;
                }
            }
            let lambda = ridge.lambda(&cov, dim);
            for i in 0..dim {
                cov[i * dim + i] += lambda;
            }
            let factor =
                Cholesky::factor(&cov, dim).map_err(|e| Error::Fit(format!("layer {li}: {e}")))?;
            Ok(MahalanobisLayer {
                dim,
                class_means: means,
                covariance: cov,
                lambda,
                factor,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MahalanobisStats { ridge, layers })
}

/// Raw Mahalanobis score of one layer: the largest negative squared
/// distance to a class mean. Always `<= 0`.
pub fn mahalanobis_score(
    stats: &MahalanobisStats,
    features: &FeatureBundle,
    layer: usize,
) -> Result<f64> {
    let fitted = stats
        .layers
        .get(layer)
        .ok_or_else(|| Error::config(format!("layer {layer} has no Mahalanobis fit")))?;
    let x = &features
        .layers
        .get(layer)
        .ok_or_else(|| Error::config(format!("features have no layer {layer}")))?
        .data;
    if x.len() != fitted.dim {
        return Err(Error::ShapeMismatch(format!(
            "layer {layer} has {} features, fitted on {}",
            x.len(),
            fitted.dim
        )));
    }
    Ok(fitted.score(x))
}
