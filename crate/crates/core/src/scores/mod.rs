//! Score functions over per-layer network features.
//!
//! Three families, each evaluated on a [`FeatureBundle`] (the intermediate
//! layer outputs, predicted class and softmax of one input):
//!
//! - Mahalanobis distance to the closest class mean under a tied covariance,
//!   one score per layer;
//! - Gram-matrix deviation from per-class min/max tables, one per layer;
//! - the temperature-scaled energy of the softmax vector.
//!
//! Every exported score is oriented so that larger means more OOD; see
//! [`ScoreKind::orientation`].

mod energy;
mod gram;
mod linalg;
mod mahalanobis;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::score_matrix::ScoreMatrix;

pub use energy::{energy_score, EnergyConfig};
pub use gram::{
    fit_gram, gram_deviation_score, gram_vector, ClassBounds, GramConfig, GramDeviation,
    GramLayerStats, GramStats,
};
pub use mahalanobis::{
    fit_mahalanobis, mahalanobis_score, MahalanobisLayer, MahalanobisStats, Ridge,
};

/// One layer's output: a flat buffer plus its shape.
///
/// For Gram matrices the first axis is treated as channels and the rest is
/// flattened, so a `[c, h, w]` map becomes a `c × (h w)` matrix and a plain
/// `[d]` vector a `d × 1` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Layer {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let layer = Self { shape, data };
        layer.validate(0)?;
        Ok(layer)
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub(crate) fn validate(&self, index: usize) -> Result<()> {
        let expected: usize = self.shape.iter().product();
        if self.shape.is_empty() || expected != self.data.len() {
            return Err(Error::ShapeMismatch(format!(
                "layer {index}: shape {:?} does not match {} values",
                self.shape,
                self.data.len()
            )));
        }
        if let Some(i) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "layer {index}: non-finite feature at position {i}"
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub(crate) fn channels(&self) -> usize {
        self.shape[0]
    }
}

/// Features of one input: layer outputs, optional ground-truth label,
/// predicted class and softmax vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureBundle {
    pub layers: Vec<Layer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_class: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub softmax: Option<Vec<f64>>,
}

impl FeatureBundle {
    pub fn new(layers: Vec<Layer>) -> Self {
        Self {
            layers,
            label: None,
            predicted_class: None,
            softmax: None,
        }
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.label = Some(label);
        self
    }

    pub fn with_prediction(mut self, class: usize) -> Self {
        self.predicted_class = Some(class);
        self
    }

    pub fn with_softmax(mut self, softmax: Vec<f64>) -> Self {
        self.softmax = Some(softmax);
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (i, l) in self.layers.iter().enumerate() {
            l.validate(i)?;
        }
        if let Some(s) = &self.softmax {
            if s.is_empty() {
                return Err(Error::Validation("empty softmax vector".into()));
            }
            let sum: f64 = s.iter().sum();
            if (sum - 1.0).abs() > 1e-6 || s.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::Validation(format!(
                    "softmax entries must be probabilities summing to 1 (sum = {sum})"
                )));
            }
        }
        Ok(())
    }

    pub fn layer_shapes(&self) -> Vec<Vec<usize>> {
        self.layers.iter().map(|l| l.shape.clone()).collect()
    }
}

/// Checks that every bundle has the same layer shapes, returning them.
pub(crate) fn common_shapes(bundles: &[FeatureBundle]) -> Result<Vec<Vec<usize>>> {
    let first = bundles
        .first()
        .ok_or_else(|| Error::Fit("no training features".into()))?;
    let shapes = first.layer_shapes();
    for (n, b) in bundles.iter().enumerate() {
        b.validate()?;
        if b.layer_shapes() != shapes {
            return Err(Error::ShapeMismatch(format!(
                "sample {n} has layer shapes {:?}, expected {shapes:?}",
                b.layer_shapes()
            )));
        }
    }
    Ok(shapes)
}

/// Training labels, requiring every class id in `0..=max` to be present.
pub(crate) fn labels(bundles: &[FeatureBundle]) -> Result<(Vec<usize>, usize)> {
    let labels = bundles
        .iter()
        .enumerate()
        .map(|(i, b)| {
            b.label
                .ok_or_else(|| Error::Fit(format!("training sample {i} has no label")))
        })
        .collect::<Result<Vec<_>>>()?;
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; n_classes];
    for &l in &labels {
        counts[l] += 1;
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::Fit(format!("class {c} has no training samples")));
    }
    Ok((labels, n_classes))
}

/// Which way a score points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    LargerIsOod,
    SmallerIsOod,
}

/// Registry entry for an exported score column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScoreKind {
    Mahalanobis { layer: usize },
    Gram { layer: usize },
    Energy,
}

impl ScoreKind {
    /// Column name: `mahala_L{i}`, `gram_L{i}` (1-based layer) or `energy`.
    pub fn name(&self) -> String {
        match self {
            ScoreKind::Mahalanobis { layer } => format!("mahala_L{}", layer + 1),
            ScoreKind::Gram { layer } => format!("gram_L{}", layer + 1),
            ScoreKind::Energy => "energy".to_string(),
        }
    }

    /// Orientation of the raw score function. The Mahalanobis raw score is the
    /// negative squared distance (larger means closer to a class), so its
    /// exported column is negated.
    pub fn orientation(&self) -> Orientation {
        match self {
            ScoreKind::Mahalanobis { .. } => Orientation::SmallerIsOod,
            ScoreKind::Gram { .. } | ScoreKind::Energy => Orientation::LargerIsOod,
        }
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Everything fitted on training features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub layer_shapes: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mahalanobis: Option<MahalanobisStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gram: Option<GramStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub mahalanobis: Option<Ridge>,
    pub gram: Option<GramConfig>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            mahalanobis: Some(Ridge::default()),
            gram: Some(GramConfig::default()),
        }
    }
}

impl ClassStats {
    pub fn fit(train: &[FeatureBundle], opts: &FitOptions) -> Result<Self> {
        let layer_shapes = common_shapes(train)?;
        let mahalanobis = opts
            .mahalanobis
            .map(|ridge| fit_mahalanobis(train, ridge))
            .transpose()?;
        let gram = opts.gram.as_ref().map(|g| fit_gram(train, g)).transpose()?;
        Ok(Self {
            layer_shapes,
            mahalanobis,
            gram,
        })
    }

    /// Rejects features whose layer shapes differ from the fitted ones.
    pub fn check_compatible(&self, bundle: &FeatureBundle) -> Result<()> {
        bundle.validate()?;
        let shapes = bundle.layer_shapes();
        if shapes != self.layer_shapes {
            return Err(Error::ShapeMismatch(format!(
                "features have layer shapes {shapes:?}, statistics were fitted on {:?}",
                self.layer_shapes
            )));
        }
        Ok(())
    }

    /// Score columns this fit can produce, in export order: Mahalanobis per
    /// layer, Gram per layer, then energy when requested.
    pub fn score_kinds(&self, with_energy: bool) -> Vec<ScoreKind> {
        let layers = self.layer_shapes.len();
        let mut kinds = Vec::new();
        if self.mahalanobis.is_some() {
            kinds.extend((0..layers).map(|layer| ScoreKind::Mahalanobis { layer }));
        }
        if self.gram.is_some() {
            kinds.extend((0..layers).map(|layer| ScoreKind::Gram { layer }));
        }
        if with_energy {
            kinds.push(ScoreKind::Energy);
        }
        kinds
    }

    /// One score, oriented so that larger means more OOD.
    pub fn oriented_score(
        &self,
        kind: ScoreKind,
        bundle: &FeatureBundle,
        energy: &EnergyConfig,
    ) -> Result<f64> {
        let raw = match kind {
            ScoreKind::Mahalanobis { layer } => {
                let stats = self
                    .mahalanobis
                    .as_ref()
                    .ok_or_else(|| Error::config("Mahalanobis statistics were not fitted"))?;
                mahalanobis_score(stats, bundle, layer)?
            }
            ScoreKind::Gram { layer } => {
                let stats = self
                    .gram
                    .as_ref()
                    .ok_or_else(|| Error::config("Gram statistics were not fitted"))?;
                gram_deviation_score(stats, bundle, layer)?.score
            }
            ScoreKind::Energy => {
                let s = bundle
                    .softmax
                    .as_ref()
                    .ok_or_else(|| Error::config("energy score needs a softmax vector"))?;
                energy_score(s, energy)?
            }
        };
        Ok(match kind.orientation() {
            Orientation::LargerIsOod => raw,
            Orientation::SmallerIsOod => -raw,
        })
    }

    /// Scores a batch of inputs into a matrix with registry column names.
    pub fn score_matrix(
        &self,
        bundles: &[FeatureBundle],
        kinds: &[ScoreKind],
        energy: &EnergyConfig,
    ) -> Result<ScoreMatrix> {
        let rows = bundles
            .iter()
            .map(|b| {
                self.check_compatible(b)?;
                kinds
                    .iter()
                    .map(|&k| self.oriented_score(k, b, energy))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        ScoreMatrix::new(kinds.iter().map(ScoreKind::name).collect(), rows)
    }
}
