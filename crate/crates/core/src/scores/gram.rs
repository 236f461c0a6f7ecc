use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{common_shapes, labels, FeatureBundle, Layer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramConfig {
    /// Gram orders `p`.
    pub powers: Vec<u32>,
    /// Share of each class held out to estimate the per-layer normalizer.
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl Default for GramConfig {
    fn default() -> Self {
        Self {
            powers: (1..=10).collect(),
            holdout_fraction: 0.1,
            seed: 0,
        }
    }
}

/// Per-class bounds for one layer: `mins[p][j]`, `maxs[p][j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassBounds {
    pub mins: Vec<Vec<f64>>,
    pub maxs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramLayerStats {
    /// Indexed by class id.
    pub classes: Vec<ClassBounds>,
    /// Mean total deviation of held-out in-distribution samples; 1 when no
    /// held-out sample is available or every held-out deviation is zero.
    pub normalizer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramStats {
    pub powers: Vec<u32>,
    pub layers: Vec<GramLayerStats>,
}

/// Score of one layer together with how many deviation terms fell back to
/// an unnormalized difference because the violated bound was zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GramDeviation {
    pub score: f64,
    pub unnormalized_terms: usize,
}

fn check_nonnegative(layer: &Layer, index: usize) -> Result<()> {
    if let Some(pos) = layer.data.iter().position(|&v| v < 0.0) {
        return Err(Error::Validation(format!(
            "layer {index} has a negative feature ({}) at position {pos}; \
             Gram features must be non-negative",
            layer.data[pos]
        )));
    }
    Ok(())
}

/// Flattened upper triangle (row-major, diagonal included) of
/// `(F^p (F^p)ᵀ)^{1/p}`, where the layer is viewed as a `channels × rest`
/// matrix `F` and powers are element-wise.
pub fn gram_vector(layer: &Layer, power: u32) -> Vec<f64> {
    let rows = layer.channels();
    let cols = layer.data.len() / rows;
    let p = power as i32;
    let fp: Vec<f64> = layer.data.iter().map(|v| v.powi(p)).collect();
    let inv = 1.0 / power as f64;
    let mut out = Vec::with_capacity(rows * (rows + 1) / 2);
    for i in 0..rows {
        let ri = &fp[i * cols..(i + 1) * cols];
        for j in i..rows {
            let rj = &fp[j * cols..(j + 1) * cols];
            let dot: f64 = ri.iter().zip(rj).map(|(a, b)| a * b).sum();
            out.push(dot.powf(inv));
        }
    }
    out
}

fn deviation(v: f64, lo: f64, hi: f64, unnormalized: &mut usize) -> f64 {
    if v < lo {
        if lo == 0.0 {
            *unnormalized += 1;
            lo - v
        } else {
            (lo - v) / lo.abs()
        }
    } else if v > hi {
        if hi == 0.0 {
            *unnormalized += 1;
            v - hi
        } else {
            (v - hi) / hi.abs()
        }
    } else {
        0.0
    }
}

/// `Σ_{p,j} δ(p, j)` of one layer against one class's bounds, before
/// normalization.
fn total_deviation(
    layer: &Layer,
    bounds: &ClassBounds,
    powers: &[u32],
    unnormalized: &mut usize,
) -> f64 {
    powers
        .iter()
        .enumerate()
        .map(|(pi, &p)| {
            gram_vector(layer, p)
                .iter()
                .zip(&bounds.mins[pi])
                .zip(&bounds.maxs[pi])
                .map(|((&v, &lo), &hi)| deviation(v, lo, hi, unnormalized))
                .sum::<f64>()
        })
        .sum()
}

/// Per-class, per-layer, per-power min/max of every Gram entry, plus the
/// per-layer normalizer estimated on a stratified, seeded held-out split.
pub fn fit_gram(train: &[FeatureBundle], cfg: &GramConfig) -> Result<GramStats> {
    if cfg.powers.is_empty() || cfg.powers.contains(&0) {
        return Err(Error::config(
            "Gram powers must be a non-empty list of positive integers",
        ));
    }
    if !(0.0..1.0).contains(&cfg.holdout_fraction) {
        return Err(Error::config(format!(
            "Gram holdout fraction must lie in [0, 1), got {}",
            cfg.holdout_fraction
        )));
    }
    let shapes = common_shapes(train)?;
    for b in train {
        for (i, l) in b.layers.iter().enumerate() {
            check_nonnegative(l, i)?;
        }
    }
    let (labels, n_classes) = labels(train)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut fit_idx: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    let mut held_out = Vec::new();
    for (c, fit) in fit_idx.iter_mut().enumerate() {
        let mut members: Vec<usize> = (0..train.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(&mut rng);
        let hold = (members.len() as f64 * cfg.holdout_fraction).floor() as usize;
        held_out.extend_from_slice(&members[..hold]);
        *fit = members[hold..].to_vec();
        fit.sort_unstable();
    }
    held_out.sort_unstable();

    let layers = (0..shapes.len())
        .map(|li| {
            let classes: Vec<ClassBounds> = fit_idx
                .iter()
                .map(|members| {
                    let mut mins = Vec::with_capacity(cfg.powers.len());
                    let mut maxs = Vec::with_capacity(cfg.powers.len());
                    for &p in &cfg.powers {
                        let mut lo: Vec<f64> = Vec::new();
                        let mut hi: Vec<f64> = Vec::new();
                        for &i in members {
                            let g = gram_vector(&train[i].layers[li], p);
                            if lo.is_empty() {
                                lo = g.clone();
                                hi = g;
                            } else {
                                for ((l, h), v) in lo.iter_mut().zip(hi.iter_mut()).zip(g) {
                                    *l = l.min(v);
                                    *h = h.max(v);
                                }
                            }
                        }
                        mins.push(lo);
                        maxs.push(hi);
                    }
                    ClassBounds { mins, maxs }
                })
                .collect();
            let mut sum = 0.0;
            let mut unused = 0;
            for &i in &held_out {
                sum += total_deviation(
                    &train[i].layers[li],
                    &classes[labels[i]],
                    &cfg.powers,
                    &mut unused,
                );
            }
            let mean = if held_out.is_empty() {
                0.0
            } else {
                sum / held_out.len() as f64
            };
            GramLayerStats {
                classes,
                normalizer: if mean > 0.0 { mean } else { 1.0 },
            }
        })
        .collect();
    Ok(GramStats {
        powers: cfg.powers.clone(),
        layers,
    })
}

/// Total Gram deviation of one layer with respect to the predicted class,
/// divided by the layer normalizer.
///
/// An entry below the class minimum contributes `(min − v) / |min|`, above
/// the maximum `(v − max) / |max|`, and nothing inside `[min, max]`.
pub fn gram_deviation_score(
    stats: &GramStats,
    features: &FeatureBundle,
    layer: usize,
) -> Result<GramDeviation> {
    let fitted = stats
        .layers
        .get(layer)
        .ok_or_else(|| Error::config(format!("layer {layer} has no Gram fit")))?;
    let class = features
        .predicted_class
        .ok_or_else(|| Error::config("Gram score needs the predicted class"))?;
    let bounds = fitted.classes.get(class).ok_or_else(|| {
        Error::config(format!("predicted class {class} was not seen in training"))
    })?;
    let l = features
        .layers
        .get(layer)
        .ok_or_else(|| Error::config(format!("features have no layer {layer}")))?;
    check_nonnegative(l, layer)?;
    let mut unnormalized_terms = 0;
    let total = total_deviation(l, bounds, &stats.powers, &mut unnormalized_terms);
    Ok(GramDeviation {
        score: total / fitted.normalizer,
        unnormalized_terms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bounds(lo: f64, hi: f64) -> GramStats {
        GramStats {
            powers: vec![1],
            layers: vec![GramLayerStats {
                classes: vec![ClassBounds {
                    mins: vec![vec![lo]],
                    maxs: vec![vec![hi]],
                }],
                normalizer: 1.0,
            }],
        }
    }

    fn scalar(v: f64) -> FeatureBundle {
        // a 1×1 layer has the single Gram entry v²
        FeatureBundle::new(vec![Layer::vector(vec![v.sqrt()])]).with_prediction(0)
    }

    #[test]
    fn hand_deviations() {
        let s = bounds(1.0, 2.0);
        let below = gram_deviation_score(&s, &scalar(0.5), 0).unwrap();
        assert!((below.score - 0.5).abs() < 1e-12);
        let above = gram_deviation_score(&s, &scalar(3.0), 0).unwrap();
        assert!((above.score - 0.5).abs() < 1e-12);
        let inside = gram_deviation_score(&s, &scalar(1.5), 0).unwrap();
        assert_eq!(inside.score, 0.0);
        assert_eq!(inside.unnormalized_terms, 0);
    }

    #[test]
    fn zero_bound_falls_back_to_difference() {
        let s = bounds(0.0, 0.0);
        let d = gram_deviation_score(&s, &scalar(0.25), 0).unwrap();
        assert!((d.score - 0.25).abs() < 1e-12);
        assert_eq!(d.unnormalized_terms, 1);
    }

    #[test]
    fn scalar_gram_is_square_for_every_power() {
        let l = Layer::vector(vec![1.7]);
        for p in 1..=10 {
            let g = gram_vector(&l, p);
            assert_eq!(g.len(), 1);
            assert!((g[0] - 1.7 * 1.7).abs() < 1e-12, "p = {p}: {}", g[0]);
        }
    }

    #[test]
    fn upper_triangle_layout() {
        // F = [[1, 2], [3, 4]] (2 channels × 2 positions), p = 1
        let l = Layer::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(gram_vector(&l, 1), vec![5.0, 11.0, 25.0]);
    }

    #[test]
    fn single_sample_per_class_has_zero_self_deviation() {
        let train = vec![
            FeatureBundle::new(vec![Layer::new(
                vec![2, 3],
                vec![0.1, 0.5, 2.0, 1.0, 0.0, 0.3],
            )
            .unwrap()])
            .with_label(0),
            FeatureBundle::new(vec![Layer::new(
                vec![2, 3],
                vec![1.1, 0.2, 0.0, 0.4, 0.9, 0.7],
            )
            .unwrap()])
            .with_label(1),
        ];
        let cfg = GramConfig {
            holdout_fraction: 0.0,
            ..GramConfig::default()
        };
        let stats = fit_gram(&train, &cfg).unwrap();
        for (c, b) in train.iter().enumerate() {
            let bounds = &stats.layers[0].classes[c];
            assert_eq!(bounds.mins, bounds.maxs);
            let probe = b.clone().with_prediction(c);
            assert_eq!(gram_deviation_score(&stats, &probe, 0).unwrap().score, 0.0);
        }
        assert_eq!(stats.layers[0].normalizer, 1.0);
    }

    #[test]
    fn negative_features_rejected() {
        let train = vec![FeatureBundle::new(vec![Layer::vector(vec![1.0, -0.5])]).with_label(0)];
        match fit_gram(&train, &GramConfig::default()) {
            Err(Error::Validation(msg)) => assert!(msg.contains("layer 0")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_prediction() {
        let s = bounds(1.0, 2.0);
        let b = FeatureBundle::new(vec![Layer::vector(vec![1.0])]);
        assert!(matches!(
            gram_deviation_score(&s, &b, 0),
            Err(Error::Config(_))
        ));
    }
}
