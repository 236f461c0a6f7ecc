//! Seeded Monte Carlo harness.
//!
//! # Random streams
//!
//! Trials are grouped into fixed batches of [`BATCH`] trials. Batch `b` of a
//! run keyed by `key` draws from `ChaCha8Rng::seed_from_u64(key)` with its
//! stream id set to `b`. Workers only decide which thread runs which batch,
//! so every report is bit-identical for any worker count. Runs that involve
//! a [`SyntheticModel`] use `key = split(seed, model.seed)` where `split` is
//! the SplitMix64 finalizer applied to `seed ^ splitmix(model.seed)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conformal::{conditional_exceedance_probability, CalibrationSet};
use crate::error::{Error, Result};
use crate::multiple_testing::{DetectorConfig, OodDetector};
use crate::numerics::{normal_sf, normal_sf_inv, Probability};
use crate::score_matrix::ScoreMatrix;

/// Trials per random stream.
pub const BATCH: u64 = 4096;

/// Smallest trial count accepted by the two-score tests.
pub const MIN_TRIALS: u64 = 1000;

const CAL_STREAM: u64 = u64::MAX;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Key of the random streams for a run seed combined with a model seed.
pub fn split_seed(seed: u64, model_seed: u64) -> u64 {
    splitmix(seed ^ splitmix(model_seed))
}

/// Stream `stream` of the generator keyed by `key`.
pub fn stream_rng(key: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(stream);
    rng
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers == 0 {
        return Err(Error::config("workers must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config(format!("cannot start {workers} workers: {e}")))
}

/// Runs `n_trials` Bernoulli trials in batches and returns the number of
/// successes. `trial` is called once per trial with the batch's generator.
fn count_hits<F>(n_trials: u64, key: u64, workers: usize, trial: F) -> Result<u64>
where
    F: Fn(&mut ChaCha8Rng) -> bool + Sync,
{
    let n_batches = n_trials.div_ceil(BATCH);
    pool(workers)?.install(|| {
        Ok((0..n_batches)
            .into_par_iter()
            .map(|b| {
                let mut rng = stream_rng(key, b);
                let len = BATCH.min(n_trials - b * BATCH);
                (0..len).filter(|_| trial(&mut rng)).count() as u64
            })
            .sum())
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub estimate: f64,
    /// `sqrt(estimate (1 - estimate) / n_trials)`.
    pub stderr: f64,
    pub n_trials: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_calibration_estimates: Option<Vec<f64>>,
}

impl MonteCarloReport {
    pub fn from_counts(hits: u64, n_trials: u64) -> Self {
        let estimate = hits as f64 / n_trials as f64;
        Self {
            estimate,
            stderr: (estimate * (1.0 - estimate) / n_trials as f64).sqrt(),
            n_trials,
            per_calibration_estimates: None,
        }
    }
}

/// Distribution of a `K`-vector of synthetic scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelKind {
    /// `N(0, I)`.
    IidNormal,
    /// `N(mean, cov)` with `cov` row-major and positive semidefinite.
    CorrelatedNormal { mean: Vec<f64>, cov: Vec<f64> },
    /// Mixture of `N(mean_c, I)` with the given weights.
    Mixture {
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticModel {
    pub kind: ModelKind,
    pub k: usize,
    pub seed: u64,
}

impl SyntheticModel {
    pub fn iid_normal(k: usize, seed: u64) -> Result<Self> {
        Self {
            kind: ModelKind::IidNormal,
            k,
            seed,
        }
        .validated()
    }

    /// `N(mean, I)`.
    pub fn shifted(mean: Vec<f64>, seed: u64) -> Result<Self> {
        let k = mean.len();
        let mut cov = vec![0.0; k * k];
        for i in 0..k {
            cov[i * k + i] = 1.0;
        }
        Self::correlated_normal(mean, cov, seed)
    }

    pub fn correlated_normal(mean: Vec<f64>, cov: Vec<f64>, seed: u64) -> Result<Self> {
        Self {
            k: mean.len(),
            kind: ModelKind::CorrelatedNormal { mean, cov },
            seed,
        }
        .validated()
    }

    pub fn mixture(weights: Vec<f64>, means: Vec<Vec<f64>>, seed: u64) -> Result<Self> {
        let k = means.first().map_or(0, Vec::len);
        Self {
            kind: ModelKind::Mixture { weights, means },
            k,
            seed,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        self.sampler()?;
        Ok(self)
    }

    fn sampler(&self) -> Result<Sampler> {
        let k = self.k;
        if k == 0 {
            return Err(Error::config("synthetic model needs K >= 1"));
        }
        match &self.kind {
            ModelKind::IidNormal => Ok(Sampler::Iid { k }),
            ModelKind::CorrelatedNormal { mean, cov } => {
                if mean.len() != k || cov.len() != k * k {
                    return Err(Error::ShapeMismatch(format!(
                        "K = {k} needs a {k}-vector mean and a {k}x{k} covariance"
                    )));
                }
                if mean.iter().chain(cov).any(|v| !v.is_finite()) {
                    return Err(Error::config("non-finite model parameter"));
                }
                Ok(Sampler::Gaussian {
                    mean: mean.clone(),
                    lower: psd_cholesky(cov, k)?,
                })
            }
            ModelKind::Mixture { weights, means } => {
                if weights.is_empty() || weights.len() != means.len() {
                    return Err(Error::config("mixture needs one weight per component"));
                }
                if means.iter().any(|m| m.len() != k) {
                    return Err(Error::ShapeMismatch(format!(
                        "mixture means must have length {k}"
                    )));
                }
                if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
                    return Err(Error::config("mixture weights must be >= 0"));
                }
                let total: f64 = weights.iter().sum();
                if total <= 0.0 {
                    return Err(Error::config("mixture weights sum to zero"));
                }
                let mut acc = 0.0;
                let cumulative = weights
                    .iter()
                    .map(|w| {
                        acc += w / total;
                        acc
                    })
                    .collect();
                Ok(Sampler::Mixture {
                    cumulative,
                    means: means.clone(),
                })
            }
        }
    }

    /// `n` rows drawn from the model, with columns named `s1..sK`.
    pub fn sample_matrix(&self, n: usize, seed: u64) -> Result<ScoreMatrix> {
        let sampler = self.sampler()?;
        let mut rng = stream_rng(split_seed(seed, self.seed), 0);
        let rows = (0..n)
            .map(|_| {
                let mut row = vec![0.0; self.k];
                sampler.draw(&mut rng, &mut row);
                row
            })
            .collect();
        ScoreMatrix::new((1..=self.k).map(|i| format!("s{i}")).collect(), rows)
    }
}

/// Lower Cholesky factor of a positive semidefinite matrix. Zero pivots get
/// a zero column; anything clearly indefinite or asymmetric is rejected.
fn psd_cholesky(cov: &[f64], k: usize) -> Result<Vec<f64>> {
    let scale = (0..k).map(|i| cov[i * k + i].abs()).fold(1.0, f64::max);
    let tol = 1e-10 * scale;
    for i in 0..k {
        for j in 0..i {
            if (cov[i * k + j] - cov[j * k + i]).abs() > tol {
                return Err(Error::config(format!(
                    "covariance is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let mut l = vec![0.0f64; k * k];
    for j in 0..k {
        let d = cov[j * k + j] - (0..j).map(|p| l[j * k + p] * l[j * k + p]).sum::<f64>();
        if d < -tol {
            return Err(Error::config("covariance is not positive semidefinite"));
        }
        let pivot = if d > tol { d.sqrt() } else { 0.0 };
        l[j * k + j] = pivot;
        for i in j + 1..k {
            let v = cov[i * k + j] - (0..j).map(|p| l[i * k + p] * l[j * k + p]).sum::<f64>();
            if pivot == 0.0 {
                if v.abs() > 1e-8 * scale {
                    return Err(Error::config("covariance is not positive semidefinite"));
                }
            } else {
                l[i * k + j] = v / pivot;
            }
        }
    }
    Ok(l)
}

enum Sampler {
    Iid {
        k: usize,
    },
    Gaussian {
        mean: Vec<f64>,
        lower: Vec<f64>,
    },
    Mixture {
        cumulative: Vec<f64>,
        means: Vec<Vec<f64>>,
    },
}

impl Sampler {
    fn draw<R: Rng>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            Sampler::Iid { k } => {
                for v in &mut out[..*k] {
                    *v = rng.sample(StandardNormal);
                }
            }
            Sampler::Gaussian { mean, lower } => {
                let k = mean.len();
                let z: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
                for i in 0..k {
                    out[i] = mean[i] + (0..=i).map(|p| lower[i * k + p] * z[p]).sum::<f64>();
                }
            }
            Sampler::Mixture { cumulative, means } => {
                let u: f64 = rng.random();
                let c = cumulative.partition_point(|&w| w <= u).min(means.len() - 1);
                for (v, m) in out.iter_mut().zip(&means[c]) {
                    let z: f64 = rng.sample(StandardNormal);
                    *v = m + z;
                }
            }
        }
    }
}

fn check_trials(n_trials: u64) -> Result<()> {
    if n_trials < MIN_TRIALS {
        return Err(Error::config(format!(
            "at least {MIN_TRIALS} trials are required, got {n_trials}"
        )));
    }
    Ok(())
}

fn two_normals<R: Rng>(rng: &mut R, mu: [f64; 2]) -> [f64; 2] {
    let z0: f64 = rng.sample(StandardNormal);
    let z1: f64 = rng.sample(StandardNormal);
    [mu[0] + z0, mu[1] + z1]
}

/// Sum test on `T ~ N(mu, I_2)`: exact p-value `Ψ((T¹ + T²) / √2)`,
/// rejecting when it is below `alpha`.
pub fn simulate_test_t1(
    mu: [f64; 2],
    alpha: Probability,
    n_trials: u64,
    seed: u64,
    workers: usize,
) -> Result<MonteCarloReport> {
    check_trials(n_trials)?;
    let alpha = alpha.get();
    let hits = count_hits(n_trials, seed, workers, |rng| {
        let t = two_normals(rng, mu);
        normal_sf((t[0] + t[1]) / std::f64::consts::SQRT_2) < alpha
    })?;
    Ok(MonteCarloReport::from_counts(hits, n_trials))
}

/// Two-coordinate step-up test on `T ~ N(mu, I_2)` with exact p-values
/// `Ψ(T^i)` and ladder `i α / 2`, without the correction constant used by
/// the production detectors.
pub fn simulate_test_t2(
    mu: [f64; 2],
    alpha: Probability,
    n_trials: u64,
    seed: u64,
    workers: usize,
) -> Result<MonteCarloReport> {
    check_trials(n_trials)?;
    let alpha = alpha.get();
    let hits = count_hits(n_trials, seed, workers, |rng| {
        let t = two_normals(rng, mu);
        let (p0, p1) = (normal_sf(t[0]), normal_sf(t[1]));
        let (lo, hi) = if p0 <= p1 { (p0, p1) } else { (p1, p0) };
        hi <= alpha || lo <= alpha / 2.0
    })?;
    Ok(MonteCarloReport::from_counts(hits, n_trials))
}

/// Lower bound on the power of [`simulate_test_t2`]:
/// `max_i Ψ(Ψ⁻¹(α/2) - μ_i)`.
pub fn power_bound(mu: [f64; 2], alpha: Probability) -> f64 {
    let z = normal_sf_inv(alpha.get() / 2.0).expect("alpha / 2 lies in (0, 1/2)");
    normal_sf(z - mu[0]).max(normal_sf(z - mu[1]))
}

fn draw_calibration<R: Rng>(
    sampler: &Sampler,
    k: usize,
    n_cal: usize,
    rng: &mut R,
) -> Result<CalibrationSet> {
    let mut columns = vec![Vec::with_capacity(n_cal); k];
    let mut row = vec![0.0; k];
    for _ in 0..n_cal {
        sampler.draw(rng, &mut row);
        for (c, v) in columns.iter_mut().zip(&row) {
            c.push(*v);
        }
    }
    CalibrationSet::from_columns(columns)
}

/// Monte Carlo check of the conditional false-alarm guarantee.
///
/// For each of `n_cal_draws` calibration sets drawn from `model`, the false
/// alarm rate of the configured detector is estimated over `n_test_draws`
/// fresh null points. The report's estimate is the fraction of calibration
/// sets whose rate is `<= alpha`, with binomial stderr over calibration
/// draws. Calibration draw `d` uses random stream `d`.
pub fn verify_conditional_false_alarm(
    model: &SyntheticModel,
    cfg: &DetectorConfig,
    n_cal: usize,
    n_cal_draws: u64,
    n_test_draws: u64,
    seed: u64,
    workers: usize,
) -> Result<MonteCarloReport> {
    if model.k != cfg.k {
        return Err(Error::config(format!(
            "model has K = {}, detector K = {}",
            model.k, cfg.k
        )));
    }
    if n_cal == 0 || n_cal_draws == 0 || n_test_draws == 0 {
        return Err(Error::config(
            "calibration size and draw counts must be >= 1",
        ));
    }
    let sampler = model.sampler()?;
    let key = split_seed(seed, model.seed);
    let alpha = cfg.alpha.get();
    let rates = pool(workers)?.install(|| {
        (0..n_cal_draws)
            .into_par_iter()
            .map(|d| {
                let mut rng = stream_rng(key, d);
                let cal = draw_calibration(&sampler, model.k, n_cal, &mut rng)?;
                let detector = OodDetector::new(cal, *cfg)?;
                let mut row = vec![0.0; model.k];
                let mut alarms = 0u64;
                for _ in 0..n_test_draws {
                    sampler.draw(&mut rng, &mut row);
                    alarms += detector.is_ood(&row) as u64;
                }
                Ok(alarms as f64 / n_test_draws as f64)
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    let ok = rates.iter().filter(|&&r| r <= alpha).count() as u64;
    let mut report = MonteCarloReport::from_counts(ok, n_cal_draws);
    report.per_calibration_estimates = Some(rates);
    Ok(report)
}

/// Conditional exceedance probabilities `P(Q <= level | T_cal)` for a single
/// standard-normal score, one vector per level, over `n_draws` calibration
/// sets of size `n_cal`. Draw `d` uses random stream `d` of `seed`.
pub fn sample_exceedance_probabilities(
    n_cal: usize,
    levels: &[f64],
    n_draws: u64,
    seed: u64,
    workers: usize,
) -> Result<Vec<Vec<f64>>> {
    if n_cal == 0 || levels.is_empty() {
        return Err(Error::config("need n_cal >= 1 and at least one level"));
    }
    let per_draw: Vec<Vec<f64>> = pool(workers)?.install(|| {
        (0..n_draws)
            .into_par_iter()
            .map(|d| {
                let mut rng = stream_rng(seed, d);
                let mut cal: Vec<f64> = (0..n_cal).map(|_| rng.sample(StandardNormal)).collect();
                cal.sort_by(f64::total_cmp);
                levels
                    .iter()
                    .map(|&l| conditional_exceedance_probability(&cal, l, normal_sf))
                    .collect()
            })
            .collect()
    });
    Ok((0..levels.len())
        .map(|j| per_draw.iter().map(|r| r[j]).collect())
        .collect())
}

/// Which decision rule [`estimate_power`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DetectorSpec {
    /// BH, Bonferroni or naive averaging over all `K` scores.
    Combined(DetectorConfig),
    /// Conformal test on one score alone: OOD iff its p-value is `<= alpha`.
    SingleScore { index: usize, alpha: Probability },
}

/// Probability that a point from `alt` is declared OOD by a detector
/// calibrated on `n_cal` points from `null`.
///
/// One calibration set is drawn (stream `u64::MAX` of the null model's key)
/// and held fixed, so the estimate is the power conditional on it. Test
/// batches use the alternative model's key.
pub fn estimate_power(
    null: &SyntheticModel,
    alt: &SyntheticModel,
    spec: &DetectorSpec,
    n_cal: usize,
    n_trials: u64,
    seed: u64,
    workers: usize,
) -> Result<MonteCarloReport> {
    if null.k != alt.k {
        return Err(Error::config(format!(
            "null model has K = {}, alternative K = {}",
            null.k, alt.k
        )));
    }
    if n_trials == 0 || n_cal == 0 {
        return Err(Error::config("n_cal and n_trials must be >= 1"));
    }
    let null_sampler = null.sampler()?;
    let alt_sampler = alt.sampler()?;
    let k = null.k;
    let cal = draw_calibration(
        &null_sampler,
        k,
        n_cal,
        &mut stream_rng(split_seed(seed, null.seed), CAL_STREAM),
    )?;
    let key = split_seed(seed, alt.seed);
    let hits = match *spec {
        DetectorSpec::Combined(cfg) => {
            let detector = OodDetector::new(cal, cfg)?;
            count_hits(n_trials, key, workers, |rng| {
                let mut row = vec![0.0; k];
                alt_sampler.draw(rng, &mut row);
                detector.is_ood(&row)
            })?
        }
        DetectorSpec::SingleScore { index, alpha } => {
            if index >= k {
                return Err(Error::config(format!(
                    "score index {index} out of range for K = {k}"
                )));
            }
            let alpha = alpha.get();
            count_hits(n_trials, key, workers, |rng| {
                let mut row = vec![0.0; k];
                alt_sampler.draw(rng, &mut row);
                cal.p_value(index, row[index]) <= alpha
            })?
        }
    };
    Ok(MonteCarloReport::from_counts(hits, n_trials))
}
