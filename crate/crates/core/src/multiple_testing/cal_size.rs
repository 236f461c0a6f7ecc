//! Smallest calibration-set size for which the conditional false-alarm
//! guarantee holds with probability `1 - δ`.
//!
//! Given a calibration set of size `n`, the probability (over fresh null test
//! points) that a conformal p-value falls at or below a level `ℓ` is
//! Beta(a, n + 1 - a) distributed across calibration draws, with
//! `a = floor((n + 1) ℓ)`. The BH condition asks that for every rung
//! `j = 1..K`, with `a_j = floor((n + 1) α j / (C(K) K))`, `b_j = n + 1 - a_j`
//! and `μ_j = a_j / (n + 1)`:
//!
//! ```text
//! min_j I_{(1+ε) μ_j}(a_j, b_j) >= 1 - δ / K²
//! ```
//!
//! The Bonferroni variant uses a single level `α / ((1 + ε) K)` and asks for
//! `1 - δ / K`. Because of the floor the condition need not be monotone in
//! `n`, so the solvers scan upward and return the first feasible size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{reg_inc_beta, BetaParams};

use super::{bh_level, bonferroni_threshold, DetectorConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalSizeRequest {
    pub alpha: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub k: usize,
    pub scan_limit: usize,
}

impl CalSizeRequest {
    pub const DEFAULT_SCAN_LIMIT: usize = 1_000_000;

    pub fn new(alpha: f64, epsilon: f64, delta: f64, k: usize) -> Result<Self> {
        Self {
            alpha,
            epsilon,
            delta,
            k,
            scan_limit: Self::DEFAULT_SCAN_LIMIT,
        }
        .validated()
    }

    pub fn from_config(cfg: &DetectorConfig, scan_limit: usize) -> Result<Self> {
        Self {
            alpha: cfg.alpha.get(),
            epsilon: cfg.epsilon,
            delta: cfg.delta.get(),
            k: cfg.k,
            scan_limit,
        }
        .validated()
    }

    pub fn with_scan_limit(self, scan_limit: usize) -> Result<Self> {
        Self { scan_limit, ..self }.validated()
    }

    fn validated(self) -> Result<Self> {
        // reuse DetectorConfig's range checks
        DetectorConfig::bh(self.alpha, self.epsilon, self.delta, self.k)?;
        if self.scan_limit == 0 {
            return Err(Error::config("scan limit must be at least 1"));
        }
        Ok(self)
    }
}

/// One rung of the condition at a given `n_cal`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rung {
    pub j: usize,
    pub level: f64,
    pub a: u64,
    pub b: u64,
    pub mu: f64,
    /// `(1 + ε) μ`, clamped to 1.
    pub x: f64,
    /// `I_x(a, b)`; `None` when `a = 0`, which fails the condition.
    pub cdf: Option<f64>,
}

/// The condition evaluated at one `n_cal`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub n_cal: usize,
    pub rungs: Vec<Rung>,
    pub target: f64,
    /// `min_j I - target`; negative infinity when some `a_j = 0`.
    pub margin: f64,
}

impl ConditionCheck {
    pub fn satisfied(&self) -> bool {
        self.margin >= 0.0
    }
}

fn rung(n_cal: usize, j: usize, level: f64, epsilon: f64) -> Rung {
    let total = (n_cal + 1) as u64;
    let a = ((n_cal + 1) as f64 * level).floor() as u64;
    let b = total - a.min(total);
    let mu = a as f64 / total as f64;
    let x = ((1.0 + epsilon) * mu).min(1.0);
    let cdf = BetaParams::new(a, b)
        .ok()
        .map(|p| reg_inc_beta(x, p).expect("x is clamped to [0, 1]"));
    Rung {
        j,
        level,
        a,
        b,
        mu,
        x,
        cdf,
    }
}

fn check(n_cal: usize, levels: &[f64], epsilon: f64, target: f64) -> ConditionCheck {
    let mut rungs = Vec::with_capacity(levels.len());
    let mut min_cdf = f64::INFINITY;
    for (j, &level) in levels.iter().enumerate() {
        let r = rung(n_cal, j + 1, level, epsilon);
        min_cdf = min_cdf.min(r.cdf.unwrap_or(f64::NEG_INFINITY));
        rungs.push(r);
    }
    ConditionCheck {
        n_cal,
        rungs,
        target,
        margin: min_cdf - target,
    }
}

fn bh_levels(req: &CalSizeRequest) -> Vec<f64> {
    (1..=req.k)
        .map(|j| bh_level(req.alpha, req.epsilon, req.k, j))
        .collect()
}

fn bh_target(req: &CalSizeRequest) -> f64 {
    1.0 - req.delta / (req.k * req.k) as f64
}

fn bonferroni_target(req: &CalSizeRequest) -> f64 {
    1.0 - req.delta / req.k as f64
}

/// Full per-rung evaluation of the BH condition at `n_cal`.
pub fn bh_condition(req: &CalSizeRequest, n_cal: usize) -> ConditionCheck {
    check(n_cal, &bh_levels(req), req.epsilon, bh_target(req))
}

/// Evaluation of the Bonferroni condition at `n_cal` (a single rung).
pub fn bonferroni_condition(req: &CalSizeRequest, n_cal: usize) -> ConditionCheck {
    let level = bonferroni_threshold(req.alpha, req.epsilon, req.k);
    check(n_cal, &[level], req.epsilon, bonferroni_target(req))
}

fn scan(req: &CalSizeRequest, levels: &[f64], target: f64) -> Result<usize> {
    let smallest_level = levels.iter().copied().fold(f64::INFINITY, f64::min);
    let mut best_n = 0;
    let mut best_margin = f64::NEG_INFINITY;
    for n in 1..=req.scan_limit {
        // a = 0 on the lowest rung fails outright
        if ((n + 1) as f64 * smallest_level).floor() < 1.0 {
            continue;
        }
        let c = check(n, levels, req.epsilon, target);
        if c.satisfied() {
            return Ok(n);
        }
        if c.margin > best_margin {
            best_margin = c.margin;
            best_n = n;
        }
    }
    Err(Error::Capacity {
        scan_limit: req.scan_limit,
        best_n,
        best_margin,
    })
}

/// Smallest `n_cal` in `1..=scan_limit` satisfying the BH condition.
pub fn required_cal_size(req: &CalSizeRequest) -> Result<usize> {
    let req = req.validated()?;
    scan(&req, &bh_levels(&req), bh_target(&req))
}

/// Smallest `n_cal` in `1..=scan_limit` satisfying the Bonferroni condition.
pub fn required_cal_size_bonferroni(req: &CalSizeRequest) -> Result<usize> {
    let req = req.validated()?;
    let level = bonferroni_threshold(req.alpha, req.epsilon, req.k);
    scan(&req, &[level], bonferroni_target(&req))
}
