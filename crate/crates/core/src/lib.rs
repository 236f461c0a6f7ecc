//! Out-of-distribution detection by combining any number of score functions
//! through conformal p-values and a Benjamini-Hochberg style multiple test.
//!
//! A test input is declared OOD when at least one of `K` per-score null
//! hypotheses ("this score looks in-distribution") is rejected. Conformal
//! p-values are computed against a held-out in-distribution calibration set,
//! and the rejection ladder `α i / (C(K) K)` with
//! `C(K) = (1 + ε) Σ_{j≤K} 1/j` keeps the false-alarm probability
//! *conditioned on the calibration set* below `α` with probability `1 - δ`,
//! provided the calibration set is at least [`required_cal_size`] large.
//!
//! Modules:
//! - [`numerics`]: incomplete beta and normal tail functions.
//! - [`conformal`]: conformal and exact p-values.
//! - [`multiple_testing`]: BH, Bonferroni and naive-averaging detectors, and
//!   calibration-size solvers.
//! - [`scores`]: Mahalanobis, Gram-deviation and energy scores over features.
//! - [`simulation`]: seeded, parallel Monte Carlo checks of the guarantees.
//! - [`evaluation`]: detection power, AUROC and family-wise error rate.
//! - [`io`]: CSV / JSON file formats.
//! - [`cli`]: the `conformal-ood` command line.

pub mod cli;
pub mod conformal;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod multiple_testing;
pub mod numerics;
pub mod score_matrix;
pub mod scores;
pub mod simulation;

pub use conformal::{conformal_p_value, conformal_p_values, CalibrationSet, NullCdf};
pub use error::{Error, Result};
pub use multiple_testing::{
    bh_detect, bonferroni_detect, correction_constant, required_cal_size,
    required_cal_size_bonferroni, CalSizeRequest, DetectionResult, DetectorConfig, Method,
    OodDetector,
};
pub use numerics::{normal_sf, normal_sf_inv, reg_inc_beta, BetaParams, Probability};
pub use score_matrix::ScoreMatrix;
