//! Special functions needed by the calibration-size condition and the
//! two-statistic power bound: the regularized incomplete beta function for
//! integer shapes and the standard normal survival function with its inverse.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// ½·ln(2π)
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
/// ln Γ(½) = ½·ln π
const LN_GAMMA_HALF: f64 = 0.572_364_942_924_700_1;

const CF_MAX_ITER: usize = 100_000;
const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;

/// A real number known to lie in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::Domain(format!("probability {value} outside [0, 1]")))
        }
    }

    /// Checks `0 < value < 1`.
    pub fn open(value: f64) -> Result<Self> {
        if value > 0.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(Error::Domain(format!("probability {value} outside (0, 1)")))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Probability {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

/// Integer shape parameters of a Beta distribution, both at least one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BetaParams {
    a: u64,
    b: u64,
}

impl BetaParams {
    pub fn new(a: u64, b: u64) -> Result<Self> {
        if a == 0 || b == 0 {
            return Err(Error::Domain(format!(
                "Beta shapes must be >= 1 (got a = {a}, b = {b})"
            )));
        }
        Ok(Self { a, b })
    }

    pub fn a(self) -> u64 {
        self.a
    }

    pub fn b(self) -> u64 {
        self.b
    }

    pub fn mean(self) -> f64 {
        self.a as f64 / (self.a + self.b) as f64
    }
}

/// Regularized incomplete beta function `I_x(a, b)`, the CDF of Beta(a, b).
///
/// Evaluated with the continued fraction for `I_x` (modified Lentz), switching
/// to `1 - I_{1-x}(b, a)` when `x > (a + 1) / (a + b + 2)` so the fraction is
/// always used where it converges fast.
pub fn reg_inc_beta(x: f64, params: BetaParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!(
            "I_x(a, b) needs x in [0, 1], got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let a = params.a as f64;
    let b = params.b as f64;
    let value = if x > (a + 1.0) / (a + b + 2.0) {
        1.0 - beta_cf_tail(b, a, 1.0 - x)
    } else {
        beta_cf_tail(a, b, x)
    };
    Ok(value.clamp(0.0, 1.0))
}

/// `x^a (1-x)^b / (a B(a,b)) * cf(x)`.
fn beta_cf_tail(a: f64, b: f64, x: f64) -> f64 {
    let ln_front = ln_beta_kernel(a, b, x);
    if ln_front < -745.0 {
        return 0.0;
    }
    ln_front.exp() / a * lentz_beta_cf(a, b, x)
}

fn lentz_beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        // even step
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        // odd step
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// `ln( x^a (1-x)^b / B(a, b) )`.
///
/// For large shapes the Stirling form is rearranged around the mean
/// `a / (a + b)` so the O(n log n) terms cancel analytically instead of in
/// floating point.
fn ln_beta_kernel(a: f64, b: f64, x: f64) -> f64 {
    if a.min(b) < 10.0 {
        return a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b);
    }
    let s = a + b;
    let da = (x * s - a) / a;
    let db = ((1.0 - x) * s - b) / b;
    a * da.ln_1p() + b * db.ln_1p() + 0.5 * (a.ln() + b.ln() - s.ln())
        - HALF_LN_2PI
        - stirling_correction(a)
        - stirling_correction(b)
        + stirling_correction(s)
}

/// `ln Γ(x) - [(x - ½) ln x - x + ½ ln 2π]` for `x >= 10`.
fn stirling_correction(x: f64) -> f64 {
    let r = 1.0 / x;
    let r2 = r * r;
    r * (1.0 / 12.0 - r2 * (1.0 / 360.0 - r2 * (1.0 / 1260.0 - r2 * (1.0 / 1680.0 - r2 / 1188.0))))
}

/// `ln Γ(x)` for `x > 0`.
pub(crate) fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut shift = 0.0;
    let mut z = x;
    while z < 10.0 {
        shift += z.ln();
        z += 1.0;
    }
    (z - 0.5) * z.ln() - z + HALF_LN_2PI + stirling_correction(z) - shift
}

pub(crate) fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Upper tail of the standard normal, `Ψ(z) = P(Z >= z)`.
pub fn normal_sf(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    let x = z / SQRT_2;
    if x >= 0.0 {
        0.5 * erfc_pos(x)
    } else {
        1.0 - 0.5 * erfc_pos(-x)
    }
}

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// `erfc(x)` for `x >= 0` via `Q(½, x²)`, the regularized upper incomplete gamma.
fn erfc_pos(x: f64) -> f64 {
    let t = x * x;
    if t == 0.0 {
        return 1.0;
    }
    let ln_front = -t + 0.5 * t.ln() - LN_GAMMA_HALF;
    if t < 1.5 {
        // 1 - P(½, t) from the power series
        let mut ap = 0.5;
        let mut del = 1.0 / 0.5;
        let mut sum = del;
        for _ in 0..500 {
            ap += 1.0;
            del *= t / ap;
            sum += del;
            if del.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        1.0 - sum * ln_front.exp()
    } else {
        if ln_front < -745.0 {
            return 0.0;
        }
        // Lentz continued fraction for Q(½, t)
        let a = 0.5;
        let mut b = t + 1.0 - a;
        let mut c = 1.0 / CF_TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=500 {
            let i = i as f64;
            let an = -i * (i - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < CF_TINY {
                d = CF_TINY;
            }
            c = b + an / c;
            if c.abs() < CF_TINY {
                c = CF_TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < CF_EPS {
                break;
            }
        }
        ln_front.exp() * h
    }
}

/// Inverse of [`normal_sf`]: the `z` with `Ψ(z) = q`, for `0 < q < 1`.
///
/// Acklam's rational approximation followed by two Halley steps against
/// [`normal_sf`].
pub fn normal_sf_inv(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!(
            "normal_sf_inv needs q in (0, 1), got {q}"
        )));
    }
    // Ψ(z) = q  <=>  Φ(-z) = q
    let mut z = -acklam_quantile(q);
    for _ in 0..2 {
        let e = normal_sf(z) - q;
        let u = e / normal_pdf(z);
        if !u.is_finite() {
            break;
        }
        z += u / (1.0 - 0.5 * z * u);
    }
    Ok(z)
}

fn acklam_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const LOW: f64 = 0.024_25;
    if p < LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (-p).ln_1p()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bp(a: u64, b: u64) -> BetaParams {
        BetaParams::new(a, b).unwrap()
    }

    #[test]
    fn uniform_beta_is_identity() {
        assert!((reg_inc_beta(0.3, bp(1, 1)).unwrap() - 0.3).abs() < 1e-14);
    }

    #[test]
    fn symmetric_beta_at_half() {
        assert!((reg_inc_beta(0.5, bp(2, 2)).unwrap() - 0.5).abs() < 1e-14);
        assert!((reg_inc_beta(0.5, bp(37, 37)).unwrap() - 0.5).abs() < 1e-13);
    }

    #[test]
    fn b_equal_one_is_power() {
        assert!((reg_inc_beta(0.25, bp(2, 1)).unwrap() - 0.0625).abs() < 1e-14);
    }

    #[test]
    fn boundaries_are_exact() {
        for (a, b) in [(1, 1), (3, 7), (400, 20)] {
            assert_eq!(reg_inc_beta(0.0, bp(a, b)).unwrap(), 0.0);
            assert_eq!(reg_inc_beta(1.0, bp(a, b)).unwrap(), 1.0);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(BetaParams::new(0, 3).is_err());
        assert!(BetaParams::new(3, 0).is_err());
        assert!(reg_inc_beta(-0.1, bp(2, 2)).is_err());
        assert!(reg_inc_beta(1.5, bp(2, 2)).is_err());
        assert!(normal_sf_inv(0.0).is_err());
        assert!(normal_sf_inv(1.0).is_err());
        assert!(Probability::new(1.2).is_err());
        assert!(Probability::open(0.0).is_err());
    }

    #[test]
    fn large_shapes_match_binomial_identity() {
        // I_x(a, b) = P(Bin(a + b - 1, x) >= a)
        let (a, b, x) = (12_u64, 5500_u64, 0.004_f64);
        let n = a + b - 1;
        let mut ln_pmf = n as f64 * (-x).ln_1p(); // k = 0
        let mut below = 0.0;
        for k in 0..a {
            below += ln_pmf.exp();
            let kf = k as f64;
            ln_pmf += ((n as f64 - kf) / (kf + 1.0)).ln() + x.ln() - (-x).ln_1p();
        }
        let got = reg_inc_beta(x, bp(a, b)).unwrap();
        assert!(
            (got - (1.0 - below)).abs() < 1e-12,
            "{got} vs {}",
            1.0 - below
        );
    }

    #[test]
    fn normal_sf_basics() {
        assert_eq!(normal_sf(0.0), 0.5);
        let z = 1.7;
        assert!((normal_sf(z) + normal_sf(-z) - 1.0).abs() < 1e-15);
        assert!((normal_sf(1.6449) - 0.05).abs() < 1e-5);
        assert!(normal_sf(40.0) >= 0.0);
        assert_eq!(normal_sf(-40.0), 1.0);
    }

    #[test]
    fn normal_sf_inv_basics() {
        assert!(normal_sf_inv(0.5).unwrap().abs() < 1e-15);
        let z = normal_sf_inv(normal_sf(1.25)).unwrap();
        assert!((z - 1.25).abs() < 1e-8);
        assert!((normal_sf_inv(0.05).unwrap() - 1.644_853_626_951_472_2).abs() < 1e-9);
    }

    #[test]
    fn ln_gamma_integers() {
        let mut ln_fact = 0.0_f64;
        for n in 1..60_u32 {
            // Γ(n) = (n-1)!
            assert!((ln_gamma(n as f64) - ln_fact).abs() < 1e-12 * ln_fact.max(1.0));
            ln_fact += (n as f64).ln();
        }
        assert!((ln_gamma(0.5) - LN_GAMMA_HALF).abs() < 1e-14);
    }
}
