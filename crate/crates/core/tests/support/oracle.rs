//! Reference implementations used only by tests.
//!
//! Nothing here calls into the library's numerics: the Beta CDF is obtained by
//! integrating the density with adaptive Gauss-Kronrod quadrature and
//! normalising with exact log-factorial sums, and the normal tail comes from
//! integrating the Gaussian density.

#![allow(dead_code)]

// 7-point Gauss / 15-point Kronrod nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod integration of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, whole: (f64, f64), depth: u32) -> f64 {
        let (val, err) = whole;
        // the relative floor stops refinement once rounding noise dominates
        if err <= tol.max(1e-300) || err <= 64.0 * f64::EPSILON * val.abs() || depth == 0 || (b - a) < 1e-15 {
            return val;
        }
        let m = 0.5 * (a + b);
        let left = gk15(f, a, m);
        let right = gk15(f, m, b);
        rec(f, a, m, 0.5 * tol, left, depth - 1) + rec(f, m, b, 0.5 * tol, right, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let whole = gk15(&f, a, b);
    rec(&f, a, b, tol, whole, 60)
}

/// ln((n)!) by direct summation.
pub fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// ln B(a, b) for integer shapes through factorials.
pub fn ln_beta_int(a: u64, b: u64) -> f64 {
    ln_factorial(a - 1) + ln_factorial(b - 1) - ln_factorial(a + b - 1)
}

/// CDF of Beta(a, b) at `x`, integer shapes, by quadrature of the density.
///
/// Integrates whichever tail is shorter so that values near one keep their
/// absolute accuracy.
pub fn beta_cdf(x: f64, a: u64, b: u64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let lnb = ln_beta_int(a, b);
    let (af, bf) = (a as f64, b as f64);
    let density = move |t: f64| -> f64 {
        if t <= 0.0 || t >= 1.0 {
            let at_zero = t <= 0.0;
            return match (at_zero, a, b) {
                (true, 1, _) => (-lnb).exp(),
                (false, _, 1) => (-lnb).exp(),
                _ => 0.0,
            };
        }
        ((af - 1.0) * t.ln() + (bf - 1.0) * (-t).ln_1p() - lnb).exp()
    };
    let mode = if a + b > 2 {
        ((af - 1.0) / (af + bf - 2.0)).clamp(0.0, 1.0)
    } else {
        0.5
    };
    let tol = 1e-14;
    // Split at the mode so the adaptive rule sees the peak at an interval edge.
    let lower = |hi: f64| -> f64 {
        if mode > 0.0 && mode < hi {
            integrate(density, 0.0, mode, tol) + integrate(density, mode, hi, tol)
        } else {
            integrate(density, 0.0, hi, tol)
        }
    };
    let upper = |lo: f64| -> f64 {
        if mode > lo && mode < 1.0 {
            integrate(density, lo, mode, tol) + integrate(density, mode, 1.0, tol)
        } else {
            integrate(density, lo, 1.0, tol)
        }
    };
    if x <= mode {
        lower(x)
    } else {
        1.0 - upper(x)
    }
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// P(Z >= z) for standard normal Z by integrating the density over a
/// truncated upper tail (mass beyond 40 is far below double precision).
pub fn normal_sf(z: f64) -> f64 {
    if z >= 0.0 {
        integrate(normal_pdf, z, z.max(0.0) + 40.0, 1e-16)
    } else {
        1.0 - normal_sf(-z)
    }
}

/// Solve normal_sf(z) = q by bisection on the quadrature oracle.
pub fn normal_sf_inv(q: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_sf(mid) > q {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Brute-force AUROC over every (in, ood) pair; ties count one half.
pub fn auroc_pairs(in_scores: &[f64], ood_scores: &[f64]) -> f64 {
    let mut wins2 = 0u64;
    for &i in in_scores {
        for &o in ood_scores {
            if o > i {
                wins2 += 2;
            } else if o == i {
                wins2 += 1;
            }
        }
    }
    wins2 as f64 / (2 * in_scores.len() * ood_scores.len()) as f64
}

/// One-sample Kolmogorov-Smirnov statistic against a continuous CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d = 0.0_f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        let above = (i as f64 + 1.0) / n - f;
        let below = f - i as f64 / n;
        d = d.max(above).max(below);
    }
    d
}

/// Asymptotic Kolmogorov distribution tail, P(sqrt(n) D > t).
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sqrt_n = (n as f64).sqrt();
    // Stephens' small-sample correction.
    let t = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = 2.0 * (-1.0_f64).powi(k - 1) * (-2.0 * kf * kf * t * t).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}
