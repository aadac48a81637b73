//! Log-gamma, log-gamma differences and the standard normal CDF.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this argument the Stirling series is not used directly.
const STIRLING_MIN: f64 = 15.0;

// B_{2j} / (2j (2j-1)) for j = 1..8
const STIRLING_COEFFS: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

/// Tail of the Stirling series: `ln Γ(x) - [(x - ½) ln x - x + ½ ln 2π]`.
fn stirling_correction(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut acc = 0.0;
    for c in STIRLING_COEFFS.iter().rev() {
        acc = acc * inv2 + c;
    }
    acc * inv
}

fn ln_gamma_large(x: f64) -> f64 {
    (x - 0.5) * x.ln() - x + HALF_LN_2PI + stirling_correction(x)
}

/// `ln Γ(x)` for `x > 0`.
///
/// Uses the Stirling series for `x >= 15` and upward recurrence below.
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0, "ln_gamma requires x > 0, got {x}");
    if x == 1.0 || x == 2.0 {
        return 0.0;
    }
    if x >= STIRLING_MIN {
        return ln_gamma_large(x);
    }
    let mut shifted = x;
    let mut prod = 1.0;
    while shifted < STIRLING_MIN {
        prod *= shifted;
        shifted += 1.0;
    }
    ln_gamma_large(shifted) - prod.ln()
}

/// `ln Γ(x + h) - ln Γ(x)` without the cancellation of the direct difference
/// when both arguments are large.
pub fn ln_gamma_ratio(x: f64, h: f64) -> f64 {
    let y = x + h;
    assert!(x > 0.0 && y > 0.0, "ln_gamma_ratio requires positive arguments");
    if h == 0.0 {
        return 0.0;
    }
    if x.min(y) < STIRLING_MIN {
        return ln_gamma(y) - ln_gamma(x);
    }
    (x - 0.5) * (h / x).ln_1p() + h * y.ln() - h + (stirling_correction(y) - stirling_correction(x))
}

/// `ln Γ_m(x) = m(m-1)/4 ln π + Σ_{i=1..m} ln Γ(x - (i-1)/2)`.
pub fn ln_multigamma(m: usize, x: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::Domain("multivariate gamma needs m >= 1".into()));
    }
    let pole = (m as f64 - 1.0) / 2.0;
    if !(x > pole) {
        return Err(Error::Domain(format!(
            "ln Γ_{m}({x}) undefined: argument must exceed {pole}"
        )));
    }
    let mf = m as f64;
    let mut acc = mf * (mf - 1.0) / 4.0 * PI.ln();
    for i in 0..m {
        acc += ln_gamma(x - i as f64 / 2.0);
    }
    Ok(acc)
}

/// `ln Γ_m(x) - ln Γ_m(y)` assembled term-by-term from [`ln_gamma_ratio`].
pub fn ln_multigamma_ratio(m: usize, x: f64, y: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::Domain("multivariate gamma needs m >= 1".into()));
    }
    let pole = (m as f64 - 1.0) / 2.0;
    if !(x > pole) || !(y > pole) {
        return Err(Error::Domain(format!(
            "multivariate gamma ratio at ({x}, {y}) with m={m}: arguments must exceed {pole}"
        )));
    }
    Ok((0..m)
        .map(|i| {
            let shift = i as f64 / 2.0;
            ln_gamma_ratio(y - shift, x - y)
        })
        .sum())
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal log-density.
pub fn normal_ln_pdf(x: f64) -> f64 {
    -HALF_LN_2PI - 0.5 * x * x
}

/// `ln Σ exp(v_i)` with max shift; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
