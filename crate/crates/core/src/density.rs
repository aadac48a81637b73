//! Exact block densities of Haar orthogonal matrices, evaluated in the log domain.
//!
//! For `N >= m + k` the upper-left `m x k` block `A` of a Haar matrix in
//! `O(N)` has density
//!
//! ```text
//! f_N(A) = Γ_m(N/2) / (π^{mk/2} Γ_m((N-k)/2)) · det(I - A Aᵀ)^{(N-k-m-1)/2}
//! ```
//!
//! on `‖A Aᵀ‖_op < 1`. `g_N` is the density of `sqrt(N) A` and `φ_N` the
//! standard Gaussian density on `m x k` blocks.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::block::{frobenius_sq, gram_spectrum, BlockDims, MatrixBlock, SpectralSummary};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, Tolerance};
use crate::special::{ln_gamma_ratio, ln_multigamma, ln_multigamma_ratio};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// A log-density; `-inf` exactly when the point is outside the support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogDensityValue {
    pub log_value: f64,
    pub in_support: bool,
}

impl LogDensityValue {
    pub fn outside() -> Self {
        Self {
            log_value: f64::NEG_INFINITY,
            in_support: false,
        }
    }

    pub fn inside(log_value: f64) -> Self {
        debug_assert!(log_value.is_finite());
        Self {
            log_value,
            in_support: true,
        }
    }

    pub fn density(&self) -> f64 {
        self.log_value.exp()
    }
}

/// `ln Γ_m(x)`.
pub fn log_multigamma(m: usize, x: f64) -> Result<f64> {
    ln_multigamma(m, x)
}

/// `ln(1 - x) + x`, accurate for small `x`.
fn ln1m_plus(x: f64) -> f64 {
    if x.abs() < 0.25 {
        // -Σ_{r>=2} x^r / r
        let mut term = x * x;
        let mut acc: f64 = 0.0;
        let mut r = 2.0;
        while term.abs() > 1e-18 * acc.abs().max(f64::MIN_POSITIVE) {
            acc -= term / r;
            term *= x;
            r += 1.0;
            if r > 200.0 {
                break;
            }
        }
        acc
    } else {
        (-x).ln_1p() + x
    }
}

fn check_shape(b: &MatrixBlock, dims: &BlockDims) -> Result<()> {
    if b.rows() != dims.m || b.cols() != dims.k {
        return Err(Error::Dimension(format!(
            "block is {}x{} but dims say {}x{}",
            b.rows(),
            b.cols(),
            dims.m,
            dims.k
        )));
    }
    Ok(())
}

fn validate_dims(dims: &BlockDims) -> Result<()> {
    BlockDims::new(dims.n, dims.m, dims.k).map(|_| ())
}

/// `Σ ln(1 - λ_i / N)` over the eigenvalues of `B Bᵀ`.
pub fn log_det_gap(b: &MatrixBlock, n: u64) -> Result<f64> {
    let spec = gram_spectrum(b)?;
    log_det_gap_from_spectrum(&spec, n)
}

pub(crate) fn log_det_gap_from_spectrum(spec: &SpectralSummary, n: u64) -> Result<f64> {
    let nf = n as f64;
    if spec.op_norm >= nf {
        return Err(Error::OutOfSupport {
            op_norm: spec.op_norm / nf,
            limit: 1.0,
        });
    }
    Ok(spec.eigenvalues.iter().map(|l| (-l / nf).ln_1p()).sum())
}

/// `(N - k - m - 1) / 2`, the exponent of the determinant.
pub fn det_exponent(dims: &BlockDims) -> f64 {
    (dims.n_f64() - dims.k as f64 - dims.m as f64 - 1.0) / 2.0
}

/// `ln Γ_m(N/2) - ln Γ_m((N-k)/2) - (mk/2) ln π`.
pub fn log_normalizer(dims: &BlockDims) -> Result<f64> {
    let n = dims.n_f64();
    let q = ln_multigamma_ratio(dims.m, n / 2.0, (n - dims.k as f64) / 2.0)?;
    Ok(q - dims.p() as f64 / 2.0 * PI.ln())
}

/// `ln f_N(A)`.
pub fn log_block_density(a: &MatrixBlock, dims: &BlockDims) -> Result<LogDensityValue> {
    validate_dims(dims)?;
    check_shape(a, dims)?;
    let spec = gram_spectrum(a)?;
    if spec.op_norm >= 1.0 {
        return Ok(LogDensityValue::outside());
    }
    let logdet: f64 = spec.eigenvalues.iter().map(|s| (-s).ln_1p()).sum();
    Ok(LogDensityValue::inside(
        log_normalizer(dims)? + det_exponent(dims) * logdet,
    ))
}

/// `ln g_N(B)`, the density of `sqrt(N)` times the block.
pub fn log_scaled_density(b: &MatrixBlock, dims: &BlockDims) -> Result<LogDensityValue> {
    validate_dims(dims)?;
    check_shape(b, dims)?;
    let spec = gram_spectrum(b)?;
    match log_det_gap_from_spectrum(&spec, dims.n) {
        Err(Error::OutOfSupport { .. }) => Ok(LogDensityValue::outside()),
        Err(e) => Err(e),
        Ok(logdet) => Ok(LogDensityValue::inside(
            log_normalizer(dims)? - dims.p() as f64 / 2.0 * dims.n_f64().ln()
                + det_exponent(dims) * logdet,
        )),
    }
}

/// `ln φ_N(B) = -(mk/2) ln 2π - ½‖B‖_F²`.
pub fn log_gaussian_density(b: &MatrixBlock) -> f64 {
    -((b.rows() * b.cols()) as f64) / 2.0 * LN_2PI - 0.5 * frobenius_sq(b)
}

/// `ln Γ_m(N/2) - ln Γ_m((N-k)/2) - (mk/2) ln(N/2)`.
pub(crate) fn normalizer_residual(dims: &BlockDims) -> Result<f64> {
    let n = dims.n_f64();
    let q = ln_multigamma_ratio(dims.m, n / 2.0, (n - dims.k as f64) / 2.0)?;
    Ok(q - dims.p() as f64 / 2.0 * (n / 2.0).ln())
}

/// `ln(g_N(B) / φ_N(B))`.
///
/// The Gaussian exponent `-½‖B‖²` is folded into the log-determinant term
/// eigenvalue by eigenvalue, so the result keeps full relative precision even
/// when it is many orders of magnitude smaller than `‖B‖²`.
pub fn log_density_ratio(b: &MatrixBlock, dims: &BlockDims) -> Result<f64> {
    validate_dims(dims)?;
    check_shape(b, dims)?;
    let spec = gram_spectrum(b)?;
    log_density_ratio_from_spectrum(&spec, dims)
}

pub(crate) fn log_density_ratio_from_spectrum(
    spec: &SpectralSummary,
    dims: &BlockDims,
) -> Result<f64> {
    let n = dims.n_f64();
    if spec.op_norm >= n {
        return Err(Error::OutOfSupport {
            op_norm: spec.op_norm / n,
            limit: 1.0,
        });
    }
    let c = det_exponent(dims);
    // C ln(1 - x) + (N/2) x = C (ln(1 - x) + x) + (k + m + 1)/2 · x
    let lin = (dims.k + dims.m + 1) as f64 / 2.0;
    let body: f64 = spec
        .eigenvalues
        .iter()
        .map(|l| {
            let x = l / n;
            c * ln1m_plus(x) + lin * x
        })
        .sum();
    Ok(normalizer_residual(dims)? + body)
}

/// How a tail threshold maps onto the unscaled entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailScaling {
    /// `P(X > t)`.
    Unscaled,
    /// `P(sqrt(N) X > t)`.
    SqrtN,
    /// `P(N^b X > t)` with `0 < b < ½`.
    BetaN { b: f64 },
}

impl TailScaling {
    pub fn factor(&self, n: u64) -> f64 {
        let nf = n as f64;
        match *self {
            TailScaling::Unscaled => 1.0,
            TailScaling::SqrtN => nf.sqrt(),
            TailScaling::BetaN { b } => nf.powf(b),
        }
    }
}

/// A threshold and its scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailQuery {
    pub threshold: f64,
    pub scaling: TailScaling,
}

impl TailQuery {
    pub fn new(threshold: f64, scaling: TailScaling) -> Result<Self> {
        if let TailScaling::BetaN { b } = scaling {
            if !(b > 0.0 && b < 0.5) {
                return Err(Error::Invalid(format!(
                    "beta exponent must lie in (0, 1/2), got {b}"
                )));
            }
        }
        if threshold.is_nan() {
            return Err(Error::Invalid("NaN threshold".into()));
        }
        Ok(Self { threshold, scaling })
    }

    pub fn log_tail(&self, n: u64) -> Result<f64> {
        marginal_tail(self.threshold, self.scaling, n)
    }
}

/// `ln c_N` for the single-entry density `c_N (1 - x²)^{(N-3)/2}`.
fn log_entry_normalizer(n: u64) -> f64 {
    let nf = n as f64;
    ln_gamma_ratio((nf - 1.0) / 2.0, 0.5) - 0.5 * PI.ln()
}

// exponent drops at which [x0, 1] is cut into pieces before integrating
const TAIL_LEVELS: [f64; 13] = [
    -0.25, -0.5, -1.0, -2.0, -4.0, -8.0, -16.0, -32.0, -64.0, -128.0, -256.0, -512.0, -745.0,
];

/// `ln ∫_{x0}^1 (1 - u²)^a du` for `0 < x0 < 1`, in the shifted variable
/// `s = u - x0` and relative to the integrand's value at `x0`.
fn log_upper_integral(x0: f64, a: f64) -> Result<f64> {
    if a < 0.0 {
        return Err(Error::Domain(format!("negative tail exponent {a}")));
    }
    let span = 1.0 - x0;
    let base = (-x0 * x0).ln_1p(); // ln(1 - x0²)
    if a == 0.0 {
        let r = integrate(|_| 1.0, 0.0, span, Tolerance::default())?;
        return Ok(r.value.ln());
    }
    let one_minus_x0sq = (1.0 - x0) * (1.0 + x0);
    // exponent relative to the left end: a ln(1 - s(s + 2x0)/(1 - x0²))
    let shifted = |s: f64| -> f64 {
        let z = s * (s + 2.0 * x0) / one_minus_x0sq;
        if z >= 1.0 {
            return 0.0;
        }
        (a * (-z).ln_1p()).exp()
    };
    // s where the exponent reaches `level`: u² = 1 - (1 - x0²) e^{level/a}
    let cut = |level: f64| -> f64 {
        let u2 = -(base + level / a).exp_m1();
        (u2.max(0.0).sqrt() - x0).clamp(0.0, span)
    };
    let mut breaks = vec![0.0];
    for level in TAIL_LEVELS {
        let s = cut(level);
        if s > *breaks.last().unwrap() {
            breaks.push(s);
        }
    }
    // beyond the last cut the integrand is below e^-745 of its peak
    let mut total: f64 = 0.0;
    for w in breaks.windows(2) {
        // later pieces only need accuracy relative to the mass already found
        let tol = Tolerance {
            abs: (1e-15 * total).max(1e-300),
            rel: 1e-13,
            max_segments: 1_000,
        };
        total += integrate(shifted, w[0], w[1], tol)?.value;
    }
    if total <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(a * base + total.ln())
}

/// `ln P(X > x0)` for one entry `X` of an `N x N` Haar matrix, by log-domain
/// quadrature of `c_N (1 - x²)^{(N-3)/2}`.
fn log_entry_tail(x0: f64, n: u64) -> Result<f64> {
    if x0 >= 1.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if x0 <= -1.0 {
        return Ok(0.0);
    }
    if x0 == 0.0 {
        return Ok(0.5f64.ln());
    }
    let a = (n as f64 - 3.0) / 2.0;
    if x0 < 0.0 {
        let upper = log_entry_tail(-x0, n)?;
        return Ok((-upper.exp()).ln_1p());
    }
    Ok(log_entry_normalizer(n) + log_upper_integral(x0, a)?)
}

/// `ln P(scaled entry > t)` for a single entry of a Haar matrix in `O(N)`.
pub fn marginal_tail(t: f64, scaling: TailScaling, n: u64) -> Result<f64> {
    if n < 3 {
        return Err(Error::Dimension(format!(
            "marginal tail needs N >= 3, got {n}"
        )));
    }
    if t.is_nan() {
        return Err(Error::Invalid("NaN threshold".into()));
    }
    if let TailScaling::BetaN { b } = scaling {
        if !(b > 0.0 && b < 0.5) {
            return Err(Error::Invalid(format!(
                "beta exponent must lie in (0, 1/2), got {b}"
            )));
        }
    }
    let x0 = t / scaling.factor(n);
    log_entry_tail(x0, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalar(x: f64) -> MatrixBlock {
        MatrixBlock::new(1, 1, vec![x]).unwrap()
    }

    fn dims(n: u64, m: usize, k: usize) -> BlockDims {
        BlockDims::new(n, m, k).unwrap()
    }

    #[test]
    fn log_det_gap_examples() {
        assert_eq!(log_det_gap(&MatrixBlock::zeros(2, 2), 10).unwrap(), 0.0);
        let b = MatrixBlock::from_rows(&[vec![3.0, 4.0]]).unwrap();
        assert!((log_det_gap(&b, 50).unwrap() + 2f64.ln()).abs() < 1e-15);
        assert!(matches!(
            log_det_gap(&b, 25),
            Err(Error::OutOfSupport { .. })
        ));
    }

    #[test]
    fn block_density_n3_is_half() {
        let v = log_block_density(&scalar(0.0), &dims(3, 1, 1)).unwrap();
        assert!(v.in_support);
        assert!((v.log_value - 0.5f64.ln()).abs() < 1e-14);
        let v = log_block_density(&scalar(0.7), &dims(3, 1, 1)).unwrap();
        assert!((v.log_value - 0.5f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn block_density_outside_support() {
        // A Aᵀ = 1.2
        let a = MatrixBlock::from_rows(&[vec![0.6f64.sqrt(), 0.6f64.sqrt()]]).unwrap();
        let v = log_block_density(&a, &dims(10, 1, 2)).unwrap();
        assert!(!v.in_support);
        assert_eq!(v.log_value, f64::NEG_INFINITY);
        // boundary ‖A Aᵀ‖ = 1 is outside too
        let v = log_block_density(&scalar(1.0), &dims(10, 1, 1)).unwrap();
        assert!(!v.in_support);
    }

    #[test]
    fn block_density_rejects_small_ambient_dimension() {
        let bad = BlockDims { n: 3, m: 2, k: 2 };
        assert!(log_block_density(&MatrixBlock::zeros(2, 2), &bad).is_err());
        assert!(log_block_density(&MatrixBlock::zeros(2, 3), &dims(10, 2, 2)).is_err());
    }

    #[test]
    fn scaled_density_examples() {
        let v = log_scaled_density(&scalar(0.0), &dims(3, 1, 1)).unwrap();
        assert!((v.log_value - (0.5f64.ln() - 0.5 * 3f64.ln())).abs() < 1e-14);
        // ‖B‖² >= N m cannot sit inside the support
        let b = MatrixBlock::from_rows(&[vec![3.0, 3.0]]).unwrap();
        let v = log_scaled_density(&b, &dims(18, 1, 2)).unwrap();
        assert!(!v.in_support);
    }

    #[test]
    fn gaussian_density_examples() {
        assert!((log_gaussian_density(&scalar(0.0)) + 0.918_938_533_2).abs() < 1e-10);
        assert!(
            (log_gaussian_density(&MatrixBlock::zeros(2, 2)) + 2.0 * (2.0 * PI).ln()).abs()
                < 1e-14
        );
        assert!((log_gaussian_density(&scalar(1.0)) - (-0.5 * (2.0 * PI).ln() - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn ratio_examples() {
        let r = log_density_ratio(&scalar(0.0), &dims(1_000_000, 1, 1)).unwrap();
        assert!(r.abs() <= 1e-4, "{r}");
        let expected = 0.5f64.ln() - 0.5 * 3f64.ln() + 0.5 * (2.0 * PI).ln();
        let r = log_density_ratio(&scalar(0.0), &dims(3, 1, 1)).unwrap();
        assert!((r - expected).abs() < 1e-14);
        // ‖B‖_F = 3 on a 2x2 block
        let b = MatrixBlock::from_rows(&[vec![1.5, 1.5], vec![1.5, 1.5]]).unwrap();
        let r = log_density_ratio(&b, &dims(100_000, 2, 2)).unwrap();
        assert!(r.abs() <= 0.01, "{r}");
    }

    #[test]
    fn ratio_agrees_with_difference_of_logs() {
        let b = MatrixBlock::from_rows(&[vec![0.3, -1.2, 0.5], vec![2.0, 0.1, -0.4]]).unwrap();
        for &n in &[10u64, 57, 1000] {
            let d = dims(n, 2, 3);
            let direct = log_scaled_density(&b, &d).unwrap().log_value - log_gaussian_density(&b);
            let ratio = log_density_ratio(&b, &d).unwrap();
            assert!((direct - ratio).abs() < 1e-11, "N={n}: {direct} vs {ratio}");
        }
    }

    #[test]
    fn ratio_out_of_support_carries_op_norm() {
        match log_density_ratio(&scalar(4.0), &dims(16, 1, 1)) {
            Err(Error::OutOfSupport { op_norm, .. }) => assert!((op_norm - 1.0).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ln1m_plus_matches_direct_where_safe() {
        for &x in &[0.2, 0.1, 1e-3, -0.2, 0.24] {
            let direct = (-x as f64).ln_1p() + x;
            assert!((ln1m_plus(x) - direct).abs() < 1e-15, "{x}");
        }
        assert!((ln1m_plus(1e-9) + 5e-19).abs() < 1e-8 * 5e-19);
    }

    #[test]
    fn unscaled_density_normalizes() {
        for &n in &[3u64, 10, 100] {
            let d = dims(n, 1, 1);
            let r = integrate(
                |x| log_block_density(&scalar(x), &d).unwrap().density(),
                -1.0,
                1.0,
                Tolerance::default(),
            )
            .unwrap();
            assert!((r.value - 1.0).abs() < 1e-8, "N={n}: {}", r.value);
        }
    }

    #[test]
    fn scaled_density_normalizes() {
        for &n in &[3u64, 10, 100] {
            let d = dims(n, 1, 1);
            let s = (n as f64).sqrt();
            let r = integrate(
                |x| log_scaled_density(&scalar(x), &d).unwrap().density(),
                -s,
                s,
                Tolerance::default(),
            )
            .unwrap();
            assert!((r.value - 1.0).abs() < 1e-8, "N={n}: {}", r.value);
        }
    }

    #[test]
    fn ratio_times_gaussian_integrates_to_one() {
        let d = dims(100, 1, 1);
        let r = integrate(
            |x| {
                let b = scalar(x);
                (log_density_ratio(&b, &d).unwrap() + log_gaussian_density(&b)).exp()
            },
            -10.0 + 1e-12,
            10.0 - 1e-12,
            Tolerance::default(),
        )
        .unwrap();
        assert!((r.value - 1.0).abs() < 1e-6, "{}", r.value);
    }

    #[test]
    fn two_by_two_density_normalizes_over_disk_of_spectra() {
        // m=1, k=2: support is the unit disk; polar quadrature
        let d = dims(7, 1, 2);
        let radial = integrate(
            |r| {
                let b = MatrixBlock::from_rows(&[vec![r, 0.0]]).unwrap();
                2.0 * PI * r * log_block_density(&b, &d).unwrap().density()
            },
            0.0,
            1.0,
            Tolerance::default(),
        )
        .unwrap();
        assert!((radial.value - 1.0).abs() < 1e-10, "{}", radial.value);
    }

    #[test]
    fn tail_examples() {
        for &n in &[3u64, 10, 1_000, 10_000_000_000] {
            assert!((marginal_tail(0.0, TailScaling::Unscaled, n).unwrap() - 0.5f64.ln()).abs() < 1e-15);
            assert_eq!(marginal_tail(1.0, TailScaling::Unscaled, n).unwrap(), f64::NEG_INFINITY);
        }
        let v = marginal_tail(0.5, TailScaling::Unscaled, 3).unwrap();
        assert!((v - 0.25f64.ln()).abs() < 1e-13, "{v}");
        let v = marginal_tail(-0.5, TailScaling::Unscaled, 3).unwrap();
        assert!((v - 0.75f64.ln()).abs() < 1e-13, "{v}");
        assert!(marginal_tail(0.5, TailScaling::Unscaled, 2).is_err());
        assert!(marginal_tail(0.5, TailScaling::BetaN { b: 0.6 }, 100).is_err());
        assert!(TailQuery::new(1.0, TailScaling::BetaN { b: 0.0 }).is_err());
    }

    #[test]
    fn tail_beyond_scaled_support() {
        // N^b with b = 1/4 at N = 16 is 2; threshold 5 maps to 2.5 > 1
        let v = marginal_tail(5.0, TailScaling::BetaN { b: 0.25 }, 16).unwrap();
        assert_eq!(v, f64::NEG_INFINITY);
    }

    /// Independent oracle: P(X > x) = ½ I_{1-x²}((N-1)/2, ½), with the
    /// regularized incomplete beta evaluated by Lentz's continued fraction in
    /// the log domain.
    fn oracle_log_tail(x: f64, n: u64) -> f64 {
        let p = (n as f64 - 1.0) / 2.0;
        let q = 0.5;
        let z = 1.0 - x * x;
        // ln B(p, q) = ln Γ(½) - ln(Γ(p + ½)/Γ(p))
        let ln_beta = 0.5 * PI.ln() - crate::special::ln_gamma_ratio(p, 0.5);
        let ln_front = p * (-(x * x)).ln_1p() + q * (x * x).ln() - ln_beta - p.ln();
        let tiny = 1e-300;
        let mut c = 1.0;
        let mut d = 1.0 - (p + q) * z / (p + 1.0);
        if d.abs() < tiny {
            d = tiny;
        }
        d = 1.0 / d;
        let mut h = d;
        for mm in 1..100_000 {
            let m = mm as f64;
            let m2 = 2.0 * m;
            let aa = m * (q - m) * z / ((p + m2 - 1.0) * (p + m2));
            d = 1.0 + aa * d;
            if d.abs() < tiny {
                d = tiny;
            }
            c = 1.0 + aa / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            h *= d * c;
            let aa = -(p + m) * (p + q + m) * z / ((p + m2) * (p + m2 + 1.0));
            d = 1.0 + aa * d;
            if d.abs() < tiny {
                d = tiny;
            }
            c = 1.0 + aa / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        0.5f64.ln() + ln_front + h.ln()
    }

    #[test]
    fn tail_matches_incomplete_beta_oracle() {
        for &(x, n) in &[
            (0.3, 10u64),
            (0.9, 10),
            (0.5, 100),
            (0.2, 1_000),
            (0.05, 100_000),
            (0.01, 100_000_000),
            (0.003_162_277_660_168_379_5, 10_000_000_000),
        ] {
            let ours = marginal_tail(x, TailScaling::Unscaled, n).unwrap();
            let oracle = oracle_log_tail(x, n);
            assert!(
                (ours - oracle).abs() < 1e-8,
                "x={x} N={n}: {ours} vs {oracle}"
            );
        }
    }

    #[test]
    fn sqrt_scaling_approaches_gaussian_tail() {
        let v = marginal_tail(1.0, TailScaling::SqrtN, 10_000_000).unwrap();
        let gauss = (1.0 - crate::special::normal_cdf(1.0)).ln();
        assert!((v - gauss).abs() < 1e-6);
    }

    fn signed_perm(n: usize, perm: &[usize], signs: &[bool]) -> MatrixBlock {
        let mut e = vec![0.0; n * n];
        for i in 0..n {
            e[i * n + perm[i]] = if signs[i] { -1.0 } else { 1.0 };
        }
        MatrixBlock::new(n, n, e).unwrap()
    }

    proptest! {
        #[test]
        fn density_symmetric_under_signed_permutations(
            entries in proptest::collection::vec(-0.3f64..0.3, 6),
            s1 in proptest::collection::vec(any::<bool>(), 2),
            s2 in proptest::collection::vec(any::<bool>(), 3),
            swap in any::<bool>(),
            rot in 0usize..3,
        ) {
            let d = dims(12, 2, 3);
            let a = MatrixBlock::new(2, 3, entries).unwrap();
            let p = signed_perm(2, if swap { &[1, 0] } else { &[0, 1] }, &s1);
            let q = signed_perm(3, &[rot % 3, (rot + 1) % 3, (rot + 2) % 3], &s2);
            let paq = p.matmul(&a).unwrap().matmul(&q).unwrap();
            let base = log_block_density(&a, &d).unwrap();
            let neg = log_block_density(&a.neg(), &d).unwrap();
            let moved = log_block_density(&paq, &d).unwrap();
            prop_assert!((base.log_value - neg.log_value).abs() < 1e-12);
            prop_assert!((base.log_value - moved.log_value).abs() < 1e-12);
        }

        #[test]
        fn support_indicator_matches_op_norm(entries in proptest::collection::vec(-1.0f64..1.0, 4)) {
            let d = dims(9, 2, 2);
            let a = MatrixBlock::new(2, 2, entries).unwrap();
            let op = gram_spectrum(&a).unwrap().op_norm;
            let v = log_block_density(&a, &d).unwrap();
            prop_assert_eq!(v.in_support, op < 1.0);
        }
    }
}
