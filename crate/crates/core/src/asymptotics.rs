//! Log-determinant expansion, gamma-quotient residual and the uniform
//! local-limit bound, each with an evaluator and an empirical audit.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::block::{frobenius_sq, gram_spectrum, BlockDims, MatrixBlock, SpectralSummary};
use crate::density::{
    det_exponent, log_density_ratio_from_spectrum, log_det_gap_from_spectrum, normalizer_residual,
};
use crate::error::{Error, Result};
use crate::parallel::{map_indexed, Execution};
use crate::seed::{derive_replica_seed, Seed};

/// Terms of
/// `C_N ln det(I - BBᵀ/N) = -½‖B‖² + (k+m+1)/(2N) ‖B‖² - Tr((BBᵀ)²)/(4N) + R'_N(B)`
/// with `C_N = (N - k - m - 1)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionBreakdown {
    pub leading: f64,
    pub correction_frobenius: f64,
    pub correction_trace: f64,
    pub exact: f64,
    /// `exact - (leading + correction_frobenius + correction_trace)`.
    pub remainder: f64,
}

impl ExpansionBreakdown {
    pub fn truncated(&self) -> f64 {
        self.leading + self.correction_frobenius + self.correction_trace
    }
}

pub fn logdet_expansion(b: &MatrixBlock, dims: &BlockDims) -> Result<ExpansionBreakdown> {
    if b.rows() != dims.m || b.cols() != dims.k {
        return Err(Error::Dimension(format!(
            "block is {}x{} but dims say {}x{}",
            b.rows(),
            b.cols(),
            dims.m,
            dims.k
        )));
    }
    let spec = gram_spectrum(b)?;
    expansion_from_spectrum(&spec, dims)
}

fn expansion_from_spectrum(spec: &SpectralSummary, dims: &BlockDims) -> Result<ExpansionBreakdown> {
    let n = dims.n_f64();
    let exact = det_exponent(dims) * log_det_gap_from_spectrum(spec, dims.n)?;
    let fro = spec.trace;
    let leading = -0.5 * fro;
    let correction_frobenius = (dims.k + dims.m + 1) as f64 / (2.0 * n) * fro;
    let correction_trace = -spec.trace_of_square / (4.0 * n);
    let remainder = exact - (leading + correction_frobenius + correction_trace);
    Ok(ExpansionBreakdown {
        leading,
        correction_frobenius,
        correction_trace,
        exact,
        remainder,
    })
}

/// `C ((k+m) R⁴ / N² + R⁶ / N²)`.
pub fn remainder_bound(r: f64, dims: &BlockDims, c: f64) -> f64 {
    let n2 = dims.n_f64().powi(2);
    c * ((dims.k + dims.m) as f64 * r.powi(4) / n2 + r.powi(6) / n2)
}

/// `ln Γ_m(N/2) - ln Γ_m((N-k)/2) - (mk/2) ln(N/2)`, which is `O(mk(m+k)/N)`.
pub fn gamma_quotient_residual(dims: &BlockDims) -> Result<f64> {
    if dims.n <= (dims.m + dims.k) as u64 {
        return Err(Error::Domain(format!(
            "gamma quotient needs N > m + k, got N={} m={} k={}",
            dims.n, dims.m, dims.k
        )));
    }
    normalizer_residual(dims)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundTerm {
    pub name: String,
    pub value: f64,
}

/// Observed quantity against the named terms of a bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub dims: BlockDims,
    pub radius: f64,
    pub constant: f64,
    pub observed: f64,
    pub bound_terms: Vec<BoundTerm>,
    /// `observed / Σ bound_terms`.
    pub implied_constant: f64,
    pub probes: usize,
}

impl BoundReport {
    pub fn term_sum(&self) -> f64 {
        self.bound_terms.iter().map(|t| t.value).sum()
    }

    /// `constant · Σ bound_terms`.
    pub fn bound(&self) -> f64 {
        self.constant * self.term_sum()
    }

    pub fn term_values(&self) -> Vec<f64> {
        self.bound_terms.iter().map(|t| t.value).collect()
    }
}

/// Terms `R⁴/N`, `mk(m+k)/N`, `(k+m)R²/N` of the local-limit bound.
pub fn local_limit_bound(r: f64, dims: &BlockDims, c: f64) -> Result<BoundReport> {
    if !(r >= 0.0) || !(c > 0.0) {
        return Err(Error::Invalid(format!(
            "radius must be >= 0 and constant > 0, got R={r}, C={c}"
        )));
    }
    let n = dims.n_f64();
    let (m, k) = (dims.m as f64, dims.k as f64);
    let terms = [
        ("radius_quartic", r.powi(4) / n),
        ("dimension", m * k * (m + k) / n),
        ("radius_quadratic", (k + m) * r * r / n),
    ];
    Ok(BoundReport {
        dims: *dims,
        radius: r,
        constant: c,
        observed: 0.0,
        bound_terms: terms
            .iter()
            .map(|(name, value)| BoundTerm {
                name: (*name).to_string(),
                value: *value,
            })
            .collect(),
        implied_constant: 0.0,
        probes: 0,
    })
}

/// Deterministic probes at radius `r`: rank-one, constant, single-entry and
/// flat-spectrum blocks.
fn structured_probes(dims: &BlockDims, r: f64) -> Vec<MatrixBlock> {
    let (m, k) = (dims.m, dims.k);
    let mut out = Vec::new();

    let mut corner = MatrixBlock::zeros(m, k).into_entries();
    corner[0] = r;
    out.push(MatrixBlock::new(m, k, corner).unwrap());

    let mut last = MatrixBlock::zeros(m, k).into_entries();
    last[m * k - 1] = r;
    out.push(MatrixBlock::new(m, k, last).unwrap());

    let c = r / ((m * k) as f64).sqrt();
    out.push(MatrixBlock::new(m, k, vec![c; m * k]).unwrap());

    // rank one u vᵀ with alternating signs
    let mut alt = Vec::with_capacity(m * k);
    for i in 0..m {
        for j in 0..k {
            alt.push(if (i + j) % 2 == 0 { c } else { -c });
        }
    }
    out.push(MatrixBlock::new(m, k, alt).unwrap());

    // flat spectrum: min(m,k) equal singular values
    let d = m.min(k);
    let s = r / (d as f64).sqrt();
    let mut flat = vec![0.0; m * k];
    for i in 0..d {
        flat[i * k + i] = s;
    }
    out.push(MatrixBlock::new(m, k, flat).unwrap());

    out
}

pub const AUDIT_RADIUS_FRACTIONS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

/// Empirical `sup_{‖B‖_F <= R} |ln g_N(B)/φ_N(B)|` over a probe set.
pub fn audit_local_limit(
    dims: &BlockDims,
    r: f64,
    n_probe: usize,
    seed: Seed,
    exec: Execution,
) -> Result<BoundReport> {
    if !(r >= 0.0) || r * r >= dims.n_f64() {
        return Err(Error::Invalid(format!(
            "audit radius must satisfy 0 <= R² < N, got R={r}, N={}",
            dims.n
        )));
    }
    let ratio_of = |b: &MatrixBlock| -> Result<f64> {
        let spec = gram_spectrum(b)?;
        log_density_ratio_from_spectrum(&spec, dims)
    };

    let mut observed = ratio_of(&MatrixBlock::zeros(dims.m, dims.k))?.abs();
    let structured = structured_probes(dims, r);
    for b in &structured {
        observed = observed.max(ratio_of(b)?.abs());
    }

    let random: Vec<Result<f64>> = map_indexed(exec, n_probe, |i| {
        let mut rng = derive_replica_seed(seed, i as u64).rng();
        let dir: Vec<f64> = (0..dims.p()).map(|_| rng.sample(StandardNormal)).collect();
        let dir = MatrixBlock::new(dims.m, dims.k, dir)?;
        let norm = frobenius_sq(&dir).sqrt();
        let mut worst: f64 = 0.0;
        for frac in AUDIT_RADIUS_FRACTIONS {
            let b = dir.scaled(frac * r / norm);
            worst = worst.max(ratio_of(&b)?.abs());
        }
        Ok(worst)
    });
    for v in random {
        observed = observed.max(v?);
    }

    let mut report = local_limit_bound(r, dims, 1.0)?;
    report.observed = observed;
    report.probes = 1 + structured.len() + n_probe * AUDIT_RADIUS_FRACTIONS.len();
    let sum = report.term_sum();
    report.implied_constant = if sum > 0.0 { observed / sum } else { 0.0 };
    Ok(report)
}
