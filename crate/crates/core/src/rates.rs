//! Rate functions of the deviation principles and a computable weak-topology
//! distance to the standard Gaussian.
//!
//! The Lévy metric is used in place of Lévy–Prokhorov: on the real line both
//! metrize weak convergence, and the Lévy distance is exact from CDFs.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::block::{frobenius_sq, gram_spectrum, MatrixBlock};
use crate::error::{Error, Result};
use crate::sampling::EmpiricalSample;
use crate::special::normal_cdf;

const MASS_TOL: f64 = 1e-12;
const PSD_TOL: f64 = -1e-10;

/// Bin masses over `[edges[0], edges[last]]` with an unbounded bin at each end.
///
/// `masses[0]` is the lower tail `(-inf, edges[0])`, `masses[i]` for
/// `1 <= i < edges.len()` is `[edges[i-1], edges[i])`, and the last entry is
/// the upper tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHistogram")]
pub struct Histogram {
    edges: Vec<f64>,
    masses: Vec<f64>,
}

#[derive(Deserialize)]
struct RawHistogram {
    edges: Vec<f64>,
    masses: Vec<f64>,
}

impl TryFrom<RawHistogram> for Histogram {
    type Error = Error;
    fn try_from(raw: RawHistogram) -> Result<Self> {
        Histogram::new(raw.edges, raw.masses)
    }
}

impl Histogram {
    pub fn new(edges: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::Invalid("histogram needs at least one edge".into()));
        }
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid(
                "histogram edges must be finite and strictly increasing".into(),
            ));
        }
        if masses.len() != edges.len() + 1 {
            return Err(Error::Invalid(format!(
                "{} edges need {} masses (interior bins plus two tails), got {}",
                edges.len(),
                edges.len() + 1,
                masses.len()
            )));
        }
        if masses.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Invalid("histogram masses must be non-negative".into()));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Invalid(format!(
                "histogram masses sum to {total}, expected 1"
            )));
        }
        Ok(Self { edges, masses })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn interior_bins(&self) -> usize {
        self.edges.len() - 1
    }

    /// Standard normal mass of every bin, in the same layout as `masses`.
    pub fn gaussian_masses(&self) -> Vec<f64> {
        let e = &self.edges;
        let mut q = Vec::with_capacity(self.masses.len());
        q.push(normal_cdf(e[0]));
        for w in e.windows(2) {
            // difference taken on the side where the CDF values are small
            let mass = if w[0] >= 0.0 {
                normal_cdf(-w[0]) - normal_cdf(-w[1])
            } else {
                normal_cdf(w[1]) - normal_cdf(w[0])
            };
            q.push(mass.max(0.0));
        }
        q.push(normal_cdf(-e[e.len() - 1]));
        q
    }
}

/// `sum p_i log(p_i / q_i)` against the standard normal bin masses.
pub fn kl_histogram(mu: &Histogram) -> f64 {
    let q = mu.gaussian_masses();
    let mut kl = 0.0;
    for (&p, &qi) in mu.masses.iter().zip(&q) {
        if p == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return f64::INFINITY;
        }
        kl += p * (p / qi).ln();
    }
    // the sum is non-negative in exact arithmetic
    kl.max(0.0)
}

/// Equal-width bins on `[-l, l]` plus the two tails; masses are frequencies.
pub fn build_histogram(sample: &EmpiricalSample, l: f64, bins: usize) -> Result<Histogram> {
    if !(l > 0.0 && l.is_finite()) || bins < 2 {
        return Err(Error::Invalid(format!(
            "histogram needs L > 0 and bins >= 2 (got L = {l}, bins = {bins})"
        )));
    }
    if sample.is_empty() {
        return Err(Error::Invalid("cannot bin an empty sample".into()));
    }
    let width = 2.0 * l / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| -l + i as f64 * width).collect();
    let mut counts = vec![0u64; bins + 2];
    for &x in sample.values() {
        let slot = if x < edges[0] {
            0
        } else if x >= edges[bins] {
            bins + 1
        } else {
            let mut i = (((x + l) / width).floor() as usize).min(bins - 1);
            // guard the rounding of the division against the stored edges
            while i > 0 && x < edges[i] {
                i -= 1;
            }
            while i + 1 < bins && x >= edges[i + 1] {
                i += 1;
            }
            i + 1
        };
        counts[slot] += 1;
    }
    let n = sample.len() as f64;
    let mut masses: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    // absorb the last ulp of normalisation drift into the largest bin
    let drift = 1.0 - masses.iter().sum::<f64>();
    let big = (0..masses.len())
        .max_by(|&a, &b| masses[a].total_cmp(&masses[b]))
        .expect("non-empty");
    masses[big] += drift;
    Histogram::new(edges, masses)
}

/// A Gaussian law on `R^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGaussian")]
pub struct GaussianSpec {
    mean: Vec<f64>,
    covariance: MatrixBlock,
}

#[derive(Deserialize)]
struct RawGaussian {
    mean: Vec<f64>,
    covariance: MatrixBlock,
}

impl TryFrom<RawGaussian> for GaussianSpec {
    type Error = Error;
    fn try_from(raw: RawGaussian) -> Result<Self> {
        GaussianSpec::new(raw.mean, raw.covariance)
    }
}

impl GaussianSpec {
    pub fn new(mean: Vec<f64>, covariance: MatrixBlock) -> Result<Self> {
        let m = mean.len();
        if m == 0 || covariance.rows() != m || covariance.cols() != m {
            return Err(Error::Dimension(format!(
                "mean of length {m} needs an {m}x{m} covariance, got {}x{}",
                covariance.rows(),
                covariance.cols()
            )));
        }
        if mean.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid("mean must be finite".into()));
        }
        for i in 0..m {
            for j in 0..i {
                if (covariance.get(i, j) - covariance.get(j, i)).abs() > 1e-12 {
                    return Err(Error::Invalid(format!(
                        "covariance is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let eig = eigenvalues(covariance.to_dmatrix());
        let scale = eig.iter().fold(1.0_f64, |a, l| a.max(l.abs()));
        if eig.iter().any(|&l| l < -1e-12 * scale) {
            return Err(Error::Invalid("covariance is not positive semidefinite".into()));
        }
        Ok(Self { mean, covariance })
    }

    /// Mean `mean` with identity covariance.
    pub fn shifted_standard(mean: Vec<f64>) -> Result<Self> {
        let m = mean.len();
        Self::new(mean, MatrixBlock::identity(m))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &MatrixBlock {
        &self.covariance
    }

    /// Second-moment matrix `Σ + μμᵀ`.
    pub fn second_moment(&self) -> DMatrix<f64> {
        let mu = DVector::from_column_slice(&self.mean);
        self.covariance.to_dmatrix() + &mu * mu.transpose()
    }
}

fn eigenvalues(sym: DMatrix<f64>) -> Vec<f64> {
    sym.symmetric_eigenvalues().iter().copied().collect()
}

/// Relative entropy of the Gaussian law with respect to the standard one.
/// A singular covariance gives `+inf`.
pub fn kl_gaussian(spec: &GaussianSpec) -> f64 {
    let sigma = spec.covariance.to_dmatrix();
    let Some(chol) = sigma.clone().cholesky() else {
        return f64::INFINITY;
    };
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    if !log_det.is_finite() {
        return f64::INFINITY;
    }
    let m = spec.dim() as f64;
    let mean_sq: f64 = spec.mean.iter().map(|x| x * x).sum();
    0.5 * (sigma.trace() + mean_sq - m - log_det)
}

/// Rate of the Stiefel empirical-measure principle on a Gaussian law:
/// `H + ½ Tr(I - C)` with `C` the second-moment matrix, finite only when
/// `C - I` is positive semidefinite.
///
/// The value is returned as the formula gives it, also when negative.
pub fn stiefel_ldp_rate(spec: &GaussianSpec) -> Result<f64> {
    let c = spec.second_moment();
    let m = spec.dim();
    let excess = eigenvalues(&c - DMatrix::<f64>::identity(m, m));
    if excess.iter().any(|&l| l < PSD_TOL) {
        return Ok(f64::INFINITY);
    }
    let value = kl_gaussian(spec) + 0.5 * (m as f64 - c.trace());
    if value < 0.0 {
        log::warn!("stiefel rate evaluates to {value} < 0 for second moment with trace {}", c.trace());
    }
    Ok(value)
}

/// Finite representative of a Hilbert–Schmidt operator; every entry outside
/// the stored rectangle is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HilbertSchmidtMatrix(MatrixBlock);

impl HilbertSchmidtMatrix {
    pub fn new(block: MatrixBlock) -> Self {
        Self(block)
    }

    pub fn block(&self) -> &MatrixBlock {
        &self.0
    }

    pub fn padded(&self, rows: usize, cols: usize) -> Self {
        Self(self.0.padded(rows, cols))
    }
}

/// `-½ log det(I - TTᵀ)`, `+inf` once `‖TTᵀ‖_op >= 1`.
pub fn orthogonal_ldp_rate(t: &HilbertSchmidtMatrix) -> Result<f64> {
    let spec = gram_spectrum(&t.0)?;
    if spec.op_norm >= 1.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-0.5 * spec.eigenvalues.iter().map(|&s| (-s).ln_1p()).sum::<f64>())
}

/// `½ ‖A‖_F²`.
pub fn mdp_rate(a: &MatrixBlock) -> f64 {
    0.5 * frobenius_sq(a)
}

/// Lévy distance between the empirical CDF of `sample` and `Φ`.
pub fn levy_distance(sample: &EmpiricalSample) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::Invalid("Lévy distance of an empty sample".into()));
    }
    let n = sample.len() as f64;
    // distinct atoms with the empirical CDF just before and at each of them
    let mut atoms: Vec<(f64, f64, f64)> = Vec::new();
    let values = sample.values();
    let mut i = 0;
    while i < values.len() {
        let x = values[i];
        let mut j = i;
        while j < values.len() && values[j] == x {
            j += 1;
        }
        atoms.push((x, i as f64 / n, j as f64 / n));
        i = j;
    }
    let holds = |eps: f64| {
        atoms.iter().all(|&(x, before, at)| {
            normal_cdf(x - eps) - before <= eps && at - normal_cdf(x + eps) <= eps
        })
    };
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    if holds(0.0) {
        return Ok(0.0);
    }
    while hi - lo > f64::EPSILON * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::sample_gaussian_block;
    use crate::seed::{derive_replica_seed, Seed};
    use proptest::prelude::*;

    fn quantile(p: f64) -> f64 {
        let (mut lo, mut hi) = (-40.0, 40.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if normal_cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn normals(n: usize, seed: u64) -> EmpiricalSample {
        let b = sample_gaussian_block(1, n, Seed::new(seed)).unwrap();
        EmpiricalSample::from_values(b.into_entries())
    }

    #[test]
    fn histogram_validation() {
        assert!(Histogram::new(vec![0.0], vec![1.0, 0.0]).is_ok());
        assert!(Histogram::new(vec![0.0], vec![0.7, 0.2]).is_err());
        assert!(Histogram::new(vec![1.0, 0.0], vec![0.5, 0.0, 0.5]).is_err());
        assert!(Histogram::new(vec![0.0], vec![1.0]).is_err());
        assert!(Histogram::new(vec![0.0], vec![1.5, -0.5]).is_err());
        assert!(Histogram::new(vec![], vec![1.0]).is_err());
    }

    #[test]
    fn kl_split_at_zero() {
        let h = Histogram::new(vec![0.0], vec![1.0, 0.0]).unwrap();
        assert!((kl_histogram(&h) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn kl_zero_on_gaussian_masses() {
        let edges: Vec<f64> = (0..=100).map(|i| -6.0 + 0.12 * i as f64).collect();
        let probe = Histogram::new(edges.clone(), {
            let mut v = vec![0.0; 102];
            v[50] = 1.0;
            v
        })
        .unwrap();
        let q = probe.gaussian_masses();
        let total: f64 = q.iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
        let h = Histogram::new(edges, q).unwrap();
        assert!(kl_histogram(&h).abs() < 1e-12);
    }

    #[test]
    fn histogram_of_constant_sample() {
        let s = EmpiricalSample::from_values(vec![0.31; 17]);
        let h = build_histogram(&s, 6.0, 100).unwrap();
        assert_eq!(h.masses().len(), 102);
        assert_eq!(h.edges().len(), 101);
        let nonzero: Vec<usize> = (0..102).filter(|&i| h.masses()[i] > 0.0).collect();
        assert_eq!(nonzero.len(), 1);
        let i = nonzero[0];
        assert!(i >= 1 && i <= 100);
        assert!(h.edges()[i - 1] <= 0.31 && 0.31 < h.edges()[i]);
        assert_eq!(h.masses()[i], 1.0);
    }

    #[test]
    fn histogram_tails_and_edges() {
        let s = EmpiricalSample::from_values(vec![-7.0, -6.0, 6.0, 0.0]);
        let h = build_histogram(&s, 6.0, 4).unwrap();
        assert_eq!(h.masses(), &[0.25, 0.25, 0.0, 0.25, 0.0, 0.25]);
        assert!(build_histogram(&s, 6.0, 1).is_err());
        assert!(build_histogram(&s, 0.0, 4).is_err());
    }

    #[test]
    fn histogram_kl_of_many_normals_is_small() {
        let s = normals(1_000_000, 11);
        let h = build_histogram(&s, 6.0, 100).unwrap();
        let total: f64 = h.masses().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let kl = kl_histogram(&h);
        assert!(kl <= 1e-4 + 100.0 / 2e6, "kl = {kl}");
    }

    #[test]
    fn gaussian_kl_closed_forms() {
        let id = GaussianSpec::shifted_standard(vec![0.0, 0.0]).unwrap();
        assert_eq!(kl_gaussian(&id), 0.0);
        let shifted = GaussianSpec::shifted_standard(vec![1.0]).unwrap();
        assert!((kl_gaussian(&shifted) - 0.5).abs() < 1e-12);
        let wide = GaussianSpec::new(vec![0.0], MatrixBlock::from_rows(&[vec![4.0]]).unwrap()).unwrap();
        let expected = 0.5 * (4.0 - 1.0 - 4.0f64.ln());
        assert!((kl_gaussian(&wide) - expected).abs() < 1e-12);
        assert!((kl_gaussian(&wide) - 0.806_852_819_4).abs() < 1e-10);
        let singular = GaussianSpec::new(
            vec![0.0, 0.0],
            MatrixBlock::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap(),
        )
        .unwrap();
        assert_eq!(kl_gaussian(&singular), f64::INFINITY);
    }

    #[test]
    fn gaussian_spec_validation() {
        let asym = MatrixBlock::from_rows(&[vec![1.0, 0.5], vec![0.4, 1.0]]).unwrap();
        assert!(GaussianSpec::new(vec![0.0, 0.0], asym).is_err());
        let indef = MatrixBlock::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(GaussianSpec::new(vec![0.0, 0.0], indef).is_err());
        assert!(GaussianSpec::new(vec![0.0], MatrixBlock::identity(2)).is_err());
        let parsed: GaussianSpec =
            serde_json::from_str(r#"{"mean":[1.0],"covariance":[[1.0]]}"#).unwrap();
        assert_eq!(parsed.mean(), &[1.0]);
    }

    #[test]
    fn stiefel_rate_branches() {
        let id = GaussianSpec::shifted_standard(vec![0.0, 0.0]).unwrap();
        assert_eq!(stiefel_ldp_rate(&id).unwrap(), 0.0);
        let narrow =
            GaussianSpec::new(vec![0.0], MatrixBlock::from_rows(&[vec![0.5]]).unwrap()).unwrap();
        assert_eq!(stiefel_ldp_rate(&narrow).unwrap(), f64::INFINITY);
        // literal value of the formula at variance 4
        let wide = GaussianSpec::new(vec![0.0], MatrixBlock::from_rows(&[vec![4.0]]).unwrap()).unwrap();
        let v = stiefel_ldp_rate(&wide).unwrap();
        assert!((v + std::f64::consts::LN_2).abs() < 1e-12);
        // a mean shift alone: ½μ² + ½(1 - 1 - μ²) = 0
        let shift = GaussianSpec::shifted_standard(vec![0.7]).unwrap();
        assert!(stiefel_ldp_rate(&shift).unwrap().abs() < 1e-15);
    }

    #[test]
    fn orthogonal_rate_values() {
        let zero = HilbertSchmidtMatrix::new(MatrixBlock::zeros(3, 2));
        assert_eq!(orthogonal_ldp_rate(&zero).unwrap(), 0.0);
        let t = HilbertSchmidtMatrix::new(MatrixBlock::from_rows(&[vec![0.6]]).unwrap());
        assert!((orthogonal_ldp_rate(&t).unwrap() - 0.223_143_551_3).abs() < 1e-10);
        assert!((orthogonal_ldp_rate(&t).unwrap() + 0.5 * 0.64f64.ln()).abs() < 1e-15);
        let edge = HilbertSchmidtMatrix::new(
            MatrixBlock::from_rows(&[vec![0.0, 1.0, 0.0], vec![0.2, 0.0, 0.1]]).unwrap(),
        );
        assert_eq!(orthogonal_ldp_rate(&edge).unwrap(), f64::INFINITY);
    }

    #[test]
    fn mdp_rate_values() {
        assert_eq!(mdp_rate(&MatrixBlock::zeros(2, 2)), 0.0);
        let a = MatrixBlock::from_rows(&[vec![3.0, 4.0]]).unwrap();
        assert_eq!(mdp_rate(&a), 12.5);
        assert_eq!(mdp_rate(&a.padded(3, 7)), 12.5);
    }

    #[test]
    fn levy_single_atom_at_zero() {
        let d = levy_distance(&EmpiricalSample::from_values(vec![0.0])).unwrap();
        // root of Φ(-ε) = ε
        assert!((d - 0.359_580_452_052_064_6).abs() < 1e-14, "d = {d}");
        assert!(d > 0.3 && d < 0.4);
    }

    #[test]
    fn levy_quantile_sample() {
        let p = 10_000;
        let xs: Vec<f64> = (0..p).map(|i| quantile((i as f64 + 0.5) / p as f64)).collect();
        let d = levy_distance(&EmpiricalSample::from_values(xs)).unwrap();
        assert!(d <= 2.0 / p as f64, "d = {d}");
    }

    #[test]
    fn levy_rejects_empty_and_stays_in_unit_interval() {
        assert!(levy_distance(&EmpiricalSample::from_values(vec![])).is_err());
        let far = levy_distance(&EmpiricalSample::from_values(vec![1e6; 3])).unwrap();
        assert!(far <= 1.0 && far > 0.99);
    }

    #[test]
    fn levy_invariant_under_duplication() {
        let s = normals(257, 3);
        let mut doubled = s.values().to_vec();
        doubled.extend_from_slice(s.values());
        let a = levy_distance(&s).unwrap();
        let b = levy_distance(&EmpiricalSample::from_values(doubled)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn levy_of_normals_is_dkw_scale() {
        let n = 2000;
        let root = Seed::new(2024);
        let within = (0..100)
            .filter(|&r| {
                let b = sample_gaussian_block(1, n, derive_replica_seed(root, r)).unwrap();
                let d = levy_distance(&EmpiricalSample::from_values(b.into_entries())).unwrap();
                d <= 3.0 / (n as f64).sqrt()
            })
            .count();
        assert!(within >= 95, "within = {within}");
    }

    fn random_block(r: usize, c: usize, vals: &[f64]) -> MatrixBlock {
        MatrixBlock::new(r, c, vals[..r * c].to_vec()).unwrap()
    }

    proptest! {
        #[test]
        fn refinement_never_decreases_kl(
            raw in prop::collection::vec(0.0f64..1.0, 8),
            cut in 0usize..8,
            frac in 0.0f64..1.0,
            left_share in 0.0f64..1.0,
        ) {
            let total: f64 = raw.iter().sum::<f64>() + 1e-3;
            let masses: Vec<f64> = raw.iter().map(|x| (x + 1e-3 / 8.0) / total).collect();
            let edges: Vec<f64> = (0..7).map(|i| -3.0 + i as f64).collect();
            let coarse = Histogram::new(edges.clone(), masses.clone()).unwrap();

            // split one bin at an interior point (tails are split at ±(|edge|+1+frac))
            let mut fine_edges = edges.clone();
            let at = match cut {
                0 => edges[0] - 1.0 - frac,
                7 => edges[6] + 1.0 + frac,
                c => edges[c - 1] + frac.clamp(0.01, 0.99),
            };
            let pos = fine_edges.partition_point(|&e| e < at);
            fine_edges.insert(pos, at);
            let mut fine_masses = masses.clone();
            let m = fine_masses[cut];
            fine_masses[cut] = m * left_share;
            fine_masses.insert(cut + 1, m * (1.0 - left_share));
            let fine = Histogram::new(fine_edges, fine_masses).unwrap();
            prop_assert!(kl_histogram(&fine) >= kl_histogram(&coarse) - 1e-12);
            prop_assert!(kl_histogram(&coarse) >= 0.0);
        }

        #[test]
        fn mdp_rate_is_convex(
            a in prop::collection::vec(-5.0f64..5.0, 12),
            b in prop::collection::vec(-5.0f64..5.0, 12),
            t in 0.0f64..1.0,
        ) {
            let ma = random_block(3, 4, &a);
            let mb = random_block(3, 4, &b);
            let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| t * x + (1.0 - t) * y).collect();
            let mm = random_block(3, 4, &mix);
            prop_assert!(mdp_rate(&mm) <= t * mdp_rate(&ma) + (1.0 - t) * mdp_rate(&mb) + 1e-12);
        }

        #[test]
        fn orthogonal_rate_matches_singular_values(
            vals in prop::collection::vec(-1.0f64..1.0, 12),
            rows in 1usize..4,
            cols in 1usize..4,
            scale in 0.01f64..0.5,
        ) {
            let t = random_block(rows, cols, &vals).scaled(scale);
            let hs = HilbertSchmidtMatrix::new(t.clone());
            let rate = orthogonal_ldp_rate(&hs).unwrap();
            let svd = t.to_dmatrix().svd(false, false);
            let oracle: f64 = svd.singular_values.iter().map(|s| -0.5 * (1.0 - s * s).ln()).sum();
            prop_assert!((rate - oracle).abs() <= 1e-10 * (1.0 + oracle));
            let padded = orthogonal_ldp_rate(&hs.padded(rows + 3, cols + 5)).unwrap();
            prop_assert!((rate - padded).abs() <= 1e-12);
        }

        #[test]
        fn gaussian_kl_with_identity_is_half_mean_square(
            mean in prop::collection::vec(-10.0f64..10.0, 1..5),
        ) {
            let spec = GaussianSpec::shifted_standard(mean.clone()).unwrap();
            let half: f64 = 0.5 * mean.iter().map(|x| x * x).sum::<f64>();
            prop_assert!((kl_gaussian(&spec) - half).abs() <= 1e-12 * (1.0 + half));
        }
    }
}
