//! Scheduled Monte Carlo and quadrature experiments for the deviation
//! theorems, producing serializable per-`N` reports.
//!
//! Every replica draws from `derive(derive(root, n_index), replica)`, and
//! results are folded in replica order, so a report depends only on its
//! inputs and never on the execution strategy.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::block::{frobenius_sq, BlockDims};
use crate::density::{marginal_tail, TailScaling};
use crate::error::{Error, Result};
use crate::parallel::{map_indexed, Execution};
use crate::quadrature::GaussHermite;
use crate::rates::levy_distance;
use crate::sampling::{empirical_sample, sample_block, sample_scaled_block};
use crate::seed::{derive_replica_seed, Seed};
use crate::special::log_sum_exp;

pub const SCHEMA_VERSION: u32 = 1;

/// Hits needed before a Monte Carlo slope counts as confident.
pub const MIN_CONFIDENT_HITS: u64 = 100;

const HERMITE_POINTS: usize = 200;

/// Fixed block shape, overriding the factorization of `p_N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockShape {
    pub m: usize,
    pub k: usize,
}

/// Dimensions, exponents, replica count and root seed of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub n_values: Vec<u64>,
    /// `p_N = round(N^alpha)`.
    pub alpha: f64,
    /// `beta_N = N^b`.
    pub beta_exponent: Option<f64>,
    pub replicas: usize,
    pub root_seed: Seed,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block: Option<BlockShape>,
}

impl Schedule {
    pub fn new(n_values: Vec<u64>, alpha: f64, replicas: usize, root_seed: Seed) -> Result<Self> {
        let s = Self {
            n_values,
            alpha,
            beta_exponent: None,
            replicas,
            root_seed,
            block: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_beta(mut self, b: f64) -> Result<Self> {
        self.beta_exponent = Some(b);
        self.validate()?;
        Ok(self)
    }

    pub fn with_block(mut self, m: usize, k: usize) -> Result<Self> {
        self.block = Some(BlockShape { m, k });
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() {
            return Err(Error::Invalid("schedule has no N values".into()));
        }
        if self.n_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid("schedule N values must be strictly increasing".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if let Some(b) = self.beta_exponent {
            if !(b > 0.0 && b < 0.5) {
                return Err(Error::Invalid(format!("beta exponent must lie in (0, 1/2), got {b}")));
            }
        }
        if self.replicas == 0 {
            return Err(Error::Invalid("replica count must be positive".into()));
        }
        for &n in &self.n_values {
            self.dims(n)?;
        }
        Ok(())
    }

    /// `round(N^alpha)`, at least 1.
    pub fn p(&self, n: u64) -> usize {
        ((n as f64).powf(self.alpha).round() as usize).max(1)
    }

    /// Block dimensions at `N`: the fixed shape if set, else the most square
    /// factorization of `p_N`.
    pub fn dims(&self, n: u64) -> Result<BlockDims> {
        let (m, k) = match self.block {
            Some(BlockShape { m, k }) => (m, k),
            None => square_factorization(self.p(n)),
        };
        BlockDims::new(n, m, k)
    }

    pub fn beta(&self, n: u64) -> Option<f64> {
        self.beta_exponent.map(|b| (n as f64).powf(b))
    }

    fn require_beta(&self) -> Result<f64> {
        self.beta_exponent
            .ok_or_else(|| Error::Invalid("this experiment needs a beta exponent b".into()))
    }

    fn n_seed(&self, n_index: usize) -> Seed {
        derive_replica_seed(self.root_seed, n_index as u64)
    }
}

/// `(m, k)` with `m k = p` and `m` the divisor of `p` nearest `round(sqrt p)`
/// (ties go to the divisor nearer `sqrt p`, then to the smaller one).
pub fn square_factorization(p: usize) -> (usize, usize) {
    assert!(p >= 1);
    let root = (p as f64).sqrt();
    let target = root.round();
    let m = (1..=p)
        .filter(|d| p % d == 0)
        .min_by(|&a, &b| {
            let key = |d: usize| ((d as f64 - target).abs(), (d as f64 - root).abs(), d);
            let (ka, kb) = (key(a), key(b));
            ka.0.total_cmp(&kb.0)
                .then(ka.1.total_cmp(&kb.1))
                .then(ka.2.cmp(&kb.2))
        })
        .expect("1 divides p");
    (m, p / m)
}

/// Bounded test function of a single entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    /// `a tanh(x)`.
    ScaledTanh { a: f64 },
    /// `a sin(x)`.
    ScaledSin { a: f64 },
    /// `c x²` clamped to `[-a, a]`.
    ClampedQuadratic { a: f64, c: f64 },
}

impl TestFunction {
    pub fn validate(&self) -> Result<()> {
        let (a, c) = match *self {
            TestFunction::ScaledTanh { a } | TestFunction::ScaledSin { a } => (a, 0.0),
            TestFunction::ClampedQuadratic { a, c } => (a, c),
        };
        if !(a >= 0.0 && a.is_finite()) || !c.is_finite() {
            return Err(Error::Invalid(format!(
                "test function needs a finite bound a >= 0, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            TestFunction::ScaledTanh { a } => a * x.tanh(),
            TestFunction::ScaledSin { a } => a * x.sin(),
            TestFunction::ClampedQuadratic { a, c } => (c * x * x).clamp(-a, a),
        }
    }

    /// `sup |f|` as guaranteed by construction.
    pub fn bound(&self) -> f64 {
        match *self {
            TestFunction::ScaledTanh { a }
            | TestFunction::ScaledSin { a }
            | TestFunction::ClampedQuadratic { a, .. } => a,
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            TestFunction::ScaledTanh { a } | TestFunction::ScaledSin { a } => a == 0.0,
            TestFunction::ClampedQuadratic { a, c } => a == 0.0 || c == 0.0,
        }
    }

    /// `ln E[exp f(g)]` for standard normal `g`, by Gauss–Hermite quadrature.
    pub fn log_mgf_reference(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        GaussHermite::new(HERMITE_POINTS)
            .normal_expectation(|x| self.eval(x).exp())
            .ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    /// No replica hit the event; no estimate is reported.
    Censored,
    /// Fewer than [`MIN_CONFIDENT_HITS`] hits.
    LowConfidence,
    /// The threshold lies outside the support at this `N`.
    OutOfSupport,
    /// The row contradicts the fitted bound by more than two standard errors.
    Violation,
}

/// One scheduled dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub n: u64,
    pub m: Option<usize>,
    pub k: Option<usize>,
    pub p: Option<usize>,
    pub beta: Option<f64>,
    /// Event threshold (epsilon, t or R_N), when the experiment has one.
    pub threshold: Option<f64>,
    pub speed: f64,
    pub replicas: usize,
    pub hits: Option<u64>,
    pub probability: Option<f64>,
    /// Natural log of `probability`, kept when the probability underflows.
    pub log_probability: Option<f64>,
    pub estimate: Option<f64>,
    pub reference: Option<f64>,
    pub abs_error: Option<f64>,
    pub mc_stderr: f64,
    pub status: RowStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub experiment: String,
    pub schedule: Schedule,
    pub parameters: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_function: Option<TestFunction>,
    /// Only filled in on request, so that reports stay byte-reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub metadata: ReportMetadata,
    pub rows: Vec<ReportRow>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl ExperimentReport {
    fn new(experiment: &str, schedule: &Schedule) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            metadata: ReportMetadata {
                experiment: experiment.to_string(),
                schedule: schedule.clone(),
                parameters: BTreeMap::new(),
                test_function: None,
                wall_time_seconds: None,
            },
            rows: Vec::new(),
            diagnostics: BTreeMap::new(),
        }
    }

    fn parameter(mut self, name: &str, value: f64) -> Self {
        self.metadata.parameters.insert(name.to_string(), value);
        self
    }

    pub fn row(&self, n: u64) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.n == n)
    }

    /// Largest-`N` row whose status is [`RowStatus::Ok`].
    pub fn last_confident(&self) -> Option<&ReportRow> {
        self.rows.iter().rev().find(|r| r.status == RowStatus::Ok)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Invalid(e.to_string()))
    }
}

// -0.0 and 0.0 must print the same
fn clean(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x
    }
}

fn base_row(n: u64, dims: Option<BlockDims>, speed: f64, replicas: usize) -> ReportRow {
    ReportRow {
        n,
        m: dims.map(|d| d.m),
        k: dims.map(|d| d.k),
        p: dims.map(|d| d.p()),
        beta: None,
        threshold: None,
        speed,
        replicas,
        hits: None,
        probability: None,
        log_probability: None,
        estimate: None,
        reference: None,
        abs_error: None,
        mc_stderr: 0.0,
        status: RowStatus::Ok,
    }
}

/// Fills probability, estimate `-ln(p̂) / speed` and its delta-method error,
/// censoring when nothing hit.
fn fill_slope(row: &mut ReportRow, hits: u64, replicas: usize) {
    let m = replicas as f64;
    let p_hat = hits as f64 / m;
    row.hits = Some(hits);
    row.probability = Some(p_hat);
    row.log_probability = (hits > 0).then(|| p_hat.ln());
    if hits == 0 {
        row.status = RowStatus::Censored;
        return;
    }
    row.estimate = Some(clean(-p_hat.ln() / row.speed));
    // se(ln p̂) = se(p̂) / p̂
    row.mc_stderr = clean(((1.0 - p_hat) / (m * p_hat)).sqrt() / row.speed);
    row.status = if hits < MIN_CONFIDENT_HITS {
        RowStatus::LowConfidence
    } else {
        RowStatus::Ok
    };
    if let (Some(est), Some(reference)) = (row.estimate, row.reference) {
        row.abs_error = Some((est - reference).abs());
    }
}

fn count_hits<F>(schedule: &Schedule, n_index: usize, exec: Execution, hit: F) -> u64
where
    F: Fn(Seed) -> bool + Sync + Send,
{
    let n_seed = schedule.n_seed(n_index);
    map_indexed(exec, schedule.replicas, |r| hit(derive_replica_seed(n_seed, r as u64)))
        .into_iter()
        .filter(|&h| h)
        .count() as u64
}

/// Log-moment-generating functional `(1/p) ln mean_r exp(Σ_ij f(y_ij))`
/// against `ln E[exp f(g)]`.
pub fn run_logmgf(f: TestFunction, schedule: &Schedule, exec: Execution) -> Result<ExperimentReport> {
    schedule.validate()?;
    f.validate()?;
    let reference = f.log_mgf_reference();
    let mut report = ExperimentReport::new("logmgf", schedule);
    report.metadata.test_function = Some(f);
    report.diagnostics.insert("reference".into(), reference);
    let m = schedule.replicas as f64;

    for (i, &n) in schedule.n_values.iter().enumerate() {
        let dims = schedule.dims(n)?;
        let p = dims.p() as f64;
        let mut row = base_row(n, Some(dims), p, schedule.replicas);
        row.reference = Some(reference);
        if f.is_zero() {
            row.estimate = Some(0.0);
            row.abs_error = Some(0.0);
            report.rows.push(row);
            continue;
        }
        let n_seed = schedule.n_seed(i);
        let sums: Vec<f64> = map_indexed(exec, schedule.replicas, |r| {
            let y = sample_scaled_block(dims, derive_replica_seed(n_seed, r as u64));
            y.entries().iter().map(|&x| f.eval(x)).sum()
        });
        let lse = log_sum_exp(&sums);
        let estimate = (lse - m.ln()) / p;

        // delta method on the log of the mean of w = exp(S - max)
        let max = sums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = sums.iter().map(|s| (s - max).exp()).collect();
        let mean = w.iter().sum::<f64>() / m;
        let var = if schedule.replicas > 1 {
            w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0)
        } else {
            0.0
        };
        row.estimate = Some(clean(estimate));
        row.abs_error = Some((estimate - reference).abs());
        row.mc_stderr = clean(var.sqrt() / (m.sqrt() * mean) / p);
        report.rows.push(row);
    }
    Ok(report)
}

/// Decay of `P(levy(ν_N, γ) > ε)` at speed `p_N`.
pub fn run_empirical_decay(epsilon: f64, schedule: &Schedule, exec: Execution) -> Result<ExperimentReport> {
    schedule.validate()?;
    if !(epsilon > 0.0) {
        return Err(Error::Invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    let mut report = ExperimentReport::new("ldp-decay", schedule).parameter("epsilon", epsilon);
    for (i, &n) in schedule.n_values.iter().enumerate() {
        let dims = schedule.dims(n)?;
        let mut row = base_row(n, Some(dims), dims.p() as f64, schedule.replicas);
        row.threshold = Some(epsilon);
        let hits = count_hits(schedule, i, exec, |seed| {
            let sample = empirical_sample(&sample_scaled_block(dims, seed));
            levy_distance(&sample).expect("non-empty block") > epsilon
        });
        fill_slope(&mut row, hits, schedule.replicas);
        report.rows.push(row);
    }
    Ok(report)
}

/// One trajectory of `levy(ν_N, γ)` along the schedule.
pub fn run_as_trace(schedule: &Schedule) -> Result<ExperimentReport> {
    schedule.validate()?;
    let mut report = ExperimentReport::new("as-trace", schedule);
    for (i, &n) in schedule.n_values.iter().enumerate() {
        let dims = schedule.dims(n)?;
        let mut row = base_row(n, Some(dims), dims.p() as f64, 1);
        let block = sample_scaled_block(dims, derive_replica_seed(schedule.n_seed(i), 0));
        row.estimate = Some(levy_distance(&empirical_sample(&block))?);
        report.rows.push(row);
    }
    Ok(report)
}

/// Exact single-entry tail `r_N = -(β_N²/N) ln P(β_N X > t)` by quadrature.
pub fn run_mdp_entry(t: f64, schedule: &Schedule) -> Result<ExperimentReport> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Invalid(format!("threshold t must be positive, got {t}")));
    }
    let b = schedule.require_beta()?;
    let n_values = &schedule.n_values;
    if n_values.is_empty() || n_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid("schedule N values must be strictly increasing".into()));
    }
    let reference = 0.5 * t * t;
    let mut report = ExperimentReport::new("mdp-entry", schedule).parameter("t", t);
    for &n in n_values {
        let beta = (n as f64).powf(b);
        let mut row = base_row(n, None, n as f64 / (beta * beta), 0);
        row.m = Some(1);
        row.k = Some(1);
        row.beta = Some(beta);
        row.threshold = Some(t);
        row.reference = Some(reference);
        let log_tail = marginal_tail(t, TailScaling::BetaN { b }, n)?;
        if log_tail == f64::NEG_INFINITY {
            row.status = RowStatus::OutOfSupport;
        } else {
            row.probability = Some(log_tail.exp());
            row.log_probability = Some(log_tail);
            let r = clean(-log_tail / row.speed);
            row.estimate = Some(r);
            row.abs_error = Some((r - reference).abs());
        }
        report.rows.push(row);
    }
    Ok(report)
}

/// Monte Carlo `-(β_N²/N) ln P(β_N ‖Z_N‖_F > t)` for an `m x k` block.
pub fn run_mdp_block(
    t: f64,
    m: usize,
    k: usize,
    schedule: &Schedule,
    exec: Execution,
) -> Result<ExperimentReport> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Invalid(format!("threshold t must be non-negative, got {t}")));
    }
    let schedule = schedule.clone().with_block(m, k)?;
    let b = schedule.require_beta()?;
    let reference = 0.5 * t * t;
    let mut report = ExperimentReport::new("mdp-block", &schedule).parameter("t", t);
    for (i, &n) in schedule.n_values.iter().enumerate() {
        let dims = schedule.dims(n)?;
        let beta = (n as f64).powf(b);
        let mut row = base_row(n, Some(dims), n as f64 / (beta * beta), schedule.replicas);
        row.beta = Some(beta);
        row.threshold = Some(t);
        row.reference = Some(reference);
        // β‖Z‖ > t  ⇔  ‖Z‖² > (t/β)²
        let level = (t / beta).powi(2);
        let hits = count_hits(&schedule, i, exec, |seed| frobenius_sq(&sample_block(dims, seed)) > level);
        fill_slope(&mut row, hits, schedule.replicas);
        report.rows.push(row);
    }
    Ok(report)
}

/// Fraction of `replicas` scaled blocks with Frobenius norm above `radius`.
pub fn exceedance_probability(
    dims: BlockDims,
    radius: f64,
    replicas: usize,
    seed: Seed,
    exec: Execution,
) -> f64 {
    let norms = scaled_norms_sq(dims, replicas, seed, exec);
    exceedance_fractions(&norms, &[radius])[0]
}

fn scaled_norms_sq(dims: BlockDims, replicas: usize, seed: Seed, exec: Execution) -> Vec<f64> {
    map_indexed(exec, replicas, |r| {
        frobenius_sq(&sample_scaled_block(dims, derive_replica_seed(seed, r as u64)))
    })
}

/// For each radius, the fraction of squared norms exceeding its square.
pub fn exceedance_fractions(norms_sq: &[f64], radii: &[f64]) -> Vec<f64> {
    let total = norms_sq.len() as f64;
    radii
        .iter()
        .map(|r| norms_sq.iter().filter(|&&v| v > r * r).count() as f64 / total)
        .collect()
}

/// Tail of `‖√N Z_N‖_F` at `R_N = N^e` and a fitted Gaussian-type bound
/// `p̂ <= exp(-c R_N²)`.
///
/// `c` is the least-squares slope through the origin of `-ln p̂` against
/// `R_N²` over the rows that saw at least one hit.
pub fn run_concentration(schedule: &Schedule, r_exponent: f64, exec: Execution) -> Result<ExperimentReport> {
    schedule.validate()?;
    if !(r_exponent > 0.0 && r_exponent < 0.5) {
        return Err(Error::Invalid(format!("R exponent must lie in (0, 1/2), got {r_exponent}")));
    }
    let mut report =
        ExperimentReport::new("concentration", schedule).parameter("r_exponent", r_exponent);
    for (i, &n) in schedule.n_values.iter().enumerate() {
        let dims = schedule.dims(n)?;
        let radius = (n as f64).powf(r_exponent);
        let mut row = base_row(n, Some(dims), radius * radius, schedule.replicas);
        row.threshold = Some(radius);
        let level = radius * radius;
        let hits = count_hits(schedule, i, exec, |seed| frobenius_sq(&sample_scaled_block(dims, seed)) > level);
        fill_slope(&mut row, hits, schedule.replicas);
        report.rows.push(row);
    }

    let (mut sxy, mut sxx) = (0.0, 0.0);
    for row in &report.rows {
        if let Some(est) = row.estimate {
            let x = row.speed;
            sxy += x * (est * x);
            sxx += x * x;
        }
    }
    if sxx > 0.0 {
        let c = clean(sxy / sxx);
        report.diagnostics.insert("fitted_c".into(), c);
        let m = schedule.replicas as f64;
        let mut violations = 0.0;
        for row in report.rows.iter_mut() {
            let p_hat = row.probability.expect("filled");
            let bound = (-c * row.speed).exp();
            row.reference = Some(c);
            if let Some(est) = row.estimate {
                row.abs_error = Some((est - c).abs());
            }
            let se = (bound * (1.0 - bound) / m).sqrt();
            if c <= 0.0 || p_hat - bound > 2.0 * se {
                row.status = RowStatus::Violation;
                violations += 1.0;
            }
        }
        report.diagnostics.insert("violations".into(), violations);
    }
    Ok(report)
}
