//! Resolved run configurations and their execution.

use std::collections::BTreeMap;

use haarblocks::asymptotics::{
    audit_local_limit, gamma_quotient_residual, logdet_expansion, remainder_bound, BoundReport,
    ExpansionBreakdown,
};
use haarblocks::density::{
    log_block_density, log_density_ratio, log_gaussian_density, log_scaled_density, TailQuery,
    TailScaling,
};
use haarblocks::experiments::{
    run_as_trace, run_concentration, run_empirical_decay, run_logmgf, run_mdp_block, run_mdp_entry,
    ExperimentReport, Schedule, TestFunction, SCHEMA_VERSION,
};
use haarblocks::rates::{
    build_histogram, kl_gaussian, kl_histogram, levy_distance, mdp_rate, orthogonal_ldp_rate,
    stiefel_ldp_rate, GaussianSpec, HilbertSchmidtMatrix, Histogram,
};
use haarblocks::sampling::{sample_scaled_block, EmpiricalSample};
use haarblocks::{derive_replica_seed, frobenius_sq, BlockDims, Execution, MatrixBlock, Seed};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::args::{Command, ExperimentKind, Format, Radius, RawConfig, Resolver};
use crate::error::CliError;

/// Largest ambient dimension accepted by commands that draw samples.
pub const SAMPLING_MAX_N: u64 = 100_000;

const DEFAULT_REPLICAS: usize = 1000;
const DEFAULT_PROBES: usize = 1000;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateInput {
    KlHistogram { histogram: Histogram },
    /// Histogram of a raw sample with `bins` equal bins on `[-l, l]`.
    KlSample {
        sample: Vec<f64>,
        #[serde(default = "default_l")]
        l: f64,
        #[serde(default = "default_bins")]
        bins: usize,
    },
    KlGaussian { spec: GaussianSpec },
    StiefelLdp { spec: GaussianSpec },
    OrthogonalLdp { matrix: MatrixBlock },
    Mdp { matrix: MatrixBlock },
    Levy { sample: Vec<f64> },
}

fn default_l() -> f64 {
    6.0
}

fn default_bins() -> usize {
    100
}

/// Command-specific inputs after validation.
#[derive(Debug, Clone)]
pub enum Task {
    Sample { dims: BlockDims, replicas: usize },
    DensityPoint { dims: BlockDims, point: MatrixBlock, scaled: bool },
    DensityTail { n: u64, query: TailQuery },
    Expand { dims: BlockDims, point: MatrixBlock },
    Audit { n_values: Vec<u64>, m: usize, k: usize, radius: Radius, probes: usize },
    Rate(RateInput),
    Logmgf { f: TestFunction, schedule: Schedule },
    Decay { epsilon: f64, schedule: Schedule },
    Trace { schedule: Schedule },
    MdpEntry { t: f64, schedule: Schedule },
    MdpBlock { t: f64, m: usize, k: usize, schedule: Schedule },
    Concentration { exponent: f64, schedule: Schedule },
}

/// A validated run: what to do, with which seed, and where the result goes.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub task: Task,
    pub seed: Seed,
    pub output_path: Option<std::path::PathBuf>,
    pub output_format: Format,
    pub threads: Option<usize>,
    pub record_time: bool,
    /// Every parameter after defaults, keyed by flag name.
    pub parameters: BTreeMap<String, Value>,
}

/// Configuration block embedded in every artifact; enough to re-run it.
#[derive(Debug, Clone, Serialize)]
pub struct EmbeddedConfig {
    pub command: String,
    pub format: Format,
    pub parameters: BTreeMap<String, Value>,
}

impl RunConfig {
    pub fn embedded(&self) -> EmbeddedConfig {
        EmbeddedConfig {
            command: self.command.label(),
            format: self.output_format,
            parameters: self.parameters.clone(),
        }
    }
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

fn dims(n: u64, m: usize, k: usize) -> Result<BlockDims, CliError> {
    BlockDims::new(n, m, k).map_err(usage)
}

fn check_sampling_n(n: u64) -> Result<(), CliError> {
    if n > SAMPLING_MAX_N {
        return Err(CliError::Usage(format!(
            "--N {n} exceeds the sampling limit {SAMPLING_MAX_N}; sampling commands draw dense blocks, \
             use the quadrature experiments (mdp-entry, density --t) for larger N"
        )));
    }
    Ok(())
}

fn parse_function(spec: &str) -> Result<TestFunction, CliError> {
    let bad = || CliError::Usage(format!("--function: cannot parse `{spec}` (use tanh:A, sin:A, quad:A,C or JSON)"));
    let f = if spec.trim_start().starts_with('{') {
        serde_json::from_str(spec).map_err(|e| CliError::Usage(format!("--function: {e}")))?
    } else {
        let (kind, args) = spec.split_once(':').ok_or_else(bad)?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        match (kind.trim(), nums.as_slice()) {
            ("tanh", [a]) => TestFunction::ScaledTanh { a: *a },
            ("sin", [a]) => TestFunction::ScaledSin { a: *a },
            ("quad", [a, c]) => TestFunction::ClampedQuadratic { a: *a, c: *c },
            _ => return Err(bad()),
        }
    };
    f.validate().map_err(usage)?;
    Ok(f)
}

fn read_input(arg: &str) -> Result<String, CliError> {
    if arg.trim_start().starts_with('{') {
        Ok(arg.to_string())
    } else {
        std::fs::read_to_string(arg).map_err(|e| CliError::Usage(format!("--input {arg}: {e}")))
    }
}

fn schedule(
    r: &mut Resolver,
    seed: u64,
    default_n: &[u64],
    alpha: bool,
    replicas: Option<usize>,
) -> Result<Schedule, CliError> {
    let n_values = r.n_list(Some(default_n))?;
    let alpha = if alpha { r.f64("alpha", Some(0.5))? } else { 0.5 };
    let replicas = match replicas {
        Some(d) => r.usize("replicas", Some(d))?,
        None => 1,
    };
    Schedule::new(n_values, alpha, replicas, Seed::new(seed)).map_err(usage)
}

/// Validates the merged parameters for the chosen command.
pub fn resolve(raw: RawConfig) -> Result<RunConfig, CliError> {
    let mut r = Resolver::new(&raw);
    let seed = r.seed()?;
    let task = match raw.command {
        Command::Sample => {
            let n = r.n(None)?;
            check_sampling_n(n)?;
            let d = dims(n, r.usize("m", Some(1))?, r.usize("k", Some(1))?)?;
            let replicas = r.usize("replicas", Some(1))?;
            if replicas == 0 {
                return Err(usage("--replicas must be positive"));
            }
            Task::Sample { dims: d, replicas }
        }
        Command::Density => {
            let n = r.n(None)?;
            if let Some(t) = r.opt_f64("t")? {
                let name = r.text("scaling").unwrap_or_else(|| "sqrtn".into());
                let scaling = match name.as_str() {
                    "unscaled" => TailScaling::Unscaled,
                    "sqrtn" => TailScaling::SqrtN,
                    "betan" => TailScaling::BetaN { b: r.f64("b", None)? },
                    other => {
                        return Err(usage(format!(
                            "--scaling: unknown scaling `{other}` (unscaled, sqrtn, betan)"
                        )))
                    }
                };
                r.record("scaling", Value::from(name.clone()));
                if n < 3 {
                    return Err(usage("tail queries need --N >= 3"));
                }
                Task::DensityTail {
                    n,
                    query: TailQuery::new(t, scaling).map_err(usage)?,
                }
            } else {
                let d = dims(n, r.usize("m", Some(1))?, r.usize("k", Some(1))?)?;
                let point = r
                    .json::<MatrixBlock>("point")?
                    .unwrap_or_else(|| MatrixBlock::zeros(d.m, d.k));
                let scaled = r.flag("scaled")?;
                Task::DensityPoint { dims: d, point, scaled }
            }
        }
        Command::Expand => {
            let n = r.n(None)?;
            let d = dims(n, r.usize("m", Some(1))?, r.usize("k", Some(1))?)?;
            let point = r
                .json::<MatrixBlock>("point")?
                .unwrap_or_else(|| MatrixBlock::zeros(d.m, d.k));
            Task::Expand { dims: d, point }
        }
        Command::AuditLll => {
            let n_values = r.n_list(None)?;
            let m = r.usize("m", Some(2))?;
            let k = r.usize("k", Some(2))?;
            for &n in &n_values {
                dims(n, m, k)?;
            }
            let radius = r.radius(Some(Radius::Power(0.2)))?;
            let probes = r.usize("probes", Some(DEFAULT_PROBES))?;
            Task::Audit { n_values, m, k, radius, probes }
        }
        Command::Rate => {
            let text = r.text("input").ok_or_else(|| usage("`rate` requires --input"))?;
            let json = read_input(&text)?;
            let value: Value = serde_json::from_str(&json)
                .map_err(|e| CliError::Usage(format!("--input: invalid JSON: {e}")))?;
            let input: RateInput = serde_json::from_value(value.clone())
                .map_err(|e| CliError::Usage(format!("--input: {e}")))?;
            r.record("input", value);
            Task::Rate(input)
        }
        Command::Experiment { kind } => match kind {
            ExperimentKind::Logmgf => {
                let f = parse_function(&r.text("function").unwrap_or_else(|| "tanh:0.5".into()))?;
                r.record("function", serde_json::to_value(f).expect("serializable"));
                let s = schedule(&mut r, seed, &[256, 1024, 4096], true, Some(2000))?;
                Task::Logmgf { f, schedule: s }
            }
            ExperimentKind::LdpDecay => {
                let epsilon = r.f64("epsilon", None)?;
                let s = schedule(&mut r, seed, &[100, 400, 1600], true, Some(DEFAULT_REPLICAS))?;
                Task::Decay { epsilon, schedule: s }
            }
            ExperimentKind::AsTrace => {
                let s = schedule(&mut r, seed, &[100, 1000, 10_000], true, None)?;
                Task::Trace { schedule: s }
            }
            ExperimentKind::MdpEntry => {
                let t = r.f64("t", Some(1.0))?;
                let b = r.f64("b", Some(0.25))?;
                let n_values = r.n_list(Some(&[1_000_000, 10_000_000, 100_000_000]))?;
                let s = Schedule::new(n_values, 0.5, 1, Seed::new(seed))
                    .and_then(|s| s.with_beta(b))
                    .map_err(usage)?;
                Task::MdpEntry { t, schedule: s }
            }
            ExperimentKind::MdpBlock => {
                let t = r.f64("t", Some(1.0))?;
                let b = r.f64("b", Some(0.25))?;
                let m = r.usize("m", Some(2))?;
                let k = r.usize("k", Some(2))?;
                let s = schedule(&mut r, seed, &[100, 200, 300, 400], false, Some(DEFAULT_REPLICAS))?
                    .with_beta(b)
                    .and_then(|s| s.with_block(m, k))
                    .map_err(usage)?;
                Task::MdpBlock { t, m, k, schedule: s }
            }
            ExperimentKind::Concentration => {
                let exponent = match r.radius(Some(Radius::Power(0.2)))? {
                    Radius::Power(e) => e,
                    Radius::Absolute(_) => {
                        return Err(usage("concentration takes --R as N^e (e.g. --R N^0.2)"))
                    }
                };
                let m = r.usize("m", Some(2))?;
                let k = r.usize("k", Some(2))?;
                let s = schedule(&mut r, seed, &[1_000, 10_000], false, Some(DEFAULT_REPLICAS))?
                    .with_block(m, k)
                    .map_err(usage)?;
                Task::Concentration { exponent, schedule: s }
            }
        },
    };
    if let Task::Logmgf { schedule: s, .. }
    | Task::Decay { schedule: s, .. }
    | Task::Trace { schedule: s }
    | Task::MdpBlock { schedule: s, .. }
    | Task::Concentration { schedule: s, .. } = &task
    {
        check_sampling_n(*s.n_values.last().expect("non-empty schedule"))?;
    }
    let parameters = r.finish()?;
    Ok(RunConfig {
        command: raw.command,
        task,
        seed: Seed::new(seed),
        output_path: raw.out,
        output_format: raw.format,
        threads: raw.threads,
        record_time: raw.record_time,
        parameters,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SampledBlock {
    pub replica: usize,
    pub block: MatrixBlock,
}

#[derive(Debug, Clone, Serialize)]
pub struct PointDensity {
    pub log_value: Option<f64>,
    pub in_support: bool,
    /// Set for scaled points.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_gaussian: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TailValue {
    pub threshold: f64,
    pub log_tail: Option<f64>,
    pub probability: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpansionResult {
    pub breakdown: ExpansionBreakdown,
    pub frobenius_norm: f64,
    pub remainder_bound_unit_constant: f64,
    pub gamma_quotient_residual: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateValue {
    /// `None` marks `+inf`.
    pub value: Option<f64>,
    pub infinite: bool,
}

/// The computed payload of a run.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Outcome {
    Samples(Vec<SampledBlock>),
    Point(PointDensity),
    Tail(TailValue),
    Expansion(ExpansionResult),
    Audit(Vec<BoundReport>),
    Rate(RateValue),
    Experiment(ExperimentReport),
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn rate_value(v: f64) -> RateValue {
    RateValue {
        value: finite(v),
        infinite: v == f64::INFINITY,
    }
}

fn evaluate_rate(input: &RateInput) -> Result<f64, CliError> {
    Ok(match input {
        RateInput::KlHistogram { histogram } => kl_histogram(histogram),
        RateInput::KlSample { sample, l, bins } => {
            let s = EmpiricalSample::from_values(sample.clone());
            kl_histogram(&build_histogram(&s, *l, *bins).map_err(usage)?)
        }
        RateInput::KlGaussian { spec } => kl_gaussian(spec),
        RateInput::StiefelLdp { spec } => stiefel_ldp_rate(spec)?,
        RateInput::OrthogonalLdp { matrix } => {
            orthogonal_ldp_rate(&HilbertSchmidtMatrix::new(matrix.clone()))?
        }
        RateInput::Mdp { matrix } => mdp_rate(matrix),
        RateInput::Levy { sample } => {
            if sample.iter().any(|x| !x.is_finite()) {
                return Err(usage("--input: sample values must be finite"));
            }
            levy_distance(&EmpiricalSample::from_values(sample.clone())).map_err(usage)?
        }
    })
}

/// Runs the task on the current rayon pool.
pub fn execute(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let exec = Execution::Parallel;
    Ok(match &cfg.task {
        Task::Sample { dims, replicas } => Outcome::Samples(
            haarblocks::parallel::map_indexed(exec, *replicas, |i| SampledBlock {
                replica: i,
                block: sample_scaled_block(*dims, derive_replica_seed(cfg.seed, i as u64)),
            }),
        ),
        Task::DensityPoint { dims, point, scaled } => {
            if point.rows() != dims.m || point.cols() != dims.k {
                return Err(usage(format!(
                    "--point is {}x{} but --m/--k give {}x{}",
                    point.rows(),
                    point.cols(),
                    dims.m,
                    dims.k
                )));
            }
            if *scaled {
                let v = log_scaled_density(point, dims)?;
                let log_gaussian = log_gaussian_density(point);
                let log_ratio = if v.in_support {
                    Some(log_density_ratio(point, dims)?)
                } else {
                    None
                };
                Outcome::Point(PointDensity {
                    log_value: finite(v.log_value),
                    in_support: v.in_support,
                    log_gaussian: Some(log_gaussian),
                    log_ratio,
                })
            } else {
                let v = log_block_density(point, dims)?;
                Outcome::Point(PointDensity {
                    log_value: finite(v.log_value),
                    in_support: v.in_support,
                    log_gaussian: None,
                    log_ratio: None,
                })
            }
        }
        Task::DensityTail { n, query } => {
            let log_tail = query.log_tail(*n)?;
            Outcome::Tail(TailValue {
                threshold: query.threshold,
                log_tail: finite(log_tail),
                probability: log_tail.exp(),
            })
        }
        Task::Expand { dims, point } => {
            let breakdown = logdet_expansion(point, dims)?;
            let norm = frobenius_sq(point).sqrt();
            let residual = if dims.n > (dims.m + dims.k) as u64 {
                Some(gamma_quotient_residual(dims)?)
            } else {
                None
            };
            Outcome::Expansion(ExpansionResult {
                breakdown,
                frobenius_norm: norm,
                remainder_bound_unit_constant: remainder_bound(norm, dims, 1.0),
                gamma_quotient_residual: residual,
            })
        }
        Task::Audit { n_values, m, k, radius, probes } => {
            let mut reports = Vec::with_capacity(n_values.len());
            for (i, &n) in n_values.iter().enumerate() {
                let d = dims(n, *m, *k)?;
                let seed = derive_replica_seed(cfg.seed, i as u64);
                reports.push(audit_local_limit(&d, radius.at(n), *probes, seed, exec)?);
            }
            Outcome::Audit(reports)
        }
        Task::Rate(input) => Outcome::Rate(rate_value(evaluate_rate(input)?)),
        Task::Logmgf { f, schedule } => Outcome::Experiment(run_logmgf(*f, schedule, exec)?),
        Task::Decay { epsilon, schedule } => {
            Outcome::Experiment(run_empirical_decay(*epsilon, schedule, exec)?)
        }
        Task::Trace { schedule } => Outcome::Experiment(run_as_trace(schedule)?),
        Task::MdpEntry { t, schedule } => Outcome::Experiment(run_mdp_entry(*t, schedule)?),
        Task::MdpBlock { t, m, k, schedule } => {
            Outcome::Experiment(run_mdp_block(*t, *m, *k, schedule, exec)?)
        }
        Task::Concentration { exponent, schedule } => {
            Outcome::Experiment(run_concentration(schedule, *exponent, exec)?)
        }
    })
}

/// Full JSON artifact: schema version, the resolved config and the result.
#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    pub schema_version: u32,
    pub config: EmbeddedConfig,
    pub result: Outcome,
}

pub fn artifact(cfg: &RunConfig, outcome: Outcome) -> Artifact {
    Artifact {
        schema_version: SCHEMA_VERSION,
        config: cfg.embedded(),
        result: outcome,
    }
}

/// One-line description of a finished run.
pub fn summary(cfg: &RunConfig, outcome: &Outcome) -> String {
    let label = cfg.command.label();
    let body = match outcome {
        Outcome::Samples(s) => format!("{} block(s)", s.len()),
        Outcome::Point(p) => match p.log_value {
            Some(v) => format!("log density {v}"),
            None => "outside the support".into(),
        },
        Outcome::Tail(t) => match t.log_tail {
            Some(v) => format!("log tail {v}"),
            None => "tail probability 0".into(),
        },
        Outcome::Expansion(e) => format!("remainder {:e}", e.breakdown.remainder),
        Outcome::Audit(reports) => {
            let last = reports.last().expect("non-empty");
            format!(
                "{} dimension(s), last observed {:e}, implied constant {:.4}",
                reports.len(),
                last.observed,
                last.implied_constant
            )
        }
        Outcome::Rate(v) => match v.value {
            Some(x) => format!("value {x}"),
            None => "value +inf".into(),
        },
        Outcome::Experiment(rep) => {
            let last = rep.rows.last().expect("non-empty");
            let est = last.estimate.map_or("none".into(), |e| format!("{e:.6}"));
            format!("{} row(s), last estimate {est} ({:?})", rep.rows.len(), last.status)
        }
    };
    format!("{label}: {body}")
}
