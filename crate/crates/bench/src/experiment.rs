//! Running configured experiments and persisting their results.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use tensormin::instances::ZooInstance;
use tensormin::schemes::{
    make_regularized, restart_constant, run_accelerated, run_alg1, run_alg2, run_alg3, run_alg4,
    run_alg6_restart, RestartBound, RunMeta, RunStatus, RunTrace, SchemeConfig, SchemeError,
};
use tensormin::{factorial, CompositePart, PrimalVector, SmoothOracle};

use crate::config::{ConfigError, ExperimentConfig, SchemeName, StartPoint};
use crate::replay::{accel_rows, AccelRow, ReplayContext, RestartContext};
use crate::trace_io::write_trace_csv;
use crate::BenchError;

pub const SCHEMA_VERSION: u32 = 1;
pub const TRACE_FILE: &str = "trace.csv";
pub const SUMMARY_FILE: &str = "summary.json";
/// Estimating-function records of the accelerated schemes.
pub const ACCEL_FILE: &str = "accel.json";

/// A scheme run with the constants needed to replay its bounds.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: RunTrace,
    pub context: ReplayContext,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub scheme: SchemeName,
    pub instance: tensormin::instances::ZooSpec,
    pub composite: CompositePart,
    pub status: RunStatus,
    pub iterations: usize,
    pub oracle_calls: u64,
    pub min_grad_norm: f64,
    pub final_f_value: f64,
    pub final_grad_norm: f64,
    pub meta: RunMeta,
    pub seed: u64,
    pub context: ReplayContext,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub outcome: RunOutcome,
    pub summary: Summary,
    pub trace_path: PathBuf,
    pub summary_path: PathBuf,
}

fn starting_point(cfg: &ExperimentConfig, n: usize) -> PrimalVector {
    let x0 = match &cfg.x0 {
        StartPoint::Zero => DVector::zeros(n),
        StartPoint::Random => {
            // separate stream: instance data is drawn from stream 0 of the same seed
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(1);
            DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng))
        }
        StartPoint::Given(v) => DVector::from_vec(v.clone()),
    };
    // a random start is moved into the box so that every scheme may use it
    match (&cfg.x0, &cfg.composite) {
        (StartPoint::Random, c @ CompositePart::Box { .. }) => c.project(&x0),
        _ => x0,
    }
}

/// Upper bound on `‖x₀ − x*‖` for the composite problem: with a box the
/// minimizer lies in the box, so the farthest corner bounds the distance.
fn composite_distance(inst: &ZooInstance, phi: &CompositePart, x0: &PrimalVector) -> Option<f64> {
    match phi {
        CompositePart::Zero => inst.distance_bound(x0),
        CompositePart::Box { lower, upper } => Some(
            x0.iter()
                .zip(lower.iter().zip(upper))
                .map(|(x, (l, u))| (x - l).abs().max((u - x).abs()).powi(2))
                .sum::<f64>()
                .sqrt(),
        ),
        CompositePart::L1 { .. } => None,
    }
}

fn runtime(e: SchemeError) -> BenchError {
    match e {
        SchemeError::Config(m) => BenchError::Config(ConfigError::new("scheme", m)),
        other => BenchError::Runtime {
            message: other.to_string(),
            partial: other.partial_trace().cloned().map(Box::new),
        },
    }
}

/// Runs the configured scheme without touching the file system.
pub fn run_scheme(cfg: &ExperimentConfig) -> Result<RunOutcome, BenchError> {
    cfg.validate()?;
    if !cfg.composite.is_zero() && matches!(cfg.scheme, SchemeName::Alg1 | SchemeName::Alg2) {
        return Err(ConfigError::new(
            "composite",
            format!("scheme {} minimizes smooth functions only", cfg.scheme),
        )
        .into());
    }
    let inst = cfg
        .instance
        .build(cfg.p)
        .map_err(|e| ConfigError::new("instance", e.to_string()))?;
    let f: &dyn SmoothOracle = inst.oracle.as_ref();
    let n = f.dim();
    let x0 = starting_point(cfg, n);
    if !cfg.composite.contains(&x0) {
        return Err(ConfigError::new("x0", "starting point lies outside the box").into());
    }
    let mut sc: SchemeConfig = cfg.scheme_config();
    sc.x0 = Some(x0.clone());
    let phi = Some(&cfg.composite).filter(|c| !c.is_zero());

    // declared Hölder data: the configured ν, or the one the function declares
    let (nu, h) = match cfg.nu {
        Some(nu) => (Some(nu), f.holder_constant(nu)),
        None => f.holder().map_or((None, None), |hd| (Some(hd.nu), Some(hd.constant))),
    };
    if cfg.scheme.needs_declared_nu() || cfg.scheme.is_composite() {
        if h.is_none() {
            return Err(ConfigError::new(
                "nu",
                format!("instance declares no Hölder constant for ν = {}", nu.unwrap_or(f64::NAN)),
            )
            .into());
        }
    }
    let distance = composite_distance(&inst, &cfg.composite, &x0);
    let mut ctx = ReplayContext {
        scheme: Some(cfg.scheme),
        p: Some(cfg.p),
        alpha: Some(sc.alpha()),
        nu,
        holder_constant: h,
        known_nu: cfg.nu.is_some(),
        epsilon: Some(cfg.epsilon),
        theta: Some(cfg.theta),
        h0: Some(cfg.h0),
        htilde0: Some(cfg.htilde0),
        f_star: inst.f_star.filter(|_| cfg.composite.is_zero()),
        // φ ≥ 0 for the supported terms, so f* bounds f̃* from below
        f_star_lower: inst.f_star,
        distance,
        level_radius: inst.level_set_radius(&x0).filter(|_| cfg.composite.is_zero()),
        fixed_m: None,
        minimizer: inst
            .minimizer
            .as_ref()
            .filter(|_| cfg.composite.is_zero())
            .map(|m| m.iter().copied().collect()),
        composite: cfg.composite.clone(),
        restart: None,
    };

    let trace = match cfg.scheme {
        SchemeName::Alg1 => run_alg1(f, &sc).map_err(runtime)?,
        SchemeName::Alg2 => run_alg2(f, &sc).map_err(runtime)?,
        SchemeName::Alg3 => run_alg3(f, &cfg.composite, &sc).map_err(runtime)?,
        SchemeName::Alg4 => run_alg4(f, &cfg.composite, &sc).map_err(runtime)?,
        SchemeName::AlgA => {
            let q = sc.exponent();
            let h = h.unwrap_or_default();
            let m = cfg
                .fixed_m
                .unwrap_or((q - 1.0) * (h + cfg.theta * factorial(cfg.p - 1)));
            run_accelerated(f, phi, &sc, m, cfg.iterations).map_err(runtime)?
        }
        SchemeName::Alg5 | SchemeName::Alg6 => {
            let bound = match (cfg.delta, cfg.bound) {
                (Some(_), b) => b,
                (None, Some(b)) => Some(b),
                (None, None) => Some(RestartBound::Distance(distance.ok_or_else(|| {
                    ConfigError::new("bound", "instance has no distance bound; pass --delta or --bound")
                })?.max(1.0))),
            };
            let delta = cfg
                .delta
                .or_else(|| bound.map(|b| b.delta(cfg.epsilon, sc.exponent())))
                .ok_or_else(|| ConfigError::new("delta", "cannot determine δ"))?;
            let (r, s) = match bound {
                Some(RestartBound::Distance(r)) => (Some(r), None),
                Some(RestartBound::Residual(s)) => (None, Some(s)),
                None => (distance, None),
            };
            if cfg.scheme == SchemeName::Alg6 {
                let tr = run_alg6_restart(f, phi, &sc, Some(delta), bound).map_err(runtime)?;
                let info = tr.restart.as_ref().expect("restart runs record their data");
                ctx.restart = Some(RestartContext {
                    delta: info.delta,
                    h_delta: info.h_delta,
                    m: info.m,
                    distance_bound: r,
                    residual_bound: s,
                });
                // rows measure F̃_δ, whose optimum is not known
                ctx.f_star = None;
                ctx.minimizer = None;
                ctx.level_radius = None;
                tr
            } else {
                let reg = make_regularized(f, delta, x0.clone(), sc.exponent(), tensormin::MetricSpace::identity(n))
                    .map_err(|e| ConfigError::new("delta", e.to_string()))?;
                let h_delta = restart_constant(f, &sc, delta).map_err(runtime)?;
                ctx.holder_constant = reg.holder_constant(sc.alpha());
                ctx.f_star = None;
                ctx.minimizer = None;
                ctx.level_radius = None;
                let mut tr = run_accelerated(&reg, phi, &sc, h_delta, cfg.iterations).map_err(runtime)?;
                tr.meta.scheme = "alg5".into();
                tr
            }
        }
    };
    ctx.fixed_m = trace.meta.fixed_m;
    Ok(RunOutcome { trace, context: ctx })
}

fn summarize(cfg: &ExperimentConfig, out: &RunOutcome) -> Summary {
    let tr = &out.trace;
    let last = tr.last();
    Summary {
        schema_version: SCHEMA_VERSION,
        scheme: cfg.scheme,
        instance: cfg.instance.clone(),
        composite: cfg.composite.clone(),
        status: tr.status.clone(),
        iterations: tr.iterations(),
        oracle_calls: tr.oracle_calls(),
        min_grad_norm: tr.min_grad_norm(),
        final_f_value: last.map_or(f64::NAN, |r| r.f_value),
        final_grad_norm: last.map_or(f64::NAN, |r| r.grad_norm),
        meta: tr.meta.clone(),
        seed: cfg.seed,
        context: out.context.clone(),
    }
}

fn persist(dir: &Path, cfg: &ExperimentConfig, trace: &RunTrace) -> Result<PathBuf, BenchError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(TRACE_FILE);
    let file = fs::File::create(&path)?;
    write_trace_csv(std::io::BufWriter::new(file), &trace.records, cfg.record_x)?;
    let accel = dir.join(ACCEL_FILE);
    if trace.accel.is_empty() {
        if accel.exists() {
            fs::remove_file(&accel)?;
        }
    } else {
        let rows: Vec<AccelRow> = accel_rows(&trace.accel);
        fs::write(&accel, serde_json::to_string(&rows)?)?;
    }
    Ok(path)
}

/// Runs the experiment and writes `trace.csv`, `summary.json` and, for
/// accelerated schemes, `accel.json` into `cfg.out`. A failed run still
/// writes the trace recorded up to the failure.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, BenchError> {
    let outcome = match run_scheme(cfg) {
        Ok(o) => o,
        Err(BenchError::Runtime { message, partial }) => {
            if let Some(tr) = &partial {
                persist(&cfg.out, cfg, tr)?;
            }
            return Err(BenchError::Runtime { message, partial });
        }
        Err(e) => return Err(e),
    };
    let trace_path = persist(&cfg.out, cfg, &outcome.trace)?;
    let summary = summarize(cfg, &outcome);
    let summary_path = cfg.out.join(SUMMARY_FILE);
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(ExperimentOutput {
        outcome,
        summary,
        trace_path,
        summary_path,
    })
}

/// Runs independent experiments in parallel; each writes to its own
/// output directory.
pub fn run_batch(configs: &[ExperimentConfig]) -> Vec<Result<ExperimentOutput, BenchError>> {
    configs.par_iter().map(run_experiment).collect()
}
