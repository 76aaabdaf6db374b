//! Experiment configuration and the text formats of its instance and
//! composite specifications.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use tensormin::instances::ZooSpec;
use tensormin::schemes::{AlphaMode, RestartBound, SchemeConfig};
use tensormin::subsolver::SubsolverConfig;
use tensormin::CompositePart;

/// A configuration error tied to the offending field.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: &str, message: impl Into<String>) -> Self {
        Self {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchemeName {
    #[serde(rename = "alg1")]
    Alg1,
    #[serde(rename = "alg2")]
    Alg2,
    #[serde(rename = "alg3")]
    Alg3,
    #[serde(rename = "alg4")]
    Alg4,
    #[serde(rename = "alg5")]
    Alg5,
    #[serde(rename = "alg6")]
    Alg6,
    #[serde(rename = "algA")]
    AlgA,
}

impl SchemeName {
    pub const ALL: [SchemeName; 7] = [
        SchemeName::Alg1,
        SchemeName::Alg2,
        SchemeName::Alg3,
        SchemeName::Alg4,
        SchemeName::Alg5,
        SchemeName::Alg6,
        SchemeName::AlgA,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SchemeName::Alg1 => "alg1",
            SchemeName::Alg2 => "alg2",
            SchemeName::Alg3 => "alg3",
            SchemeName::Alg4 => "alg4",
            SchemeName::Alg5 => "alg5",
            SchemeName::Alg6 => "alg6",
            SchemeName::AlgA => "algA",
        }
    }

    /// Schemes that minimize `f + φ` with a nonzero `φ`.
    pub fn is_composite(&self) -> bool {
        matches!(self, SchemeName::Alg3 | SchemeName::Alg4)
    }

    /// Schemes with a fixed constant computed from declared `(ν, H)`.
    pub fn needs_declared_nu(&self) -> bool {
        matches!(self, SchemeName::Alg5 | SchemeName::Alg6 | SchemeName::AlgA)
    }
}

impl fmt::Display for SchemeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeName {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SchemeName::ALL
            .iter()
            .find(|n| n.as_str() == s)
            .copied()
            .ok_or_else(|| {
                ConfigError::new(
                    "scheme",
                    format!("unknown scheme `{s}` (expected alg1..alg6 or algA)"),
                )
            })
    }
}

/// Starting point of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum StartPoint {
    Zero,
    /// Standard normal coordinates drawn from the experiment seed.
    Random,
    Given(Vec<f64>),
}

impl FromStr for StartPoint {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero" => Ok(StartPoint::Zero),
            "random" => Ok(StartPoint::Random),
            list => list
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map(StartPoint::Given)
                .map_err(|_| {
                    ConfigError::new("x0", format!("expected zero, random or a comma list, got `{s}`"))
                }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub instance: ZooSpec,
    pub composite: CompositePart,
    pub scheme: SchemeName,
    pub epsilon: f64,
    pub p: usize,
    /// Known Hölder exponent; `None` runs the universal variant.
    pub nu: Option<f64>,
    pub h0: f64,
    pub htilde0: f64,
    pub theta: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub x0: StartPoint,
    /// Step count of the fixed-length accelerated runs (`alg5`, `algA`).
    pub iterations: usize,
    /// Fixed constant of `algA`; the smallest admissible one when absent.
    pub fixed_m: Option<f64>,
    /// Regularization weight of `alg5`/`alg6`.
    pub delta: Option<f64>,
    /// Bound used to pick `δ` when `delta` is absent.
    pub bound: Option<RestartBound>,
    /// Write iterate coordinates into the trace CSV.
    pub record_x: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            instance: ZooSpec::Quadratic {
                n: 8,
                cond: 10.0,
                seed: 0,
            },
            composite: CompositePart::Zero,
            scheme: SchemeName::Alg1,
            epsilon: 1e-6,
            p: 2,
            nu: Some(1.0),
            h0: 1.0,
            htilde0: 1.0,
            theta: 1e-2,
            max_iters: 10_000,
            seed: 0,
            out: PathBuf::from("out"),
            x0: StartPoint::Zero,
            iterations: 50,
            fixed_m: None,
            delta: None,
            bound: None,
            record_x: false,
        }
    }
}

impl ExperimentConfig {
    /// Field-level checks that do not need the built instance.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.epsilon) {
            return Err(ConfigError::new("eps", format!("must be positive, got {}", self.epsilon)));
        }
        if !(2..=3).contains(&self.p) {
            return Err(ConfigError::new("p", format!("must be 2 or 3, got {}", self.p)));
        }
        if let Some(nu) = self.nu {
            if !(0.0..=1.0).contains(&nu) {
                return Err(ConfigError::new("nu", format!("must lie in [0, 1], got {nu}")));
            }
        }
        if !pos(self.h0) {
            return Err(ConfigError::new("h0", format!("must be positive, got {}", self.h0)));
        }
        if !pos(self.htilde0) {
            return Err(ConfigError::new("htilde0", format!("must be positive, got {}", self.htilde0)));
        }
        if !pos(self.theta) {
            return Err(ConfigError::new("theta", format!("must be positive, got {}", self.theta)));
        }
        if self.max_iters == 0 {
            return Err(ConfigError::new("max_iters", "must be at least 1"));
        }
        if self.scheme.is_composite() && self.composite.is_zero() {
            return Err(ConfigError::new(
                "composite",
                format!("scheme {} needs a composite term (l1 or box)", self.scheme),
            ));
        }
        if self.scheme.needs_declared_nu() && self.nu.is_none() {
            return Err(ConfigError::new(
                "nu",
                format!("scheme {} needs a known Hölder exponent", self.scheme),
            ));
        }
        if let StartPoint::Given(v) = &self.x0 {
            if v.len() != self.instance.dim() {
                return Err(ConfigError::new(
                    "x0",
                    format!("has {} coordinates, instance dimension is {}", v.len(), self.instance.dim()),
                ));
            }
        }
        if let CompositePart::Box { lower, .. } = &self.composite {
            if lower.len() != self.instance.dim() {
                return Err(ConfigError::new(
                    "composite",
                    format!("box has {} bounds, instance dimension is {}", lower.len(), self.instance.dim()),
                ));
            }
        }
        if let Some(d) = self.delta {
            if !pos(d) {
                return Err(ConfigError::new("delta", format!("must be positive, got {d}")));
            }
        }
        if let Some(b) = self.bound {
            if !(b.value() >= 1.0) {
                return Err(ConfigError::new("bound", format!("must be at least 1, got {}", b.value())));
            }
        }
        if let Some(m) = self.fixed_m {
            if !pos(m) {
                return Err(ConfigError::new("fixed_m", format!("must be positive, got {m}")));
            }
        }
        Ok(())
    }

    pub fn alpha_mode(&self) -> AlphaMode {
        match self.nu {
            Some(nu) => AlphaMode::KnownNu(nu),
            None => AlphaMode::Universal,
        }
    }

    /// Scheme settings for the core library (`x0` resolved by the caller).
    pub fn scheme_config(&self) -> SchemeConfig {
        SchemeConfig {
            epsilon: self.epsilon,
            h0: self.h0,
            htilde0: self.htilde0,
            theta: self.theta,
            alpha_mode: self.alpha_mode(),
            max_outer_iterations: self.max_iters,
            p: self.p,
            subsolver: SubsolverConfig {
                theta: self.theta,
                ..SubsolverConfig::default()
            },
            nonconvex: false,
            x0: None,
            metric: None,
        }
    }
}

fn split_spec<'a>(field: &str, s: &'a str) -> Result<(&'a str, BTreeMap<&'a str, &'a str>), ConfigError> {
    let (name, rest) = match s.split_once(':') {
        Some((n, r)) => (n.trim(), r),
        None => (s.trim(), ""),
    };
    let mut kv = BTreeMap::new();
    for part in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| ConfigError::new(field, format!("expected key=value, got `{part}`")))?;
        kv.insert(k.trim(), v.trim());
    }
    Ok((name, kv))
}

fn take<T: FromStr>(field: &str, kv: &mut BTreeMap<&str, &str>, key: &str, default: T) -> Result<T, ConfigError> {
    match kv.remove(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| ConfigError::new(&format!("{field}.{key}"), format!("cannot parse `{v}`"))),
    }
}

fn finish(field: &str, kv: BTreeMap<&str, &str>) -> Result<(), ConfigError> {
    match kv.keys().next() {
        Some(k) => Err(ConfigError::new(&format!("{field}.{k}"), "unknown parameter")),
        None => Ok(()),
    }
}

/// Parses `name[:key=value,...]` into a catalog instance.
///
/// Names and parameters (defaults in brackets): `quadratic` n [8], cond
/// [10], seed; `power_norm` n [8], q [p+1], weight [1], seed;
/// `log_sum_exp` n [8], scale [1], seed; `hard` n [16], k [n−1], nu [1].
/// Missing seeds take `seed`.
pub fn parse_instance(s: &str, p: usize, seed: u64) -> Result<ZooSpec, ConfigError> {
    const F: &str = "instance";
    let (name, mut kv) = split_spec(F, s)?;
    let spec = match name {
        "quadratic" => ZooSpec::Quadratic {
            n: take(F, &mut kv, "n", 8)?,
            cond: take(F, &mut kv, "cond", 10.0)?,
            seed: take(F, &mut kv, "seed", seed)?,
        },
        "power_norm" => ZooSpec::PowerNorm {
            n: take(F, &mut kv, "n", 8)?,
            q: take(F, &mut kv, "q", p as f64 + 1.0)?,
            weight: take(F, &mut kv, "weight", 1.0)?,
            seed: take(F, &mut kv, "seed", seed)?,
        },
        "log_sum_exp" => ZooSpec::LogSumExp {
            n: take(F, &mut kv, "n", 8)?,
            scale: take(F, &mut kv, "scale", 1.0)?,
            seed: take(F, &mut kv, "seed", seed)?,
        },
        "hard" => {
            let n = take(F, &mut kv, "n", 16)?;
            ZooSpec::Hard {
                n,
                k: take(F, &mut kv, "k", n.saturating_sub(1).max(2))?,
                nu: take(F, &mut kv, "nu", 1.0)?,
            }
        }
        other => {
            return Err(ConfigError::new(
                F,
                format!("unknown instance `{other}` (quadratic, power_norm, log_sum_exp, hard)"),
            ))
        }
    };
    finish(F, kv)?;
    if spec.dim() == 0 {
        return Err(ConfigError::new("instance.n", "must be positive"));
    }
    Ok(spec)
}

/// Parses `none`, `l1:weight=w` or `box:lo=a,hi=b` (uniform bounds in
/// dimension `n`).
pub fn parse_composite(s: &str, n: usize) -> Result<CompositePart, ConfigError> {
    const F: &str = "composite";
    let (name, mut kv) = split_spec(F, s)?;
    let part = match name {
        "none" | "zero" => CompositePart::Zero,
        "l1" => {
            let w = take(F, &mut kv, "weight", 1.0)?;
            CompositePart::l1(w).map_err(|e| ConfigError::new("composite.weight", e.to_string()))?
        }
        "box" => {
            let lo = take(F, &mut kv, "lo", -1.0)?;
            let hi = take(F, &mut kv, "hi", 1.0)?;
            CompositePart::uniform_box(n, lo, hi).map_err(|e| ConfigError::new(F, e.to_string()))?
        }
        other => {
            return Err(ConfigError::new(
                F,
                format!("unknown composite term `{other}` (none, l1, box)"),
            ))
        }
    };
    finish(F, kv)?;
    Ok(part)
}

/// Parses `R=<r>` or `S=<s>` into a restart bound.
pub fn parse_bound(s: &str) -> Result<RestartBound, ConfigError> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| ConfigError::new("bound", format!("expected R=<r> or S=<s>, got `{s}`")))?;
    let v: f64 = v
        .trim()
        .parse()
        .map_err(|_| ConfigError::new("bound", format!("cannot parse `{v}`")))?;
    match k.trim() {
        "R" | "r" => Ok(RestartBound::Distance(v)),
        "S" | "s" => Ok(RestartBound::Residual(v)),
        other => Err(ConfigError::new("bound", format!("unknown bound kind `{other}`"))),
    }
}
