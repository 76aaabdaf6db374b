//! Outer methods: adaptive tensor steps, accelerated estimating sequences,
//! two-phase gradient tracking, composite fixed-constant schemes and the
//! regularize-restart driver. Every run returns a [`RunTrace`].

mod accelerated;
mod adaptive;
mod composite;
mod regularized;
mod restart;
mod trace;

pub use accelerated::{run_accelerated, run_accelerated_from};
pub use adaptive::{run_alg1, run_alg2};
pub use composite::{accelerated_composite_constant, composite_constant, run_alg3, run_alg4};
pub use regularized::{make_regularized, RegularizedProblem};
pub use restart::{
    restart_constant, restart_count_bound, restart_length, run_alg6_restart, RestartBound,
};
pub use trace::{
    AccelRecord, AcceptTag, Phase, RestartInfo, RestartRecord, RunMeta, RunStatus, RunTrace,
    StepAudit, TraceRecord,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::factorial;
use crate::metric::{DualVector, MetricSpace, PrimalVector};
use crate::models::{Certificate, ModelError, ModelSpec, RegularizedModel};
use crate::oracle::{CompositePart, OracleError, SmoothOracle};
use crate::subsolver::{solve_model, SubsolverConfig, SubsolverError};

/// Upper limit on `i` in the doubling loops `2^i H`.
pub const MAX_DOUBLINGS: usize = 60;

/// How the model exponent `α` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "nu", rename_all = "snake_case")]
pub enum AlphaMode {
    /// `α = ν` for a known Hölder exponent.
    KnownNu(f64),
    /// `α = 1`; the method never uses `ν`.
    Universal,
}

#[derive(Debug, Clone)]
pub struct SchemeConfig {
    /// Target dual norm of the gradient.
    pub epsilon: f64,
    pub h0: f64,
    pub htilde0: f64,
    pub theta: f64,
    pub alpha_mode: AlphaMode,
    pub max_outer_iterations: usize,
    pub p: usize,
    pub subsolver: SubsolverConfig,
    /// Run the adaptive method on a nonconvex function (bookkeeping only).
    pub nonconvex: bool,
    pub x0: Option<PrimalVector>,
    /// Metric operator; the identity when absent.
    pub metric: Option<MetricSpace>,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            h0: 1.0,
            htilde0: 1.0,
            theta: 1e-2,
            alpha_mode: AlphaMode::Universal,
            max_outer_iterations: 10_000,
            p: 2,
            subsolver: SubsolverConfig::default(),
            nonconvex: false,
            x0: None,
            metric: None,
        }
    }
}

impl SchemeConfig {
    pub fn alpha(&self) -> f64 {
        match self.alpha_mode {
            AlphaMode::KnownNu(nu) => nu,
            AlphaMode::Universal => 1.0,
        }
    }

    pub fn exponent(&self) -> f64 {
        self.p as f64 + self.alpha()
    }

    pub fn validate(&self, f: &dyn SmoothOracle) -> Result<(), SchemeError> {
        let bad = |m: String| Err(SchemeError::Config(m));
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.h0 > 0.0 && self.htilde0 > 0.0) {
            return bad("h0 and htilde0 must be positive".into());
        }
        // θ = 0 asks for an exact model minimizer, which rounding never certifies
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return bad(format!("theta must be positive, got {}", self.theta));
        }
        if !(2..=3).contains(&self.p) {
            return bad(format!("p must be 2 or 3, got {}", self.p));
        }
        if self.p > f.order() {
            return bad(format!("p = {} exceeds the oracle order {}", self.p, f.order()));
        }
        if let AlphaMode::KnownNu(nu) = self.alpha_mode {
            if !(0.0..=1.0).contains(&nu) {
                return bad(format!("nu must lie in [0, 1], got {nu}"));
            }
        }
        if let Some(x0) = &self.x0 {
            if x0.len() != f.dim() {
                return bad(format!("x0 has length {}, expected {}", x0.len(), f.dim()));
            }
        }
        if let Some(m) = &self.metric {
            if m.dim() != f.dim() {
                return bad(format!("metric has dimension {}, expected {}", m.dim(), f.dim()));
            }
        }
        let sub = SubsolverConfig {
            theta: self.theta,
            ..self.subsolver
        };
        sub.validate().map_err(|e| SchemeError::Config(e.to_string()))
    }

    pub(crate) fn space(&self, n: usize) -> MetricSpace {
        self.metric.clone().unwrap_or_else(|| MetricSpace::identity(n))
    }

    pub(crate) fn start(&self, n: usize) -> PrimalVector {
        self.x0.clone().unwrap_or_else(|| PrimalVector::zeros(n))
    }

    pub(crate) fn inner(&self) -> SubsolverConfig {
        SubsolverConfig {
            theta: self.theta,
            ..self.subsolver
        }
    }

    /// Declared `(ν, H_{f,p}(ν))` for the configured mode.
    pub fn holder_data(&self, f: &dyn SmoothOracle) -> Result<(f64, f64), SchemeError> {
        match self.alpha_mode {
            AlphaMode::KnownNu(nu) => f
                .holder_constant(nu)
                .map(|h| (nu, h))
                .ok_or(SchemeError::Oracle(OracleError::MissingHolder(nu))),
            AlphaMode::Universal => f
                .holder()
                .map(|h| (h.nu, h.constant))
                .ok_or_else(|| SchemeError::Config("oracle declares no Hölder data".into())),
        }
    }
}

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("iteration {iter}: {source}")]
    Subsolver {
        iter: usize,
        #[source]
        source: SubsolverError,
        trace: Box<RunTrace>,
    },
    #[error("iteration {iter}: no acceptable step after {MAX_DOUBLINGS} doublings")]
    DoublingCap { iter: usize, trace: Box<RunTrace> },
}

impl SchemeError {
    /// The trace recorded up to the failure, if any.
    pub fn partial_trace(&self) -> Option<&RunTrace> {
        match self {
            SchemeError::Subsolver { trace, .. } | SchemeError::DoublingCap { trace, .. } => {
                Some(trace)
            }
            _ => None,
        }
    }
}

impl From<ModelError> for SchemeError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Oracle(o) => SchemeError::Oracle(o),
            other => SchemeError::Config(other.to_string()),
        }
    }
}

/// `N_ν(ε)`, the cap on the regularization constants of the adaptive
/// non-accelerated loops, from declared data `(ν, H)`.
pub fn n_cap(p: usize, nu: f64, h: f64, theta: f64, epsilon: f64, known_nu: bool) -> f64 {
    if known_nu {
        return (1.5 * h).max(3.0 * theta * factorial(p - 1));
    }
    let d = p as f64 + nu - 1.0;
    theta.max((1.5 * h).powf(p as f64 / d) * 4f64.powf((1.0 - nu) / d)) * epsilon.powf(-(1.0 - nu) / d)
}

/// `Ñ_ν(ε)`, the cap on the regularization constants of the accelerated
/// adaptive loop.
pub fn n_tilde_cap(p: usize, nu: f64, h: f64, theta: f64, epsilon: f64, known_nu: bool) -> f64 {
    let fact = factorial(p - 1);
    let d = p as f64 + nu - 1.0;
    if known_nu {
        return d * (h + theta * fact);
    }
    (4.0 * theta * fact).max((4.0 * h).powf(p as f64 / d) * (4.0 / epsilon).powf((1.0 - nu) / d))
}

fn is_known(cfg: &SchemeConfig) -> bool {
    matches!(cfg.alpha_mode, AlphaMode::KnownNu(_))
}

/// [`n_cap`] with the declared data of `f`.
pub fn evaluate_n(cfg: &SchemeConfig, f: &dyn SmoothOracle, epsilon: f64) -> Result<f64, SchemeError> {
    let (nu, h) = cfg.holder_data(f)?;
    Ok(n_cap(cfg.p, nu, h, cfg.theta, epsilon, is_known(cfg)))
}

/// [`n_tilde_cap`] with the declared data of `f`.
pub fn evaluate_n_tilde(
    cfg: &SchemeConfig,
    f: &dyn SmoothOracle,
    epsilon: f64,
) -> Result<f64, SchemeError> {
    let (nu, h) = cfg.holder_data(f)?;
    Ok(n_tilde_cap(cfg.p, nu, h, cfg.theta, epsilon, is_known(cfg)))
}

/// Counts oracle queries of one run.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct Counter(pub u64);

impl Counter {
    pub fn bump(&mut self) {
        self.0 += 1;
    }
}

/// One model step from `center` with regularization `h`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn model_step(
    f: &dyn SmoothOracle,
    space: &MetricSpace,
    center: &PrimalVector,
    fc: f64,
    gc: &DualVector,
    p: usize,
    h: f64,
    alpha: f64,
    phi: Option<&CompositePart>,
    sub: &SubsolverConfig,
) -> Result<(PrimalVector, Certificate), SubsolverError> {
    let mut spec = ModelSpec::new(center.clone(), p, h, alpha)?;
    if let Some(c) = phi {
        spec = spec.with_composite(c);
    }
    let model = RegularizedModel::from_cached(spec, f, space, fc, gc.clone())?;
    let (x, mut cert) = solve_model(&model, sub)?;
    // the composite certificate always carries a selection, possibly zero
    if phi.is_some_and(|c| !c.is_zero()) && cert.g_phi.is_none() {
        cert.g_phi = Some(DualVector::zeros(x.len()));
    }
    Ok((x, cert))
}

/// Residual level, in units of machine epsilon times the gradient scale,
/// that floating-point evaluation of the model gradient cannot resolve.
const ROUNDOFF_RESIDUAL: f64 = 1e3;

/// True when a model step failed only because the residual condition asks
/// for more than working precision: the inner loop stalled with a residual
/// at roundoff level. `scale` is a gradient magnitude of the problem, such
/// as the gradient norm at the start.
/// Status of a run ended by a roundoff stall.
pub(crate) fn stall_status(gnorm: f64, epsilon: f64) -> RunStatus {
    if gnorm <= epsilon {
        RunStatus::Converged
    } else {
        RunStatus::Stalled
    }
}

pub(crate) fn stalled_at_roundoff(e: &SubsolverError, scale: f64) -> bool {
    match e {
        SubsolverError::BudgetExhausted { residual, .. } => {
            *residual <= ROUNDOFF_RESIDUAL * f64::EPSILON * scale.max(1.0)
        }
        _ => false,
    }
}

/// Evaluated point with its composite data.
#[derive(Debug, Clone)]
pub(crate) struct Point {
    pub x: PrimalVector,
    /// `f(x)`.
    pub f: f64,
    /// `∇f(x)`.
    pub g: DualVector,
    /// `f̃(x)`.
    pub ft: f64,
    /// `‖∇f̃(x)‖_*`.
    pub gnorm: f64,
}

impl Point {
    /// Evaluates `x` using `g_phi` when given, otherwise the selection of
    /// `∂φ(x)` closest to `−∇f(x)`.
    pub fn eval(
        f: &dyn SmoothOracle,
        space: &MetricSpace,
        phi: Option<&CompositePart>,
        x: PrimalVector,
        g_phi: Option<&DualVector>,
    ) -> Self {
        let (fx, gx) = f.value_grad(&x);
        let (pv, sel) = match phi {
            Some(c) if !c.is_zero() => (
                c.value(&x),
                g_phi.cloned().unwrap_or_else(|| c.closest_subgradient(&x, &(-&gx))),
            ),
            _ => (0.0, DualVector::zeros(x.len())),
        };
        let gnorm = space.dual_norm(&(&gx + sel));
        Self {
            ft: fx + pv,
            x,
            f: fx,
            g: gx,
            gnorm,
        }
    }
}

/// Right-hand side of the sufficient-decrease test
/// `‖g⁺‖^{q/(q−1)} / (8(p+1)! M^{1/(q−1)})`.
pub fn decrease_threshold(gnorm: f64, m: f64, p: usize, q: f64) -> f64 {
    gnorm.powf(q / (q - 1.0)) / (8.0 * factorial(p + 1) * m.powf(1.0 / (q - 1.0)))
}

/// Right-hand side of the accelerated acceptance inequality
/// `¼[(p−1)!/M]^{1/(q−1)}‖g⁺‖^{q/(q−1)}`.
pub fn accel_threshold(gnorm: f64, m: f64, p: usize, q: f64) -> f64 {
    0.25 * (factorial(p - 1) / m).powf(1.0 / (q - 1.0)) * gnorm.powf(q / (q - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{HardInstance, Quadratic};
    use nalgebra::DMatrix;

    #[test]
    fn n_examples() {
        let f = HardInstance::new(4, 4, 2, 1.0).unwrap();
        let h = f.holder_constant_value();
        let cfg = SchemeConfig {
            alpha_mode: AlphaMode::KnownNu(1.0),
            theta: 0.0,
            ..Default::default()
        };
        assert!((evaluate_n(&cfg, &f, 0.1).unwrap() - 1.5 * h).abs() < 1e-12);
        let cfg_big = SchemeConfig {
            theta: 100.0,
            ..cfg.clone()
        };
        assert_eq!(evaluate_n(&cfg_big, &f, 0.1).unwrap(), 300.0);
        let uni = SchemeConfig {
            alpha_mode: AlphaMode::Universal,
            theta: 0.0,
            ..Default::default()
        };
        let a = evaluate_n(&uni, &f, 0.1).unwrap();
        let b = evaluate_n(&uni, &f, 1e-5).unwrap();
        assert_eq!(a, b);
        // the quadratic catalog function has H = 0 and θ = 0: N = 0
        let q = Quadratic::new(DMatrix::identity(2, 2), nalgebra::DVector::zeros(2), 2).unwrap();
        assert_eq!(evaluate_n(&cfg, &q, 0.1).unwrap(), 0.0);
        let known_tilde = evaluate_n_tilde(&cfg, &f, 0.1).unwrap();
        assert!((known_tilde - 2.0 * h).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let f = HardInstance::new(4, 4, 2, 1.0).unwrap();
        assert!(SchemeConfig::default().validate(&f).is_ok());
        let bad = SchemeConfig {
            epsilon: 0.0,
            ..Default::default()
        };
        assert!(bad.validate(&f).is_err());
        let bad = SchemeConfig {
            p: 3,
            ..Default::default()
        };
        assert!(bad.validate(&f).is_err());
    }
}
