//! Regularize-and-restart driver: accelerated runs of fixed length on the
//! uniformly convex `F_δ`, each followed by one certified correction step.

use serde::{Deserialize, Serialize};

use super::accelerated::{check_start, run_accelerated_from};
use super::adaptive::{meta, row};
use super::composite::certified_step;
use super::{
    stalled_at_roundoff, AcceptTag, Phase, Point, RestartInfo, RestartRecord, RunStatus, RunTrace, SchemeConfig,
    SchemeError,
};
use crate::factorial;
use crate::oracle::{CompositePart, OracleError, SmoothOracle};
use crate::schemes::make_regularized;

/// A priori bound used to choose `δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum RestartBound {
    /// `R ≥ ‖x₀ − x*‖`.
    Distance(f64),
    /// `S ≥ f̃(x₀) − f̃*`.
    Residual(f64),
}

impl RestartBound {
    pub fn value(&self) -> f64 {
        match *self {
            RestartBound::Distance(r) | RestartBound::Residual(r) => r,
        }
    }

    /// `δ` that turns `‖∇F̃_δ‖_* ≤ ε/2` into `‖∇f̃‖_* ≤ ε`.
    pub fn delta(&self, epsilon: f64, q: f64) -> f64 {
        match *self {
            RestartBound::Distance(r) => epsilon / (2f64.powf(q) * r.powf(q - 1.0)),
            RestartBound::Residual(s) => {
                let inner = (2f64.powf(q - 2.0) * q * s).powf((q - 1.0) / q);
                (epsilon / (2f64.powf(q) * inner)).powf(q)
            }
        }
    }
}

/// Inner run length
/// `m = 1 + ⌈(2^{4p+ν−2} q^q H_δ / (δ(p−1)!))^{1/q}⌉`, `q = p + ν`.
pub fn restart_length(p: usize, nu: f64, h_delta: f64, delta: f64) -> usize {
    let q = p as f64 + nu;
    let base = 2f64.powf(4.0 * p as f64 + nu - 2.0) * q.powf(q) * h_delta / (delta * factorial(p - 1));
    1 + base.powf(1.0 / q).ceil() as usize
}

/// Upper bound on the number `T` of restarts with `‖∇F̃_δ(u_k)‖_* > ε/2`,
/// `1 + log₂(32(p+1)! H_δ^{1/(q−1)} δ R^q / (2^{q−1} q ε^{q/(q−1)}))`.
pub fn restart_count_bound(p: usize, q: f64, h_delta: f64, delta: f64, r: f64, epsilon: f64) -> f64 {
    let num = 32.0 * factorial(p + 1) * h_delta.powf(1.0 / (q - 1.0)) * delta * r.powf(q);
    let den = 2f64.powf(q - 1.0) * q * epsilon.powf(q / (q - 1.0));
    1.0 + (num / den).log2()
}

/// `H_δ = p(H_{F_δ} + 3θ(p−1)!)` with `H_{F_δ} = H + (δ/q)C_{p,ν}`.
pub fn restart_constant(f: &dyn SmoothOracle, cfg: &SchemeConfig, delta: f64) -> Result<f64, SchemeError> {
    let reg = make_regularized(f, delta, cfg.start(f.dim()), cfg.exponent(), cfg.space(f.dim()))?;
    let nu = cfg.alpha();
    let h = reg
        .holder_constant(nu)
        .ok_or(SchemeError::Oracle(OracleError::MissingHolder(nu)))?;
    Ok(cfg.p as f64 * (h + 3.0 * cfg.theta * factorial(cfg.p - 1)))
}

/// Runs the restart driver on `F_δ = f + (δ/q)‖x − x₀‖^q`.
///
/// `δ` is taken from `delta` when given, otherwise from `bound`. Stops at
/// the first `k > 0` with `‖∇F̃_δ(u_k)‖_* ≤ ε/2`, or after
/// `max_outer_iterations` restarts. The trace holds one row per restart
/// (the point `u_k`, measured on `F̃_δ`), the audits of every inner step and
/// of every correction step, and a [`RestartInfo`].
pub fn run_alg6_restart(
    f: &dyn SmoothOracle,
    phi: Option<&CompositePart>,
    cfg: &SchemeConfig,
    delta: Option<f64>,
    bound: Option<RestartBound>,
) -> Result<RunTrace, SchemeError> {
    cfg.validate(f)?;
    if let Some(b) = bound {
        if !(b.value() >= 1.0) {
            return Err(SchemeError::Config(format!(
                "restart bound must be at least 1, got {}",
                b.value()
            )));
        }
    }
    let q = cfg.exponent();
    let delta = match (delta, bound) {
        (Some(d), _) => d,
        (None, Some(b)) => b.delta(cfg.epsilon, q),
        (None, None) => {
            return Err(SchemeError::Config(
                "either delta or a distance/residual bound is required".into(),
            ))
        }
    };
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(SchemeError::Config(format!("delta must be positive, got {delta}")));
    }
    let n = f.dim();
    let x0 = cfg.start(n);
    check_start(phi, &x0)?;
    let phi = phi.filter(|c| !c.is_zero());
    let space = cfg.space(n);
    let reg = make_regularized(f, delta, x0.clone(), q, space.clone())?;
    let h_delta = restart_constant(f, cfg, delta)?;
    let m = restart_length(cfg.p, cfg.alpha(), h_delta, delta);
    let sub = cfg.inner();

    let mut trace = RunTrace::new(meta("alg6", f, cfg, Some(h_delta)));
    let mut info = RestartInfo {
        delta,
        h_delta,
        m,
        records: Vec::new(),
    };
    let start = Point::eval(&reg, &space, phi, x0.clone(), None);
    let g_start = start.gnorm;
    trace.records.push(row(0, &start, h_delta, None, 0, 0, AcceptTag::Start));
    let mut calls = 0u64;
    let mut y = x0;
    let mut u = start;
    let mut stalled = false;

    for k in 0..cfg.max_outer_iterations {
        if k > 0 && u.gnorm <= cfg.epsilon / 2.0 {
            trace.status = RunStatus::Converged;
            trace.restart = Some(info);
            return Ok(trace);
        }
        let r = trace.records.len();
        let inner = match run_accelerated_from(&reg, phi, cfg, h_delta, m, &y) {
            Ok(t) => t,
            Err(e) => {
                trace.restart = Some(info);
                trace.status = RunStatus::Error(e.to_string());
                return Err(match e {
                    SchemeError::Subsolver { source, .. } => SchemeError::Subsolver {
                        iter: k,
                        source,
                        trace: Box::new(trace),
                    },
                    other => other,
                });
            }
        };
        calls += inner.oracle_calls();
        trace.audits.extend(inner.audits.into_iter().map(|mut a| {
            a.row = r;
            a
        }));
        y = inner
            .records
            .last()
            .and_then(|rec| rec.x.clone())
            .unwrap_or_else(|| y.clone());
        let yp = Point::eval(&reg, &space, phi, y.clone(), None);
        calls += 1;
        let step = certified_step(&reg, &space, phi, &yp, h_delta, cfg, &sub, Phase::Correction, AcceptTag::Restart);
        stalled = step.as_ref().is_err_and(|e| stalled_at_roundoff(e, g_start));
        let (up, audit) = match step {
            Ok((up, audit)) => (up, Some(audit)),
            // y is stationary to working precision: keep it, no step taken
            Err(_) if stalled => (yp.clone(), None),
            Err(source) => {
                trace.restart = Some(info);
                trace.status = RunStatus::Error(source.to_string());
                return Err(SchemeError::Subsolver {
                    iter: k,
                    source,
                    trace: Box::new(trace),
                });
            }
        };
        if let Some(mut audit) = audit {
            audit.row = r;
            trace.audits.push(audit);
        }
        let orig = Point::eval(f, &space, phi, up.x.clone(), None);
        info.records.push(RestartRecord {
            k: k + 1,
            y: y.clone(),
            u: up.x.clone(),
            grad_regularized: up.gnorm,
            grad_original: orig.gnorm,
            value_y: yp.ft,
        });
        trace
            .records
            .push(row(k + 1, &up, h_delta, None, m + 1, calls, AcceptTag::Restart));
        u = up;
        if stalled {
            break;
        }
    }
    trace.status = if u.gnorm <= cfg.epsilon / 2.0 {
        RunStatus::Converged
    } else if stalled {
        RunStatus::Stalled
    } else {
        RunStatus::BudgetExhausted
    };
    trace.restart = Some(info);
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::Quadratic;
    use crate::schemes::AlphaMode;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn length_and_delta_examples() {
        // p = 2, ν = 1: (2^7·27·H/δ)^{1/3}
        let m = restart_length(2, 1.0, 1.0, 3456.0);
        assert_eq!(m, 2);
        let d = RestartBound::Distance(2.0).delta(0.5, 3.0);
        assert!((d - 0.5 / 32.0).abs() < 1e-15);
        let s = RestartBound::Residual(1.0).delta(1.0, 2.0);
        // [1/(4·(2·1)^{1/2})]^2 = 1/32
        assert!((s - 1.0 / 32.0).abs() < 1e-15);
    }

    #[test]
    fn converges_on_quadratic() {
        let f = Quadratic::centered(DMatrix::identity(3, 3), DVector::from_element(3, 0.5), 2).unwrap();
        let cfg = SchemeConfig {
            epsilon: 1e-4,
            alpha_mode: AlphaMode::KnownNu(1.0),
            max_outer_iterations: 50,
            ..Default::default()
        };
        let tr = run_alg6_restart(&f, None, &cfg, None, Some(RestartBound::Distance(1.0))).unwrap();
        assert_eq!(tr.status, RunStatus::Converged);
        let info = tr.restart.as_ref().unwrap();
        assert!(info.records.last().unwrap().grad_original <= 1e-4);
    }
}
