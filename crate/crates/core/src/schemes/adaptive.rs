//! Adaptive schemes with doubling on the regularization constant: the plain
//! tensor method and its accelerated two-phase variant.

use super::{
    accel_threshold, decrease_threshold, model_step, stall_status, stalled_at_roundoff, AccelRecord, AcceptTag, Counter, Phase,
    Point, RunMeta, RunStatus, RunTrace, SchemeConfig, SchemeError, StepAudit, TraceRecord,
    MAX_DOUBLINGS,
};
use crate::metric::MetricSpace;
use crate::models::Certificate;
use crate::oracle::SmoothOracle;
use crate::subsolver::{solve_at_coefficient, solve_psi, PsiState, SubsolverError};

pub(crate) enum StepFailure {
    Subsolver(SubsolverError),
    Cap,
    /// The inner solver stalled at roundoff from a near-stationary center.
    Stalled,
}

pub(crate) struct Accepted {
    pub point: Point,
    pub trial: usize,
    pub reg: f64,
    pub cert: Certificate,
    pub by_grad: bool,
    pub lhs: f64,
    pub rhs: f64,
}

impl Accepted {
    pub fn audit(&self, row: usize, phase: Phase, alpha: f64, center: &Point, tag: AcceptTag) -> StepAudit {
        StepAudit {
            row,
            phase,
            trial: self.trial,
            reg: self.reg,
            alpha,
            center: center.x.clone(),
            candidate: self.point.x.clone(),
            g_phi: self.cert.g_phi.clone(),
            model_increment: self.cert.model_increment,
            residual: self.cert.residual,
            step_norm: self.cert.step_norm,
            theta: self.cert.theta,
            tag,
            test_lhs: if self.by_grad { f64::NAN } else { self.lhs },
            test_rhs: if self.by_grad { f64::NAN } else { self.rhs },
        }
    }
}

/// Doubling loop on `2^i·base` from `center` with the sufficient-decrease
/// test. Each trial queries the oracle once, at its candidate.
pub(crate) fn doubling_search(
    f: &dyn SmoothOracle,
    space: &MetricSpace,
    center: &Point,
    base: f64,
    cfg: &SchemeConfig,
    counter: &mut Counter,
    scale: f64,
) -> Result<Accepted, StepFailure> {
    let (p, alpha, q) = (cfg.p, cfg.alpha(), cfg.exponent());
    let sub = cfg.inner();
    for i in 0..=MAX_DOUBLINGS {
        let reg = base * 2f64.powi(i as i32);
        counter.bump();
        let (x, cert) = match model_step(f, space, &center.x, center.f, &center.g, p, reg, alpha, None, &sub) {
            Ok(v) => v,
            Err(e) if stalled_at_roundoff(&e, scale) => return Err(StepFailure::Stalled),
            Err(e) if e.is_recoverable() => continue,
            Err(e) => return Err(StepFailure::Subsolver(e)),
        };
        let point = Point::eval(f, space, None, x, None);
        let lhs = center.f - point.f;
        let rhs = decrease_threshold(point.gnorm, reg, p, q);
        let by_grad = point.gnorm <= cfg.epsilon;
        if by_grad || lhs >= rhs {
            return Ok(Accepted {
                point,
                trial: i,
                reg,
                cert,
                by_grad,
                lhs,
                rhs,
            });
        }
    }
    Err(StepFailure::Cap)
}

pub(crate) fn meta(name: &str, f: &dyn SmoothOracle, cfg: &SchemeConfig, fixed_m: Option<f64>) -> RunMeta {
    RunMeta {
        scheme: name.into(),
        n: f.dim(),
        p: cfg.p,
        alpha: cfg.alpha(),
        epsilon: cfg.epsilon,
        h0: cfg.h0,
        htilde0: cfg.htilde0,
        theta: cfg.theta,
        nonconvex: cfg.nonconvex,
        fixed_m,
    }
}

pub(crate) fn fail(e: StepFailure, iter: usize, trace: RunTrace) -> SchemeError {
    let mut trace = trace;
    match e {
        StepFailure::Subsolver(source) => {
            trace.status = RunStatus::Error(source.to_string());
            SchemeError::Subsolver {
                iter,
                source,
                trace: Box::new(trace),
            }
        }
        StepFailure::Stalled => unreachable!("stalls end the run before reaching `fail`"),
        StepFailure::Cap => {
            trace.status = RunStatus::Error("doubling cap reached".into());
            SchemeError::DoublingCap {
                iter,
                trace: Box::new(trace),
            }
        }
    }
}

pub(crate) fn row(iter: usize, pt: &Point, h: f64, htilde: Option<f64>, trials: usize, calls: u64, tag: AcceptTag) -> TraceRecord {
    TraceRecord {
        iter,
        f_value: pt.ft,
        grad_norm: pt.gnorm,
        h,
        htilde,
        inner_trials: trials,
        oracle_calls_cum: calls,
        tag,
        x: Some(pt.x.clone()),
    }
}

/// Adaptive tensor method: from `x_t`, double `2^i H_t` until the trial
/// point has a small gradient or decreases `f` sufficiently, then set
/// `H_{t+1} = 2^{i−1} H_t`.
pub fn run_alg1(f: &dyn SmoothOracle, cfg: &SchemeConfig) -> Result<RunTrace, SchemeError> {
    cfg.validate(f)?;
    let n = f.dim();
    let space = cfg.space(n);
    let mut trace = RunTrace::new(meta("alg1", f, cfg, None));
    let mut counter = Counter::default();
    let mut cur = Point::eval(f, &space, None, cfg.start(n), None);
    let g_start = cur.gnorm;
    let mut h = cfg.h0;
    trace.records.push(row(0, &cur, h, None, 0, 0, AcceptTag::Start));

    for t in 0..cfg.max_outer_iterations {
        if cur.gnorm <= cfg.epsilon {
            trace.status = RunStatus::Converged;
            return Ok(trace);
        }
        let acc = match doubling_search(f, &space, &cur, h, cfg, &mut counter, g_start) {
            Ok(a) => a,
            Err(StepFailure::Stalled) => {
                trace.status = stall_status(cur.gnorm, cfg.epsilon);
                return Ok(trace);
            }
            Err(e) => return Err(fail(e, t, trace)),
        };
        let tag = if acc.by_grad {
            AcceptTag::GradStop
        } else {
            AcceptTag::SufficientDecrease
        };
        h = acc.reg / 2.0;
        let r = trace.records.len();
        trace.audits.push(acc.audit(r, Phase::Main, cfg.alpha(), &cur, tag));
        trace
            .records
            .push(row(t + 1, &acc.point, h, None, acc.trial + 1, counter.0, tag));
        cur = acc.point;
    }
    trace.status = if cur.gnorm <= cfg.epsilon {
        RunStatus::Converged
    } else {
        RunStatus::BudgetExhausted
    };
    Ok(trace)
}

/// Adaptive accelerated tensor method with a monitor sequence.
///
/// The main sequence uses estimating functions with coefficients adapted by
/// doubling `2^i H̃_t`; the monitor sequence applies adaptive tensor steps
/// from the better of `z_t` and `x_{t+1}`. Each accelerated trial queries the
/// oracle twice (at `y` and at the candidate) and each monitor trial once.
pub fn run_alg2(f: &dyn SmoothOracle, cfg: &SchemeConfig) -> Result<RunTrace, SchemeError> {
    cfg.validate(f)?;
    let n = f.dim();
    let space = cfg.space(n);
    let (p, alpha, q) = (cfg.p, cfg.alpha(), cfg.exponent());
    let sub = cfg.inner();
    let mut trace = RunTrace::new(meta("alg2", f, cfg, None));
    let mut counter = Counter::default();
    let x0 = cfg.start(n);
    let mut x = Point::eval(f, &space, None, x0.clone(), None);
    let g_start = x.gnorm;
    let mut z = x.clone();
    let mut v = x0.clone();
    let mut psi = PsiState::new(x0, q);
    let mut big_a = 0.0;
    let mut htilde = cfg.htilde0;
    let mut h = cfg.h0;
    trace
        .records
        .push(row(0, &x, h, Some(htilde), 0, 0, AcceptTag::Start));

    for t in 0..cfg.max_outer_iterations {
        if x.gnorm.min(z.gnorm) <= cfg.epsilon {
            trace.status = RunStatus::Converged;
            return Ok(trace);
        }
        // accelerated phase
        let mut accepted = None;
        for i in 0..=MAX_DOUBLINGS {
            let m = htilde * 2f64.powi(i as i32);
            let a = solve_at_coefficient(big_a, m, p, q);
            let gamma = a / (big_a + a);
            let y = &x.x * (1.0 - gamma) + &v * gamma;
            counter.bump();
            let yp = Point::eval(f, &space, None, y, None);
            counter.bump();
            let (xp, cert) = match model_step(f, &space, &yp.x, yp.f, &yp.g, p, m, alpha, None, &sub) {
                Ok(s) => s,
                Err(e) if stalled_at_roundoff(&e, g_start) => {
                    trace.status = stall_status(x.gnorm.min(z.gnorm), cfg.epsilon);
                    return Ok(trace);
                }
                Err(e) if e.is_recoverable() => continue,
                Err(e) => return Err(fail(StepFailure::Subsolver(e), t, trace)),
            };
            let pt = Point::eval(f, &space, None, xp, None);
            let lhs = pt.g.dot(&(&yp.x - &pt.x));
            let rhs = accel_threshold(pt.gnorm, m, p, q);
            let by_grad = pt.gnorm <= cfg.epsilon;
            if by_grad || lhs >= rhs {
                accepted = Some((
                    yp,
                    a,
                    Accepted {
                        point: pt,
                        trial: i,
                        reg: m,
                        cert,
                        by_grad,
                        lhs,
                        rhs,
                    },
                ));
                break;
            }
        }
        let Some((yp, a, acc)) = accepted else {
            return Err(fail(StepFailure::Cap, t, trace));
        };
        htilde = acc.reg / 2.0;
        big_a += a;
        psi.add_linearization(a, &acc.point.x, acc.point.f, &acc.point.g);
        v = match solve_psi(&psi, &space, None) {
            Ok(v) => v,
            Err(e) => return Err(fail(StepFailure::Subsolver(e), t, trace)),
        };
        let tag = if acc.by_grad {
            AcceptTag::GradStop
        } else {
            AcceptTag::AccelInequality
        };
        let r = trace.records.len();
        trace.audits.push(acc.audit(r, Phase::Main, alpha, &yp, tag));
        trace.accel.push(AccelRecord {
            t: t + 1,
            a,
            big_a,
            psi_min: psi.evaluate(&space, None, &v),
            psi: psi.clone(),
            row: r,
        });
        trace
            .records
            .push(row(t + 1, &acc.point, h, Some(htilde), acc.trial + 1, counter.0, tag));
        x = acc.point;

        // monitor phase from the better of z_t and x_{t+1}
        let zbar = if x.f <= z.f { x.clone() } else { z.clone() };
        let acc = match doubling_search(f, &space, &zbar, h, cfg, &mut counter, g_start) {
            Ok(a) => a,
            Err(StepFailure::Stalled) => {
                trace.status = stall_status(x.gnorm.min(z.gnorm), cfg.epsilon);
                return Ok(trace);
            }
            Err(e) => return Err(fail(e, t, trace)),
        };
        h = acc.reg / 2.0;
        let tag = if acc.by_grad {
            AcceptTag::MonitorGradStop
        } else {
            AcceptTag::MonitorSufficientDecrease
        };
        let r = trace.records.len();
        trace.audits.push(acc.audit(r, Phase::Monitor, alpha, &zbar, tag));
        trace
            .records
            .push(row(t + 1, &acc.point, h, Some(htilde), acc.trial + 1, counter.0, tag));
        z = acc.point;
    }
    trace.status = if x.gnorm.min(z.gnorm) <= cfg.epsilon {
        RunStatus::Converged
    } else {
        RunStatus::BudgetExhausted
    };
    Ok(trace)
}
