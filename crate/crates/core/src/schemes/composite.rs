//! Composite schemes with a fixed regularization constant `M`: the plain
//! composite tensor method and its accelerated two-phase variant.

use super::accelerated::{check_start, fixed_step_error};
use super::adaptive::{fail, meta, row, StepFailure};
use super::{
    model_step, stall_status, stalled_at_roundoff, AccelRecord, AcceptTag, Counter, Phase, Point, RunStatus, RunTrace, SchemeConfig,
    SchemeError, StepAudit,
};
use crate::factorial;
use crate::metric::MetricSpace;
use crate::oracle::{CompositePart, SmoothOracle};
use crate::subsolver::{solve_at_coefficient, solve_psi, PsiState, SubsolverConfig, SubsolverError};

/// `M = max{pH, 3θ(p−1)!}` of the plain composite method.
pub fn composite_constant(f: &dyn SmoothOracle, cfg: &SchemeConfig) -> Result<f64, SchemeError> {
    let (_, h) = cfg.holder_data(f)?;
    Ok((cfg.p as f64 * h).max(3.0 * cfg.theta * factorial(cfg.p - 1)))
}

/// `M = p(H + 3θ(p−1)!)` of the accelerated composite method.
pub fn accelerated_composite_constant(f: &dyn SmoothOracle, cfg: &SchemeConfig) -> Result<f64, SchemeError> {
    let (_, h) = cfg.holder_data(f)?;
    Ok(cfg.p as f64 * (h + 3.0 * cfg.theta * factorial(cfg.p - 1)))
}

/// A fixed-`M` certified step from `center`, with its audit.
#[allow(clippy::too_many_arguments)]
pub(crate) fn certified_step(
    f: &dyn SmoothOracle,
    space: &MetricSpace,
    phi: Option<&CompositePart>,
    center: &Point,
    m: f64,
    cfg: &SchemeConfig,
    sub: &SubsolverConfig,
    phase: Phase,
    tag: AcceptTag,
) -> Result<(Point, StepAudit), SubsolverError> {
    let (x, cert) = model_step(f, space, &center.x, center.f, &center.g, cfg.p, m, cfg.alpha(), phi, sub)?;
    let pt = Point::eval(f, space, phi, x, None);
    let audit = StepAudit {
        row: 0,
        phase,
        trial: 0,
        reg: m,
        alpha: cfg.alpha(),
        center: center.x.clone(),
        candidate: pt.x.clone(),
        g_phi: cert.g_phi,
        model_increment: cert.model_increment,
        residual: cert.residual,
        step_norm: cert.step_norm,
        theta: cert.theta,
        tag,
        test_lhs: f64::NAN,
        test_rhs: f64::NAN,
    };
    Ok((pt, audit))
}

fn bad_constant(m: f64) -> SchemeError {
    SchemeError::Config(format!(
        "fixed constant {m} must be positive; declare a positive H or theta"
    ))
}

/// Composite tensor method `x_{t+1} ≈ argmin Ω̃_{x_t,p,M}` with the fixed
/// `M = max{pH, 3θ(p−1)!}`, stopped when `‖∇f̃(x_t)‖_* ≤ ε`.
pub fn run_alg3(f: &dyn SmoothOracle, phi: &CompositePart, cfg: &SchemeConfig) -> Result<RunTrace, SchemeError> {
    cfg.validate(f)?;
    let n = f.dim();
    let x0 = cfg.start(n);
    check_start(Some(phi), &x0)?;
    let m = composite_constant(f, cfg)?;
    if !(m > 0.0) {
        return Err(bad_constant(m));
    }
    let space = cfg.space(n);
    let sub = cfg.inner();
    let phi = Some(phi).filter(|c| !c.is_zero());
    let mut trace = RunTrace::new(meta("alg3", f, cfg, Some(m)));
    let mut counter = Counter::default();
    let mut cur = Point::eval(f, &space, phi, x0, None);
    let g_start = cur.gnorm;
    trace.records.push(row(0, &cur, m, None, 0, 0, AcceptTag::Start));

    for t in 0..cfg.max_outer_iterations {
        if cur.gnorm <= cfg.epsilon {
            trace.status = RunStatus::Converged;
            return Ok(trace);
        }
        counter.bump();
        let (pt, mut audit) = match certified_step(f, &space, phi, &cur, m, cfg, &sub, Phase::Main, AcceptTag::FixedStep) {
            Ok(s) => s,
            Err(e) if stalled_at_roundoff(&e, g_start) => {
                trace.status = stall_status(cur.gnorm, cfg.epsilon);
                return Ok(trace);
            }
            Err(e) => return Err(fixed_step_error(e, t, trace)),
        };
        audit.row = trace.records.len();
        trace.audits.push(audit);
        trace
            .records
            .push(row(t + 1, &pt, m, None, 1, counter.0, AcceptTag::FixedStep));
        cur = pt;
    }
    trace.status = if cur.gnorm <= cfg.epsilon {
        RunStatus::Converged
    } else {
        RunStatus::BudgetExhausted
    };
    Ok(trace)
}

/// Accelerated composite method with a monitor sequence, fixed
/// `M = p(H + 3θ(p−1)!)`.
///
/// The main sequence follows the estimating functions of the accelerated
/// method; the monitor takes one fixed-`M` step from the better of `z_t` and
/// `x_{t+1}`. Stops at the first `t > 0` with
/// `min{‖∇f̃(x_t)‖_*, ‖∇f̃(z_t)‖_*} ≤ ε`.
pub fn run_alg4(f: &dyn SmoothOracle, phi: &CompositePart, cfg: &SchemeConfig) -> Result<RunTrace, SchemeError> {
    cfg.validate(f)?;
    let n = f.dim();
    let x0 = cfg.start(n);
    check_start(Some(phi), &x0)?;
    let m = accelerated_composite_constant(f, cfg)?;
    if !(m > 0.0) {
        return Err(bad_constant(m));
    }
    let space = cfg.space(n);
    let sub = cfg.inner();
    let (p, q) = (cfg.p, cfg.exponent());
    let phi = Some(phi).filter(|c| !c.is_zero());
    let mut trace = RunTrace::new(meta("alg4", f, cfg, Some(m)));
    let mut counter = Counter::default();
    let mut x = Point::eval(f, &space, phi, x0.clone(), None);
    let g_start = x.gnorm;
    let mut z = x.clone();
    let mut v = x0.clone();
    let mut psi = PsiState::new(x0, q);
    let mut big_a = 0.0;
    trace.records.push(row(0, &x, m, None, 0, 0, AcceptTag::Start));

    for t in 0..cfg.max_outer_iterations {
        if t > 0 && x.gnorm.min(z.gnorm) <= cfg.epsilon {
            trace.status = RunStatus::Converged;
            return Ok(trace);
        }
        let a = solve_at_coefficient(big_a, m, p, q);
        let gamma = a / (big_a + a);
        let y = &x.x * (1.0 - gamma) + &v * gamma;
        counter.bump();
        let yp = Point::eval(f, &space, phi, y, None);
        counter.bump();
        let (pt, mut audit) = match certified_step(f, &space, phi, &yp, m, cfg, &sub, Phase::Main, AcceptTag::FixedStep) {
            Ok(s) => s,
            Err(e) if stalled_at_roundoff(&e, g_start) => {
                trace.status = stall_status(x.gnorm.min(z.gnorm), cfg.epsilon);
                return Ok(trace);
            }
            Err(e) => return Err(fixed_step_error(e, t, trace)),
        };
        big_a += a;
        psi.add_linearization(a, &pt.x, pt.f, &pt.g);
        v = match solve_psi(&psi, &space, phi) {
            Ok(v) => v,
            Err(e) => return Err(fail(StepFailure::Subsolver(e), t, trace)),
        };
        let r = trace.records.len();
        audit.row = r;
        trace.audits.push(audit);
        trace.accel.push(AccelRecord {
            t: t + 1,
            a,
            big_a,
            psi_min: psi.evaluate(&space, phi, &v),
            psi: psi.clone(),
            row: r,
        });
        trace
            .records
            .push(row(t + 1, &pt, m, None, 1, counter.0, AcceptTag::FixedStep));
        x = pt;

        let zbar = if x.ft <= z.ft { x.clone() } else { z.clone() };
        counter.bump();
        let (pt, mut audit) = match certified_step(f, &space, phi, &zbar, m, cfg, &sub, Phase::Monitor, AcceptTag::MonitorFixedStep) {
            Ok(s) => s,
            Err(e) if stalled_at_roundoff(&e, g_start) => {
                trace.status = stall_status(x.gnorm.min(z.gnorm), cfg.epsilon);
                return Ok(trace);
            }
            Err(e) => return Err(fixed_step_error(e, t, trace)),
        };
        audit.row = trace.records.len();
        trace.audits.push(audit);
        trace
            .records
            .push(row(t + 1, &pt, m, None, 1, counter.0, AcceptTag::MonitorFixedStep));
        z = pt;
    }
    trace.status = if x.gnorm.min(z.gnorm) <= cfg.epsilon {
        RunStatus::Converged
    } else {
        RunStatus::BudgetExhausted
    };
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::PowerNorm;
    use crate::schemes::AlphaMode;
    use nalgebra::dvector;

    fn setup() -> (PowerNorm, CompositePart, SchemeConfig) {
        let f = PowerNorm::new(dvector![2.0, -2.0, 0.3], 3.0, 1.0, 2).unwrap();
        let phi = CompositePart::uniform_box(3, -1.0, 1.0).unwrap();
        let cfg = SchemeConfig {
            epsilon: 1e-6,
            alpha_mode: AlphaMode::KnownNu(1.0),
            ..Default::default()
        };
        (f, phi, cfg)
    }

    #[test]
    fn alg3_reaches_box_solution() {
        let (f, phi, cfg) = setup();
        let tr = run_alg3(&f, &phi, &cfg).unwrap();
        assert_eq!(tr.status, RunStatus::Converged);
        let x = tr.last().unwrap().x.clone().unwrap();
        assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] + 1.0).abs() < 1e-6);
        assert!((x[2] - 0.3).abs() < 1e-3);
    }

    #[test]
    fn alg4_monitor_dominates() {
        let (f, phi, cfg) = setup();
        let tr = run_alg4(&f, &phi, &cfg).unwrap();
        assert_eq!(tr.status, RunStatus::Converged);
        let xs: Vec<_> = tr.main_rows().skip(1).collect();
        let zs: Vec<_> = tr.monitor_rows().skip(1).collect();
        for (a, b) in xs.iter().zip(&zs) {
            assert!(b.f_value <= a.f_value + 1e-15);
        }
    }

    #[test]
    fn start_outside_domain_is_rejected() {
        let (f, phi, mut cfg) = setup();
        cfg.x0 = Some(dvector![5.0, 0.0, 0.0]);
        assert!(matches!(run_alg3(&f, &phi, &cfg), Err(SchemeError::Config(_))));
    }
}
