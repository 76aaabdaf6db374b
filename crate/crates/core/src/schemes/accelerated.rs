//! Fixed-constant accelerated tensor method on estimating sequences. Runs a
//! prescribed number of steps without a gradient stop; it is also the inner
//! engine of the restart driver.

use super::adaptive::{fail, meta, row, StepFailure};
use super::{
    model_step, stalled_at_roundoff, AccelRecord, AcceptTag, Counter, Phase, Point, RunStatus, RunTrace, SchemeConfig,
    SchemeError, StepAudit,
};
use crate::factorial;
use crate::metric::PrimalVector;
use crate::oracle::{CompositePart, OracleError, SmoothOracle};
use crate::subsolver::{solve_at_coefficient, solve_psi, PsiState, SubsolverError};

/// Smallest admissible fixed constant, `(q−1)(H + θ(p−1)!)`.
pub(crate) fn minimal_constant(f: &dyn SmoothOracle, cfg: &SchemeConfig) -> Result<f64, SchemeError> {
    let nu = cfg.alpha();
    let h = f
        .holder_constant(nu)
        .ok_or(SchemeError::Oracle(OracleError::MissingHolder(nu)))?;
    Ok((cfg.exponent() - 1.0) * (h + cfg.theta * factorial(cfg.p - 1)))
}

pub(crate) fn check_start(phi: Option<&CompositePart>, x0: &PrimalVector) -> Result<(), SchemeError> {
    match phi {
        Some(c) if !c.contains(x0) => Err(SchemeError::Config(format!(
            "starting point lies outside the domain of the {} term",
            c.kind()
        ))),
        _ => Ok(()),
    }
}

/// Runs `iterations` accelerated steps with the fixed constant `fixed_m`
/// from the configured starting point.
pub fn run_accelerated(
    f: &dyn SmoothOracle,
    phi: Option<&CompositePart>,
    cfg: &SchemeConfig,
    fixed_m: f64,
    iterations: usize,
) -> Result<RunTrace, SchemeError> {
    let start = cfg.start(f.dim());
    run_accelerated_from(f, phi, cfg, fixed_m, iterations, &start)
}

/// As [`run_accelerated`], starting from (and anchoring `ψ₀` at) `start`.
///
/// Requires `fixed_m ≥ (q−1)(H + θ(p−1)!)` for the declared constant `H` of
/// the configured `ν`. Each step queries the oracle at `y_t` and at
/// `x_{t+1}`. The run ends early, with status `Stalled`, if a model step
/// stalls with its residual at roundoff level.
pub fn run_accelerated_from(
    f: &dyn SmoothOracle,
    phi: Option<&CompositePart>,
    cfg: &SchemeConfig,
    fixed_m: f64,
    iterations: usize,
    start: &PrimalVector,
) -> Result<RunTrace, SchemeError> {
    cfg.validate(f)?;
    if start.len() != f.dim() {
        return Err(SchemeError::Config(format!(
            "start has length {}, expected {}",
            start.len(),
            f.dim()
        )));
    }
    let needed = minimal_constant(f, cfg)?;
    if !(fixed_m >= needed && fixed_m > 0.0) {
        return Err(SchemeError::Config(format!(
            "fixed constant {fixed_m} is below the admissible minimum {needed}"
        )));
    }
    check_start(phi, start)?;
    let phi = phi.filter(|c| !c.is_zero());
    let space = cfg.space(f.dim());
    let (p, alpha, q) = (cfg.p, cfg.alpha(), cfg.exponent());
    let sub = cfg.inner();
    let mut trace = RunTrace::new(meta("algA", f, cfg, Some(fixed_m)));
    let mut counter = Counter::default();
    let mut x = Point::eval(f, &space, phi, start.clone(), None);
    let g_start = x.gnorm;
    let mut v = start.clone();
    let mut psi = PsiState::new(start.clone(), q);
    let mut big_a = 0.0;
    trace
        .records
        .push(row(0, &x, fixed_m, None, 0, 0, AcceptTag::Start));

    for t in 0..iterations {
        let a = solve_at_coefficient(big_a, fixed_m, p, q);
        let gamma = a / (big_a + a);
        let y = &x.x * (1.0 - gamma) + &v * gamma;
        counter.bump();
        let yp = Point::eval(f, &space, phi, y, None);
        counter.bump();
        let (xp, cert) = match model_step(f, &space, &yp.x, yp.f, &yp.g, p, fixed_m, alpha, phi, &sub) {
            Ok(s) => s,
            // y_t is stationary to working precision; further steps are noise
            Err(e) if stalled_at_roundoff(&e, g_start) => {
                trace.status = RunStatus::Stalled;
                return Ok(trace);
            }
            Err(e) => return Err(fail(StepFailure::Subsolver(e), t, trace)),
        };
        let pt = Point::eval(f, &space, phi, xp, None);
        big_a += a;
        psi.add_linearization(a, &pt.x, pt.f, &pt.g);
        v = match solve_psi(&psi, &space, phi) {
            Ok(v) => v,
            Err(e) => return Err(fail(StepFailure::Subsolver(e), t, trace)),
        };
        let r = trace.records.len();
        trace.audits.push(StepAudit {
            row: r,
            phase: Phase::Main,
            trial: 0,
            reg: fixed_m,
            alpha,
            center: yp.x.clone(),
            candidate: pt.x.clone(),
            g_phi: cert.g_phi.clone(),
            model_increment: cert.model_increment,
            residual: cert.residual,
            step_norm: cert.step_norm,
            theta: cert.theta,
            tag: AcceptTag::FixedStep,
            test_lhs: f64::NAN,
            test_rhs: f64::NAN,
        });
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
            .push(row(t + 1, &pt, fixed_m, None, 1, counter.0, AcceptTag::FixedStep));
        x = pt;
    }
    trace.status = RunStatus::Completed;
    Ok(trace)
}

/// Converts an unexpected subsolver failure of a fixed-constant step.
pub(crate) fn fixed_step_error(e: SubsolverError, iter: usize, trace: RunTrace) -> SchemeError {
    fail(StepFailure::Subsolver(e), iter, trace)
}
