//! Central finite-difference checks for oracle derivatives.

use nalgebra::DVector;

use crate::oracle::{check_action_order, OracleError, SmoothOracle};

pub const DEFAULT_FD_STEP: f64 = 1e-5;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

/// Max over coordinates of `|g_i − fd_i| / max(1, |g_i|, |fd_i|)`, where `fd`
/// is the central difference of the value oracle.
pub fn gradient_check(f: &dyn SmoothOracle, x: &DVector<f64>, step: f64) -> f64 {
    let g = f.gradient(x);
    let mut xp = x.clone();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        xp[i] = x[i] + step;
        let fp = f.value(&xp);
        xp[i] = x[i] - step;
        let fm = f.value(&xp);
        xp[i] = x[i];
        worst = worst.max(rel_err(g[i], (fp - fm) / (2.0 * step)));
    }
    worst
}

fn lower_action(
    f: &dyn SmoothOracle,
    x: &DVector<f64>,
    h: &DVector<f64>,
    order: usize,
) -> Result<DVector<f64>, OracleError> {
    if order == 1 {
        Ok(f.gradient(x))
    } else {
        f.derivative_action(x, h, order)
    }
}

/// Compares `D^i f(x)[h]^{i−1}` with the central difference of the
/// `(i−1)`-th action along `h`. Returns the worst coordinate discrepancy in
/// the same mixed relative measure as [`gradient_check`].
pub fn derivative_action_check(
    f: &dyn SmoothOracle,
    x: &DVector<f64>,
    h: &DVector<f64>,
    order: usize,
    step: f64,
) -> Result<f64, OracleError> {
    check_action_order(order, f.order())?;
    let analytic = f.derivative_action(x, h, order)?;
    let xp = x + h * step;
    let xm = x - h * step;
    let fd = (lower_action(f, &xp, h, order - 1)? - lower_action(f, &xm, h, order - 1)?)
        / (2.0 * step);
    Ok(analytic
        .iter()
        .zip(fd.iter())
        .fold(0.0f64, |w, (a, b)| w.max(rel_err(*a, *b))))
}
