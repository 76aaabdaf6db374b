//! Second-order models through the radial system
//! `(∇²f(x) + τB)h = −∇f(x)`, `τ = (H(2+α)/2)‖h‖^α`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{SubsolverConfig, SubsolverError};
use crate::metric::{MetricSpace, PrimalVector};
use crate::models::{Certificate, ModelError, ModelSpec, RegularizedModel};
use crate::oracle::SmoothOracle;

pub fn solve_model_order2(
    spec: &ModelSpec,
    f: &dyn SmoothOracle,
    space: &MetricSpace,
    cfg: &SubsolverConfig,
) -> Result<(PrimalVector, Certificate), SubsolverError> {
    if spec.p != 2 {
        return Err(ModelError::InvalidSpec("radial solver needs p = 2".into()).into());
    }
    if spec.composite.is_some() {
        return Err(SubsolverError::Unsupported(
            "radial solver handles smooth models only".into(),
        ));
    }
    let model = RegularizedModel::new(spec.clone(), f, space)?;
    solve_built(&model, cfg)
}

struct Radial<'m, 'a> {
    model: &'m RegularizedModel<'a>,
    b: DMatrix<f64>,
    tau_coef: f64,
    alpha: f64,
}

impl Radial<'_, '_> {
    fn tau(&self, r: f64) -> f64 {
        if self.alpha == 0.0 {
            self.tau_coef
        } else {
            self.tau_coef * r.powf(self.alpha)
        }
    }

    fn factor(&self, tau: f64) -> Option<Cholesky<f64, Dyn>> {
        let m = self.model.center_hessian() + &self.b * tau;
        let chol = Cholesky::new(m)?;
        let d = chol.l_dirty().diagonal();
        let (lo, hi) = d.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
        // reject numerically singular factors
        (lo > hi * 1e-10).then_some(chol)
    }

    /// `h(τ) = −(Q + τB)⁻¹g`, or `None` when the matrix is not positive definite.
    fn step(&self, tau: f64) -> Option<DVector<f64>> {
        let chol = self.factor(tau)?;
        Some(-chol.solve(self.model.center_gradient()))
    }

    /// `‖h(τ(r))‖ − r`; `+∞` when `r` is too small for a positive definite
    /// system. Decreasing in `r`.
    fn residual(&self, r: f64) -> (f64, Option<DVector<f64>>) {
        match self.step(self.tau(r)) {
            Some(h) => (self.model.space().primal_norm(&h) - r, Some(h)),
            None => (f64::INFINITY, None),
        }
    }
}

pub(crate) fn solve_built(
    model: &RegularizedModel<'_>,
    cfg: &SubsolverConfig,
) -> Result<(PrimalVector, Certificate), SubsolverError> {
    let spec = model.spec();
    let x = spec.center.clone();
    let g = model.center_gradient();
    if g.iter().all(|v| *v == 0.0) {
        let cert = model.certificate(&x, None, cfg.theta)?;
        return Ok((x, cert));
    }
    let space = model.space();
    let rad = Radial {
        model,
        b: space.operator(),
        tau_coef: spec.h * (2.0 + spec.alpha) / 2.0,
        alpha: spec.alpha,
    };

    let h = if spec.alpha == 0.0 {
        rad.step(rad.tau_coef).ok_or(SubsolverError::Factorization)?
    } else {
        // bracket the root of the decreasing residual
        let gnorm = space.dual_norm(g);
        let mut hi = (gnorm / rad.tau_coef).powf(1.0 / (1.0 + spec.alpha)).max(1e-300);
        let mut hi_val = rad.residual(hi);
        let mut grow = 0;
        while !(hi_val.0 <= 0.0) {
            hi *= 4.0;
            hi_val = rad.residual(hi);
            grow += 1;
            if grow > 200 {
                return Err(SubsolverError::NotBracketed);
            }
        }
        let mut lo = 0.0f64;
        let mut best = hi_val.1.expect("finite residual carries a step");
        let mut r = hi;
        for _ in 0..cfg.max_inner_iterations.max(200) {
            if hi - lo <= cfg.radial_tolerance * hi {
                break;
            }
            // Newton on ‖h(τ(r))‖ − r from the current step, safeguarded
            let mut next = 0.5 * (lo + hi);
            if let Some(chol) = rad.factor(rad.tau(r)) {
                let hr = -chol.solve(g);
                let nh = space.primal_norm(&hr);
                let bh = space.to_dual(&hr);
                let w = chol.solve(&bh);
                let dn_dtau = -bh.dot(&w) / nh.max(1e-300);
                let dtau_dr = rad.tau_coef * spec.alpha * r.powf(spec.alpha - 1.0);
                let dphi = dn_dtau * dtau_dr - 1.0;
                let cand = r - (nh - r) / dphi;
                if cand.is_finite() && cand > lo && cand < hi {
                    next = cand;
                }
            }
            let (val, step) = rad.residual(next);
            if val > 0.0 {
                lo = next;
            } else {
                hi = next;
                if let Some(s) = step {
                    best = s;
                }
                if val == 0.0 {
                    break;
                }
            }
            r = next;
        }
        // The step at the upper end has ‖h‖ ≤ r; the lower end may be
        // infeasible, so the upper step is returned.
        match rad.step(rad.tau(hi)) {
            Some(s) => s,
            None => best,
        }
    };

    let x_plus = &x + &h;
    let cert = model.certificate(&x_plus, None, cfg.theta)?;
    if cert.accepted {
        return Ok((x_plus, cert));
    }
    Err(SubsolverError::BudgetExhausted {
        iterations: cfg.max_inner_iterations,
        residual: cert.residual,
        bound: cert.residual_bound(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{PowerNorm, Quadratic};
    use nalgebra::dvector;

    #[test]
    fn quadratic_radial_system() {
        let q = Quadratic::random(5, 20.0, 3, 2).unwrap();
        let space = MetricSpace::identity(5);
        let x = DVector::zeros(5);
        let spec = ModelSpec::new(x.clone(), 2, 0.1, 1.0).unwrap();
        let cfg = SubsolverConfig {
            theta: 1e-8,
            ..Default::default()
        };
        let (xp, cert) = solve_model_order2(&spec, &q, &space, &cfg).unwrap();
        assert!(cert.accepted);
        // independent check: the dense radial system at the returned radius
        let r = xp.norm();
        let tau = 0.1 * 3.0 / 2.0 * r;
        let m = q.matrix() + DMatrix::identity(5, 5) * tau;
        let direct = -m.lu().solve(&q.gradient(&x)).unwrap();
        assert!((direct - &xp).amax() < 1e-9);
    }

    #[test]
    fn stationary_center_and_nu_zero() {
        let q = Quadratic::centered(DMatrix::identity(2, 2), dvector![1.0, 1.0], 2).unwrap();
        let space = MetricSpace::identity(2);
        let spec = ModelSpec::new(dvector![1.0, 1.0], 2, 1.0, 1.0).unwrap();
        let (xp, cert) = solve_model_order2(&spec, &q, &space, &SubsolverConfig::default()).unwrap();
        assert_eq!(xp, dvector![1.0, 1.0]);
        assert!(cert.accepted);
        let spec = ModelSpec::new(DVector::zeros(2), 2, 1.0, 0.0).unwrap();
        let (xp, cert) = solve_model_order2(&spec, &q, &space, &SubsolverConfig::default()).unwrap();
        assert!(cert.accepted);
        assert!((xp - dvector![0.5, 0.5]).amax() < 1e-14);
    }

    #[test]
    fn one_dimensional_quartic_matches_grid_search() {
        // f = x⁴/12, x = 1, H = 2, α = 1:  Ω(y) = 1/12 + h/3 + h²/2 + |h|³
        let f = PowerNorm::new(dvector![0.0], 4.0, 1.0 / 3.0, 2).unwrap();
        let space = MetricSpace::identity(1);
        let spec = ModelSpec::new(dvector![1.0], 2, 2.0, 1.0).unwrap();
        let (xp, _) = solve_model_order2(&spec, &f, &space, &SubsolverConfig::default()).unwrap();
        let omega = |h: f64| 1.0 / 12.0 + h / 3.0 + h * h / 2.0 + h.abs().powi(3);
        let mut best = (f64::INFINITY, 0.0);
        let n = 2_000_000;
        for i in 0..=n {
            let h = -2.0 + 4.0 * i as f64 / n as f64;
            let v = omega(h);
            if v < best.0 {
                best = (v, h);
            }
        }
        assert!((xp[0] - 1.0 - best.1).abs() < 1e-5);
    }

    #[test]
    fn general_metric() {
        let b = DMatrix::from_row_slice(3, 3, &[3.0, 0.5, 0.0, 0.5, 1.0, 0.2, 0.0, 0.2, 2.0]);
        let space = MetricSpace::with_operator(b).unwrap();
        let f = PowerNorm::new(dvector![1.0, -1.0, 0.5], 3.0, 1.0, 2).unwrap();
        let spec = ModelSpec::new(DVector::zeros(3), 2, 4.0, 1.0).unwrap();
        let (_, cert) = solve_model_order2(&spec, &f, &space, &SubsolverConfig::default()).unwrap();
        assert!(cert.accepted);
        assert!(cert.model_increment < 0.0);
    }
}
