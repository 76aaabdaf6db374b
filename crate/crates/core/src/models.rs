//! Regularized Taylor models `Ω_{x,p,H}(y) = Φ_{x,p}(y) + (H/p!)‖y − x‖^{p+α}`,
//! their composite extension `Ω̃ = Ω + φ`, and the inexact-stationarity
//! certificate used to accept approximate model minimizers.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::factorial;
use crate::metric::{DualVector, MetricSpace, PrimalVector};
use crate::oracle::{check_dim, CompositePart, OracleError, SmoothOracle};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("invalid model: {0}")]
    InvalidSpec(String),
    #[error("oracle declares no Hölder constant for nu = {0}")]
    MissingConstant(f64),
    #[error("model center lies outside the domain of the composite part")]
    CenterOutsideDomain,
}

/// Center, order and regularization of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub center: PrimalVector,
    pub p: usize,
    /// Regularization constant `H`.
    pub h: f64,
    /// Exponent `α`: the Hölder exponent when it is known, `1` otherwise.
    pub alpha: f64,
    pub composite: Option<CompositePart>,
}

impl ModelSpec {
    pub fn new(center: PrimalVector, p: usize, h: f64, alpha: f64) -> Result<Self, ModelError> {
        if !(2..=3).contains(&p) {
            return Err(ModelError::InvalidSpec(format!("order {p} not in {{2, 3}}")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(ModelError::InvalidSpec(format!(
                "regularization constant must be positive, got {h}"
            )));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(ModelError::InvalidSpec(format!(
                "alpha must lie in [0, 1], got {alpha}"
            )));
        }
        Ok(Self {
            center,
            p,
            h,
            alpha,
            composite: None,
        })
    }

    /// Attaches `φ`; the zero part is stored as `None`.
    pub fn with_composite(mut self, phi: &CompositePart) -> Self {
        self.composite = (!phi.is_zero()).then(|| phi.clone());
        self
    }

    /// `q = p + α`.
    pub fn exponent(&self) -> f64 {
        self.p as f64 + self.alpha
    }

    /// `H/p!`.
    pub fn reg_coefficient(&self) -> f64 {
        self.h / factorial(self.p)
    }
}

/// Outcome of checking a candidate `x⁺` against the acceptance conditions
/// `Ω̃(x⁺) ≤ f̃(x)` and `‖∇Ω(x⁺) + g_φ‖_* ≤ θ‖x⁺ − x‖^{p+α−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub candidate: PrimalVector,
    /// `Ω̃(x⁺)`.
    pub model_value: f64,
    /// `Ω̃(x⁺) − f̃(x)`, accumulated term by term.
    pub model_increment: f64,
    /// `‖∇Ω(x⁺) + g_φ‖_*`.
    pub residual: f64,
    /// `‖x⁺ − x‖`.
    pub step_norm: f64,
    pub theta: f64,
    pub exponent: f64,
    pub accepted: bool,
    pub g_phi: Option<DualVector>,
}

impl Certificate {
    /// `θ‖x⁺ − x‖^{q−1}`.
    pub fn residual_bound(&self) -> f64 {
        self.theta * self.step_norm.powf(self.exponent - 1.0)
    }
}

/// A model with the oracle data at its center evaluated once.
pub struct RegularizedModel<'a> {
    spec: ModelSpec,
    f: &'a dyn SmoothOracle,
    space: &'a MetricSpace,
    fx: f64,
    gx: DualVector,
    phi_x: f64,
    hess: DMatrix<f64>,
}

impl<'a> RegularizedModel<'a> {
    pub fn new(
        spec: ModelSpec,
        f: &'a dyn SmoothOracle,
        space: &'a MetricSpace,
    ) -> Result<Self, ModelError> {
        check_dim(f.dim(), &spec.center)?;
        let (fx, gx) = f.value_grad(&spec.center);
        Self::from_cached(spec, f, space, fx, gx)
    }

    /// Builds the model reusing `f(x)` and `∇f(x)` already held by the caller.
    pub fn from_cached(
        spec: ModelSpec,
        f: &'a dyn SmoothOracle,
        space: &'a MetricSpace,
        fx: f64,
        gx: DualVector,
    ) -> Result<Self, ModelError> {
        check_dim(f.dim(), &spec.center)?;
        if spec.p > f.order() {
            return Err(ModelError::InvalidSpec(format!(
                "model order {} exceeds oracle order {}",
                spec.p,
                f.order()
            )));
        }
        let phi_x = spec.composite.as_ref().map_or(0.0, |c| c.value(&spec.center));
        if !phi_x.is_finite() {
            return Err(ModelError::CenterOutsideDomain);
        }
        let hess = f.hessian(&spec.center)?;
        Ok(Self {
            spec,
            f,
            space,
            fx,
            gx,
            phi_x,
            hess,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn space(&self) -> &MetricSpace {
        self.space
    }

    pub fn center(&self) -> &PrimalVector {
        &self.spec.center
    }

    pub fn dim(&self) -> usize {
        self.spec.center.len()
    }

    pub fn composite(&self) -> Option<&CompositePart> {
        self.spec.composite.as_ref()
    }

    /// `f(x)`.
    pub fn center_value(&self) -> f64 {
        self.fx
    }

    /// `f̃(x) = f(x) + φ(x)`.
    pub fn center_composite_value(&self) -> f64 {
        self.fx + self.phi_x
    }

    /// `∇f(x)`.
    pub fn center_gradient(&self) -> &DualVector {
        &self.gx
    }

    /// `∇²f(x)`.
    pub fn center_hessian(&self) -> &DMatrix<f64> {
        &self.hess
    }

    fn third_action(&self, h: &PrimalVector) -> Result<Option<DualVector>, ModelError> {
        if self.spec.p < 3 {
            return Ok(None);
        }
        Ok(Some(self.f.derivative_action(&self.spec.center, h, 3)?))
    }

    /// `Φ_{x,p}(x + h) − f(x)`.
    pub fn taylor_increment(&self, h: &PrimalVector) -> Result<f64, ModelError> {
        let qh = &self.hess * h;
        let mut v = self.gx.dot(h) + 0.5 * qh.dot(h);
        if let Some(t) = self.third_action(h)? {
            v += t.dot(h) / 6.0;
        }
        Ok(v)
    }

    /// `∇Φ_{x,p}(x + h)`.
    pub fn taylor_gradient_at(&self, h: &PrimalVector) -> Result<DualVector, ModelError> {
        let mut g = &self.gx + &self.hess * h;
        if let Some(t) = self.third_action(h)? {
            g += t * 0.5;
        }
        Ok(g)
    }

    /// `Ω(x + h) − f(x)`.
    pub fn smooth_increment(&self, h: &PrimalVector) -> Result<f64, ModelError> {
        let r = self.space.primal_norm(h);
        Ok(self.taylor_increment(h)? + self.spec.reg_coefficient() * r.powf(self.spec.exponent()))
    }

    /// `∇Ω(x + h)`, composite part excluded.
    pub fn smooth_gradient(&self, h: &PrimalVector) -> Result<DualVector, ModelError> {
        Ok(self.taylor_gradient_at(h)?
            + self.space.power_gradient(h, self.spec.exponent()) * self.spec.reg_coefficient())
    }

    /// `∇²Ω(x + h)`. The cubic Taylor term is differentiated by polarization
    /// of the order-3 action: `D³f(x)[h, e] = (D³f(x)[h+e]² − D³f(x)[h−e]²)/4`.
    pub fn smooth_hessian(&self, h: &PrimalVector) -> Result<DMatrix<f64>, ModelError> {
        let n = self.dim();
        let mut m = self.hess.clone();
        if self.spec.p >= 3 {
            let mut e = h.clone();
            for j in 0..n {
                e[j] = h[j] + 1.0;
                let plus = self.f.derivative_action(&self.spec.center, &e, 3)?;
                e[j] = h[j] - 1.0;
                let minus = self.f.derivative_action(&self.spec.center, &e, 3)?;
                e[j] = h[j];
                m.column_mut(j).axpy(0.25, &(plus - minus), 1.0);
            }
            m = (&m + m.transpose()) * 0.5;
        }
        m += self.space.power_hessian(h, self.spec.exponent()) * self.spec.reg_coefficient();
        Ok(m)
    }

    /// `Ω̃(y)`; `+∞` outside the domain of `φ`.
    pub fn value(&self, y: &PrimalVector) -> Result<f64, ModelError> {
        Ok(self.center_composite_value() + self.increment(y)?)
    }

    /// `Ω̃(y) − f̃(x)`.
    pub fn increment(&self, y: &PrimalVector) -> Result<f64, ModelError> {
        check_dim(self.dim(), y)?;
        let phi_y = self.spec.composite.as_ref().map_or(0.0, |c| c.value(y));
        if !phi_y.is_finite() {
            return Ok(f64::INFINITY);
        }
        let h = y - &self.spec.center;
        Ok(self.smooth_increment(&h)? + (phi_y - self.phi_x))
    }

    /// `∇Ω(y)`.
    pub fn gradient(&self, y: &PrimalVector) -> Result<DualVector, ModelError> {
        check_dim(self.dim(), y)?;
        self.smooth_gradient(&(y - &self.spec.center))
    }

    /// Evaluates both acceptance conditions at `x⁺`.
    pub fn certificate(
        &self,
        x_plus: &PrimalVector,
        g_phi: Option<&DualVector>,
        theta: f64,
    ) -> Result<Certificate, ModelError> {
        let increment = self.increment(x_plus)?;
        let mut grad = self.gradient(x_plus)?;
        if let Some(g) = g_phi {
            grad += g;
        }
        let residual = self.space.dual_norm(&grad);
        let step_norm = self.space.primal_norm(&(x_plus - &self.spec.center));
        let q = self.spec.exponent();
        let accepted = increment <= 0.0 && residual <= theta * step_norm.powf(q - 1.0);
        Ok(Certificate {
            candidate: x_plus.clone(),
            model_value: self.center_composite_value() + increment,
            model_increment: increment,
            residual,
            step_norm,
            theta,
            exponent: q,
            accepted,
            g_phi: g_phi.cloned(),
        })
    }
}

/// `Φ_{x,p}(y)` with `p` the oracle's order.
pub fn taylor_value(
    f: &dyn SmoothOracle,
    x: &PrimalVector,
    y: &PrimalVector,
) -> Result<f64, ModelError> {
    let h = y - x;
    let mut v = f.value(x) + f.gradient(x).dot(&h);
    if f.order() >= 2 {
        v += 0.5 * f.derivative_action(x, &h, 2)?.dot(&h);
    }
    if f.order() >= 3 {
        v += f.derivative_action(x, &h, 3)?.dot(&h) / 6.0;
    }
    Ok(v)
}

/// `∇Φ_{x,p}(y) = Σ_i D^i f(x)[y − x]^{i−1}/(i−1)!`.
pub fn taylor_gradient(
    f: &dyn SmoothOracle,
    x: &PrimalVector,
    y: &PrimalVector,
) -> Result<DualVector, ModelError> {
    let h = y - x;
    let mut g = f.gradient(x);
    if f.order() >= 2 {
        g += f.derivative_action(x, &h, 2)?;
    }
    if f.order() >= 3 {
        g += f.derivative_action(x, &h, 3)? * 0.5;
    }
    Ok(g)
}

/// `Ω̃(y)` for a one-off evaluation.
pub fn model_value(
    spec: &ModelSpec,
    f: &dyn SmoothOracle,
    space: &MetricSpace,
    y: &PrimalVector,
) -> Result<f64, ModelError> {
    RegularizedModel::new(spec.clone(), f, space)?.value(y)
}

/// `∇Ω(y)` for a one-off evaluation (composite part excluded).
pub fn model_gradient(
    spec: &ModelSpec,
    f: &dyn SmoothOracle,
    space: &MetricSpace,
    y: &PrimalVector,
) -> Result<DualVector, ModelError> {
    RegularizedModel::new(spec.clone(), f, space)?.gradient(y)
}

/// `(p − 1)H_{f,p}(ν)`: any regularization constant at or above this value
/// makes the model convex.
pub fn convexity_threshold(f: &dyn SmoothOracle, nu: f64) -> Result<f64, ModelError> {
    let h = f.holder_constant(nu).ok_or(ModelError::MissingConstant(nu))?;
    Ok((f.order() as f64 - 1.0) * h)
}

pub fn check_certificate(
    spec: &ModelSpec,
    f: &dyn SmoothOracle,
    space: &MetricSpace,
    x_plus: &PrimalVector,
    g_phi: Option<&DualVector>,
    theta: f64,
) -> Result<Certificate, ModelError> {
    if spec.composite.is_some() != g_phi.is_some() {
        return Err(ModelError::InvalidSpec(
            "a subgradient selection is required exactly when a composite part is present".into(),
        ));
    }
    RegularizedModel::new(spec.clone(), f, space)?.certificate(x_plus, g_phi, theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{HardInstance, PowerNorm, Quadratic};
    use nalgebra::{dvector, DVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn quartic_1d(p: usize) -> PowerNorm {
        // x⁴/12
        PowerNorm::new(dvector![0.0], 4.0, 1.0 / 3.0, p).unwrap()
    }

    fn zero_fn(n: usize, p: usize) -> Quadratic {
        Quadratic::new(DMatrix::zeros(n, n), DVector::zeros(n), p).unwrap()
    }

    fn randn(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
    }

    #[test]
    fn taylor_examples() {
        let f = quartic_1d(2);
        let v = taylor_value(&f, &dvector![1.0], &dvector![2.0]).unwrap();
        assert!((v - 11.0 / 12.0).abs() < 1e-14);
        assert_eq!(taylor_value(&f, &dvector![1.0], &dvector![1.0]).unwrap(), f.value(&dvector![1.0]));
        let q = Quadratic::random(4, 5.0, 1, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (x, y) = (randn(&mut rng, 4), randn(&mut rng, 4));
        assert!((taylor_value(&q, &x, &y).unwrap() - q.value(&y)).abs() < 1e-12);
        assert!((taylor_gradient(&q, &x, &y).unwrap() - q.gradient(&y)).amax() < 1e-12);
        assert_eq!(taylor_gradient(&q, &x, &x).unwrap(), q.gradient(&x));
    }

    #[test]
    fn taylor_gradient_matches_finite_differences() {
        let f = PowerNorm::new(dvector![0.2, -0.1, 0.4], 4.0, 1.0, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let (x, y) = (randn(&mut rng, 3), randn(&mut rng, 3));
            let g = taylor_gradient(&f, &x, &y).unwrap();
            for i in 0..3 {
                let mut e = DVector::zeros(3);
                e[i] = 1e-5;
                let fd = (taylor_value(&f, &x, &(&y + &e)).unwrap()
                    - taylor_value(&f, &x, &(&y - &e)).unwrap())
                    / 2e-5;
                assert!((fd - g[i]).abs() <= 1e-6 * g[i].abs().max(1.0));
            }
        }
    }

    #[test]
    fn model_value_examples() {
        let space = MetricSpace::identity(2);
        let f = zero_fn(2, 2);
        let spec = ModelSpec::new(DVector::zeros(2), 2, 2.0, 1.0).unwrap();
        let v = model_value(&spec, &f, &space, &dvector![0.6, 0.8]).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        assert_eq!(model_value(&spec, &f, &space, &DVector::zeros(2)).unwrap(), 0.0);
        let bigger = ModelSpec::new(DVector::zeros(2), 2, 3.0, 1.0).unwrap();
        assert!(model_value(&bigger, &f, &space, &dvector![0.6, 0.8]).unwrap() > v);
        for p in [2, 3] {
            let f = zero_fn(2, p);
            let spec = ModelSpec::new(DVector::zeros(2), p, factorial(p), 1.0).unwrap();
            let g = model_gradient(&spec, &f, &space, &dvector![1.0, 0.0]).unwrap();
            assert!((g - dvector![(p + 1) as f64, 0.0]).amax() < 1e-14);
        }
        let phi = CompositePart::l1(1.0).unwrap();
        let spec = ModelSpec::new(DVector::zeros(2), 2, 2.0, 1.0).unwrap().with_composite(&phi);
        let v = model_value(&spec, &f, &space, &dvector![0.6, 0.8]).unwrap();
        assert!((v - 2.4).abs() < 1e-15);
    }

    #[test]
    fn model_gradient_and_hessian_match_finite_differences() {
        let space = MetricSpace::with_operator(DMatrix::from_row_slice(
            3,
            3,
            &[2.0, 0.2, 0.0, 0.2, 1.0, 0.1, 0.0, 0.1, 1.5],
        ))
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for (p, alpha) in [(2, 1.0), (2, 0.5), (3, 1.0), (3, 0.0)] {
            let f = PowerNorm::new(dvector![0.3, 0.0, -0.5], 4.0, 1.0, p).unwrap();
            let x = randn(&mut rng, 3);
            let spec = ModelSpec::new(x.clone(), p, 3.0, alpha).unwrap();
            let m = RegularizedModel::new(spec, &f, &space).unwrap();
            for _ in 0..5 {
                let y = &x + randn(&mut rng, 3) * 0.5;
                let g = m.gradient(&y).unwrap();
                let hm = m.smooth_hessian(&(&y - &x)).unwrap();
                for i in 0..3 {
                    let mut e = DVector::zeros(3);
                    e[i] = 1e-5;
                    let fd = (m.value(&(&y + &e)).unwrap() - m.value(&(&y - &e)).unwrap()) / 2e-5;
                    assert!((fd - g[i]).abs() <= 1e-6 * g[i].abs().max(1.0), "p={p} a={alpha}");
                    let fdh = (m.gradient(&(&y + &e)).unwrap() - m.gradient(&(&y - &e)).unwrap()) / 2e-5;
                    assert!((fdh - hm.column(i)).amax() <= 1e-5 * hm.amax().max(1.0));
                }
            }
        }
    }

    #[test]
    fn convexity_threshold_values() {
        let h = HardInstance::new(8, 8, 2, 1.0).unwrap();
        assert!((convexity_threshold(&h, 1.0).unwrap() - 4.0 * 2f64.sqrt()).abs() < 1e-12);
        let h3 = HardInstance::new(8, 8, 3, 1.0).unwrap();
        assert!((convexity_threshold(&h3, 1.0).unwrap() - 2.0 * h3.holder_constant_value()).abs() < 1e-12);
        let q = Quadratic::random(3, 2.0, 0, 2).unwrap();
        assert_eq!(convexity_threshold(&q, 1.0).unwrap(), 0.0);
        assert!(matches!(
            convexity_threshold(&h, 0.5),
            Err(ModelError::MissingConstant(_))
        ));
    }

    #[test]
    fn certificate_trivial_cases() {
        let space = MetricSpace::identity(2);
        let f = Quadratic::centered(DMatrix::identity(2, 2), dvector![1.0, 0.0], 2).unwrap();
        let x = DVector::zeros(2);
        let spec = ModelSpec::new(x.clone(), 2, 1.0, 1.0).unwrap();
        let c = check_certificate(&spec, &f, &space, &x, None, 1e6).unwrap();
        assert!(!c.accepted);
        assert_eq!(c.step_norm, 0.0);
        // stationary center
        let at_min = dvector![1.0, 0.0];
        let spec = ModelSpec::new(at_min.clone(), 2, 1.0, 1.0).unwrap();
        let c = check_certificate(&spec, &f, &space, &at_min, None, 0.0).unwrap();
        assert!(c.accepted);
        let phi = CompositePart::l1(1.0).unwrap();
        let spec = spec.with_composite(&phi);
        assert!(check_certificate(&spec, &f, &space, &at_min, None, 0.0).is_err());
    }

    #[test]
    fn upper_bound_property() {
        let space = MetricSpace::identity(6);
        let f = HardInstance::new(6, 6, 2, 1.0).unwrap();
        let h = f.holder_constant_value();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let x = randn(&mut rng, 6);
            let y = &x + randn(&mut rng, 6);
            let spec = ModelSpec::new(x, 2, h, 1.0).unwrap();
            let m = model_value(&spec, &f, &space, &y).unwrap();
            assert!(m >= f.value(&y) - 1e-10);
        }
    }

    #[test]
    fn threshold_convexifies_model() {
        let space = MetricSpace::identity(8);
        let f = HardInstance::new(8, 8, 2, 1.0).unwrap();
        let h = convexity_threshold(&f, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let x = randn(&mut rng, 8);
            let m = RegularizedModel::new(ModelSpec::new(x, 2, h, 1.0).unwrap(), &f, &space).unwrap();
            let d = randn(&mut rng, 8);
            let eig = m.smooth_hessian(&d).unwrap().symmetric_eigenvalues().min();
            assert!(eig >= -1e-9);
        }
    }
}
