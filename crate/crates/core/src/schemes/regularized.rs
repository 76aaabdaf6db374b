//! Uniformly convex regularization `F_δ(x) = f(x) + (δ/q)‖x − x₀‖^q`.

use nalgebra::{DMatrix, DVector};

use crate::metric::{DualVector, MetricSpace, PrimalVector};
use crate::oracle::{check_action_order, check_dim, Holder, OracleError, SmoothOracle};
use crate::power_norm_constant;

/// `F_δ` as an oracle of the same order as the base function.
pub struct RegularizedProblem<'a> {
    base: &'a dyn SmoothOracle,
    delta: f64,
    anchor: PrimalVector,
    q: f64,
    space: MetricSpace,
}

/// Builds `F_δ = f + (δ/q)‖x − anchor‖^q` in the norm of `space`.
pub fn make_regularized<'a>(
    base: &'a dyn SmoothOracle,
    delta: f64,
    anchor: PrimalVector,
    q: f64,
    space: MetricSpace,
) -> Result<RegularizedProblem<'a>, OracleError> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(OracleError::InvalidParameter(format!(
            "regularization weight must be positive, got {delta}"
        )));
    }
    if !(q >= 2.0) {
        return Err(OracleError::InvalidParameter(format!(
            "regularization exponent must be at least 2, got {q}"
        )));
    }
    check_dim(base.dim(), &anchor)?;
    if space.dim() != base.dim() {
        return Err(OracleError::DimensionMismatch {
            expected: base.dim(),
            got: space.dim(),
        });
    }
    Ok(RegularizedProblem {
        base,
        delta,
        anchor,
        q,
        space,
    })
}

impl RegularizedProblem<'_> {
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn anchor(&self) -> &PrimalVector {
        &self.anchor
    }

    pub fn exponent(&self) -> f64 {
        self.q
    }

    pub fn base(&self) -> &dyn SmoothOracle {
        self.base
    }

    /// Value of the regularizer alone.
    pub fn regularizer(&self, x: &PrimalVector) -> f64 {
        self.delta / self.q * self.space.primal_norm(&(x - &self.anchor)).powf(self.q)
    }

    fn reg_action(&self, x: &PrimalVector, h: &PrimalVector, order: usize) -> Result<DualVector, OracleError> {
        let q = self.q;
        let u = x - &self.anchor;
        let r = self.space.primal_norm(&u);
        let bh = self.space.to_dual(h);
        if order == 2 {
            if r == 0.0 {
                return Ok(if q == 2.0 {
                    bh * self.delta
                } else {
                    DVector::zeros(h.len())
                });
            }
            let bu = self.space.to_dual(&u);
            let uh = bu.dot(h);
            return Ok((bh * r.powf(q - 2.0) + bu * ((q - 2.0) * r.powf(q - 4.0) * uh)) * self.delta);
        }
        if r == 0.0 {
            if q > 3.0 || h.iter().all(|v| *v == 0.0) {
                return Ok(DVector::zeros(h.len()));
            }
            return Err(OracleError::Undefined { order });
        }
        let bu = self.space.to_dual(&u);
        let uh = bu.dot(h);
        let hh = bh.dot(h);
        let a = (q - 2.0) * r.powf(q - 4.0);
        let b = (q - 2.0) * (q - 4.0) * r.powf(q - 6.0) * uh * uh;
        Ok((bh * (2.0 * a * uh) + bu * (a * hh + b)) * self.delta)
    }
}

impl SmoothOracle for RegularizedProblem<'_> {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn order(&self) -> usize {
        self.base.order()
    }
    fn value(&self, x: &PrimalVector) -> f64 {
        self.base.value(x) + self.regularizer(x)
    }
    fn gradient(&self, x: &PrimalVector) -> DualVector {
        self.base.gradient(x) + self.space.power_gradient(&(x - &self.anchor), self.q) * (self.delta / self.q)
    }
    fn value_grad(&self, x: &PrimalVector) -> (f64, DualVector) {
        let (v, g) = self.base.value_grad(x);
        let u = x - &self.anchor;
        (
            v + self.regularizer(x),
            g + self.space.power_gradient(&u, self.q) * (self.delta / self.q),
        )
    }
    fn derivative_action(
        &self,
        x: &PrimalVector,
        h: &PrimalVector,
        order: usize,
    ) -> Result<DualVector, OracleError> {
        check_action_order(order, self.order())?;
        check_dim(self.dim(), h)?;
        Ok(self.base.derivative_action(x, h, order)? + self.reg_action(x, h, order)?)
    }
    fn hessian(&self, x: &PrimalVector) -> Result<DMatrix<f64>, OracleError> {
        let hb = self.base.hessian(x)?;
        Ok(hb + self.space.power_hessian(&(x - &self.anchor), self.q) * (self.delta / self.q))
    }
    /// `H_F = H + (δ/q)C_{p,ν}` for `ν = q − p`, when the base declares a
    /// constant for that `ν`.
    fn holder(&self) -> Option<Holder> {
        let p = self.order();
        let nu = self.q - p as f64;
        if !(0.0..=1.0).contains(&nu) {
            return None;
        }
        self.base.holder_constant(nu).map(|h| Holder {
            nu,
            constant: h + self.delta / self.q * power_norm_constant(p, nu),
        })
    }
    fn is_convex(&self) -> bool {
        self.base.is_convex()
    }
    fn name(&self) -> String {
        format!("{}+reg", self.base.name())
    }
}
