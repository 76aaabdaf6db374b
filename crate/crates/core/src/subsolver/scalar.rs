//! Scalar auxiliaries of the accelerated schemes: the step coefficient `a`
//! and the minimizer of the estimating function `ψ`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::SubsolverError;
use crate::factorial;
use crate::metric::{DualVector, MetricSpace, PrimalVector};
use crate::oracle::CompositePart;

/// Positive root `a` of `a^q = c·(A + a)^{q−1}` with
/// `c = (p−1)!/(2^{3p−1}M)`.
///
/// Solved as `G(a) = a − c^{1/q}(A + a)^{(q−1)/q} = 0`; `G` is convex with
/// `G(0) ≤ 0`, so Newton from a point right of the root converges
/// monotonically. Bisection guards every step.
pub fn solve_at_coefficient(big_a: f64, m: f64, p: usize, q: f64) -> f64 {
    let c = factorial(p - 1) / (2f64.powi(3 * p as i32 - 1) * m);
    if big_a <= 0.0 {
        return c;
    }
    let cq = c.powf(1.0 / q);
    let e = (q - 1.0) / q;
    let g = |a: f64| a - cq * (big_a + a).powf(e);
    let mut lo = 0.0f64;
    let mut hi = c.max(cq * big_a.powf(e)).max(f64::MIN_POSITIVE);
    while g(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    let mut a = hi;
    for _ in 0..200 {
        let ga = g(a);
        if ga == 0.0 {
            return a;
        }
        if ga > 0.0 {
            hi = a;
        } else {
            lo = a;
        }
        let dg = 1.0 - cq * e * (big_a + a).powf(e - 1.0);
        let mut next = a - ga / dg;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if next == a || hi - lo <= f64::EPSILON * hi {
            break;
        }
        a = next;
    }
    // the bracket end with the smaller residual
    if g(hi).abs() <= g(lo).abs() {
        hi
    } else {
        lo
    }
}

/// `ψ(x) = (1/q)‖x − x₀‖^q + ⟨c, x⟩ + κ + A·φ(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiState {
    pub anchor: PrimalVector,
    pub q: f64,
    pub c: DualVector,
    pub constant: f64,
    /// Accumulated weight `A` of the composite part.
    pub composite_weight: f64,
}

impl PsiState {
    pub fn new(anchor: PrimalVector, q: f64) -> Self {
        let n = anchor.len();
        Self {
            anchor,
            q,
            c: DVector::zeros(n),
            constant: 0.0,
            composite_weight: 0.0,
        }
    }

    /// Adds `a·[f(z) + ⟨∇f(z), x − z⟩ + φ(x)]`.
    pub fn add_linearization(&mut self, a: f64, z: &PrimalVector, fz: f64, gz: &DualVector) {
        self.c.axpy(a, gz, 1.0);
        self.constant += a * (fz - gz.dot(z));
        self.composite_weight += a;
    }

    pub fn evaluate(&self, space: &MetricSpace, phi: Option<&CompositePart>, x: &PrimalVector) -> f64 {
        let r = space.primal_norm(&(x - &self.anchor));
        let mut v = r.powf(self.q) / self.q + self.c.dot(x) + self.constant;
        if let Some(p) = phi {
            if self.composite_weight > 0.0 {
                v += self.composite_weight * p.value(x);
            }
        }
        v
    }

    /// Dual norm of the element of `∂ψ(x)` closest to zero.
    pub fn stationarity(&self, space: &MetricSpace, phi: Option<&CompositePart>, x: &PrimalVector) -> f64 {
        let g = space.power_gradient(&(x - &self.anchor), self.q) / self.q + &self.c;
        match phi {
            Some(p) if self.composite_weight > 0.0 => {
                let sel = p.closest_subgradient(x, &(-&g / self.composite_weight));
                space.dual_norm(&(g + sel * self.composite_weight))
            }
            _ => space.dual_norm(&g),
        }
    }
}

/// `argmin ψ`.
///
/// Without a composite part the minimizer is `x₀ − t·B⁻¹c/‖c‖_*` with
/// `t = ‖c‖_*^{1/(q−1)}`. With one, `x(τ) = prox_{Aφ/τ}(x₀ − c/τ)` and `τ` is
/// found by bisection on `τ = ‖x(τ) − x₀‖^{q−2}` in log scale.
pub fn solve_psi(
    state: &PsiState,
    space: &MetricSpace,
    phi: Option<&CompositePart>,
) -> Result<PrimalVector, SubsolverError> {
    let x0 = &state.anchor;
    let q = state.q;
    let phi = phi.filter(|p| !p.is_zero() && state.composite_weight > 0.0);
    let Some(phi) = phi else {
        let cn = space.dual_norm(&state.c);
        if cn == 0.0 {
            return Ok(x0.clone());
        }
        let t = cn.powf(1.0 / (q - 1.0));
        return Ok(x0 - space.to_primal(&state.c) * (t / cn));
    };
    if !space.is_identity() {
        return Err(SubsolverError::Unsupported(
            "composite estimating functions are solved in the identity metric only".into(),
        ));
    }
    let a = state.composite_weight;
    // x₀ itself is optimal when −c ∈ A∂φ(x₀)
    let sel = phi.closest_subgradient(x0, &(-&state.c / a));
    if phi.contains(x0) && (&state.c + sel * a).norm() == 0.0 {
        return Ok(x0.clone());
    }
    let point = |tau: f64| phi.prox(&(x0 - &state.c / tau), a / tau);
    if (q - 2.0).abs() < 1e-15 {
        return Ok(point(1.0));
    }
    // G(τ) = ln τ − (q−2) ln ‖x(τ) − x₀‖ is increasing in τ
    let gfun = |lt: f64| -> f64 {
        let r = (point(lt.exp()) - x0).norm();
        if r == 0.0 {
            f64::INFINITY
        } else {
            lt - (q - 2.0) * r.ln()
        }
    };
    let mut lo = 0.0f64;
    let mut hi = 0.0f64;
    let mut step = 1.0;
    let mut found = false;
    for _ in 0..200 {
        if gfun(lo) > 0.0 {
            hi = lo;
            lo -= step;
        } else if gfun(hi) < 0.0 {
            lo = hi;
            hi += step;
        } else {
            found = true;
            break;
        }
        step *= 2.0;
    }
    if !found {
        return Err(SubsolverError::NotBracketed);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if gfun(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // choose the end whose point best satisfies stationarity
    let xa = point(lo.exp());
    let xb = point(hi.exp());
    if state.stationarity(space, Some(phi), &xa) <= state.stationarity(space, Some(phi), &xb) {
        Ok(xa)
    } else {
        Ok(xb)
    }
}
