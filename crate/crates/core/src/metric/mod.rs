//! Euclidean structure of the primal space and its dual.
//!
//! Primal vectors `x` are measured with `‖x‖ = ⟨Bx, x⟩^{1/2}` and dual vectors
//! (gradients, derivative actions) with `‖s‖_* = ⟨s, B⁻¹s⟩^{1/2}` for a fixed
//! symmetric positive-definite operator `B`. Both live in plain `DVector<f64>`
//! storage; the aliases below only document which side of the pairing a value
//! belongs to.

mod fdcheck;

pub use fdcheck::{derivative_action_check, gradient_check, DEFAULT_FD_STEP};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

/// A point or direction in the primal space.
pub type PrimalVector = DVector<f64>;
/// A linear functional on the primal space (gradients, derivative actions).
pub type DualVector = DVector<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("metric operator is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("metric operator is not symmetric (relative asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("metric operator is not positive definite")]
    NotPositiveDefinite,
    #[error("metric operator has non-finite entries")]
    NonFinite,
}

const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
enum Operator {
    Identity,
    Dense {
        b: DMatrix<f64>,
        chol: Cholesky<f64, Dyn>,
    },
}

/// The space `𝔼` together with its metric operator `B`.
///
/// Immutable after construction; the Cholesky factor of a dense `B` is
/// computed once here and reused for every dual-norm evaluation.
#[derive(Debug, Clone)]
pub struct MetricSpace {
    dim: usize,
    op: Operator,
}

impl MetricSpace {
    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            op: Operator::Identity,
        }
    }

    /// Builds a space from a dense symmetric positive-definite `B`.
    pub fn with_operator(b: DMatrix<f64>) -> Result<Self, MetricError> {
        if b.nrows() != b.ncols() {
            return Err(MetricError::NotSquare {
                rows: b.nrows(),
                cols: b.ncols(),
            });
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(MetricError::NonFinite);
        }
        let scale = b.amax().max(f64::MIN_POSITIVE);
        let asym = (&b - b.transpose()).amax() / scale;
        if asym > SYMMETRY_TOL {
            return Err(MetricError::NotSymmetric(asym));
        }
        let chol = Cholesky::new(b.clone()).ok_or(MetricError::NotPositiveDefinite)?;
        if chol.l_dirty().diagonal().iter().any(|d| *d <= 0.0) {
            return Err(MetricError::NotPositiveDefinite);
        }
        Ok(Self {
            dim: b.nrows(),
            op: Operator::Dense { b, chol },
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.op, Operator::Identity)
    }

    /// Dense copy of `B`.
    pub fn operator(&self) -> DMatrix<f64> {
        match &self.op {
            Operator::Identity => DMatrix::identity(self.dim, self.dim),
            Operator::Dense { b, .. } => b.clone(),
        }
    }

    pub fn check_dim(&self, v: &DVector<f64>) -> Result<(), MetricError> {
        if v.len() != self.dim {
            Err(MetricError::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            })
        } else {
            Ok(())
        }
    }

    /// `Bx`, the dual image of a primal vector.
    pub fn to_dual(&self, x: &PrimalVector) -> DualVector {
        match &self.op {
            Operator::Identity => x.clone(),
            Operator::Dense { b, .. } => b * x,
        }
    }

    /// `B⁻¹s`, the primal image of a dual vector.
    pub fn to_primal(&self, s: &DualVector) -> PrimalVector {
        match &self.op {
            Operator::Identity => s.clone(),
            Operator::Dense { chol, .. } => chol.solve(s),
        }
    }

    /// `‖x‖ = ⟨Bx, x⟩^{1/2}`. Panics on dimension mismatch; use
    /// [`MetricSpace::try_primal_norm`] for a checked variant.
    pub fn primal_norm(&self, x: &PrimalVector) -> f64 {
        match &self.op {
            Operator::Identity => x.norm(),
            Operator::Dense { b, .. } => (b * x).dot(x).max(0.0).sqrt(),
        }
    }

    /// `‖s‖_* = ⟨s, B⁻¹s⟩^{1/2}`.
    pub fn dual_norm(&self, s: &DualVector) -> f64 {
        match &self.op {
            Operator::Identity => s.norm(),
            Operator::Dense { chol, .. } => chol.solve(s).dot(s).max(0.0).sqrt(),
        }
    }

    pub fn try_primal_norm(&self, x: &PrimalVector) -> Result<f64, MetricError> {
        self.check_dim(x)?;
        Ok(self.primal_norm(x))
    }

    pub fn try_dual_norm(&self, s: &DualVector) -> Result<f64, MetricError> {
        self.check_dim(s)?;
        Ok(self.dual_norm(s))
    }

    /// Gradient of `‖h‖^q` with respect to `h`: `q‖h‖^{q−2}Bh` (zero at `h = 0`
    /// when `q > 1`).
    pub fn power_gradient(&self, h: &PrimalVector, q: f64) -> DualVector {
        let r = self.primal_norm(h);
        if r == 0.0 {
            return DVector::zeros(h.len());
        }
        self.to_dual(h) * (q * r.powf(q - 2.0))
    }

    /// Hessian of `‖h‖^q`: `q‖h‖^{q−2}B + q(q−2)‖h‖^{q−4}(Bh)(Bh)ᵀ`.
    /// At `h = 0` the limit is used: zero for `q > 2`, `2B` for `q = 2`.
    pub fn power_hessian(&self, h: &PrimalVector, q: f64) -> DMatrix<f64> {
        let n = h.len();
        let r = self.primal_norm(h);
        if r == 0.0 {
            return if (q - 2.0).abs() < 1e-15 {
                self.operator() * 2.0
            } else {
                DMatrix::zeros(n, n)
            };
        }
        let bh = self.to_dual(h);
        let mut m = self.operator() * (q * r.powf(q - 2.0));
        if q != 2.0 {
            m += &bh * bh.transpose() * (q * (q - 2.0) * r.powf(q - 4.0));
        }
        m
    }
}
