//! Approximate minimizers of regularized models, and the scalar solvers used
//! by the accelerated schemes.

mod generic;
mod order2;
mod scalar;

pub use generic::solve_model_generic;
pub use order2::solve_model_order2;
pub use scalar::{solve_at_coefficient, solve_psi, PsiState};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::{MetricSpace, PrimalVector};
use crate::models::{Certificate, ModelError, ModelSpec, RegularizedModel};
use crate::oracle::{OracleError, SmoothOracle};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsolverConfig {
    /// Slack `θ` in the residual condition of the certificate.
    pub theta: f64,
    pub max_inner_iterations: usize,
    /// Stopping tolerance of inner descent loops, relative to the initial
    /// model gradient.
    pub inner_tolerance: f64,
    /// Relative tolerance of one-dimensional root finds.
    pub radial_tolerance: f64,
}

impl Default for SubsolverConfig {
    fn default() -> Self {
        Self {
            theta: 1e-2,
            max_inner_iterations: 500,
            inner_tolerance: 1e-14,
            radial_tolerance: 1e-15,
        }
    }
}

impl SubsolverConfig {
    pub fn validate(&self) -> Result<(), SubsolverError> {
        if !(self.theta >= 0.0) {
            return Err(SubsolverError::InvalidConfig("theta must be nonnegative".into()));
        }
        if self.max_inner_iterations == 0 {
            return Err(SubsolverError::InvalidConfig(
                "max_inner_iterations must be at least 1".into(),
            ));
        }
        if !(self.inner_tolerance > 0.0 && self.radial_tolerance > 0.0) {
            return Err(SubsolverError::InvalidConfig("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SubsolverError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid subsolver configuration: {0}")]
    InvalidConfig(String),
    #[error("inner budget of {iterations} iterations exhausted (residual {residual:.3e}, bound {bound:.3e})")]
    BudgetExhausted {
        iterations: usize,
        residual: f64,
        bound: f64,
    },
    #[error("model is not convex at this regularization (factorization failed)")]
    Factorization,
    #[error("root of the scalar equation could not be bracketed")]
    NotBracketed,
    #[error("{0}")]
    Unsupported(String),
}

impl From<OracleError> for SubsolverError {
    fn from(e: OracleError) -> Self {
        SubsolverError::Model(ModelError::Oracle(e))
    }
}

impl SubsolverError {
    /// Failures that a larger regularization constant can cure.
    pub fn is_recoverable(&self) -> bool {
        matches!(
            self,
            SubsolverError::BudgetExhausted { .. }
                | SubsolverError::Factorization
                | SubsolverError::NotBracketed
                | SubsolverError::Model(ModelError::Oracle(OracleError::Undefined { .. }))
        )
    }
}

/// Uses the radial solver for smooth order-2 models and the generic loop
/// otherwise. The certificate is checked with `cfg.theta` in both cases.
pub fn solve_model(
    model: &RegularizedModel<'_>,
    cfg: &SubsolverConfig,
) -> Result<(PrimalVector, Certificate), SubsolverError> {
    if model.spec().p == 2 && model.composite().is_none() {
        match order2::solve_built(model, cfg) {
            Err(e) if e.is_recoverable() => {}
            other => return other,
        }
    }
    generic::solve_built(model, cfg)
}

/// Builds the model for `spec` and solves it.
pub fn solve(
    spec: &ModelSpec,
    f: &dyn SmoothOracle,
    space: &MetricSpace,
    cfg: &SubsolverConfig,
) -> Result<(PrimalVector, Certificate), SubsolverError> {
    let model = RegularizedModel::new(spec.clone(), f, space)?;
    solve_model(&model, cfg)
}
