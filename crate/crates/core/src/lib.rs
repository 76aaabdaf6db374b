//! High-order tensor methods for driving the gradient norm of a convex
//! function below a target accuracy.
//!
//! The crate is organized bottom-up: [`metric`] fixes the primal/dual norms,
//! [`oracle`] describes the objective, [`models`] builds regularized Taylor
//! models and their acceptance certificates, [`subsolver`] minimizes those
//! models, [`schemes`] runs the outer methods and records traces, and
//! [`instances`] supplies test functions including the worst-case chain.

pub mod instances;
pub mod metric;
pub mod models;
pub mod oracle;
pub mod schemes;
pub mod subsolver;

pub use metric::{DualVector, MetricSpace, PrimalVector};
pub use oracle::{CompositePart, Holder, OracleError, SmoothOracle};

/// `n!` as a float.
pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// `C_{p,ν} = 2∏_{i=1}^{p}(ν + i)`, the `ν`-Hölder constant of the `p`-th
/// derivative of `‖x‖^{p+ν}`.
pub fn power_norm_constant(p: usize, nu: f64) -> f64 {
    2.0 * (1..=p).map(|i| nu + i as f64).product::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_constants() {
        assert_eq!(factorial(0), 1.0);
        assert_eq!(factorial(4), 24.0);
        assert_eq!(power_norm_constant(2, 1.0), 12.0);
        assert_eq!(power_norm_constant(3, 0.0), 12.0);
    }
}
