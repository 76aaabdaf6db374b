//! Test functions: the convex catalog and the worst-case chain family.

pub mod hard;
pub mod zoo;

pub use hard::{
    gradient_lower_bound_check, hard_derivative_action, hard_value_grad, subspace_growth_report,
    HardInstance, SubspaceReport,
};
pub use zoo::{zoo, LogSumExp, PowerNorm, Quadratic, ZooInstance, ZooSpec};
