//! Weak-form verification of linear differential constraints on kernels and
//! sample paths.

mod bump;
mod operator;
mod quadrature;
mod residual;

pub use bump::{bump_bank, BumpTestFunction};
pub use operator::{apply_adjoint, AdjointTestFunction, Coefficient, CoefficientFn, OperatorSpec, Term};
pub use quadrature::{BallRule, BoxRule, QuadratureNodes, RuleSpec};
pub use residual::{
    expected_second_moment, monte_carlo_pathwise, pathwise_residuals, residual, try_residual, verify_field,
    verify_kernel_constraint, BoundSampler, FieldSampler, GaussianField, McStats, ResidualReport, WeakForm,
};
