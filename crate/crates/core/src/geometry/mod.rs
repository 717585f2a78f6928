//! Onsager geometry of the probability simplex.
//!
//! A detailed-balanced network and a mean function `θ` define the Onsager
//! response matrix `K(x)`. Its pseudo-inverse is a Riemannian metric on the
//! interior of the simplex, and `-K ∇ψ` is the gradient flow of the free
//! energy `ψ` in that metric.

pub mod derivatives;
pub mod flow;
pub mod local;
pub mod mean;
pub mod metric;
pub mod onsager;
pub mod operators;

pub use derivatives::{divergence_k, grad_log_det_g, log_det_g, DerivativeScheme};
pub use flow::{solve_gradient_flow, solve_linear_ode};
pub use local::LocalGeometry;
pub use mean::{ChiSquared, ConvexFunction, MeanFunction};
pub use metric::{metric_tensor, MetricData};
pub use onsager::{
    build_onsager, build_onsager_general, free_energy, linear_network_reactions, onsager_matrix,
    OnsagerDecomposition, Reaction,
};
pub use operators::{
    apply_generator, differential_operators, hje_residual, wasserstein2_twopoint,
    DifferentialOperators, LinearField, Potential, QuadraticField, ScalarField,
};
