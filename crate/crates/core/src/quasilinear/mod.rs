//! Quasilinear systems `du = [∂_i(a_ij ∂_j u) + ∂_i F_i + φ] dt + Σ_n [b_in ∂_i u + g_n] dw_n`
//! by Galerkin collocation, with optional mollification and truncation.

pub mod coefficients;
pub mod collocation;
pub mod convergence;
pub mod martingale;
pub mod mollify;
pub mod solver;

pub use coefficients::{
    check_ql_coercivity, project_ball, project_ball_in_place, random_samples, sampled_constants,
    DeclaredConstants, Point, QlCoefficients, QlCoercivity, QlSample, SampledConstants,
    YDependence,
};
pub use collocation::Collocation;
pub use convergence::{
    convergence_study, sup_h_distance, ConvergenceStudy, LevelDistance, LimitKind,
};
pub use martingale::{
    martingale_residual, martingale_residuals, random_martingale_tests, MartingaleStat,
    MartingaleTest, PathFunctional,
};
pub use mollify::{mollify, Kernel, MollifiedCoefficients};
pub use solver::{as_linear_problem, solve_ql, QlOptions, QlProblem};
