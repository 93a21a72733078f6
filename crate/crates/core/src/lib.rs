//! Stein variational planning over Gaussian-process trajectories.
//!
//! A set of trajectory particles, each a stack of kinematic support states,
//! is moved by a second-order Stein variational update toward the posterior
//! `p(θ | O=1) ∝ exp(-C̃(θ)/λ) p(θ)`, where `p(θ)` is a constant-velocity GP
//! prior and `C̃` a hinge obstacle cost on signed distances. With a single
//! particle the update reduces to Gauss-Newton trajectory optimization.
//!
//! Modules, bottom-up:
//!
//! - [`linalg`]: block-tridiagonal matrices and their block Cholesky factor
//! - [`trajectory`]: state layout, particles, planner settings
//! - [`prior`]: the GP prior, its log-density and sampling
//! - [`environment`]: 2D worlds, robot kinematics, obstacle residuals
//! - [`factor_graph`]: residual stack, cost, gradient, Gauss-Newton Hessian
//! - [`svgd`]: metric, kernel, Stein direction, preconditioned update
//! - [`value`]: particle weights and the soft-value estimate
//! - [`planner`]: the iteration loop
//! - [`config`], [`output`], [`cli`]: file formats and the command line

pub mod cli;
pub mod config;
pub mod environment;
pub mod error;
pub mod factor_graph;
pub mod linalg;
pub mod output;
pub mod planner;
pub mod prior;
pub mod svgd;
pub mod trajectory;
pub mod value;

pub use error::{Error, Result};
pub use planner::{plan, InitMode, PlanRequest, PlanResult, Planner, Termination};
