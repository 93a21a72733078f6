//! Likelihood factor graph over support states.
//!
//! Each support state carries one unary obstacle factor with a residual per
//! collision sphere. Stacked, they form `h(θ)`, weighted by a block-diagonal
//! `Σ⁻¹ = I / σ_obs²`. The likelihood is `exp(-C̃(θ)/λ)` with
//! `C̃(θ) = ½ hᵀΣ⁻¹h`.

use nalgebra::{DMatrix, DVector};

use crate::environment::{state_obstacle_residual, ObstacleParams, RobotModel, World2D};
use crate::error::{Error, Result};
use crate::linalg::BlockTridiag;
use crate::prior::GpPrior;
use crate::trajectory::{StateSpec, SupportTrajectory};

/// Jacobian of `h` with one `(num_spheres x state_dim)` block per support
/// state; block `n` is `∂h_n/∂θ_n` and all other entries are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct ObstacleJacobian {
    pub blocks: Vec<DMatrix<f64>>,
}

impl ObstacleJacobian {
    pub fn rows(&self) -> usize {
        self.blocks.iter().map(|b| b.nrows()).sum()
    }

    pub fn cols(&self) -> usize {
        self.blocks.iter().map(|b| b.ncols()).sum()
    }

    /// `Jᵀ v`.
    pub fn tr_mul(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.cols());
        let (mut r, mut c) = (0, 0);
        for b in &self.blocks {
            let seg = b.tr_mul(&v.rows(r, b.nrows()));
            out.rows_mut(c, b.ncols()).copy_from(&seg);
            r += b.nrows();
            c += b.ncols();
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows(), self.cols());
        let (mut r, mut c) = (0, 0);
        for b in &self.blocks {
            m.view_mut((r, c), b.shape()).copy_from(b);
            r += b.nrows();
            c += b.ncols();
        }
        m
    }
}

/// Per-particle quantities for one planner iteration.
#[derive(Clone, Debug)]
pub struct ParticleWorkspace {
    pub residual: DVector<f64>,
    pub jacobian: ObstacleJacobian,
    /// Log-posterior gradient `g(θ)`.
    pub grad: DVector<f64>,
    /// Gauss-Newton Hessian `H(θ)`.
    pub hessian: BlockTridiag,
    /// `C̃(θ)`.
    pub cost: f64,
    /// `log p(θ)` including the normalization constant.
    pub log_prior: f64,
}

#[derive(Clone, Debug)]
pub struct FactorGraph {
    pub world: World2D,
    pub model: RobotModel,
    pub params: ObstacleParams,
    pub spec: StateSpec,
}

impl FactorGraph {
    pub fn new(
        world: World2D,
        model: RobotModel,
        params: ObstacleParams,
        spec: StateSpec,
    ) -> Result<Self> {
        spec.validate()?;
        params.validate()?;
        model.validate()?;
        if model.dof() != spec.dof {
            return Err(Error::Dimension {
                what: "robot dof vs state spec",
                expected: spec.dof,
                got: model.dof(),
            });
        }
        Ok(Self {
            world,
            model,
            params,
            spec,
        })
    }

    pub fn residual_dim(&self) -> usize {
        self.spec.num_support * self.model.num_spheres()
    }

    /// Diagonal entry of `Σ⁻¹`, shared by every residual.
    pub fn residual_weight(&self) -> f64 {
        self.params.sigma_obs.powi(-2)
    }

    pub fn sigma_inv_dense(&self) -> DMatrix<f64> {
        DMatrix::identity(self.residual_dim(), self.residual_dim()) * self.residual_weight()
    }

    fn check(&self, theta: &SupportTrajectory) -> Result<()> {
        if theta.len() != self.spec.dim() {
            return Err(Error::Dimension {
                what: "trajectory vs factor graph",
                expected: self.spec.dim(),
                got: theta.len(),
            });
        }
        Ok(())
    }

    pub fn evaluate_residual(
        &self,
        theta: &SupportTrajectory,
    ) -> Result<(DVector<f64>, ObstacleJacobian)> {
        self.check(theta)?;
        let s = self.model.num_spheres();
        let mut h = DVector::zeros(self.residual_dim());
        let mut blocks = Vec::with_capacity(self.spec.num_support);
        for n in 0..self.spec.num_support {
            let state = theta.state_at(&self.spec, n)?;
            let (r, j) =
                state_obstacle_residual(&self.world, &self.model, &self.params, state.as_slice())?;
            h.rows_mut(n * s, s).copy_from(&r);
            blocks.push(j);
        }
        Ok((h, ObstacleJacobian { blocks }))
    }

    /// `½ hᵀΣ⁻¹h` for an already evaluated residual.
    pub fn cost_of_residual(&self, h: &DVector<f64>) -> f64 {
        0.5 * self.residual_weight() * h.norm_squared()
    }

    pub fn combined_cost(&self, theta: &SupportTrajectory) -> Result<f64> {
        let (h, _) = self.evaluate_residual(theta)?;
        Ok(self.cost_of_residual(&h))
    }

    /// `∇C̃ = JᵀΣ⁻¹h`.
    pub fn cost_gradient(&self, theta: &SupportTrajectory) -> Result<DVector<f64>> {
        let (h, j) = self.evaluate_residual(theta)?;
        Ok(j.tr_mul(&h) * self.residual_weight())
    }

    /// `-K⁻¹(θ-μ) - (1/λ) JᵀΣ⁻¹h`.
    pub fn log_posterior_grad(
        &self,
        prior: &GpPrior,
        lambda: f64,
        theta: &SupportTrajectory,
    ) -> Result<DVector<f64>> {
        let (h, j) = self.evaluate_residual(theta)?;
        let prior_grad = -prior.precision_residual(theta)?;
        Ok(self.posterior_grad_from(prior_grad, &h, &j, lambda))
    }

    fn posterior_grad_from(
        &self,
        prior_grad: DVector<f64>,
        h: &DVector<f64>,
        j: &ObstacleJacobian,
        lambda: f64,
    ) -> DVector<f64> {
        let likelihood = j.tr_mul(h) * self.residual_weight();
        prior_grad - likelihood / lambda
    }

    /// `K⁻¹ + (1/λ) JᵀΣ⁻¹J`. Obstacle factors are unary, so the likelihood
    /// term only touches diagonal blocks.
    pub fn gauss_newton_hessian(
        &self,
        prior: &GpPrior,
        lambda: f64,
        theta: &SupportTrajectory,
    ) -> Result<BlockTridiag> {
        let (_, j) = self.evaluate_residual(theta)?;
        Ok(self.hessian_from(prior, &j, lambda))
    }

    fn hessian_from(&self, prior: &GpPrior, j: &ObstacleJacobian, lambda: f64) -> BlockTridiag {
        let mut hess = prior.precision().clone();
        let w = self.residual_weight() / lambda;
        for (n, block) in j.blocks.iter().enumerate() {
            if block.iter().any(|v| *v != 0.0) {
                *hess.diag_mut(n) += block.tr_mul(block) * w;
            }
        }
        hess
    }

    /// Evaluates every per-particle quantity from a single residual pass.
    pub fn workspace(
        &self,
        prior: &GpPrior,
        lambda: f64,
        theta: &SupportTrajectory,
    ) -> Result<ParticleWorkspace> {
        let (h, j) = self.evaluate_residual(theta)?;
        let (log_prior, prior_grad) = prior.log_prior_and_grad(theta)?;
        let grad = self.posterior_grad_from(prior_grad, &h, &j, lambda);
        let hessian = self.hessian_from(prior, &j, lambda);
        let cost = self.cost_of_residual(&h);
        Ok(ParticleWorkspace {
            residual: h,
            jacobian: j,
            grad,
            hessian,
            cost,
            log_prior,
        })
    }
}
