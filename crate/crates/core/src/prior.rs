//! Discrete Gaussian trajectory prior `p(θ) = N(μ, K)`.
//!
//! The precision `K⁻¹` is assembled from three kinds of factors: a
//! constant-velocity (white-noise-on-acceleration) GP factor between each
//! pair of adjacent support states, a unary pin on the full start state, and
//! a unary pin on the goal position. Every factor touches at most two
//! adjacent states, so `K⁻¹` is block-tridiagonal and its Cholesky factor is
//! block-bidiagonal. The mean is the minimizer of the summed factor costs.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{BlockCholesky, BlockTridiag};
use crate::trajectory::{ParticleSet, StateSpec, SupportTrajectory};

#[derive(Clone, Debug, PartialEq)]
pub struct PriorSpec {
    /// Power-spectral density of the acceleration noise.
    pub q_c: f64,
    /// Standard deviation of the start-state pin.
    pub sigma_start: f64,
    /// Standard deviation of the goal-position pin.
    pub sigma_goal: f64,
    pub goal_pos: Vec<f64>,
}

impl PriorSpec {
    pub fn validate(&self, spec: &StateSpec) -> Result<()> {
        for (name, v) in [
            ("q_c", self.q_c),
            ("sigma_start", self.sigma_start),
            ("sigma_goal", self.sigma_goal),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidSpec(format!("{name} must be finite and > 0")));
            }
        }
        if self.goal_pos.len() != spec.dof {
            return Err(Error::Dimension {
                what: "goal position",
                expected: spec.dof,
                got: self.goal_pos.len(),
            });
        }
        Ok(())
    }
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self {
            q_c: 1.0,
            sigma_start: 1e-3,
            sigma_goal: 1e-2,
            goal_pos: Vec::new(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GpPrior {
    spec: StateSpec,
    mu: DVector<f64>,
    precision: BlockTridiag,
    cholesky: BlockCholesky,
    /// `-½ log det(2πK)`.
    log_norm_const: f64,
}

/// Constant-velocity transition `Φ = [[I, dt I], [0, I]]`.
pub fn transition(dof: usize, dt: f64) -> DMatrix<f64> {
    let mut phi = DMatrix::identity(2 * dof, 2 * dof);
    for d in 0..dof {
        phi[(d, dof + d)] = dt;
    }
    phi
}

/// Inverse of the process-noise covariance
/// `Q = q_c [[dt³/3, dt²/2], [dt²/2, dt]] ⊗ I`.
pub fn process_noise_inverse(dof: usize, dt: f64, q_c: f64) -> DMatrix<f64> {
    let mut qi = DMatrix::zeros(2 * dof, 2 * dof);
    let (pp, pv, vv) = (12.0 / dt.powi(3), -6.0 / dt.powi(2), 4.0 / dt);
    for d in 0..dof {
        qi[(d, d)] = pp / q_c;
        qi[(d, dof + d)] = pv / q_c;
        qi[(dof + d, d)] = pv / q_c;
        qi[(dof + d, dof + d)] = vv / q_c;
    }
    qi
}

/// Precision contribution `AᵀQ⁻¹A` of one GP factor over `[θ_n; θ_{n+1}]`,
/// where `A = [-Φ, I]` so that `A [θ_n; θ_{n+1}] = θ_{n+1} - Φ θ_n`.
pub fn gp_factor_precision(dof: usize, dt: f64, q_c: f64) -> DMatrix<f64> {
    let sd = 2 * dof;
    let mut a = DMatrix::zeros(sd, 2 * sd);
    a.view_mut((0, 0), (sd, sd))
        .copy_from(&(-transition(dof, dt)));
    a.view_mut((0, sd), (sd, sd)).fill_with_identity();
    a.transpose() * process_noise_inverse(dof, dt, q_c) * a
}

impl GpPrior {
    pub fn build(spec: &StateSpec, prior_spec: &PriorSpec, start: &[f64]) -> Result<Self> {
        spec.validate()?;
        prior_spec.validate(spec)?;
        let sd = spec.state_dim();
        if start.len() != sd {
            return Err(Error::Dimension {
                what: "start state",
                expected: sd,
                got: start.len(),
            });
        }
        if start
            .iter()
            .chain(&prior_spec.goal_pos)
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("start or goal"));
        }

        let mut precision = BlockTridiag::zeros(spec.num_support, sd);
        let gp = gp_factor_precision(spec.dof, spec.dt, prior_spec.q_c);
        for n in 0..spec.last() {
            precision.add_pair(n, &gp);
        }

        // Pins contribute to both the precision and the information vector.
        let mut info = DVector::zeros(spec.dim());
        let w_start = prior_spec.sigma_start.powi(-2);
        for i in 0..sd {
            precision.diag_mut(0)[(i, i)] += w_start;
            info[i] += w_start * start[i];
        }
        let w_goal = prior_spec.sigma_goal.powi(-2);
        let last = spec.last();
        for d in 0..spec.dof {
            precision.diag_mut(last)[(d, d)] += w_goal;
            info[last * sd + d] += w_goal * prior_spec.goal_pos[d];
        }

        let cholesky = precision.cholesky()?;
        let mu = cholesky.solve(&info);
        let dim = spec.dim() as f64;
        let log_norm_const =
            -0.5 * dim * (2.0 * std::f64::consts::PI).ln() + 0.5 * cholesky.log_det();
        if !log_norm_const.is_finite() {
            return Err(Error::NonFinite("prior normalization constant"));
        }
        Ok(Self {
            spec: *spec,
            mu,
            precision,
            cholesky,
            log_norm_const,
        })
    }

    pub fn spec(&self) -> &StateSpec {
        &self.spec
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn mean_trajectory(&self) -> SupportTrajectory {
        SupportTrajectory::from_raw(self.mu.clone())
    }

    pub fn precision(&self) -> &BlockTridiag {
        &self.precision
    }

    pub fn cholesky(&self) -> &BlockCholesky {
        &self.cholesky
    }

    pub fn log_norm_const(&self) -> f64 {
        self.log_norm_const
    }

    /// `K⁻¹(θ - μ)`.
    pub fn precision_residual(&self, theta: &SupportTrajectory) -> Result<DVector<f64>> {
        self.check(theta)?;
        Ok(self.precision.mul_vec(&(theta.values() - &self.mu)))
    }

    /// Returns `log p(θ)` and its gradient `-K⁻¹(θ - μ)`.
    pub fn log_prior_and_grad(&self, theta: &SupportTrajectory) -> Result<(f64, DVector<f64>)> {
        self.check(theta)?;
        let r = theta.values() - &self.mu;
        let pr = self.precision.mul_vec(&r);
        let logp = self.log_norm_const - 0.5 * r.dot(&pr);
        Ok((logp, -pr))
    }

    pub fn log_prior(&self, theta: &SupportTrajectory) -> Result<f64> {
        self.log_prior_and_grad(theta).map(|(l, _)| l)
    }

    fn check(&self, theta: &SupportTrajectory) -> Result<()> {
        if theta.len() != self.spec.dim() {
            return Err(Error::Dimension {
                what: "trajectory vs prior",
                expected: self.spec.dim(),
                got: theta.len(),
            });
        }
        if theta.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("trajectory"));
        }
        Ok(())
    }

    /// Draws `count` samples `μ + L⁻ᵀz` with `K⁻¹ = LLᵀ`, pulling each entry
    /// of `z` from `noise`.
    pub fn sample_with(&self, count: usize, mut noise: impl FnMut() -> f64) -> Result<ParticleSet> {
        if count < 1 {
            return Err(Error::InvalidSpec("sample count must be >= 1".into()));
        }
        let particles = (0..count)
            .map(|_| {
                let z = DVector::from_fn(self.spec.dim(), |_, _| noise());
                let x = &self.mu + self.cholesky.solve_upper(&z);
                SupportTrajectory::new(&self.spec, x)
            })
            .collect::<Result<Vec<_>>>()?;
        ParticleSet::new(&self.spec, particles)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Result<ParticleSet> {
        self.sample_with(count, || rng.sample(StandardNormal))
    }
}
