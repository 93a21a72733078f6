//! Trajectory parameterization shared by every other module.
//!
//! A trajectory is a stack of `num_support` kinematic support states, each
//! laid out as `[positions | velocities]`, stored state-major in one flat
//! vector. That ordering lines up with the block structure of the prior
//! precision and of the Gauss-Newton Hessian.

use nalgebra::{DVector, DVectorView};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateSpec {
    pub dof: usize,
    /// Number of support states, `N + 1`.
    pub num_support: usize,
    /// Seconds between consecutive support states.
    pub dt: f64,
}

impl StateSpec {
    pub fn new(dof: usize, num_support: usize, dt: f64) -> Result<Self> {
        let spec = Self {
            dof,
            num_support,
            dt,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dof < 1 {
            return Err(Error::InvalidSpec("dof must be >= 1".into()));
        }
        if self.num_support < 2 {
            return Err(Error::InvalidSpec("num_support must be >= 2".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidSpec("dt must be finite and > 0".into()));
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        2 * self.dof
    }

    /// Length of the flat trajectory vector.
    pub fn dim(&self) -> usize {
        self.num_support * self.state_dim()
    }

    /// Index of the last support state, `N`.
    pub fn last(&self) -> usize {
        self.num_support - 1
    }
}

/// One particle: the flat vector of support states.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportTrajectory {
    values: DVector<f64>,
}

impl SupportTrajectory {
    pub fn new(spec: &StateSpec, values: DVector<f64>) -> Result<Self> {
        if values.len() != spec.dim() {
            return Err(Error::Dimension {
                what: "support trajectory",
                expected: spec.dim(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("support trajectory"));
        }
        Ok(Self { values })
    }

    /// Wraps a vector without validation. Callers guarantee the length.
    pub(crate) fn from_raw(values: DVector<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut DVector<f64> {
        &mut self.values
    }

    pub fn into_values(self) -> DVector<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The `n`-th support state `[q | q̇]`.
    pub fn state_at(&self, spec: &StateSpec, n: usize) -> Result<DVectorView<'_, f64>> {
        if n >= spec.num_support {
            return Err(Error::IndexOutOfRange {
                index: n,
                num_support: spec.num_support,
            });
        }
        let sd = spec.state_dim();
        Ok(self.values.rows(n * sd, sd))
    }

    pub fn position_at(&self, spec: &StateSpec, n: usize) -> Result<DVectorView<'_, f64>> {
        let sd = spec.state_dim();
        self.state_at(spec, n)?;
        Ok(self.values.rows(n * sd, spec.dof))
    }

    pub fn velocity_at(&self, spec: &StateSpec, n: usize) -> Result<DVectorView<'_, f64>> {
        let sd = spec.state_dim();
        self.state_at(spec, n)?;
        Ok(self.values.rows(n * sd + spec.dof, spec.dof))
    }
}

/// Positions linearly interpolated from `start` to `goal_pos`, velocities set
/// to the constant secant velocity `(goal - start) / (N dt)`.
pub fn straight_line_init(
    spec: &StateSpec,
    start: &[f64],
    goal_pos: &[f64],
) -> Result<SupportTrajectory> {
    spec.validate()?;
    if start.len() != spec.state_dim() {
        return Err(Error::Dimension {
            what: "start state",
            expected: spec.state_dim(),
            got: start.len(),
        });
    }
    if goal_pos.len() != spec.dof {
        return Err(Error::Dimension {
            what: "goal position",
            expected: spec.dof,
            got: goal_pos.len(),
        });
    }
    let last = spec.last() as f64;
    let duration = last * spec.dt;
    let sd = spec.state_dim();
    let mut values = DVector::zeros(spec.dim());
    for n in 0..spec.num_support {
        let s = n as f64 / last;
        for d in 0..spec.dof {
            let delta = goal_pos[d] - start[d];
            values[n * sd + d] = start[d] + s * delta;
            values[n * sd + spec.dof + d] = delta / duration;
        }
    }
    SupportTrajectory::new(spec, values)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParticleSet {
    pub particles: Vec<SupportTrajectory>,
    pub generation: usize,
}

impl ParticleSet {
    pub fn new(spec: &StateSpec, particles: Vec<SupportTrajectory>) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::InvalidSpec("particle set must be nonempty".into()));
        }
        if let Some(bad) = particles.iter().find(|p| p.len() != spec.dim()) {
            return Err(Error::Dimension {
                what: "particle",
                expected: spec.dim(),
                got: bad.len(),
            });
        }
        Ok(Self {
            particles,
            generation: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BandwidthMode {
    Fixed(f64),
    Median,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlannerConfig {
    /// Temperature of the optimality likelihood `exp(-C/λ)`.
    pub lambda: f64,
    pub step_size: f64,
    pub max_iters: usize,
    /// Stop once the mean particle update norm falls below this.
    pub update_tol: f64,
    pub bandwidth: BandwidthMode,
    pub seed: u64,
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidSpec("lambda must be finite and > 0".into()));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidSpec(
                "step_size must be finite and > 0".into(),
            ));
        }
        if self.max_iters < 1 {
            return Err(Error::InvalidSpec("max_iters must be >= 1".into()));
        }
        if !(self.update_tol >= 0.0) {
            return Err(Error::InvalidSpec("update_tol must be >= 0".into()));
        }
        if let BandwidthMode::Fixed(h) = self.bandwidth {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidSpec("fixed bandwidth must be > 0".into()));
            }
        }
        Ok(())
    }
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            step_size: 1.0,
            max_iters: 100,
            update_tol: 1e-6,
            bandwidth: BandwidthMode::Median,
            seed: 0,
        }
    }
}
