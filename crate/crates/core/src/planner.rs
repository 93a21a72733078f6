//! The particle planning loop.
//!
//! Each iteration runs two parallel phases separated by serial barriers:
//!
//! 1. per particle: residuals, Jacobians, log-posterior gradient, Hessian;
//! 2. (serial) metric from the current Hessians, then kernel bandwidth;
//! 3. all-pairs kernel values, Stein direction per particle;
//! 4. per particle: solve against the shared metric factor and update.
//!
//! Reductions always run in particle-index order, so results do not depend
//! on the worker count.

use std::time::Instant;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::environment::{ObstacleParams, RobotModel, World2D};
use crate::error::{Error, Result};
use crate::factor_graph::{FactorGraph, ParticleWorkspace};
use crate::prior::{GpPrior, PriorSpec};
use crate::svgd::{
    build_metric, evaluate_kernels, median_bandwidth, preconditioned_step, svgd_direction,
};
use crate::trajectory::{
    straight_line_init, BandwidthMode, ParticleSet, PlannerConfig, StateSpec, SupportTrajectory,
};
use crate::value::{report, IterationReport};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitMode {
    /// Draw particles from the GP prior.
    PriorSample,
    /// Straight line from start to goal with i.i.d. Gaussian noise of the
    /// given scale on every interior support state.
    StraightLine { jitter: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanRequest {
    pub state: StateSpec,
    pub prior: PriorSpec,
    /// Start state `x₀ = [q | q̇]`.
    pub start: Vec<f64>,
    pub world: World2D,
    pub robot: RobotModel,
    pub obstacle: ObstacleParams,
    pub planner: PlannerConfig,
    pub num_particles: usize,
    pub init: InitMode,
    /// Worker threads; 0 lets the runtime decide. Never affects results.
    pub threads: usize,
}

impl PlanRequest {
    pub fn validate(&self) -> Result<()> {
        self.state.validate()?;
        self.prior.validate(&self.state)?;
        self.obstacle.validate()?;
        self.robot.validate()?;
        self.planner.validate()?;
        if self.num_particles < 1 {
            return Err(Error::InvalidSpec("need at least one particle".into()));
        }
        if let InitMode::StraightLine { jitter } = self.init {
            if !(jitter >= 0.0 && jitter.is_finite()) {
                return Err(Error::InvalidSpec("init jitter must be >= 0".into()));
            }
        }
        Ok(())
    }

    pub fn build_prior(&self) -> Result<GpPrior> {
        GpPrior::build(&self.state, &self.prior, &self.start)
    }

    pub fn build_factor_graph(&self) -> Result<FactorGraph> {
        FactorGraph::new(
            self.world.clone(),
            self.robot.clone(),
            self.obstacle,
            self.state,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIters,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIters => "max_iters",
        }
    }
}

#[derive(Clone, Debug)]
pub struct PlanResult {
    pub particles: ParticleSet,
    /// One report for the initial particles, then one per iteration.
    pub reports: Vec<IterationReport>,
    pub termination: Termination,
    pub wall_clock_secs: f64,
}

impl PlanResult {
    pub fn final_report(&self) -> &IterationReport {
        self.reports
            .last()
            .expect("at least the initial report exists")
    }
}

pub fn initial_particles(req: &PlanRequest, prior: &GpPrior) -> Result<ParticleSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(req.planner.seed);
    match req.init {
        InitMode::PriorSample => prior.sample(&mut rng, req.num_particles),
        InitMode::StraightLine { jitter } => {
            let line = straight_line_init(&req.state, &req.start, &req.prior.goal_pos)?;
            let sd = req.state.state_dim();
            let interior = sd..req.state.last() * sd;
            let particles = (0..req.num_particles)
                .map(|_| {
                    let mut v = line.values().clone();
                    for i in interior.clone() {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        v[i] += jitter * z;
                    }
                    SupportTrajectory::new(&req.state, v)
                })
                .collect::<Result<Vec<_>>>()?;
            ParticleSet::new(&req.state, particles)
        }
    }
}

fn evaluate_all(
    fg: &FactorGraph,
    prior: &GpPrior,
    lambda: f64,
    particles: &ParticleSet,
) -> Result<Vec<ParticleWorkspace>> {
    particles
        .particles
        .par_iter()
        .map(|p| fg.workspace(prior, lambda, p))
        .collect()
}

fn summarize(
    iter: usize,
    ws: &[ParticleWorkspace],
    lambda: f64,
    update: f64,
) -> Result<IterationReport> {
    let costs: Vec<f64> = ws.iter().map(|w| w.cost).collect();
    let log_priors: Vec<f64> = ws.iter().map(|w| w.log_prior).collect();
    report(iter, &costs, &log_priors, lambda, update)
}

/// State of the loop between iterations; exposed so tests and tools can
/// drive the planner step by step.
pub struct Planner {
    pub prior: GpPrior,
    pub graph: FactorGraph,
    pub config: PlannerConfig,
    pub particles: ParticleSet,
    workspaces: Vec<ParticleWorkspace>,
}

impl Planner {
    pub fn new(req: &PlanRequest) -> Result<Self> {
        req.validate()?;
        let prior = req.build_prior()?;
        let graph = req.build_factor_graph()?;
        let particles = initial_particles(req, &prior)?;
        Self::with_particles(prior, graph, req.planner.clone(), particles)
    }

    pub fn with_particles(
        prior: GpPrior,
        graph: FactorGraph,
        config: PlannerConfig,
        particles: ParticleSet,
    ) -> Result<Self> {
        let workspaces = evaluate_all(&graph, &prior, config.lambda, &particles)?;
        Ok(Self {
            prior,
            graph,
            config,
            particles,
            workspaces,
        })
    }

    pub fn workspaces(&self) -> &[ParticleWorkspace] {
        &self.workspaces
    }

    pub fn report(&self, iter: usize, mean_update_norm: f64) -> Result<IterationReport> {
        summarize(iter, &self.workspaces, self.config.lambda, mean_update_norm)
    }

    /// One full update of every particle. Returns the per-particle update
    /// norms `‖δθⁱ‖`.
    pub fn step(&mut self) -> Result<Vec<f64>> {
        let hessians: Vec<_> = self.workspaces.iter().map(|w| w.hessian.clone()).collect();
        let metric = build_metric(&hessians)?;
        let bandwidth = match self.config.bandwidth {
            BandwidthMode::Fixed(h) => h,
            BandwidthMode::Median => median_bandwidth(&metric, &self.particles),
        };
        let kernels = evaluate_kernels(&metric, bandwidth, &self.particles);
        let grads: Vec<DVector<f64>> = self.workspaces.iter().map(|w| w.grad.clone()).collect();
        let phi = svgd_direction(&kernels, &grads)?;
        let norms = preconditioned_step(&metric, &phi, self.config.step_size, &mut self.particles)?;
        self.workspaces = evaluate_all(
            &self.graph,
            &self.prior,
            self.config.lambda,
            &self.particles,
        )?;
        Ok(norms)
    }

    fn run(mut self) -> Result<(ParticleSet, Vec<IterationReport>, Termination)> {
        let mut reports = vec![self.report(0, 0.0)?];
        let mut termination = Termination::MaxIters;
        for iter in 1..=self.config.max_iters {
            let norms = self.step().map_err(|e| e.at_iteration(iter))?;
            let mean = norms.iter().sum::<f64>() / norms.len() as f64;
            reports.push(self.report(iter, mean).map_err(|e| e.at_iteration(iter))?);
            if mean < self.config.update_tol {
                termination = Termination::Converged;
                break;
            }
        }
        Ok((self.particles, reports, termination))
    }
}

pub fn plan(req: &PlanRequest) -> Result<PlanResult> {
    let started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(req.threads)
        .build()
        .map_err(|e| Error::InvalidSpec(format!("thread pool: {e}")))?;
    let (particles, reports, termination) =
        pool.install(|| Planner::new(req).map_err(|e| e.at_iteration(0))?.run())?;
    Ok(PlanResult {
        particles,
        reports,
        termination,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    })
}
