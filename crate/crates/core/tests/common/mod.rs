//! Scenarios and dense reference implementations shared by integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use steinplan::config::load_config;
use steinplan::environment::{Obstacle, ObstacleParams, RobotModel, World2D};
use steinplan::planner::{InitMode, PlanRequest};
use steinplan::prior::PriorSpec;
use steinplan::trajectory::{BandwidthMode, PlannerConfig, StateSpec, SupportTrajectory};

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
}

pub fn shipped(name: &str) -> PlanRequest {
    load_config(&scenario_path(name)).expect("shipped scenario parses")
}

pub const ONE_CIRCLE_CENTER: [f64; 2] = [5.0, 0.5];

/// Point robot from (0,0) to (10,0) with a single circle blocking the
/// straight line. The centre sits slightly above the line: with an exactly
/// centred circle the straight path is a saddle of the posterior and a single
/// Gauss-Newton particle started near it amplifies rounding differences by
/// roughly 100x per iteration.
pub fn one_circle(seed: u64, num_particles: usize) -> PlanRequest {
    let state = StateSpec::new(2, 16, 0.5).unwrap();
    let secant = 10.0 / (state.last() as f64 * state.dt);
    PlanRequest {
        state,
        prior: PriorSpec {
            q_c: 1.0,
            sigma_start: 1e-3,
            sigma_goal: 1e-2,
            goal_pos: vec![10.0, 0.0],
        },
        start: vec![0.0, 0.0, secant, 0.0],
        world: World2D::new(
            vec![Obstacle::circle(
                ONE_CIRCLE_CENTER[0],
                ONE_CIRCLE_CENTER[1],
                1.5,
            )],
            [-2.0, -6.0, 12.0, 6.0],
        )
        .unwrap(),
        robot: RobotModel::point(0.2),
        obstacle: ObstacleParams {
            eps: 0.2,
            sigma_obs: 0.1,
        },
        planner: PlannerConfig {
            lambda: 1.0,
            step_size: 1.0,
            max_iters: 300,
            update_tol: 1e-6,
            bandwidth: BandwidthMode::Median,
            seed,
        },
        num_particles,
        init: InitMode::PriorSample,
        threads: 0,
    }
}

/// Dense prior precision and mean assembled directly from the
/// constant-velocity SDE, inverting `Q` numerically.
pub fn dense_prior(req: &PlanRequest) -> (DMatrix<f64>, DVector<f64>) {
    let spec = &req.state;
    let d = spec.dof;
    let sd = 2 * d;
    let dim = spec.dim();
    let dt = spec.dt;
    let qc = req.prior.q_c;

    let mut phi = DMatrix::<f64>::identity(sd, sd);
    let mut q = DMatrix::<f64>::zeros(sd, sd);
    for k in 0..d {
        phi[(k, d + k)] = dt;
        q[(k, k)] = qc * dt.powi(3) / 3.0;
        q[(k, d + k)] = qc * dt.powi(2) / 2.0;
        q[(d + k, k)] = qc * dt.powi(2) / 2.0;
        q[(d + k, d + k)] = qc * dt;
    }
    let q_inv = q.try_inverse().expect("Q invertible");

    let mut kinv = DMatrix::<f64>::zeros(dim, dim);
    let mut info = DVector::<f64>::zeros(dim);
    for n in 0..spec.last() {
        // Residual x_{n+1} - Φ x_n as a linear map of the whole vector.
        let mut a = DMatrix::<f64>::zeros(sd, dim);
        a.view_mut((0, n * sd), (sd, sd)).copy_from(&(-&phi));
        a.view_mut((0, (n + 1) * sd), (sd, sd)).fill_with_identity();
        kinv += a.transpose() * &q_inv * a;
    }
    let ws = req.prior.sigma_start.powi(-2);
    for i in 0..sd {
        kinv[(i, i)] += ws;
        info[i] += ws * req.start[i];
    }
    let wg = req.prior.sigma_goal.powi(-2);
    let base = spec.last() * sd;
    for k in 0..d {
        kinv[(base + k, base + k)] += wg;
        info[base + k] += wg * req.prior.goal_pos[k];
    }
    let mu = kinv
        .clone()
        .cholesky()
        .expect("prior precision PD")
        .solve(&info);
    (kinv, mu)
}

pub fn positions(spec: &StateSpec, theta: &SupportTrajectory) -> Vec<[f64; 2]> {
    (0..spec.num_support)
        .map(|n| {
            let q = theta.position_at(spec, n).unwrap();
            [q[0], q[1]]
        })
        .collect()
}

/// Total angle swept around `c` along the waypoint polyline.
pub fn swept_angle(path: &[[f64; 2]], c: [f64; 2]) -> f64 {
    let angles: Vec<f64> = path
        .iter()
        .map(|p| (p[1] - c[1]).atan2(p[0] - c[0]))
        .collect();
    angles
        .windows(2)
        .map(|w| {
            let mut d = w[1] - w[0];
            while d > PI {
                d -= 2.0 * PI;
            }
            while d <= -PI {
                d += 2.0 * PI;
            }
            d
        })
        .sum()
}

/// Shoelace area between the path and the straight chord back to its start.
pub fn signed_area(path: &[[f64; 2]]) -> f64 {
    let n = path.len();
    (0..n)
        .map(|i| {
            let (a, b) = (path[i], path[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        * 0.5
}

/// Smallest clearance between any waypoint (inflated by the robot radius)
/// and the circles `(cx, cy, r)`.
pub fn min_clearance(path: &[[f64; 2]], circles: &[(f64, f64, f64)], robot_radius: f64) -> f64 {
    path.iter()
        .flat_map(|p| {
            circles
                .iter()
                .map(move |(cx, cy, r)| (p[0] - cx).hypot(p[1] - cy) - r - robot_radius)
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn circles_of(world: &World2D) -> Vec<(f64, f64, f64)> {
    world
        .obstacles
        .iter()
        .filter_map(|o| match o {
            Obstacle::Circle { center, radius } => Some((center.x, center.y, *radius)),
            _ => None,
        })
        .collect()
}
