//! 2D workspaces, robot models and the per-state obstacle residual.

use nalgebra::{DMatrix, DVector, Matrix2xX, Vector2};

use crate::error::{Error, Result};

/// Distance reported for a world with no obstacles.
pub const FAR_DISTANCE: f64 = 1.0e9;

#[derive(Clone, Debug, PartialEq)]
pub enum Obstacle {
    Circle {
        center: Vector2<f64>,
        radius: f64,
    },
    /// Axis-aligned box given by its min and max corners.
    Box {
        min: Vector2<f64>,
        max: Vector2<f64>,
    },
}

impl Obstacle {
    pub fn circle(cx: f64, cy: f64, radius: f64) -> Self {
        Obstacle::Circle {
            center: Vector2::new(cx, cy),
            radius,
        }
    }

    pub fn aabb(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Obstacle::Box {
            min: Vector2::new(x0, y0),
            max: Vector2::new(x1, y1),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Obstacle::Circle { center, radius } => {
                if !(*radius > 0.0 && radius.is_finite()) || center.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidSpec("circle radius must be > 0".into()));
                }
            }
            Obstacle::Box { min, max } => {
                if !(min.x < max.x && min.y < max.y) {
                    return Err(Error::InvalidSpec(
                        "box min must be < max on each axis".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Signed distance and outward unit gradient.
    pub fn signed_distance(&self, p: &Vector2<f64>) -> (f64, Vector2<f64>) {
        match self {
            Obstacle::Circle { center, radius } => {
                let v = p - center;
                let n = v.norm();
                let grad = if n > 0.0 { v / n } else { Vector2::x() };
                (n - radius, grad)
            }
            Obstacle::Box { min, max } => {
                let c = (min + max) * 0.5;
                let half = (max - min) * 0.5;
                let local = p - c;
                let sign = local.map(|v| if v < 0.0 { -1.0 } else { 1.0 });
                let q = local.abs() - half;
                if q.x > 0.0 || q.y > 0.0 {
                    let outside = q.map(|v| v.max(0.0));
                    let d = outside.norm();
                    (d, outside.component_mul(&sign) / d)
                } else if q.x >= q.y {
                    (q.x, Vector2::new(sign.x, 0.0))
                } else {
                    (q.y, Vector2::new(0.0, sign.y))
                }
            }
        }
    }

    pub fn translated(&self, offset: &Vector2<f64>) -> Self {
        match self {
            Obstacle::Circle { center, radius } => Obstacle::Circle {
                center: center + offset,
                radius: *radius,
            },
            Obstacle::Box { min, max } => Obstacle::Box {
                min: min + offset,
                max: max + offset,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct World2D {
    pub obstacles: Vec<Obstacle>,
    /// Workspace rectangle `[x0, y0, x1, y1]`. Informational only.
    pub bounds: [f64; 4],
}

impl World2D {
    pub fn new(obstacles: Vec<Obstacle>, bounds: [f64; 4]) -> Result<Self> {
        for o in &obstacles {
            o.validate()?;
        }
        if !(bounds[0] < bounds[2] && bounds[1] < bounds[3]) {
            return Err(Error::InvalidSpec(
                "world bounds must have min < max".into(),
            ));
        }
        Ok(Self { obstacles, bounds })
    }

    pub fn empty(bounds: [f64; 4]) -> Self {
        Self {
            obstacles: Vec::new(),
            bounds,
        }
    }

    /// Distance to the nearest obstacle surface (negative inside) and the
    /// outward unit gradient. Ties go to the lowest obstacle index.
    pub fn signed_distance(&self, p: &Vector2<f64>) -> (f64, Vector2<f64>) {
        let mut best = (FAR_DISTANCE, Vector2::zeros());
        for o in &self.obstacles {
            let (d, g) = o.signed_distance(p);
            if d < best.0 {
                best = (d, g);
            }
        }
        best
    }

    pub fn translated(&self, offset: &Vector2<f64>) -> Self {
        Self {
            obstacles: self
                .obstacles
                .iter()
                .map(|o| o.translated(offset))
                .collect(),
            bounds: [
                self.bounds[0] + offset.x,
                self.bounds[1] + offset.y,
                self.bounds[2] + offset.x,
                self.bounds[3] + offset.y,
            ],
        }
    }
}

/// Hinge penalty `max(eps - d, 0)` and its derivative in `d`. The
/// subgradient at `d == eps` is 0.
pub fn hinge_cost(d: f64, eps: f64) -> (f64, f64) {
    if d < eps {
        (eps - d, -1.0)
    } else {
        (0.0, 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RobotKind {
    /// A disc in the plane; configuration is its (x, y) center.
    Point,
    /// Revolute chain rooted at the origin with relative joint angles.
    PlanarArm,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollisionSphere {
    /// Link the sphere is attached to. Ignored for point robots.
    pub link: usize,
    /// Distance from the link's proximal joint along the link.
    pub offset: f64,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RobotModel {
    pub kind: RobotKind,
    pub link_lengths: Vec<f64>,
    pub collision_spheres: Vec<CollisionSphere>,
}

/// A collision sphere center in the workspace and its position Jacobian.
#[derive(Clone, Debug, PartialEq)]
pub struct SpherePose {
    pub center: Vector2<f64>,
    pub jacobian: Matrix2xX<f64>,
    pub radius: f64,
}

impl RobotModel {
    pub fn point(radius: f64) -> Self {
        Self {
            kind: RobotKind::Point,
            link_lengths: Vec::new(),
            collision_spheres: vec![CollisionSphere {
                link: 0,
                offset: 0.0,
                radius,
            }],
        }
    }

    /// Arm with `spheres_per_link` evenly spaced spheres on each link, the
    /// last one sitting on the link's distal end.
    pub fn planar_arm(link_lengths: Vec<f64>, spheres_per_link: usize, radius: f64) -> Self {
        let collision_spheres = link_lengths
            .iter()
            .enumerate()
            .flat_map(|(link, &len)| {
                (1..=spheres_per_link).map(move |k| CollisionSphere {
                    link,
                    offset: len * k as f64 / spheres_per_link as f64,
                    radius,
                })
            })
            .collect();
        Self {
            kind: RobotKind::PlanarArm,
            link_lengths,
            collision_spheres,
        }
    }

    pub fn dof(&self) -> usize {
        match self.kind {
            RobotKind::Point => 2,
            RobotKind::PlanarArm => self.link_lengths.len(),
        }
    }

    pub fn num_spheres(&self) -> usize {
        self.collision_spheres.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.collision_spheres.is_empty() {
            return Err(Error::InvalidSpec(
                "robot needs at least one collision sphere".into(),
            ));
        }
        if self.collision_spheres.iter().any(|s| !(s.radius > 0.0)) {
            return Err(Error::InvalidSpec("sphere radii must be > 0".into()));
        }
        if self.kind == RobotKind::PlanarArm {
            if self.link_lengths.is_empty() || self.link_lengths.iter().any(|l| !(*l > 0.0)) {
                return Err(Error::InvalidSpec("arm link lengths must be > 0".into()));
            }
            if let Some(s) = self
                .collision_spheres
                .iter()
                .find(|s| s.link >= self.link_lengths.len())
            {
                return Err(Error::InvalidSpec(format!(
                    "sphere attached to missing link {}",
                    s.link
                )));
            }
        }
        Ok(())
    }

    pub fn forward_kinematics(&self, q: &[f64]) -> Result<Vec<SpherePose>> {
        let dof = self.dof();
        if q.len() != dof {
            return Err(Error::Dimension {
                what: "configuration",
                expected: dof,
                got: q.len(),
            });
        }
        match self.kind {
            RobotKind::Point => {
                let center = Vector2::new(q[0], q[1]);
                Ok(self
                    .collision_spheres
                    .iter()
                    .map(|s| SpherePose {
                        center,
                        jacobian: Matrix2xX::identity(2),
                        radius: s.radius,
                    })
                    .collect())
            }
            RobotKind::PlanarArm => {
                // joints[k] is the position of joint k; heading[k] the absolute
                // angle of link k.
                let mut joints = Vec::with_capacity(dof + 1);
                let mut heading = Vec::with_capacity(dof);
                let mut p = Vector2::zeros();
                let mut phi = 0.0;
                joints.push(p);
                for (k, len) in self.link_lengths.iter().enumerate() {
                    phi += q[k];
                    heading.push(phi);
                    p += Vector2::new(phi.cos(), phi.sin()) * *len;
                    joints.push(p);
                }
                Ok(self
                    .collision_spheres
                    .iter()
                    .map(|s| {
                        let phi = heading[s.link];
                        let center = joints[s.link] + Vector2::new(phi.cos(), phi.sin()) * s.offset;
                        let mut jacobian = Matrix2xX::zeros(dof);
                        for i in 0..=s.link {
                            let r = center - joints[i];
                            jacobian[(0, i)] = -r.y;
                            jacobian[(1, i)] = r.x;
                        }
                        SpherePose {
                            center,
                            jacobian,
                            radius: s.radius,
                        }
                    })
                    .collect())
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObstacleParams {
    /// Safety margin; spheres closer than this to an obstacle are penalized.
    pub eps: f64,
    /// Standard deviation of each obstacle residual.
    pub sigma_obs: f64,
}

impl ObstacleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidSpec("eps must be finite and >= 0".into()));
        }
        if !(self.sigma_obs > 0.0 && self.sigma_obs.is_finite()) {
            return Err(Error::InvalidSpec(
                "sigma_obs must be finite and > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Obstacle residuals for one support state `[q | q̇]`, one per collision
/// sphere, and their Jacobian with respect to the full state. Velocity
/// columns are always zero.
pub fn state_obstacle_residual(
    world: &World2D,
    model: &RobotModel,
    params: &ObstacleParams,
    state: &[f64],
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let dof = model.dof();
    if state.len() != 2 * dof {
        return Err(Error::Dimension {
            what: "state",
            expected: 2 * dof,
            got: state.len(),
        });
    }
    let spheres = model.forward_kinematics(&state[..dof])?;
    let mut residual = DVector::zeros(spheres.len());
    let mut jacobian = DMatrix::zeros(spheres.len(), 2 * dof);
    for (k, sphere) in spheres.iter().enumerate() {
        let (d, grad) = world.signed_distance(&sphere.center);
        let (cost, dcost) = hinge_cost(d - sphere.radius, params.eps);
        residual[k] = cost;
        if dcost != 0.0 {
            let row = grad.transpose() * &sphere.jacobian * dcost;
            jacobian.view_mut((k, 0), (1, dof)).copy_from(&row);
        }
    }
    Ok((residual, jacobian))
}
