//! Plain-text planner configuration.
//!
//! The format is sectioned `key = value` text. `#` starts a comment. Lists
//! are comma separated. `circle`, `box` and `sphere` may repeat; every other
//! key may appear once. Unknown sections and keys are errors.
//!
//! ```text
//! [state]
//! dof = 2              # configuration dimensions
//! num_support = 16     # support states, N + 1
//! dt = 0.5             # seconds between support states
//!
//! [prior]
//! start = 0, 0, 0, 0   # start state [q | q̇]
//! goal = 10, 0         # goal position
//! q_c = 1.0            # acceleration noise power-spectral density
//! sigma_start = 1e-3   # start pin std dev
//! sigma_goal = 1e-2    # goal pin std dev
//!
//! [world]
//! bounds = -2, -6, 12, 6   # x0, y0, x1, y1 (length units)
//! circle = 5, 0, 1.5       # cx, cy, r
//! box = 1, 2, 2, 3         # x0, y0, x1, y1
//!
//! [robot]
//! kind = point         # point | arm
//! radius = 0.2         # point robot radius
//! links = 1, 1         # arm link lengths
//! sphere = 1, 0.5, 0.1 # arm collision sphere: link, offset, radius
//!
//! [obstacle]
//! eps = 0.2            # safety margin (length units)
//! sigma_obs = 0.1      # obstacle residual std dev
//!
//! [planner]
//! lambda = 1.0         # temperature
//! step_size = 1.0
//! max_iters = 100
//! update_tol = 1e-6    # stop when mean update norm drops below
//! bandwidth = median   # median | <positive number>
//! seed = 0
//! particles = 8
//! init = prior         # prior | straight_line
//! jitter = 0.0         # straight_line noise scale
//! threads = 0          # 0 = all cores
//! ```

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use crate::environment::{
    CollisionSphere, Obstacle, ObstacleParams, RobotKind, RobotModel, World2D,
};
use crate::planner::{InitMode, PlanRequest};
use crate::prior::PriorSpec;
use crate::trajectory::{BandwidthMode, PlannerConfig, StateSpec};

/// A configuration problem. `line` is 1-based; 0 means the problem is not
/// tied to a single line (missing key, unreadable file, cross-key check).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: {}", self.line, self.message)
        } else {
            f.write_str(&self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        line,
        message: message.into(),
    })
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("state", &["dof", "num_support", "dt"]),
    (
        "prior",
        &["start", "goal", "q_c", "sigma_start", "sigma_goal"],
    ),
    ("world", &["bounds", "circle", "box"]),
    ("robot", &["kind", "radius", "links", "sphere"]),
    ("obstacle", &["eps", "sigma_obs"]),
    (
        "planner",
        &[
            "lambda",
            "step_size",
            "max_iters",
            "update_tol",
            "bandwidth",
            "seed",
            "particles",
            "init",
            "jitter",
            "threads",
        ],
    ),
];

const REPEATABLE: &[&str] = &["circle", "box", "sphere"];

#[derive(Debug)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Default)]
struct Document {
    /// (section, key) -> entries in file order.
    entries: BTreeMap<(String, String), Vec<Entry>>,
}

impl Document {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut doc = Document::default();
        let mut section: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    return err(line, "malformed section header");
                };
                let name = name.trim();
                if !SECTIONS.iter().any(|(s, _)| *s == name) {
                    return err(line, format!("unknown section [{name}]"));
                }
                section = Some(name.to_string());
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return err(line, "expected `key = value`");
            };
            let Some(sec) = section.clone() else {
                return err(line, "key outside of any section");
            };
            let key = key.trim();
            let allowed = SECTIONS
                .iter()
                .find(|(s, _)| *s == sec)
                .map(|(_, k)| *k)
                .unwrap_or(&[]);
            if !allowed.contains(&key) {
                return err(line, format!("unknown key `{key}` in [{sec}]"));
            }
            let slot = doc
                .entries
                .entry((sec.clone(), key.to_string()))
                .or_default();
            if !slot.is_empty() && !REPEATABLE.contains(&key) {
                return err(line, format!("duplicate key `{key}` in [{sec}]"));
            }
            slot.push(Entry {
                value: value.trim().to_string(),
                line,
            });
        }
        Ok(doc)
    }

    fn all(&self, section: &str, key: &str) -> &[Entry] {
        self.entries
            .get(&(section.to_string(), key.to_string()))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.all(section, key).first()
    }

    fn required(&self, section: &str, key: &str) -> Result<&Entry, ConfigError> {
        self.get(section, key).ok_or_else(|| ConfigError {
            line: 0,
            message: format!("missing key `{key}` in [{section}]"),
        })
    }

    fn scalar<T: FromStr>(
        &self,
        section: &str,
        key: &str,
        default: Option<T>,
    ) -> Result<T, ConfigError> {
        match (self.get(section, key), default) {
            (Some(e), _) => parse_scalar(e),
            (None, Some(d)) => Ok(d),
            (None, None) => parse_scalar(self.required(section, key)?),
        }
    }
}

fn parse_scalar<T: FromStr>(e: &Entry) -> Result<T, ConfigError> {
    e.value
        .parse()
        .or_else(|_| err(e.line, format!("cannot parse `{}`", e.value)))
}

fn parse_list(e: &Entry, len: Option<usize>) -> Result<Vec<f64>, ConfigError> {
    let values = e
        .value
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .or_else(|_| err(e.line, format!("cannot parse number list `{}`", e.value)))?;
    if let Some(n) = len {
        if values.len() != n {
            return err(e.line, format!("expected {n} values, got {}", values.len()));
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return err(e.line, "values must be finite");
    }
    Ok(values)
}

/// Runs a domain validation and pins any failure to `line`.
fn check(line: usize, r: crate::Result<()>) -> Result<(), ConfigError> {
    r.or_else(|e| err(line, e.to_string()))
}

pub fn parse_config(text: &str) -> Result<PlanRequest, ConfigError> {
    let doc = Document::parse(text)?;

    let dof_entry = doc.required("state", "dof")?;
    let state = StateSpec {
        dof: parse_scalar(dof_entry)?,
        num_support: doc.scalar("state", "num_support", None)?,
        dt: doc.scalar("state", "dt", None)?,
    };
    check(dof_entry.line, state.validate())?;

    let start_entry = doc.required("prior", "start")?;
    let start = parse_list(start_entry, Some(state.state_dim()))?;
    let goal_entry = doc.required("prior", "goal")?;
    let defaults = PriorSpec::default();
    let prior = PriorSpec {
        q_c: doc.scalar("prior", "q_c", Some(defaults.q_c))?,
        sigma_start: doc.scalar("prior", "sigma_start", Some(defaults.sigma_start))?,
        sigma_goal: doc.scalar("prior", "sigma_goal", Some(defaults.sigma_goal))?,
        goal_pos: parse_list(goal_entry, Some(state.dof))?,
    };
    check(goal_entry.line, prior.validate(&state))?;

    let bounds = match doc.get("world", "bounds") {
        Some(e) => {
            let b = parse_list(e, Some(4))?;
            [b[0], b[1], b[2], b[3]]
        }
        None => [-10.0, -10.0, 10.0, 10.0],
    };
    let mut obstacles = Vec::new();
    // Keep file order across the two obstacle kinds: it decides SDF ties.
    let mut tagged: Vec<(&Entry, bool)> = doc
        .all("world", "circle")
        .iter()
        .map(|e| (e, true))
        .chain(doc.all("world", "box").iter().map(|e| (e, false)))
        .collect();
    tagged.sort_by_key(|(e, _)| e.line);
    for (e, is_circle) in tagged {
        let o = if is_circle {
            let v = parse_list(e, Some(3))?;
            Obstacle::circle(v[0], v[1], v[2])
        } else {
            let v = parse_list(e, Some(4))?;
            Obstacle::aabb(v[0], v[1], v[2], v[3])
        };
        check(
            e.line,
            World2D::new(vec![o.clone()], [0.0, 0.0, 1.0, 1.0]).map(|_| ()),
        )?;
        obstacles.push(o);
    }
    let world = World2D::new(obstacles, bounds).or_else(|e| err(0, e.to_string()))?;

    let kind = match doc.get("robot", "kind") {
        None => RobotKind::Point,
        Some(e) => match e.value.as_str() {
            "point" => RobotKind::Point,
            "arm" => RobotKind::PlanarArm,
            other => return err(e.line, format!("unknown robot kind `{other}`")),
        },
    };
    let robot = match kind {
        RobotKind::Point => {
            if let Some(e) = doc.get("robot", "links").or(doc.get("robot", "sphere")) {
                return err(e.line, "point robots take only `radius`");
            }
            let radius = doc.scalar("robot", "radius", Some(0.1))?;
            RobotModel::point(radius)
        }
        RobotKind::PlanarArm => {
            if let Some(e) = doc.get("robot", "radius") {
                return err(e.line, "arms take `sphere` entries, not `radius`");
            }
            let links = parse_list(doc.required("robot", "links")?, None)?;
            let spheres = doc
                .all("robot", "sphere")
                .iter()
                .map(|e| {
                    let v = parse_list(e, Some(3))?;
                    if v[0] < 0.0 || v[0].fract() != 0.0 {
                        return err(e.line, "sphere link index must be a nonnegative integer");
                    }
                    Ok(CollisionSphere {
                        link: v[0] as usize,
                        offset: v[1],
                        radius: v[2],
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            RobotModel {
                kind,
                link_lengths: links,
                collision_spheres: spheres,
            }
        }
    };
    check(0, robot.validate())?;
    if robot.dof() != state.dof {
        return err(
            dof_entry.line,
            format!(
                "robot has {} dof but [state] dof = {}",
                robot.dof(),
                state.dof
            ),
        );
    }

    let obstacle = ObstacleParams {
        eps: doc.scalar("obstacle", "eps", Some(0.1))?,
        sigma_obs: doc.scalar("obstacle", "sigma_obs", Some(0.1))?,
    };
    check(0, obstacle.validate())?;

    let pd = PlannerConfig::default();
    let bandwidth = match doc.get("planner", "bandwidth") {
        None => pd.bandwidth,
        Some(e) if e.value == "median" => BandwidthMode::Median,
        Some(e) => BandwidthMode::Fixed(parse_scalar(e)?),
    };
    let planner = PlannerConfig {
        lambda: doc.scalar("planner", "lambda", Some(pd.lambda))?,
        step_size: doc.scalar("planner", "step_size", Some(pd.step_size))?,
        max_iters: doc.scalar("planner", "max_iters", Some(pd.max_iters))?,
        update_tol: doc.scalar("planner", "update_tol", Some(pd.update_tol))?,
        bandwidth,
        seed: doc.scalar("planner", "seed", Some(pd.seed))?,
    };
    check(0, planner.validate())?;

    let jitter: f64 = doc.scalar("planner", "jitter", Some(0.0))?;
    let init = match doc.get("planner", "init") {
        None => InitMode::PriorSample,
        Some(e) => match e.value.as_str() {
            "prior" => InitMode::PriorSample,
            "straight_line" => InitMode::StraightLine { jitter },
            other => return err(e.line, format!("unknown init mode `{other}`")),
        },
    };

    let req = PlanRequest {
        state,
        prior,
        start,
        world,
        robot,
        obstacle,
        planner,
        num_particles: doc.scalar("planner", "particles", Some(8))?,
        init,
        threads: doc.scalar("planner", "threads", Some(0))?,
    };
    check(0, req.validate())?;
    Ok(req)
}

pub fn load_config(path: &Path) -> Result<PlanRequest, ConfigError> {
    let text =
        std::fs::read_to_string(path).or_else(|e| err(0, format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Renders a request in the configuration format. Parsing the output gives
/// back an equal request.
pub fn render_config(req: &PlanRequest) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "[state]");
    let _ = writeln!(s, "dof = {}", req.state.dof);
    let _ = writeln!(s, "num_support = {}", req.state.num_support);
    let _ = writeln!(s, "dt = {}", req.state.dt);
    let _ = writeln!(s, "\n[prior]");
    let _ = writeln!(s, "start = {}", join(&req.start));
    let _ = writeln!(s, "goal = {}", join(&req.prior.goal_pos));
    let _ = writeln!(s, "q_c = {}", req.prior.q_c);
    let _ = writeln!(s, "sigma_start = {}", req.prior.sigma_start);
    let _ = writeln!(s, "sigma_goal = {}", req.prior.sigma_goal);
    let _ = writeln!(s, "\n[world]");
    let _ = writeln!(s, "bounds = {}", join(&req.world.bounds));
    for o in &req.world.obstacles {
        match o {
            Obstacle::Circle { center, radius } => {
                let _ = writeln!(s, "circle = {}", join(&[center.x, center.y, *radius]));
            }
            Obstacle::Box { min, max } => {
                let _ = writeln!(s, "box = {}", join(&[min.x, min.y, max.x, max.y]));
            }
        }
    }
    let _ = writeln!(s, "\n[robot]");
    match req.robot.kind {
        RobotKind::Point => {
            let _ = writeln!(s, "kind = point");
            let _ = writeln!(s, "radius = {}", req.robot.collision_spheres[0].radius);
        }
        RobotKind::PlanarArm => {
            let _ = writeln!(s, "kind = arm");
            let _ = writeln!(s, "links = {}", join(&req.robot.link_lengths));
            for sp in &req.robot.collision_spheres {
                let _ = writeln!(s, "sphere = {}, {}, {}", sp.link, sp.offset, sp.radius);
            }
        }
    }
    let _ = writeln!(s, "\n[obstacle]");
    let _ = writeln!(s, "eps = {}", req.obstacle.eps);
    let _ = writeln!(s, "sigma_obs = {}", req.obstacle.sigma_obs);
    let p = &req.planner;
    let _ = writeln!(s, "\n[planner]");
    let _ = writeln!(s, "lambda = {}", p.lambda);
    let _ = writeln!(s, "step_size = {}", p.step_size);
    let _ = writeln!(s, "max_iters = {}", p.max_iters);
    let _ = writeln!(s, "update_tol = {}", p.update_tol);
    match p.bandwidth {
        BandwidthMode::Median => {
            let _ = writeln!(s, "bandwidth = median");
        }
        BandwidthMode::Fixed(h) => {
            let _ = writeln!(s, "bandwidth = {h}");
        }
    }
    let _ = writeln!(s, "seed = {}", p.seed);
    let _ = writeln!(s, "particles = {}", req.num_particles);
    match req.init {
        InitMode::PriorSample => {
            let _ = writeln!(s, "init = prior");
        }
        InitMode::StraightLine { jitter } => {
            let _ = writeln!(s, "init = straight_line");
            let _ = writeln!(s, "jitter = {jitter}");
        }
    }
    let _ = writeln!(s, "threads = {}", req.threads);
    s
}
