//! CSV and metadata export of a planning run.
//!
//! Floats are written with 17 significant digits so files are byte-stable
//! and parse back to the same `f64`.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use crate::config::render_config;
use crate::planner::{PlanRequest, PlanResult};

pub const TRACE_HEADER: &str = "iter,v_hat,expected_cost,cost_variance,mean_update_norm";

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn trace_csv(result: &PlanResult) -> String {
    let mut s = String::from(TRACE_HEADER);
    s.push('\n');
    for r in &result.reports {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.iter,
            fmt_f64(r.v_hat),
            fmt_f64(r.expected_cost),
            fmt_f64(r.cost_variance),
            fmt_f64(r.mean_update_norm)
        );
    }
    s
}

pub fn particle_csv(req: &PlanRequest, result: &PlanResult, index: usize) -> String {
    let spec = &req.state;
    let mut header = vec!["t".to_string()];
    header.extend((0..spec.dof).map(|d| format!("q{d}")));
    header.extend((0..spec.dof).map(|d| format!("v{d}")));
    let mut s = header.join(",");
    s.push('\n');
    let p = &result.particles.particles[index];
    for n in 0..spec.num_support {
        let state = p.state_at(spec, n).expect("index within num_support");
        let mut row = vec![fmt_f64(n as f64 * spec.dt)];
        row.extend(state.iter().map(|v| fmt_f64(*v)));
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn weights_csv(result: &PlanResult) -> String {
    let mut s = String::from("particle,weight\n");
    for (i, w) in result.final_report().weights.iter().enumerate() {
        let _ = writeln!(s, "{i},{}", fmt_f64(*w));
    }
    s
}

pub fn meta_txt(req: &PlanRequest, result: &PlanResult) -> String {
    let mut s = render_config(req);
    let _ = writeln!(s, "\n[result]");
    let _ = writeln!(s, "termination = {}", result.termination.as_str());
    let _ = writeln!(s, "iterations = {}", result.reports.len() - 1);
    s
}

/// Writes `trace.csv`, `particle_<i>.csv`, `weights.csv` and `meta.txt`.
pub fn write_outputs(dir: &Path, req: &PlanRequest, result: &PlanResult) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("trace.csv"), trace_csv(result))?;
    for i in 0..result.particles.len() {
        fs::write(
            dir.join(format!("particle_{i}.csv")),
            particle_csv(req, result, i),
        )?;
    }
    fs::write(dir.join("weights.csv"), weights_csv(result))?;
    fs::write(dir.join("meta.txt"), meta_txt(req, result))?;
    Ok(())
}
