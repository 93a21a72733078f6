//! Command-line front end.
//!
//! Exit codes: 0 success, 1 output I/O failure, 2 bad arguments or
//! configuration, 3 numerical failure while planning.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::load_config;
use crate::output::write_outputs;
use crate::planner::plan;

#[derive(Parser, Debug)]
#[command(
    name = "steinplan",
    version,
    about = "Stein variational GP trajectory planner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the planner on a configuration file.
    Plan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        particles: Option<usize>,
        #[arg(long = "max-iters")]
        max_iters: Option<usize>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    let Command::Plan {
        config,
        out,
        seed,
        particles,
        max_iters,
        threads,
    } = cli.command;

    let mut req = match load_config(&config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {}: {e}", config.display());
            return EXIT_CONFIG;
        }
    };
    if let Some(s) = seed {
        req.planner.seed = s;
    }
    if let Some(n) = particles {
        req.num_particles = n;
    }
    if let Some(n) = max_iters {
        req.planner.max_iters = n;
    }
    if let Some(n) = threads {
        req.threads = n;
    }
    if let Err(e) = req.validate() {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }

    let result = match plan(&req) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: planning aborted: {e}");
            return EXIT_NUMERICAL;
        }
    };
    if let Err(e) = write_outputs(&out, &req, &result) {
        eprintln!("error: writing {}: {e}", out.display());
        return EXIT_IO;
    }
    let last = result.final_report();
    eprintln!(
        "{} after {} iterations in {:.3}s: V = {:.6e}, E[C] = {:.6e}",
        result.termination.as_str(),
        result.reports.len() - 1,
        result.wall_clock_secs,
        last.v_hat,
        last.expected_cost
    );
    0
}
