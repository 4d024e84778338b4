//! `mot`: exact martingale transport computations from the command line.
//!
//! Results go to stdout as JSON (or CSV with `--csv`). Exit status is 0 on
//! success, 2 when the mathematics says no (an order violation, a failed
//! verification) and 1 for unreadable or malformed input.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "mot", version, about = "Exact multiperiod martingale optimal transport")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Emit a flat CSV table instead of JSON (columns listed per command).
    #[arg(long, global = true)]
    pub csv: bool,
    /// Add decimal renderings next to exact rationals.
    #[arg(long, global = true)]
    pub approx: bool,
    /// Write the result to this file instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Also write a JSON manifest describing this run.
    #[arg(long, global = true, value_name = "PATH")]
    pub manifest: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeArg {
    Exact,
    Float,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyArg {
    /// Recursive left-curtain couplings within each atom's increments.
    LeftCurtain,
    /// First basic feasible coupling found by the simplex method.
    Lp,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check convex order along a chain of measures.
    ///
    /// Inputs are measure files in order, or one file holding {"marginals": [...]}.
    /// CSV columns: measure,x,potential (breakpoints of each potential function).
    CheckOrder {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Irreducible decomposition of each consecutive pair of marginals.
    ///
    /// CSV columns: step,component,left,right,left_closed,right_closed,mass.
    /// Component 0 is the diagonal part with its closed ranges.
    Decompose {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Shadow of a measure (or of one atom) in a target measure.
    ///
    /// CSV columns: part,x,weight with part "shadow" or "residual".
    Shadow {
        #[command(flatten)]
        source: SourceArgs,
        /// Target measure file.
        #[arg(long)]
        target: PathBuf,
    },
    /// Shadow pushed through a chain of intermediate measures.
    ///
    /// CSV columns: x,weight.
    ObstructedShadow {
        #[command(flatten)]
        source: SourceArgs,
        /// Chain measures in order (or one marginals file).
        #[arg(long, required = true, num_args = 1..)]
        chain: Vec<PathBuf>,
    },
    /// Construct the left-monotone transport and verify it.
    ///
    /// CSV columns: x0,...,xn,weight.
    LeftMonotone {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "left-curtain")]
        policy: PolicyArg,
        /// Refuse constructions with more support paths than this.
        #[arg(long, default_value_t = mot_core::coupling::DEFAULT_PATH_CAP)]
        cap: usize,
    },
    /// Solve the primal and dual transport problem for a reward.
    ///
    /// Rewards: sums of products of constants, x(t), call(t, b), put(t, b),
    /// abs(t, b), indicator(t=K, <=a) and tanh_sm(t) (float mode only).
    /// CSV columns: x0,...,xn,weight (the optimizer).
    Solve {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        reward: String,
        #[arg(long, value_enum, default_value = "exact")]
        mode: ModeArg,
    },
    /// Check whether a coupling's support is left-monotone and nondegenerate.
    ///
    /// CSV columns: check,holds.
    VerifySupport {
        /// Coupling JSON file.
        coupling: PathBuf,
        /// Marginals to check the coupling against, if any.
        #[arg(long, num_args = 1..)]
        marginals: Vec<PathBuf>,
    },
    /// Classify paths as polar or inside the effective domain.
    ///
    /// CSV columns: path,polar,reason.
    Polar {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// A path as comma-separated rationals; repeatable.
        #[arg(long = "path", value_name = "X0,X1,...")]
        paths: Vec<String>,
        /// Coupling JSON whose support paths are classified.
        #[arg(long)]
        paths_file: Option<PathBuf>,
        /// Only pin the first and last marginal, with this many steps.
        #[arg(long, value_name = "N")]
        free: Option<usize>,
    },
    /// Transport problem with only the first and last marginal pinned.
    ///
    /// CSV columns: x0,...,xn,weight (the optimizer).
    Free {
        #[arg(long)]
        mu0: PathBuf,
        #[arg(long)]
        mun: PathBuf,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        reward: String,
        #[arg(long, value_enum, default_value = "exact")]
        mode: ModeArg,
        /// Intermediate grid as comma-separated rationals.
        #[arg(long)]
        grid: Option<String>,
    },
    /// Run the built-in worked examples.
    ///
    /// CSV columns: example,check,passed.
    Examples {
        #[arg(long, conflicts_with = "all", required_unless_present = "all")]
        name: Option<String>,
        #[arg(long)]
        all: bool,
    },
    /// Seeded random verification suite (duality, construction, optimality).
    ///
    /// CSV columns: run,steps,value,dual_objective,ok.
    Suite {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = true)]
pub struct SourceArgs {
    /// Source measure file.
    #[arg(long, conflicts_with_all = ["mass", "at"])]
    pub source: Option<PathBuf>,
    /// Mass of a single source atom.
    #[arg(long, requires = "at", allow_hyphen_values = true)]
    pub mass: Option<String>,
    /// Location of a single source atom.
    #[arg(long, requires = "mass", allow_hyphen_values = true)]
    pub at: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(status) => ExitCode::from(status),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
