//! The `bwalk` command line.
//!
//! Settings are resolved per key: a flag on the command line wins over the
//! `--config` file, which wins over the built-in default. The resolved values
//! are echoed at the top of every artifact.

mod commands;
mod settings;

use std::ffi::OsString;
use std::io::Write;

use clap::{Args, CommandFactory, Parser, Subcommand};

pub use settings::{CliError, Settings};

#[derive(Parser, Debug)]
#[command(name = "bwalk", version, about = "Experiments with the biased random walk on Z^d")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug)]
pub struct GlobalArgs {
    /// Dimension d >= 1
    #[arg(long, global = true, value_name = "D")]
    pub dim: Option<String>,
    /// Backtracking weight, 0 <= lambda < 1
    #[arg(long, global = true, value_name = "LAMBDA")]
    pub lambda: Option<String>,
    /// Seed for Monte Carlo commands
    #[arg(long, global = true, value_name = "SEED")]
    pub seed: Option<String>,
    /// Write the artifact here instead of standard output
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<String>,
    /// Artifact format: csv or json
    #[arg(long, global = true, value_name = "FORMAT")]
    pub format: Option<String>,
    /// File of key=value lines; flags override it
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<String>,
}

#[derive(Args, Debug)]
pub struct McArgs {
    /// Steps per path
    #[arg(long)]
    pub steps: Option<String>,
    /// Number of independent paths
    #[arg(long)]
    pub paths: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Monte Carlo summary of the reflected chain
    Simulate {
        #[command(flatten)]
        mc: McArgs,
        /// Starting state "a,b,..." (nonnegative)
        #[arg(long)]
        start: Option<String>,
        /// Also write the trajectory of path 0 to this CSV file
        #[arg(long, value_name = "PATH")]
        dump_trajectories: Option<String>,
    },
    /// Estimate of the speed against (1 - lambda) / (d (1 + lambda))
    Speed {
        #[command(flatten)]
        mc: McArgs,
    },
    /// Covariance of (|X_n| - n v) / sqrt(n) against Sigma
    Clt {
        #[command(flatten)]
        mc: McArgs,
    },
    /// Mean and variance of the martingale increments
    Martingale {
        #[command(flatten)]
        mc: McArgs,
    },
    /// Histogram of the number of visits to the coordinate hyperplanes
    Boundary {
        #[command(flatten)]
        mc: McArgs,
    },
    /// Exact log moment generating function against ln psi
    Mgf {
        /// Tilt "s1,...,sd"
        #[arg(long)]
        s: Option<String>,
        /// Horizons "n1,n2,..."
        #[arg(long)]
        n_list: Option<String>,
        /// Starting state "a,b,..." (nonnegative)
        #[arg(long)]
        start: Option<String>,
    },
    /// Exact return probabilities P_0(X_2n = 0)
    ReturnProb {
        /// Largest n
        #[arg(long)]
        n_max: Option<String>,
    },
    /// Ballot path counts P and Q
    Ballot {
        #[arg(long)]
        n: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<String>,
    },
    /// Exhaustive check of the comparison with the drifted walk
    Dominate {
        /// upper or lower
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        n_max: Option<String>,
        /// Start for the lower comparison, every coordinate >= 1
        #[arg(long)]
        start: Option<String>,
    },
    /// Rate function at a point or on a grid over [0, 1]^d
    RateFn {
        /// Point "x1,...,xd"
        #[arg(long, allow_hyphen_values = true)]
        x: Option<String>,
        /// Grid steps per axis
        #[arg(long)]
        grid: Option<String>,
    },
    /// Deviation between M M^T and Sigma
    MatrixCheck,
    /// Rate functional of a piecewise-linear path
    PathRate {
        /// JSON file: [{"t": 0, "phi": [..]}, ...]
        #[arg(long)]
        path: Option<String>,
    },
    /// Exact tail rates of |X_n^1| / n >= a against the rate function
    LdpConsistency {
        #[arg(long, allow_hyphen_values = true)]
        a: Option<String>,
        #[arg(long)]
        n_list: Option<String>,
    },
    /// Exact law of the reflected chain after n steps
    Propagate {
        #[arg(long)]
        steps: Option<String>,
        #[arg(long)]
        start: Option<String>,
    },
}

/// Runs the command line and returns the process exit code: 0 on success,
/// 1 for argument or domain errors, 2 for numerical or resource failures.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    let result = Settings::from_matches(&matches).and_then(|s| commands::execute(&s, stdout));
    match result {
        Ok(summary) => {
            let _ = writeln!(summary.sink(stdout, stderr), "{}", summary.line);
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
