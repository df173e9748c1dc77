//! Command-line front end: argument parsing, configuration merging and the
//! per-subcommand pipelines. The binary is a thin wrapper over [`main_with`].

pub mod config;
pub mod output;
pub mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{Flags, ModeFlags};

#[derive(Debug, Parser)]
#[command(name = "orbitforge", version, about = "Zero-energy connecting and periodic orbits of planar mechanical systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract the positive domain and its boundary components.
    Chart(Common),
    /// Minimize the Jacobi length and classify the orbit.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Half orbit from the origin to the boundary.
        #[arg(long)]
        symmetric: bool,
        /// Connecting orbit from this boundary component.
        #[arg(long)]
        source: Option<usize>,
    },
    /// Classify orbits over a list of energy shifts.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated alpha values, or `auto`.
        #[arg(long, allow_hyphen_values = true)]
        alphas: Option<String>,
    },
    /// Shortest grid path in the Jacobi metric (an upper bound).
    Oracle {
        #[command(flatten)]
        common: Common,
        /// `origin` or a component id (default `origin`).
        #[arg(long)]
        source: Option<String>,
        /// `origin` or a component id.
        #[arg(long)]
        target: Option<String>,
    },
    /// List the built-in potentials.
    Potentials,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Built-in potential name (see `potentials`).
    #[arg(long)]
    pub builtin: Option<String>,
    /// Potential as an expression in x1, x2 and named parameters.
    #[arg(long, allow_hyphen_values = true)]
    pub expr: Option<String>,
    /// Parameter value, repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,
    /// Shorthand for `--param lambda=VALUE`.
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    /// Shorthand for `--param k=VALUE`.
    #[arg(long, allow_hyphen_values = true)]
    pub k: Option<f64>,
    /// Energy shift: the domain is U + alpha > 0.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Window as xmin,xmax,ymin,ymax.
    #[arg(long, allow_hyphen_values = true)]
    pub bbox: Option<String>,
    /// Grid cells, `N` or `NXxNY`.
    #[arg(long)]
    pub grid: Option<String>,
    /// Path nodes for the solver.
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Seed for the multistart offsets.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (all formats unless some are named).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub svg: bool,
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub csv: bool,
    /// JSON config file; flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl From<&Common> for Flags {
    fn from(c: &Common) -> Flags {
        Flags {
            builtin: c.builtin.clone(),
            expr: c.expr.clone(),
            params: c.params.clone(),
            lambda: c.lambda,
            k: c.k,
            alpha: c.alpha,
            bbox: c.bbox.clone(),
            grid: c.grid.clone(),
            nodes: c.nodes,
            seed: c.seed,
            out: c.out.clone(),
            svg: c.svg,
            json: c.json,
            csv: c.csv,
            config: c.config.clone(),
        }
    }
}

fn potentials_list() -> String {
    let mut s = String::new();
    for name in orbitforge::potential::BUILTIN_NAMES {
        s.push_str(&format!("{name}: {}\n", orbitforge::Builtin::describe(name).unwrap_or("")));
    }
    s
}

/// Sets the worker count from `ORBITFORGE_THREADS`, if present.
pub fn init_threads() -> anyhow::Result<()> {
    let Ok(v) = std::env::var("ORBITFORGE_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| anyhow::anyhow!("ORBITFORGE_THREADS must be a positive integer, got '{v}'"))?;
    if n == 0 {
        anyhow::bail!("ORBITFORGE_THREADS must be a positive integer, got 0");
    }
    // a pool that already exists (tests, embedding) is kept
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses `args`, runs the command, prints the summary and returns the
/// exit status: 0 success, 1 configuration error, 2 solver failure or
/// non-convergence.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("configuration error: {e}");
        return 1;
    }
    let (common, mode) = match &cli.command {
        Command::Potentials => {
            print!("{}", potentials_list());
            return 0;
        }
        Command::Chart(c) => (c, ModeFlags::Chart),
        Command::Solve { common, symmetric, source } => (common, ModeFlags::Solve { symmetric: *symmetric, source: *source }),
        Command::Sweep { common, alphas } => (common, ModeFlags::Sweep { alphas: alphas.clone() }),
        Command::Oracle { common, source, target } => (common, ModeFlags::Oracle { source: source.clone(), target: target.clone() }),
    };
    let cfg = match config::resolve(&Flags::from(common), &mode) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e:#}");
            return 1;
        }
    };
    match run::run(&cfg) {
        Ok(out) => {
            print!("{}", out.summary);
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            if out.exit_code == 2 {
                eprintln!("solver did not converge");
            }
            out.exit_code
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
