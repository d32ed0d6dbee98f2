//! Argument parsing and dispatch.

use std::ffi::OsString;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::{self, Output};
use crate::config::{RunConfig, Settings};
use crate::error::{CliError, CliResult};
use crate::exec::Pool;

#[derive(Debug, Parser)]
#[command(name = "qlyap", version = crate::csv::VERSION, about = "Conditioned Lyapunov exponents of killed diffusions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Principal eigenpair, QSD, QED and conditioned exponent of a 1D model.
    Spectral(Opts),
    /// Spectral exponent over a range of one parameter.
    Sweep(Opts),
    /// Monte Carlo conditional estimate: `lambda` or `expectation`.
    Estimate {
        kind: String,
        #[command(flatten)]
        opts: Opts,
    },
    /// Statistical probe: survival, qsd, qed, convergence, correlation, sync, bounds or spectrum.
    Probe {
        kind: String,
        #[command(flatten)]
        opts: Opts,
    },
    /// Single-path trace of position, tangent direction and log-growth.
    Trace(Opts),
}

macro_rules! options {
    ($( $(#[$doc:meta])* $field:ident => $key:literal ),* $(,)?) => {
        /// Options shared by every subcommand; each is also a config-file key.
        #[derive(Debug, Clone, Default, Args)]
        pub struct Opts {
            /// Flat key=value file; flags override its values.
            #[arg(long)]
            pub config: Option<String>,
            /// Compare the Monte Carlo estimate with the spectral value.
            #[arg(long = "check-spectral")]
            pub check_spectral: bool,
            $( $(#[$doc])* #[arg(long = $key, allow_hyphen_values = true)] pub $field: Option<String>, )*
        }

        impl Opts {
            fn flag_settings(&self) -> Settings {
                let mut s = Settings::new();
                $( if let Some(v) = &self.$field { s.set($key, v.clone()); } )*
                if self.check_spectral {
                    s.set("check-spectral", "true");
                }
                s
            }
        }
    };
}

options! {
    /// Zoo model: brownian, ou, pitchfork, quintic, septic, ring2d, linear2d.
    model => "model",
    /// Noise amplitude.
    sigma => "sigma",
    /// a:b, box:lo1,lo2:hi1,hi2, ball:r or ball:c1,c2:r.
    domain => "domain",
    /// Interior grid points of spectral solves.
    n => "n",
    /// Time step.
    dt => "dt",
    /// Horizon.
    t => "t",
    /// Number of paths, particles or pairs.
    particles => "N",
    seed => "seed",
    /// rejection, fv or auto.
    mode => "mode",
    /// bridge or segment.
    killing => "killing",
    /// Fleming-Viot islands.
    islands => "islands",
    /// Initial point, comma-separated.
    x0 => "x0",
    /// Initial tangent direction, comma-separated.
    v0 => "v0",
    /// Initial separation of synchronization pairs.
    sep => "sep",
    /// Comma-separated horizons.
    t_grid => "t-grid",
    eps => "eps",
    /// Pass/fail tolerance of a probe.
    tol => "tol",
    /// Allowed fraction of non-synchronizing pairs.
    rho => "rho",
    /// Histogram bins.
    bins => "bins",
    q => "q",
    r => "r",
    /// Observable: one, x, x1.., r, fprime, lambda_plus, lambda_minus.
    h => "h",
    h1 => "h1",
    h2 => "h2",
    /// Reference exponent for multi-dimensional probes.
    lambda => "lambda",
    /// Initial points for the spectrum probe, separated by ';'.
    x0s => "x0s",
    /// Tangent directions for the spectrum probe (2D).
    directions => "directions",
    /// Path stream used by trace.
    path_id => "path-id",
    /// Swept parameter.
    param => "param",
    /// lo:hi:step or a comma-separated list.
    values => "values",
    /// CSV output path.
    out => "out",
    /// SVG output path (sweep).
    svg => "svg",
    alpha => "alpha",
    c => "c",
    kappa => "kappa",
    radius => "radius",
    a => "a",
    b => "b",
    omega => "omega",
}

impl Opts {
    pub fn to_config(&self) -> CliResult<RunConfig> {
        let mut s = match &self.config {
            Some(path) => Settings::read(path)?,
            None => Settings::new(),
        };
        s.merge(&self.flag_settings());
        RunConfig::from_settings(&s)
    }
}

fn write_outputs(cfg: &RunConfig, out: &Output) -> CliResult<()> {
    if let (Some(path), Some(table)) = (&cfg.out, &out.table) {
        table.write(path)?;
    }
    if let (Some(path), Some(svg)) = (&cfg.svg, &out.svg) {
        std::fs::write(path, svg).map_err(|source| CliError::Io { path: path.clone(), source })?;
    }
    Ok(())
}

pub fn execute(command: &Command) -> CliResult<Vec<String>> {
    let (cfg, result) = match command {
        Command::Spectral(o) => {
            let cfg = o.to_config()?;
            let r = commands::spectral_cmd(&cfg);
            (cfg, r)
        }
        Command::Sweep(o) => {
            let cfg = o.to_config()?;
            let r = commands::sweep_cmd(&cfg, &Pool::from_env()?);
            (cfg, r)
        }
        Command::Estimate { kind, opts } => {
            let cfg = opts.to_config()?;
            let r = commands::estimate_cmd(kind, &cfg, &Pool::from_env()?);
            (cfg, r)
        }
        Command::Probe { kind, opts } => {
            let cfg = opts.to_config()?;
            let r = commands::probe_cmd(kind, &cfg, &Pool::from_env()?);
            (cfg, r)
        }
        Command::Trace(o) => {
            let cfg = o.to_config()?;
            let r = commands::trace_cmd(&cfg);
            (cfg, r)
        }
    };
    let mut out = result?;
    write_outputs(&cfg, &out)?;
    match out.deferred.take() {
        Some(e) => {
            for l in &out.lines {
                println!("{l}");
            }
            Err(e)
        }
        None => Ok(out.lines),
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match execute(&cli.command) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("qlyap: {e}");
            e.exit_code()
        }
    }
}
