mod commands;
mod config;
mod data;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hnls_core::experiments::ScalingMode;

use config::{BreakdownMode, RunConfig};

/// Pseudospectral Hartree NLS solver, scattering operators and scaling experiments.
#[derive(Debug, Parser)]
#[command(name = "hnls", version)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Worker threads for schedule sweeps (0: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for randomized test fields.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Kernel exponent γ.
    #[arg(long, global = true, allow_negative_numbers = true)]
    gamma: Option<f64>,
    /// Points per axis.
    #[arg(long, global = true)]
    grid_n: Option<usize>,
    /// Box half-width L.
    #[arg(long, global = true)]
    half_width: Option<f64>,
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// Also write binary field containers.
    #[arg(long, global = true)]
    checkpoints: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the equation and tabulate conserved quantities.
    Evolve(TimeArgs),
    /// Scattering state of the initial datum.
    Scatter(ScatterArgs),
    /// Wave operator applied to the datum, read as a scattering state.
    Wave(ScatterArgs),
    /// Perturbation coefficients around the datum and the series remainder.
    Hierarchy(HierarchyArgs),
    /// Free-energy scaling sweep over ε and σ.
    Scaling(ScalingArgs),
    /// Breakdown-ratio sequence at or off the origin.
    Breakdown(BreakdownArgs),
    /// Cubic recursion and its majorant.
    Gronwall(GronwallArgs),
}

#[derive(Debug, Args)]
struct TimeArgs {
    #[arg(long)]
    dt: Option<f64>,
    /// Final time of the run.
    #[arg(long)]
    t_end: Option<f64>,
}

#[derive(Debug, Args)]
struct ScatterArgs {
    #[command(flatten)]
    time: TimeArgs,
    /// Also report the round trip through the other operator.
    #[arg(long)]
    roundtrip: bool,
    /// Disable the far-field tail beyond the horizon.
    #[arg(long)]
    no_far_tail: bool,
}

#[derive(Debug, Args)]
struct HierarchyArgs {
    #[arg(long)]
    order: Option<usize>,
    /// ε values for the remainder table.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    ds: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Eps,
    Sigma,
    Joint,
}

#[derive(Debug, Args)]
struct ScalingArgs {
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_delimiter = ',')]
    sigmas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
    #[arg(long)]
    dx_max: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BreakdownArg {
    Origin,
    OffOrigin,
}

#[derive(Debug, Args)]
struct BreakdownArgs {
    #[arg(long, value_enum)]
    mode: Option<BreakdownArg>,
    #[arg(long)]
    s: Option<f64>,
    /// Coupled schedule `ε = σ^-j`.
    #[arg(long)]
    j: Option<f64>,
    /// Frozen ε (decoupled schedule); overrides `j`.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    sigmas: Option<Vec<f64>>,
    /// Small-data radius R; calibrated when absent.
    #[arg(long)]
    radius: Option<f64>,
}

#[derive(Debug, Args)]
struct GronwallArgs {
    #[arg(long = "C")]
    c: Option<f64>,
    #[arg(long)]
    a1: Option<f64>,
    #[arg(long = "N")]
    n: Option<usize>,
    /// Let the indices start at 0 with this `a_0`.
    #[arg(long)]
    a0: Option<f64>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn apply_time(cfg: &mut RunConfig, t: &TimeArgs) {
    set(&mut cfg.solver.dt, t.dt);
    if let Some(t1) = t.t_end {
        cfg.solver.t_span = (0.0, t1);
    }
}

/// Merges the flags into the loaded configuration and names the subcommand.
fn merge(cli: &Cli, cfg: &mut RunConfig) -> &'static str {
    set(&mut cfg.output_dir, cli.output_dir.clone());
    set(&mut cfg.threads, cli.threads);
    set(&mut cfg.seed, cli.seed);
    set(&mut cfg.gamma, cli.gamma);
    set(&mut cfg.grid.n, cli.grid_n);
    set(&mut cfg.grid.half_width, cli.half_width);
    set(&mut cfg.grid.dim, cli.dim);
    cfg.checkpoints |= cli.checkpoints;
    match &cli.command {
        Command::Evolve(t) => {
            apply_time(cfg, t);
            "evolve"
        }
        Command::Scatter(a) | Command::Wave(a) => {
            apply_time(cfg, &a.time);
            cfg.scatter.roundtrip |= a.roundtrip;
            if a.no_far_tail {
                cfg.scatter.options.far_tail = false;
            }
            if matches!(cli.command, Command::Scatter(_)) {
                "scatter"
            } else {
                "wave"
            }
        }
        Command::Hierarchy(a) => {
            set(&mut cfg.hierarchy.order, a.order);
            set(&mut cfg.hierarchy.eps, a.eps.clone());
            set(&mut cfg.hierarchy.config.horizon, a.horizon);
            set(&mut cfg.hierarchy.config.ds, a.ds);
            "hierarchy"
        }
        Command::Scaling(a) => {
            set(
                &mut cfg.scaling.mode,
                a.mode.map(|m| match m {
                    ModeArg::Eps => ScalingMode::Eps,
                    ModeArg::Sigma => ScalingMode::Sigma,
                    ModeArg::Joint => ScalingMode::Joint,
                }),
            );
            set(&mut cfg.scaling.sigmas, a.sigmas.clone());
            set(&mut cfg.scaling.epsilons, a.epsilons.clone());
            set(&mut cfg.scaling.dx_max, a.dx_max);
            "scaling"
        }
        Command::Breakdown(a) => {
            let b = &mut cfg.breakdown;
            set(
                &mut b.mode,
                a.mode.map(|m| match m {
                    BreakdownArg::Origin => BreakdownMode::Origin,
                    BreakdownArg::OffOrigin => BreakdownMode::OffOrigin,
                }),
            );
            set(&mut b.s, a.s);
            if let Some(j) = a.j {
                b.j = j;
                b.eps = None;
            }
            if a.eps.is_some() {
                b.eps = a.eps;
            }
            set(&mut b.sigmas, a.sigmas.clone());
            if a.radius.is_some() {
                b.config.radius = a.radius;
            }
            "breakdown"
        }
        Command::Gronwall(a) => {
            let g = &mut cfg.gronwall;
            set(&mut g.c, a.c);
            set(&mut g.a1, a.a1);
            set(&mut g.n, a.n);
            if let Some(a0) = a.a0 {
                g.convention = hnls_core::hierarchy::IndexConvention::FromZero { a0 };
            }
            "gronwall"
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(path) => match RunConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(commands::EXIT_CONFIG);
            }
        },
        None => RunConfig::default(),
    };
    let command = merge(&cli, &mut cfg);
    let problems = cfg.problems(command);
    if !problems.is_empty() {
        eprintln!("error: invalid configuration");
        for p in &problems {
            eprintln!("  - {p}");
        }
        return ExitCode::from(commands::EXIT_CONFIG);
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global() {
        eprintln!("error: cannot start worker pool: {e}");
        return ExitCode::FAILURE;
    }
    match commands::run(command, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
