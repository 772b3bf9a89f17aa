//! One function per subcommand; each writes its artifacts into the run directory.

use hnls_core::experiments::{
    breakdown_off_origin, breakdown_origin, scaling_sweep, validate_off_origin, OffOriginTable, OriginTable,
};
use hnls_core::functionals::{energy, mass, potential_q, sigma_norm, weighted_norms};
use hnls_core::hierarchy::{gronwall_sequence, solve_hierarchy, verify_remainder, LambdaFit, OrderStats};
use hnls_core::propagator::evolve_with_report;
use hnls_core::scattering::{calibrate_radius, roundtrip_check_with, scattering_state_with, wave_operator_with};
use hnls_core::spectral::io::save_field;
use hnls_core::{ComplexField, Error, HartreeKernel, NormLedger, SolverConfig};
use num_complex::Complex64;
use serde::Serialize;

use crate::config::{BreakdownMode, RunConfig};
use crate::data;
use crate::output::{tag, RunDir};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_ALARM: u8 = 3;

pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl From<String> for Failure {
    fn from(message: String) -> Self {
        Failure { code: 1, message }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParameter(_) | Error::InvalidGrid(_) | Error::Schedule(_) => EXIT_CONFIG,
            Error::MassDrift { .. }
            | Error::EnergyDrift { .. }
            | Error::WrapAround { .. }
            | Error::Contraction { .. }
            | Error::Horizon { .. }
            | Error::NotCauchy
            | Error::NonPositive { .. } => EXIT_ALARM,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

pub fn run(command: &'static str, cfg: &RunConfig) -> Outcome {
    let mut dir = RunDir::create(cfg, command)?;
    let result = match command {
        "evolve" => evolve(cfg, &mut dir),
        "scatter" | "wave" => scatter(cfg, &mut dir, command == "scatter"),
        "hierarchy" => hierarchy(cfg, &mut dir),
        "scaling" => scaling(cfg, &mut dir),
        "breakdown" => breakdown(cfg, &mut dir),
        "gronwall" => gronwall(cfg, &mut dir),
        other => Err(format!("unknown command {other}").into()),
    };
    if let Err(f) = &result {
        dir.alarm(f.message.clone());
    }
    dir.finish()?;
    result
}

fn kernel(cfg: &RunConfig) -> Result<HartreeKernel, Failure> {
    Ok(HartreeKernel::with_policy(&cfg.grid()?, cfg.gamma, cfg.zero_mode)?)
}

fn base_tag(cfg: &RunConfig) -> String {
    tag(&[("g", cfg.gamma), ("n", cfg.grid.n as f64)])
}

fn checkpoint(cfg: &RunConfig, dir: &mut RunDir, name: &str, field: &ComplexField) -> Outcome {
    if cfg.checkpoints {
        save_field(&dir.path(name), field, Some(cfg.gamma))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EvolveRow {
    t: f64,
    mass: f64,
    energy: f64,
    potential: f64,
    sigma_norm: f64,
    wrap_fraction: f64,
}

#[derive(Serialize)]
struct EvolveSummary {
    gamma: f64,
    steps: usize,
    step: f64,
    max_mass_drift: f64,
    max_energy_drift: Option<f64>,
    max_wrap_fraction: f64,
    initial_mass: f64,
    initial_energy: Option<f64>,
    initial_norms: NormLedger,
    final_norms: NormLedger,
}

fn evolve(cfg: &RunConfig, dir: &mut RunDir) -> Outcome {
    let k = kernel(cfg)?;
    let u0 = data::build(&cfg.data, k.grid(), cfg.seed, 0)?;
    let (traj, report) = evolve_with_report(&u0, &cfg.solver, &k)?;
    let radius = k.grid().half_width() / 2.0;
    let rows: Vec<EvolveRow> = traj
        .times()
        .iter()
        .zip(traj.fields())
        .map(|(t, u)| EvolveRow {
            t: *t,
            mass: mass(u),
            energy: energy(u, &k),
            potential: potential_q(u, &k),
            sigma_norm: sigma_norm(u),
            wrap_fraction: u.mass_fraction_outside(radius),
        })
        .collect();
    let name = format!("evolve_{}", base_tag(cfg));
    dir.csv(&format!("{name}.csv"), &rows)?;
    dir.json(
        &format!("{name}.json"),
        &EvolveSummary {
            gamma: cfg.gamma,
            steps: report.steps,
            step: report.step,
            max_mass_drift: report.max_mass_drift,
            max_energy_drift: report.max_energy_drift,
            max_wrap_fraction: report.max_wrap_fraction,
            initial_mass: report.initial_mass,
            initial_energy: report.initial_energy,
            initial_norms: weighted_norms(&u0),
            final_norms: weighted_norms(traj.last()),
        },
    )?;
    if cfg.checkpoints {
        traj.save(&dir.path(&format!("{name}.fld")), Some(cfg.gamma))?;
    }
    Ok(())
}

fn scatter(cfg: &RunConfig, dir: &mut RunDir, forward: bool) -> Outcome {
    let k = kernel(cfg)?;
    let u = data::build(&cfg.data, k.grid(), cfg.seed, 0)?;
    let opts = &cfg.scatter.options;
    let name = format!("{}_{}", if forward { "scatter" } else { "wave" }, base_tag(cfg));
    let result = if forward {
        scattering_state_with(&u, &cfg.solver, &k, opts)?
    } else {
        wave_operator_with(&u, &cfg.solver, &k, opts)?
    };
    dir.json(&format!("{name}.json"), &result.summary(&u))?;
    checkpoint(cfg, dir, &format!("{name}.fld"), &result.u_plus)?;
    if cfg.scatter.roundtrip {
        let trip = roundtrip_check_with(&u, &cfg.solver, &k, opts)?;
        dir.json(&format!("roundtrip_{}.json", base_tag(cfg)), &trip)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct OrderRow {
    k: usize,
    sup_l2: f64,
    plus_l2: Option<f64>,
    plus_sigma: Option<f64>,
    y_norm: Option<f64>,
    x_norm: Option<f64>,
    max_iterations: usize,
    max_contraction: f64,
}

#[derive(Serialize)]
struct RemainderCsvRow {
    eps: f64,
    order: usize,
    remainder: f64,
}

#[derive(Serialize)]
struct ExtractionSummary {
    k: usize,
    t_used: f64,
    tail_estimate: f64,
    ratio: f64,
}

#[derive(Serialize)]
struct HierarchySummary<'a> {
    gamma: f64,
    order: usize,
    lambda_fit: Option<LambdaFit>,
    ledger: &'a [NormLedger],
    stats: &'a [OrderStats],
    extraction: Vec<ExtractionSummary>,
    remainder: Option<hnls_core::hierarchy::RemainderTable>,
}

fn hierarchy(cfg: &RunConfig, dir: &mut RunDir) -> Outcome {
    let k = kernel(cfg)?;
    let u0 = data::build(&cfg.data, k.grid(), cfg.seed, 0)?;
    let v = data::build(&cfg.direction, k.grid(), cfg.seed, 1)?;
    let h = &cfg.hierarchy;
    let coeffs = solve_hierarchy(&u0, &v, h.order, &k, &h.config)?;
    let rows: Vec<OrderRow> = coeffs
        .ledger
        .iter()
        .zip(&coeffs.stats)
        .enumerate()
        .map(|(k, (l, s))| OrderRow {
            k,
            sup_l2: s.sup_l2,
            plus_l2: l.get("plus_L2"),
            plus_sigma: l.get("plus_Sigma"),
            y_norm: l.get("Y"),
            x_norm: l.get("X"),
            max_iterations: s.max_iterations,
            max_contraction: s.max_contraction,
        })
        .collect();
    let name = format!("hierarchy_{}_K{}", base_tag(cfg), h.order);
    dir.csv(&format!("{name}.csv"), &rows)?;
    let remainder = if h.eps.is_empty() {
        None
    } else {
        let table = verify_remainder(&u0, &v, &h.eps, h.order, &k, &h.config)?;
        let flat: Vec<RemainderCsvRow> = table
            .rows
            .iter()
            .flat_map(|r| {
                r.remainders.iter().enumerate().map(move |(n, x)| RemainderCsvRow {
                    eps: r.eps,
                    order: n,
                    remainder: *x,
                })
            })
            .collect();
        dir.csv(&format!("remainder_{}_K{}.csv", base_tag(cfg), h.order), &flat)?;
        Some(table)
    };
    let extraction = coeffs
        .extraction
        .iter()
        .enumerate()
        .filter_map(|(k, e)| {
            e.as_ref().map(|e| ExtractionSummary {
                k,
                t_used: e.t_used,
                tail_estimate: e.tail_estimate,
                ratio: e.ratio,
            })
        })
        .collect();
    dir.json(
        &format!("{name}.json"),
        &HierarchySummary {
            gamma: cfg.gamma,
            order: h.order,
            lambda_fit: coeffs.lambda_fit,
            ledger: &coeffs.ledger,
            stats: &coeffs.stats,
            extraction,
            remainder,
        },
    )?;
    if cfg.checkpoints {
        for (i, w) in coeffs.w.iter().enumerate() {
            w.save(&dir.path(&format!("{name}_w{i}.fld")), Some(cfg.gamma))?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ScalingCsvRow {
    eps: f64,
    sigma: f64,
    grid_n: usize,
    half_width: f64,
    l2: f64,
    sigma_norm: f64,
    free_energy: f64,
    partial: f64,
    tail: f64,
    near: f64,
    chirp_threshold: f64,
    unreliable: bool,
}

fn scaling(cfg: &RunConfig, dir: &mut RunDir) -> Outcome {
    let grid = cfg.grid()?;
    let v = data::build(&cfg.direction, &grid, cfg.seed, 1)?;
    let s = &cfg.scaling;
    let exp = scaling_sweep(&v, cfg.gamma, &s.epsilons, &s.sigmas, s.mode, s.dx_max, &s.free_energy)?;
    let rows: Vec<ScalingCsvRow> = exp
        .rows
        .iter()
        .map(|r| ScalingCsvRow {
            eps: r.eps,
            sigma: r.sigma,
            grid_n: r.grid_n,
            half_width: r.half_width,
            l2: r.norms.get("L2").unwrap_or(0.0),
            sigma_norm: r.norms.get("Sigma").unwrap_or(0.0),
            free_energy: r.free_energy.value,
            partial: r.free_energy.partial,
            tail: r.free_energy.tail,
            near: r.free_energy.near,
            chirp_threshold: r.free_energy.chirp_threshold,
            unreliable: r.free_energy.unreliable,
        })
        .collect();
    let mode = serde_json::to_value(s.mode).ok().and_then(|m| m.as_str().map(str::to_owned));
    let name = format!("scaling_{}_{}", mode.unwrap_or_default(), base_tag(cfg));
    dir.csv(&format!("{name}.csv"), &rows)?;
    dir.json(&format!("{name}.json"), &exp)?;
    if exp.unreliable > 0 {
        dir.warn(format!(
            "{} of {} free-energy values have a tail beyond the horizon above tolerance",
            exp.unreliable,
            exp.rows.len()
        ));
    }
    println!(
        "fitted exponents {:?}, expected {:?}",
        exp.fit.exponents, exp.expected
    );
    Ok(())
}

fn breakdown(cfg: &RunConfig, dir: &mut RunDir) -> Outcome {
    let k = kernel(cfg)?;
    let b = &cfg.breakdown;
    let schedule = b.schedule();
    let sched_tag = match b.eps {
        Some(eps) => ("eps", eps),
        None => ("j", b.j),
    };
    let name = format!(
        "breakdown_{}_{}",
        match b.mode {
            BreakdownMode::Origin => "origin",
            BreakdownMode::OffOrigin => "off-origin",
        },
        tag(&[("g", cfg.gamma), sched_tag, ("s", b.s), ("n", cfg.grid.n as f64)])
    );
    let v = data::build(&cfg.direction, k.grid(), cfg.seed, 1)?;
    match b.mode {
        BreakdownMode::Origin => {
            let table: OriginTable = breakdown_origin(&v, &k, b.s, schedule, &b.sigmas, &b.config)?;
            dir.csv(&format!("{name}.csv"), &table.rows)?;
            dir.json(&format!("{name}.json"), &table)?;
            if !table.monotone {
                dir.warn("breakdown ratio is not monotone along σ");
            }
        }
        BreakdownMode::OffOrigin => {
            let u0 = data::build(&cfg.data, k.grid(), cfg.seed, 0)?;
            let mut bc = b.config;
            if bc.radius.is_none() {
                let norm = sigma_norm(&u0);
                if norm == 0.0 {
                    return Err(Error::InvalidParameter("off-origin runs need a nonzero base datum".into()).into());
                }
                let shape = u0.scale(Complex64::new(1.0 / norm, 0.0));
                let solver = SolverConfig {
                    t_span: (0.0, b.calibration_horizon),
                    ..cfg.solver
                };
                let opts = hnls_core::ScatterOptions {
                    far_tail: false,
                    ..cfg.scatter.options
                };
                let cal = calibrate_radius(&shape, &b.calibration_scales, &solver, &k, &opts)?;
                dir.json(&format!("calibration_{}.json", base_tag(cfg)), &cal)?;
                bc.radius = cal.radius;
            }
            validate_off_origin(
                cfg.gamma,
                b.s,
                &schedule,
                &b.sigmas,
                sigma_norm(&u0),
                bc.radius,
                bc.max_eps_sigma,
            )?;
            let table: OffOriginTable = breakdown_off_origin(&u0, &v, &k, b.s, schedule, &b.sigmas, &bc)?;
            dir.csv(&format!("{name}.csv"), &table.rows)?;
            dir.json(&format!("{name}.json"), &table)?;
            if !table.dominance_growing {
                dir.warn("nonresonant-to-resonant ratio does not decrease along σ");
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct GronwallRow {
    n: usize,
    a: f64,
    root: f64,
    plain_ratio: f64,
    strengthened_ratio: f64,
}

fn gronwall(cfg: &RunConfig, dir: &mut RunDir) -> Outcome {
    let g = &cfg.gronwall;
    let seq = gronwall_sequence(g.c, g.a1, g.n, g.convention)?;
    let rows: Vec<GronwallRow> = (0..seq.a.len())
        .map(|i| GronwallRow {
            n: i + 1,
            a: seq.a[i],
            root: seq.root[i],
            plain_ratio: seq.plain_ratio[i],
            strengthened_ratio: seq.strengthened_ratio[i],
        })
        .collect();
    let name = format!("gronwall_{}", tag(&[("C", g.c), ("a", g.a1), ("N", g.n as f64)]));
    dir.csv(&format!("{name}.csv"), &rows)?;
    dir.json(&format!("{name}.json"), &seq)?;
    println!(
        "majorant {}: C1 = {:.6}, C0 = {:.6}",
        if seq.holds { "holds" } else { "fails" },
        seq.c1,
        seq.c0
    );
    if !seq.holds {
        dir.warn("majorant bound fails for the computed sequence");
    }
    Ok(())
}
