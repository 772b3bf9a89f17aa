//! Run configuration: a TOML file merged with command-line overrides.

use std::path::{Path, PathBuf};

use hnls_core::experiments::{BreakdownConfig, FreeEnergyConfig, ScalingMode, Schedule};
use hnls_core::hierarchy::IndexConvention;
use hnls_core::scattering::ScatterOptions;
use hnls_core::spectral::kernel::validate_gamma;
use hnls_core::{Grid, HierarchyConfig, SolverConfig, ZeroModePolicy};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub gamma: f64,
    pub seed: u64,
    /// Worker threads for schedule sweeps; 0 lets the pool decide.
    pub threads: usize,
    pub output_dir: PathBuf,
    /// Also write binary field containers.
    pub checkpoints: bool,
    pub grid: GridConfig,
    pub zero_mode: ZeroModePolicy,
    pub solver: SolverConfig,
    /// Initial datum `u0`, or `u_+` for the wave operator.
    pub data: DataConfig,
    /// Perturbation direction `v`, also the base profile of the scaling family.
    pub direction: DataConfig,
    pub scatter: ScatterSection,
    pub hierarchy: HierarchySection,
    pub scaling: ScalingSection,
    pub breakdown: BreakdownSection,
    pub gronwall: GronwallSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            gamma: 1.5,
            seed: 0,
            threads: 1,
            output_dir: PathBuf::from("out"),
            checkpoints: false,
            grid: GridConfig::default(),
            zero_mode: ZeroModePolicy::CellAverage,
            solver: SolverConfig {
                dt: 0.01,
                t_span: (0.0, 4.0),
                record_every: 10,
                ..Default::default()
            },
            data: DataConfig::default(),
            direction: DataConfig {
                amplitude: 1.0,
                ..Default::default()
            },
            scatter: ScatterSection::default(),
            hierarchy: HierarchySection::default(),
            scaling: ScalingSection::default(),
            breakdown: BreakdownSection::default(),
            gronwall: GronwallSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub n: usize,
    pub half_width: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            dim: 2,
            n: 128,
            half_width: 32.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataKind {
    Gaussian,
    /// Smooth random field: Gaussian envelope times band-limited noise drawn from `seed`.
    Random,
    File,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub kind: DataKind,
    pub amplitude: f64,
    pub width: f64,
    pub center: [f64; 2],
    pub momentum: [f64; 2],
    /// Rescale the field to this Σ-norm after construction.
    pub sigma_norm: Option<f64>,
    pub path: Option<PathBuf>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            kind: DataKind::Gaussian,
            amplitude: 0.1,
            width: 1.0,
            center: [0.0; 2],
            momentum: [0.0; 2],
            sigma_norm: None,
            path: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScatterSection {
    pub options: ScatterOptions,
    /// Also apply the other operator and report the round-trip error.
    pub roundtrip: bool,
}

impl Default for ScatterSection {
    fn default() -> Self {
        ScatterSection {
            options: ScatterOptions::default(),
            roundtrip: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HierarchySection {
    pub order: usize,
    /// ε values for the remainder table; empty skips it.
    pub eps: Vec<f64>,
    pub config: HierarchyConfig,
}

impl Default for HierarchySection {
    fn default() -> Self {
        HierarchySection {
            order: 4,
            eps: vec![0.01, 0.005],
            config: HierarchyConfig {
                horizon: 2.0,
                ..Default::default()
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingSection {
    pub mode: ScalingMode,
    pub epsilons: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub dx_max: f64,
    pub free_energy: FreeEnergyConfig,
}

impl Default for ScalingSection {
    fn default() -> Self {
        ScalingSection {
            mode: ScalingMode::Sigma,
            epsilons: vec![1.0],
            sigmas: vec![2.0, 4.0, 8.0],
            dx_max: 0.55,
            free_energy: FreeEnergyConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BreakdownMode {
    Origin,
    OffOrigin,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BreakdownSection {
    pub mode: BreakdownMode,
    pub s: f64,
    pub j: f64,
    /// Freezes ε (decoupled sweep) instead of `ε = σ^{-j}`.
    pub eps: Option<f64>,
    pub sigmas: Vec<f64>,
    /// Amplitude ladder for the radius calibration when `config.radius` is unset.
    pub calibration_scales: Vec<f64>,
    /// Horizon of the calibration runs.
    pub calibration_horizon: f64,
    pub config: BreakdownConfig,
}

impl Default for BreakdownSection {
    fn default() -> Self {
        BreakdownSection {
            mode: BreakdownMode::Origin,
            s: 2.9,
            j: 2.3,
            eps: None,
            sigmas: vec![4.0, 8.0, 16.0],
            calibration_scales: vec![0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0],
            calibration_horizon: 4.0,
            config: BreakdownConfig::default(),
        }
    }
}

impl BreakdownSection {
    pub fn schedule(&self) -> Schedule {
        match self.eps {
            Some(eps) => Schedule::Decoupled { eps },
            None => Schedule::Coupled { j: self.j },
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GronwallSection {
    pub c: f64,
    pub a1: f64,
    pub n: usize,
    pub convention: IndexConvention,
}

impl Default for GronwallSection {
    fn default() -> Self {
        GronwallSection {
            c: 1.0,
            a1: 0.5,
            n: 50,
            convention: IndexConvention::FromOne,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("cannot parse {}: {e}", path.display()))
    }

    pub fn grid(&self) -> hnls_core::Result<Grid> {
        Grid::new(self.grid.dim, self.grid.n, self.grid.half_width)
    }

    /// Every violated constraint, for the given subcommand.
    pub fn problems(&self, command: &str) -> Vec<String> {
        let mut out = Vec::new();
        if let Err(e) = validate_gamma(self.gamma) {
            out.push(strip(e));
        }
        if let Err(e) = self.grid() {
            out.push(strip(e));
        }
        for (name, d) in [("data", &self.data), ("direction", &self.direction)] {
            if d.kind == DataKind::File && d.path.is_none() {
                out.push(format!("{name}: kind = \"file\" needs a path"));
            }
            if !(d.width > 0.0) {
                out.push(format!("{name}: width must be positive, got {}", d.width));
            }
            if d.sigma_norm.is_some_and(|s| !(s > 0.0)) {
                out.push(format!("{name}: sigma_norm must be positive"));
            }
        }
        match command {
            "evolve" | "scatter" | "wave" => {
                if let Err(e) = self.solver.validate() {
                    out.push(strip(e));
                }
            }
            "hierarchy" => {
                let h = &self.hierarchy;
                if h.order == 0 {
                    out.push("hierarchy: order must be at least 1".into());
                }
                if h.eps.iter().any(|e| !(*e >= 0.0)) {
                    out.push("hierarchy: eps values must be nonnegative".into());
                }
                if let Err(e) = h.config.time_grid() {
                    out.push(strip(e));
                }
            }
            "scaling" => {
                let s = &self.scaling;
                if s.epsilons.iter().chain(&s.sigmas).any(|x| !(*x > 0.0)) {
                    out.push("scaling: ε and σ values must be positive".into());
                }
                let needed = match s.mode {
                    ScalingMode::Eps => s.epsilons.len(),
                    ScalingMode::Sigma => s.sigmas.len(),
                    ScalingMode::Joint => s.epsilons.len() * s.sigmas.len(),
                };
                if needed < 3 {
                    out.push(format!("scaling: exponent fits need at least 3 points, schedule has {needed}"));
                }
                if !(s.dx_max > 0.0) {
                    out.push("scaling: dx_max must be positive".into());
                }
            }
            "breakdown" => {
                let b = &self.breakdown;
                let check = match b.mode {
                    BreakdownMode::Origin => hnls_core::experiments::validate_origin(
                        self.gamma,
                        b.s,
                        &b.schedule(),
                        &b.sigmas,
                        b.config.max_eps_sigma,
                    ),
                    // the radius is checked once it is known
                    BreakdownMode::OffOrigin => hnls_core::experiments::validate_off_origin(
                        self.gamma,
                        b.s,
                        &b.schedule(),
                        &b.sigmas,
                        0.0,
                        Some(f64::INFINITY),
                        b.config.max_eps_sigma,
                    ),
                };
                if let Err(e) = check {
                    out.push(strip(e));
                }
            }
            "gronwall" => {
                let g = &self.gronwall;
                if !(g.c > 0.0) || !(g.a1 > 0.0) || g.n == 0 {
                    out.push(format!("gronwall: need C > 0, a1 > 0, N ≥ 1, got {}, {}, {}", g.c, g.a1, g.n));
                }
            }
            _ => {}
        }
        out
    }
}

fn strip(e: hnls_core::Error) -> String {
    match e {
        hnls_core::Error::InvalidParameter(s) | hnls_core::Error::Schedule(s) | hnls_core::Error::InvalidGrid(s) => s,
        other => other.to_string(),
    }
}
