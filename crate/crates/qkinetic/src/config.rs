//! JSON run configuration and construction of a ready-to-run problem.

use crate::collision::CollisionWorkspace;
use crate::diagnostics::PhiSpec;
use crate::equilibrium::{build_tables, EquilibriumTables};
use crate::field::DistributionField;
use crate::grid::{build_grids, GridConfig, SpatialGrid, SphereQuadrature, VelocityGrid};
use crate::linearized::CutoffSpec;
use crate::params::{AngularLaw, DomainMode, ModelParams};
use crate::rng::CounterRng;
use crate::solver::SolverConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid parameters: {0}")]
    Params(#[from] crate::params::ParamsError),
    #[error("invalid grids: {0}")]
    Grid(#[from] crate::grid::GridError),
    #[error("equilibrium tables: {0}")]
    Equilibrium(#[from] crate::equilibrium::EquilibriumError),
    #[error("collision workspace: {0}")]
    Workspace(#[from] crate::collision::WorkspaceError),
    #[error("kernel tables need {needed} bytes, over the cache bound {budget}")]
    KernelCache { needed: usize, budget: usize },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Initial-data selector.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialSpec {
    /// The equilibrium state itself.
    Equilibrium,
    /// Space-modulated equilibrium `phi(x) mu(v)`.
    Modulated { phi: PhiSpec },
    /// Smooth velocity bumps with the weighted fluctuation amplitude
    /// normalized to `amplitude`.
    Bump { amplitude: f64 },
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec::Equilibrium
    }
}

/// Verification-suite knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifySection {
    pub samples: u64,
    pub p: f64,
    pub beta_for_nonlinear: f64,
    pub delta_values: Vec<f64>,
    pub rho_values: Vec<f64>,
    pub decomposition_trials: usize,
    pub contraction_windows: usize,
    pub fine_n_per_axis: usize,
    /// Test hook: flip the scattering loss-row sign so the decomposition
    /// check must fail.
    pub flip_scattering_sign: bool,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            samples: 100_000,
            p: 2.0,
            beta_for_nonlinear: 7.0,
            delta_values: vec![0.0, 0.5, 1.0],
            rho_values: vec![0.5, 1.0, 2.0],
            decomposition_trials: 5,
            contraction_windows: 2,
            fine_n_per_axis: 25,
            flip_scattering_sign: false,
        }
    }
}

/// Sweep axis selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Delta,
    Rho,
    Gamma,
    Resolution,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

/// Top-level run configuration (JSON document).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub delta: f64,
    pub rho: f64,
    pub gamma: f64,
    pub beta: f64,
    pub v_max: f64,
    pub n_per_axis: usize,
    pub sphere_polar: usize,
    pub sphere_azimuth: usize,
    pub domain_mode: DomainMode,
    pub n_x: usize,
    pub length: f64,
    pub cutoff_m: f64,
    pub angular_coeff: f64,
    pub seed: u64,
    pub conservative_fix: bool,
    pub snapshots: bool,
    pub kernel_cache_bytes: usize,
    pub solver: SolverConfig,
    pub initial: InitialSpec,
    pub checks: Option<Vec<String>>,
    pub verify: VerifySection,
    pub sweep: Option<SweepSection>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            delta: 1.0,
            rho: 1.0,
            gamma: -1.0,
            beta: 6.0,
            v_max: 6.0,
            n_per_axis: 13,
            sphere_polar: 4,
            sphere_azimuth: 8,
            domain_mode: DomainMode::Homogeneous,
            n_x: 1,
            length: 1.0,
            cutoff_m: 0.5,
            angular_coeff: 1.0,
            seed: 20_240_601,
            conservative_fix: false,
            snapshots: false,
            kernel_cache_bytes: 2 << 30,
            solver: SolverConfig::default(),
            initial: InitialSpec::Equilibrium,
            checks: None,
            verify: VerifySection::default(),
            sweep: None,
        }
    }
}

impl RunConfig {
    pub fn from_path(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)?;
        Ok(cfg)
    }

    pub fn params(&self) -> Result<ModelParams, ConfigError> {
        let p = ModelParams {
            delta: self.delta,
            rho: self.rho,
            gamma: self.gamma,
            beta: self.beta,
            angular_law: AngularLaw::CosineCutoff {
                coeff: self.angular_coeff,
            },
            domain_mode: self.domain_mode,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn grid_config(&self) -> GridConfig {
        GridConfig {
            v_max: self.v_max,
            n_per_axis: self.n_per_axis,
            sphere_polar: self.sphere_polar,
            sphere_azimuth: self.sphere_azimuth,
            domain_mode: self.domain_mode,
            n_x: self.n_x,
            length: self.length,
        }
    }
}

/// Fully constructed problem: parameters, grids, tables, and workspace.
pub struct Problem {
    pub params: ModelParams,
    pub grid: VelocityGrid,
    pub sphere: SphereQuadrature,
    pub spatial: SpatialGrid,
    pub tables: EquilibriumTables,
    pub ws: CollisionWorkspace,
    pub cutoff: CutoffSpec,
}

impl Problem {
    pub fn build(cfg: &RunConfig) -> Result<Self, ConfigError> {
        let params = cfg.params()?;
        let (grid, sphere, spatial) = build_grids(&cfg.grid_config())?;
        let tables = build_tables(&grid, &params)?;
        let ws = CollisionWorkspace::new(&grid, &sphere, params.gamma, cfg.angular_coeff)?;
        if ws.table_bytes() > cfg.kernel_cache_bytes {
            return Err(ConfigError::KernelCache {
                needed: ws.table_bytes(),
                budget: cfg.kernel_cache_bytes,
            });
        }
        if cfg.cutoff_m < 0.0 {
            return Err(ConfigError::Invalid("cutoff_m must be nonnegative".into()));
        }
        Ok(Problem {
            params,
            grid,
            sphere,
            spatial,
            tables,
            ws,
            cutoff: CutoffSpec::new(cfg.cutoff_m),
        })
    }

    pub fn solver_ctx(&self) -> crate::solver::SolverContext<'_> {
        crate::solver::SolverContext {
            params: &self.params,
            grid: &self.grid,
            spatial: &self.spatial,
            tables: &self.tables,
            ws: &self.ws,
        }
    }

    /// Build the configured initial state.
    pub fn initial_field(&self, spec: &InitialSpec, seed: u64) -> Result<DistributionField, ConfigError> {
        match spec {
            InitialSpec::Equilibrium => {
                let n_v = self.grid.len();
                let mut values = Vec::with_capacity(self.spatial.n_x * n_v);
                for _ in 0..self.spatial.n_x {
                    values.extend_from_slice(&self.tables.mu);
                }
                Ok(DistributionField::new(values, self.spatial.n_x, n_v, self.params)
                    .expect("shape"))
            }
            InitialSpec::Modulated { phi } => {
                let (field, report) = crate::diagnostics::modulated_equilibrium(
                    phi,
                    &self.params,
                    &self.tables,
                    &self.grid,
                    &self.spatial,
                    None,
                )
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
                if !report.admissible {
                    return Err(ConfigError::Invalid(format!(
                        "modulated profile inadmissible: phi_max {} over cap {}",
                        report.phi_max, report.pauli_cap
                    )));
                }
                Ok(field)
            }
            InitialSpec::Bump { amplitude } => {
                let mut rng = CounterRng::new(seed).stream(0xf1e1d);
                let n_v = self.grid.len();
                let bump: Vec<f64> = {
                    let specs: Vec<([f64; 3], f64, f64)> = (0..3)
                        .map(|_| {
                            (
                                [
                                    rng.next_in(-1.5, 1.5),
                                    rng.next_in(-1.5, 1.5),
                                    rng.next_in(-1.5, 1.5),
                                ],
                                rng.next_in(0.6, 1.4),
                                rng.next_in(0.2, 1.0),
                            )
                        })
                        .collect();
                    (0..n_v)
                        .map(|j| {
                            let v = self.grid.nodes[j];
                            specs
                                .iter()
                                .map(|(c, wdt, a)| {
                                    let d2 = (v[0] - c[0]).powi(2)
                                        + (v[1] - c[1]).powi(2)
                                        + (v[2] - c[2]).powi(2);
                                    a * (-d2 / (wdt * wdt)).exp()
                                })
                                .sum()
                        })
                        .collect()
                };
                let wnorm = bump
                    .iter()
                    .zip(&self.tables.w_beta)
                    .map(|(b, w)| (b * w).abs())
                    .fold(0.0f64, f64::max);
                let scale = amplitude / wnorm.max(1e-300);
                let cap = self.params.pauli_cap();
                let mut values = Vec::with_capacity(self.spatial.n_x * n_v);
                for _ in 0..self.spatial.n_x {
                    for j in 0..n_v {
                        values.push(
                            (self.tables.mu[j] + scale * self.tables.mu_bar_sqrt[j] * bump[j])
                                .max(0.0)
                                .min(cap),
                        );
                    }
                }
                Ok(DistributionField::new(values, self.spatial.n_x, n_v, self.params)
                    .expect("shape"))
            }
        }
    }
}
