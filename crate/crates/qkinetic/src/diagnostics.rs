//! Scalar functionals monitored along a run: defect moments, relative
//! entropy, the entropy-energy functional, the quadratic deviation
//! functional, norms, and the modulated-equilibrium example data.

use crate::equilibrium::EquilibriumTables;
use crate::field::{sup_x_l1_v_norm, weighted_sup_norm, DistributionField, FieldError};
use crate::grid::{SpatialGrid, VelocityGrid};
use crate::params::ModelParams;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("field outside admissible bounds: {0}")]
    Inadmissible(#[from] FieldError),
    #[error("modulation profile must be strictly positive, got {0} at x-node {1}")]
    NonPositiveProfile(f64, usize),
}

/// Per-time snapshot of every monitored functional.
#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub mass_defect: f64,
    pub momentum_defect: [f64; 3],
    pub energy_defect: f64,
    pub entropy: f64,
    pub e_functional: f64,
    pub taylor_defect: f64,
    pub sup_norm: f64,
    pub l1v_norm: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub clamp_events: u64,
}

impl DiagnosticsRecord {
    pub const CSV_HEADER: &'static str = "time,mass_defect,momentum_defect_x,momentum_defect_y,\
momentum_defect_z,energy_defect,entropy,e_functional,taylor_defect,sup_norm,l1v_norm,f_min,\
f_max,clamp_events";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.time,
            self.mass_defect,
            self.momentum_defect[0],
            self.momentum_defect[1],
            self.momentum_defect[2],
            self.energy_defect,
            self.entropy,
            self.e_functional,
            self.taylor_defect,
            self.sup_norm,
            self.l1v_norm,
            self.f_min,
            self.f_max,
            self.clamp_events
        )
    }
}

/// Discrete defect moments of `F - mu` against `{1, v, |v|^2}`.
pub fn defect_moments(
    field: &DistributionField,
    tables: &EquilibriumTables,
    grid: &VelocityGrid,
    spatial: &SpatialGrid,
) -> (f64, [f64; 3], f64) {
    let wv = grid.cell_weight();
    let wx = spatial.cell_weight();
    let mut m = 0.0;
    let mut j = [0.0; 3];
    let mut e = 0.0;
    for x in 0..field.n_x {
        let slice = field.slice_x(x);
        for (idx, node) in grid.nodes.iter().enumerate() {
            let d = slice[idx] - tables.mu[idx];
            m += d;
            j[0] += d * node[0];
            j[1] += d * node[1];
            j[2] += d * node[2];
            e += d * grid.s[idx];
        }
    }
    let scale = wv * wx;
    (m * scale, [j[0] * scale, j[1] * scale, j[2] * scale], e * scale)
}

/// One summand of the entropy integrand: `F log F + (1/delta)(1 - delta F)
/// log(1 - delta F)`, with the analytic small-delta branch
/// `F log F - F + delta F^2 / 2`.
#[inline]
fn entropy_term(f: f64, delta: f64) -> f64 {
    let flogf = if f > 0.0 { f * f.ln() } else { 0.0 };
    if delta < 1e-8 {
        return flogf - f + 0.5 * delta * f * f;
    }
    let x = delta * f;
    let q = if x < 1.0 {
        (1.0 - x) * (-x).ln_1p() / delta
    } else {
        // Occupancy at the cap: (1 - x) log(1 - x) -> 0.
        0.0
    };
    flogf + q
}

/// Relative entropy of `F` against the equilibrium.
pub fn relative_entropy(
    field: &DistributionField,
    tables: &EquilibriumTables,
    grid: &VelocityGrid,
    spatial: &SpatialGrid,
) -> Result<f64, DiagnosticsError> {
    let params = field.params;
    let cap_tol = 1e-9 * params.pauli_cap().min(1e9).max(1.0);
    field.check_bounds(cap_tol)?;
    let delta = params.delta;
    let wv = grid.cell_weight();
    let wx = spatial.cell_weight();
    let mut acc = 0.0;
    for x in 0..field.n_x {
        let slice = field.slice_x(x);
        for idx in 0..grid.len() {
            // Clamp roundoff-level excursions before taking logs.
            let f = slice[idx].max(0.0).min(params.pauli_cap());
            acc += entropy_term(f, delta) - entropy_term(tables.mu[idx], delta);
        }
    }
    Ok(acc * wv * wx)
}

/// Entropy-energy functional: relative entropy plus `log(rho) M0 + E0/2`.
pub fn entropy_energy_functional(
    field: &DistributionField,
    tables: &EquilibriumTables,
    grid: &VelocityGrid,
    spatial: &SpatialGrid,
) -> Result<f64, DiagnosticsError> {
    let h = relative_entropy(field, tables, grid, spatial)?;
    let (m0, _, e0) = defect_moments(field, tables, grid, spatial);
    Ok(h + field.params.rho.ln() * m0 + 0.5 * e0)
}

/// Quadratic deviation functional: `|F-mu|^2 / (4 mu)` where the deviation
/// is below `mu`, `|F-mu|/4` elsewhere; nonnegative by construction.
pub fn taylor_defect(
    field: &DistributionField,
    tables: &EquilibriumTables,
    grid: &VelocityGrid,
    spatial: &SpatialGrid,
) -> f64 {
    let wv = grid.cell_weight();
    let wx = spatial.cell_weight();
    let mut acc = 0.0;
    for x in 0..field.n_x {
        let slice = field.slice_x(x);
        for idx in 0..grid.len() {
            let mu = tables.mu[idx];
            let d = (slice[idx] - mu).abs();
            acc += if d <= mu { d * d / (4.0 * mu) } else { 0.25 * d };
        }
    }
    acc * wv * wx
}

/// Assemble a full diagnostics record for one snapshot.
#[allow(clippy::too_many_arguments)]
pub fn record(
    time: f64,
    field: &DistributionField,
    tables: &EquilibriumTables,
    grid: &VelocityGrid,
    spatial: &SpatialGrid,
    clamp_events: u64,
) -> Result<DiagnosticsRecord, DiagnosticsError> {
    let (m, j, e) = defect_moments(field, tables, grid, spatial);
    let entropy = relative_entropy(field, tables, grid, spatial)?;
    let efun = entropy + field.params.rho.ln() * m + 0.5 * e;
    let taylor = taylor_defect(field, tables, grid, spatial);
    // Fluctuation field for the norms.
    let n_v = grid.len();
    let mut fluct = vec![0.0; field.n_x * n_v];
    for x in 0..field.n_x {
        for idx in 0..n_v {
            fluct[x * n_v + idx] =
                (field.at(x, idx) - tables.mu[idx]) / tables.mu_bar_sqrt[idx];
        }
    }
    let sup = weighted_sup_norm(&fluct, field.n_x, grid, field.params.beta)
        .map_err(DiagnosticsError::Inadmissible)?;
    let l1v = sup_x_l1_v_norm(&fluct, field.n_x, grid).map_err(DiagnosticsError::Inadmissible)?;
    let (lo, hi) = field.min_max();
    Ok(DiagnosticsRecord {
        time,
        mass_defect: m,
        momentum_defect: j,
        energy_defect: e,
        entropy,
        e_functional: efun,
        taylor_defect: taylor,
        sup_norm: sup,
        l1v_norm: l1v,
        f_min: lo,
        f_max: hi,
        clamp_events,
    })
}

/// Spatial modulation profile for example data.
#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhiSpec {
    Constant { value: f64 },
    Cosine { amplitude: f64 },
}

impl PhiSpec {
    pub fn eval(&self, x: f64, length: f64) -> f64 {
        match *self {
            PhiSpec::Constant { value } => value,
            PhiSpec::Cosine { amplitude } => {
                1.0 + amplitude * (2.0 * std::f64::consts::PI * x / length).cos()
            }
        }
    }
}

/// Admissibility summary for modulated-equilibrium data.
#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityReport {
    /// Largest modulation value.
    pub phi_max: f64,
    /// Hard occupancy cap `1 + rho/delta` (infinite for the classical gas).
    pub pauli_cap: f64,
    /// Amplitude cap `1 + M sqrt(rho)/C_beta` when an amplitude bound M is
    /// given.
    pub amplitude_cap: Option<f64>,
    /// Implied weighted amplitude of the fluctuation.
    pub implied_amplitude: f64,
    /// `sup_v (1+|v|)^beta e^{-|v|^2/4}`.
    pub c_beta: f64,
    /// Smallness budget: integral of `|phi ln phi| + |phi - 1|`.
    pub budget: f64,
    pub admissible: bool,
}

/// `sup_v (1+|v|)^beta e^{-|v|^2/4}` in closed form.
pub fn weight_gaussian_sup(beta: f64) -> f64 {
    let r = 0.5 * (-1.0 + (1.0 + 8.0 * beta).sqrt());
    (1.0 + r).powf(beta) * (-0.25 * r * r).exp()
}

/// Build `F0(x, v) = phi(x) mu(v)` and check its admissibility budget.
pub fn modulated_equilibrium(
    phi: &PhiSpec,
    params: &ModelParams,
    tables: &EquilibriumTables,
    grid: &VelocityGrid,
    spatial: &SpatialGrid,
    amplitude_bound: Option<f64>,
) -> Result<(DistributionField, AdmissibilityReport), DiagnosticsError> {
    let n_v = grid.len();
    let n_x = spatial.n_x;
    let mut values = vec![0.0; n_x * n_v];
    let mut phi_max = f64::NEG_INFINITY;
    let mut budget = 0.0;
    for x in 0..n_x {
        let p = phi.eval(spatial.position(x), spatial.length);
        if p <= 0.0 {
            return Err(DiagnosticsError::NonPositiveProfile(p, x));
        }
        phi_max = phi_max.max(p);
        budget += ((p * p.ln()).abs() + (p - 1.0).abs()) * spatial.cell_weight();
        for idx in 0..n_v {
            values[x * n_v + idx] = p * tables.mu[idx];
        }
    }
    let field = DistributionField::new(values, n_x, n_v, *params).expect("shape");

    // Implied weighted amplitude of f0 = (phi - 1) mu / sqrt(mu_bar).
    let mut implied = 0.0f64;
    for x in 0..n_x {
        let p = phi.eval(spatial.position(x), spatial.length);
        for idx in 0..n_v {
            let f = (p - 1.0) * tables.mu[idx] / tables.mu_bar_sqrt[idx];
            implied = implied.max(tables.w_beta[idx] * f.abs());
        }
    }
    let c_beta = weight_gaussian_sup(params.beta);
    let pauli_cap = if params.delta > 0.0 {
        1.0 + params.rho / params.delta
    } else {
        f64::INFINITY
    };
    let amplitude_cap = amplitude_bound.map(|m| 1.0 + m * params.rho.sqrt() / c_beta);
    let mut admissible = phi_max <= pauli_cap;
    if let Some(cap) = amplitude_cap {
        admissible = admissible && phi_max <= cap;
    }
    let report = AdmissibilityReport {
        phi_max,
        pauli_cap,
        amplitude_cap,
        implied_amplitude: implied,
        c_beta,
        budget,
        admissible,
    };
    Ok((field, report))
}
