//! The linearized collision operator: frequency minus scattering, the
//! small/large relative-velocity splitting of the scattering part, and the
//! consistency check tying the linear and nonlinear forms together.

use crate::collision::{
    collision_operator, nonlinear_form, scattering_apply, CollisionError, CollisionWorkspace,
};
use crate::equilibrium::EquilibriumTables;
use crate::field::DistributionField;
use crate::params::ModelParams;
use serde::{Deserialize, Serialize};

/// Smooth relative-velocity cutoff: 1 below `m`, 0 above `2m`, cosine ramp
/// between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffSpec {
    pub m: f64,
}

impl CutoffSpec {
    pub fn new(m: f64) -> Self {
        assert!(m >= 0.0, "cutoff radius must be nonnegative");
        CutoffSpec { m }
    }
}

/// Evaluate the cutoff profile at `tau >= 0`.
pub fn cutoff_profile(tau: f64, spec: &CutoffSpec) -> f64 {
    let m = spec.m;
    if m == 0.0 {
        return 0.0;
    }
    if tau <= m {
        1.0
    } else if tau >= 2.0 * m {
        0.0
    } else {
        0.5 * (1.0 + (std::f64::consts::PI * (tau - m) / m).cos())
    }
}

/// Apply the scattering (integral) part of the linearized operator to a
/// perturbation sampled over v-nodes.
pub fn apply_scattering(
    f: &[f64],
    ws: &CollisionWorkspace,
    tables: &EquilibriumTables,
) -> Vec<f64> {
    let vs: Vec<usize> = (0..ws.n_v).collect();
    scattering_apply(f, ws, tables, None, false, &vs)
}

/// Scattering restricted to small relative velocities by the cutoff
/// profile multiplying the kernel.
pub fn apply_scattering_small(
    f: &[f64],
    ws: &CollisionWorkspace,
    tables: &EquilibriumTables,
    spec: &CutoffSpec,
) -> Vec<f64> {
    let vs: Vec<usize> = (0..ws.n_v).collect();
    let spec = *spec;
    let cut = move |tau: f64| cutoff_profile(tau, &spec);
    scattering_apply(f, ws, tables, Some(&cut), false, &vs)
}

/// Remainder part, computed as an exact difference so the two pieces
/// recombine to the full scattering operator bitwise up to one rounding.
pub fn apply_scattering_remainder(
    f: &[f64],
    ws: &CollisionWorkspace,
    tables: &EquilibriumTables,
    spec: &CutoffSpec,
) -> Vec<f64> {
    let full = apply_scattering(f, ws, tables);
    let small = apply_scattering_small(f, ws, tables, spec);
    full.iter().zip(&small).map(|(a, b)| a - b).collect()
}

/// The full linearized operator: `frequency * f - scattering(f)` nodewise.
///
/// `freq` is the collision frequency table on the same grid.
pub fn apply_linearized(
    f: &[f64],
    freq: &[f64],
    ws: &CollisionWorkspace,
    tables: &EquilibriumTables,
) -> Vec<f64> {
    let kf = apply_scattering(f, ws, tables);
    f.iter()
        .zip(freq)
        .zip(&kf)
        .map(|((fi, nu), k)| nu * fi - k)
        .collect()
}

/// Scattering with the loss-row sign deliberately flipped; only for
/// verifying that the consistency check catches a wrong convention.
pub fn apply_scattering_sign_flipped(
    f: &[f64],
    ws: &CollisionWorkspace,
    tables: &EquilibriumTables,
) -> Vec<f64> {
    let vs: Vec<usize> = (0..ws.n_v).collect();
    scattering_apply(f, ws, tables, None, true, &vs)
}

/// Relative residual of the identity linking the nonlinear operator on the
/// full distribution to the fluctuation-form operators:
/// `C(mu + w f) = w (Gamma(f) - L f)` with `w` the fluctuation weight.
///
/// Both sides are evaluated with the same quadrature and the same
/// interpolation, so the residual measures only implementation
/// inconsistency plus roundoff.
pub fn decomposition_residual(
    f: &[f64],
    params: &ModelParams,
    ws: &CollisionWorkspace,
    tables: &EquilibriumTables,
    freq: &[f64],
    flip_scattering_sign: bool,
) -> Result<f64, CollisionError> {
    let n_v = ws.n_v;
    assert_eq!(f.len(), n_v);
    // Assemble F = mu + sqrt(mu_bar) f and reject inadmissible states.
    let values: Vec<f64> = (0..n_v)
        .map(|i| tables.mu[i] + tables.mu_bar_sqrt[i] * f[i])
        .collect();
    let field = DistributionField::new(values, 1, n_v, *params).expect("shape");
    let cap_tol = 1e-12 * params.pauli_cap().min(1e12).max(1.0);
    field.check_bounds(cap_tol)?;

    let lhs = collision_operator(&field, 0, ws, tables)?;
    let gamma = nonlinear_form(f, ws, tables, None);
    let kf = if flip_scattering_sign {
        apply_scattering_sign_flipped(f, ws, tables)
    } else {
        apply_scattering(f, ws, tables)
    };

    let mut scale = f64::MIN_POSITIVE;
    let mut worst = 0.0f64;
    for i in 0..n_v {
        let w = tables.mu_bar_sqrt[i];
        let rhs = w * (gamma[i] - (freq[i] * f[i] - kf[i]));
        let parts = lhs[i].abs().max((w * gamma[i]).abs());
        let parts = parts.max((w * freq[i] * f[i]).abs()).max((w * kf[i]).abs());
        // Natural quadrature magnitude keeps the normalization meaningful
        // for vanishing fluctuations.
        let parts = parts.max(freq[i] * tables.mu[i]);
        scale = scale.max(parts);
        worst = worst.max((lhs[i] - rhs).abs());
    }
    Ok(worst / scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_profile_values() {
        let spec = CutoffSpec::new(0.5);
        assert_eq!(cutoff_profile(0.25, &spec), 1.0);
        assert_eq!(cutoff_profile(1.5, &spec), 0.0);
        assert!((cutoff_profile(0.75, &spec) - 0.5).abs() < 1e-15);
        // Zero radius kills the cutoff part entirely.
        let z = CutoffSpec::new(0.0);
        assert_eq!(cutoff_profile(0.3, &z), 0.0);
    }

    #[test]
    fn cutoff_profile_monotone_on_ramp() {
        let spec = CutoffSpec::new(1.0);
        let mut prev = 1.0;
        for i in 0..=100 {
            let tau = 1.0 + i as f64 / 100.0;
            let c = cutoff_profile(tau, &spec);
            assert!((0.0..=1.0).contains(&c));
            assert!(c <= prev + 1e-15);
            prev = c;
        }
    }
}
