//! The closed-form equilibrium family, its square-root weight, the
//! Maxwellian comparison state, and the scale-dependent constants.

use crate::grid::VelocityGrid;
use crate::params::{velocity_weight, ModelParams};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EquilibriumError {
    #[error("equilibrium value underflowed to zero at node {node} (|v|^2 = {s})")]
    Underflow { node: usize, s: f64 },
}

/// Equilibrium density `1/(delta + rho e^{|v|^2/2})`.
///
/// Evaluated as `exp(-s/2 - ln(rho + delta e^{-s/2}))`, which stays stable
/// when `e^{|v|^2/2}` would overflow.
#[inline]
pub fn equilibrium_density(v: [f64; 3], delta: f64, rho: f64) -> f64 {
    let s = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    equilibrium_density_s(s, delta, rho)
}

#[inline]
pub fn equilibrium_density_s(s: f64, delta: f64, rho: f64) -> f64 {
    (-0.5 * s - (rho + delta * (-0.5 * s).exp()).ln()).exp()
}

/// The fluctuation weight `sqrt(mu (1 - delta mu))`, in closed form
/// `sqrt(rho) e^{|v|^2/4} / (delta + rho e^{|v|^2/2})`.
#[inline]
pub fn fluctuation_weight(v: [f64; 3], delta: f64, rho: f64) -> f64 {
    let s = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    fluctuation_weight_s(s, delta, rho)
}

#[inline]
pub fn fluctuation_weight_s(s: f64, delta: f64, rho: f64) -> f64 {
    (0.5 * rho.ln() - 0.25 * s - (rho + delta * (-0.5 * s).exp()).ln()).exp()
}

/// Maxwellian comparison state `e^{-|v|^2/2}`.
#[inline]
pub fn maxwellian(v: [f64; 3]) -> f64 {
    let s = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    (-0.5 * s).exp()
}

/// Closed-form constants attached to the equilibrium scale `rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoConstants {
    /// `rho^2 / (rho+1)^3`
    pub c1: f64,
    /// `(rho+1) / rho^2`
    pub c2: f64,
    /// `sqrt(rho) (rho+1) / rho^2`
    pub c3: f64,
    /// `sqrt(rho) (rho+1) / rho^3`
    pub c4: f64,
    /// `c2 + c3 + c4`
    pub c5: f64,
}

pub fn rho_constants(rho: f64) -> RhoConstants {
    assert!(rho > 0.0, "rho must be positive");
    let c1 = rho * rho / (rho + 1.0).powi(3);
    let c2 = (rho + 1.0) / (rho * rho);
    let c3 = rho.sqrt() * (rho + 1.0) / (rho * rho);
    let c4 = c3 / rho;
    RhoConstants {
        c1,
        c2,
        c3,
        c4,
        c5: c2 + c3 + c4,
    }
}

/// Node tables of the equilibrium family on a velocity lattice.
#[derive(Debug, Clone)]
pub struct EquilibriumTables {
    /// `mu(v)` per node.
    pub mu: Vec<f64>,
    /// `sqrt(mu (1 - delta mu))` per node.
    pub mu_bar_sqrt: Vec<f64>,
    /// Maxwellian `e^{-|v|^2/2}` per node.
    pub mu0: Vec<f64>,
    /// `(1 + |v|)^beta` per node.
    pub w_beta: Vec<f64>,
    /// `e^{|v|^2/2}` per node (kernel-loop helper).
    pub e_half: Vec<f64>,
    /// `1 / e^{|v|^2/2}` per node.
    pub inv_e_half: Vec<f64>,
    pub delta: f64,
    pub rho: f64,
}

/// Populate all equilibrium node tables.
pub fn build_tables(
    grid: &VelocityGrid,
    params: &ModelParams,
) -> Result<EquilibriumTables, EquilibriumError> {
    let n = grid.len();
    let mut mu = Vec::with_capacity(n);
    let mut mu_bar_sqrt = Vec::with_capacity(n);
    let mut mu0 = Vec::with_capacity(n);
    let mut w_beta = Vec::with_capacity(n);
    let mut e_half = Vec::with_capacity(n);
    let mut inv_e_half = Vec::with_capacity(n);
    for (j, &s) in grid.s.iter().enumerate() {
        let m = equilibrium_density_s(s, params.delta, params.rho);
        if m <= 0.0 || !m.is_finite() {
            return Err(EquilibriumError::Underflow { node: j, s });
        }
        mu.push(m);
        mu_bar_sqrt.push(fluctuation_weight_s(s, params.delta, params.rho));
        mu0.push((-0.5 * s).exp());
        w_beta.push(velocity_weight(grid.nodes[j], params.beta));
        e_half.push((0.5 * s).exp());
        inv_e_half.push((-0.5 * s).exp());
    }
    Ok(EquilibriumTables {
        mu,
        mu_bar_sqrt,
        mu0,
        w_beta,
        e_half,
        inv_e_half,
        delta: params.delta,
        rho: params.rho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ModelParams;

    #[test]
    fn density_values() {
        assert!((equilibrium_density([0.0; 3], 1.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((equilibrium_density([0.0; 3], 0.0, 1.0) - 1.0).abs() < 1e-15);
        // |v|^2 = 2 ln 3 makes the exponential equal 3.
        let s = 2.0 * 3.0f64.ln();
        assert!((equilibrium_density_s(s, 1.0, 1.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn weight_values_and_identity() {
        assert!((fluctuation_weight([0.0; 3], 1.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((fluctuation_weight([0.0; 3], 0.0, 1.0) - 1.0).abs() < 1e-15);
        // Cross-check against sqrt(mu (1 - delta mu)) on assorted points.
        for i in 0..50 {
            let v = [
                -4.0 + 0.17 * i as f64,
                1.0 - 0.08 * i as f64,
                0.5 * (i % 7) as f64,
            ];
            for &(d, r) in &[(0.0, 1.0), (0.5, 0.7), (1.0, 2.0)] {
                let m = equilibrium_density(v, d, r);
                let direct = (m * (1.0 - d * m)).sqrt();
                let closed = fluctuation_weight(v, d, r);
                assert!(
                    (closed - direct).abs() <= 1e-14 * direct.max(1e-300),
                    "mismatch at v={v:?} d={d} r={r}: {closed} vs {direct}"
                );
            }
        }
    }

    #[test]
    fn rho_constant_values() {
        let c = rho_constants(1.0);
        assert_eq!(c.c1, 0.125);
        assert_eq!(c.c2, 2.0);
        assert_eq!(c.c3, 2.0);
        assert_eq!(c.c4, 2.0);
        assert_eq!(c.c5, 6.0);
        let c2 = rho_constants(2.0);
        assert!((c2.c1 - 4.0 / 27.0).abs() < 1e-15);
        assert!((c2.c2 - 0.75).abs() < 1e-15);
        assert_eq!(c2.c5, c2.c2 + c2.c3 + c2.c4);
    }

    #[test]
    fn tables_sandwich_and_monotonicity() {
        let grid = VelocityGrid::new(5.0, 11).unwrap();
        for &(d, r) in &[(0.0, 1.0), (0.5, 0.5), (1.0, 1.0), (1.0, 2.0)] {
            let params = ModelParams::new(d, r, -1.0, 6.0).unwrap();
            let t = build_tables(&grid, &params).unwrap();
            let lo = 1.0 / (r + 1.0);
            let hi = 1.0 / r;
            for j in 0..grid.len() {
                assert!(t.mu[j] > 0.0 && t.mu[j] <= 1.0 / (d + r) * (1.0 + 1e-14));
                assert!(t.mu[j] >= lo * t.mu0[j] * (1.0 - 1e-13));
                assert!(t.mu[j] <= hi * t.mu0[j] * (1.0 + 1e-13));
                let m = t.mu[j];
                let direct = (m * (1.0 - d * m)).sqrt();
                assert!((t.mu_bar_sqrt[j] - direct).abs() <= 1e-14 * direct.max(1e-300));
            }
            // Strictly decreasing in |v| along the +x ray from the origin.
            let n = grid.n_per_axis;
            let mid = (n - 1) / 2;
            let mut prev = f64::INFINITY;
            for ix in mid..n {
                let j = grid.index_of([ix, mid, mid]);
                assert!(t.mu[j] < prev);
                prev = t.mu[j];
            }
        }
    }

    #[test]
    fn delta_zero_collapse() {
        let grid = VelocityGrid::new(5.0, 9).unwrap();
        let params = ModelParams::new(0.0, 2.0, -1.0, 6.0).unwrap();
        let t = build_tables(&grid, &params).unwrap();
        for j in 0..grid.len() {
            assert!((t.mu[j] - t.mu0[j] / 2.0).abs() <= 1e-15 * t.mu0[j]);
        }
        // Maximum of mu at v = 0 for the saturated case.
        let params1 = ModelParams::new(1.0, 1.0, -1.0, 6.0).unwrap();
        let t1 = build_tables(&grid, &params1).unwrap();
        let mid = grid.len() / 2;
        assert_eq!(t1.mu[mid], 0.5);
        assert!(t1.mu.iter().all(|&m| m <= 0.5));
    }
}
