//! Dynamical behavior of the damped-iteration integrator on small grids:
//! fixed point at equilibrium, contraction within the suggested horizon,
//! occupancy bounds, entropy direction, conservation with the
//! moment-matching fix, and the companion-occupancy consistency check.

use qkinetic::collision::CollisionWorkspace;
use qkinetic::equilibrium::build_tables;
use qkinetic::field::DistributionField;
use qkinetic::grid::{SpatialGrid, SphereQuadrature, VelocityGrid};
use qkinetic::params::ModelParams;
use qkinetic::solver::{
    companion_defect, fluctuation_values, solve_window, suggest_horizon, time_march, SolverConfig,
    SolverContext,
};

struct Setup {
    grid: VelocityGrid,
    spatial: SpatialGrid,
    params: ModelParams,
    tables: qkinetic::equilibrium::EquilibriumTables,
    ws: CollisionWorkspace,
}

fn setup(delta: f64, rho: f64, n: usize, v_max: f64) -> Setup {
    let grid = VelocityGrid::new(v_max, n).unwrap();
    let sphere = SphereQuadrature::new(2, 4).unwrap();
    let params = ModelParams::new(delta, rho, -1.0, 6.0).unwrap();
    let tables = build_tables(&grid, &params).unwrap();
    let ws = CollisionWorkspace::new(&grid, &sphere, params.gamma, 1.0).unwrap();
    Setup {
        grid,
        spatial: SpatialGrid::homogeneous(),
        params,
        tables,
        ws,
    }
}

impl Setup {
    fn ctx(&self) -> SolverContext<'_> {
        SolverContext {
            params: &self.params,
            grid: &self.grid,
            spatial: &self.spatial,
            tables: &self.tables,
            ws: &self.ws,
        }
    }

    fn equilibrium_field(&self) -> DistributionField {
        DistributionField::new(
            self.tables.mu.clone(),
            1,
            self.grid.len(),
            self.params,
        )
        .unwrap()
    }

    /// Admissible perturbed state `mu + sqrt(mu_bar) f` with the weighted
    /// amplitude of `f` normalized to `amp`.
    fn perturbed_field(&self, amp: f64) -> DistributionField {
        let bump: Vec<f64> = (0..self.grid.len())
            .map(|j| {
                (-self.grid.s[j] / 2.5).exp() * (1.0 + 0.5 * (self.grid.nodes[j][0]).sin())
            })
            .collect();
        let wnorm = bump
            .iter()
            .zip(&self.tables.w_beta)
            .map(|(b, w)| (b * w).abs())
            .fold(0.0f64, f64::max);
        let scale = amp / wnorm;
        let vals: Vec<f64> = (0..self.grid.len())
            .map(|j| {
                (self.tables.mu[j] + scale * self.tables.mu_bar_sqrt[j] * bump[j])
                    .max(0.0)
                    .min(self.params.pauli_cap())
            })
            .collect();
        DistributionField::new(vals, 1, self.grid.len(), self.params).unwrap()
    }
}

#[test]
fn equilibrium_is_a_fixed_point_over_windows() {
    let s = setup(1.0, 1.0, 7, 3.0);
    let ctx = s.ctx();
    let f0 = s.equilibrium_field();
    let config = SolverConfig {
        t_end: f64::INFINITY,
        max_windows: 10,
        dt: None,
        ..Default::default()
    };
    let traj = time_march(&f0, &config, &ctx).unwrap();
    assert_eq!(traj.fields.len(), 11);
    let worst = traj
        .fields
        .iter()
        .map(|f| {
            f.values
                .iter()
                .zip(&s.tables.mu)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max)
        })
        .fold(0.0f64, f64::max);
    assert!(worst <= 1e-9, "drift from equilibrium {worst:.3e}");
    // Converges almost immediately at the fixed point.
    for rep in &traj.reports {
        assert!(rep.converged);
        assert!(rep.iterations <= 2, "iterations {}", rep.iterations);
    }
}

#[test]
fn contraction_within_horizon_and_positivity() {
    let s = setup(1.0, 1.0, 7, 3.0);
    let ctx = s.ctx();
    let f0 = s.perturbed_field(0.3);
    let horizon = suggest_horizon(&f0, &ctx, 1.0 / 16.0).unwrap();
    let config = SolverConfig::default();
    let win = solve_window(&f0, horizon, &config, &ctx).unwrap();
    assert!(win.report.converged);
    // Measured ratios all strictly below one.
    assert!(!win.report.ratios.is_empty());
    for (i, r) in win.report.ratios.iter().enumerate() {
        assert!(*r < 1.0, "ratio {i} = {r}");
    }
    // Every slice of the converged window respects the occupancy bounds.
    for sl in &win.slices {
        sl.check_bounds(0.0).unwrap();
    }
    assert_eq!(win.report.clamp_events, 0, "no clamping expected here");
}

#[test]
fn ratios_shrink_as_dt_shrinks() {
    let s = setup(1.0, 1.0, 7, 3.0);
    let ctx = s.ctx();
    let f0 = s.perturbed_field(0.3);
    let horizon = suggest_horizon(&f0, &ctx, 1.0 / 16.0).unwrap();
    let config = SolverConfig::default();
    let median = |dt: f64| -> f64 {
        let win = solve_window(&f0, dt, &config, &ctx).unwrap();
        let mut r = win.report.ratios.clone();
        r.sort_by(f64::total_cmp);
        r[r.len() / 2]
    };
    let m1 = median(horizon);
    let m2 = median(horizon / 2.0);
    let m4 = median(horizon / 4.0);
    assert!(m2 < m1, "medians {m1} {m2} {m4}");
    assert!(m4 < m2, "medians {m1} {m2} {m4}");
}

#[test]
fn entropy_monotone_and_taylor_chain_on_trajectory() {
    let s = setup(1.0, 1.0, 9, 3.5);
    let ctx = s.ctx();
    let f0 = s.perturbed_field(0.25);
    let config = SolverConfig {
        t_end: f64::INFINITY,
        max_windows: 6,
        conservative_fix: true,
        ..Default::default()
    };
    let traj = time_march(&f0, &config, &ctx).unwrap();
    let e0 = traj.records[0].e_functional;
    let scale = 1.0 + traj.records[0].entropy.abs() + e0.abs();
    for k in 1..traj.records.len() {
        let dh = traj.records[k].entropy - traj.records[k - 1].entropy;
        assert!(
            dh <= 1e-8 * scale,
            "entropy rose by {dh:.3e} at window {k} (scale {scale:.3e})"
        );
        assert!(
            traj.records[k].taylor_defect <= e0 * (1.0 + 1e-9) + 1e-14,
            "taylor defect {:.6e} above initial functional {:.6e}",
            traj.records[k].taylor_defect,
            e0
        );
        // The combined entropy-energy functional is the dissipated quantity.
        assert!(traj.records[k].e_functional <= traj.records[k - 1].e_functional + 1e-12);
    }
    // Entropy genuinely decreases on this perturbed run.
    assert!(traj.records.last().unwrap().entropy < traj.records[0].entropy);
}

#[test]
fn conservative_fix_pins_defect_moments() {
    let s = setup(1.0, 1.0, 7, 3.0);
    let ctx = s.ctx();
    let f0 = s.perturbed_field(0.3);
    let config = SolverConfig {
        t_end: f64::INFINITY,
        max_windows: 4,
        conservative_fix: true,
        ..Default::default()
    };
    let traj = time_march(&f0, &config, &ctx).unwrap();
    let r0 = &traj.records[0];
    for r in &traj.records[1..] {
        assert!((r.mass_defect - r0.mass_defect).abs() <= 1e-12);
        assert!((r.energy_defect - r0.energy_defect).abs() <= 1e-12);
        for a in 0..3 {
            assert!((r.momentum_defect[a] - r0.momentum_defect[a]).abs() <= 1e-12);
        }
    }
}

#[test]
fn companion_consistency_small_and_refines() {
    let s = setup(1.0, 1.0, 7, 3.0);
    let ctx = s.ctx();
    let f0 = s.perturbed_field(0.3);
    let horizon = suggest_horizon(&f0, &ctx, 1.0 / 16.0).unwrap();
    let defect_at = |substeps: usize| -> f64 {
        let config = SolverConfig {
            substeps,
            ..Default::default()
        };
        let win = solve_window(&f0, horizon, &config, &ctx).unwrap();
        companion_defect(&win, &f0, horizon, substeps, &ctx)
            .unwrap()
            .expect("quantum case")
    };
    let d2 = defect_at(2);
    let d8 = defect_at(8);
    assert!(d2 < 1e-4, "companion defect {d2:.3e}");
    assert!(d8 < d2, "defect should shrink under substep refinement: {d8:.3e} vs {d2:.3e}");

    // Classical case reports not-applicable.
    let s0 = setup(0.0, 1.0, 7, 3.0);
    let ctx0 = s0.ctx();
    let f00 = s0.perturbed_field(0.3);
    let config = SolverConfig::default();
    let win0 = solve_window(&f00, horizon, &config, &ctx0).unwrap();
    assert!(companion_defect(&win0, &f00, horizon, 4, &ctx0)
        .unwrap()
        .is_none());
}

#[test]
fn equilibrium_companion_defect_tiny() {
    let s = setup(1.0, 1.0, 7, 3.0);
    let ctx = s.ctx();
    let f0 = s.equilibrium_field();
    let config = SolverConfig::default();
    let dt = 0.01;
    let win = solve_window(&f0, dt, &config, &ctx).unwrap();
    let d = companion_defect(&win, &f0, dt, config.substeps, &ctx)
        .unwrap()
        .unwrap();
    assert!(d <= 1e-10, "companion defect at equilibrium {d:.3e}");
}

#[test]
fn oversized_window_converges_or_fails_gracefully() {
    let s = setup(1.0, 1.0, 7, 3.0);
    let ctx = s.ctx();
    let f0 = s.perturbed_field(0.3);
    let horizon = suggest_horizon(&f0, &ctx, 1.0 / 16.0).unwrap();
    let config = SolverConfig {
        picard_max_iters: 30,
        ..Default::default()
    };
    match solve_window(&f0, 100.0 * horizon, &config, &ctx) {
        Ok(win) => assert!(win.report.converged),
        Err(qkinetic::solver::SolverError::NoConvergence { report, .. }) => {
            assert_eq!(report.iterations, 30);
        }
        Err(other) => panic!("unexpected failure mode: {other}"),
    }
}

#[test]
fn weighted_norm_of_fluctuation_vanishes_at_equilibrium() {
    let s = setup(0.5, 2.0, 7, 3.0);
    let f0 = s.equilibrium_field();
    let fl = fluctuation_values(&f0, &s.tables);
    assert!(fl.iter().all(|v| v.abs() < 1e-14));
}
