//! Numerical stress tests of the model's structural inequalities, with
//! exact constants checked exactly and generic constants fitted and
//! reported.

use crate::collision::{
    collision_frequency_table, nonlinear_form, nonlinear_gain_form, CollisionWorkspace,
};
use crate::equilibrium::{
    build_tables, equilibrium_density, fluctuation_weight, maxwellian, rho_constants,
    EquilibriumTables,
};
use crate::field::DistributionField;
use crate::grid::{gauss_legendre, SphereQuadrature, VelocityGrid};
use crate::linearized::decomposition_residual;
use crate::params::{velocity_weight, ModelParams};
use crate::rng::CounterRng;
use crate::solver::IterationReport;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifierError {
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("collision error during verification: {0}")]
    Collision(#[from] crate::collision::CollisionError),
    #[error("solver error during verification: {0}")]
    Solver(#[from] crate::solver::SolverError),
}

/// Outcome of one inequality check.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub id: String,
    pub samples: u64,
    /// Largest left/right ratio with generic constants stripped.
    pub worst_ratio: f64,
    /// Fitted stand-in for the generic constant (1 for exact-constant
    /// checks).
    pub fitted_constant: f64,
    pub pass: bool,
    pub seed: u64,
    pub details: serde_json::Value,
}

/// Everything the grid-level checks need.
pub struct VerifyBundle<'a> {
    pub params: &'a ModelParams,
    pub grid: &'a VelocityGrid,
    pub tables: &'a EquilibriumTables,
    pub ws: &'a CollisionWorkspace,
}

/// Pointwise equilibrium-product bounds with the exact closed-form
/// constants; sampled over random (v, u, direction) triples.
pub fn check_pointwise_bounds(
    params: &ModelParams,
    v_max: f64,
    samples: u64,
    seed: u64,
) -> BoundReport {
    assert!(samples >= 1000, "statistical check needs >= 1000 samples");
    let (delta, rho) = (params.delta, params.rho);
    let c = rho_constants(rho);
    let rng = CounterRng::new(seed).stream(0x9bd1);
    let tol = 1e-12;
    let mut worst = 0.0f64;
    let mut violations = 0u64;
    let mut first_offender = None;
    for s in 0..samples {
        let draw = rng;
        let base = s * 9;
        let v = [
            lerp_unit(draw.u64_at(base), v_max),
            lerp_unit(draw.u64_at(base + 1), v_max),
            lerp_unit(draw.u64_at(base + 2), v_max),
        ];
        let u = [
            lerp_unit(draw.u64_at(base + 3), v_max),
            lerp_unit(draw.u64_at(base + 4), v_max),
            lerp_unit(draw.u64_at(base + 5), v_max),
        ];
        let z = lerp01(draw.u64_at(base + 6)) * 2.0 - 1.0;
        let phi = lerp01(draw.u64_at(base + 7)) * 2.0 * std::f64::consts::PI;
        let r = (1.0 - z * z).max(0.0).sqrt();
        let om = [r * phi.cos(), r * phi.sin(), z];
        let (vp, up) = crate::collision::post_collision(v, u, om);

        let mu_v = equilibrium_density(v, delta, rho);
        let mu_u = equilibrium_density(u, delta, rho);
        let mu_vp = equilibrium_density(vp, delta, rho);
        let mu_up = equilibrium_density(up, delta, rho);
        let mb_v = fluctuation_weight(v, delta, rho);
        let mb_u = fluctuation_weight(u, delta, rho);
        let mb_vp = fluctuation_weight(vp, delta, rho);
        let mb_up = fluctuation_weight(up, delta, rho);
        let m0_v = maxwellian(v);
        let m0_u = maxwellian(u);
        let m0_vp = maxwellian(vp);
        let m0_up = maxwellian(up);

        let e1 = mu_u - delta * mu_u * mu_up - delta * mu_u * mu_vp + delta * mu_up * mu_vp;
        let e2 = (mb_u / mb_v)
            * (mu_v - delta * mu_u * mu_up - delta * mu_u * mu_vp + delta * mu_up * mu_vp);
        let e3 = (mb_up / mb_v)
            * (mu_vp - delta * mu_vp * mu_u - delta * mu_vp * mu_v + delta * mu_u * mu_v);
        let e4 = (mb_vp / mb_v)
            * (mu_up - delta * mu_up * mu_u - delta * mu_up * mu_v + delta * mu_u * mu_v);

        let checks = [
            (e1, c.c2 * m0_u, Some(c.c1 * m0_u)),
            (e2, c.c2 * (m0_u * m0_v).sqrt(), None),
            (e3, c.c2 * (m0_u * m0_vp).sqrt(), None),
            (e4, c.c2 * (m0_u * m0_up).sqrt(), None),
        ];
        for (k, (lhs, upper, lower)) in checks.iter().enumerate() {
            let ratio = lhs / upper;
            worst = worst.max(ratio);
            if *lhs > upper * (1.0 + tol) {
                violations += 1;
                first_offender.get_or_insert((s, k, *lhs, *upper));
            }
            if let Some(lo) = lower {
                worst = worst.max(lo / lhs);
                if *lhs < lo * (1.0 - tol) {
                    violations += 1;
                    first_offender.get_or_insert((s, k, *lhs, *lo));
                }
            }
        }
    }
    BoundReport {
        id: "equilibrium-product-bounds".into(),
        samples,
        worst_ratio: worst,
        fitted_constant: 1.0,
        pass: violations == 0,
        seed,
        details: json!({
            "delta": delta,
            "rho": rho,
            "violations": violations,
            "first_offender": first_offender.map(|(s, k, lhs, b)| json!({
                "sample": s, "inequality": k, "lhs": lhs, "bound": b
            })),
        }),
    }
}

#[inline]
fn lerp01(u: u64) -> f64 {
    (u >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[inline]
fn lerp_unit(u: u64, v_max: f64) -> f64 {
    (lerp01(u) * 2.0 - 1.0) * v_max
}

/// Indices of the coarse lattice nodes inside a refined grid with the same
/// box and doubled resolution.
pub fn shared_node_indices(coarse: &VelocityGrid, fine: &VelocityGrid) -> Vec<usize> {
    assert_eq!(fine.n_per_axis, 2 * coarse.n_per_axis - 1);
    let n = coarse.n_per_axis;
    let mut out = Vec::with_capacity(coarse.len());
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                out.push(fine.index_of([2 * i, 2 * j, 2 * k]));
            }
        }
    }
    out
}

/// Two-sided collision-frequency envelope `C1 (1+|v|)^gamma <= nu <=
/// C2 (1+|v|)^gamma` with the generic factor fitted on the base grid and
/// checked for stability on a refined grid's shared nodes.
pub fn check_frequency_envelope(
    base: &VerifyBundle,
    fine: &VerifyBundle,
    seed: u64,
) -> BoundReport {
    let c = rho_constants(base.params.rho);
    let gamma = base.params.gamma;
    let fit = |grid: &VelocityGrid, nu: &[f64], nodes: &[usize]| -> f64 {
        let mut chat = 0.0f64;
        for (pos, &j) in nodes.iter().enumerate() {
            let env = (1.0 + grid.s[j].sqrt()).powf(gamma);
            let upper = nu[pos] / (c.c2 * env);
            let lower = c.c1 * env / nu[pos];
            chat = chat.max(upper).max(lower);
        }
        chat
    };
    let base_nodes: Vec<usize> = (0..base.grid.len()).collect();
    let nu_base = collision_frequency_table(base.tables, base.ws, None);
    let chat_base = fit(base.grid, &nu_base, &base_nodes);

    let shared = shared_node_indices(base.grid, fine.grid);
    let nu_fine = collision_frequency_table(fine.tables, fine.ws, Some(&shared));
    let chat_fine = fit(fine.grid, &nu_fine, &shared);

    let positive = nu_base.iter().all(|v| *v > 0.0) && nu_fine.iter().all(|v| *v > 0.0);
    let rel = (chat_fine / chat_base - 1.0).abs();
    BoundReport {
        id: "collision-frequency-envelope".into(),
        samples: (nu_base.len() + nu_fine.len()) as u64,
        worst_ratio: chat_base,
        fitted_constant: chat_base,
        pass: positive && chat_base.is_finite() && rel <= 0.2,
        seed,
        details: json!({
            "delta": base.params.delta,
            "rho": base.params.rho,
            "fitted_base": chat_base,
            "fitted_refined": chat_fine,
            "relative_change": rel,
            "strictly_positive": positive,
        }),
    }
}

/// Dedicated fine-lattice quadrature of the cutoff scattering part applied
/// to an analytic test function (no grid interpolation), restricted to the
/// cutoff support.
#[allow(clippy::too_many_arguments)]
fn cutoff_scattering_fine(
    v: [f64; 3],
    m: f64,
    h: f64,
    sphere: &SphereQuadrature,
    params: &ModelParams,
    f: &dyn Fn([f64; 3]) -> f64,
    corr: &dyn Fn([f64; 3], f64) -> f64,
) -> f64 {
    let (delta, rho, gamma) = (params.delta, params.rho, params.gamma);
    let reach = (2.0 * m / h).ceil() as i32;
    let mu_v = equilibrium_density(v, delta, rho);
    let mb_v = fluctuation_weight(v, delta, rho);
    let mut acc = 0.0;
    for dx in -reach..=reach {
        for dy in -reach..=reach {
            for dz in -reach..=reach {
                if dx == 0 && dy == 0 && dz == 0 {
                    continue;
                }
                let z = [dx as f64 * h, dy as f64 * h, dz as f64 * h];
                let nd = (z[0] * z[0] + z[1] * z[1] + z[2] * z[2]).sqrt();
                let chi = crate::linearized::cutoff_profile(nd, &crate::linearized::CutoffSpec::new(m));
                if chi == 0.0 {
                    continue;
                }
                let u = [v[0] + z[0], v[1] + z[1], v[2] + z[2]];
                let radial = nd.powf(gamma) * corr(z, h) * h * h * h * chi;
                let mu_u = equilibrium_density(u, delta, rho);
                let mb_u = fluctuation_weight(u, delta, rho);
                for (k, om) in sphere.nodes.iter().enumerate() {
                    let ct = (-(z[0] * om[0] + z[1] * om[1] + z[2] * om[2])) / nd;
                    let b = ct.abs();
                    if b == 0.0 {
                        continue;
                    }
                    let w = radial * b * sphere.weights[k];
                    let (vp, up) = crate::collision::post_collision(v, u, *om);
                    let mu_vp = equilibrium_density(vp, delta, rho);
                    let mu_up = equilibrium_density(up, delta, rho);
                    let mb_vp = fluctuation_weight(vp, delta, rho);
                    let mb_up = fluctuation_weight(up, delta, rho);
                    let a2 = 1.0 - delta * (mu_u + mu_v);
                    let dmu_uv = delta * mu_u * mu_v;
                    let beta1 = mu_vp * a2 + dmu_uv;
                    let beta2 = mu_up * a2 + dmu_uv;
                    let beta3 =
                        mu_v * (1.0 - delta * (mu_up + mu_vp)) + delta * mu_up * mu_vp;
                    acc += w
                        * (beta1 * (mb_up / mb_v) * f(up) + beta2 * (mb_vp / mb_v) * f(vp)
                            - beta3 * (mb_u / mb_v) * f(u));
                }
            }
        }
    }
    acc
}

/// Cutoff-decay check: `|K^m f| <= C m^{3+gamma} C2 e^{-|v|^2/20} |f|_inf`
/// across an m-sweep, with the rate in m fitted and the constant checked
/// for stability under halving the rule spacing.
///
/// The quadrature spacing scales with the cutoff radius (h = m/4), so
/// every sweep point resolves its own support equally; the rate is fitted
/// on the small-m points where the power law is the dominant behavior (at
/// m of order one the equilibrium weights already truncate the support).
pub fn check_cutoff_decay(params: &ModelParams, seed: u64) -> BoundReport {
    let sweep = [0.25, 0.5, 1.0, 2.0];
    let c2 = rho_constants(params.rho).c2;
    let gamma = params.gamma;
    let sphere = SphereQuadrature::new(4, 8).unwrap();
    // Deterministic v-subset along axes and diagonals.
    let mut vs: Vec<[f64; 3]> = vec![[0.0; 3]];
    for r in [0.5f64, 1.0, 1.5, 2.0, 3.0] {
        vs.push([r, 0.0, 0.0]);
        vs.push([0.0, r, 0.0]);
        vs.push([0.0, 0.0, r]);
        let d = r / 3f64.sqrt();
        vs.push([d, d, d]);
        vs.push([-d, d, -d]);
    }
    let test_fns: Vec<Box<dyn Fn([f64; 3]) -> f64>> = vec![
        Box::new(|_| 1.0),
        Box::new(|w: [f64; 3]| (-(w[0] * w[0] + w[1] * w[1] + w[2] * w[2]) / 8.0).exp()),
        Box::new(|w: [f64; 3]| (1.5 * w[0] - 0.7 * w[1] + 0.3 * w[2]).cos()),
    ];
    let corr = |z: [f64; 3], h: f64| -> f64 {
        let nd2 = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
        if nd2.sqrt() > 2.0 * h {
            1.0
        } else {
            cell_avg(z, h, gamma)
        }
    };
    let metric = |h: f64, m: f64| -> f64 {
        let mut q = 0.0f64;
        for v in &vs {
            let s = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
            for f in &test_fns {
                let val = cutoff_scattering_fine(*v, m, h, &sphere, params, f, &corr);
                q = q.max(val.abs() * (s / 20.0).exp() / c2);
            }
        }
        q
    };
    let q_sweep: Vec<f64> = sweep.iter().map(|&m| metric(m / 4.0, m)).collect();
    // Rate fitted on the asymptotic (smallest-m) pair; at cutoff radii of
    // order one the equilibrium weights already truncate the support and
    // the power law saturates. Wider fits are reported alongside.
    let slope_small = (q_sweep[1] / q_sweep[0]).ln() / (sweep[1] / sweep[0]).ln();
    let slope_three = fit_slope(&sweep[..3], &q_sweep[..3]);
    let slope_full = fit_slope(&sweep, &q_sweep);
    let chat: Vec<f64> = sweep
        .iter()
        .zip(&q_sweep)
        .map(|(m, q)| q / m.powf(3.0 + gamma))
        .collect();
    let chat_max = chat.iter().cloned().fold(0.0f64, f64::max);
    // Stability of the fitted constant under rule refinement at m = 1.
    let q_f = metric(0.125, 1.0);
    let rel = (q_f / q_sweep[2] - 1.0).abs();
    let expected = 3.0 + gamma;
    let pass = chat_max.is_finite() && (slope_small - expected).abs() <= 0.3 && rel <= 0.2;
    BoundReport {
        id: "cutoff-scattering-decay".into(),
        samples: (vs.len() * test_fns.len() * sweep.len()) as u64,
        worst_ratio: chat_max,
        fitted_constant: chat_max,
        pass,
        seed,
        details: json!({
            "delta": params.delta,
            "rho": params.rho,
            "m_sweep": sweep,
            "weighted_max": q_sweep,
            "slope": slope_small,
            "slope_three_point": slope_three,
            "slope_full_sweep": slope_full,
            "expected_slope": expected,
            "refinement_relative_change": rel,
        }),
    }
}

fn cell_avg(dv: [f64; 3], h: f64, gamma: f64) -> f64 {
    let (x, w) = gauss_legendre(20);
    let half = 0.5 * h;
    let mut acc = 0.0;
    for (ix, wx) in x.iter().zip(&w) {
        for (iy, wy) in x.iter().zip(&w) {
            for (iz, wz) in x.iter().zip(&w) {
                let z = [dv[0] + half * ix, dv[1] + half * iy, dv[2] + half * iz];
                acc += wx * wy * wz
                    * (z[0] * z[0] + z[1] * z[1] + z[2] * z[2]).powf(0.5 * gamma);
            }
        }
    }
    let nd2 = dv[0] * dv[0] + dv[1] * dv[1] + dv[2] * dv[2];
    acc * 0.125 / nd2.powf(0.5 * gamma)
}

/// Least-squares slope of log(y) against log(x).
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(_, yy)| **yy > 0.0)
        .map(|(xx, yy)| (xx.ln(), yy.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    sxy / sxx
}

/// Analytic bump specification: centers, widths, amplitudes.
#[derive(Debug, Clone)]
pub struct BumpField {
    specs: Vec<([f64; 3], f64, f64)>,
    scale: f64,
}

impl BumpField {
    /// Bumps carry the natural fluctuation decay `e^{-|v|^2/4}`, keeping
    /// the equilibrium-normalized ratio bounded over the whole box (the
    /// regime where the lattice operators are accurate).
    pub fn eval(&self, v: [f64; 3]) -> f64 {
        let s = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        let mut acc = 0.0;
        for (c, width, a) in &self.specs {
            let d2 = (v[0] - c[0]).powi(2) + (v[1] - c[1]).powi(2) + (v[2] - c[2]).powi(2);
            acc += a * (-d2 / (width * width)).exp();
        }
        self.scale * acc * (-0.25 * s).exp()
    }

    pub fn sample(&self, grid: &VelocityGrid) -> Vec<f64> {
        grid.nodes.iter().map(|v| self.eval(*v)).collect()
    }

    pub fn scaled(&self, mult: f64) -> BumpField {
        BumpField {
            specs: self.specs.clone(),
            scale: self.scale * mult,
        }
    }
}

/// Smooth deterministic fluctuation family, wide enough that the widest
/// production lattice spacing resolves every member (the sup-type fitted
/// statistics are meaningful only on resolved fields).
pub fn bump_family(seed: u64, count: usize, scale: f64) -> Vec<BumpField> {
    let mut out = Vec::with_capacity(count);
    let mut rng = CounterRng::new(seed).stream(0xfa111);
    for _ in 0..count {
        let specs: Vec<([f64; 3], f64, f64)> = (0..3)
            .map(|_| {
                (
                    [
                        rng.next_in(-1.0, 1.0),
                        rng.next_in(-1.0, 1.0),
                        rng.next_in(-1.0, 1.0),
                    ],
                    rng.next_in(2.2, 3.0),
                    rng.next_in(-1.0, 1.0),
                )
            })
            .collect();
        out.push(BumpField { specs, scale });
    }
    out
}

/// Nonlinear-form bound: `|w Gamma(f)| <= C C5 nu_ref (1 + |w f|) (|w f|^a
/// L1^(1/p) + |w f|^b L1^(1/5p))` with the generic factor fitted; checks
/// scaling robustness and refinement stability.
pub fn check_nonlinear_bound(
    base: &VerifyBundle,
    fine: &VerifyBundle,
    p: f64,
    seed: u64,
) -> Result<BoundReport, VerifierError> {
    let params = base.params;
    if p <= 3.0 / (3.0 + params.gamma) {
        return Err(VerifierError::Hypothesis(format!(
            "p = {p} must exceed 3/(3+gamma) = {}",
            3.0 / (3.0 + params.gamma)
        )));
    }
    let beta_min = 6f64.max(16.0 / (5.0 * p - 1.0));
    if params.beta <= beta_min {
        return Err(VerifierError::Hypothesis(format!(
            "beta = {} must exceed max(6, 16/(5p-1)) = {beta_min}",
            params.beta
        )));
    }
    let c5 = rho_constants(params.rho).c5;

    // Norms of the analytic field are evaluated once on the fine lattice
    // so both resolutions are measured against the same envelope.
    let envelope_of = |field: &BumpField| -> f64 {
        let samples = field.sample(fine.grid);
        let wsup = samples
            .iter()
            .zip(&fine.tables.w_beta)
            .map(|(a, w)| (a * w).abs())
            .fold(0.0f64, f64::max);
        let l1: f64 = samples.iter().map(|a| a.abs()).sum::<f64>() * fine.grid.cell_weight();
        (1.0 + wsup)
            * (wsup.powf((2.0 * p - 1.0) / p) * l1.powf(1.0 / p)
                + wsup.powf((10.0 * p - 1.0) / (5.0 * p)) * l1.powf(1.0 / (5.0 * p)))
    };

    // The fitted maximum runs over the resolved ball |v| <= 2/3 v_max and
    // over nodes where the form carries signal relative to its gain/loss
    // parts. Outside the ball the numerator decays below quadrature noise
    // while the velocity weight grows; at cancellation-dominated nodes the
    // value is a small difference of large parts and inherits their
    // quadrature error amplified, so neither reflects the constant.
    let ball = (2.0 * base.grid.v_max / 3.0).powi(2);
    let signal_floor = 0.3;
    let fitted = |bundle: &VerifyBundle, field: &BumpField, nodes: &[usize]| -> f64 {
        let f = field.sample(bundle.grid);
        let gamma_f = nonlinear_form(&f, bundle.ws, bundle.tables, Some(nodes));
        let gain_f = nonlinear_gain_form(&f, bundle.ws, bundle.tables, Some(nodes));
        let envelope = envelope_of(field);
        let mut chat = 0.0f64;
        for (pos, &j) in nodes.iter().enumerate() {
            if bundle.grid.s[j] > ball {
                continue;
            }
            let full = gamma_f[pos];
            let parts = gain_f[pos].abs() + (gain_f[pos] - full).abs();
            if full.abs() < signal_floor * parts {
                continue;
            }
            let wv = velocity_weight(bundle.grid.nodes[j], params.beta);
            let nu_ref = (1.0 + bundle.grid.s[j].sqrt()).powf(params.gamma);
            let lhs = (wv * full).abs();
            chat = chat.max(lhs / (nu_ref * envelope * c5));
        }
        chat
    };

    // Base family, each member normalized to a small weighted amplitude so
    // the quadratic part of the form dominates across the scaling sweep.
    let family: Vec<BumpField> = bump_family(seed, 3, 1.0)
        .into_iter()
        .map(|f| {
            let samples = f.sample(fine.grid);
            let wsup = samples
                .iter()
                .zip(&fine.tables.w_beta)
                .map(|(a, w)| (a * w).abs())
                .fold(0.0f64, f64::max);
            f.scaled(0.05 / wsup.max(1e-300))
        })
        .collect();
    let base_nodes: Vec<usize> = (0..base.grid.len()).collect();
    let mut chats = Vec::new();
    let mut scale_sets = Vec::new();
    for f in &family {
        let mut per_scale = Vec::new();
        for mult in [1.0, 2.0, 4.0] {
            per_scale.push(fitted(base, &f.scaled(mult), &base_nodes));
        }
        chats.push(per_scale[0]);
        scale_sets.push(per_scale);
    }
    let chat_base = chats.iter().cloned().fold(0.0f64, f64::max);
    let scale_ok = scale_sets.iter().all(|s| {
        let lo = s.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = s.iter().cloned().fold(0.0f64, f64::max);
        hi / lo < 2.0
    });

    // Refinement stability: the same analytic fields evaluated on the fine
    // grid at the shared lattice nodes.
    let shared = shared_node_indices(base.grid, fine.grid);
    let mut chat_fine = 0.0f64;
    for f in &family {
        chat_fine = chat_fine.max(fitted(fine, f, &shared));
    }
    let rel = (chat_fine / chat_base - 1.0).abs();
    let pass = chat_base.is_finite() && scale_ok && rel <= 0.2;
    Ok(BoundReport {
        id: "nonlinear-form-bound".into(),
        samples: (family.len() * 3) as u64,
        worst_ratio: chat_base * c5,
        fitted_constant: chat_base,
        pass,
        seed,
        details: json!({
            "delta": params.delta,
            "rho": params.rho,
            "p": p,
            "fitted_base": chat_base,
            "fitted_refined": chat_fine,
            "relative_change": rel,
            "scaling_robust": scale_ok,
            "fit_ball_radius": (2.0 * base.grid.v_max / 3.0),
            "note": "sup norms taken in v at each x and maximized over x, an upper bound for the per-x statement; fitted maximum restricted to the resolved velocity ball and to nodes where the form is not cancellation-dominated",
        }),
    })
}

/// Contraction check on measured iteration reports at the suggested
/// horizon and its halvings.
pub fn check_contraction(
    reports: &[(f64, Vec<IterationReport>)],
    horizon: f64,
    seed: u64,
) -> BoundReport {
    let mut all_below_one = true;
    let mut medians = Vec::new();
    let mut worst = 0.0f64;
    for (dt, reps) in reports {
        let mut ratios: Vec<f64> = reps.iter().flat_map(|r| r.ratios.clone()).collect();
        if (dt - horizon).abs() <= 1e-12 * horizon {
            for r in &ratios {
                worst = worst.max(*r);
                if *r >= 1.0 {
                    all_below_one = false;
                }
            }
        }
        ratios.sort_by(f64::total_cmp);
        medians.push(if ratios.is_empty() {
            f64::NAN
        } else {
            ratios[ratios.len() / 2]
        });
    }
    let monotone = medians.windows(2).all(|w| w[1] < w[0]);
    BoundReport {
        id: "damped-iteration-contraction".into(),
        samples: reports.iter().map(|(_, r)| r.len() as u64).sum(),
        worst_ratio: worst,
        fitted_constant: worst,
        pass: all_below_one && monotone,
        seed,
        details: json!({
            "dts": reports.iter().map(|(dt, _)| *dt).collect::<Vec<_>>(),
            "median_ratios": medians,
            "worst_ratio_at_horizon": worst,
            "medians_decrease": monotone,
        }),
    }
}

/// Classical-limit check: distance of the quantum operator from the
/// classical one shrinks linearly in the quantum parameter.
pub fn check_classical_limit(
    base_params: &ModelParams,
    grid: &VelocityGrid,
    sphere_ws: &CollisionWorkspace,
    seed: u64,
) -> Result<BoundReport, VerifierError> {
    // Fixed admissible bump, independent of delta.
    let field_vals: Vec<f64> = grid
        .nodes
        .iter()
        .map(|v| {
            let d2 = (v[0] - 0.5).powi(2) + v[1] * v[1] + v[2] * v[2];
            0.8 * (-d2).exp()
        })
        .collect();
    let deltas = [0.0, 1e-3, 1e-2, 1e-1, 1.0];
    let mut outputs = Vec::new();
    for &d in &deltas {
        let params = ModelParams {
            delta: d,
            ..*base_params
        };
        let tables = build_tables(grid, &params).expect("tables");
        let field =
            DistributionField::new(field_vals.clone(), 1, grid.len(), params).expect("shape");
        let c = crate::collision::collision_operator(&field, 0, sphere_ws, &tables)?;
        outputs.push(c);
    }
    let diffs: Vec<f64> = deltas[1..]
        .iter()
        .enumerate()
        .map(|(i, _)| {
            outputs[i + 1]
                .iter()
                .zip(&outputs[0])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max)
        })
        .collect();
    let slope = fit_slope(&deltas[1..], &diffs);
    let pass = (0.8..=1.2).contains(&slope);
    Ok(BoundReport {
        id: "classical-limit-slope".into(),
        samples: deltas.len() as u64,
        worst_ratio: slope,
        fitted_constant: diffs.last().copied().unwrap_or(f64::NAN),
        pass,
        seed,
        details: json!({
            "deltas": deltas[1..].to_vec(),
            "sup_distances": diffs,
            "slope": slope,
        }),
    })
}

/// Residual of the identity linking the nonlinear operator to its
/// fluctuation form, over random admissible fields; the sign hook flips
/// the scattering loss row to prove the check detects a wrong convention.
pub fn check_decomposition(
    bundle: &VerifyBundle,
    trials: usize,
    seed: u64,
    flip_sign_test_hook: bool,
) -> Result<BoundReport, VerifierError> {
    let freq = collision_frequency_table(bundle.tables, bundle.ws, None);
    let mut rng = CounterRng::new(seed).stream(0xdec0);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let f = admissible_fluctuation(bundle, &mut rng, 0.4);
        let r = decomposition_residual(
            &f,
            bundle.params,
            bundle.ws,
            bundle.tables,
            &freq,
            flip_sign_test_hook,
        )?;
        worst = worst.max(r);
    }
    Ok(BoundReport {
        id: "fluctuation-decomposition-identity".into(),
        samples: trials as u64,
        worst_ratio: worst,
        fitted_constant: worst,
        pass: worst <= 1e-10,
        seed,
        details: json!({
            "delta": bundle.params.delta,
            "rho": bundle.params.rho,
            "worst_residual": worst,
            "tolerance": 1e-10,
            "sign_flipped": flip_sign_test_hook,
        }),
    })
}

/// Random admissible fluctuation with a wide margin to both occupancy
/// bounds.
pub fn admissible_fluctuation(
    bundle: &VerifyBundle,
    rng: &mut CounterRng,
    amplitude: f64,
) -> Vec<f64> {
    let grid = bundle.grid;
    let tables = bundle.tables;
    let cap = bundle.params.pauli_cap();
    let mut f = vec![0.0; grid.len()];
    let specs: Vec<([f64; 3], f64, f64)> = (0..3)
        .map(|_| {
            (
                [
                    rng.next_in(-1.5, 1.5),
                    rng.next_in(-1.5, 1.5),
                    rng.next_in(-1.5, 1.5),
                ],
                rng.next_in(0.5, 1.5),
                rng.next_in(-1.0, 1.0),
            )
        })
        .collect();
    for (j, v) in grid.nodes.iter().enumerate() {
        let mut acc = 0.0;
        for (c, width, a) in &specs {
            let d2 = (v[0] - c[0]).powi(2) + (v[1] - c[1]).powi(2) + (v[2] - c[2]).powi(2);
            acc += a * (-d2 / (width * width)).exp();
        }
        f[j] = acc;
    }
    let mut limit = f64::INFINITY;
    for j in 0..grid.len() {
        let w = tables.mu_bar_sqrt[j];
        if w * f[j].abs() > 0.0 {
            let room = if f[j] < 0.0 {
                tables.mu[j] * 0.9
            } else if cap.is_finite() {
                (cap - tables.mu[j]) * 0.5
            } else {
                tables.mu[j] * 10.0
            };
            limit = limit.min(room / (w * f[j].abs()));
        }
    }
    let scale = amplitude * limit.min(1.0);
    f.iter_mut().for_each(|x| *x *= scale);
    f
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_fit_recovers_power_law() {
        let x: [f64; 4] = [0.25, 0.5, 1.0, 2.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v.powf(2.0)).collect();
        assert!((fit_slope(&x, &y) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn pointwise_bounds_hold_with_exact_constants() {
        for &(delta, rho) in &[(0.0, 1.0), (1.0, 1.0), (0.5, 2.0), (1.0, 0.5)] {
            let params = ModelParams::new(delta, rho, -1.0, 6.0).unwrap();
            let rep = check_pointwise_bounds(&params, 6.0, 20_000, 42);
            assert!(rep.pass, "{delta},{rho}: {:?}", rep.details);
            assert!(rep.worst_ratio <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn pointwise_bounds_closed_form_at_origin() {
        // All velocities zero: the first expression is mu(0)(1 - delta mu(0)).
        let (delta, rho): (f64, f64) = (1.0, 1.0);
        let mu0: f64 = 1.0 / (delta + rho);
        let e1 = mu0 - delta * mu0 * mu0 - delta * mu0 * mu0 + delta * mu0 * mu0;
        assert!((e1 - 0.25).abs() < 1e-15);
        let c = rho_constants(rho);
        assert!(c.c1 * 1.0 <= e1 && e1 <= c.c2 * 1.0);
    }

    #[test]
    fn pointwise_bounds_reproducible() {
        let params = ModelParams::new(1.0, 1.0, -1.0, 6.0).unwrap();
        let a = check_pointwise_bounds(&params, 6.0, 2000, 7);
        let b = check_pointwise_bounds(&params, 6.0, 2000, 7);
        assert_eq!(a.worst_ratio, b.worst_ratio);
        let c = check_pointwise_bounds(&params, 6.0, 2000, 8);
        assert_ne!(a.worst_ratio, c.worst_ratio);
    }

    #[test]
    fn shared_nodes_align() {
        let coarse = VelocityGrid::new(3.0, 7).unwrap();
        let fine = VelocityGrid::new(3.0, 13).unwrap();
        let idx = shared_node_indices(&coarse, &fine);
        for (c, &fi) in idx.iter().enumerate() {
            for a in 0..3 {
                assert!((coarse.nodes[c][a] - fine.nodes[fi][a]).abs() < 1e-14);
            }
        }
    }
}
