//! Inner quadrature loops shared by the collision-type operators.
//!
//! Every pass walks the same (u, omega) sample set for each output v-node.
//! Off-grid values at the post-collision points are produced by trilinear
//! interpolation of the equilibrium-normalized ratio field, multiplied back
//! by the closed-form equilibrium; this reproduces the equilibrium exactly,
//! which is what keeps the discrete gain and loss in pointwise balance at
//! the fixed point.
//!
//! The nonlinear pass iterates offset-major: for a fixed (lattice offset,
//! direction) pair the stencil geometry is constant, so the box interior
//! runs a branch-free unit-stride sweep and only the boundary shell pays
//! for clamping. Partial outputs per offset chunk are combined in a fixed
//! order, so results do not depend on the thread count.

use super::workspace::{tri_gather, CollisionWorkspace, OffsetEntry};
use crate::equilibrium::EquilibriumTables;
use rayon::prelude::*;

/// Per-node tables a pass needs besides the workspace.
pub(crate) struct PassTables<'a> {
    /// `e^{|v|^2/2}` per node.
    pub e: &'a [f64],
    /// `e^{-|v|^2/2}` per node.
    pub inv_e: &'a [f64],
    /// `delta + rho e^{|v|^2/2}` per node.
    pub p: &'a [f64],
}

impl<'a> PassTables<'a> {
    pub fn from_equilibrium(t: &'a EquilibriumTables, p_node: &'a [f64]) -> Self {
        PassTables {
            e: &t.e_half,
            inv_e: &t.inv_e_half,
            p: p_node,
        }
    }
}

/// Build `delta + rho e^{|v|^2/2}` per node.
pub(crate) fn p_node_table(tables: &EquilibriumTables, delta: f64, rho: f64) -> Vec<f64> {
    tables.e_half.iter().map(|e| delta + rho * e).collect()
}

/// Outputs of the nonlinear pass over one spatial slice.
pub(crate) struct PauliPassOut {
    /// Full collision operator, gain minus loss assembled per sample.
    pub collision: Vec<f64>,
    /// Gain part of the damped splitting.
    pub gain: Vec<f64>,
    /// Damping coefficient of the splitting.
    pub damping: Vec<f64>,
    /// Companion gain (drives the complementary occupancy).
    pub companion_gain: Vec<f64>,
    /// Interpolation clamp events against the occupancy cap.
    pub clamp_events: u64,
}

struct PartialOut {
    c: Vec<f64>,
    c1: Vec<f64>,
    g1: Vec<f64>,
    c2: Vec<f64>,
    clamps: u64,
}

impl PartialOut {
    fn new(n_v: usize, full: bool) -> Self {
        let aux = if full { n_v } else { 0 };
        PartialOut {
            c: vec![0.0; aux],
            c1: vec![0.0; n_v],
            g1: vec![0.0; n_v],
            c2: vec![0.0; aux],
            clamps: 0,
        }
    }
}

/// Nonlinear pass: the collision operator and its gain/damping splitting
/// for one distribution slice `f` (values over v-nodes).
///
/// `FULL` additionally assembles the per-sample collision operator and the
/// companion gain; the damped iteration only needs the gain/damping pair.
pub(crate) fn pauli_pass<const FULL: bool>(
    ws: &CollisionWorkspace,
    tabs: &PassTables,
    f: &[f64],
    delta: f64,
    rho: f64,
) -> PauliPassOut {
    let n_v = ws.n_v;
    debug_assert_eq!(f.len(), n_v);
    let ratio: Vec<f64> = (0..n_v).map(|i| f[i] * tabs.p[i]).collect();
    let pauli: Vec<f64> = f.iter().map(|&x| 1.0 - delta * x).collect();

    let chunk = (ws.offsets.len() / 96).max(64);
    let partials: Vec<PartialOut> = ws
        .offsets
        .par_chunks(chunk)
        .map(|offs| {
            let mut part = PartialOut::new(n_v, FULL);
            for off in offs {
                pauli_offset_block::<FULL>(ws, tabs, &ratio, f, &pauli, delta, rho, off, &mut part);
            }
            part
        })
        .collect();

    let mut out = PauliPassOut {
        collision: vec![0.0; if FULL { n_v } else { 0 }],
        gain: vec![0.0; n_v],
        damping: vec![0.0; n_v],
        companion_gain: vec![0.0; if FULL { n_v } else { 0 }],
        clamp_events: 0,
    };
    for p in partials {
        for i in 0..n_v {
            out.gain[i] += p.c1[i];
            out.damping[i] += p.g1[i];
        }
        if FULL {
            for i in 0..n_v {
                out.collision[i] += p.c[i];
                out.companion_gain[i] += p.c2[i];
            }
        }
        out.clamp_events += p.clamps;
    }
    out
}

/// Axis range of v-lattice indices for which the stencil cell around
/// `v + shift` lies fully inside the box.
#[inline(always)]
fn interior_range(fl: i32, n: i32) -> (i32, i32) {
    ((-fl).max(0), (n - 2 - fl).min(n - 1))
}

#[inline(always)]
fn shift_range(r: (i32, i32), by: i32) -> (i32, i32) {
    (r.0 + by, r.1 + by)
}

#[inline(always)]
fn intersect3(a: (i32, i32), b: (i32, i32), c: (i32, i32)) -> (i32, i32) {
    (a.0.max(b.0).max(c.0), a.1.min(b.1).min(c.1))
}

#[allow(clippy::too_many_arguments)]
fn pauli_offset_block<const FULL: bool>(
    ws: &CollisionWorkspace,
    tabs: &PassTables,
    ratio: &[f64],
    f: &[f64],
    pauli: &[f64],
    delta: f64,
    rho: f64,
    off: &OffsetEntry,
    part: &mut PartialOut,
) {
    let n = ws.n as i32;
    // v-range keeping u = v + offset inside the box.
    let ux = ((-off.dx).max(0), (n - 1 - off.dx).min(n - 1));
    let uy = ((-off.dy).max(0), (n - 1 - off.dy).min(n - 1));
    let uz = ((-off.dz).max(0), (n - 1 - off.dz).min(n - 1));
    if ux.0 > ux.1 || uy.0 > uy.1 || uz.0 > uz.1 {
        return;
    }
    let quantum = delta > 0.0;

    for k in 0..ws.n_om {
        let (t, w) = ws.t_w_dense(off.dense, k);
        if w == 0.0 {
            continue;
        }
        let oh = ws.om_h_of(k);
        // Stencil shifts in lattice units: v' = v + t omega, u' = u - t omega.
        let sv = [t * oh[0], t * oh[1], t * oh[2]];
        let fl_vp = [
            sv[0].floor() as i32,
            sv[1].floor() as i32,
            sv[2].floor() as i32,
        ];
        let fr_vp = [
            sv[0] - fl_vp[0] as f64,
            sv[1] - fl_vp[1] as f64,
            sv[2] - fl_vp[2] as f64,
        ];
        let fl_up = [
            (-sv[0]).floor() as i32,
            (-sv[1]).floor() as i32,
            (-sv[2]).floor() as i32,
        ];
        let fr_up = [
            -sv[0] - fl_up[0] as f64,
            -sv[1] - fl_up[1] as f64,
            -sv[2] - fl_up[2] as f64,
        ];
        let ix = intersect3(
            ux,
            interior_range(fl_vp[0], n),
            shift_range(interior_range(fl_up[0], n), -off.dx),
        );
        let iy = intersect3(
            uy,
            interior_range(fl_vp[1], n),
            shift_range(interior_range(fl_up[1], n), -off.dy),
        );
        let iz = intersect3(
            uz,
            interior_range(fl_vp[2], n),
            shift_range(interior_range(fl_up[2], n), -off.dz),
        );
        let rel_vp = (fl_vp[0] * n + fl_vp[1]) * n + fl_vp[2];
        let rel_up = ((off.dx + fl_up[0]) * n + off.dy + fl_up[1]) * n + off.dz + fl_up[2];

        let ctx = LineCtx {
            t,
            w,
            omega: ws.omega(k),
            oh: [oh[0], oh[1], oh[2]],
            rel_vp,
            rel_up,
            fr_vp,
            fr_up,
        };

        for vx in ux.0..=ux.1 {
            let fast_x = vx >= ix.0 && vx <= ix.1;
            for vy in uy.0..=uy.1 {
                let line = ((vx * n + vy) * n) as usize;
                // Post-collision energies for the whole z-line, shared by
                // the interior sweep and the boundary samples.
                let mut eup_line = [0.0f64; MAX_AXIS_NODES];
                if quantum {
                    fill_eup_line(ws, off, &ctx, vx, vy, uz, &mut eup_line);
                }
                let fast_xy = fast_x && vy >= iy.0 && vy <= iy.1 && iz.0 <= iz.1;
                if fast_xy {
                    for vz in uz.0..iz.0 {
                        sample_scalar::<FULL>(
                            ws, tabs, ratio, f, pauli, delta, rho, quantum, off, &ctx, line, vx,
                            vy, vz, eup_line[(vz - uz.0) as usize], part,
                        );
                    }
                    if quantum {
                        fast_line_quantum::<FULL>(
                            ws, tabs, ratio, f, pauli, delta, rho, off, &ctx, line, iz,
                            &eup_line[(iz.0 - uz.0) as usize..], part,
                        );
                    } else {
                        fast_line_classical::<FULL>(
                            ws, tabs, ratio, f, rho, off, &ctx, line, iz, part,
                        );
                    }
                    for vz in (iz.1 + 1)..=uz.1 {
                        sample_scalar::<FULL>(
                            ws, tabs, ratio, f, pauli, delta, rho, quantum, off, &ctx, line, vx,
                            vy, vz, eup_line[(vz - uz.0) as usize], part,
                        );
                    }
                } else {
                    for vz in uz.0..=uz.1 {
                        sample_scalar::<FULL>(
                            ws, tabs, ratio, f, pauli, delta, rho, quantum, off, &ctx, line, vx,
                            vy, vz, eup_line[(vz - uz.0) as usize], part,
                        );
                    }
                }
            }
        }
    }
}

/// Fill `exp(|u'|^2/2)` for one z-line via a double geometric recurrence;
/// the z-component of u' advances by h per lattice step.
#[inline(always)]
fn fill_eup_line(
    ws: &CollisionWorkspace,
    off: &OffsetEntry,
    ctx: &LineCtx,
    vx: i32,
    vy: i32,
    uz: (i32, i32),
    buf: &mut [f64; MAX_AXIS_NODES],
) {
    let h = ws.h;
    let half = 0.5 * (ws.n as f64 - 1.0);
    let upx = (vx as f64 - half) * h + off.dx as f64 * h - ctx.t * ctx.omega[0];
    let upy = (vy as f64 - half) * h + off.dy as f64 * h - ctx.t * ctx.omega[1];
    let upz0 = (uz.0 as f64 - half) * h + off.dz as f64 * h - ctx.t * ctx.omega[2];
    let mut e_run = (0.5 * (upx * upx + upy * upy + upz0 * upz0)).exp();
    let mut r_run = (h * upz0 + 0.5 * h * h).exp();
    let g_step = (h * h).exp();
    let len = (uz.1 - uz.0 + 1) as usize;
    for e in buf.iter_mut().take(len) {
        *e = e_run;
        e_run *= r_run;
        r_run *= g_step;
    }
}

struct LineCtx {
    t: f64,
    w: f64,
    omega: [f64; 3],
    oh: [f64; 3],
    rel_vp: i32,
    rel_up: i32,
    fr_vp: [f64; 3],
    fr_up: [f64; 3],
}

/// Branch-free interior sweep along one z-line, saturated-gas kernel.
#[allow(clippy::too_many_arguments)]
#[inline(always)]
fn fast_line_quantum<const FULL: bool>(
    ws: &CollisionWorkspace,
    tabs: &PassTables,
    ratio: &[f64],
    f: &[f64],
    pauli: &[f64],
    delta: f64,
    rho: f64,
    off: &OffsetEntry,
    ctx: &LineCtx,
    line: usize,
    iz: (i32, i32),
    eup: &[f64],
    part: &mut PartialOut,
) {
    let n = ws.n;
    let n2 = n * n;
    let len = (iz.1 - iz.0 + 1) as usize;
    let v0 = line + iz.0 as usize;
    let u0 = (v0 as i32 + off.lin) as usize;
    let vp0 = (v0 as i32 + ctx.rel_vp) as usize;
    let up0 = (v0 as i32 + ctx.rel_up) as usize;
    let inv_delta = 1.0 / delta;

    // Line-local views let the loop below index by i alone.
    let vp_hi = vp0 + len - 1 + n2 + n + 1;
    let up_hi = up0 + len - 1 + n2 + n + 1;
    let rat_vp = &ratio[vp0..=vp_hi];
    let rat_up = &ratio[up0..=up_hi];
    let f_u = &f[u0..u0 + len];
    let f_v = &f[v0..v0 + len];
    let pauli_u = &pauli[u0..u0 + len];
    let pauli_v = &pauli[v0..v0 + len];
    let e_u = &tabs.e[u0..u0 + len];
    let e_v = &tabs.e[v0..v0 + len];
    let eup = &eup[..len];

    let w = ctx.w;
    let fr_vp = ctx.fr_vp;
    let fr_up = ctx.fr_up;
    let mut clamps = 0u64;
    for i in 0..len {
        let t_vp = lerp8_at(rat_vp, i, n, n2, &fr_vp);
        let t_up = lerp8_at(rat_up, i, n, n2, &fr_up);
        let e_up = eup[i];

        let p_up = delta + rho * e_up;
        let q = delta * e_up + rho * (e_u[i] * e_v[i]);
        let inv2 = 1.0 / (p_up * q);

        let cap_up = p_up * inv_delta;
        let over_up = t_up > cap_up;
        let tu = if over_up { cap_up } else { t_up };
        let y0 = t_vp * e_up;
        let cap_vp = q * inv_delta;
        let over_vp = y0 > cap_vp;
        let yv = if over_vp { cap_vp } else { y0 };
        clamps += over_up as u64 + over_vp as u64;

        let gain_core = tu * yv * inv2;
        let loss_pauli = (p_up - delta * tu) * (q - delta * yv) * inv2;
        let a = f_u[i] * loss_pauli;
        let pu = pauli_u[i];

        part.c1[v0 + i] += w * gain_core * pu;
        part.g1[v0 + i] += w * (delta * gain_core * pu + a);
        if FULL {
            part.c2[v0 + i] += w * a;
            part.c[v0 + i] += w * (gain_core * pu * pauli_v[i] - a * f_v[i]);
        }
    }
    part.clamps += clamps;
}

/// Branch-free interior sweep along one z-line, classical kernel.
#[allow(clippy::too_many_arguments)]
#[inline(always)]
fn fast_line_classical<const FULL: bool>(
    ws: &CollisionWorkspace,
    tabs: &PassTables,
    ratio: &[f64],
    f: &[f64],
    rho: f64,
    off: &OffsetEntry,
    ctx: &LineCtx,
    line: usize,
    iz: (i32, i32),
    part: &mut PartialOut,
) {
    let n = ws.n;
    let n2 = n * n;
    let len = (iz.1 - iz.0 + 1) as usize;
    let v0 = line + iz.0 as usize;
    let u0 = (v0 as i32 + off.lin) as usize;
    let vp0 = (v0 as i32 + ctx.rel_vp) as usize;
    let up0 = (v0 as i32 + ctx.rel_up) as usize;
    let inv_rho2 = 1.0 / (rho * rho);
    let w = ctx.w;

    let vp_hi = vp0 + len - 1 + n2 + n + 1;
    let up_hi = up0 + len - 1 + n2 + n + 1;
    let rat_vp = &ratio[vp0..=vp_hi];
    let rat_up = &ratio[up0..=up_hi];
    let f_u = &f[u0..u0 + len];
    let f_v = &f[v0..v0 + len];
    let ie_u = &tabs.inv_e[u0..u0 + len];
    let ie_v = &tabs.inv_e[v0..v0 + len];
    let fr_vp = ctx.fr_vp;
    let fr_up = ctx.fr_up;

    for i in 0..len {
        let t_vp = lerp8_at(rat_vp, i, n, n2, &fr_vp);
        let t_up = lerp8_at(rat_up, i, n, n2, &fr_up);
        // mu(u')mu(v') = 1/(rho^2 E(u)E(v)) by energy conservation.
        let gain_core = t_up * t_vp * (ie_u[i] * ie_v[i] * inv_rho2);
        let fu = f_u[i];
        part.c1[v0 + i] += w * gain_core;
        part.g1[v0 + i] += w * fu;
        if FULL {
            part.c2[v0 + i] += w * fu;
            part.c[v0 + i] += w * (gain_core - fu * f_v[i]);
        }
    }
}

/// Largest supported per-axis node count (bounds the line buffers).
pub(crate) const MAX_AXIS_NODES: usize = 64;

/// Trilinear gather at slot `i` of a line-local view.
#[inline(always)]
fn lerp8_at(cell: &[f64], i: usize, n: usize, n2: usize, fr: &[f64; 3]) -> f64 {
    let v000 = cell[i];
    let v001 = cell[i + 1];
    let v010 = cell[i + n];
    let v011 = cell[i + n + 1];
    let v100 = cell[i + n2];
    let v101 = cell[i + n2 + 1];
    let v110 = cell[i + n2 + n];
    let v111 = cell[i + n2 + n + 1];
    let a = v000 + fr[2] * (v001 - v000);
    let b = v010 + fr[2] * (v011 - v010);
    let c = v100 + fr[2] * (v101 - v100);
    let d = v110 + fr[2] * (v111 - v110);
    let e = a + fr[1] * (b - a);
    let f = c + fr[1] * (d - c);
    e + fr[0] * (f - e)
}

/// Clamped scalar sample used on the boundary shell.
#[allow(clippy::too_many_arguments)]
#[inline(always)]
fn sample_scalar<const FULL: bool>(
    ws: &CollisionWorkspace,
    tabs: &PassTables,
    ratio: &[f64],
    f: &[f64],
    pauli: &[f64],
    delta: f64,
    rho: f64,
    quantum: bool,
    off: &OffsetEntry,
    ctx: &LineCtx,
    line: usize,
    vx: i32,
    vy: i32,
    vz: i32,
    eup: f64,
    part: &mut PartialOut,
) {
    let n = ws.n;
    let vi = line + vz as usize;
    let ui = (vi as i32 + off.lin) as usize;
    let vlat = [vx as f64, vy as f64, vz as f64];
    let ulat = [
        (vx + off.dx) as f64,
        (vy + off.dy) as f64,
        (vz + off.dz) as f64,
    ];
    let tox = ctx.t * ctx.oh[0];
    let toy = ctx.t * ctx.oh[1];
    let toz = ctx.t * ctx.oh[2];
    let t_vp = tri_gather(ratio, n, vlat[0] + tox, vlat[1] + toy, vlat[2] + toz);
    let t_up = tri_gather(ratio, n, ulat[0] - tox, ulat[1] - toy, ulat[2] - toz);
    let w = ctx.w;
    let fu = f[ui];
    let fv = f[vi];

    if !quantum {
        let inv_rho2 = 1.0 / (rho * rho);
        let gain_core = t_up * t_vp * (tabs.inv_e[ui] * tabs.inv_e[vi] * inv_rho2);
        part.c1[vi] += w * gain_core;
        part.g1[vi] += w * fu;
        if FULL {
            part.c2[vi] += w * fu;
            part.c[vi] += w * (gain_core - fu * fv);
        }
        return;
    }

    let p_up = delta + rho * eup;
    let q = delta * eup + rho * (tabs.e[ui] * tabs.e[vi]);
    let inv2 = 1.0 / (p_up * q);
    let inv_delta = 1.0 / delta;

    let cap_up = p_up * inv_delta;
    let over_up = t_up > cap_up;
    let tu = if over_up { cap_up } else { t_up };
    let y0 = t_vp * eup;
    let cap_vp = q * inv_delta;
    let over_vp = y0 > cap_vp;
    let yv = if over_vp { cap_vp } else { y0 };
    part.clamps += over_up as u64 + over_vp as u64;

    let gain_core = tu * yv * inv2;
    let loss_pauli = (p_up - delta * tu) * (q - delta * yv) * inv2;
    let a = fu * loss_pauli;
    let pu = pauli[ui];
    part.c1[vi] += w * gain_core * pu;
    part.g1[vi] += w * (delta * gain_core * pu + a);
    if FULL {
        part.c2[vi] += w * a;
        part.c[vi] += w * (gain_core * pu * pauli[vi] - a * fv);
    }
}

/// Collision frequency table: the multiplication part of the linearized
/// operator, strictly positive.
pub(crate) fn frequency_pass(
    ws: &CollisionWorkspace,
    tabs: &PassTables,
    mu: &[f64],
    delta: f64,
    rho: f64,
    vs: &[usize],
) -> Vec<f64> {
    vs.par_iter()
        .map(|&v| {
            let n_om = ws.n_om;
            let ev = tabs.e[v];
            let mut acc = 0.0;
            for u in 0..ws.n_v {
                if u == v {
                    continue;
                }
                let base = ws.pair_base(v, u);
                let mu_u = mu[u];
                let r_euv = rho * (tabs.e[u] * ev);
                let su = ws.s_of(u);
                for k in 0..n_om {
                    let (t, w) = ws.t_w(base, k);
                    if w == 0.0 {
                        continue;
                    }
                    let sup = su - 2.0 * t * ws.dot(u, k) + t * t;
                    let eup = (0.5 * sup).exp();
                    let p_up = delta + rho * eup;
                    let q = delta * eup + r_euv;
                    let inv2 = 1.0 / (p_up * q);
                    let mu_up = q * inv2;
                    let mu_vp = eup * p_up * inv2;
                    acc += w * (mu_u * (1.0 - delta * (mu_up + mu_vp)) + delta * mu_up * mu_vp);
                }
            }
            acc
        })
        .collect()
}

/// Linearized scattering pass: applies the integral (gain) part of the
/// linearized operator to a perturbation `f`, optionally with a relative
/// velocity cutoff profile multiplying the kernel.
#[allow(clippy::too_many_arguments)]
pub(crate) fn scattering_pass(
    ws: &CollisionWorkspace,
    tabs: &PassTables,
    tables: &EquilibriumTables,
    f: &[f64],
    delta: f64,
    rho: f64,
    cutoff: Option<&(dyn Fn(f64) -> f64 + Sync)>,
    sign_flip_test_hook: bool,
    vs: &[usize],
) -> Vec<f64> {
    let n_v = ws.n_v;
    debug_assert_eq!(f.len(), n_v);
    // phi = sqrt(mu_bar) f and its equilibrium-normalized ratio.
    let phi: Vec<f64> = (0..n_v).map(|i| tables.mu_bar_sqrt[i] * f[i]).collect();
    let ratio: Vec<f64> = (0..n_v).map(|i| phi[i] * tabs.p[i]).collect();
    let mu = &tables.mu;
    let loss_sign = if sign_flip_test_hook { 1.0 } else { -1.0 };

    vs.par_iter()
        .map(|&v| {
            let n = ws.n;
            let n_om = ws.n_om;
            let vlat = ws.lat_f_of(v);
            let ev = tabs.e[v];
            let mu_v = mu[v];
            let mut acc = 0.0;
            for u in 0..n_v {
                if u == v {
                    continue;
                }
                let base = ws.pair_base(v, u);
                let ulat = ws.lat_f_of(u);
                let mu_u = mu[u];
                let phi_u = phi[u];
                let r_euv = rho * (tabs.e[u] * ev);
                let su = ws.s_of(u);
                let chi = match cutoff {
                    Some(c) => c(ws.norm_delta_of(v, u)),
                    None => 1.0,
                };
                if chi == 0.0 {
                    continue;
                }
                let dmu_uv = delta * mu_u * mu_v;
                let a2 = 1.0 - delta * (mu_u + mu_v);
                for k in 0..n_om {
                    let (t, w0) = ws.t_w(base, k);
                    if w0 == 0.0 {
                        continue;
                    }
                    let w = w0 * chi;
                    let oh = ws.om_h_of(k);
                    let tox = t * oh[0];
                    let toy = t * oh[1];
                    let toz = t * oh[2];
                    let phi_vp_t =
                        tri_gather(&ratio, n, vlat[0] + tox, vlat[1] + toy, vlat[2] + toz);
                    let phi_up_t =
                        tri_gather(&ratio, n, ulat[0] - tox, ulat[1] - toy, ulat[2] - toz);

                    let sup = su - 2.0 * t * ws.dot(u, k) + t * t;
                    let eup = (0.5 * sup).exp();
                    let p_up = delta + rho * eup;
                    let q = delta * eup + r_euv;
                    let inv2 = 1.0 / (p_up * q);
                    let mu_up = q * inv2;
                    let mu_vp = eup * p_up * inv2;
                    let phi_up = phi_up_t * mu_up;
                    let phi_vp = phi_vp_t * mu_vp;

                    let beta1 = mu_vp * a2 + dmu_uv;
                    let beta2 = mu_up * a2 + dmu_uv;
                    let beta3 = mu_v * (1.0 - delta * (mu_up + mu_vp)) + delta * mu_up * mu_vp;
                    acc += w * (beta1 * phi_up + beta2 * phi_vp + loss_sign * beta3 * phi_u);
                }
            }
            acc / tables.mu_bar_sqrt[v]
        })
        .collect()
}

/// Nonlinear perturbation pass: the quadratic/cubic collision form in the
/// fluctuation variable. With `gain_only`, keeps the subset of terms that
/// drives the damped iteration.
#[allow(clippy::too_many_arguments)]
pub(crate) fn nonlinear_pass(
    ws: &CollisionWorkspace,
    tabs: &PassTables,
    tables: &EquilibriumTables,
    f: &[f64],
    delta: f64,
    rho: f64,
    gain_only: bool,
    vs: &[usize],
) -> Vec<f64> {
    let n_v = ws.n_v;
    debug_assert_eq!(f.len(), n_v);
    let phi: Vec<f64> = (0..n_v).map(|i| tables.mu_bar_sqrt[i] * f[i]).collect();
    let ratio: Vec<f64> = (0..n_v).map(|i| phi[i] * tabs.p[i]).collect();
    let mu = &tables.mu;

    vs.par_iter()
        .map(|&v| {
            let n = ws.n;
            let n_om = ws.n_om;
            let vlat = ws.lat_f_of(v);
            let ev = tabs.e[v];
            let mu_v = mu[v];
            let phi_v = phi[v];
            let mut acc = 0.0;
            for u in 0..n_v {
                if u == v {
                    continue;
                }
                let base = ws.pair_base(v, u);
                let ulat = ws.lat_f_of(u);
                let mu_u = mu[u];
                let phi_u = phi[u];
                let r_euv = rho * (tabs.e[u] * ev);
                let su = ws.s_of(u);
                let a2 = 1.0 - delta * (mu_v + mu_u);
                for k in 0..n_om {
                    let (t, w) = ws.t_w(base, k);
                    if w == 0.0 {
                        continue;
                    }
                    let oh = ws.om_h_of(k);
                    let tox = t * oh[0];
                    let toy = t * oh[1];
                    let toz = t * oh[2];
                    let phi_vp_t =
                        tri_gather(&ratio, n, vlat[0] + tox, vlat[1] + toy, vlat[2] + toz);
                    let phi_up_t =
                        tri_gather(&ratio, n, ulat[0] - tox, ulat[1] - toy, ulat[2] - toz);

                    let sup = su - 2.0 * t * ws.dot(u, k) + t * t;
                    let eup = (0.5 * sup).exp();
                    let p_up = delta + rho * eup;
                    let q = delta * eup + r_euv;
                    let inv2 = 1.0 / (p_up * q);
                    let mu_up = q * inv2;
                    let mu_vp = eup * p_up * inv2;
                    let phi_up = phi_up_t * mu_up;
                    let phi_vp = phi_vp_t * mu_vp;

                    let term = if gain_only {
                        phi_up * phi_vp * a2
                            + delta
                                * (phi_vp * phi_u * (mu_v - mu_up)
                                    + phi_up * phi_u * (mu_v - mu_vp)
                                    - phi_up * phi_vp * phi_u)
                    } else {
                        let b2 = 1.0 - delta * (mu_vp + mu_up);
                        phi_up * phi_vp * a2 - phi_u * phi_v * b2
                            + delta
                                * (phi_vp * phi_u * (mu_v - mu_up)
                                    + phi_up * phi_u * (mu_v - mu_vp)
                                    + phi_vp * phi_v * (mu_u - mu_up)
                                    + phi_up * phi_v * (mu_u - mu_vp)
                                    + phi_u * phi_v * (phi_up + phi_vp)
                                    - phi_up * phi_vp * (phi_u + phi_v))
                    };
                    acc += w * term;
                }
            }
            acc / tables.mu_bar_sqrt[v]
        })
        .collect()
}
