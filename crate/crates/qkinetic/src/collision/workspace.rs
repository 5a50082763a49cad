//! Precomputed quadrature machinery for the collision integrals.
//!
//! All collision-type operators integrate over (u, omega) pairs against the
//! kernel `|v-u|^gamma b(theta)`. The workspace caches everything that
//! depends on geometry alone: per-offset radial kernel factors (with a
//! cell-average correction near the `|v-u|^gamma` singularity), the folded
//! sphere rule, per-(offset, direction) projections, and optionally the
//! post-collision exponentials.

use crate::grid::{gauss_legendre, SphereQuadrature, VelocityGrid};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum WorkspaceError {
    #[error("sphere rule is not antipodally symmetric (node {0} has no mirror)")]
    MissingAntipode(usize),
    #[error("kernel tables need {needed} bytes but the cache budget is {budget}")]
    CacheBudgetExceeded { needed: usize, budget: usize },
    #[error("velocity box too large for the fast kernel path: v_max = {0} (max 16)")]
    BoxTooLarge(f64),
    #[error("per-axis node count {0} exceeds the supported maximum 64")]
    TooManyNodes(usize),
}

/// One nonzero lattice offset of the pair quadrature.
#[derive(Debug, Clone, Copy)]
pub(crate) struct OffsetEntry {
    pub dx: i32,
    pub dy: i32,
    pub dz: i32,
    /// Linear index shift of `+offset` on the node array.
    pub lin: i32,
    /// Dense index into the (offset, direction) tables.
    pub dense: usize,
}

/// Geometry-only quadrature tables shared by every collision-type operator.
///
/// Reusable across all (delta, rho) pairs on the same grid and kernel.
#[derive(Debug)]
pub struct CollisionWorkspace {
    pub n: usize,
    pub n_v: usize,
    pub h: f64,
    pub v_max: f64,
    pub gamma: f64,
    pub b_coeff: f64,
    /// Offset-cube side `2n - 1`.
    d: usize,
    /// Radial kernel factor per offset: `|d|^(gamma-1) corr h^3 b_coeff`
    /// (zero at the excluded central offset).
    a_delta: Vec<f64>,
    /// `|d|` per offset.
    norm_delta: Vec<f64>,
    /// Offsets with nonzero radial factor, iteration order fixed.
    pub(crate) offsets: Vec<OffsetEntry>,
    /// Folded (half-sphere) direction set, weights doubled.
    om: Vec<[f64; 3]>,
    om_h: Vec<[f64; 3]>,
    /// Folded direction weights (kept for introspection and tests).
    #[allow(dead_code)]
    pub(crate) om_w: Vec<f64>,
    pub n_om: usize,
    /// `t = d . omega` per (offset, direction).
    t_tab: Vec<f64>,
    /// Final kernel weight `a_delta |t| w_omega` per (offset, direction).
    w_tab: Vec<f64>,
    /// `node . omega` per (node, direction).
    dot_tab: Vec<f64>,
    /// Lattice coordinates per node.
    lat: Vec<[i32; 3]>,
    lat_f: Vec<[f64; 3]>,
    /// `|v|^2` per node.
    s: Vec<f64>,
}

impl CollisionWorkspace {
    pub fn new(
        grid: &VelocityGrid,
        sphere: &SphereQuadrature,
        gamma: f64,
        b_coeff: f64,
    ) -> Result<Self, WorkspaceError> {
        if grid.v_max > 16.0 {
            return Err(WorkspaceError::BoxTooLarge(grid.v_max));
        }
        if grid.n_per_axis > crate::collision::passes::MAX_AXIS_NODES {
            return Err(WorkspaceError::TooManyNodes(grid.n_per_axis));
        }
        let n = grid.n_per_axis;
        let n_v = grid.len();
        let h = grid.h;
        let d = 2 * n - 1;

        let (om, om_w_raw) = fold_sphere(sphere)?;
        let n_om = om.len();
        let om_h: Vec<[f64; 3]> = om
            .iter()
            .map(|o| [o[0] / h, o[1] / h, o[2] / h])
            .collect();

        // Radial factors over the offset cube, singular cell excluded and
        // near-singular cells corrected by the analytic cell average of
        // |z|^gamma.
        let r = (n - 1) as i32;
        let h3 = h * h * h;
        let mut a_delta = vec![0.0; d * d * d];
        let mut norm_delta = vec![0.0; d * d * d];
        let mut offsets = Vec::with_capacity(d * d * d - 1);
        for dx in -r..=r {
            for dy in -r..=r {
                for dz in -r..=r {
                    let idx = offset_index(dx, dy, dz, r, d);
                    if dx == 0 && dy == 0 && dz == 0 {
                        continue; // singularity exclusion: weight 0
                    }
                    let dv = [dx as f64 * h, dy as f64 * h, dz as f64 * h];
                    let nd = (dv[0] * dv[0] + dv[1] * dv[1] + dv[2] * dv[2]).sqrt();
                    let mut radial = nd.powf(gamma);
                    if nd <= 2.0 * h {
                        radial *= cell_average_correction(dv, h, gamma);
                    }
                    norm_delta[idx] = nd;
                    a_delta[idx] = radial * h3 * b_coeff / nd;
                    if a_delta[idx] > 0.0 {
                        offsets.push(OffsetEntry {
                            dx,
                            dy,
                            dz,
                            lin: (dx * n as i32 + dy) * n as i32 + dz,
                            dense: idx,
                        });
                    }
                }
            }
        }

        // Projection and weight tables per (offset, direction).
        let mut t_tab = vec![0.0; d * d * d * n_om];
        let mut w_tab = vec![0.0; d * d * d * n_om];
        for dx in -r..=r {
            for dy in -r..=r {
                for dz in -r..=r {
                    let idx = offset_index(dx, dy, dz, r, d);
                    let a = a_delta[idx];
                    let dv = [dx as f64 * h, dy as f64 * h, dz as f64 * h];
                    for (k, o) in om.iter().enumerate() {
                        let t = dv[0] * o[0] + dv[1] * o[1] + dv[2] * o[2];
                        t_tab[idx * n_om + k] = t;
                        w_tab[idx * n_om + k] = a * t.abs() * om_w_raw[k];
                    }
                }
            }
        }

        let mut dot_tab = vec![0.0; n_v * n_om];
        for (j, node) in grid.nodes.iter().enumerate() {
            for (k, o) in om.iter().enumerate() {
                dot_tab[j * n_om + k] = node[0] * o[0] + node[1] * o[1] + node[2] * o[2];
            }
        }

        let half = (n as i32 - 1) / 2;
        let lat: Vec<[i32; 3]> = (0..n_v)
            .map(|j| {
                let c = grid.coords_of(j);
                [
                    c[0] as i32 - half,
                    c[1] as i32 - half,
                    c[2] as i32 - half,
                ]
            })
            .collect();
        let lat_f: Vec<[f64; 3]> = (0..n_v)
            .map(|j| {
                let c = grid.coords_of(j);
                [c[0] as f64, c[1] as f64, c[2] as f64]
            })
            .collect();

        Ok(CollisionWorkspace {
            n,
            n_v,
            h,
            v_max: grid.v_max,
            gamma,
            b_coeff,
            d,
            a_delta,
            norm_delta,
            offsets,
            om,
            om_h,
            om_w: om_w_raw,
            n_om,
            t_tab,
            w_tab,
            dot_tab,
            lat,
            lat_f,
            s: grid.s.clone(),
        })
    }

    /// Bytes held by the kernel tables (the workspace memory bound applies
    /// to this quantity).
    pub fn table_bytes(&self) -> usize {
        use std::mem::size_of;
        (self.t_tab.len() + self.w_tab.len() + self.dot_tab.len()) * size_of::<f64>()
            + (self.a_delta.len() + self.norm_delta.len()) * size_of::<f64>()
            + self.offsets.len() * size_of::<OffsetEntry>()
    }

    /// Base index into the (offset, direction) tables for a node pair.
    #[inline(always)]
    pub(crate) fn pair_base(&self, v: usize, u: usize) -> usize {
        let lv = self.lat[v];
        let lu = self.lat[u];
        let r = (self.n - 1) as i32;
        offset_index(lu[0] - lv[0], lu[1] - lv[1], lu[2] - lv[2], r, self.d) * self.n_om
    }

    #[inline(always)]
    pub(crate) fn t_w(&self, base: usize, k: usize) -> (f64, f64) {
        (self.t_tab[base + k], self.w_tab[base + k])
    }

    #[inline(always)]
    pub(crate) fn norm_delta_of(&self, v: usize, u: usize) -> f64 {
        let lv = self.lat[v];
        let lu = self.lat[u];
        let r = (self.n - 1) as i32;
        self.norm_delta[offset_index(lu[0] - lv[0], lu[1] - lv[1], lu[2] - lv[2], r, self.d)]
    }

    #[inline(always)]
    pub(crate) fn lat_f_of(&self, j: usize) -> [f64; 3] {
        self.lat_f[j]
    }

    #[inline(always)]
    pub(crate) fn om_h_of(&self, k: usize) -> [f64; 3] {
        self.om_h[k]
    }

    #[inline(always)]
    pub(crate) fn dot(&self, u: usize, k: usize) -> f64 {
        self.dot_tab[u * self.n_om + k]
    }

    #[inline(always)]
    pub(crate) fn s_of(&self, j: usize) -> f64 {
        self.s[j]
    }

    #[inline(always)]
    pub(crate) fn t_w_dense(&self, dense: usize, k: usize) -> (f64, f64) {
        (
            self.t_tab[dense * self.n_om + k],
            self.w_tab[dense * self.n_om + k],
        )
    }

    #[inline(always)]
    pub(crate) fn omega(&self, k: usize) -> [f64; 3] {
        self.om[k]
    }

    /// All cached kernel weights are nonnegative and finite; the central
    /// offset carries zero weight.
    pub fn validate(&self) -> bool {
        let r = (self.n - 1) as i32;
        let center = offset_index(0, 0, 0, r, self.d);
        self.w_tab.iter().all(|w| w.is_finite() && *w >= 0.0)
            && self.a_delta[center] == 0.0
            && self.a_delta.iter().all(|a| a.is_finite() && *a >= 0.0)
    }

    /// Total kernel weight attached to one v-node (full folded measure).
    pub fn total_weight(&self, v: usize) -> f64 {
        let mut acc = 0.0;
        for u in 0..self.n_v {
            if u == v {
                continue;
            }
            let base = self.pair_base(v, u);
            for k in 0..self.n_om {
                acc += self.w_tab[base + k];
            }
        }
        acc
    }
}

#[inline(always)]
fn offset_index(dx: i32, dy: i32, dz: i32, r: i32, d: usize) -> usize {
    (((dx + r) as usize * d) + (dy + r) as usize) * d + (dz + r) as usize
}

/// Fold the antipodally symmetric rule onto a half set with doubled
/// weights; the post-collision map and `|cos theta|` are even in omega.
fn fold_sphere(sphere: &SphereQuadrature) -> Result<(Vec<[f64; 3]>, Vec<f64>), WorkspaceError> {
    let n = sphere.len();
    let mut used = vec![false; n];
    let mut nodes = Vec::with_capacity(n / 2 + 1);
    let mut weights = Vec::with_capacity(n / 2 + 1);
    for i in 0..n {
        if used[i] {
            continue;
        }
        let oi = sphere.nodes[i];
        let mut partner = None;
        for j in (i + 1)..n {
            if used[j] {
                continue;
            }
            let oj = sphere.nodes[j];
            if (oi[0] + oj[0]).abs() < 1e-12
                && (oi[1] + oj[1]).abs() < 1e-12
                && (oi[2] + oj[2]).abs() < 1e-12
            {
                partner = Some(j);
                break;
            }
        }
        let j = partner.ok_or(WorkspaceError::MissingAntipode(i))?;
        used[i] = true;
        used[j] = true;
        nodes.push(oi);
        weights.push(sphere.weights[i] + sphere.weights[j]);
    }
    Ok((nodes, weights))
}

/// `(integral of |z|^gamma over the h-cell centered at dv) / (h^3 |dv|^gamma)`.
///
/// The integrand is smooth on every non-central cell (`min |z| >= h/2`), so
/// a 20-point Gauss-Legendre product rule is accurate to roundoff.
fn cell_average_correction(dv: [f64; 3], h: f64, gamma: f64) -> f64 {
    let (x, w) = gauss_legendre(20);
    let half = 0.5 * h;
    let mut acc = 0.0;
    for (ix, wx) in x.iter().zip(&w) {
        let zx = dv[0] + half * ix;
        for (iy, wy) in x.iter().zip(&w) {
            let zy = dv[1] + half * iy;
            for (iz, wz) in x.iter().zip(&w) {
                let zz = dv[2] + half * iz;
                let r2 = zx * zx + zy * zy + zz * zz;
                acc += wx * wy * wz * r2.powf(0.5 * gamma);
            }
        }
    }
    // Jacobian (h/2)^3 for the cube, normalized by h^3 |dv|^gamma.
    let nd2 = dv[0] * dv[0] + dv[1] * dv[1] + dv[2] * dv[2];
    acc * 0.125 / nd2.powf(0.5 * gamma)
}

/// Clamp a continuous lattice coordinate into the box and split it into a
/// cell base index and fractional part (pure interpolation, no
/// extrapolation).
#[inline(always)]
pub(crate) fn axis_base_frac(c: f64, n: usize) -> (usize, f64) {
    let c = c.clamp(0.0, (n - 1) as f64);
    let b = (c as usize).min(n - 2);
    (b, c - b as f64)
}

/// Trilinear interpolation in lerp-difference form: exact for constant
/// fields regardless of rounding in the fractions.
#[inline(always)]
pub(crate) fn tri_gather(field: &[f64], n: usize, cx: f64, cy: f64, cz: f64) -> f64 {
    let (bx, fx) = axis_base_frac(cx, n);
    let (by, fy) = axis_base_frac(cy, n);
    let (bz, fz) = axis_base_frac(cz, n);
    let base = (bx * n + by) * n + bz;
    let n2 = n * n;
    // One range check for the whole stencil; the offsets below are inside
    // the sub-slice by construction.
    let cell = &field[base..base + n2 + n + 2];
    let v000 = cell[0];
    let v001 = cell[1];
    let v010 = cell[n];
    let v011 = cell[n + 1];
    let v100 = cell[n2];
    let v101 = cell[n2 + 1];
    let v110 = cell[n2 + n];
    let v111 = cell[n2 + n + 1];
    let a = v000 + fz * (v001 - v000);
    let b = v010 + fz * (v011 - v010);
    let c = v100 + fz * (v101 - v100);
    let d = v110 + fz * (v111 - v110);
    let e = a + fy * (b - a);
    let f = c + fy * (d - c);
    e + fx * (f - e)
}
