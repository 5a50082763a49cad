//! Velocity lattice, unit-sphere quadrature, and the spatial grid.

use crate::params::DomainMode;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("n_per_axis must be odd, got {0}")]
    EvenNodeCount(usize),
    #[error("n_per_axis must be at least 3, got {0}")]
    TooFewNodes(usize),
    #[error("v_max must be positive and finite, got {0}")]
    BadTruncation(f64),
    #[error("sphere orders must be positive, got polar {polar} azimuth {azimuth}")]
    BadSphereOrder { polar: usize, azimuth: usize },
    #[error("azimuth order must be even for an antipodally symmetric rule, got {0}")]
    OddAzimuth(usize),
    #[error("spatial grid needs n_x >= 1 and positive length, got n_x {n_x} length {length}")]
    BadSpatialGrid { n_x: usize, length: f64 },
}

/// Truncated Cartesian velocity lattice on `[-v_max, v_max]^3`.
///
/// `n_per_axis` is odd so the origin is a node and every node has its exact
/// mirror image; the cubature weight of each node is `h^3`.
#[derive(Debug, Clone)]
pub struct VelocityGrid {
    pub v_max: f64,
    pub n_per_axis: usize,
    pub h: f64,
    /// Node positions, lexicographic in (ix, iy, iz).
    pub nodes: Vec<[f64; 3]>,
    /// Squared norms `|v|^2` per node.
    pub s: Vec<f64>,
}

impl VelocityGrid {
    pub fn new(v_max: f64, n_per_axis: usize) -> Result<Self, GridError> {
        if !(v_max > 0.0) || !v_max.is_finite() {
            return Err(GridError::BadTruncation(v_max));
        }
        if n_per_axis < 3 {
            return Err(GridError::TooFewNodes(n_per_axis));
        }
        if n_per_axis % 2 == 0 {
            return Err(GridError::EvenNodeCount(n_per_axis));
        }
        let n = n_per_axis;
        let h = 2.0 * v_max / (n as f64 - 1.0);
        let coord = |i: usize| -> f64 {
            // Symmetric form keeps v and -v bitwise mirrored.
            let half = (n - 1) as i64 / 2;
            (i as i64 - half) as f64 * h
        };
        let mut nodes = Vec::with_capacity(n * n * n);
        let mut s = Vec::with_capacity(n * n * n);
        for ix in 0..n {
            for iy in 0..n {
                for iz in 0..n {
                    let v = [coord(ix), coord(iy), coord(iz)];
                    nodes.push(v);
                    s.push(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
                }
            }
        }
        Ok(VelocityGrid {
            v_max,
            n_per_axis: n,
            h,
            nodes,
            s,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Cubature weight of one cell.
    #[inline]
    pub fn cell_weight(&self) -> f64 {
        self.h * self.h * self.h
    }

    #[inline]
    pub fn index_of(&self, i: [usize; 3]) -> usize {
        (i[0] * self.n_per_axis + i[1]) * self.n_per_axis + i[2]
    }

    #[inline]
    pub fn coords_of(&self, idx: usize) -> [usize; 3] {
        let n = self.n_per_axis;
        [idx / (n * n), (idx / n) % n, idx % n]
    }

    /// Index of the mirror node `-v`; exact at the index level.
    #[inline]
    pub fn mirror_index(&self, idx: usize) -> usize {
        let n = self.n_per_axis;
        let c = self.coords_of(idx);
        self.index_of([n - 1 - c[0], n - 1 - c[1], n - 1 - c[2]])
    }
}

/// Quadrature rule on the unit sphere: product Gauss-Legendre in the polar
/// cosine and uniform azimuth, antipodally symmetric, weights summing to
/// the surface measure `4*pi`.
#[derive(Debug, Clone)]
pub struct SphereQuadrature {
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub polar_order: usize,
    pub azimuth_order: usize,
}

impl SphereQuadrature {
    pub fn new(polar: usize, azimuth: usize) -> Result<Self, GridError> {
        if polar == 0 || azimuth == 0 {
            return Err(GridError::BadSphereOrder { polar, azimuth });
        }
        if azimuth % 2 != 0 {
            return Err(GridError::OddAzimuth(azimuth));
        }
        let (t, wt) = gauss_legendre(polar);
        let dphi = 2.0 * std::f64::consts::PI / azimuth as f64;
        let mut nodes = Vec::with_capacity(polar * azimuth);
        let mut weights = Vec::with_capacity(polar * azimuth);
        for k in 0..polar {
            let ct = t[k];
            let st = (1.0 - ct * ct).max(0.0).sqrt();
            for j in 0..azimuth {
                let phi = (j as f64 + 0.5) * dphi;
                nodes.push([st * phi.cos(), st * phi.sin(), ct]);
                weights.push(wt[k] * dphi);
            }
        }
        Ok(SphereQuadrature {
            nodes,
            weights,
            polar_order: polar,
            azimuth_order: azimuth,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Spatial grid: a single cell (homogeneous) or a periodic 1-D interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    pub mode: DomainMode,
    pub n_x: usize,
    pub length: f64,
}

impl SpatialGrid {
    pub fn homogeneous() -> Self {
        SpatialGrid {
            mode: DomainMode::Homogeneous,
            n_x: 1,
            length: 1.0,
        }
    }

    pub fn torus(n_x: usize, length: f64) -> Result<Self, GridError> {
        if n_x < 1 || !(length > 0.0) || !length.is_finite() {
            return Err(GridError::BadSpatialGrid { n_x, length });
        }
        Ok(SpatialGrid {
            mode: DomainMode::Torus1d,
            n_x,
            length,
        })
    }

    /// Quadrature weight of one spatial node.
    #[inline]
    pub fn cell_weight(&self) -> f64 {
        match self.mode {
            DomainMode::Homogeneous => 1.0,
            DomainMode::Torus1d => self.length / self.n_x as f64,
        }
    }

    #[inline]
    pub fn position(&self, i: usize) -> f64 {
        i as f64 * self.length / self.n_x as f64
    }
}

/// Grid-construction request.
#[derive(Debug, Clone, Copy)]
pub struct GridConfig {
    pub v_max: f64,
    pub n_per_axis: usize,
    pub sphere_polar: usize,
    pub sphere_azimuth: usize,
    pub domain_mode: DomainMode,
    pub n_x: usize,
    pub length: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            v_max: 6.0,
            n_per_axis: 13,
            sphere_polar: 4,
            sphere_azimuth: 8,
            domain_mode: DomainMode::Homogeneous,
            n_x: 1,
            length: 1.0,
        }
    }
}

/// Build the velocity lattice, sphere rule, and spatial grid together.
pub fn build_grids(
    config: &GridConfig,
) -> Result<(VelocityGrid, SphereQuadrature, SpatialGrid), GridError> {
    let vg = VelocityGrid::new(config.v_max, config.n_per_axis)?;
    let sq = SphereQuadrature::new(config.sphere_polar, config.sphere_azimuth)?;
    let sg = match config.domain_mode {
        DomainMode::Homogeneous => SpatialGrid::homogeneous(),
        DomainMode::Torus1d => SpatialGrid::torus(config.n_x, config.length)?,
    };
    Ok((vg, sq, sg))
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, exactly symmetric about 0.
///
/// Newton iteration on the Legendre recurrence; nodes are computed for one
/// half and mirrored so the rule is bitwise symmetric.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Chebyshev-based initial guess.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j as f64 + 1.0) * z * p1 - j as f64 * p2) / (j as f64 + 1.0);
            }
            pp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * pp * pp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_dimensions() {
        let g = VelocityGrid::new(6.0, 13).unwrap();
        assert_eq!(g.h, 1.0);
        assert_eq!(g.len(), 2197);
        assert_eq!(g.cell_weight(), 1.0);
    }

    #[test]
    fn even_count_rejected() {
        assert_eq!(
            VelocityGrid::new(6.0, 12).unwrap_err(),
            GridError::EvenNodeCount(12)
        );
        assert!(VelocityGrid::new(-1.0, 13).is_err());
    }

    #[test]
    fn lattice_mirror_symmetry_exact() {
        let g = VelocityGrid::new(4.0, 9).unwrap();
        for idx in 0..g.len() {
            let m = g.mirror_index(idx);
            for a in 0..3 {
                // Bitwise mirror, not merely approximate.
                assert_eq!(g.nodes[idx][a], -g.nodes[m][a]);
            }
        }
        // The origin is a node.
        let mid = g.len() / 2;
        assert_eq!(g.nodes[mid], [0.0, 0.0, 0.0]);
    }

    #[test]
    fn sphere_rule_measure_and_symmetry() {
        let q = SphereQuadrature::new(4, 8).unwrap();
        assert_eq!(q.len(), 32);
        let total: f64 = q.weights.iter().sum();
        assert!((total - 4.0 * std::f64::consts::PI).abs() < 1e-12);
        for (k, node) in q.nodes.iter().enumerate() {
            let r2: f64 = node.iter().map(|c| c * c).sum();
            assert!((r2.sqrt() - 1.0).abs() < 1e-14);
            // Antipode present.
            let found = q.nodes.iter().any(|m| {
                (m[0] + node[0]).abs() < 1e-13
                    && (m[1] + node[1]).abs() < 1e-13
                    && (m[2] + node[2]).abs() < 1e-13
            });
            assert!(found, "missing antipode of node {k}");
        }
    }

    #[test]
    fn sphere_rule_rejects_odd_azimuth() {
        assert_eq!(
            SphereQuadrature::new(4, 7).unwrap_err(),
            GridError::OddAzimuth(7)
        );
    }

    #[test]
    fn sphere_rule_integrates_low_degree() {
        let q = SphereQuadrature::new(4, 8).unwrap();
        // Integral of z^2 over the sphere is 4*pi/3.
        let i: f64 = q
            .nodes
            .iter()
            .zip(&q.weights)
            .map(|(n, w)| w * n[2] * n[2])
            .sum();
        assert!((i - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-12);
        // |cos(theta)| against the polar axis integrates to 2*pi; the kink
        // at the equator limits a 4-point polar rule to a few percent, and
        // the error shrinks with the polar order.
        let integrate_abs_ct = |polar: usize| -> f64 {
            let q = SphereQuadrature::new(polar, 8).unwrap();
            q.nodes
                .iter()
                .zip(&q.weights)
                .map(|(n, w)| w * n[2].abs())
                .sum()
        };
        let two_pi = 2.0 * std::f64::consts::PI;
        let e4 = (integrate_abs_ct(4) - two_pi).abs() / two_pi;
        let e16 = (integrate_abs_ct(16) - two_pi).abs() / two_pi;
        assert!(e4 < 0.06, "relative error {e4}");
        assert!(e16 < 0.005, "relative error {e16}");
        assert!(e16 < e4);
    }

    #[test]
    fn gauss_legendre_exactness() {
        let (x, w) = gauss_legendre(5);
        let int = |f: &dyn Fn(f64) -> f64| -> f64 {
            x.iter().zip(&w).map(|(xi, wi)| wi * f(*xi)).sum()
        };
        assert!((int(&|_| 1.0) - 2.0).abs() < 1e-14);
        assert!((int(&|x| x * x) - 2.0 / 3.0).abs() < 1e-14);
        assert!((int(&|x| x.powi(8)) - 2.0 / 9.0).abs() < 1e-13);
        // Symmetric nodes.
        for i in 0..x.len() {
            assert_eq!(x[i], -x[x.len() - 1 - i]);
        }
    }

    #[test]
    fn spatial_grid_weights() {
        let s = SpatialGrid::homogeneous();
        assert_eq!(s.cell_weight(), 1.0);
        let t = SpatialGrid::torus(8, 2.0).unwrap();
        assert_eq!(t.cell_weight(), 0.25);
        assert!(SpatialGrid::torus(0, 1.0).is_err());
    }
}
