//! Phase-space fields indexed by (spatial node, velocity node) and the
//! norms used to monitor them.

use crate::grid::{SpatialGrid, VelocityGrid};
use crate::params::{velocity_weight, ModelParams};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FieldError {
    #[error("field value at x-node {x}, v-node {v} is not finite: {value}")]
    NotFinite { x: usize, v: usize, value: f64 },
    #[error("field value at x-node {x}, v-node {v} violates 0 <= F <= {cap}: {value}")]
    BoundViolation {
        x: usize,
        v: usize,
        value: f64,
        cap: f64,
    },
    #[error("field shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
}

/// Distribution sampled on the (x, v) product grid, row-major in x.
///
/// Invariant: `0 <= F <= 1/delta` nodewise (upper bound only when
/// `delta > 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionField {
    pub values: Vec<f64>,
    pub n_x: usize,
    pub n_v: usize,
    pub params: ModelParams,
}

impl DistributionField {
    pub fn new(
        values: Vec<f64>,
        n_x: usize,
        n_v: usize,
        params: ModelParams,
    ) -> Result<Self, FieldError> {
        if values.len() != n_x * n_v {
            return Err(FieldError::ShapeMismatch {
                expected: n_x * n_v,
                got: values.len(),
            });
        }
        Ok(DistributionField {
            values,
            n_x,
            n_v,
            params,
        })
    }

    pub fn zeros(n_x: usize, n_v: usize, params: ModelParams) -> Self {
        DistributionField {
            values: vec![0.0; n_x * n_v],
            n_x,
            n_v,
            params,
        }
    }

    #[inline]
    pub fn at(&self, x: usize, v: usize) -> f64 {
        self.values[x * self.n_v + v]
    }

    #[inline]
    pub fn slice_x(&self, x: usize) -> &[f64] {
        &self.values[x * self.n_v..(x + 1) * self.n_v]
    }

    #[inline]
    pub fn slice_x_mut(&mut self, x: usize) -> &mut [f64] {
        &mut self.values[x * self.n_v..(x + 1) * self.n_v]
    }

    /// Check `0 <= F <= 1/delta` at every node, reporting the first
    /// offending node; runs in one pass.
    pub fn check_bounds(&self, tol: f64) -> Result<(), FieldError> {
        let cap = self.params.pauli_cap();
        for x in 0..self.n_x {
            for v in 0..self.n_v {
                let val = self.values[x * self.n_v + v];
                if !val.is_finite() {
                    return Err(FieldError::NotFinite { x, v, value: val });
                }
                if val < -tol || val > cap + tol {
                    return Err(FieldError::BoundViolation {
                        x,
                        v,
                        value: val,
                        cap,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn min_max(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in &self.values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }
}

/// Weighted sup norm `max_{x,v} (1+|v|)^beta |f(x,v)|` of a perturbation
/// field given as raw values on the product grid.
pub fn weighted_sup_norm(
    values: &[f64],
    n_x: usize,
    grid: &VelocityGrid,
    beta: f64,
) -> Result<f64, FieldError> {
    let n_v = grid.len();
    if values.len() != n_x * n_v {
        return Err(FieldError::ShapeMismatch {
            expected: n_x * n_v,
            got: values.len(),
        });
    }
    let mut best = 0.0f64;
    for x in 0..n_x {
        for (j, node) in grid.nodes.iter().enumerate() {
            let val = values[x * n_v + j];
            if !val.is_finite() {
                return Err(FieldError::NotFinite {
                    x,
                    v: j,
                    value: val,
                });
            }
            let w = velocity_weight(*node, beta) * val.abs();
            if w > best {
                best = w;
            }
        }
    }
    Ok(best)
}

/// `max_x sum_v |f(x,v)| h^3`: the sup-in-x, integrated-in-v norm.
pub fn sup_x_l1_v_norm(values: &[f64], n_x: usize, grid: &VelocityGrid) -> Result<f64, FieldError> {
    let n_v = grid.len();
    if values.len() != n_x * n_v {
        return Err(FieldError::ShapeMismatch {
            expected: n_x * n_v,
            got: values.len(),
        });
    }
    let w = grid.cell_weight();
    let mut best = 0.0f64;
    for x in 0..n_x {
        let mut acc = 0.0;
        for j in 0..n_v {
            let val = values[x * n_v + j];
            if !val.is_finite() {
                return Err(FieldError::NotFinite {
                    x,
                    v: j,
                    value: val,
                });
            }
            acc += val.abs();
        }
        best = best.max(acc * w);
    }
    Ok(best)
}

/// `sum_x w_x sup_v |f(x,v)|`: integrated-in-x, sup-in-v norm.
pub fn l1_x_sup_v_norm(values: &[f64], n_x: usize, n_v: usize, spatial: &SpatialGrid) -> f64 {
    let wx = spatial.cell_weight();
    let mut acc = 0.0;
    for x in 0..n_x {
        let mut sup = 0.0f64;
        for j in 0..n_v {
            sup = sup.max(values[x * n_v + j].abs());
        }
        acc += sup * wx;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ModelParams;

    fn grid() -> VelocityGrid {
        VelocityGrid::new(3.0, 7).unwrap()
    }

    #[test]
    fn sup_norm_basics() {
        let g = grid();
        let zeros = vec![0.0; g.len()];
        assert_eq!(weighted_sup_norm(&zeros, 1, &g, 6.0).unwrap(), 0.0);

        // f = 1/w pointwise has weighted sup exactly 1.
        let vals: Vec<f64> = g
            .nodes
            .iter()
            .map(|v| 1.0 / velocity_weight(*v, 6.0))
            .collect();
        let n = weighted_sup_norm(&vals, 1, &g, 6.0).unwrap();
        assert!((n - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sup_norm_matches_bruteforce() {
        let g = grid();
        // Deterministic pseudo-random field.
        let vals: Vec<f64> = (0..g.len())
            .map(|i| ((i as f64 * 0.7711).sin() * 1.3).cos() - 0.2)
            .collect();
        let got = weighted_sup_norm(&vals, 1, &g, 4.0).unwrap();
        // Independent exhaustive scan.
        let mut expect = 0.0f64;
        for (i, v) in g.nodes.iter().enumerate() {
            let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            let w = (1.0 + r).powf(4.0) * vals[i].abs();
            if w > expect {
                expect = w;
            }
        }
        assert_eq!(got, expect);
    }

    #[test]
    fn sup_norm_rejects_nan() {
        let g = grid();
        let mut vals = vec![0.0; g.len()];
        vals[5] = f64::NAN;
        assert!(weighted_sup_norm(&vals, 1, &g, 6.0).is_err());
    }

    #[test]
    fn l1_norm_single_cell_and_reference() {
        let g = grid();
        let mut vals = vec![0.0; g.len()];
        vals[10] = 1.0;
        let n = sup_x_l1_v_norm(&vals, 1, &g).unwrap();
        assert!((n - g.cell_weight()).abs() < 1e-15);

        let vals: Vec<f64> = (0..g.len()).map(|i| (i as f64 * 0.31).sin()).collect();
        let got = sup_x_l1_v_norm(&vals, 1, &g).unwrap();
        let expect: f64 = vals.iter().map(|v| v.abs()).sum::<f64>() * g.cell_weight();
        assert!((got - expect).abs() < 1e-12 * expect.abs().max(1.0));
    }

    #[test]
    fn bound_checker_reports_first_offender() {
        let params = ModelParams::new(1.0, 1.0, -1.0, 6.0).unwrap();
        let mut f = DistributionField::zeros(1, 10, params);
        f.values[3] = 1.5; // above cap 1.0
        f.values[7] = -0.5;
        match f.check_bounds(1e-12).unwrap_err() {
            FieldError::BoundViolation { v, value, .. } => {
                assert_eq!(v, 3);
                assert_eq!(value, 1.5);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }
}
