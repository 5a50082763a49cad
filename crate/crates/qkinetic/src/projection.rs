//! Moment-preserving correction: Gaussian-weighted least-squares projection
//! onto the span of the collision invariants `{1, v, |v|^2}`.

use crate::grid::VelocityGrid;

const N_INV: usize = 5;

/// Precomputed Gram system for the invariant-moment correction.
#[derive(Debug, Clone)]
pub struct ConservationProjector {
    /// Gaussian weight per node.
    weight: Vec<f64>,
    /// Invariant values per node, column-major `[psi][node]`.
    basis: Vec<Vec<f64>>,
    /// Cholesky-free dense LU of the 5x5 Gram matrix.
    gram: [[f64; N_INV]; N_INV],
    cell: f64,
}

impl ConservationProjector {
    pub fn new(grid: &VelocityGrid) -> Self {
        let n = grid.len();
        let mut weight = Vec::with_capacity(n);
        let mut basis = vec![vec![0.0; n]; N_INV];
        for j in 0..n {
            let v = grid.nodes[j];
            weight.push((-0.5 * grid.s[j]).exp());
            basis[0][j] = 1.0;
            basis[1][j] = v[0];
            basis[2][j] = v[1];
            basis[3][j] = v[2];
            basis[4][j] = grid.s[j];
        }
        let cell = grid.cell_weight();
        let mut gram = [[0.0; N_INV]; N_INV];
        for a in 0..N_INV {
            for b in 0..N_INV {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += weight[j] * basis[a][j] * basis[b][j];
                }
                gram[a][b] = acc * cell;
            }
        }
        ConservationProjector {
            weight,
            basis,
            gram,
            cell,
        }
    }

    /// Moments of a velocity field against the invariants.
    pub fn moments(&self, field: &[f64]) -> [f64; N_INV] {
        let mut m = [0.0; N_INV];
        for a in 0..N_INV {
            let mut acc = 0.0;
            for j in 0..field.len() {
                acc += self.basis[a][j] * field[j];
            }
            m[a] = acc * self.cell;
        }
        m
    }

    /// Subtract the Gaussian-weighted projection so all five moments of the
    /// result vanish (collision outputs become exactly conservative).
    pub fn make_conservative(&self, field: &mut [f64]) {
        let m = self.moments(field);
        let c = solve5(&self.gram, &m);
        for j in 0..field.len() {
            let mut corr = 0.0;
            for a in 0..N_INV {
                corr += c[a] * self.basis[a][j];
            }
            field[j] -= self.weight[j] * corr;
        }
    }

    /// Adjust `field` so its moments match `target` exactly; the correction
    /// is a Gaussian-weighted invariant combination.
    pub fn match_moments(&self, field: &mut [f64], target: &[f64; N_INV]) {
        let cur = self.moments(field);
        let rhs = [
            cur[0] - target[0],
            cur[1] - target[1],
            cur[2] - target[2],
            cur[3] - target[3],
            cur[4] - target[4],
        ];
        let c = solve5(&self.gram, &rhs);
        for j in 0..field.len() {
            let mut corr = 0.0;
            for a in 0..N_INV {
                corr += c[a] * self.basis[a][j];
            }
            field[j] -= self.weight[j] * corr;
        }
    }
}

/// Dense 5x5 solve with partial pivoting.
fn solve5(a: &[[f64; N_INV]; N_INV], b: &[f64; N_INV]) -> [f64; N_INV] {
    let mut m = *a;
    let mut x = *b;
    for col in 0..N_INV {
        let mut piv = col;
        for r in (col + 1)..N_INV {
            if m[r][col].abs() > m[piv][col].abs() {
                piv = r;
            }
        }
        m.swap(col, piv);
        x.swap(col, piv);
        let d = m[col][col];
        for r in (col + 1)..N_INV {
            let f = m[r][col] / d;
            for c in col..N_INV {
                m[r][c] -= f * m[col][c];
            }
            x[r] -= f * x[col];
        }
    }
    let mut out = [0.0; N_INV];
    for col in (0..N_INV).rev() {
        let mut acc = x[col];
        for c in (col + 1)..N_INV {
            acc -= m[col][c] * out[c];
        }
        out[col] = acc / m[col][col];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_zeroes_moments() {
        let grid = VelocityGrid::new(4.0, 9).unwrap();
        let proj = ConservationProjector::new(&grid);
        let mut field: Vec<f64> = (0..grid.len())
            .map(|i| ((i as f64 * 0.61).sin() + 0.3) * (-0.3 * grid.s[i]).exp())
            .collect();
        let before = proj.moments(&field);
        assert!(before.iter().any(|m| m.abs() > 1e-6));
        proj.make_conservative(&mut field);
        let after = proj.moments(&field);
        let scale: f64 = field.iter().map(|v| v.abs()).sum::<f64>() * grid.cell_weight();
        for a in 0..N_INV {
            assert!(
                after[a].abs() <= 1e-13 * scale.max(1.0),
                "moment {a}: {:.3e}",
                after[a]
            );
        }
    }

    #[test]
    fn moment_matching_hits_target() {
        let grid = VelocityGrid::new(4.0, 9).unwrap();
        let proj = ConservationProjector::new(&grid);
        let mut field: Vec<f64> = grid.s.iter().map(|s| (-0.5 * s).exp()).collect();
        let target = [1.0, 0.0, 0.1, 0.0, 3.0];
        proj.match_moments(&mut field, &target);
        let got = proj.moments(&field);
        for a in 0..N_INV {
            assert!((got[a] - target[a]).abs() < 1e-12, "moment {a}: {}", got[a]);
        }
    }

    #[test]
    fn solve5_roundtrip() {
        let a = [
            [4.0, 1.0, 0.0, 0.0, 1.0],
            [1.0, 3.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 2.0, 0.5, 0.0],
            [0.0, 0.0, 0.5, 2.0, 0.0],
            [1.0, 0.0, 0.0, 0.0, 5.0],
        ];
        let x_true = [1.0, -2.0, 0.5, 3.0, -1.0];
        let mut b = [0.0; 5];
        for r in 0..5 {
            for c in 0..5 {
                b[r] += a[r][c] * x_true[c];
            }
        }
        let x = solve5(&a, &b);
        for i in 0..5 {
            assert!((x[i] - x_true[i]).abs() < 1e-12);
        }
    }
}
