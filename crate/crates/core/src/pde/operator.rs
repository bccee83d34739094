//! Finite-difference diffusion operator and its banded Cholesky factor.

use serde::{Deserialize, Serialize};

use crate::control_space::Grid;
use crate::error::{Error, Result};

/// Constant diffusion coefficient of one state component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Diffusion {
    /// `a I`.
    Scalar { value: f64 },
    /// Full `d × d` tensor; only its symmetric part enters the operator.
    Full { matrix: Vec<Vec<f64>> },
}

impl Diffusion {
    pub fn scalar(value: f64) -> Self {
        Diffusion::Scalar { value }
    }

    /// Symmetric part padded to 2 × 2, checked positive definite.
    pub fn symmetric_part(&self, dim: usize) -> Result<[[f64; 2]; 2]> {
        let s = match self {
            Diffusion::Scalar { value } => [[*value, 0.0], [0.0, *value]],
            Diffusion::Full { matrix } => {
                if matrix.len() != dim || matrix.iter().any(|r| r.len() != dim) {
                    return Err(Error::DimensionMismatch {
                        what: "diffusion tensor",
                        expected: dim,
                        found: matrix.len(),
                    });
                }
                let mut s = [[0.0; 2]; 2];
                for i in 0..dim {
                    for j in 0..dim {
                        s[i][j] = 0.5 * (matrix[i][j] + matrix[j][i]);
                    }
                }
                s
            }
        };
        let ok = if dim == 1 {
            s[0][0] > 0.0
        } else {
            s[0][0] > 0.0 && s[0][0] * s[1][1] - s[0][1] * s[1][0] > 0.0
        };
        if !ok || s.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidProblem(
                "diffusion tensor is not positive definite".into(),
            ));
        }
        Ok(s)
    }
}

/// Symmetric banded matrix, lower band stored row-wise: `band[i * (b + 1) + d]`
/// holds entry `(i, i - d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    bandwidth: usize,
    band: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        BandedMatrix {
            n,
            bandwidth,
            band: vec![0.0; n * (bandwidth + 1)],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// Entry `(i, j)` of the symmetric matrix.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let d = i - j;
        if d > self.bandwidth {
            0.0
        } else {
            self.band[i * (self.bandwidth + 1) + d]
        }
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let d = i - j;
        debug_assert!(d <= self.bandwidth);
        self.band[i * (self.bandwidth + 1) + d] += v;
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let b = self.bandwidth;
        let mut out = vec![0.0; self.n];
        for i in 0..self.n {
            let row = &self.band[i * (b + 1)..(i + 1) * (b + 1)];
            out[i] += row[0] * x[i];
            for d in 1..=b.min(i) {
                let v = row[d];
                if v != 0.0 {
                    out[i] += v * x[i - d];
                    out[i - d] += v * x[i];
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// `I + s · self`.
    pub fn shifted_identity(&self, s: f64) -> BandedMatrix {
        let mut m = self.clone();
        for v in &mut m.band {
            *v *= s;
        }
        for i in 0..self.n {
            m.band[i * (self.bandwidth + 1)] += 1.0;
        }
        m
    }
}

/// Lower-triangular banded Cholesky factor `M = G Gᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedCholesky {
    g: BandedMatrix,
}

impl BandedCholesky {
    pub fn factor(m: &BandedMatrix) -> Result<Self> {
        let (n, b) = (m.n, m.bandwidth);
        let w = b + 1;
        let mut g = m.band.clone();
        for i in 0..n {
            let lo = i.saturating_sub(b);
            for j in lo..=i {
                let mut sum = g[i * w + (i - j)];
                for k in lo.max(j.saturating_sub(b))..j {
                    sum -= g[i * w + (i - k)] * g[j * w + (j - k)];
                }
                if i == j {
                    if !(sum > 0.0) {
                        return Err(Error::InvalidProblem(
                            "system matrix is not positive definite".into(),
                        ));
                    }
                    g[i * w] = sum.sqrt();
                } else {
                    g[i * w + (i - j)] = sum / g[j * w];
                }
            }
        }
        Ok(BandedCholesky {
            g: BandedMatrix { n, bandwidth: b, band: g },
        })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, b) = (self.g.n, self.g.bandwidth);
        let w = b + 1;
        let g = &self.g.band;
        for i in 0..n {
            let mut s = x[i];
            for k in i.saturating_sub(b)..i {
                s -= g[i * w + (i - k)] * x[k];
            }
            x[i] = s / g[i * w];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..(i + w).min(n) {
                s -= g[k * w + (k - i)] * x[k];
            }
            x[i] = s / g[i * w];
        }
    }
}

/// Central-difference `−div(A∇·)` on the interior nodes with homogeneous
/// Dirichlet data. In 2D the mixed derivative uses the four diagonal
/// neighbours.
pub fn assemble_diffusion(grid: &Grid, a: &Diffusion) -> Result<BandedMatrix> {
    let s = a.symmetric_part(grid.dim())?;
    let counts = grid.interior_counts();
    let n = grid.n_nodes();
    if grid.dim() == 1 {
        let h2 = grid.spacing(0).powi(2);
        let mut m = BandedMatrix::zeros(n, 1);
        for i in 0..n {
            m.add(i, i, 2.0 * s[0][0] / h2);
            if i > 0 {
                m.add(i, i - 1, -s[0][0] / h2);
            }
        }
        return Ok(m);
    }
    let (nx, ny) = (counts[0], counts[1]);
    let (hx, hy) = (grid.spacing(0), grid.spacing(1));
    let cx = s[0][0] / (hx * hx);
    let cy = s[1][1] / (hy * hy);
    let cxy = s[0][1] / (2.0 * hx * hy);
    let bandwidth = if cxy != 0.0 { nx + 1 } else { nx };
    let mut m = BandedMatrix::zeros(n, bandwidth);
    for iy in 0..ny {
        for ix in 0..nx {
            let i = ix + nx * iy;
            m.add(i, i, 2.0 * cx + 2.0 * cy);
            if ix > 0 {
                m.add(i, i - 1, -cx);
            }
            if iy > 0 {
                m.add(i, i - nx, -cy);
                if cxy != 0.0 {
                    if ix > 0 {
                        m.add(i, i - nx - 1, -cxy);
                    }
                    if ix + 1 < nx {
                        m.add(i, i - nx + 1, cxy);
                    }
                }
            }
        }
    }
    Ok(m)
}
