use std::io::Write;

use ndarray::{Array3, Axis};
use serde::{Deserialize, Serialize};

use crate::control_space::{Grid, GridSpec};
use crate::error::Result;

/// Nodal values on every time level, shaped `(nt + 1) × nodes × n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: Grid,
    state_dim: usize,
    values: Array3<f64>,
}

pub type StateTrajectory = Trajectory;
pub type AdjointTrajectory = Trajectory;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryFile {
    pub grid: GridSpec,
    pub state_dim: usize,
    /// One row per time level, node-major with the component innermost.
    pub values: Vec<Vec<f64>>,
}

impl Trajectory {
    pub(crate) fn new(grid: Grid, state_dim: usize, values: Array3<f64>) -> Self {
        Trajectory {
            grid,
            state_dim,
            values,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    /// Time level `k` as a node-major slice.
    pub fn slice(&self, k: usize) -> &[f64] {
        let start = k * self.values.len_of(Axis(1)) * self.state_dim;
        let len = self.values.len_of(Axis(1)) * self.state_dim;
        &self.values.as_slice().expect("standard layout")[start..start + len]
    }

    pub fn final_slice(&self) -> &[f64] {
        self.slice(self.grid.nt())
    }

    /// Discrete `L²(Ω)` norm of time level `k`.
    pub fn l2_norm(&self, k: usize) -> f64 {
        let n = self.state_dim;
        self.grid
            .quadrature_weights()
            .iter()
            .enumerate()
            .map(|(i, w)| w * self.slice(k)[i * n..(i + 1) * n].iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_file(&self) -> TrajectoryFile {
        TrajectoryFile {
            grid: self.grid.spec(),
            state_dim: self.state_dim,
            values: (0..=self.grid.nt()).map(|k| self.slice(k).to_vec()).collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_file())?)
    }

    /// CSV with a `#` comment header carrying the grid, then one row per
    /// time level: `step, t, v_0, v_1, …` in node-major order.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let g = &self.grid;
        writeln!(
            out,
            "# dim={} cells={:?} extents={:?} nt={} horizon={} state_dim={} nodes={} ordering=x-fastest",
            g.dim(),
            g.cells(),
            g.extents(),
            g.nt(),
            g.horizon(),
            self.state_dim,
            g.n_nodes()
        )?;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["step".to_string(), "t".to_string()];
        for node in 0..g.n_nodes() {
            for c in 0..self.state_dim {
                header.push(format!("n{node}c{c}"));
            }
        }
        w.write_record(&header)?;
        for k in 0..=g.nt() {
            let mut row = vec![k.to_string(), g.time(k).to_string()];
            row.extend(self.slice(k).iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}
