use serde::{Deserialize, Serialize};

use super::operator::{assemble_diffusion, BandedCholesky, BandedMatrix, Diffusion};
use crate::control_space::{ControlSet, Grid};
use crate::error::{Error, Result};
use crate::young_measures::{CompositeFunctional, Dims, Integrand};

/// Running cost: a local density `φ(t, x, y, z)` or a composite functional
/// `Σ_i Π_j φ̂_ij(∫_Ω h_ij(t, x, y, z) dx)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum RunningCost {
    Local(Integrand),
    Composite(CompositeFunctional),
}

impl RunningCost {
    pub fn is_time_dependent(&self) -> bool {
        match self {
            RunningCost::Local(h) => h.is_time_dependent(),
            RunningCost::Composite(c) => c.is_time_dependent(),
        }
    }
}

/// Where state derivatives come from. `Perturbed` adds a constant bias to
/// every `∂f/∂y` entry and exists to exercise gradient checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DerivativeSource {
    #[default]
    Analytic,
    Missing,
    Perturbed { bias: f64 },
}

/// Raw problem data. `diffusion` holds one entry per state component or a
/// single entry shared by all; `initial` is node-major with the component
/// innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemData {
    pub grid: Grid,
    pub state_dim: usize,
    pub diffusion: Vec<Diffusion>,
    pub field: Vec<Integrand>,
    pub running: RunningCost,
    pub terminal: Integrand,
    pub initial: Vec<f64>,
    pub control_set: ControlSet,
    pub derivatives: DerivativeSource,
}

/// A validated problem with its diffusion operators assembled and the
/// implicit-step matrices `I + Δt L` factorized.
#[derive(Debug, Clone)]
pub struct ParabolicProblem {
    data: ProblemData,
    operators: Vec<BandedMatrix>,
    factors: Vec<BandedCholesky>,
}

impl ParabolicProblem {
    pub fn new(data: ProblemData) -> Result<Self> {
        let grid = &data.grid;
        let n = data.state_dim;
        if n == 0 {
            return Err(Error::InvalidProblem("state dimension must be positive".into()));
        }
        if data.field.len() != n {
            return Err(Error::DimensionMismatch {
                what: "semilinear field components",
                expected: n,
                found: data.field.len(),
            });
        }
        if data.diffusion.len() != n && data.diffusion.len() != 1 {
            return Err(Error::DimensionMismatch {
                what: "diffusion tensors",
                expected: n,
                found: data.diffusion.len(),
            });
        }
        if data.initial.len() != grid.n_nodes() * n {
            return Err(Error::DimensionMismatch {
                what: "initial state",
                expected: grid.n_nodes() * n,
                found: data.initial.len(),
            });
        }
        if data.initial.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidProblem("initial state is not finite".into()));
        }
        let dims = Dims {
            space: grid.dim(),
            nodes: grid.n_nodes(),
            state: n,
            control: data.control_set.dim(),
        };
        for f in &data.field {
            f.validate(dims)?;
        }
        match &data.running {
            RunningCost::Local(h) => h.validate(dims)?,
            RunningCost::Composite(c) => c.validate(dims)?,
        }
        data.terminal
            .validate(Dims { control: 0, ..dims })
            .map_err(|e| Error::InvalidProblem(format!("terminal cost: {e}")))?;

        let mut operators = Vec::with_capacity(n);
        let mut factors = Vec::with_capacity(n);
        for c in 0..n {
            let a = &data.diffusion[if data.diffusion.len() == 1 { 0 } else { c }];
            let op = assemble_diffusion(grid, a)?;
            factors.push(BandedCholesky::factor(&op.shifted_identity(grid.dt()))?);
            operators.push(op);
        }
        Ok(ParabolicProblem {
            data,
            operators,
            factors,
        })
    }

    pub fn data(&self) -> &ProblemData {
        &self.data
    }

    pub fn grid(&self) -> &Grid {
        &self.data.grid
    }

    pub fn state_dim(&self) -> usize {
        self.data.state_dim
    }

    pub fn control_set(&self) -> &ControlSet {
        &self.data.control_set
    }

    pub fn field(&self) -> &[Integrand] {
        &self.data.field
    }

    pub fn running(&self) -> &RunningCost {
        &self.data.running
    }

    pub fn terminal(&self) -> &Integrand {
        &self.data.terminal
    }

    pub fn initial(&self) -> &[f64] {
        &self.data.initial
    }

    pub fn derivatives(&self) -> DerivativeSource {
        self.data.derivatives
    }

    /// Diffusion operator of state component `c`.
    pub fn operator(&self, c: usize) -> &BandedMatrix {
        &self.operators[c]
    }


    /// True when neither the field nor the costs depend on time.
    pub fn is_autonomous(&self) -> bool {
        !self.data.field.iter().any(Integrand::is_time_dependent)
            && !self.data.running.is_time_dependent()
    }

    /// The same problem on another grid. Nodal data (initial state) is
    /// resampled by the caller through `initial`.
    pub fn with_grid(&self, grid: Grid, initial: Vec<f64>) -> Result<Self> {
        ParabolicProblem::new(ProblemData {
            grid,
            initial,
            ..self.data.clone()
        })
    }

    /// The same problem with a different derivative source.
    pub fn with_derivatives(&self, derivatives: DerivativeSource) -> Self {
        ParabolicProblem {
            data: ProblemData {
                derivatives,
                ..self.data.clone()
            },
            operators: self.operators.clone(),
            factors: self.factors.clone(),
        }
    }

    /// Applies `(I + Δt L)^{-1}` componentwise to a node-major slice.
    pub(crate) fn implicit_solve(&self, rhs: &mut [f64]) {
        let n = self.data.state_dim;
        if n == 1 {
            self.factors[0].solve_in_place(rhs);
            return;
        }
        let nodes = self.grid().n_nodes();
        let mut buf = vec![0.0; nodes];
        for c in 0..n {
            for (i, b) in buf.iter_mut().enumerate() {
                *b = rhs[i * n + c];
            }
            self.factors[c].solve_in_place(&mut buf);
            for (i, b) in buf.iter().enumerate() {
                rhs[i * n + c] = *b;
            }
        }
    }

    /// `L y` componentwise on a node-major slice.
    pub(crate) fn apply_operator(&self, y: &[f64]) -> Vec<f64> {
        let n = self.data.state_dim;
        if n == 1 {
            return self.operators[0].apply(y);
        }
        let nodes = self.grid().n_nodes();
        let mut out = vec![0.0; y.len()];
        for c in 0..n {
            let comp: Vec<f64> = (0..nodes).map(|i| y[i * n + c]).collect();
            for (i, v) in self.operators[c].apply(&comp).into_iter().enumerate() {
                out[i * n + c] = v;
            }
        }
        out
    }
}
