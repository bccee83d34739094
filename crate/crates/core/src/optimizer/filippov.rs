use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::pde::{atom_cost, average_field, running_cost, Control, ParabolicProblem, StepControl, Trajectory};
use crate::young_measures::RelaxedControl;

/// Relative slack on the running-cost inequality.
pub const COST_SLACK: f64 = 1e-9;
/// Mismatch below which a selection counts as exact.
pub const MISMATCH_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Exact,
    BestEffort,
}

/// One atom per time step reproducing the averaged field and not exceeding
/// the averaged cost, with the weighted `L²` field mismatch of each pick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    pub selection: Vec<usize>,
    pub mismatch: Vec<f64>,
    /// Whether the pick satisfied the cost inequality.
    pub cost_admissible: Vec<bool>,
    pub max_mismatch: f64,
    pub verdict: Verdict,
}

pub fn filippov_extract(problem: &ParabolicProblem, mu: &RelaxedControl, y: &Trajectory) -> Result<Extraction> {
    let grid = problem.grid();
    let control = Control::from(mu);
    let dict = mu.dictionary();
    let w = grid.quadrature_weights();
    let n = problem.state_dim();
    let mut selection = Vec::with_capacity(grid.nt());
    let mut mismatch = Vec::with_capacity(grid.nt());
    let mut admissible = Vec::with_capacity(grid.nt());
    let mut exact = true;
    for k in 0..grid.nt() {
        let t = grid.time(k);
        let yk = y.slice(k);
        let step = control.step(k);
        let target = average_field(problem.field(), grid, t, yk, &step)?;
        let bound = running_cost(problem, t, yk, &step);
        let bound = bound + COST_SLACK * (1.0 + bound.abs());
        let mut best: Option<(usize, f64, bool)> = None;
        for l in 0..dict.len() {
            let e = ndarray::Array1::from_shape_fn(dict.len(), |j| if j == l { 1.0 } else { 0.0 });
            let dirac = StepControl::Fine {
                dictionary: dict,
                weights: e.view(),
            };
            let f = average_field(problem.field(), grid, t, yk, &dirac)?;
            let m = (0..grid.n_nodes())
                .map(|i| w[i] * (0..n).map(|c| (f[i * n + c] - target[i * n + c]).powi(2)).sum::<f64>())
                .sum::<f64>()
                .sqrt();
            let ok = atom_cost(problem, t, yk, dict.atom(l)) <= bound;
            let better = match best {
                None => true,
                Some((_, bm, bok)) => (ok && !bok) || (ok == bok && m < bm),
            };
            if better {
                best = Some((l, m, ok));
            }
        }
        let (l, m, ok) = best.expect("non-empty dictionary");
        exact &= ok && m <= MISMATCH_TOL;
        selection.push(l);
        mismatch.push(m);
        admissible.push(ok);
    }
    Ok(Extraction {
        max_mismatch: mismatch.iter().copied().fold(0.0, f64::max),
        selection,
        mismatch,
        cost_admissible: admissible,
        verdict: if exact { Verdict::Exact } else { Verdict::BestEffort },
    })
}
