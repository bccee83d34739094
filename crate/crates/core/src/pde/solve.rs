use ndarray::{Array3, ArrayView1, ArrayView2, ArrayView3, Axis};

use super::problem::{DerivativeSource, ParabolicProblem, RunningCost};
use super::trajectory::Trajectory;
use crate::control_space::{ControlDictionary, ControlField, Grid};
use crate::error::{Error, Result};
use crate::young_measures::{CompositeFunctional, Integrand, RelaxedControl, Sample, SpaceTimeYoungMeasure};

/// Either relaxation, borrowed. The raw constructors skip the simplex check
/// so that sensitivities can be taken along arbitrary weight directions;
/// every map below is affine in the weights.
#[derive(Debug, Clone, Copy)]
pub enum Control<'a> {
    Fine {
        dictionary: &'a ControlDictionary,
        weights: ArrayView2<'a, f64>,
    },
    Coarse {
        support: &'a [Vec<f64>],
        weights: ArrayView3<'a, f64>,
    },
}

impl<'a> From<&'a RelaxedControl> for Control<'a> {
    fn from(mu: &'a RelaxedControl) -> Self {
        Control::Fine {
            dictionary: mu.dictionary(),
            weights: mu.weights(),
        }
    }
}

impl<'a> From<&'a SpaceTimeYoungMeasure> for Control<'a> {
    fn from(nu: &'a SpaceTimeYoungMeasure) -> Self {
        Control::Coarse {
            support: nu.support(),
            weights: nu.weights(),
        }
    }
}

/// One time step of a [`Control`].
#[derive(Debug, Clone, Copy)]
pub enum StepControl<'a> {
    Fine {
        dictionary: &'a ControlDictionary,
        weights: ArrayView1<'a, f64>,
    },
    Coarse {
        support: &'a [Vec<f64>],
        weights: ArrayView2<'a, f64>,
    },
}

impl<'a> Control<'a> {
    pub fn step(&self, k: usize) -> StepControl<'a> {
        match *self {
            Control::Fine {
                dictionary,
                weights,
            } => StepControl::Fine {
                dictionary,
                weights: weights.index_axis_move(Axis(0), k),
            },
            Control::Coarse { support, weights } => StepControl::Coarse {
                support,
                weights: weights.index_axis_move(Axis(0), k),
            },
        }
    }

    pub fn nt(&self) -> usize {
        match self {
            Control::Fine { weights, .. } => weights.nrows(),
            Control::Coarse { weights, .. } => weights.dim().0,
        }
    }

    fn check(&self, problem: &ParabolicProblem) -> Result<()> {
        let grid = problem.grid();
        if self.nt() != grid.nt() {
            return Err(Error::DimensionMismatch {
                what: "control time steps",
                expected: grid.nt(),
                found: self.nt(),
            });
        }
        let m = problem.control_set().dim();
        match self {
            Control::Fine {
                dictionary,
                weights,
            } => {
                if dictionary.grid().n_nodes() != grid.n_nodes() {
                    return Err(Error::DimensionMismatch {
                        what: "dictionary nodes",
                        expected: grid.n_nodes(),
                        found: dictionary.grid().n_nodes(),
                    });
                }
                if weights.ncols() != dictionary.len() {
                    return Err(Error::DimensionMismatch {
                        what: "weights per step",
                        expected: dictionary.len(),
                        found: weights.ncols(),
                    });
                }
                if dictionary.control_set().dim() != m {
                    return Err(Error::DimensionMismatch {
                        what: "control dimension",
                        expected: m,
                        found: dictionary.control_set().dim(),
                    });
                }
            }
            Control::Coarse { support, weights } => {
                let (_, nodes, z) = weights.dim();
                if nodes != grid.n_nodes() || z != support.len() {
                    return Err(Error::DimensionMismatch {
                        what: "Young measure weights",
                        expected: grid.n_nodes() * support.len(),
                        found: nodes * z,
                    });
                }
                if support.iter().any(|p| p.len() != m) {
                    return Err(Error::DimensionMismatch {
                        what: "control dimension",
                        expected: m,
                        found: support.first().map_or(0, Vec::len),
                    });
                }
            }
        }
        Ok(())
    }
}

impl StepControl<'_> {
    /// Calls `g(weight, z)` for every mixture component at `node`, skipping
    /// zero weights.
    pub fn for_each_at(&self, node: usize, mut g: impl FnMut(f64, &[f64])) {
        match self {
            StepControl::Fine {
                dictionary,
                weights,
            } => {
                for (l, &w) in weights.iter().enumerate() {
                    if w != 0.0 {
                        g(w, dictionary.atom(l).at(node));
                    }
                }
            }
            StepControl::Coarse { support, weights } => {
                for (j, &w) in weights.row(node).iter().enumerate() {
                    if w != 0.0 {
                        g(w, &support[j]);
                    }
                }
            }
        }
    }
}

fn sample<'a>(grid: &Grid, t: f64, node: usize, y: &'a [f64], z: &'a [f64]) -> Sample<'a> {
    Sample {
        t,
        node,
        x: grid.node_coords(node),
        y,
        z,
    }
}

/// Measure-averaged semilinear field at time `t`, node-major with the state
/// component innermost.
pub fn average_field(
    field: &[Integrand],
    grid: &Grid,
    t: f64,
    y: &[f64],
    control: &StepControl,
) -> Result<Vec<f64>> {
    let n = field.len();
    if y.len() != grid.n_nodes() * n {
        return Err(Error::DimensionMismatch {
            what: "state slice",
            expected: grid.n_nodes() * n,
            found: y.len(),
        });
    }
    let mut out = vec![0.0; y.len()];
    for node in 0..grid.n_nodes() {
        let yn = &y[node * n..(node + 1) * n];
        let slot = &mut out[node * n..(node + 1) * n];
        control.for_each_at(node, |w, z| {
            let s = sample(grid, t, node, yn, z);
            for (c, f) in field.iter().enumerate() {
                slot[c] += w * f.eval(&s);
            }
        });
    }
    Ok(out)
}

/// `∫_Ω h_ij(t, x, y, u(x)) dx` for every factor of `v`.
fn composite_inner(v: &CompositeFunctional, grid: &Grid, t: f64, y: &[f64], n: usize, u: &ControlField) -> Vec<f64> {
    let w = grid.quadrature_weights();
    v.factors()
        .map(|f| {
            (0..grid.n_nodes())
                .map(|node| w[node] * f.integrand.eval(&sample(grid, t, node, &y[node * n..(node + 1) * n], u.at(node))))
                .sum()
        })
        .collect()
}

/// Measure-averaged inner integrals of a composite functional under a
/// coarse step control.
pub(crate) fn composite_inner_coarse(
    v: &CompositeFunctional,
    grid: &Grid,
    t: f64,
    y: &[f64],
    n: usize,
    control: &StepControl,
) -> Vec<f64> {
    let w = grid.quadrature_weights();
    v.factors()
        .map(|f| {
            let mut total = 0.0;
            for node in 0..grid.n_nodes() {
                let yn = &y[node * n..(node + 1) * n];
                let mut acc = 0.0;
                control.for_each_at(node, |p, z| acc += p * f.integrand.eval(&sample(grid, t, node, yn, z)));
                total += w[node] * acc;
            }
            total
        })
        .collect()
}

/// Running cost `c_k(u)` of a single control field at state `y`.
pub fn atom_cost(problem: &ParabolicProblem, t: f64, y: &[f64], u: &ControlField) -> f64 {
    let grid = problem.grid();
    let n = problem.state_dim();
    match problem.running() {
        RunningCost::Local(phi) => {
            let w = grid.quadrature_weights();
            (0..grid.n_nodes())
                .map(|node| w[node] * phi.eval(&sample(grid, t, node, &y[node * n..(node + 1) * n], u.at(node))))
                .sum()
        }
        RunningCost::Composite(v) => v.combine(&composite_inner(v, grid, t, y, n, u)),
    }
}

/// Relaxed running cost `R_k(y)` at time `t`.
pub fn running_cost(problem: &ParabolicProblem, t: f64, y: &[f64], control: &StepControl) -> f64 {
    let grid = problem.grid();
    let n = problem.state_dim();
    match (problem.running(), control) {
        (RunningCost::Local(phi), _) => {
            let w = grid.quadrature_weights();
            let mut total = 0.0;
            for node in 0..grid.n_nodes() {
                let yn = &y[node * n..(node + 1) * n];
                let mut acc = 0.0;
                control.for_each_at(node, |p, z| acc += p * phi.eval(&sample(grid, t, node, yn, z)));
                total += w[node] * acc;
            }
            total
        }
        (
            RunningCost::Composite(_),
            StepControl::Fine {
                dictionary,
                weights,
            },
        ) => weights
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != 0.0)
            .map(|(l, &p)| p * atom_cost(problem, t, y, dictionary.atom(l)))
            .sum(),
        (RunningCost::Composite(v), StepControl::Coarse { .. }) => {
            v.combine(&composite_inner_coarse(v, grid, t, y, n, control))
        }
    }
}

/// `∇_y R_k(y)`, quadrature weights included.
fn running_cost_gradient(problem: &ParabolicProblem, t: f64, y: &[f64], control: &StepControl) -> Vec<f64> {
    let grid = problem.grid();
    let n = problem.state_dim();
    let w = grid.quadrature_weights();
    let mut out = vec![0.0; y.len()];
    let mut tmp = vec![0.0; n];
    match (problem.running(), control) {
        (RunningCost::Local(phi), _) => {
            for node in 0..grid.n_nodes() {
                let yn = &y[node * n..(node + 1) * n];
                let slot = &mut out[node * n..(node + 1) * n];
                control.for_each_at(node, |p, z| {
                    tmp.iter_mut().for_each(|v| *v = 0.0);
                    phi.add_dy(&sample(grid, t, node, yn, z), &mut tmp);
                    for c in 0..n {
                        slot[c] += w[node] * p * tmp[c];
                    }
                });
            }
        }
        (
            RunningCost::Composite(v),
            StepControl::Fine {
                dictionary,
                weights,
            },
        ) => {
            for (l, &p) in weights.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let u = dictionary.atom(l);
                let g = v.combine_gradient(&composite_inner(v, grid, t, y, n, u));
                for (f, gf) in v.factors().zip(&g) {
                    for node in 0..grid.n_nodes() {
                        tmp.iter_mut().for_each(|v| *v = 0.0);
                        f.integrand.add_dy(&sample(grid, t, node, &y[node * n..(node + 1) * n], u.at(node)), &mut tmp);
                        for c in 0..n {
                            out[node * n + c] += p * gf * w[node] * tmp[c];
                        }
                    }
                }
            }
        }
        (RunningCost::Composite(v), StepControl::Coarse { .. }) => {
            let g = v.combine_gradient(&composite_inner_coarse(v, grid, t, y, n, control));
            for (f, gf) in v.factors().zip(&g) {
                for node in 0..grid.n_nodes() {
                    let yn = &y[node * n..(node + 1) * n];
                    control.for_each_at(node, |p, z| {
                        tmp.iter_mut().for_each(|v| *v = 0.0);
                        f.integrand.add_dy(&sample(grid, t, node, yn, z), &mut tmp);
                        for c in 0..n {
                            out[node * n + c] += p * gf * w[node] * tmp[c];
                        }
                    });
                }
            }
        }
    }
    out
}

/// `(∂F/∂y)ᵀ q` for the measure-averaged field, nodewise.
fn field_jacobian_transpose(problem: &ParabolicProblem, t: f64, y: &[f64], control: &StepControl, q: &[f64]) -> Vec<f64> {
    let grid = problem.grid();
    let n = problem.state_dim();
    let bias = match problem.derivatives() {
        DerivativeSource::Perturbed { bias } => bias,
        _ => 0.0,
    };
    let mut out = vec![0.0; y.len()];
    let mut tmp = vec![0.0; n];
    for node in 0..grid.n_nodes() {
        let yn = &y[node * n..(node + 1) * n];
        let qn = &q[node * n..(node + 1) * n];
        let slot = &mut out[node * n..(node + 1) * n];
        control.for_each_at(node, |p, z| {
            let s = sample(grid, t, node, yn, z);
            for (c, f) in problem.field().iter().enumerate() {
                tmp.iter_mut().for_each(|v| *v = 0.0);
                f.add_dy(&s, &mut tmp);
                for d in 0..n {
                    slot[d] += p * qn[c] * (tmp[d] + bias);
                }
            }
        });
    }
    out
}

/// IMEX march `(I + Δt L) y_{k+1} = y_k + Δt F_k(y_k)`.
pub fn solve_forward<'a>(problem: &ParabolicProblem, control: impl Into<Control<'a>>) -> Result<Trajectory> {
    let control = control.into();
    control.check(problem)?;
    let grid = problem.grid();
    let (nt, dt) = (grid.nt(), grid.dt());
    let n = problem.state_dim();
    let mut values = Array3::zeros((nt + 1, grid.n_nodes(), n));
    let mut y = problem.initial().to_vec();
    values
        .index_axis_mut(Axis(0), 0)
        .as_slice_mut()
        .expect("standard layout")
        .copy_from_slice(&y);
    for k in 0..nt {
        let f = average_field(problem.field(), grid, grid.time(k), &y, &control.step(k))?;
        for (v, fv) in y.iter_mut().zip(&f) {
            *v += dt * fv;
        }
        problem.implicit_solve(&mut y);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step: k + 1 });
        }
        values
            .index_axis_mut(Axis(0), k + 1)
            .as_slice_mut()
            .expect("standard layout")
            .copy_from_slice(&y);
    }
    Ok(Trajectory::new(grid.clone(), n, values))
}

/// Rectangle rule in time for the running cost plus `∫_Ω φ_T(x, y(T)) dx`.
pub fn evaluate_cost<'a>(problem: &ParabolicProblem, y: &Trajectory, control: impl Into<Control<'a>>) -> Result<f64> {
    let control = control.into();
    control.check(problem)?;
    let grid = problem.grid();
    let mut total = 0.0;
    for k in 0..grid.nt() {
        total += grid.dt() * running_cost(problem, grid.time(k), y.slice(k), &control.step(k));
    }
    Ok(total + terminal_cost(problem, y.slice(grid.nt())))
}

pub fn terminal_cost(problem: &ParabolicProblem, y: &[f64]) -> f64 {
    let grid = problem.grid();
    let n = problem.state_dim();
    let w = grid.quadrature_weights();
    let t = grid.horizon();
    (0..grid.n_nodes())
        .map(|node| w[node] * problem.terminal().eval(&sample(grid, t, node, &y[node * n..(node + 1) * n], &[])))
        .sum()
}

/// Forward solve and cost in one call; divergence maps to `+∞`.
pub fn reduced_cost<'a>(problem: &ParabolicProblem, control: impl Into<Control<'a>>) -> Result<f64> {
    let control = control.into();
    match solve_forward(problem, control) {
        Ok(y) => evaluate_cost(problem, &y, control),
        Err(Error::Divergence { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// Discrete adjoint of the IMEX scheme and the cost quadrature.
///
/// Row `k < nt` holds `χ_k = −q_{k+1} / w`, where `q_{k+1} = (I + Δt L)^{-1}
/// ∂J/∂y_{k+1}` and `w` are the nodal quadrature weights, so that
/// `∂J/∂μ_{k,l} = −Δt (Σ_x w_x ⟨f(t_k, x, y_k, u_l), χ_k⟩ − c_k(u_l))`.
/// Row `nt` holds `−φ_T′(y(T))` nodally.
pub fn solve_adjoint<'a>(problem: &ParabolicProblem, y: &Trajectory, control: impl Into<Control<'a>>) -> Result<Trajectory> {
    if problem.derivatives() == DerivativeSource::Missing {
        return Err(Error::MissingDerivatives);
    }
    let control = control.into();
    control.check(problem)?;
    let grid = problem.grid();
    let (nt, dt) = (grid.nt(), grid.dt());
    let n = problem.state_dim();
    let w = grid.quadrature_weights();
    let mut chi = Array3::zeros((nt + 1, grid.n_nodes(), n));

    let y_t = y.slice(nt);
    let mut p = vec![0.0; y_t.len()];
    let mut tmp = vec![0.0; n];
    for node in 0..grid.n_nodes() {
        tmp.iter_mut().for_each(|v| *v = 0.0);
        problem
            .terminal()
            .add_dy(&sample(grid, grid.horizon(), node, &y_t[node * n..(node + 1) * n], &[]), &mut tmp);
        for c in 0..n {
            chi[[nt, node, c]] = -tmp[c];
            p[node * n + c] = w[node] * tmp[c];
        }
    }
    for k in (0..nt).rev() {
        let mut q = p;
        problem.implicit_solve(&mut q);
        for node in 0..grid.n_nodes() {
            for c in 0..n {
                chi[[k, node, c]] = -q[node * n + c] / w[node];
            }
        }
        let t = grid.time(k);
        let step = control.step(k);
        let yk = y.slice(k);
        let gr = running_cost_gradient(problem, t, yk, &step);
        let jt = field_jacobian_transpose(problem, t, yk, &step, &q);
        p = (0..q.len()).map(|i| dt * gr[i] + q[i] + dt * jt[i]).collect();
    }
    Ok(Trajectory::new(grid.clone(), n, chi))
}
