use ndarray::{Array2, Array3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control_space::ControlField;
use crate::error::{Error, Result};
use crate::pde::{
    atom_cost, average_field, composite_inner_coarse, running_cost, Control, ParabolicProblem,
    RunningCost, StepControl, Trajectory,
};
use crate::young_measures::{Integrand, RelaxedControl, Sample, SpaceTimeYoungMeasure};

fn sample<'a>(problem: &ParabolicProblem, t: f64, node: usize, y: &'a [f64], z: &'a [f64]) -> Sample<'a> {
    Sample {
        t,
        node,
        x: problem.grid().node_coords(node),
        y,
        z,
    }
}

fn pairing(problem: &ParabolicProblem, a: &[f64], b: &[f64]) -> f64 {
    let n = problem.state_dim();
    problem
        .grid()
        .quadrature_weights()
        .iter()
        .enumerate()
        .map(|(i, w)| w * (0..n).map(|c| a[i * n + c] * b[i * n + c]).sum::<f64>())
        .sum()
}

/// `h_k(u) = ∫_Ω ⟨f(t_k, x, y_k, u), χ_k⟩ dx − c_k(u)` for one control field.
///
/// `c_k(u)` is the running cost of the field itself. For composite costs
/// this is `Σ_i Π_j φ̂_ij(∫ h_ij(u))`; the fine relaxed cost is linear in
/// the weights, so no linearization of `φ̂` is involved.
pub fn hamiltonian(problem: &ParabolicProblem, y: &Trajectory, chi: &Trajectory, k: usize, u: &ControlField) -> f64 {
    let grid = problem.grid();
    let t = grid.time(k);
    let yk = y.slice(k);
    let n = problem.state_dim();
    let w = grid.quadrature_weights();
    let mut pair = 0.0;
    for node in 0..grid.n_nodes() {
        let yn = &yk[node * n..(node + 1) * n];
        let s = sample(problem, t, node, yn, u.at(node));
        let chin = &chi.slice(k)[node * n..(node + 1) * n];
        pair += w[node] * problem.field().iter().zip(chin).map(|(f, c)| f.eval(&s) * c).sum::<f64>();
    }
    pair - atom_cost(problem, t, yk, u)
}

/// `f(t_k, x, y, z) · χ_k(x) − φ(t_k, x, y, z)` at one node.
pub fn pointwise_hamiltonian(
    problem: &ParabolicProblem,
    y: &Trajectory,
    chi: &Trajectory,
    k: usize,
    node: usize,
    z: &[f64],
) -> Result<f64> {
    let RunningCost::Local(phi) = problem.running() else {
        return Err(Error::NotPointwise);
    };
    Ok(pointwise_with_density(problem, y, chi, k, node, z, |s| phi.eval(s)))
}

fn pointwise_with_density(
    problem: &ParabolicProblem,
    y: &Trajectory,
    chi: &Trajectory,
    k: usize,
    node: usize,
    z: &[f64],
    density: impl Fn(&Sample) -> f64,
) -> f64 {
    let n = problem.state_dim();
    let t = problem.grid().time(k);
    let s = sample(problem, t, node, &y.slice(k)[node * n..(node + 1) * n], z);
    let chin = &chi.slice(k)[node * n..(node + 1) * n];
    problem.field().iter().zip(chin).map(|(f, c)| f.eval(&s) * c).sum::<f64>() - density(&s)
}

/// Fine Hamiltonian table `H[k, l] = h_k(u_l)`.
pub fn hamiltonian_table(problem: &ParabolicProblem, mu: &RelaxedControl, y: &Trajectory, chi: &Trajectory) -> Array2<f64> {
    fine_table(problem, mu.dictionary(), y, chi)
}

pub(crate) fn fine_table(
    problem: &ParabolicProblem,
    dictionary: &crate::control_space::ControlDictionary,
    y: &Trajectory,
    chi: &Trajectory,
) -> Array2<f64> {
    let nt = problem.grid().nt();
    let rows: Vec<Vec<f64>> = (0..nt)
        .into_par_iter()
        .map(|k| dictionary.atoms().iter().map(|u| hamiltonian(problem, y, chi, k, u)).collect())
        .collect();
    Array2::from_shape_fn((nt, dictionary.len()), |(k, l)| rows[k][l])
}

/// Coarse Hamiltonian table `H[k, x, j]`. For composite costs the density
/// is the chain-rule linearization `Σ_ij ∂φ̂ · h_ij(t, x, y, z)` at the
/// current measure-averaged inner integrals.
pub(crate) fn coarse_table(problem: &ParabolicProblem, control: &Control, support: &[Vec<f64>], y: &Trajectory, chi: &Trajectory) -> Array3<f64> {
    let grid = problem.grid();
    let (nt, nodes) = (grid.nt(), grid.n_nodes());
    let n = problem.state_dim();
    let planes: Vec<Vec<f64>> = (0..nt)
        .into_par_iter()
        .map(|k| {
            let mut plane = Vec::with_capacity(nodes * support.len());
            match problem.running() {
                RunningCost::Local(phi) => {
                    for node in 0..nodes {
                        for z in support {
                            plane.push(pointwise_with_density(problem, y, chi, k, node, z, |s| phi.eval(s)));
                        }
                    }
                }
                RunningCost::Composite(v) => {
                    let step = control.step(k);
                    let inner = composite_inner_coarse(v, grid, grid.time(k), y.slice(k), n, &step);
                    let g = v.combine_gradient(&inner);
                    let factors: Vec<&Integrand> = v.factors().map(|f| &f.integrand).collect();
                    for node in 0..nodes {
                        for z in support {
                            plane.push(pointwise_with_density(problem, y, chi, k, node, z, |s| {
                                factors.iter().zip(&g).map(|(h, gi)| gi * h.eval(s)).sum()
                            }));
                        }
                    }
                }
            }
            plane
        })
        .collect();
    Array3::from_shape_vec((nt, nodes, support.len()), planes.into_iter().flatten().collect()).expect("shape")
}

/// Maximum-principle residuals `r = max H − Σ weights · H` per block.
pub(crate) fn residuals(table: &[f64], weights: &[f64], atoms: usize) -> Vec<f64> {
    table
        .chunks(atoms)
        .zip(weights.chunks(atoms))
        .map(|(h, w)| {
            let max = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let avg: f64 = h.iter().zip(w).map(|(a, b)| a * b).sum();
            (max - avg).max(0.0)
        })
        .collect()
}

/// Lowest-index argmax per block.
pub(crate) fn argmax_blocks(table: &[f64], atoms: usize) -> Vec<usize> {
    table
        .chunks(atoms)
        .map(|h| {
            let mut best = 0;
            for (i, v) in h.iter().enumerate() {
                if *v > h[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// Per-step (fine) residual profile with its maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub profile: Vec<f64>,
    pub max: f64,
}

/// Fine maximum-principle residual `r_k = max_l h_k(u_l) − Σ_l μ_kl h_k(u_l)`.
pub fn mp_residual(problem: &ParabolicProblem, mu: &RelaxedControl, y: &Trajectory, chi: &Trajectory) -> Residual {
    let table = hamiltonian_table(problem, mu, y, chi);
    let r = residuals(table.as_slice().expect("standard layout"), mu.weights().as_slice().expect("standard layout"), mu.dictionary().len());
    let max = r.iter().copied().fold(0.0, f64::max);
    Residual { profile: r, max }
}

/// Coarse residual per cell, shaped `nt × nodes`, with its maximum.
pub fn mp_residual_young(problem: &ParabolicProblem, nu: &SpaceTimeYoungMeasure, y: &Trajectory, chi: &Trajectory) -> (Array2<f64>, f64) {
    let table = coarse_table(problem, &Control::from(nu), nu.support(), y, chi);
    let z = nu.support().len();
    let r = residuals(table.as_slice().expect("standard layout"), nu.weights().as_slice().expect("standard layout"), z);
    let max = r.iter().copied().fold(0.0, f64::max);
    let grid = problem.grid();
    (Array2::from_shape_vec((grid.nt(), grid.n_nodes()), r).expect("shape"), max)
}

/// Fine linear minimization oracle: the Dirac control at the lowest-index
/// maximizer of `h_k` for every step.
pub fn lmo(problem: &ParabolicProblem, mu: &RelaxedControl, y: &Trajectory, chi: &Trajectory) -> Result<RelaxedControl> {
    let table = hamiltonian_table(problem, mu, y, chi);
    let picks = argmax_blocks(table.as_slice().expect("standard layout"), mu.dictionary().len());
    RelaxedControl::from_atoms(mu.dictionary().clone(), &picks)
}

/// Coarse oracle: the Dirac measure at the lowest-index maximizer per cell.
pub fn lmo_young(problem: &ParabolicProblem, nu: &SpaceTimeYoungMeasure, y: &Trajectory, chi: &Trajectory) -> Result<SpaceTimeYoungMeasure> {
    let table = coarse_table(problem, &Control::from(nu), nu.support(), y, chi);
    let grid = problem.grid();
    let picks = argmax_blocks(table.as_slice().expect("standard layout"), nu.support().len());
    let index = Array2::from_shape_vec((grid.nt(), grid.n_nodes()), picks).expect("shape");
    SpaceTimeYoungMeasure::from_indices(grid.clone(), nu.control_set().clone(), nu.support().to_vec(), &index)
}

/// Time profile of the augmented Hamiltonian
/// `H_k = ⟨F̄_k − L y_k, χ_k⟩ − R_k` and its dispersion
/// `(max − min) / (1 + |mean|)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianProfile {
    pub profile: Vec<f64>,
    pub dispersion: f64,
    pub autonomous: bool,
}

pub fn hamiltonian_constancy<'a>(
    problem: &ParabolicProblem,
    control: impl Into<Control<'a>>,
    y: &Trajectory,
    chi: &Trajectory,
) -> Result<HamiltonianProfile> {
    let control = control.into();
    let grid = problem.grid();
    let mut profile = Vec::with_capacity(grid.nt());
    for k in 0..grid.nt() {
        let t = grid.time(k);
        let step: StepControl = control.step(k);
        let yk = y.slice(k);
        let f = average_field(problem.field(), grid, t, yk, &step)?;
        let ly = problem.apply_operator(yk);
        let drift: Vec<f64> = f.iter().zip(&ly).map(|(a, b)| a - b).collect();
        profile.push(pairing(problem, &drift, chi.slice(k)) - running_cost(problem, t, yk, &step));
    }
    Ok(HamiltonianProfile {
        dispersion: dispersion(&profile),
        profile,
        autonomous: problem.is_autonomous(),
    })
}

pub(crate) fn dispersion(profile: &[f64]) -> f64 {
    if profile.is_empty() {
        return 0.0;
    }
    let max = profile.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = profile.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = profile.iter().sum::<f64>() / profile.len() as f64;
    (max - min) / (1.0 + mean.abs())
}

/// Frank–Wolfe gap `⟨∇J, weights − vertex⟩` from a Hamiltonian table, with
/// `∂J/∂w_{b,l} = −scale_b H_{b,l}`.
pub(crate) fn frank_wolfe_gap(table: &[f64], weights: &[f64], atoms: usize, scale: &[f64]) -> f64 {
    let picks = argmax_blocks(table, atoms);
    table
        .chunks(atoms)
        .zip(weights.chunks(atoms))
        .zip(picks)
        .zip(scale)
        .map(|(((h, w), s), sc)| {
            let grad_dot_w: f64 = h.iter().zip(w).map(|(a, b)| -sc * a * b).sum();
            grad_dot_w + sc * h[s]
        })
        .sum()
}

/// `Σ_b scale_b r_b`.
pub(crate) fn scaled_residual_sum(r: &[f64], scale: &[f64]) -> f64 {
    r.iter().zip(scale).map(|(a, b)| a * b).sum()
}
