//! Numerical checks behind `verify`. Each returns measured values alongside
//! the tolerance it is judged against.

use std::sync::Arc;

use ndarray::Array2;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control_space::{make_grid, ControlField, ControlSet};
use crate::error::Result;
use crate::optimizer::hamiltonian_table;
use crate::pde::{reduced_cost, solve_adjoint, solve_forward, Control, ParabolicProblem};
use crate::young_measures::{
    barycenter, choquet_represent, relaxed_eval, young_eval, CompositeFunctional, Integrand,
    RelaxedControl, ScalarFn, Term, TwoAtomicSlice,
};

/// One pass/fail line of a verification bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
    pub detail: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientCheck {
    pub step: f64,
    pub max_relative_error: f64,
    pub worst_entry: (usize, usize),
    pub adjoint: Vec<Vec<f64>>,
    pub finite_difference: Vec<Vec<f64>>,
}

/// Interior weights drawn from `seed`, each row normalized.
pub fn random_interior(dictionary: Arc<crate::control_space::ControlDictionary>, nt: usize, seed: u64) -> Result<RelaxedControl> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = dictionary.len();
    let w = Array2::from_shape_fn((nt, l), |_| 0.2 + rng.random::<f64>());
    RelaxedControl::normalized(dictionary, w)
}

/// Compares `∂J/∂μ_kl = −Δt H_kl` with central differences of the reduced
/// cost along every coordinate direction.
pub fn gradient_check(problem: &ParabolicProblem, mu: &RelaxedControl, step: f64) -> Result<GradientCheck> {
    let dt = problem.grid().dt();
    let y = solve_forward(problem, mu)?;
    let chi = solve_adjoint(problem, &y, mu)?;
    let adjoint = hamiltonian_table(problem, mu, &y, &chi).mapv(|h| -dt * h);
    let (nt, l) = adjoint.dim();
    let base = mu.weights().to_owned();
    let dict = mu.dictionary();
    let fd: Vec<f64> = (0..nt * l)
        .into_par_iter()
        .map(|i| {
            let (k, j) = (i / l, i % l);
            let mut plus = base.clone();
            plus[[k, j]] += step;
            let mut minus = base.clone();
            minus[[k, j]] -= step;
            let jp = reduced_cost(problem, Control::Fine { dictionary: dict, weights: plus.view() })?;
            let jm = reduced_cost(problem, Control::Fine { dictionary: dict, weights: minus.view() })?;
            Ok((jp - jm) / (2.0 * step))
        })
        .collect::<Result<_>>()?;
    let fd = Array2::from_shape_vec((nt, l), fd).expect("shape");
    let mut worst = (0.0, (0, 0));
    for ((idx, a), b) in adjoint.indexed_iter().zip(fd.iter()) {
        let scale = a.abs().max(b.abs());
        let rel = if scale == 0.0 { 0.0 } else { (a - b).abs() / scale };
        if rel > worst.0 {
            worst = (rel, idx);
        }
    }
    let rows = |m: &Array2<f64>| m.rows().into_iter().map(|r| r.to_vec()).collect();
    Ok(GradientCheck {
        step,
        max_relative_error: worst.0,
        worst_entry: worst.1,
        adjoint: rows(&adjoint),
        finite_difference: rows(&fd),
    })
}

/// The two-atomic slice `u₁ ≡ 0`, `u₂ ≡ 1`, `A = (0, ½)` on `cells` cells.
pub fn example_slice(cells: usize) -> Result<TwoAtomicSlice> {
    let grid = make_grid(&[cells], &[1.0], 1, 1.0)?;
    let set = ControlSet::interval(-1.0, 1.0)?;
    let region = TwoAtomicSlice::box_region(&grid, &[0.0], &[0.5]);
    let u1 = ControlField::constant(&grid, &[0.0], &set)?;
    let u2 = ControlField::constant(&grid, &[1.0], &set)?;
    TwoAtomicSlice::new(grid, set, u1, u2, region)
}

fn mono(coef: f64, t: u32, x: u32, z: u32) -> Term {
    Term::Monomial {
        coef,
        t,
        x: if x > 0 { vec![x] } else { vec![] },
        y: vec![],
        z: if z > 0 { vec![z] } else { vec![] },
    }
}

/// Integrands for the representation identity; state-free and mixed in
/// `t`, `x` and `z`.
pub fn identity_panel(cells: usize) -> Vec<Integrand> {
    vec![
        Integrand::constant(1.0),
        Integrand::control_power(1.0, 1),
        Integrand::control_power(-0.7, 2),
        Integrand::new(vec![mono(2.0, 1, 1, 3), mono(-1.0, 0, 2, 1)]),
        Integrand::new(vec![Term::Distance { weight: 1.0, center: vec![0.4], p: 1.5 }]),
        Integrand::new(vec![Term::Indicator {
            lo: vec![0.2],
            hi: vec![0.7],
            inner: vec![mono(1.0, 0, 0, 4)],
        }]),
        Integrand::new(vec![Term::FieldDistance {
            weight: 0.5,
            field: (1..cells).map(|i| (i as f64 * 0.9).cos()).collect(),
            p: 2.0,
        }]),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChoquetPanel {
    pub alphas: Vec<f64>,
    pub integrands: usize,
    /// Largest `|relaxed_eval(Ψh, μ_a) − young_eval(h, ν)|` over the panel.
    pub max_identity_error: f64,
    /// The barycenter of every `μ_a` equals `ν` weight for weight.
    pub barycenter_exact: bool,
}

pub fn choquet_panel(cells: usize, alphas: &[f64], t: f64) -> Result<ChoquetPanel> {
    let slice = example_slice(cells)?;
    let nu = slice.young_slice();
    let panel = identity_panel(cells);
    let mut max_err: f64 = 0.0;
    let mut exact = true;
    for &a in alphas {
        let (dict, mu) = choquet_represent(&slice, a)?;
        for h in &panel {
            let lhs = relaxed_eval(h, &mu, &dict, t)?;
            let rhs = young_eval(h, &nu, t);
            max_err = max_err.max((lhs - rhs).abs());
        }
        let bary = barycenter(&mu, &dict)?;
        exact &= nu.support().iter().chain(bary.support()).all(|z| {
            (0..slice.grid.n_nodes()).all(|n| nu.weight_of(n, z) == bary.weight_of(n, z))
        });
    }
    Ok(ChoquetPanel {
        alphas: alphas.to_vec(),
        integrands: panel.len(),
        max_identity_error: max_err,
        barycenter_exact: exact,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub alphas: Vec<f64>,
    /// `Σ μ_a(u) Ψh(u)` with `h = z`.
    pub linear: Vec<f64>,
    /// `Σ μ_a(u) (Ψh(u))²`.
    pub composite: Vec<f64>,
    pub composite_slope: f64,
    /// Deviation of the middle composite value from the chord.
    pub collinearity_defect: f64,
    pub linear_spread: f64,
    /// `∫ Σ_z ν_x(z) z dx` by midpoint quadrature on a fine independent mesh.
    pub oracle: f64,
    pub oracle_error: f64,
    /// Mesh width of the slice, the accuracy of the nodal rule across the
    /// jump of `ν` at `x = ½`.
    pub quadrature_tolerance: f64,
}

/// Two representations of the same Young measure that agree on every
/// integral functional but not on a nonlinear function of one.
pub fn witness(cells: usize, alphas: &[f64]) -> Result<Witness> {
    let slice = example_slice(cells)?;
    let h = Integrand::control_power(1.0, 1);
    let sq = CompositeFunctional::single(ScalarFn::Square, h.clone());
    let mut linear = Vec::with_capacity(alphas.len());
    let mut composite = Vec::with_capacity(alphas.len());
    for &a in alphas {
        let (dict, mu) = choquet_represent(&slice, a)?;
        linear.push(relaxed_eval(&h, &mu, &dict, 0.0)?);
        composite.push(relaxed_eval(&sq, &mu, &dict, 0.0)?);
    }
    let n = alphas.len();
    let slope = (composite[n - 1] - composite[0]) / (alphas[n - 1] - alphas[0]);
    let defect = (1..n - 1)
        .map(|i| (composite[i] - (composite[0] + slope * (alphas[i] - alphas[0]))).abs())
        .fold(0.0, f64::max);
    let lo = linear.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = linear.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let m = 100_000;
    let oracle: f64 = (0..m)
        .map(|i| {
            let x = (i as f64 + 0.5) / m as f64;
            let mean = if x < 0.5 { 0.5 * 0.0 + 0.5 * 1.0 } else { 0.25 * 0.0 + 0.75 * 1.0 };
            mean / m as f64
        })
        .sum();
    Ok(Witness {
        alphas: alphas.to_vec(),
        composite_slope: slope,
        collinearity_defect: defect,
        linear_spread: hi - lo,
        oracle_error: (linear[0] - oracle).abs(),
        oracle,
        quadrature_tolerance: 1.0 / cells as f64,
        linear,
        composite,
    })
}

/// Best classical control among spatially constant fields at `points`
/// equispaced values of the interval `B`. Returns `(value, cost)`.
pub fn constant_control_scan(problem: &ParabolicProblem, points: usize) -> Result<(f64, f64)> {
    let set = problem.control_set();
    let grid = problem.grid();
    let values = set.sample_points(points)?;
    let costs: Vec<f64> = values
        .par_iter()
        .map(|z| {
            let atom = crate::control_space::ControlDictionary::from_constants(grid, set, std::slice::from_ref(z))?;
            let w = Array2::from_elem((grid.nt(), 1), 1.0);
            reduced_cost(problem, Control::Fine { dictionary: &atom, weights: w.view() })
        })
        .collect::<Result<_>>()?;
    let (i, c) = costs
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &c)| if c < acc.1 { (i, c) } else { acc });
    Ok((values[i][0], c))
}

/// All points of the simplex with coordinates in `{0, 1/m, …, 1}`.
pub fn simplex_lattice(atoms: usize, m: usize) -> Vec<Vec<f64>> {
    fn rec(left: usize, slots: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if slots == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for c in 0..=left {
            prefix.push(c);
            rec(left - c, slots - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut raw = Vec::new();
    rec(m, atoms, &mut Vec::new(), &mut raw);
    raw.into_iter()
        .map(|c| c.into_iter().map(|v| v as f64 / m as f64).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeOracle {
    pub cost: f64,
    pub weights: Vec<Vec<f64>>,
    pub sweeps: usize,
    pub evaluations: usize,
}

/// Block-coordinate exhaustive search over the lattice `{0, 1/m, …}` of
/// every time step's simplex, starting from uniform-nearest weights and
/// sweeping until no single row change lowers the cost.
pub fn lattice_oracle(problem: &ParabolicProblem, dictionary: &crate::control_space::ControlDictionary, m: usize, max_sweeps: usize) -> Result<LatticeOracle> {
    let nt = problem.grid().nt();
    let lattice = simplex_lattice(dictionary.len(), m);
    let uniform = 1.0 / dictionary.len() as f64;
    let start = lattice
        .iter()
        .min_by(|a, b| {
            let da: f64 = a.iter().map(|v| (v - uniform).abs()).sum();
            let db: f64 = b.iter().map(|v| (v - uniform).abs()).sum();
            da.total_cmp(&db)
        })
        .expect("nonempty lattice")
        .clone();
    let mut w = Array2::from_shape_fn((nt, dictionary.len()), |(_, l)| start[l]);
    let cost = |w: &Array2<f64>| reduced_cost(problem, Control::Fine { dictionary, weights: w.view() });
    let mut best = cost(&w)?;
    let mut evaluations = 1;
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        sweeps += 1;
        let mut improved = false;
        for k in 0..nt {
            let trial: Vec<f64> = lattice
                .par_iter()
                .map(|p| {
                    let mut c = w.clone();
                    c.row_mut(k).iter_mut().zip(p).for_each(|(a, b)| *a = *b);
                    cost(&c)
                })
                .collect::<Result<_>>()?;
            evaluations += trial.len();
            let (i, c) = trial
                .iter()
                .enumerate()
                .fold((usize::MAX, best), |acc, (i, &c)| if c < acc.1 { (i, c) } else { acc });
            if i != usize::MAX && c < best - 1e-15 * best.abs() {
                best = c;
                w.row_mut(k).iter_mut().zip(&lattice[i]).for_each(|(a, b)| *a = *b);
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    Ok(LatticeOracle {
        cost: best,
        weights: w.rows().into_iter().map(|r| r.to_vec()).collect(),
        sweeps,
        evaluations,
    })
}
