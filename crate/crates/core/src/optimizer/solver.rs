use std::sync::Arc;
use std::time::Instant;

use ndarray::{Array2, Array3, ArrayView2, ArrayView3};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::hamiltonian::{
    argmax_blocks, coarse_table, fine_table, frank_wolfe_gap, hamiltonian_constancy, residuals,
    scaled_residual_sum, HamiltonianProfile,
};
use crate::control_space::ControlDictionary;
use crate::error::{Error, Result};
use crate::pde::{evaluate_cost, solve_adjoint, solve_forward, Control, ParabolicProblem, Trajectory};
use crate::young_measures::{RelaxedControl, SpaceTimeYoungMeasure};

/// Step-size rule along the search direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepRule {
    /// `2 / (it + 2)`, no descent check.
    Harmonic,
    /// Quadratic fit from the cost, its directional derivative and the cost
    /// at the far end of the segment; Armijo fallback when the fit is off.
    Exact,
    Armijo {
        #[serde(default = "default_c1")]
        c1: f64,
        #[serde(default = "default_shrink")]
        shrink: f64,
        #[serde(default = "default_backtracks")]
        max_backtracks: usize,
    },
}

fn default_c1() -> f64 {
    1e-4
}

fn default_shrink() -> f64 {
    0.5
}

fn default_backtracks() -> usize {
    40
}

/// Search direction. `Pairwise` moves mass, block by block, from the worst
/// supported atom to the best one in proportion to their Hamiltonian gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    FrankWolfe,
    Pairwise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub max_iters: usize,
    pub mp_tolerance: f64,
    pub direction: Direction,
    pub step_rule: StepRule,
    /// Extra runs from seeded random starts; the best final cost wins.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iters: 20_000,
            mp_tolerance: 1e-6,
            direction: Direction::Pairwise,
            step_rule: StepRule::Exact,
            restarts: 0,
            seed: 0,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.mp_tolerance > 0.0 && self.mp_tolerance.is_finite()) {
            return Err(Error::OutOfRange {
                name: "mp_tolerance",
                value: self.mp_tolerance,
                reason: "must be positive and finite",
            });
        }
        if let StepRule::Armijo { c1, shrink, .. } = self.step_rule {
            if !(c1 > 0.0 && c1 < 1.0) {
                return Err(Error::OutOfRange {
                    name: "c1",
                    value: c1,
                    reason: "must lie in (0, 1)",
                });
            }
            if !(shrink > 0.0 && shrink < 1.0) {
                return Err(Error::OutOfRange {
                    name: "shrink",
                    value: shrink,
                    reason: "must lie in (0, 1)",
                });
            }
        }
        Ok(())
    }

    fn armijo(&self) -> (f64, f64, usize) {
        match self.step_rule {
            StepRule::Armijo {
                c1,
                shrink,
                max_backtracks,
            } => (c1, shrink, max_backtracks),
            _ => (default_c1(), default_shrink(), default_backtracks()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    IterationLimit,
    /// No step along the current direction decreased the cost.
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveReport {
    pub relaxation: String,
    pub termination: Termination,
    pub iterations: usize,
    pub final_cost: f64,
    pub cost_history: Vec<f64>,
    /// Maximum residual per iteration.
    pub residual_history: Vec<f64>,
    /// Residual per time step; the maximum over nodes for the coarse case.
    pub residual_profile: Vec<f64>,
    pub max_residual: f64,
    pub frank_wolfe_gap: f64,
    /// `Σ_b scale_b r_b`, equal to the Frank–Wolfe gap up to rounding.
    pub scaled_residual_sum: f64,
    pub hamiltonian: HamiltonianProfile,
    /// Final cost of every start, the uniform one first.
    pub start_costs: Vec<f64>,
    pub best_start: usize,
    /// Kept out of serialized reports so that they are reproducible.
    #[serde(skip)]
    pub wall_time_seconds: f64,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

#[derive(Debug, Clone)]
pub struct Solution<C> {
    pub control: C,
    pub state: Trajectory,
    pub adjoint: Trajectory,
    pub report: SolveReport,
}

#[derive(Clone, Copy)]
enum Kind<'a> {
    Fine(&'a ControlDictionary),
    Coarse(&'a [Vec<f64>]),
}

/// Product of simplices: `blocks` rows of `atoms` weights, with
/// `∂J/∂w_{b,l} = −scale_b H_{b,l}`.
struct Engine<'a> {
    problem: &'a ParabolicProblem,
    kind: Kind<'a>,
    atoms: usize,
    scale: Vec<f64>,
}

struct Run {
    weights: Vec<f64>,
    state: Trajectory,
    adjoint: Trajectory,
    table: Vec<f64>,
    cost: f64,
    termination: Termination,
    iterations: usize,
    cost_history: Vec<f64>,
    residual_history: Vec<f64>,
}

struct Candidate {
    weights: Vec<f64>,
    state: Trajectory,
    cost: f64,
}

/// Sparse search direction: per block, `(atom, coefficient)` pairs, plus the
/// largest feasible step.
struct Step {
    moves: Vec<Vec<(usize, f64)>>,
    gamma_max: f64,
    slope: f64,
}

impl<'a> Engine<'a> {
    fn control<'b>(&'b self, w: &'b [f64]) -> Control<'b> {
        let grid = self.problem.grid();
        match self.kind {
            Kind::Fine(dictionary) => Control::Fine {
                dictionary,
                weights: ArrayView2::from_shape((grid.nt(), self.atoms), w).expect("shape"),
            },
            Kind::Coarse(support) => Control::Coarse {
                support,
                weights: ArrayView3::from_shape((grid.nt(), grid.n_nodes(), self.atoms), w).expect("shape"),
            },
        }
    }

    fn forward(&self, w: &[f64]) -> Result<Option<(Trajectory, f64)>> {
        match solve_forward(self.problem, self.control(w)) {
            Ok(y) => {
                let j = evaluate_cost(self.problem, &y, self.control(w))?;
                Ok(j.is_finite().then_some((y, j)))
            }
            Err(Error::Divergence { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn table(&self, w: &[f64], y: &Trajectory, chi: &Trajectory) -> Vec<f64> {
        match self.kind {
            Kind::Fine(d) => fine_table(self.problem, d, y, chi).into_raw_vec_and_offset().0,
            Kind::Coarse(s) => coarse_table(self.problem, &self.control(w), s, y, chi).into_raw_vec_and_offset().0,
        }
    }

    fn direction(&self, w: &[f64], table: &[f64], kind: Direction) -> Step {
        let a = self.atoms;
        let picks = argmax_blocks(table, a);
        let mut moves = Vec::with_capacity(self.scale.len());
        let mut gamma_max = f64::INFINITY;
        let mut slope = 0.0;
        for (b, (h, wb)) in table.chunks(a).zip(w.chunks(a)).enumerate() {
            let s = picks[b];
            match kind {
                Direction::FrankWolfe => {
                    let mv: Vec<(usize, f64)> = (0..a)
                        .filter(|&l| wb[l] != 0.0 || l == s)
                        .map(|l| (l, if l == s { 1.0 } else { 0.0 } - wb[l]))
                        .collect();
                    slope -= self.scale[b] * mv.iter().map(|&(l, d)| d * h[l]).sum::<f64>();
                    moves.push(mv);
                    gamma_max = 1.0;
                }
                Direction::Pairwise => {
                    let mut away = None;
                    for l in 0..a {
                        if wb[l] > 0.0 && away.is_none_or(|j: usize| h[l] < h[j]) {
                            away = Some(l);
                        }
                    }
                    let Some(aw) = away else {
                        moves.push(Vec::new());
                        continue;
                    };
                    let diff = h[s] - h[aw];
                    if aw == s || !(diff > 0.0) {
                        moves.push(Vec::new());
                        continue;
                    }
                    let delta = self.scale[b] * diff;
                    gamma_max = gamma_max.min(wb[aw] / delta);
                    slope -= self.scale[b] * delta * diff;
                    moves.push(vec![(s, delta), (aw, -delta)]);
                }
            }
        }
        Step {
            moves,
            gamma_max,
            slope,
        }
    }

    fn apply(&self, w: &[f64], step: &Step, gamma: f64) -> Vec<f64> {
        let a = self.atoms;
        let mut out = w.to_vec();
        let full = gamma >= step.gamma_max;
        for (b, mv) in step.moves.iter().enumerate() {
            for &(l, d) in mv {
                let v = &mut out[b * a + l];
                *v += gamma * d;
                // atoms emptied by a full step are dropped exactly
                if *v < 0.0 || (full && d < 0.0 && w[b * a + l] / -d <= step.gamma_max) {
                    *v = 0.0;
                }
            }
        }
        out
    }

    fn armijo(&self, w: &[f64], step: &Step, j0: f64, mut gamma: f64, opts: &SolveOptions) -> Result<Option<Candidate>> {
        let (c1, shrink, max_bt) = opts.armijo();
        for _ in 0..=max_bt {
            let trial = self.apply(w, step, gamma);
            if let Some((y, j)) = self.forward(&trial)? {
                if j <= j0 + c1 * gamma * step.slope {
                    return Ok(Some(Candidate {
                        weights: trial,
                        state: y,
                        cost: j,
                    }));
                }
            }
            gamma *= shrink;
        }
        Ok(None)
    }

    fn exact(&self, w: &[f64], step: &Step, j0: f64, opts: &SolveOptions) -> Result<Option<Candidate>> {
        let gm = step.gamma_max;
        let far = self.apply(w, step, gm);
        let Some((y1, j1)) = self.forward(&far)? else {
            return self.armijo(w, step, j0, 0.5 * gm, opts);
        };
        let g0 = step.slope;
        let c = (j1 - j0 - g0 * gm) / (gm * gm);
        let gamma = if c > 0.0 { (-g0 / (2.0 * c)).min(gm) } else { gm };
        if gamma >= gm {
            return Ok(Some(Candidate {
                weights: far,
                state: y1,
                cost: j1,
            }));
        }
        let trial = self.apply(w, step, gamma);
        if let Some((y, j)) = self.forward(&trial)? {
            let predicted = j0 + g0 * gamma + c * gamma * gamma;
            let (c1, _, _) = opts.armijo();
            if (j - predicted).abs() <= 1e-8 * (1.0 + j0.abs()) || j <= j0 + c1 * gamma * g0 {
                return Ok(Some(Candidate {
                    weights: trial,
                    state: y,
                    cost: j,
                }));
            }
        }
        self.armijo(w, step, j0, gamma, opts)
    }

    fn run(&self, w0: Vec<f64>, opts: &SolveOptions) -> Result<Run> {
        let mut w = w0;
        let mut y = solve_forward(self.problem, self.control(&w))?;
        let mut cost = evaluate_cost(self.problem, &y, self.control(&w))?;
        let mut cost_history = Vec::new();
        let mut residual_history = Vec::new();
        let mut it = 0;
        loop {
            let chi = solve_adjoint(self.problem, &y, self.control(&w))?;
            let table = self.table(&w, &y, &chi);
            let r = residuals(&table, &w, self.atoms);
            let max_r = r.iter().copied().fold(0.0, f64::max);
            cost_history.push(cost);
            residual_history.push(max_r);
            let finish = |termination| Run {
                weights: w.clone(),
                state: y.clone(),
                adjoint: chi.clone(),
                table: table.clone(),
                cost,
                termination,
                iterations: it,
                cost_history: cost_history.clone(),
                residual_history: residual_history.clone(),
            };
            if max_r <= opts.mp_tolerance {
                return Ok(finish(Termination::Converged));
            }
            if it >= opts.max_iters {
                return Ok(finish(Termination::IterationLimit));
            }
            let step = self.direction(&w, &table, opts.direction);
            if !(step.slope < 0.0) || !(step.gamma_max > 0.0) {
                return Ok(finish(Termination::Stalled));
            }
            let candidate = match opts.step_rule {
                StepRule::Harmonic => {
                    let gamma = (2.0 / (it as f64 + 2.0)).min(step.gamma_max);
                    let trial = self.apply(&w, &step, gamma);
                    match self.forward(&trial)? {
                        Some((y, j)) => Some(Candidate {
                            weights: trial,
                            state: y,
                            cost: j,
                        }),
                        None => return Err(Error::Divergence { step: it }),
                    }
                }
                StepRule::Exact => self.exact(&w, &step, cost, opts)?,
                StepRule::Armijo { .. } => self.armijo(&w, &step, cost, step.gamma_max, opts)?,
            };
            let accept = match (&candidate, opts.step_rule) {
                (None, _) => false,
                (Some(_), StepRule::Harmonic) => true,
                (Some(c), _) => c.cost <= cost + 1e-13 * (1.0 + cost.abs()),
            };
            if !accept {
                return Ok(finish(Termination::Stalled));
            }
            let c = candidate.expect("accepted");
            w = c.weights;
            y = c.state;
            cost = c.cost;
            it += 1;
        }
    }

    fn solve(&self, w0: Vec<f64>, opts: &SolveOptions) -> Result<(Run, Vec<f64>, usize)> {
        opts.validate()?;
        let mut best = self.run(w0.clone(), opts)?;
        let mut costs = vec![best.cost];
        let mut best_idx = 0;
        for r in 1..=opts.restarts {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(r as u64);
            let mut start: Vec<f64> = w0.iter().map(|v| v + rng.random::<f64>()).collect();
            for row in start.chunks_mut(self.atoms) {
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= s);
            }
            let run = self.run(start, opts)?;
            costs.push(run.cost);
            if run.cost < best.cost {
                best = run;
                best_idx = r;
            }
        }
        Ok((best, costs, best_idx))
    }

    fn report(&self, run: &Run, costs: Vec<f64>, best: usize, started: Instant, relaxation: &str) -> Result<SolveReport> {
        let r = residuals(&run.table, &run.weights, self.atoms);
        let nt = self.problem.grid().nt();
        let per_step = r.len() / nt;
        let profile: Vec<f64> = r.chunks(per_step).map(|c| c.iter().copied().fold(0.0, f64::max)).collect();
        let hamiltonian = hamiltonian_constancy(self.problem, self.control(&run.weights), &run.state, &run.adjoint)?;
        Ok(SolveReport {
            relaxation: relaxation.to_string(),
            termination: run.termination,
            iterations: run.iterations,
            final_cost: run.cost,
            cost_history: run.cost_history.clone(),
            residual_history: run.residual_history.clone(),
            max_residual: r.iter().copied().fold(0.0, f64::max),
            residual_profile: profile,
            frank_wolfe_gap: frank_wolfe_gap(&run.table, &run.weights, self.atoms, &self.scale),
            scaled_residual_sum: scaled_residual_sum(&r, &self.scale),
            hamiltonian,
            start_costs: costs,
            best_start: best,
            wall_time_seconds: started.elapsed().as_secs_f64(),
        })
    }
}

/// Runs `f` on a pool capped by `RELAXCTRL_THREADS` when that is set.
fn with_thread_cap<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let cap = std::env::var("RELAXCTRL_THREADS").ok().and_then(|v| v.parse::<usize>().ok());
    match cap.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

/// Conditional gradient over the fine relaxation, from uniform weights.
pub fn solve_relaxed(problem: &ParabolicProblem, dictionary: Arc<ControlDictionary>, options: &SolveOptions) -> Result<Solution<RelaxedControl>> {
    let nt = problem.grid().nt();
    let dictionary = Arc::new(dictionary.with_time_steps(nt)?);
    solve_relaxed_from(problem, RelaxedControl::uniform(dictionary), options)
}

pub fn solve_relaxed_from(problem: &ParabolicProblem, initial: RelaxedControl, options: &SolveOptions) -> Result<Solution<RelaxedControl>> {
    let started = Instant::now();
    let dictionary = initial.dictionary().clone();
    let engine = Engine {
        problem,
        kind: Kind::Fine(&dictionary),
        atoms: dictionary.len(),
        scale: vec![problem.grid().dt(); problem.grid().nt()],
    };
    let w0 = initial.weights().as_standard_layout().iter().copied().collect();
    let (run, costs, best) = with_thread_cap(|| engine.solve(w0, options))?;
    let report = engine.report(&run, costs, best, started, "fine")?;
    let weights = Array2::from_shape_vec((problem.grid().nt(), dictionary.len()), run.weights).expect("shape");
    Ok(Solution {
        control: RelaxedControl::normalized(dictionary.clone(), weights)?,
        state: run.state,
        adjoint: run.adjoint,
        report,
    })
}

/// Conditional gradient over space-time Young measures supported on
/// `support`, from uniform weights.
pub fn solve_young(problem: &ParabolicProblem, support: Vec<Vec<f64>>, options: &SolveOptions) -> Result<Solution<SpaceTimeYoungMeasure>> {
    let nu = SpaceTimeYoungMeasure::uniform(problem.grid().clone(), problem.control_set().clone(), support)?;
    solve_young_from(problem, nu, options)
}

pub fn solve_young_from(problem: &ParabolicProblem, initial: SpaceTimeYoungMeasure, options: &SolveOptions) -> Result<Solution<SpaceTimeYoungMeasure>> {
    let started = Instant::now();
    let grid = problem.grid();
    let support = initial.support().to_vec();
    let w = grid.quadrature_weights();
    let scale = (0..grid.nt()).flat_map(|_| w.iter().map(|q| q * grid.dt())).collect();
    let engine = Engine {
        problem,
        kind: Kind::Coarse(&support),
        atoms: support.len(),
        scale,
    };
    let w0 = initial.weights().as_standard_layout().iter().copied().collect();
    let (run, costs, best) = with_thread_cap(|| engine.solve(w0, options))?;
    let report = engine.report(&run, costs, best, started, "coarse")?;
    let mut weights = Array3::from_shape_vec((grid.nt(), grid.n_nodes(), support.len()), run.weights).expect("shape");
    for mut lane in weights.lanes_mut(ndarray::Axis(2)) {
        let s = lane.sum();
        lane.mapv_inplace(|v| v / s);
    }
    Ok(Solution {
        control: SpaceTimeYoungMeasure::new(grid.clone(), initial.control_set().clone(), support, weights)?,
        state: run.state,
        adjoint: run.adjoint,
        report,
    })
}
