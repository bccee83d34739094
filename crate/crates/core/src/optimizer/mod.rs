//! Conditional gradient over relaxed controls, with the maximum principle
//! as both linear oracle and stopping certificate.
//!
//! Both relaxations are products of probability simplices: one per time
//! step for [`RelaxedControl`](crate::young_measures::RelaxedControl), one
//! per space-time cell for
//! [`SpaceTimeYoungMeasure`](crate::young_measures::SpaceTimeYoungMeasure).
//! The reduced gradient of a weight is `−scale · H`, where `H` is the
//! Hamiltonian of the corresponding atom and `scale` is `Δt` (fine) or
//! `Δt · w_x` (coarse). The residual `max H − ⟨weights, H⟩` of every block is
//! therefore the block's contribution to the Frank–Wolfe gap.

mod filippov;
mod hamiltonian;
mod solver;

pub use filippov::{filippov_extract, Extraction, Verdict, COST_SLACK, MISMATCH_TOL};
pub use hamiltonian::{
    hamiltonian, hamiltonian_constancy, hamiltonian_table, lmo, lmo_young, mp_residual,
    mp_residual_young, pointwise_hamiltonian, HamiltonianProfile, Residual,
};
pub use solver::{
    solve_relaxed, solve_relaxed_from, solve_young, solve_young_from, Direction, Solution,
    SolveOptions, SolveReport, StepRule, Termination,
};
