//! Forward and adjoint solvers for `y' − div(A∇y) = f̄(t, x, y, control)`
//! with homogeneous Dirichlet data on a box.
//!
//! Diffusion is implicit and the measure-averaged reaction explicit, so each
//! step is one banded Cholesky solve per state component with a factor that
//! is computed once per problem. The adjoint is the exact transpose of that
//! scheme together with the rectangle-rule cost, so reduced gradients agree
//! with finite differences of the discrete cost to rounding.

mod operator;
mod problem;
mod solve;
mod trajectory;

pub use operator::{assemble_diffusion, BandedCholesky, BandedMatrix, Diffusion};
pub use problem::{DerivativeSource, ParabolicProblem, ProblemData, RunningCost};
pub use solve::{
    atom_cost, average_field, evaluate_cost, reduced_cost, running_cost, solve_adjoint,
    solve_forward, terminal_cost, Control, StepControl,
};
pub(crate) use solve::composite_inner_coarse;
pub use trajectory::{AdjointTrajectory, StateTrajectory, Trajectory, TrajectoryFile};

#[cfg(test)]
mod tests;
