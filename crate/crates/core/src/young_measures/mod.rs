//! Discrete measure algebra over control fields.
//!
//! Two relaxations live here. The fine one mixes whole control fields: a
//! [`RelaxedControl`] carries, per time step, a probability vector over the
//! atoms of a [`ControlDictionary`](crate::control_space::ControlDictionary).
//! The coarse one mixes control values pointwise: a
//! [`SpaceTimeYoungMeasure`] carries a probability vector over sample points
//! of `B` for every space-time cell. [`barycenter`] maps the first onto the
//! second, and [`choquet_represent`] goes back for piecewise two-atomic
//! slices.
//!
//! All integrals use the nodal quadrature of [`Grid`](crate::control_space::Grid),
//! so identities between the two relaxations hold to rounding rather than
//! only in the mesh limit.

mod chatter;
mod integrand;
mod measures;

pub use chatter::{
    allocate, chatter_spacetime, chatter_time, interleave, refine_time, switching_sequence,
    ChatteredControl, ChatteredField,
};
pub use integrand::{
    CompositeFunctional, Dims, Factor, Integrand, Profile, PsiIntegrand, Sample, ScalarFn, Term,
};
pub use measures::{
    barycenter, choquet_represent, psi_eval, relaxed_eval, young_eval, ProbabilityVector,
    RelaxedControl, RelaxedControlFile, SpaceTimeYoungMeasure, TestFunctional, TwoAtomicSlice,
    YoungMeasureFile, YoungSlice, SIMPLEX_TOL,
};
