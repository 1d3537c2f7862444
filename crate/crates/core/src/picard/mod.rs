//! Mild-solution Picard iteration on whole trajectories.

mod budget;
mod quadrature;
mod solve;
mod time;

pub use budget::{
    contraction_factor, existence_time, largest_feasible_time, recurrence_bound, time_powers, BoundChoice,
    ExistenceBudget, BISECTION_RTOL, MIN_HORIZON,
};
pub use quadrature::{integrate_scalar, DuhamelQuadrature, IntervalWeights};
pub use solve::{
    iterate, mild_rhs_g, picard_solve, picard_solve_certified, picard_solve_from, seed_norm, uniqueness_check,
    ExitReason, MildMap, PicardOptions, PicardRun, PicardTrace, Shift, UniquenessReport, RATIO_FLOOR,
    SOLENOIDAL_TOL,
};
pub use time::{TimeGrid, Trajectory, MIN_INTERVALS};
