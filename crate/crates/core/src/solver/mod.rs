//! Degradation operators and the split Bregman TV solver.

mod bregman;
pub mod operators;

pub use bregman::{
    bregman_step, bregman_step_stats, default_step, defence, records_to_csv, shrink, shrink_scalar,
    solve_channel, solve_x_subproblem, write_convergence, write_convergence_csv, x_subproblem_objective,
    BregmanState, Channel, ConvergenceRecord, Init, ShrinkRule, SolverParams, StepStats, TvMode, CSV_HEADER,
};
pub use operators::{
    apply_adjoint, apply_forward, grad, grad_adjoint, Blur, FrameObservation, FrameOperator, GradPair,
    Gradient, LinearOperator, MaskOp, Motion,
};
