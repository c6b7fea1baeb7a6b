//! SMT bridge: instance emission, an external solver driver and model
//! decoding for diagnostics.

mod emit;
mod model;
mod solver;

pub use emit::{emit_smt, emit_smt_with, EmitError, SmtBounds, SmtInstance, SmtQuery};
pub use model::{decode_model, DecodeError};
pub use solver::{run_solver, solve_instance, SolverError, SolverOutcome, SOLVER_ENV};
