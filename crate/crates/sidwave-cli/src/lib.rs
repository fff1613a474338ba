//! Command-line experiment driver for the `sidwave` library: config
//! parsing with dotted-path overrides, deterministic CSV/summary
//! emission, parameter sweeps with threshold bisection, and the
//! geometric escalation protocol for borderline blow-up hunting.
//!
//! Exit-code contract: 0 for completed experiments (finite-time
//! blow-up is a result, not a failure), 2 for configuration or
//! feasibility errors, 3 for numerical instability or corrupted data.

pub mod commands;
pub mod config;
pub mod escalate;
pub mod summary_util;
pub mod table;

/// Map a library error onto the process exit code.
pub fn exit_code_for(err: &sidwave::Error) -> i32 {
    match err {
        sidwave::Error::Config(_) | sidwave::Error::Infeasible(_) => 2,
        sidwave::Error::Data(_) => 3,
    }
}
