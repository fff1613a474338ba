//! sidwave: a numerical laboratory for semilinear wave equations with
//! time-dependent damping, posed radially in 1, 2, or 3 space dimensions.
//!
//! The crate integrates
//!
//! ```text
//! u_tt - Lap u + b(t) u_t = f(u) + s(t, x),    b(t) = mu / (1 + t)
//! ```
//!
//! for compactly supported radial data, and packages the surrounding
//! theory-facing instrumentation: weighted space-time diagnostics, an
//! effective-time heat-flow reference for the diffusion-dominated regime,
//! test-function functionals for blow-up analysis, and a constructive
//! feasibility map for the weighted-energy parameter chain.
//!
//! Start with [`model::ModelSpec`] and [`solver::run`]; the `sidwave`
//! command-line binary in the companion crate drives the same entry points.

// Validation guards are written `!(x > 0.0)` on purpose: the negation
// rejects NaN, which the suggested `x <= 0.0` would silently accept.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Finite-difference stencils index several arrays at matching offsets;
// indexed loops keep them readable.
#![allow(clippy::needless_range_loop)]

pub mod blowup;
pub mod diagnostics;
pub mod diffusion;
pub mod error;
pub mod feasibility;
pub mod model;
pub mod smoothstep;
pub mod solver;

pub mod verification;

pub use error::{Error, Result};

/// Keeps the guide's code examples compiling and passing: every chapter
/// of `book/` is included as documentation here, so `cargo test --doc`
/// exercises each snippet exactly as readers see it.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/diagnostics.md")]
    mod diagnostics {}
    #[doc = include_str!("../../../book/src/diffusion.md")]
    mod diffusion {}
    #[doc = include_str!("../../../book/src/blowup.md")]
    mod blowup {}
    #[doc = include_str!("../../../book/src/feasibility.md")]
    mod feasibility {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
