//! Matrix-free Newton-Krylov continuation of steady states of
//! incompressible-flow-type PDEs.
//!
//! The centerpiece is an adaptive preconditioner built from one
//! implicit-Euler step of the problem's own time-stepper: subtracting the
//! initial condition from the step turns `F(u) = N(u) + L u` into
//! `dt (I - dt L)^-1 F(u)`, a family of preconditioned residuals that sweeps
//! from the unpreconditioned system (`dt -> 0`) to Stokes preconditioning
//! (`dt -> infinity`) through a single knob. Around it sit a
//! predictor-corrector continuation engine with fixed-parameter,
//! fixed-component and pseudo-arclength correction, a matrix-free BiCGStab
//! solver, and two bundled physics problems: 2D doubly diffusive convection
//! and the reduced plane-Waleffe shear model.
//!
//! ```
//! use meander::continuation::{trace_branch, ContinuationConfig, StopRule};
//! use meander::toy::{ScalarToy, ToyKind};
//!
//! // Trace the branch u = sqrt(lambda) of F = lambda - u^2 from (1, 1) to lambda = 4.
//! let mut problem = ScalarToy::new(ToyKind::Fold, 1.0);
//! let spec = problem.default_spec();
//! let config = ContinuationConfig::default();
//! let seed = meander::continuation::converge_seed(&mut problem, &spec, &[1.0], 1.0, &config)
//!     .expect("seed converges");
//! let stop = StopRule { lambda_max: Some(4.0), max_points: 100, ..StopRule::default() };
//! let trace = trace_branch(&mut problem, &spec, seed, &config, &stop).expect("trace runs");
//! let last = trace.points.last().unwrap();
//! assert!((last.lambda - 4.0).abs() < 1e-12);
//! assert!((last.state.data[0] - 2.0).abs() < 1e-7);
//! ```

pub mod banded;
pub mod cli;
pub mod config;
pub mod continuation;
pub mod ddc2d;
pub mod krylov;
pub mod precond;
pub mod problem;
pub mod snapshot;
pub mod spectral;
pub mod state;
pub mod toy;
pub mod verify;
pub mod waleffe;

pub use problem::Problem;
pub use state::{BlockLayout, SolutionVector};

// The book's code listings double as tests: every fenced Rust block in the
// guide compiles and runs under `cargo test`.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/continuation.md")]
    mod continuation {}
    #[doc = include_str!("../../../book/src/preconditioner.md")]
    mod preconditioner {}
    #[doc = include_str!("../../../book/src/problems.md")]
    mod problems {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
