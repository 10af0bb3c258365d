//! The contract a physics problem fulfills so the solver layers can drive it.
//!
//! A problem exposes its steady-state residual split as `F(u) = N(u) + L u`
//! per named block, where `L` is the block's full linear diffusive operator
//! (including any diffusivity or asymptotic scaling baked into that block's
//! evolution equation) and `N` collects nonlinear, forcing and
//! pressure-projection terms. On top of that split it provides the shifted
//! solve `(I - dt L)^-1` that one implicit-Euler step requires, and the
//! action of the linearization of `N` about a base state.

use std::sync::Arc;

use crate::state::BlockLayout;

/// Per-block time steps, aligned with `layout().blocks()`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDts(pub Vec<f64>);

/// Contract between a physics problem and the Newton-Krylov machinery.
///
/// Implementations may cache factorizations and work buffers internally,
/// hence `&mut self` on evaluation methods. An instance is used by one
/// solve at a time; independent instances may run concurrently.
pub trait Problem {
    /// Named-block description of the state vector.
    fn layout(&self) -> &Arc<BlockLayout>;

    /// Short identifier used in output files.
    fn name(&self) -> &str;

    /// Continuation parameter.
    fn lambda(&self) -> f64;
    fn set_lambda(&mut self, lambda: f64);

    /// Recompute state-derived auxiliary fields (e.g. the streamfunction and
    /// fluctuating pressure of the shear model) before residual evaluation.
    fn refresh(&mut self, _state: &[f64]) {}

    /// Nonlinear + forcing terms, block-wise. Entries on rows where boundary
    /// conditions are imposed are zero.
    fn eval_n(&mut self, state: &[f64]) -> Vec<f64>;

    /// Block-wise action of the linear diffusive operator.
    fn apply_l(&mut self, v: &[f64]) -> Vec<f64>;

    /// Block-wise solve of `(I - dt_b L_b) x = rhs` with homogeneous
    /// boundary rows.
    fn solve_shifted(&mut self, dts: &BlockDts, rhs: &[f64]) -> Vec<f64>;

    /// Fix the base state about which `apply_linearized_n` operates.
    /// Implementations may precompute base-state quantities here.
    fn set_linearization_base(&mut self, base: &[f64]);

    /// Action of the linearization of `N` at the current base on `dir`.
    fn apply_linearized_n(&mut self, dir: &[f64]) -> Vec<f64>;

    /// Scalar diagnostic norm used on bifurcation diagrams and in the
    /// mode-switch criterion. Default: Euclidean norm over sqrt(n), which is
    /// stable under grid refinement.
    fn norm(&self, state: &[f64]) -> f64 {
        crate::state::norm(state) / (state.len() as f64).sqrt()
    }
}
