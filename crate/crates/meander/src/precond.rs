//! The adaptive time-stepper preconditioner.
//!
//! One implicit-Euler step of `du/dt = N(u) + L u` minus its initial
//! condition equals `dt (I - dt L)^-1 [N(u) + L u]`, which is the steady
//! residual preconditioned by `c P^-1` with `c = dt` and `P = I - dt L`.
//! Small `dt` approaches no preconditioning, large `dt` the Stokes
//! (inverse-Laplacian) limit, and intermediate `dt` interpolates between
//! them. The same construction applied to the linearized equations gives
//! the preconditioned Jacobian action, so the whole Newton system is
//! evaluated by stepping, never by assembling a matrix.

use thiserror::Error;

use crate::problem::{BlockDts, Problem};
use crate::state::BlockLayout;

/// How a block's preconditioning time step is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtRule {
    Fixed(f64),
    /// `dt` tracks the continuation parameter (the shear model sets the
    /// mean-block step equal to the Reynolds number).
    Parameter,
}

/// How a block's diffusivity scale (the `kappa` in the convergence-metric
/// weight `(1 + kappa dt)/dt`) is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KappaRule {
    Fixed(f64),
    /// `kappa = 1/lambda` (the shear model's `epsilon = 1/Re`).
    InverseParameter,
}

/// Per-block preconditioner prescription.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPrecond {
    pub block: String,
    pub dt: DtRule,
    pub kappa: KappaRule,
}

/// The operator family `c (I - dt L)^-1` per equation block.
#[derive(Debug, Clone, PartialEq)]
pub struct PreconditionerSpec {
    pub blocks: Vec<BlockPrecond>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrecondError {
    #[error("preconditioner spec names unknown block {0}")]
    UnknownBlock(String),
    #[error("block {0} is not covered by the preconditioner spec")]
    UncoveredBlock(String),
    #[error("block {0} appears more than once in the preconditioner spec")]
    DuplicateBlock(String),
    #[error("resolved dt for block {block} is not positive: {dt}")]
    NonPositiveDt { block: String, dt: f64 },
}

/// Spec with rules resolved to numbers at the current parameter value,
/// aligned with the layout's block order: time step `dt`, scaling constant
/// `c` (= `dt` for finite-`dt` operation) and diffusivity scale `kappa`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedSpec {
    pub dt: Vec<f64>,
    pub c: Vec<f64>,
    pub kappa: Vec<f64>,
}

impl PreconditionerSpec {
    /// Single rule applied to every block of the layout.
    pub fn uniform(layout: &BlockLayout, dt: f64, kappa: f64) -> Self {
        PreconditionerSpec {
            blocks: layout
                .blocks()
                .iter()
                .map(|b| BlockPrecond {
                    block: b.name.clone(),
                    dt: DtRule::Fixed(dt),
                    kappa: KappaRule::Fixed(kappa),
                })
                .collect(),
        }
    }

    /// Check coverage against a layout and evaluate the rules at `lambda`.
    pub fn resolve(&self, layout: &BlockLayout, lambda: f64) -> Result<ResolvedSpec, PrecondError> {
        for bp in &self.blocks {
            if layout.block(&bp.block).is_none() {
                return Err(PrecondError::UnknownBlock(bp.block.clone()));
            }
        }
        let mut dt = Vec::with_capacity(layout.blocks().len());
        let mut kappa = Vec::with_capacity(layout.blocks().len());
        for b in layout.blocks() {
            let matches: Vec<&BlockPrecond> =
                self.blocks.iter().filter(|bp| bp.block == b.name).collect();
            match matches.len() {
                0 => return Err(PrecondError::UncoveredBlock(b.name.clone())),
                1 => {}
                _ => return Err(PrecondError::DuplicateBlock(b.name.clone())),
            }
            let bp = matches[0];
            let d = match bp.dt {
                DtRule::Fixed(v) => v,
                DtRule::Parameter => lambda,
            };
            if !(d > 0.0) {
                return Err(PrecondError::NonPositiveDt {
                    block: b.name.clone(),
                    dt: d,
                });
            }
            dt.push(d);
            kappa.push(match bp.kappa {
                KappaRule::Fixed(v) => v,
                KappaRule::InverseParameter => 1.0 / lambda,
            });
        }
        let c = dt.clone();
        Ok(ResolvedSpec { dt, c, kappa })
    }
}

/// Preconditioned steady residual `c P^-1 F(u)`: one implicit-Euler step of
/// the problem minus the input state, block-wise with each block's `dt`.
pub fn residual_action<P: Problem + ?Sized>(
    problem: &mut P,
    spec: &PreconditionerSpec,
    state: &[f64],
) -> Result<Vec<f64>, PrecondError> {
    let resolved = spec.resolve(problem.layout(), problem.lambda())?;
    problem.refresh(state);
    let mut f = problem.eval_n(state);
    let lu = problem.apply_l(state);
    for (fi, li) in f.iter_mut().zip(&lu) {
        *fi += li;
    }
    let mut out = problem.solve_shifted(&BlockDts(resolved.dt.clone()), &f);
    scale_blocks(problem.layout(), &mut out, &resolved.c);
    Ok(out)
}

/// Preconditioned Jacobian action `c P^-1 J(u) v`: one implicit-Euler step
/// of the linearized equations about the current base applied to `dir`,
/// minus `dir`. The base is fixed via `Problem::set_linearization_base`.
pub fn jacobian_action<P: Problem + ?Sized>(
    problem: &mut P,
    spec: &PreconditionerSpec,
    dir: &[f64],
) -> Result<Vec<f64>, PrecondError> {
    let resolved = spec.resolve(problem.layout(), problem.lambda())?;
    let mut jf = problem.apply_linearized_n(dir);
    let lv = problem.apply_l(dir);
    for (ji, li) in jf.iter_mut().zip(&lv) {
        *ji += li;
    }
    let mut out = problem.solve_shifted(&BlockDts(resolved.dt.clone()), &jf);
    scale_blocks(problem.layout(), &mut out, &resolved.c);
    Ok(out)
}

/// Convergence metric: L2 norm of the residual action with each block
/// scaled by `(1 + kappa dt)/dt`, which removes the leading dependence of
/// the preconditioned residual on `dt`.
pub fn convergence_metric<P: Problem + ?Sized>(
    problem: &mut P,
    spec: &PreconditionerSpec,
    state: &[f64],
) -> Result<f64, PrecondError> {
    let resolved = spec.resolve(problem.layout(), problem.lambda())?;
    let r = residual_action(problem, spec, state)?;
    Ok(metric_from_residual(problem.layout(), &resolved, &r))
}

/// Metric evaluated on an already-computed residual action.
pub fn metric_from_residual(layout: &BlockLayout, resolved: &ResolvedSpec, r: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (b, (&dt, &kappa)) in layout
        .blocks()
        .iter()
        .zip(resolved.dt.iter().zip(&resolved.kappa))
    {
        let w = (1.0 + kappa * dt) / dt;
        for &x in &r[b.range()] {
            let s = w * x;
            acc += s * s;
        }
    }
    acc.sqrt()
}

/// Reporting-only classification of the operating regime. The arithmetic is
/// always the finite-`dt` formula; its limits are the classified ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitMode {
    Identity,
    Mixed,
    Stokes,
}

pub fn limit_mode(resolved: &ResolvedSpec) -> LimitMode {
    if resolved.dt.iter().all(|&d| d < 1e-6) {
        LimitMode::Identity
    } else if resolved.dt.iter().all(|&d| d > 1e6) {
        LimitMode::Stokes
    } else {
        LimitMode::Mixed
    }
}

fn scale_blocks(layout: &BlockLayout, v: &mut [f64], factors: &[f64]) {
    for (b, &f) in layout.blocks().iter().zip(factors) {
        for x in &mut v[b.range()] {
            *x *= f;
        }
    }
}
