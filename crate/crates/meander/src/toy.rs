//! Scalar test problems with closed-form solutions.
//!
//! These drive the solver layers through the same interfaces as the PDE
//! problems while every expected value can be written down by hand: a fold
//! `F = lambda - u^2`, the unit circle `F = u^2 + lambda^2 - 1`, and small
//! linear/quadratic dynamical systems used to pin the preconditioner
//! algebra.

use std::sync::Arc;

use crate::precond::{BlockPrecond, DtRule, KappaRule, PreconditionerSpec};
use crate::problem::{BlockDts, Problem};
use crate::state::BlockLayout;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyKind {
    /// `F(u, lambda) = lambda - u^2`; fold at lambda = 0, branch u = sqrt(lambda).
    Fold,
    /// `F(u, lambda) = u^2 + lambda^2 - 1`; folds at lambda = +-1.
    Circle,
    /// `F(u, lambda) = u^2 + lambda - 1`.
    QuadFold,
    /// `F(u) = u^2 - 1`, no parameter dependence.
    NoLambda,
    /// `du/dt = -u`: N = 0, L = -1.
    Linear,
    /// `du/dt = u^2 - u`: N(u) = u^2, L = -1.
    QuadraticLinear,
}

impl ToyKind {
    fn has_diffusion(self) -> bool {
        matches!(self, ToyKind::Linear | ToyKind::QuadraticLinear)
    }
}

#[derive(Debug, Clone)]
pub struct ScalarToy {
    kind: ToyKind,
    lambda: f64,
    base: f64,
    layout: Arc<BlockLayout>,
}

impl ScalarToy {
    pub fn new(kind: ToyKind, lambda: f64) -> Self {
        ScalarToy {
            kind,
            lambda,
            base: 0.0,
            layout: Arc::new(BlockLayout::new(&[("u", 1)])),
        }
    }

    pub fn kind(&self) -> ToyKind {
        self.kind
    }

    /// Identity preconditioning: unit step on the single block. The
    /// diffusivity scale matches the block's linear term so the metric stays
    /// `|F|` whatever the step.
    pub fn default_spec(&self) -> PreconditionerSpec {
        let kappa = if self.kind.has_diffusion() { 1.0 } else { 0.0 };
        PreconditionerSpec {
            blocks: vec![BlockPrecond {
                block: "u".into(),
                dt: DtRule::Fixed(1.0),
                kappa: KappaRule::Fixed(kappa),
            }],
        }
    }
}

impl Problem for ScalarToy {
    fn layout(&self) -> &Arc<BlockLayout> {
        &self.layout
    }

    fn name(&self) -> &str {
        match self.kind {
            ToyKind::Fold => "toy-fold",
            ToyKind::Circle => "toy-circle",
            ToyKind::QuadFold => "toy-quadfold",
            ToyKind::NoLambda => "toy-nolambda",
            ToyKind::Linear => "toy-linear",
            ToyKind::QuadraticLinear => "toy-quadlinear",
        }
    }

    fn lambda(&self) -> f64 {
        self.lambda
    }

    fn set_lambda(&mut self, lambda: f64) {
        self.lambda = lambda;
    }

    fn eval_n(&mut self, state: &[f64]) -> Vec<f64> {
        let u = state[0];
        let l = self.lambda;
        vec![match self.kind {
            ToyKind::Fold => l - u * u,
            ToyKind::Circle => u * u + l * l - 1.0,
            ToyKind::QuadFold => u * u + l - 1.0,
            ToyKind::NoLambda => u * u - 1.0,
            ToyKind::Linear => 0.0,
            ToyKind::QuadraticLinear => u * u,
        }]
    }

    fn apply_l(&mut self, v: &[f64]) -> Vec<f64> {
        if self.kind.has_diffusion() {
            vec![-v[0]]
        } else {
            vec![0.0]
        }
    }

    fn solve_shifted(&mut self, dts: &BlockDts, rhs: &[f64]) -> Vec<f64> {
        if self.kind.has_diffusion() {
            vec![rhs[0] / (1.0 + dts.0[0])]
        } else {
            rhs.to_vec()
        }
    }

    fn set_linearization_base(&mut self, base: &[f64]) {
        self.base = base[0];
    }

    fn apply_linearized_n(&mut self, dir: &[f64]) -> Vec<f64> {
        let u = self.base;
        let v = dir[0];
        vec![match self.kind {
            ToyKind::Fold => -2.0 * u * v,
            ToyKind::Circle | ToyKind::QuadFold | ToyKind::NoLambda => 2.0 * u * v,
            ToyKind::Linear => 0.0,
            ToyKind::QuadraticLinear => 2.0 * u * v,
        }]
    }
}
