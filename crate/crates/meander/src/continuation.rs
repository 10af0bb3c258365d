//! Predictor-corrector branch tracing.
//!
//! Prediction extrapolates previous points along the branch (constant,
//! linear or quadratic, depending on how much history exists). Correction
//! converges the prediction with a matrix-free Newton method in one of
//! three flavors: frozen parameter, frozen solution component (for passing
//! saddle-nodes) or pseudo-arclength with an orthogonality constraint on
//! the correction. Step control accelerates after easy points and backs
//! off after failures.

use std::sync::Arc;

use thiserror::Error;

use crate::krylov::{bicgstab, KrylovConfig, KrylovError, SolverStats};
use crate::precond::{
    metric_from_residual, PrecondError, PreconditionerSpec, ResolvedSpec,
};
use crate::problem::{BlockDts, Problem};
use crate::state::{add_scaled, dot, norm, sub, SolutionVector};

/// One converged point on a branch.
#[derive(Debug, Clone)]
pub struct BranchPoint {
    pub state: SolutionVector,
    pub lambda: f64,
    /// The problem's scalar diagnostic evaluated on `state`.
    pub norm: f64,
    pub stats: SolverStats,
}

impl BranchPoint {
    /// Externally supplied seed; `stats` are zeroed.
    pub fn seed(state: SolutionVector, lambda: f64, norm: f64) -> Self {
        BranchPoint {
            state,
            lambda,
            norm,
            stats: SolverStats::default(),
        }
    }
}

/// The most recent points along the branch (at most three, oldest first).
#[derive(Debug, Clone, Default)]
pub struct PredictorHistory {
    points: Vec<BranchPoint>,
}

impl PredictorHistory {
    pub fn new() -> Self {
        PredictorHistory { points: Vec::new() }
    }

    pub fn push(&mut self, point: BranchPoint) {
        if self.points.len() == 3 {
            self.points.remove(0);
        }
        self.points.push(point);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> Option<&BranchPoint> {
        self.points.last()
    }

    pub fn points(&self) -> &[BranchPoint] {
        &self.points
    }
}

/// Which equation closes the Newton system.
#[derive(Debug, Clone)]
pub enum CorrectionMode {
    FixedLambda,
    FixedComponent(usize),
    PseudoArclength { tangent: Tangent, delta_s: f64 },
}

/// Normalized branch tangent over the concatenated `(u, lambda)`.
#[derive(Debug, Clone)]
pub struct Tangent {
    pub state: Vec<f64>,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    FixedParameter,
    PseudoArclength,
}

#[derive(Debug, Clone)]
pub struct ContinuationConfig {
    /// Initial parameter step; its sign sets the traversal direction.
    pub delta_lambda_init: f64,
    /// Magnitude cap on the parameter (or arclength) step.
    pub delta_lambda_max: f64,
    pub growth_factor: f64,
    pub shrink_factor: f64,
    /// Newton count at or below which the step is accelerated.
    pub newton_target: usize,
    pub newton_max: usize,
    /// Tolerance on the convergence metric.
    pub newton_tol: f64,
    pub krylov_tol: f64,
    pub krylov_cap: usize,
    pub mode: Mode,
    /// Constant `c` of the mode-switch criterion on the branch slope.
    pub switch_constant: f64,
    /// Frozen component near saddle-nodes; `None` picks the index of
    /// largest inter-point change at each switch.
    pub fixed_component_index: Option<usize>,
    /// Arclength step for pseudo-arclength mode.
    pub delta_s: f64,
    /// Consecutive correction failures tolerated before the trace stops.
    pub max_consecutive_failures: usize,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        ContinuationConfig {
            delta_lambda_init: 0.1,
            delta_lambda_max: 1.0,
            growth_factor: 1.2,
            shrink_factor: 0.9,
            newton_target: 4,
            newton_max: 10,
            newton_tol: 1e-8,
            krylov_tol: 1e-2,
            krylov_cap: 1000,
            mode: Mode::FixedParameter,
            switch_constant: 10.0,
            fixed_component_index: None,
            delta_s: 0.1,
            max_consecutive_failures: 25,
        }
    }
}

impl ContinuationConfig {
    pub fn validate(&self) -> Result<(), ContinuationError> {
        if !(self.growth_factor > 1.0 && self.growth_factor < 1.4) {
            return Err(ContinuationError::InvalidConfig(
                "growth_factor must lie in (1, 1.4)".into(),
            ));
        }
        if !(self.shrink_factor > 0.0 && self.shrink_factor < 1.0) {
            return Err(ContinuationError::InvalidConfig(
                "shrink_factor must lie in (0, 1)".into(),
            ));
        }
        if self.delta_lambda_init.abs() > self.delta_lambda_max {
            return Err(ContinuationError::InvalidConfig(
                "delta_lambda_init must not exceed delta_lambda_max".into(),
            ));
        }
        if self.newton_max == 0 || self.krylov_cap == 0 {
            return Err(ContinuationError::InvalidConfig(
                "newton_max and krylov_cap must be at least 1".into(),
            ));
        }
        Ok(())
    }

    fn krylov_config(&self) -> KrylovConfig {
        KrylovConfig {
            rel_tol: self.krylov_tol,
            max_iters: self.krylov_cap,
            breakdown_eps: 1e-30,
        }
    }
}

#[derive(Debug, Error)]
pub enum ContinuationError {
    #[error("no seed: the predictor history is empty")]
    NoSeed,
    #[error("degenerate history: repeated lambda values")]
    DegenerateHistory,
    #[error("stationary history: zero extrapolation direction")]
    StationaryHistory,
    #[error("history holds {0} points but at least {1} are required")]
    InsufficientHistory(usize, usize),
    #[error("coincident points: tangent undefined")]
    CoincidentPoints,
    #[error("seed is not converged under the configured tolerance (metric {0:.3e})")]
    SeedNotConverged(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Precond(#[from] PrecondError),
}

/// Why a single correction attempt failed; both variants tell the step
/// controller to shrink.
#[derive(Debug, Error)]
pub enum CorrectionError {
    #[error("Newton did not converge within {newton_max} iterations (metric {metric:.3e})")]
    NonConvergence { newton_max: usize, metric: f64 },
    #[error("Krylov solve failed: {0}")]
    KrylovFailure(#[from] KrylovError),
    #[error("singular border: the lambda-derivative column is numerically null")]
    SingularBorder,
    #[error(transparent)]
    Precond(#[from] PrecondError),
}

/// Polynomial extrapolation of the state at parameter distance
/// `delta_lambda`: constant from one point, linear from two, quadratic from
/// three.
pub fn predict(
    history: &PredictorHistory,
    delta_lambda: f64,
) -> Result<(Vec<f64>, f64), ContinuationError> {
    let pts = history.points();
    if pts.is_empty() {
        return Err(ContinuationError::NoSeed);
    }
    for a in 0..pts.len() {
        for b in a + 1..pts.len() {
            if pts[a].lambda == pts[b].lambda {
                return Err(ContinuationError::DegenerateHistory);
            }
        }
    }
    let last = pts.last().unwrap();
    let lambda_pred = last.lambda + delta_lambda;
    let u = match pts.len() {
        1 => last.state.data.clone(),
        2 => {
            let (p2, p1) = (&pts[0], &pts[1]);
            let s = 1.0 / (p1.lambda - p2.lambda);
            p1.state
                .data
                .iter()
                .zip(&p2.state.data)
                .map(|(u1, u2)| u1 + (u1 - u2) * s * delta_lambda)
                .collect()
        }
        _ => {
            let (p3, p2, p1) = (&pts[0], &pts[1], &pts[2]);
            let d12 = 1.0 / (p1.lambda - p2.lambda);
            let d23 = 1.0 / (p2.lambda - p3.lambda);
            let w = (delta_lambda + p1.lambda - p2.lambda) / (p1.lambda - p3.lambda);
            p1.state
                .data
                .iter()
                .zip(p2.state.data.iter().zip(&p3.state.data))
                .map(|(u1, (u2, u3))| {
                    let s1 = (u1 - u2) * d12;
                    let s2 = (u2 - u3) * d23;
                    u1 + s1 * delta_lambda + (s1 - s2) * w * delta_lambda
                })
                .collect()
        }
    };
    Ok((u, lambda_pred))
}

/// Prediction along the latest secant direction, rescaled so that
/// `||u_pred - u_last||^2 + delta_lambda^2 = delta_s^2`.
pub fn predict_arclength(
    history: &PredictorHistory,
    delta_s: f64,
) -> Result<(Vec<f64>, f64), ContinuationError> {
    let pts = history.points();
    if pts.len() < 2 {
        return Err(ContinuationError::InsufficientHistory(pts.len(), 2));
    }
    let tangent = approximate_tangent(history)
        .map_err(|_| ContinuationError::StationaryHistory)?;
    let last = pts.last().unwrap();
    let u = add_scaled(&last.state.data, delta_s, &tangent.state);
    Ok((u, last.lambda + delta_s * tangent.lambda))
}

/// Secant approximation of the branch tangent from the last two points,
/// normalized over the concatenated `(u, lambda)`.
pub fn approximate_tangent(history: &PredictorHistory) -> Result<Tangent, ContinuationError> {
    let pts = history.points();
    if pts.len() < 2 {
        return Err(ContinuationError::InsufficientHistory(pts.len(), 2));
    }
    let prev = &pts[pts.len() - 2];
    let last = &pts[pts.len() - 1];
    let du = sub(&last.state.data, &prev.state.data);
    let dl = last.lambda - prev.lambda;
    let n = (dot(&du, &du) + dl * dl).sqrt();
    if n == 0.0 {
        return Err(ContinuationError::CoincidentPoints);
    }
    Ok(Tangent {
        state: du.iter().map(|x| x / n).collect(),
        lambda: dl / n,
    })
}

/// Slope-based criterion for leaving fixed-parameter correction near a
/// saddle-node. Gentle slope (strictly below the constant... the switch
/// happens only when the slope strictly exceeds it) keeps the parameter
/// frozen; a steep slope freezes the fastest-moving solution component
/// instead.
pub fn mode_switch(history: &PredictorHistory, switch_constant: f64) -> CorrectionMode {
    mode_switch_with_override(history, switch_constant, None)
}

pub fn mode_switch_with_override(
    history: &PredictorHistory,
    switch_constant: f64,
    component_override: Option<usize>,
) -> CorrectionMode {
    let pts = history.points();
    if pts.len() < 2 {
        return CorrectionMode::FixedLambda;
    }
    let prev = &pts[pts.len() - 2];
    let last = &pts[pts.len() - 1];
    let dl = last.lambda - prev.lambda;
    let slope = if dl == 0.0 {
        f64::INFINITY
    } else {
        (last.norm - prev.norm) / dl
    };
    if slope.abs() > switch_constant {
        let k = component_override.unwrap_or_else(|| {
            let mut k_best = 0;
            let mut best = -1.0;
            for (k, (a, b)) in last.state.data.iter().zip(&prev.state.data).enumerate() {
                let change = (a - b).abs();
                if change > best {
                    best = change;
                    k_best = k;
                }
            }
            k_best
        });
        CorrectionMode::FixedComponent(k)
    } else {
        CorrectionMode::FixedLambda
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    Converged { iterations: usize },
    Failed,
}

/// Step control: accelerate after cheap corrections, freeze after
/// expensive ones, back off after failures. Deterministic; never exceeds
/// `delta_lambda_max`.
pub fn adapt_step(current_step: f64, outcome: StepOutcome, config: &ContinuationConfig) -> f64 {
    debug_assert!(current_step > 0.0);
    match outcome {
        StepOutcome::Converged { iterations } if iterations <= config.newton_target => {
            (current_step * config.growth_factor).min(config.delta_lambda_max)
        }
        StepOutcome::Converged { .. } => current_step,
        StepOutcome::Failed => current_step * config.shrink_factor,
    }
}

fn residual_resolved<P: Problem + ?Sized>(
    problem: &mut P,
    resolved: &ResolvedSpec,
    state: &[f64],
) -> Vec<f64> {
    problem.refresh(state);
    let mut f = problem.eval_n(state);
    let lu = problem.apply_l(state);
    for (fi, li) in f.iter_mut().zip(&lu) {
        *fi += li;
    }
    let mut out = problem.solve_shifted(&BlockDts(resolved.dt.clone()), &f);
    scale_blocks_resolved(problem, &mut out, resolved);
    out
}

fn jacobian_resolved<P: Problem + ?Sized>(
    problem: &mut P,
    resolved: &ResolvedSpec,
    dir: &[f64],
) -> Vec<f64> {
    let mut jf = problem.apply_linearized_n(dir);
    let lv = problem.apply_l(dir);
    for (ji, li) in jf.iter_mut().zip(&lv) {
        *ji += li;
    }
    let mut out = problem.solve_shifted(&BlockDts(resolved.dt.clone()), &jf);
    scale_blocks_resolved(problem, &mut out, resolved);
    out
}

fn scale_blocks_resolved<P: Problem + ?Sized>(
    problem: &P,
    v: &mut [f64],
    resolved: &ResolvedSpec,
) {
    for (b, &c) in problem.layout().blocks().iter().zip(&resolved.c) {
        for x in &mut v[b.range()] {
            *x *= c;
        }
    }
}

/// Central finite-difference column d/d lambda of the preconditioned
/// residual, with the preconditioner frozen at the current parameter.
fn lambda_column<P: Problem + ?Sized>(
    problem: &mut P,
    resolved: &ResolvedSpec,
    state: &[f64],
    lambda: f64,
) -> Vec<f64> {
    let eps = 1e-6 * (1.0 + lambda.abs());
    problem.set_lambda(lambda + eps);
    let rp = residual_resolved(problem, resolved, state);
    problem.set_lambda(lambda - eps);
    let rm = residual_resolved(problem, resolved, state);
    problem.set_lambda(lambda);
    rp.iter().zip(&rm).map(|(p, m)| (p - m) / (2.0 * eps)).collect()
}

/// Newton correction at frozen parameter: solves the preconditioned system
/// `c P^-1 J du = c P^-1 F` until the convergence metric drops below
/// `newton_tol`.
pub fn correct_fixed_parameter<P: Problem + ?Sized>(
    problem: &mut P,
    spec: &PreconditionerSpec,
    guess: &[f64],
    lambda: f64,
    config: &ContinuationConfig,
) -> Result<BranchPoint, CorrectionError> {
    problem.set_lambda(lambda);
    let mut u = guess.to_vec();
    let mut stats = SolverStats::default();
    let mut metric = f64::INFINITY;
    let kcfg = config.krylov_config();

    for _ in 1..=config.newton_max {
        let resolved = spec.resolve(problem.layout(), problem.lambda())?;
        let r = residual_resolved(problem, &resolved, &u);
        metric = metric_from_residual(problem.layout(), &resolved, &r);
        if metric < config.newton_tol {
            stats.record_newton(0);
            return Ok(make_point(problem, u, lambda, stats));
        }
        problem.set_linearization_base(&u);
        let (du, iters) = bicgstab(
            |v| jacobian_resolved(problem, &resolved, v),
            &r,
            &kcfg,
        )?;
        stats.record_newton(iters);
        for (ui, di) in u.iter_mut().zip(&du) {
            *ui -= di;
        }
    }
    Err(CorrectionError::NonConvergence {
        newton_max: config.newton_max,
        metric,
    })
}

/// Newton correction with solution component `k` frozen and the parameter
/// free: the unknown in slot `k` becomes the parameter update, pairing the
/// Jacobian columns with the lambda-derivative column.
pub fn correct_fixed_component<P: Problem + ?Sized>(
    problem: &mut P,
    spec: &PreconditionerSpec,
    guess: &[f64],
    lambda_guess: f64,
    k: usize,
    config: &ContinuationConfig,
) -> Result<BranchPoint, CorrectionError> {
    problem.set_lambda(lambda_guess);
    let mut u = guess.to_vec();
    let mut lambda = lambda_guess;
    let mut stats = SolverStats::default();
    let mut metric = f64::INFINITY;
    let kcfg = config.krylov_config();

    for _ in 1..=config.newton_max {
        let resolved = spec.resolve(problem.layout(), problem.lambda())?;
        let r = residual_resolved(problem, &resolved, &u);
        metric = metric_from_residual(problem.layout(), &resolved, &r);
        if metric < config.newton_tol {
            stats.record_newton(0);
            return Ok(make_point(problem, u, lambda, stats));
        }
        let dfdl = lambda_column(problem, &resolved, &u, lambda);
        if norm(&dfdl) <= 1e-13 * (1.0 + norm(&r)) {
            return Err(CorrectionError::SingularBorder);
        }
        problem.set_linearization_base(&u);
        let (dx, iters) = bicgstab(
            |v| {
                let mut vt = v.to_vec();
                let dl = vt[k];
                vt[k] = 0.0;
                let mut out = jacobian_resolved(problem, &resolved, &vt);
                for (oi, ci) in out.iter_mut().zip(&dfdl) {
                    *oi += dl * ci;
                }
                out
            },
            &r,
            &kcfg,
        )?;
        stats.record_newton(iters);
        let dl = dx[k];
        for (i, (ui, di)) in u.iter_mut().zip(&dx).enumerate() {
            if i != k {
                *ui -= di;
            }
        }
        lambda -= dl;
        problem.set_lambda(lambda);
    }
    Err(CorrectionError::NonConvergence {
        newton_max: config.newton_max,
        metric,
    })
}

/// Newton correction on the bordered `(n+1)` system whose last row is the
/// normalized tangent and last residual the arclength condition
/// `sigma = udot . (u - u_i) + lambdadot (lambda - lambda_i) - delta_s`.
/// The physics rows are preconditioned; the border row is applied raw.
#[allow(clippy::too_many_arguments)]
pub fn correct_pseudo_arclength<P: Problem + ?Sized>(
    problem: &mut P,
    spec: &PreconditionerSpec,
    guess: &[f64],
    lambda_guess: f64,
    tangent: &Tangent,
    anchor: &BranchPoint,
    delta_s: f64,
    config: &ContinuationConfig,
) -> Result<BranchPoint, CorrectionError> {
    problem.set_lambda(lambda_guess);
    let n = guess.len();
    let mut u = guess.to_vec();
    let mut lambda = lambda_guess;
    let mut stats = SolverStats::default();
    let mut metric = f64::INFINITY;
    let kcfg = config.krylov_config();

    for _ in 1..=config.newton_max {
        let resolved = spec.resolve(problem.layout(), problem.lambda())?;
        let r = residual_resolved(problem, &resolved, &u);
        metric = metric_from_residual(problem.layout(), &resolved, &r);
        let sigma = {
            let du = sub(&u, &anchor.state.data);
            dot(&tangent.state, &du) + tangent.lambda * (lambda - anchor.lambda) - delta_s
        };
        if metric < config.newton_tol && sigma.abs() < config.newton_tol {
            stats.record_newton(0);
            return Ok(make_point(problem, u, lambda, stats));
        }
        let dfdl = lambda_column(problem, &resolved, &u, lambda);
        problem.set_linearization_base(&u);
        let mut rhs = r.clone();
        rhs.push(sigma);
        let (dx, iters) = bicgstab(
            |v| {
                let (vu, vl) = (&v[..n], v[n]);
                let mut out = jacobian_resolved(problem, &resolved, vu);
                for (oi, ci) in out.iter_mut().zip(&dfdl) {
                    *oi += vl * ci;
                }
                out.push(dot(&tangent.state, vu) + tangent.lambda * vl);
                out
            },
            &rhs,
            &kcfg,
        )?;
        stats.record_newton(iters);
        for (ui, di) in u.iter_mut().zip(&dx[..n]) {
            *ui -= di;
        }
        lambda -= dx[n];
        problem.set_lambda(lambda);
    }
    Err(CorrectionError::NonConvergence {
        newton_max: config.newton_max,
        metric,
    })
}

fn make_point<P: Problem + ?Sized>(
    problem: &P,
    u: Vec<f64>,
    lambda: f64,
    stats: SolverStats,
) -> BranchPoint {
    let layout = Arc::clone(problem.layout());
    let norm = problem.norm(&u);
    BranchPoint {
        state: SolutionVector::from_vec(layout, u),
        lambda,
        norm,
        stats,
    }
}

/// Converge an initial guess into a valid seed point at fixed parameter.
pub fn converge_seed<P: Problem + ?Sized>(
    problem: &mut P,
    spec: &PreconditionerSpec,
    guess: &[f64],
    lambda: f64,
    config: &ContinuationConfig,
) -> Result<BranchPoint, CorrectionError> {
    correct_fixed_parameter(problem, spec, guess, lambda, config)
}

/// When to stop extending a branch.
#[derive(Debug, Clone, Default)]
pub struct StopRule {
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
    /// Number of points to compute beyond the seed.
    pub max_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    LambdaBound,
    MaxPoints,
    /// The step shrank below `1e-12 * |delta_lambda_init|`.
    StepUnderflow,
    /// Too many consecutive correction failures.
    FailureBudget,
}

impl Termination {
    pub fn is_failure(self) -> bool {
        matches!(self, Termination::StepUnderflow | Termination::FailureBudget)
    }
}

/// A traced branch segment: every converged point (seed first) and why the
/// trace stopped.
#[derive(Debug, Clone)]
pub struct Trace {
    pub points: Vec<BranchPoint>,
    pub termination: Termination,
}

/// Repeat predict -> correct -> adapt until the stop rule fires. In
/// fixed-parameter mode the slope criterion switches between frozen-lambda
/// and frozen-component correction each iteration, and the parameter step
/// changes sign once a fold is crossed.
pub fn trace_branch<P: Problem + ?Sized>(
    problem: &mut P,
    spec: &PreconditionerSpec,
    seed: BranchPoint,
    config: &ContinuationConfig,
    stop: &StopRule,
) -> Result<Trace, ContinuationError> {
    config.validate()?;
    let resolved = spec.resolve(problem.layout(), seed.lambda)?;
    problem.set_lambda(seed.lambda);
    let r = residual_resolved(problem, &resolved, &seed.state.data);
    let seed_metric = metric_from_residual(problem.layout(), &resolved, &r);
    if !(seed_metric < config.newton_tol) {
        return Err(ContinuationError::SeedNotConverged(seed_metric));
    }

    let mut history = PredictorHistory::new();
    history.push(seed.clone());
    let mut points = vec![seed];
    let mut step = config.delta_lambda_init.abs().max(f64::MIN_POSITIVE);
    let mut dir = if config.delta_lambda_init < 0.0 { -1.0 } else { 1.0 };
    let underflow = 1e-12 * config.delta_lambda_init.abs().max(f64::MIN_POSITIVE);
    let mut consecutive_failures = 0usize;

    let termination = loop {
        if points.len() - 1 >= stop.max_points {
            break Termination::MaxPoints;
        }
        let last_lambda = points.last().unwrap().lambda;
        if at_bound(last_lambda, stop) {
            break Termination::LambdaBound;
        }

        let attempt: Result<BranchPoint, CorrectionError> = match config.mode {
            Mode::FixedParameter => {
                let mode = mode_switch_with_override(
                    &history,
                    config.switch_constant,
                    config.fixed_component_index,
                );
                match mode {
                    CorrectionMode::FixedLambda => {
                        let mut dl = dir * step;
                        // land exactly on a requested bound
                        if let Some(hi) = stop.lambda_max {
                            if dir > 0.0 && last_lambda + dl > hi {
                                dl = hi - last_lambda;
                            }
                        }
                        if let Some(lo) = stop.lambda_min {
                            if dir < 0.0 && last_lambda + dl < lo {
                                dl = lo - last_lambda;
                            }
                        }
                        let (u, l) = predict(&history, dl)?;
                        correct_fixed_parameter(problem, spec, &u, l, config)
                    }
                    CorrectionMode::FixedComponent(k) => {
                        // extrapolate along the secant to keep the frozen
                        // component moving through the fold
                        let (u, l) = predict_arclength(&history, step)?;
                        correct_fixed_component(problem, spec, &u, l, k, config)
                    }
                    CorrectionMode::PseudoArclength { .. } => unreachable!(),
                }
            }
            Mode::PseudoArclength => {
                if history.len() < 2 {
                    // bootstrap with one fixed-parameter step
                    let (u, l) = predict(&history, dir * step)?;
                    correct_fixed_parameter(problem, spec, &u, l, config)
                } else {
                    let tangent = approximate_tangent(&history)?;
                    let anchor = points.last().unwrap().clone();
                    let (u, l) = predict_arclength(&history, step)?;
                    correct_pseudo_arclength(
                        problem, spec, &u, l, &tangent, &anchor, step, config,
                    )
                }
            }
        };

        match attempt {
            Ok(point) => {
                let prev_lambda = points.last().unwrap().lambda;
                if (point.lambda - prev_lambda) * dir < 0.0 {
                    // crossed a fold: the branch now runs the other way
                    dir = -dir;
                }
                consecutive_failures = 0;
                let iterations = point.stats.newton_iterations;
                history.push(point.clone());
                points.push(point);
                step = adapt_step(step, StepOutcome::Converged { iterations }, config);
            }
            Err(CorrectionError::Precond(e)) => return Err(e.into()),
            Err(_) => {
                consecutive_failures += 1;
                if consecutive_failures > config.max_consecutive_failures {
                    break Termination::FailureBudget;
                }
                if config.mode == Mode::FixedParameter && consecutive_failures >= 2 {
                    // repeated failure at shrunken steps with a steep branch
                    // means the fold lies ahead: reverse the parameter step
                    let steep = matches!(
                        mode_switch_with_override(
                            &history,
                            config.switch_constant,
                            config.fixed_component_index
                        ),
                        CorrectionMode::FixedComponent(_)
                    );
                    if steep {
                        dir = -dir;
                        consecutive_failures = 0;
                    }
                }
                step = adapt_step(step, StepOutcome::Failed, config);
                if step < underflow {
                    break Termination::StepUnderflow;
                }
            }
        }
    };

    Ok(Trace {
        points,
        termination,
    })
}

fn at_bound(lambda: f64, stop: &StopRule) -> bool {
    if let Some(hi) = stop.lambda_max {
        if lambda >= hi - 1e-14 * hi.abs().max(1.0) {
            return true;
        }
    }
    if let Some(lo) = stop.lambda_min {
        if lambda <= lo + 1e-14 * lo.abs().max(1.0) {
            return true;
        }
    }
    false
}
