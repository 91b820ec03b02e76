//! Subgradient inner solvers for the prox subproblem, and the step rules
//! shared with the outer baselines.
//!
//! The subproblem `h(y) = f(y) + 1/(p·γ)·‖x − y‖^p` is minimized by plain
//! subgradient descent with one of three step rules: geometrically decaying
//! (SG-DSS, the default inner solver), constant (SG-CSS), or Polyak (SG-PSS).
//! All of them return the best-seen iterate by subproblem value — the methods
//! are nonmonotone, and only the delivered point matters to the outer loop.
//! The default inner solver additionally restarts the decay in bands (see
//! [`solve_prox_sgdss`]) so that large inner budgets cover every step scale;
//! the baseline rules run a single uninterrupted sweep.

use crate::envelope::{pow_abs, EnvelopeParams, ProxApproximation};
use crate::error::{CoreError, Result};
use crate::oracle::ObjectiveOracle;
use crate::point::Point;

/// Geometric step schedule α_i = λ·qⁱ with an iteration cap.
#[derive(Clone, Copy, Debug)]
pub struct SgdssSchedule {
    pub lambda: f64,
    pub q: f64,
    pub max_iterations: usize,
}

impl SgdssSchedule {
    pub fn new(lambda: f64, q: f64, max_iterations: usize) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(CoreError::invalid(format!("lambda must be > 0, got {lambda}")));
        }
        if !(q.is_finite() && q > 0.0 && q < 1.0) {
            return Err(CoreError::invalid(format!("q must lie in (0,1), got {q}")));
        }
        Ok(SgdssSchedule { lambda, q, max_iterations })
    }

    /// The default recipe: λ = 1, q = 0.93.
    pub fn default_with_iterations(max_iterations: usize) -> Self {
        SgdssSchedule { lambda: 1.0, q: 0.93, max_iterations }
    }
}

/// Outer-iteration-indexed inner budget: how many subgradient iterations the
/// k-th prox solve gets.
///
/// The default ramps up as the outer loop tightens:
/// 50 for k < 3, 300 for 3 ≤ k < 20, 500 for 20 ≤ k < 30, 800 for k ≥ 30.
#[derive(Clone, Debug)]
pub struct InnerBudgetSchedule {
    /// (first outer iteration, inner iterations) pairs, strictly increasing
    /// in the first component, starting at 0.
    breakpoints: Vec<(usize, usize)>,
}

impl Default for InnerBudgetSchedule {
    fn default() -> Self {
        InnerBudgetSchedule { breakpoints: vec![(0, 50), (3, 300), (20, 500), (30, 800)] }
    }
}

impl InnerBudgetSchedule {
    pub fn new(breakpoints: Vec<(usize, usize)>) -> Result<Self> {
        if breakpoints.first().map(|b| b.0) != Some(0) {
            return Err(CoreError::invalid("inner budget must start at outer iteration 0"));
        }
        if !breakpoints.windows(2).all(|w| w[0].0 < w[1].0) {
            return Err(CoreError::invalid("inner budget breakpoints must strictly increase"));
        }
        Ok(InnerBudgetSchedule { breakpoints })
    }

    /// The same inner budget at every outer iteration.
    pub fn constant(iterations: usize) -> Self {
        InnerBudgetSchedule { breakpoints: vec![(0, iterations)] }
    }

    /// I_k for outer iteration k.
    pub fn at(&self, k: usize) -> usize {
        self.breakpoints
            .iter()
            .rev()
            .find(|(start, _)| *start <= k)
            .map(|(_, n)| *n)
            .unwrap_or(0)
    }

    /// Σ_{k < outer} I_k — the equivalent flat subgradient budget of `outer`
    /// proximal iterations.
    pub fn total_through(&self, outer: usize) -> usize {
        (0..outer).map(|k| self.at(k)).sum()
    }
}

/// Step-size rule of the subgradient engine.
#[derive(Clone, Copy, Debug)]
pub enum StepRule {
    /// α_i = λ·qⁱ.
    GeometricDecay { lambda: f64, q: f64 },
    /// α_i = α.
    Constant { alpha: f64 },
    /// α_i = (h(yᵢ) − f_low)/‖gᵢ‖², clamped to [0, 1e6]; stops at ‖g‖ = 0.
    Polyak { f_low: f64 },
}

impl StepRule {
    fn validate(&self) -> Result<()> {
        match *self {
            StepRule::GeometricDecay { lambda, q } => {
                SgdssSchedule::new(lambda, q, 1).map(|_| ())
            }
            StepRule::Constant { alpha } => {
                if alpha.is_finite() && alpha > 0.0 {
                    Ok(())
                } else {
                    Err(CoreError::invalid(format!("constant step must be > 0, got {alpha}")))
                }
            }
            StepRule::Polyak { f_low } => {
                if f_low.is_finite() {
                    Ok(())
                } else {
                    Err(CoreError::invalid("polyak lower bound must be finite"))
                }
            }
        }
    }
}

const POLYAK_STEP_CAP: f64 = 1e6;

/// Outcome of a subgradient run: the best-seen iterate and bookkeeping.
#[derive(Clone, Debug)]
pub struct SgOutcome {
    pub best: Point,
    pub best_value: f64,
    /// Step size of the last iteration actually taken (0 if none).
    pub last_step: f64,
    pub iterations: usize,
}

/// Plain subgradient descent on `obj` from `start` for at most `iterations`
/// steps, tracking the best-seen value.
///
/// `visit` observes every completed iteration as
/// `(i, iterate, value_at_iterate, step_used)` — the harness uses it to trace
/// the outer baselines; inner prox solves pass a no-op.
///
/// Errors: a non-finite objective value or subgradient is an oracle failure;
/// a non-finite iterate (overflowing step) is solver divergence.
pub fn run_subgradient(
    obj: &dyn ObjectiveOracle,
    start: &Point,
    rule: &StepRule,
    iterations: usize,
    mut visit: impl FnMut(usize, &Point, f64, f64),
) -> Result<SgOutcome> {
    rule.validate()?;
    if start.dim() != obj.dimension() {
        return Err(CoreError::dim(obj.dimension(), start.dim()));
    }
    let mut y = start.clone();
    if iterations == 0 {
        let value = obj.value_at(&y);
        if !value.is_finite() {
            return Err(CoreError::OracleFailure { what: "value", at_norm: y.norm() });
        }
        return Ok(SgOutcome { best: y, best_value: value, last_step: 0.0, iterations: 0 });
    }
    // One fused evaluation per iterate that needs both value and subgradient;
    // the final iterate needs only its value, so the call counts match what
    // separate evaluations would report.
    let (mut value, mut g) = obj.value_and_subgradient_at(&y);
    if !value.is_finite() {
        return Err(CoreError::OracleFailure { what: "value", at_norm: y.norm() });
    }
    let mut best = y.clone();
    let mut best_value = value;
    let mut last_step = 0.0;
    let mut geometric_step = match rule {
        StepRule::GeometricDecay { lambda, .. } => *lambda,
        _ => 0.0,
    };
    let mut completed = 0;
    for i in 0..iterations {
        if !g.is_finite() {
            return Err(CoreError::OracleFailure { what: "subgradient", at_norm: y.norm() });
        }
        let step = match rule {
            StepRule::GeometricDecay { q, .. } => {
                let s = geometric_step;
                geometric_step *= q;
                s
            }
            StepRule::Constant { alpha } => *alpha,
            StepRule::Polyak { f_low } => {
                let g2 = g.dot(&g).expect("same dimension by construction");
                if g2 == 0.0 {
                    // Stationary for the Polyak rule: nothing further to do.
                    break;
                }
                ((value - f_low) / g2).clamp(0.0, POLYAK_STEP_CAP)
            }
        };
        y = y.add_scaled(-step, &g)?;
        if !y.is_finite() {
            return Err(CoreError::SolverDiverged(format!(
                "iterate left the finite range at inner iteration {i} (step {step:.3e})"
            )));
        }
        if i + 1 == iterations {
            value = obj.value_at(&y);
        } else {
            (value, g) = obj.value_and_subgradient_at(&y);
        }
        if !value.is_finite() {
            return Err(CoreError::OracleFailure { what: "value", at_norm: y.norm() });
        }
        if value < best_value {
            best = y.clone();
            best_value = value;
        }
        last_step = step;
        completed = i + 1;
        visit(i, &y, value, step);
    }
    Ok(SgOutcome { best, best_value, last_step, iterations: completed })
}

/// Adapter presenting the prox subproblem anchored at `x` as an objective:
/// value `f(y) + 1/(p·γ)·‖x−y‖^p`, subgradient
/// `∂f(y) + (1/γ)·‖y−x‖^{p−2}·(y−x)`.
pub struct SubproblemOracle<'a> {
    anchor: &'a Point,
    f: &'a dyn ObjectiveOracle,
    params: &'a EnvelopeParams,
}

impl<'a> SubproblemOracle<'a> {
    pub fn new(anchor: &'a Point, f: &'a dyn ObjectiveOracle, params: &'a EnvelopeParams) -> Self {
        SubproblemOracle { anchor, f, params }
    }

    /// Adds the penalty gradient (‖d‖^{p−1}/γ)·(d/‖d‖) to `g`; at d = 0 the
    /// penalty's subdifferential contains 0, so `g` passes through unchanged.
    fn add_penalty_gradient(&self, g: Point, d: &Point) -> Point {
        let norm = d.norm();
        if norm == 0.0 {
            return g;
        }
        // Same factored form as the envelope gradient: (‖d‖^{p−1}/γ)·(d/‖d‖).
        let magnitude = pow_abs(norm, self.params.p() - 1.0) / self.params.gamma();
        g.add_scaled(magnitude / norm, d).expect("dimensions fixed at construction")
    }
}

impl ObjectiveOracle for SubproblemOracle<'_> {
    fn value_at(&self, y: &Point) -> f64 {
        let fy = self.f.value_at(y);
        let dist = y
            .sub(self.anchor)
            .expect("anchor and iterate dimensions fixed at construction")
            .norm();
        fy + self.params.penalty(dist)
    }

    fn subgradient_at(&self, y: &Point) -> Point {
        let g = self.f.subgradient_at(y);
        let d = y.sub(self.anchor).expect("dimensions fixed at construction");
        self.add_penalty_gradient(g, &d)
    }

    fn value_and_subgradient_at(&self, y: &Point) -> (f64, Point) {
        let (fy, g) = self.f.value_and_subgradient_at(y);
        let d = y.sub(self.anchor).expect("dimensions fixed at construction");
        let value = fy + self.params.penalty(d.norm());
        if !value.is_finite() {
            // An overflowing penalty would overflow its gradient as well;
            // per the trait contract the subgradient slot is unspecified.
            return (value, g);
        }
        (value, self.add_penalty_gradient(g, &d))
    }

    fn dimension(&self) -> usize {
        self.f.dimension()
    }

    fn lower_bound_hint(&self) -> Option<f64> {
        // The penalty is nonnegative, so f's bound transfers.
        self.f.lower_bound_hint()
    }
}

/// Iterations per restart band in [`solve_prox_sgdss`].
const RESTART_BAND_ITERATIONS: usize = 50;

/// SG-DSS prox solve: geometrically decaying steps on the subproblem,
/// starting from `warm_start` (default: the anchor `x`), best-seen returned.
///
/// Budgets beyond [`RESTART_BAND_ITERATIONS`] are split into bands. Each band
/// restarts the decay from the best-seen point with the initial step picked
/// up where the previous band's decay left off (λ, λ·q⁵⁰, λ·q¹⁰⁰, …), so one
/// solve sweeps step sizes across every scale instead of spending the whole
/// budget in the tail of a single decay: near a minimizer the full-amplitude
/// steps all overshoot, while a collapsed restart amplitude can no longer
/// cross flat regions. The subgradient-call count is unchanged by banding —
/// bands partition the iteration budget.
pub fn solve_prox_sgdss(
    x: &Point,
    f: &dyn ObjectiveOracle,
    params: &EnvelopeParams,
    schedule: &SgdssSchedule,
    warm_start: Option<&Point>,
) -> Result<ProxApproximation> {
    if f.dimension() != x.dim() {
        return Err(CoreError::dim(f.dimension(), x.dim()));
    }
    let start = warm_start.unwrap_or(x);
    if start.dim() != x.dim() {
        return Err(CoreError::dim(x.dim(), start.dim()));
    }
    let subproblem = SubproblemOracle::new(x, f, params);
    let band_decay = schedule.q.powi(RESTART_BAND_ITERATIONS as i32);
    let mut lambda = schedule.lambda;
    let mut best: Option<(Point, f64)> = None;
    let mut spent = 0;
    let mut last_step = 0.0;
    loop {
        let iters = RESTART_BAND_ITERATIONS.min(schedule.max_iterations - spent);
        let begin = best.as_ref().map_or(start, |(point, _)| point);
        let rule = StepRule::GeometricDecay { lambda, q: schedule.q };
        let outcome = run_subgradient(&subproblem, begin, &rule, iters, |_, _, _, _| {})?;
        spent += outcome.iterations;
        if outcome.iterations > 0 {
            last_step = outcome.last_step;
        }
        // Ties keep the incumbent: later bands start from it anyway.
        match &best {
            Some((_, incumbent)) if *incumbent <= outcome.best_value => {}
            _ => best = Some((outcome.best, outcome.best_value)),
        }
        if spent >= schedule.max_iterations || outcome.iterations < iters {
            break;
        }
        lambda *= band_decay;
    }
    let best_point = best.expect("the first band always runs").0;
    ProxApproximation::new(x.clone(), best_point, f, params, spent, last_step)
}

/// Baseline step rules accepted by [`solve_prox_baseline`].
#[derive(Clone, Copy, Debug)]
pub enum BaselineMethod {
    ConstantStep { alpha: f64 },
    Polyak { f_low: f64 },
}

/// Prox solve with a baseline step rule; same contract as
/// [`solve_prox_sgdss`] (warm start at the anchor, best-seen returned).
pub fn solve_prox_baseline(
    x: &Point,
    f: &dyn ObjectiveOracle,
    params: &EnvelopeParams,
    method: BaselineMethod,
    iterations: usize,
) -> Result<ProxApproximation> {
    let rule = match method {
        BaselineMethod::ConstantStep { alpha } => StepRule::Constant { alpha },
        BaselineMethod::Polyak { f_low } => StepRule::Polyak { f_low },
    };
    solve_prox_with_rule(x, f, params, &rule, iterations, None)
}

fn solve_prox_with_rule(
    x: &Point,
    f: &dyn ObjectiveOracle,
    params: &EnvelopeParams,
    rule: &StepRule,
    iterations: usize,
    warm_start: Option<&Point>,
) -> Result<ProxApproximation> {
    if f.dimension() != x.dim() {
        return Err(CoreError::dim(f.dimension(), x.dim()));
    }
    let start = warm_start.unwrap_or(x);
    if start.dim() != x.dim() {
        return Err(CoreError::dim(x.dim(), start.dim()));
    }
    let subproblem = SubproblemOracle::new(x, f, params);
    let outcome = run_subgradient(&subproblem, start, rule, iterations, |_, _, _, _| {})?;
    ProxApproximation::new(
        x.clone(),
        outcome.best,
        f,
        params,
        outcome.iterations,
        outcome.last_step,
    )
}

/// The interface the outer loops drive: produce an approximate prox at `x`
/// with at most `max_inner` inner iterations.
pub trait InnerSolver: Sync {
    fn solve_prox(
        &self,
        x: &Point,
        f: &dyn ObjectiveOracle,
        params: &EnvelopeParams,
        max_inner: usize,
        warm_start: Option<&Point>,
    ) -> Result<ProxApproximation>;
}

/// The production inner solver: banded SG-DSS with a fixed (λ, q) recipe
/// whose iteration count is handed down per outer iteration.
#[derive(Clone, Copy, Debug)]
pub struct SgdssInner {
    pub lambda: f64,
    pub q: f64,
}

impl Default for SgdssInner {
    fn default() -> Self {
        SgdssInner { lambda: 1.0, q: 0.93 }
    }
}

impl InnerSolver for SgdssInner {
    fn solve_prox(
        &self,
        x: &Point,
        f: &dyn ObjectiveOracle,
        params: &EnvelopeParams,
        max_inner: usize,
        warm_start: Option<&Point>,
    ) -> Result<ProxApproximation> {
        let schedule = SgdssSchedule::new(self.lambda, self.q, max_inner)?;
        solve_prox_sgdss(x, f, params, &schedule, warm_start)
    }
}

/// Closed-form prox for tests and validation: substitutes an exact solution.
pub struct ClosedFormInner<F: Fn(&Point) -> Point + Sync> {
    pub prox: F,
}

impl<F: Fn(&Point) -> Point + Sync> InnerSolver for ClosedFormInner<F> {
    fn solve_prox(
        &self,
        x: &Point,
        f: &dyn ObjectiveOracle,
        params: &EnvelopeParams,
        _max_inner: usize,
        _warm_start: Option<&Point>,
    ) -> Result<ProxApproximation> {
        ProxApproximation::new(x.clone(), (self.prox)(x), f, params, 0, 0.0)
    }
}
