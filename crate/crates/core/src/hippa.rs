//! Outer proximal-point loops: the plain HiPPA iteration and its boosted
//! variant with a spectral extrapolation direction and a nonmonotone
//! backtracking acceptance test (the inexact descent condition).
//!
//! Both drivers consume an [`InnerSolver`] for the prox subproblems, record a
//! per-outer-iteration [`IterateTrace`], and report how they stopped. The
//! descent theory for the boosted loop is checkable from the trace alone; the
//! certificate helpers at the bottom re-evaluate those bounds.

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::envelope::{pow_abs, EnvelopeParams, ProxApproximation};
use crate::error::{CoreError, Result};
use crate::oracle::{CountingOracle, ObjectiveOracle};
use crate::point::Point;
use crate::subgrad::{InnerBudgetSchedule, InnerSolver};

/// Inner-accuracy schedule ε_k. The default, ε_k = 1/(k+1)², is summable with
/// ε̄ = Σ ε_k = π²/6.
#[derive(Clone)]
pub struct ErrorSchedule {
    eps: Arc<dyn Fn(usize) -> f64 + Send + Sync>,
    epsilon_bar: f64,
}

impl fmt::Debug for ErrorSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ErrorSchedule")
            .field("epsilon_bar", &self.epsilon_bar)
            .field("epsilon_0", &(self.eps)(0))
            .finish()
    }
}

impl Default for ErrorSchedule {
    fn default() -> Self {
        Self::inverse_square()
    }
}

impl ErrorSchedule {
    /// ε_k = 1/(k+1)², ε̄ = π²/6.
    pub fn inverse_square() -> Self {
        ErrorSchedule {
            eps: Arc::new(|k| {
                let k1 = (k + 1) as f64;
                1.0 / (k1 * k1)
            }),
            epsilon_bar: std::f64::consts::PI * std::f64::consts::PI / 6.0,
        }
    }

    /// Custom schedule with caller-supplied total ε̄. Positivity and
    /// monotonicity are spot-checked on the first thousand indices — a full
    /// check of summability is the caller's burden.
    pub fn new(eps: impl Fn(usize) -> f64 + Send + Sync + 'static, epsilon_bar: f64) -> Result<Self> {
        if !(epsilon_bar.is_finite() && epsilon_bar > 0.0) {
            return Err(CoreError::invalid(format!(
                "epsilon_bar must be finite and > 0, got {epsilon_bar}"
            )));
        }
        let mut prev = f64::INFINITY;
        for k in 0..1000 {
            let e = eps(k);
            if !(e.is_finite() && e > 0.0) {
                return Err(CoreError::invalid(format!("epsilon_at({k}) = {e} is not positive")));
            }
            if e > prev {
                return Err(CoreError::invalid(format!(
                    "epsilon schedule increases at k = {k}"
                )));
            }
            prev = e;
        }
        Ok(ErrorSchedule { eps: Arc::new(eps), epsilon_bar })
    }

    pub fn epsilon_at(&self, k: usize) -> f64 {
        (self.eps)(k)
    }

    pub fn epsilon_bar(&self) -> f64 {
        self.epsilon_bar
    }

    /// Σ_{j ≥ k} ε_j, computed as ε̄ minus the leading partial sum.
    pub fn tail_sum(&self, k: usize) -> f64 {
        let leading: f64 = (0..k).map(|j| (self.eps)(j)).sum();
        (self.epsilon_bar - leading).max(0.0)
    }
}

/// Clamps and seed value for the spectral step length σ_k.
#[derive(Clone, Copy, Debug)]
pub struct SpectralConfig {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub sigma_0: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig { sigma_min: 1e-1, sigma_max: 1e10, sigma_0: 1.0 }
    }
}

impl SpectralConfig {
    pub fn new(sigma_min: f64, sigma_max: f64, sigma_0: f64) -> Result<Self> {
        if !(sigma_min.is_finite() && sigma_min > 0.0 && sigma_max.is_finite() && sigma_min < sigma_max)
        {
            return Err(CoreError::invalid(format!(
                "need 0 < sigma_min < sigma_max, got [{sigma_min}, {sigma_max}]"
            )));
        }
        if !(sigma_0.is_finite() && sigma_0 > 0.0) {
            return Err(CoreError::invalid(format!("sigma_0 must be > 0, got {sigma_0}")));
        }
        Ok(SpectralConfig { sigma_min, sigma_max, sigma_0 })
    }
}

/// Spectral step length: σ̂ = ⟨s,s⟩/⟨s,y⟩, |σ̂| if it lands in
/// [sigma_min, sigma_max]; otherwise a residual-scaled fallback
/// (1 if ‖R‖ > 1, 10⁵ if ‖R‖ < 10⁻⁵, ‖R‖⁻¹ in between). A vanishing or
/// effectively-zero denominator (|⟨s,y⟩| ≤ 1e−300) routes to the fallback
/// rather than producing ±Inf.
pub fn spectral_sigma(s: &Point, y: &Point, residual_norm_current: f64, cfg: &SpectralConfig) -> f64 {
    let fallback = |r: f64| {
        if r > 1.0 {
            1.0
        } else if r < 1e-5 {
            1e5
        } else {
            1.0 / r
        }
    };
    let r = residual_norm_current;
    let den = match s.dot(y) {
        Ok(d) => d,
        Err(_) => {
            debug_assert!(false, "spectral_sigma called with mismatched dimensions");
            return fallback(r);
        }
    };
    if den.abs() <= 1e-300 {
        return fallback(r);
    }
    let num = s.dot(s).expect("same point");
    let sigma_hat = (num / den).abs();
    if sigma_hat.is_finite() && sigma_hat >= cfg.sigma_min && sigma_hat <= cfg.sigma_max {
        sigma_hat
    } else {
        fallback(r)
    }
}

/// Termination policy. At least one of the three budgets must be set; the
/// residual tolerance alone is not a budget (a run may never reach it).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct StoppingRule {
    pub residual_tol: f64,
    pub max_outer_iterations: Option<usize>,
    pub max_seconds: Option<f64>,
    /// Cap on cumulative objective subgradient calls. Not part of the basic
    /// rule set; it exists so equal-oracle-budget comparisons can trim the
    /// last inner solve instead of overshooting.
    pub max_subgradient_calls: Option<u64>,
}

impl Default for StoppingRule {
    fn default() -> Self {
        StoppingRule {
            residual_tol: 1e-6,
            max_outer_iterations: None,
            max_seconds: None,
            max_subgradient_calls: None,
        }
    }
}

impl StoppingRule {
    pub fn by_outer_iterations(n: usize) -> Self {
        StoppingRule { max_outer_iterations: Some(n), ..Default::default() }
    }

    pub fn by_seconds(s: f64) -> Self {
        StoppingRule { max_seconds: Some(s), ..Default::default() }
    }

    pub fn by_subgradient_calls(n: u64) -> Self {
        StoppingRule { max_subgradient_calls: Some(n), ..Default::default() }
    }

    /// A negative tolerance disables the residual stop entirely (residual
    /// norms are nonnegative, so the threshold can never fire); fixed-budget
    /// comparisons use that to run every method to its call cap.
    pub fn with_residual_tol(mut self, tol: f64) -> Self {
        self.residual_tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.residual_tol.is_finite() {
            return Err(CoreError::invalid(format!(
                "residual_tol must be finite, got {}",
                self.residual_tol
            )));
        }
        if let Some(s) = self.max_seconds {
            if !(s.is_finite() && s >= 0.0) {
                return Err(CoreError::invalid(format!("max_seconds must be >= 0, got {s}")));
            }
        }
        if self.max_outer_iterations.is_none()
            && self.max_seconds.is_none()
            && self.max_subgradient_calls.is_none()
        {
            return Err(CoreError::invalid("at least one budget must be finite"));
        }
        Ok(())
    }
}

/// Why a run stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ResidualTolerance,
    OuterIterationBudget,
    TimeBudget,
    SubgradientCallBudget,
}

/// One record per outer iterate x^k. The residual/envelope/objective fields
/// describe the state at x^k; backtracks/alpha/sigma_k/fallback describe the
/// step that left it (zeroed on the final record, which no step leaves).
/// `inner_iterations` is the inner work spent while standing at x^k.
#[derive(Clone, Debug, Serialize)]
pub struct IterateTrace {
    pub k: usize,
    pub residual_norm: f64,
    pub envelope_value_inexact: f64,
    pub objective_value: f64,
    pub backtracks: usize,
    pub alpha: f64,
    pub sigma_k: f64,
    pub inner_iterations: usize,
    pub elapsed_seconds: f64,
    /// ε_k of this iteration's prox accuracy target.
    pub epsilon: f64,
    /// True when the step exhausted its backtracks and took the pure
    /// proximal point instead.
    pub fallback: bool,
    /// Optional user metric (e.g. recovery error) evaluated at x^k.
    pub metric: Option<f64>,
}

/// A finished run: final point, the full trace, and oracle-call totals.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub point: Point,
    pub trace: Vec<IterateTrace>,
    pub stop_reason: StopReason,
    pub subgradient_calls: u64,
    pub value_calls: u64,
}

/// A failed run still surrenders the trace accumulated before the error.
#[derive(Debug)]
pub struct RunFailure {
    pub error: CoreError,
    pub trace: Vec<IterateTrace>,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "run failed after {} recorded iterations: {}", self.trace.len(), self.error)
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

pub type RunOutcome = std::result::Result<RunResult, Box<RunFailure>>;

/// Per-point metric hook evaluated at every recorded iterate.
pub type MetricFn<'a> = &'a (dyn Fn(&Point) -> f64 + Sync);

fn objective_checked(f: &dyn ObjectiveOracle, x: &Point) -> Result<f64> {
    let v = f.value_at(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CoreError::OracleFailure { what: "value", at_norm: x.norm() })
    }
}

fn check_stop(
    stop: &StoppingRule,
    residual: f64,
    k: usize,
    started: Instant,
    subgradient_calls: u64,
) -> Option<StopReason> {
    if residual <= stop.residual_tol {
        Some(StopReason::ResidualTolerance)
    } else if stop.max_outer_iterations.is_some_and(|m| k >= m) {
        Some(StopReason::OuterIterationBudget)
    } else if stop.max_seconds.is_some_and(|s| started.elapsed().as_secs_f64() >= s) {
        Some(StopReason::TimeBudget)
    } else if stop.max_subgradient_calls.is_some_and(|c| subgradient_calls >= c) {
        Some(StopReason::SubgradientCallBudget)
    } else {
        None
    }
}

/// The plain HiPPA iteration x^{k+1} = prox^{p,ε_k}(x^k), each prox solved by
/// `solver` with the k-th inner budget (trimmed to the remaining subgradient
/// budget when one is set). Record k carries the cost of the prox solved at
/// x^k — the solve that produced both its residual and the next iterate.
pub fn hippa_run(
    x0: &Point,
    f: &dyn ObjectiveOracle,
    params: &EnvelopeParams,
    schedule: &ErrorSchedule,
    budget: &InnerBudgetSchedule,
    stop: &StoppingRule,
    solver: &dyn InnerSolver,
    metric: Option<MetricFn>,
) -> RunOutcome {
    let fail = |error: CoreError, trace: Vec<IterateTrace>| Box::new(RunFailure { error, trace });
    if let Err(e) = stop.validate() {
        return Err(fail(e, Vec::new()));
    }
    if x0.dim() != f.dimension() {
        return Err(fail(CoreError::dim(f.dimension(), x0.dim()), Vec::new()));
    }
    let counting = CountingOracle::new(f);
    let started = Instant::now();
    let mut trace: Vec<IterateTrace> = Vec::new();

    let effective_budget = |k: usize, used: u64| -> usize {
        let nominal = budget.at(k);
        match stop.max_subgradient_calls {
            Some(cap) => nominal.min(cap.saturating_sub(used) as usize),
            None => nominal,
        }
    };

    let mut current = match solver.solve_prox(x0, &counting, params, effective_budget(0, 0), None) {
        Ok(p) => p,
        Err(e) => return Err(fail(e, trace)),
    };
    current.epsilon_used = schedule.epsilon_at(0);
    let mut x = x0.clone();
    let mut k = 0usize;
    loop {
        let r = current.residual_norm();
        let objective = match objective_checked(&counting, &x) {
            Ok(v) => v,
            Err(e) => return Err(fail(e, trace)),
        };
        let mut record = IterateTrace {
            k,
            residual_norm: r,
            envelope_value_inexact: current.envelope_value_inexact,
            objective_value: objective,
            backtracks: 0,
            alpha: 0.0,
            sigma_k: 0.0,
            inner_iterations: current.inner_iterations,
            elapsed_seconds: started.elapsed().as_secs_f64(),
            epsilon: schedule.epsilon_at(k),
            fallback: false,
            metric: metric.map(|m| m(&x)),
        };
        if let Some(reason) = check_stop(stop, r, k, started, counting.subgradient_calls()) {
            record.elapsed_seconds = started.elapsed().as_secs_f64();
            trace.push(record);
            return Ok(RunResult {
                point: x,
                trace,
                stop_reason: reason,
                subgradient_calls: counting.subgradient_calls(),
                value_calls: counting.value_calls(),
            });
        }
        trace.push(record);
        x = current.y_bar.clone();
        let inner = effective_budget(k + 1, counting.subgradient_calls());
        current = match solver.solve_prox(&x, &counting, params, inner, None) {
            Ok(p) => p,
            Err(e) => return Err(fail(e, trace)),
        };
        current.epsilon_used = schedule.epsilon_at(k + 1);
        k += 1;
    }
}

/// Everything a boosted step hands back: the accepted point, the prox already
/// solved at it (reusable as the next iteration's x̄), the prox that was used
/// at x_k, and the trace record for iteration k.
#[derive(Clone, Debug)]
pub struct BoostedStep {
    pub next_x: Point,
    pub next_prox: ProxApproximation,
    pub current_prox: ProxApproximation,
    pub record: IterateTrace,
}

/// One boosted iteration at x_k.
///
/// Computes (or reuses, if `precomputed` is given) x̄^k = prox^{p,ε_k}(x^k)
/// and R = x^k − x̄^k, picks σ_k from the spectral history
/// `spectral_state = (x^{k−1}, R^{ε_{k−1}}(x^{k−1}))` (σ_0 when `None`), sets
/// d = −σ_k·R, and backtracks over candidates
/// x̂ = (1 − ϑ^m)·x̄^k + ϑ^m·(x^k + d) until the inexact descent condition
///
/// M^{p,ε_{k+1}}(x̂) ≤ M^{p,ε_k}(x^k) − σ‖R‖^p + ε_k + ε_{k+1}
///
/// holds. Exhausting `max_backtracks` falls back to x̂ = x̄^k (the pure
/// proximal step) and flags the record. A zero residual returns x_k unchanged.
///
/// `record.inner_iterations` counts only the inner work this call performed,
/// so a caller that precomputed the current prox attributes that cost itself.
#[allow(clippy::too_many_arguments)]
pub fn boosted_hippa_step(
    x_k: &Point,
    f: &dyn ObjectiveOracle,
    params: &EnvelopeParams,
    k: usize,
    schedule: &ErrorSchedule,
    budget: &InnerBudgetSchedule,
    spectral_state: Option<(&Point, &Point)>,
    cfg: &SpectralConfig,
    max_backtracks: usize,
    solver: &dyn InnerSolver,
    precomputed: Option<ProxApproximation>,
) -> Result<BoostedStep> {
    if max_backtracks == 0 {
        return Err(CoreError::invalid("max_backtracks must be >= 1"));
    }
    let eps_k = schedule.epsilon_at(k);
    let eps_next = schedule.epsilon_at(k + 1);
    let mut inner_spent = 0usize;
    let current = match precomputed {
        Some(p) => p,
        None => {
            let mut p = solver.solve_prox(x_k, f, params, budget.at(k), None)?;
            p.epsilon_used = eps_k;
            inner_spent += p.inner_iterations;
            p
        }
    };
    let r = current.residual_norm();
    let objective = objective_checked(f, x_k)?;
    let base_record = |backtracks: usize, alpha: f64, sigma_k: f64, inner: usize, fallback: bool| {
        IterateTrace {
            k,
            residual_norm: r,
            envelope_value_inexact: current.envelope_value_inexact,
            objective_value: objective,
            backtracks,
            alpha,
            sigma_k,
            inner_iterations: inner,
            elapsed_seconds: 0.0,
            epsilon: eps_k,
            fallback,
            metric: None,
        }
    };

    // A zero residual (proximal fixed point) is not special-cased: the
    // extrapolated candidates below collapse to x_k and the candidate solve
    // re-attacks the same anchor with the next inner budget. The solver is
    // deterministic, so only a budget change can move a parked anchor — and
    // spending the budget keeps call-capped runs terminating.
    let sigma_k = match spectral_state {
        None => cfg.sigma_0,
        Some((prev_x, prev_residual)) => {
            let s = x_k.sub(prev_x)?;
            let y = current.residual.sub(prev_residual)?;
            spectral_sigma(&s, &y, r, cfg)
        }
    };
    let d = current.residual.scale(-sigma_k);
    let x_plus_d = x_k.add(&d)?;
    let threshold =
        current.envelope_value_inexact - params.sigma() * pow_abs(r, params.p()) + eps_k + eps_next;

    let mut accepted: Option<(Point, ProxApproximation, f64, usize)> = None;
    let mut alpha = 1.0;
    for m in 0..max_backtracks {
        if m > 0 {
            alpha *= params.theta_ls();
        }
        let x_hat = current.y_bar.lerp(alpha, &x_plus_d)?;
        if !x_hat.is_finite() {
            // A wild extrapolation (huge σ_k) can overflow; shrink and retry.
            continue;
        }
        let mut cand = solver.solve_prox(&x_hat, f, params, budget.at(k + 1), None)?;
        cand.epsilon_used = eps_next;
        inner_spent += cand.inner_iterations;
        if cand.envelope_value_inexact <= threshold {
            accepted = Some((x_hat, cand, alpha, m));
            break;
        }
    }

    let (next_x, next_prox, alpha, backtracks, fallback) = match accepted {
        Some((x_hat, cand, alpha, m)) => (x_hat, cand, alpha, m, false),
        None => {
            // Backtracks exhausted: take the pure proximal step.
            let xb = current.y_bar.clone();
            let mut prox_b = solver.solve_prox(&xb, f, params, budget.at(k + 1), None)?;
            prox_b.epsilon_used = eps_next;
            inner_spent += prox_b.inner_iterations;
            (xb, prox_b, 0.0, max_backtracks, true)
        }
    };
    let record = base_record(backtracks, alpha, sigma_k, inner_spent, fallback);
    Ok(BoostedStep { next_x, next_prox, current_prox: current, record })
}

/// The boosted outer loop: iterates [`boosted_hippa_step`], threading the
/// spectral history s^k = x^k − x^{k−1}, y^k = R^{ε_k}(x^k) − R^{ε_{k−1}}(x^{k−1}),
/// and reusing each accepted candidate's prox as the next iteration's x̄.
#[allow(clippy::too_many_arguments)]
pub fn boosted_hippa_run(
    x0: &Point,
    f: &dyn ObjectiveOracle,
    params: &EnvelopeParams,
    schedule: &ErrorSchedule,
    budget: &InnerBudgetSchedule,
    stop: &StoppingRule,
    cfg: &SpectralConfig,
    max_backtracks: usize,
    solver: &dyn InnerSolver,
    metric: Option<MetricFn>,
) -> RunOutcome {
    let fail = |error: CoreError, trace: Vec<IterateTrace>| Box::new(RunFailure { error, trace });
    if let Err(e) = stop.validate() {
        return Err(fail(e, Vec::new()));
    }
    if x0.dim() != f.dimension() {
        return Err(fail(CoreError::dim(f.dimension(), x0.dim()), Vec::new()));
    }
    let counting = CountingOracle::new(f);
    let started = Instant::now();
    let mut trace: Vec<IterateTrace> = Vec::new();

    let mut current = match solver.solve_prox(x0, &counting, params, budget.at(0), None) {
        Ok(p) => p,
        Err(e) => return Err(fail(e, trace)),
    };
    current.epsilon_used = schedule.epsilon_at(0);
    // Inner work not yet attributed to any record: only the initial solve.
    let mut pending_inner = current.inner_iterations;
    let mut x = x0.clone();
    let mut prev: Option<(Point, Point)> = None;
    let mut k = 0usize;
    loop {
        let r = current.residual_norm();
        if let Some(reason) = check_stop(stop, r, k, started, counting.subgradient_calls()) {
            let objective = match objective_checked(&counting, &x) {
                Ok(v) => v,
                Err(e) => return Err(fail(e, trace)),
            };
            trace.push(IterateTrace {
                k,
                residual_norm: r,
                envelope_value_inexact: current.envelope_value_inexact,
                objective_value: objective,
                backtracks: 0,
                alpha: 0.0,
                sigma_k: 0.0,
                inner_iterations: pending_inner,
                elapsed_seconds: started.elapsed().as_secs_f64(),
                epsilon: schedule.epsilon_at(k),
                fallback: false,
                metric: metric.map(|m| m(&x)),
            });
            return Ok(RunResult {
                point: x,
                trace,
                stop_reason: reason,
                subgradient_calls: counting.subgradient_calls(),
                value_calls: counting.value_calls(),
            });
        }
        let step = match boosted_hippa_step(
            &x,
            &counting,
            params,
            k,
            schedule,
            budget,
            prev.as_ref().map(|(px, pr)| (px, pr)),
            cfg,
            max_backtracks,
            solver,
            Some(current.clone()),
        ) {
            Ok(s) => s,
            Err(e) => return Err(fail(e, trace)),
        };
        let mut record = step.record;
        record.inner_iterations += pending_inner;
        pending_inner = 0;
        record.elapsed_seconds = started.elapsed().as_secs_f64();
        record.metric = metric.map(|m| m(&x));
        trace.push(record);
        prev = Some((x.clone(), current.residual.clone()));
        x = step.next_x;
        current = step.next_prox;
        k += 1;
    }
}

/// Re-evaluation of the residual-summability bound from a finished trace:
/// σ·Σ_k ‖R^{ε_k}(x^k)‖^p over completed steps (all records but the last)
/// against M^{p,ε₀}(x⁰) − f_low + 2ε̄.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TelescopedBoundCertificate {
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

pub fn telescoped_bound_certificate(
    trace: &[IterateTrace],
    params: &EnvelopeParams,
    schedule: &ErrorSchedule,
    f_low: f64,
) -> Option<TelescopedBoundCertificate> {
    let first = trace.first()?;
    let steps = trace.len() - 1;
    let lhs: f64 = trace[..steps]
        .iter()
        .map(|t| params.sigma() * pow_abs(t.residual_norm, params.p()))
        .sum();
    let rhs = first.envelope_value_inexact - f_low + 2.0 * schedule.epsilon_bar();
    Some(TelescopedBoundCertificate { lhs, rhs, satisfied: lhs <= rhs + 1e-9 })
}

/// The iteration-bound stopping certificate: with tolerance ε the theory
/// terminates within ⌈(M^{p,ε₀}(x⁰) − f_low + 2ε̄)/(σ·ε^p)⌉ outer iterations.
/// `satisfied` is false only when a run demonstrably exceeded the bound
/// without ever reaching the tolerance first.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct IterationBoundCertificate {
    pub residual_tol: f64,
    pub bound: f64,
    pub first_hit: Option<usize>,
    pub outer_iterations: usize,
    pub satisfied: bool,
}

pub fn iteration_bound_certificate(
    trace: &[IterateTrace],
    params: &EnvelopeParams,
    schedule: &ErrorSchedule,
    residual_tol: f64,
    f_low: f64,
) -> Option<IterationBoundCertificate> {
    let first = trace.first()?;
    if residual_tol <= 0.0 {
        return None;
    }
    let numerator = first.envelope_value_inexact - f_low + 2.0 * schedule.epsilon_bar();
    let bound =
        (numerator / (params.sigma() * pow_abs(residual_tol, params.p()))).ceil().max(0.0);
    let first_hit = trace.iter().position(|t| t.residual_norm <= residual_tol);
    let outer_iterations = trace.len() - 1;
    let satisfied = match first_hit {
        Some(h) => (h as f64) <= bound,
        // Never reached the tolerance: the bound is only violated once the
        // run has provably run past it.
        None => (outer_iterations as f64) <= bound,
    };
    Some(IterationBoundCertificate { residual_tol, bound, first_hit, outer_iterations, satisfied })
}

/// Lyapunov sequence v_k = M^{p,ε_k}(x^k) + Σ_{j≥k} ε_j + Σ_{j≥k+1} ε_j along
/// the trace — non-increasing for accepted iterates, up to arithmetic slack.
pub fn lyapunov_values(trace: &[IterateTrace], schedule: &ErrorSchedule) -> Vec<f64> {
    trace
        .iter()
        .map(|t| t.envelope_value_inexact + schedule.tail_sum(t.k) + schedule.tail_sum(t.k + 1))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::FnOracle;
    use crate::subgrad::{ClosedFormInner, SgdssInner};

    fn abs_minus_2() -> FnOracle {
        FnOracle::new(
            1,
            |x| (x[0] - 2.0).abs(),
            |x| vec![if x[0] == 2.0 { 0.0 } else { (x[0] - 2.0).signum() }],
        )
        .with_lower_bound(0.0)
    }

    /// Exact prox of |·−2| for p=2: shrink toward 2 by γ, clamp at 2.
    fn abs_exact_inner(gamma: f64) -> ClosedFormInner<impl Fn(&Point) -> Point + Sync> {
        ClosedFormInner {
            prox: move |x: &Point| {
                let t = x.coord(0) - 2.0;
                let shrunk = t.signum() * (t.abs() - gamma).max(0.0);
                Point::scalar(2.0 + shrunk).unwrap()
            },
        }
    }

    fn quad() -> FnOracle {
        FnOracle::new(1, |x| 0.5 * x[0] * x[0], |x| vec![x[0]]).with_lower_bound(0.0)
    }

    fn quad_exact_inner() -> ClosedFormInner<impl Fn(&Point) -> Point + Sync> {
        ClosedFormInner { prox: |x: &Point| x.scale(0.5) }
    }

    #[test]
    fn error_schedule_default_values() {
        let s = ErrorSchedule::inverse_square();
        assert_eq!(s.epsilon_at(0), 1.0);
        assert_eq!(s.epsilon_at(1), 0.25);
        assert_eq!(s.epsilon_at(3), 1.0 / 16.0);
        let pi2_6 = std::f64::consts::PI * std::f64::consts::PI / 6.0;
        assert!((s.epsilon_bar() - pi2_6).abs() < 1e-15);
        assert!((s.tail_sum(0) - pi2_6).abs() < 1e-15);
        assert!((s.tail_sum(1) - (pi2_6 - 1.0)).abs() < 1e-12);
        assert!(s.tail_sum(10_000) >= 0.0);
    }

    #[test]
    fn error_schedule_rejects_bad_custom() {
        assert!(ErrorSchedule::new(|_| -1.0, 1.0).is_err());
        assert!(ErrorSchedule::new(|k| (k + 1) as f64, 10.0).is_err());
        assert!(ErrorSchedule::new(|k| 0.5f64.powi(k as i32), 2.0).is_ok());
    }

    #[test]
    fn spectral_sigma_examples() {
        let cfg = SpectralConfig::default();
        let s = Point::new(vec![1.0, 0.0]).unwrap();
        let y = Point::new(vec![2.0, 0.0]).unwrap();
        assert_eq!(spectral_sigma(&s, &y, 7.0, &cfg), 0.5);

        // σ̂ = 1e12 is out of range: fallbacks keyed by the residual.
        let tiny_y = Point::new(vec![1e-12, 0.0]).unwrap();
        assert_eq!(spectral_sigma(&s, &tiny_y, 2.0, &cfg), 1.0);
        assert_eq!(spectral_sigma(&s, &tiny_y, 0.5, &cfg), 2.0);
        assert_eq!(spectral_sigma(&s, &tiny_y, 1e-6, &cfg), 1e5);

        // Orthogonal s,y: zero denominator routes to the fallback.
        let ortho = Point::new(vec![0.0, 3.0]).unwrap();
        assert_eq!(spectral_sigma(&s, &ortho, 2.0, &cfg), 1.0);

        // Effectively-zero denominator stays finite.
        let degenerate = Point::new(vec![1e-301, 0.0]).unwrap();
        assert_eq!(spectral_sigma(&s, &degenerate, 0.25, &cfg), 4.0);
    }

    #[test]
    fn stopping_rule_validation() {
        assert!(StoppingRule::default().validate().is_err());
        assert!(StoppingRule::by_outer_iterations(5).validate().is_ok());
        assert!(StoppingRule::by_seconds(0.5).validate().is_ok());
        // Negative disables the residual stop; only non-finite is rejected.
        let disabled = StoppingRule::by_outer_iterations(5).with_residual_tol(-1.0);
        assert!(disabled.validate().is_ok());
        let bad = StoppingRule::by_outer_iterations(5).with_residual_tol(f64::NAN);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn hippa_quadratic_halves_each_iteration() {
        let f = FnOracle::new(
            2,
            |y| 0.5 * (y[0] * y[0] + y[1] * y[1]),
            |y| vec![y[0], y[1]],
        );
        let params = EnvelopeParams::new(2.0, 1.0).unwrap();
        let solver = ClosedFormInner { prox: |x: &Point| x.scale(0.5) };
        let x0 = Point::new(vec![4.0, 0.0]).unwrap();
        let result = hippa_run(
            &x0,
            &f,
            &params,
            &ErrorSchedule::default(),
            &InnerBudgetSchedule::constant(1),
            &StoppingRule::by_outer_iterations(5).with_residual_tol(0.0),
            &solver,
            None,
        )
        .unwrap();
        assert_eq!(result.stop_reason, StopReason::OuterIterationBudget);
        assert_eq!(result.trace.len(), 6);
        assert!((result.point.coord(0) - 4.0 / 32.0).abs() < 1e-15);
        for (k, t) in result.trace.iter().enumerate() {
            let xk = 4.0 / 2f64.powi(k as i32);
            assert_eq!(t.k, k);
            assert!((t.residual_norm - xk / 2.0).abs() < 1e-12, "k={k}");
            assert!((t.objective_value - 0.5 * xk * xk).abs() < 1e-12);
        }
        let last = result.trace.last().unwrap();
        assert_eq!(last.alpha, 0.0);
        assert_eq!(last.sigma_k, 0.0);
        assert_eq!(last.backtracks, 0);
    }

    #[test]
    fn hippa_stops_immediately_at_fixed_point() {
        let f = abs_minus_2();
        let params = EnvelopeParams::new(2.0, 1.0).unwrap();
        let result = hippa_run(
            &Point::scalar(2.0).unwrap(),
            &f,
            &params,
            &ErrorSchedule::default(),
            &InnerBudgetSchedule::default(),
            &StoppingRule::by_outer_iterations(50),
            &SgdssInner::default(),
            None,
        )
        .unwrap();
        assert_eq!(result.stop_reason, StopReason::ResidualTolerance);
        assert_eq!(result.trace.len(), 1);
        assert_eq!(result.trace[0].residual_norm, 0.0);
    }

    #[test]
    fn hippa_abs_converges_within_ten_outers() {
        let f = abs_minus_2();
        let params = EnvelopeParams::new(2.0, 1.0).unwrap();
        let result = hippa_run(
            &Point::scalar(4.0).unwrap(),
            &f,
            &params,
            &ErrorSchedule::default(),
            &InnerBudgetSchedule::default(),
            &StoppingRule::by_outer_iterations(10),
            &SgdssInner::default(),
            None,
        )
        .unwrap();
        // objective_value is exactly |x^k − 2|.
        let distances: Vec<f64> = result.trace.iter().map(|t| t.objective_value).collect();
        assert!(
            distances.iter().any(|d| *d <= 1e-2),
            "never reached 1e-2: {distances:?}"
        );
        for w in distances.windows(2) {
            assert!(w[1] <= w[0] + 1e-3, "distance increased: {w:?}");
        }
    }

    #[test]
    fn hippa_budget_zero_records_only_k0() {
        let f = abs_minus_2();
        let params = EnvelopeParams::new(2.0, 1.0).unwrap();
        let result = hippa_run(
            &Point::scalar(4.0).unwrap(),
            &f,
            &params,
            &ErrorSchedule::default(),
            &InnerBudgetSchedule::default(),
            &StoppingRule::by_outer_iterations(0),
            &SgdssInner::default(),
            None,
        )
        .unwrap();
        assert_eq!(result.stop_reason, StopReason::OuterIterationBudget);
        assert_eq!(result.trace.len(), 1);
        assert_eq!(result.trace[0].k, 0);
        // The k=0 prox was still solved: its cost is attributed to the record.
        assert_eq!(result.trace[0].inner_iterations, 50);
    }

    #[test]
    fn hippa_respects_subgradient_call_cap() {
        let f = abs_minus_2();
        let params = EnvelopeParams::new(2.0, 1.0).unwrap();
        let result = hippa_run(
            &Point::scalar(4.0).unwrap(),
            &f,
            &params,
            &ErrorSchedule::default(),
            &InnerBudgetSchedule::constant(50),
            &StoppingRule::by_subgradient_calls(70).with_residual_tol(0.0),
            &SgdssInner::default(),
            None,
        )
        .unwrap();
        assert_eq!(result.stop_reason, StopReason::SubgradientCallBudget);
        assert_eq!(result.subgradient_calls, 70);
        // 50 at k=0, then trimmed to 20.
        let spent: usize = result.trace.iter().map(|t| t.inner_iterations).sum();
        assert_eq!(spent, 70);
    }

    #[test]
    fn boosted_step_worked_example() {
        // f = |·−2|, p = 2, γ = 1, σ = 1/2.2, x⁰ = 4, exact inner solves:
        // x̄⁰ = 3, R = 1, σ₀ = 1, d = −1, first candidate x̂ = 3 accepted
        // (0.5 ≤ 1.5 − 0.4545… + ε₀ + ε₁).
        let f = abs_minus_2();
        let params = EnvelopeParams::new(2.0, 1.0)
            .unwrap()
            .with_sigma(1.0 / 2.2)
            .unwrap();
        let solver = abs_exact_inner(1.0);
        let step = boosted_hippa_step(
            &Point::scalar(4.0).unwrap(),
            &f,
            &params,
            0,
            &ErrorSchedule::default(),
            &InnerBudgetSchedule::default(),
            None,
            &SpectralConfig::default(),
            50,
            &solver,
            None,
        )
        .unwrap();
        assert_eq!(step.next_x.coord(0), 3.0);
        assert_eq!(step.record.backtracks, 0);
        assert_eq!(step.record.alpha, 1.0);
        assert_eq!(step.record.sigma_k, 1.0);
        assert_eq!(step.record.residual_norm, 1.0);
        assert_eq!(step.record.envelope_value_inexact, 1.5);
        assert_eq!(step.record.objective_value, 2.0);
        assert!(!step.record.fallback);
        assert_eq!(step.next_prox.y_bar.coord(0), 2.0);
        assert_eq!(step.next_prox.envelope_value_inexact, 0.5);
    }

    #[test]
    fn boosted_step_at_fixed_point_returns_unchanged() {
        let f = abs_minus_2();
        let params = EnvelopeParams::new(2.0, 1.0).unwrap();
        let solver = abs_exact_inner(1.0);
        let step = boosted_hippa_step(
            &Point::scalar(2.0).unwrap(),
            &f,
            &params,
            0,
            &ErrorSchedule::default(),
            &InnerBudgetSchedule::default(),
            None,
            &SpectralConfig::default(),
            50,
            &solver,
            None,
        )
        .unwrap();
        assert_eq!(step.next_x.coord(0), 2.0);
        assert_eq!(step.record.residual_norm, 0.0);
    }

    #[test]
    fn boosted_beats_hippa_on_the_quadratic() {
        // Exact prox halves x, so HiPPA needs 12 outers to push the residual
        // (= |x|/2) below 5e−4 from x0 = 4; the spectral step σ̂ = 2 is exact
        // for this envelope and the boosted run lands on 0 at k = 2.
        let f = quad();
        let params = EnvelopeParams::new(2.0, 1.0).unwrap();
        let stop = StoppingRule::by_outer_iterations(100).with_residual_tol(5e-4);
        let x0 = Point::scalar(4.0).unwrap();
        let plain = hippa_run(
            &x0,
            &f,
            &params,
            &ErrorSchedule::default(),
            &InnerBudgetSchedule::constant(1),
            &stop,
            &quad_exact_inner(),
            None,
        )
        .unwrap();
        let boosted = boosted_hippa_run(
            &x0,
            &f,
            &params,
            &ErrorSchedule::default(),
            &InnerBudgetSchedule::constant(1),
            &stop,
            &SpectralConfig::default(),
            50,
            &quad_exact_inner(),
            None,
        )
        .unwrap();
        assert_eq!(plain.stop_reason, StopReason::ResidualTolerance);
        assert_eq!(boosted.stop_reason, StopReason::ResidualTolerance);
        let plain_outers = plain.trace.len() - 1;
        let boosted_outers = boosted.trace.len() - 1;
        assert_eq!(plain_outers, 12);
        assert_eq!(boosted_outers, 2);
        assert_eq!(boosted.point.coord(0), 0.0);
    }

    #[test]
    fn boosted_no_slower_than_hippa_on_abs() {
        let f = abs_minus_2();
        let params = EnvelopeParams::new(2.0, 1.0).unwrap();
        let stop = StoppingRule::by_outer_iterations(100).with_residual_tol(1e-3);
        let x0 = Point::scalar(4.0).unwrap();
        let solver = abs_exact_inner(1.0);
        let plain = hippa_run(
            &x0,
            &f,
            &params,
            &ErrorSchedule::default(),
            &InnerBudgetSchedule::constant(1),
            &stop,
            &solver,
            None,
        )
        .unwrap();
        let boosted = boosted_hippa_run(
            &x0,
            &f,
            &params,
            &ErrorSchedule::default(),
            &InnerBudgetSchedule::constant(1),
            &stop,
            &SpectralConfig::default(),
            50,
            &solver,
            None,
        )
        .unwrap();
        assert!(boosted.trace.len() <= plain.trace.len());
        assert!((boosted.point.coord(0) - 2.0).abs() <= 1e-3);
    }

    #[test]
    fn boosted_trace_satisfies_certificates_with_sgdss() {
        let f = abs_minus_2();
        let params = EnvelopeParams::new(2.0, 1.0).unwrap();
        let result = boosted_hippa_run(
            &Point::scalar(4.0).unwrap(),
            &f,
            &params,
            &ErrorSchedule::default(),
            &InnerBudgetSchedule::default(),
            &StoppingRule::by_outer_iterations(15),
            &SpectralConfig::default(),
            50,
            &SgdssInner::default(),
            None,
        )
        .unwrap();
        let schedule = ErrorSchedule::default();
        // Acceptance certificate, re-evaluated record-by-record.
        for w in result.trace.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if a.fallback {
                continue;
            }
            let rhs = a.envelope_value_inexact - params.sigma() * pow_abs(a.residual_norm, params.p())
                + schedule.epsilon_at(a.k)
                + schedule.epsilon_at(b.k);
            assert!(
                b.envelope_value_inexact <= rhs + 1e-9,
                "acceptance certificate failed at k={}",
                a.k
            );
        }
        // Telescoped residual bound.
        let cert = telescoped_bound_certificate(&result.trace, &params, &schedule, 0.0).unwrap();
        assert!(cert.satisfied, "telescoped bound: {} > {}", cert.lhs, cert.rhs);
        // Lyapunov monotonicity.
        let v = lyapunov_values(&result.trace, &schedule);
        for w in v.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "lyapunov increased: {w:?}");
        }
        // Spectral clamp on every recorded step.
        for t in &result.trace[..result.trace.len() - 1] {
            assert!(
                (0.1..=1e10).contains(&t.sigma_k),
                "sigma_k = {} out of range",
                t.sigma_k
            );
        }
    }

    #[test]
    fn iteration_bound_certificate_on_tolerance_stop() {
        let f = abs_minus_2();
        let params = EnvelopeParams::new(2.0, 1.0).unwrap();
        let tol = 5e-2;
        let result = boosted_hippa_run(
            &Point::scalar(4.0).unwrap(),
            &f,
            &params,
            &ErrorSchedule::default(),
            &InnerBudgetSchedule::default(),
            &StoppingRule::by_outer_iterations(200).with_residual_tol(tol),
            &SpectralConfig::default(),
            50,
            &SgdssInner::default(),
            None,
        )
        .unwrap();
        assert_eq!(result.stop_reason, StopReason::ResidualTolerance);
        let cert = iteration_bound_certificate(
            &result.trace,
            &params,
            &ErrorSchedule::default(),
            tol,
            0.0,
        )
        .unwrap();
        assert!(cert.satisfied, "bound {} < first hit {:?}", cert.bound, cert.first_hit);
    }

    #[test]
    fn run_failure_carries_partial_trace() {
        // The quartic explodes under unit inner steps far from its wells.
        let f = FnOracle::new(
            1,
            |y| y[0].powi(4) - y[0].powi(2),
            |y| vec![4.0 * y[0].powi(3) - 2.0 * y[0]],
        );
        let params = EnvelopeParams::new(2.0, 1.0).unwrap();
        let err = hippa_run(
            &Point::scalar(50.0).unwrap(),
            &f,
            &params,
            &ErrorSchedule::default(),
            &InnerBudgetSchedule::default(),
            &StoppingRule::by_outer_iterations(5),
            &SgdssInner::default(),
            None,
        )
        .unwrap_err();
        assert!(matches!(
            err.error,
            CoreError::SolverDiverged(_) | CoreError::OracleFailure { .. }
        ));
        assert!(err.trace.is_empty());
    }

    #[test]
    fn stopping_rule_rejected_before_work() {
        let f = abs_minus_2();
        let params = EnvelopeParams::new(2.0, 1.0).unwrap();
        let err = hippa_run(
            &Point::scalar(4.0).unwrap(),
            &f,
            &params,
            &ErrorSchedule::default(),
            &InnerBudgetSchedule::default(),
            &StoppingRule::default(),
            &SgdssInner::default(),
            None,
        )
        .unwrap_err();
        assert!(matches!(err.error, CoreError::InvalidArgument(_)));
    }
}
