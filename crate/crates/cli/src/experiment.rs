//! Experiment orchestration: one shared instance and initial point, every
//! requested method run against the same subgradient-call allowance, traces
//! written as CSV plus a summary JSON carrying the runtime certificates.
//!
//! All timing in the emitted files is *virtual*: one objective subgradient
//! call counts as one microsecond. That makes every output byte a pure
//! function of (config, seed); wall-clock parity with any particular machine
//! is a non-goal.

use std::fmt;
use std::io;
use std::path::Path;

use hippa_core::{
    boosted_hippa_run, generate_instance, hippa_run, iteration_bound_certificate,
    lyapunov_values, phi_oracle, psi_oracle, recovery_error, run_subgradient,
    telescoped_bound_certificate, CoreError, EnvelopeParams, ErrorSchedule, GaussianSampler,
    InnerBudgetSchedule, IterateTrace, IterationBoundCertificate, ModelKind, ObjectiveOracle,
    Point, RunOutcome, SgdssInner, SpectralConfig, StepRule, StopReason, StoppingRule,
    TelescopedBoundCertificate,
};
use serde::Serialize;

use crate::config::{Budget, ExperimentConfig, Method};

/// One objective subgradient call advances the virtual clock by this much.
pub const VIRTUAL_SECONDS_PER_CALL: f64 = 1e-6;

/// Residual tolerance used by the proximal methods' stopping rules.
pub const RESIDUAL_TOL: f64 = 1e-6;

const MAX_BACKTRACKS: usize = 50;

/// Anything that aborts the whole experiment (per-method solver failures are
/// recorded in the summary instead).
#[derive(Debug)]
pub enum HarnessError {
    Core(CoreError),
    Io(io::Error),
}

impl fmt::Display for HarnessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HarnessError::Core(e) => write!(f, "{e}"),
            HarnessError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for HarnessError {}

impl From<CoreError> for HarnessError {
    fn from(e: CoreError) -> Self {
        HarnessError::Core(e)
    }
}

impl From<io::Error> for HarnessError {
    fn from(e: io::Error) -> Self {
        HarnessError::Io(e)
    }
}

/// One CSV row. Fields a subgradient baseline does not have (prox residual,
/// envelope, spectral step) are NaN there; `backtracks` is genuinely 0.
#[derive(Clone, Debug)]
pub struct TraceRow {
    pub k: usize,
    pub residual_norm: f64,
    pub objective_value: f64,
    pub envelope_value_inexact: f64,
    pub backtracks: usize,
    pub sigma_k: f64,
    pub elapsed_seconds: f64,
    pub recovery_error: f64,
}

/// Formats a float with 17 significant digits so it round-trips through text
/// exactly; NaN is spelled `NaN`.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.16e}")
    }
}

pub const TRACE_CSV_HEADER: &str =
    "k,residual_norm,objective_value,envelope_value_inexact,backtracks,sigma_k,elapsed_seconds,recovery_error";

/// Renders rows under the fixed header, LF line endings.
pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::with_capacity(64 + rows.len() * 160);
    out.push_str(TRACE_CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            row.k,
            format_float(row.residual_norm),
            format_float(row.objective_value),
            format_float(row.envelope_value_inexact),
            row.backtracks,
            format_float(row.sigma_k),
            format_float(row.elapsed_seconds),
            format_float(row.recovery_error),
        ));
    }
    out
}

/// Writes through a temp file in the same directory and renames into place,
/// so readers never observe a half-written file.
pub fn write_atomic(path: &Path, text: &str) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, text.as_bytes())?;
    std::fs::rename(&tmp, path)
}

#[derive(Clone, Debug, Serialize)]
pub struct RateFit {
    pub points: usize,
    pub slope: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub status: String,
    pub rows: usize,
    pub subgradient_calls: u64,
    pub stop_reason: Option<StopReason>,
    pub final_objective: Option<f64>,
    pub final_residual_norm: Option<f64>,
    pub final_recovery_error: Option<f64>,
    pub telescoped_bound: Option<TelescopedBoundCertificate>,
    pub iteration_bound: Option<IterationBoundCertificate>,
    pub lyapunov_nonincreasing: Option<bool>,
    /// Boosted only: the stored per-iterate quantities re-satisfy the descent
    /// acceptance inequality (fallback steps excluded, they are flagged).
    pub descent_test_reverified: Option<bool>,
    pub fallback_steps: Option<usize>,
    pub rate_fit: Option<RateFit>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BudgetEcho {
    pub mode: &'static str,
    pub outer_iterations: Option<usize>,
    pub virtual_seconds: Option<f64>,
    /// The subgradient-call allowance every method was held to (discovered
    /// from the budget-defining proximal run in outer-iteration mode).
    pub shared_subgradient_call_budget: Option<u64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct InitEcho {
    pub scheme: &'static str,
    pub rng_stream: u64,
    pub dim: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentSummary {
    pub format_version: u32,
    pub model: u8,
    pub n1: usize,
    pub n2: usize,
    pub r: usize,
    pub m: usize,
    pub p: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub theta_ls: f64,
    pub outlier_ratio: f64,
    pub lambda_reg: Option<f64>,
    pub seed: u64,
    pub residual_tol: f64,
    pub virtual_seconds_per_call: f64,
    pub budget: BudgetEcho,
    pub init: InitEcho,
    pub methods: Vec<MethodSummary>,
    /// Conjunction of every certificate and re-verification recorded above.
    pub certificates_ok: bool,
}

impl ExperimentSummary {
    pub fn all_methods_ok(&self) -> bool {
        self.methods.iter().all(|m| m.status == "ok")
    }

    pub fn method(&self, id: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == id)
    }
}

struct MethodRun {
    summary: MethodSummary,
    rows: Vec<TraceRow>,
}

fn rows_from_trace(trace: &[IterateTrace]) -> Vec<TraceRow> {
    let mut elapsed_calls = 0u64;
    trace
        .iter()
        .map(|t| {
            elapsed_calls += t.inner_iterations as u64;
            TraceRow {
                k: t.k,
                residual_norm: t.residual_norm,
                objective_value: t.objective_value,
                envelope_value_inexact: t.envelope_value_inexact,
                backtracks: t.backtracks,
                sigma_k: t.sigma_k,
                elapsed_seconds: elapsed_calls as f64 * VIRTUAL_SECONDS_PER_CALL,
                recovery_error: t.metric.unwrap_or(f64::NAN),
            }
        })
        .collect()
}

fn lyapunov_nonincreasing(trace: &[IterateTrace], schedule: &ErrorSchedule) -> bool {
    lyapunov_values(trace, schedule).windows(2).all(|w| w[1] <= w[0] + 1e-9)
}

/// Re-evaluates the stored acceptance inequality
/// M^{ε_{k+1}}(x^{k+1}) ≤ M^{ε_k}(x^k) − σ‖R^{ε_k}(x^k)‖^p + ε_k + ε_{k+1}
/// for every non-fallback step in the trace.
fn descent_test_reverified(trace: &[IterateTrace], params: &EnvelopeParams) -> bool {
    trace.windows(2).all(|w| {
        let (cur, next) = (&w[0], &w[1]);
        if cur.fallback {
            return true;
        }
        let threshold = cur.envelope_value_inexact
            - params.sigma() * cur.residual_norm.powf(params.p())
            + cur.epsilon
            + next.epsilon;
        next.envelope_value_inexact <= threshold + 1e-9
    })
}

fn fit_rate(trace: &[IterateTrace]) -> Option<RateFit> {
    let pts: Vec<(f64, f64)> = trace
        .iter()
        .rev()
        .take(20)
        .filter(|t| t.residual_norm.is_finite() && t.residual_norm > 0.0)
        .map(|t| (t.k as f64, t.residual_norm.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|(x, _)| x).sum();
    let sy: f64 = pts.iter().map(|(_, y)| y).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return None;
    }
    Some(RateFit { points: pts.len(), slope: (n * sxy - sx * sy) / denom })
}

fn proximal_method_run(
    id: String,
    outcome: RunOutcome,
    params: &EnvelopeParams,
    schedule: &ErrorSchedule,
    boosted: bool,
) -> MethodRun {
    match outcome {
        Ok(result) => {
            let rows = rows_from_trace(&result.trace);
            let last = result.trace.last();
            let summary = MethodSummary {
                method: id,
                status: "ok".into(),
                rows: rows.len(),
                subgradient_calls: result.subgradient_calls,
                stop_reason: Some(result.stop_reason),
                final_objective: last.map(|t| t.objective_value),
                final_residual_norm: last.map(|t| t.residual_norm),
                final_recovery_error: last.and_then(|t| t.metric),
                telescoped_bound: telescoped_bound_certificate(
                    &result.trace,
                    params,
                    schedule,
                    0.0,
                ),
                iteration_bound: iteration_bound_certificate(
                    &result.trace,
                    params,
                    schedule,
                    RESIDUAL_TOL,
                    0.0,
                ),
                lyapunov_nonincreasing: Some(lyapunov_nonincreasing(&result.trace, schedule)),
                descent_test_reverified: boosted
                    .then(|| descent_test_reverified(&result.trace, params)),
                fallback_steps: boosted.then(|| {
                    result.trace.iter().filter(|t| t.fallback).count()
                }),
                rate_fit: fit_rate(&result.trace),
            };
            MethodRun { summary, rows }
        }
        Err(failure) => {
            let rows = rows_from_trace(&failure.trace);
            let summary = MethodSummary {
                method: id,
                status: format!("failed: {}", failure.error),
                rows: rows.len(),
                subgradient_calls: failure.trace.iter().map(|t| t.inner_iterations as u64).sum(),
                stop_reason: None,
                final_objective: None,
                final_residual_norm: None,
                final_recovery_error: None,
                telescoped_bound: None,
                iteration_bound: None,
                lyapunov_nonincreasing: None,
                descent_test_reverified: None,
                fallback_steps: None,
                rate_fit: None,
            };
            MethodRun { summary, rows }
        }
    }
}

fn baseline_method_run(
    method: &Method,
    oracle: &dyn ObjectiveOracle,
    x0: &Point,
    iterations: usize,
    metric: &dyn Fn(&Point) -> f64,
) -> MethodRun {
    let rule = match method {
        Method::SgDss => StepRule::GeometricDecay { lambda: 1.0, q: 0.93 },
        Method::SgCss(alpha) => StepRule::Constant { alpha: *alpha },
        Method::SgPss => StepRule::Polyak { f_low: 0.0 },
        _ => unreachable!("proximal methods do not take the baseline path"),
    };
    let mut rows = vec![TraceRow {
        k: 0,
        residual_norm: f64::NAN,
        objective_value: oracle.value_at(x0),
        envelope_value_inexact: f64::NAN,
        backtracks: 0,
        sigma_k: f64::NAN,
        elapsed_seconds: 0.0,
        recovery_error: metric(x0),
    }];
    let visit = |i: usize, pt: &Point, value: f64, _step: f64| {
        rows.push(TraceRow {
            k: i + 1,
            residual_norm: f64::NAN,
            objective_value: value,
            envelope_value_inexact: f64::NAN,
            backtracks: 0,
            sigma_k: f64::NAN,
            elapsed_seconds: (i + 1) as f64 * VIRTUAL_SECONDS_PER_CALL,
            recovery_error: metric(pt),
        });
    };
    let outcome = run_subgradient(oracle, x0, &rule, iterations, visit);
    let (status, calls, final_objective, final_recovery) = match outcome {
        Ok(out) => (
            "ok".to_string(),
            out.iterations as u64,
            Some(out.best_value),
            Some(metric(&out.best)),
        ),
        Err(e) => (format!("failed: {e}"), (rows.len() - 1) as u64, None, None),
    };
    let summary = MethodSummary {
        method: method.id(),
        status,
        rows: rows.len(),
        subgradient_calls: calls,
        stop_reason: None,
        final_objective,
        final_residual_norm: None,
        final_recovery_error: final_recovery,
        telescoped_bound: None,
        iteration_bound: None,
        lyapunov_nonincreasing: None,
        descent_test_reverified: None,
        fallback_steps: None,
        rate_fit: None,
    };
    MethodRun { summary, rows }
}

/// Runs the whole experiment and writes per-method CSVs, `plot-data.csv`,
/// and `summary.json` into `cfg.out`. Per-method solver failures are
/// recorded in the summary with whatever partial trace existed; only
/// instance-construction and I/O problems abort.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary, HarnessError> {
    let model_cfg = match cfg.model {
        ModelKind::Symmetric => hippa_core::ModelConfig::symmetric(cfg.outlier_ratio)?,
        ModelKind::Asymmetric => hippa_core::ModelConfig::asymmetric(cfg.outlier_ratio)?,
    };
    let inst = generate_instance(&model_cfg, cfg.n1, cfg.n2, cfg.r, cfg.seed)?;
    let oracle: Box<dyn ObjectiveOracle + '_> = match cfg.model {
        ModelKind::Symmetric => Box::new(phi_oracle(&inst)?),
        ModelKind::Asymmetric => Box::new(psi_oracle(&inst, &model_cfg)?),
    };
    let dim = match cfg.model {
        ModelKind::Symmetric => cfg.n1 * cfg.r,
        ModelKind::Asymmetric => (cfg.n1 + cfg.n2) * cfg.r,
    };
    // Shared initial point: i.i.d. standard normal factor entries, drawn from
    // stream 1 of the experiment seed (the instance itself uses stream 0).
    let mut rng = GaussianSampler::from_seed_stream(cfg.seed, 1);
    let x0 = Point::new((0..dim).map(|_| rng.standard_normal()).collect())?;

    let params = EnvelopeParams::new(cfg.p, cfg.gamma)?.with_theta_ls(cfg.theta_ls)?;
    let schedule = ErrorSchedule::default();
    let inner_budget = InnerBudgetSchedule::default();
    let solver = SgdssInner::default();
    let metric = |pt: &Point| recovery_error(pt, &inst).unwrap_or(f64::NAN);

    enum Plan {
        Outer(usize),
        Calls(u64),
    }
    let plan = match cfg.budget {
        Budget::OuterIterations(n) => Plan::Outer(n),
        Budget::VirtualSeconds(s) => Plan::Calls((s / VIRTUAL_SECONDS_PER_CALL).round() as u64),
    };
    // In call-budget mode every method shares the cap up front; in
    // outer-iteration mode the first proximal run discovers the allowance.
    let mut shared_calls: Option<u64> = match plan {
        Plan::Calls(k) => Some(k),
        Plan::Outer(_) => None,
    };

    let mut runs: Vec<Option<MethodRun>> = cfg.methods.iter().map(|_| None).collect();

    // Budget-defining order: boosted first, then plain hippa, then baselines.
    if let Some(idx) = cfg.methods.iter().position(|m| *m == Method::BoostedHippa) {
        let stop = match plan {
            Plan::Outer(n) => StoppingRule::by_outer_iterations(n),
            Plan::Calls(k) => StoppingRule::by_subgradient_calls(k),
        }
        .with_residual_tol(RESIDUAL_TOL);
        let outcome = boosted_hippa_run(
            &x0,
            oracle.as_ref(),
            &params,
            &schedule,
            &inner_budget,
            &stop,
            &SpectralConfig::default(),
            MAX_BACKTRACKS,
            &solver,
            Some(&metric),
        );
        if let (Plan::Outer(_), Ok(result)) = (&plan, &outcome) {
            shared_calls = Some(result.subgradient_calls);
        }
        runs[idx] = Some(proximal_method_run(
            Method::BoostedHippa.id(),
            outcome,
            &params,
            &schedule,
            true,
        ));
    }
    if let Some(idx) = cfg.methods.iter().position(|m| *m == Method::Hippa) {
        let stop = match (&plan, shared_calls) {
            // Equal-allowance comparison: once a boosted run has defined the
            // call budget, plain hippa is held to it instead of the outer cap.
            (_, Some(c)) => StoppingRule::by_subgradient_calls(c),
            (Plan::Outer(n), None) => StoppingRule::by_outer_iterations(*n),
            (Plan::Calls(k), None) => StoppingRule::by_subgradient_calls(*k),
        }
        .with_residual_tol(RESIDUAL_TOL);
        let outcome = hippa_run(
            &x0,
            oracle.as_ref(),
            &params,
            &schedule,
            &inner_budget,
            &stop,
            &solver,
            Some(&metric),
        );
        if shared_calls.is_none() {
            if let Ok(result) = &outcome {
                shared_calls = Some(result.subgradient_calls);
            }
        }
        runs[idx] = Some(proximal_method_run(
            Method::Hippa.id(),
            outcome,
            &params,
            &schedule,
            false,
        ));
    }
    let baseline_iters = shared_calls.unwrap_or(match plan {
        Plan::Outer(n) => n as u64,
        Plan::Calls(k) => k,
    }) as usize;
    for (idx, method) in cfg.methods.iter().enumerate() {
        if matches!(method, Method::BoostedHippa | Method::Hippa) {
            continue;
        }
        runs[idx] =
            Some(baseline_method_run(method, oracle.as_ref(), &x0, baseline_iters, &metric));
    }

    let runs: Vec<MethodRun> = runs.into_iter().map(|r| r.expect("every slot filled")).collect();

    std::fs::create_dir_all(&cfg.out)?;
    for (method, run) in cfg.methods.iter().zip(&runs) {
        let path = cfg.out.join(format!("{}.csv", method.id()));
        write_atomic(&path, &trace_csv(&run.rows))?;
    }
    let labelled: Vec<(String, &[TraceRow])> = cfg
        .methods
        .iter()
        .zip(&runs)
        .map(|(m, r)| (m.id(), r.rows.as_slice()))
        .collect();
    write_atomic(&cfg.out.join("plot-data.csv"), &crate::plotdata::emit_plot_data(&labelled))?;

    let certificates_ok = runs.iter().all(|r| {
        r.summary.telescoped_bound.as_ref().is_none_or(|c| c.satisfied)
            && r.summary.iteration_bound.as_ref().is_none_or(|c| c.satisfied)
            && r.summary.lyapunov_nonincreasing.is_none_or(|b| b)
            && r.summary.descent_test_reverified.is_none_or(|b| b)
    });
    let summary = ExperimentSummary {
        format_version: 1,
        model: cfg.model_number(),
        n1: cfg.n1,
        n2: cfg.n2,
        r: cfg.r,
        m: inst.m,
        p: cfg.p,
        gamma: cfg.gamma,
        sigma: params.sigma(),
        theta_ls: cfg.theta_ls,
        outlier_ratio: cfg.outlier_ratio,
        lambda_reg: model_cfg.lambda_reg,
        seed: cfg.seed,
        residual_tol: RESIDUAL_TOL,
        virtual_seconds_per_call: VIRTUAL_SECONDS_PER_CALL,
        budget: BudgetEcho {
            mode: match cfg.budget {
                Budget::OuterIterations(_) => "outer_iterations",
                Budget::VirtualSeconds(_) => "virtual_seconds",
            },
            outer_iterations: match cfg.budget {
                Budget::OuterIterations(n) => Some(n),
                Budget::VirtualSeconds(_) => None,
            },
            virtual_seconds: match cfg.budget {
                Budget::OuterIterations(_) => None,
                Budget::VirtualSeconds(s) => Some(s),
            },
            shared_subgradient_call_budget: shared_calls,
        },
        init: InitEcho {
            scheme: "iid standard normal factor entries (ChaCha8, experiment seed)",
            rng_stream: 1,
            dim,
        },
        methods: runs.into_iter().map(|r| r.summary).collect(),
        certificates_ok,
    };
    let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    json.push('\n');
    write_atomic(&cfg.out.join("summary.json"), &json)?;
    Ok(summary)
}
