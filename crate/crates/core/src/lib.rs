//! High-order Moreau envelope smoothing and inexact proximal-point solvers.

pub mod envelope;
pub mod error;
pub mod grid;
pub mod hippa;
pub mod kappa;
pub mod oracle;
pub mod point;
pub mod recovery;
pub mod rng;
pub mod subgrad;
pub mod validate;

pub use envelope::{home_gradient, residual_norm, subproblem_value, EnvelopeParams, ProxApproximation};
pub use error::{CoreError, Result};
pub use grid::{
    brute_force_envelope, brute_force_envelope_profile, brute_force_prox, grid_min_objective,
    EnvelopeProfile, GridMinimizers, GridSpec,
};
pub use hippa::{
    boosted_hippa_run, boosted_hippa_step, hippa_run, iteration_bound_certificate,
    lyapunov_values, spectral_sigma, telescoped_bound_certificate, BoostedStep, ErrorSchedule,
    IterateTrace, IterationBoundCertificate, MetricFn, RunFailure, RunOutcome, RunResult,
    SpectralConfig, StopReason, StoppingRule, TelescopedBoundCertificate,
};
pub use kappa::{kappa, t_hat};
pub use oracle::{CountingOracle, FnOracle, ObjectiveOracle};
pub use point::Point;
pub use recovery::{
    generate_instance, phi_oracle, psi_oracle, recovery_error, InstanceSpec, ModelConfig,
    ModelKind, PhiOracle, PsiOracle, RecoveryInstance,
};
pub use rng::GaussianSampler;
pub use validate::{
    check_envelope_bounds, check_fixed_point_chain, check_gradient_formula,
    check_inequality_suites, check_inexact_envelope, check_sublevel_inclusion, run_all,
    test_functions, BoolCheck, CheckReport, TestFunction, ValidationReport, Witness,
};
pub use subgrad::{
    run_subgradient, solve_prox_baseline, solve_prox_sgdss, BaselineMethod, ClosedFormInner,
    InnerBudgetSchedule, InnerSolver, SgOutcome, SgdssInner, SgdssSchedule, StepRule,
    SubproblemOracle,
};
