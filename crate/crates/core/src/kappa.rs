//! The κ(t) constant used by the uniform-convexity lower bounds on t-th
//! powers of norms (the "basic inequalities" the envelope analysis rests on).
//!
//! For t ∈ (1, 2], κ(t) is piecewise:
//!
//! ```text
//! κ(t) = (2+√3)·(t−1)/16                  t ∈ (1, t̂]
//! κ(t) = (2+√3)/16 · (1 − (3−√3)^{1−t})   t ∈ (t̂, 2)
//! κ(2) = 1
//! ```
//!
//! where the threshold t̂ ≈ 1.3214 is the root of
//!
//! ```text
//! t(t−1)/2 = 1 − [1 + (2−√3)·t/(t−1)]^{1−t}.
//! ```
//!
//! Each branch is a conservative constant valid on its own range, so κ is a
//! selector rather than a continuous function; it jumps at t̂ and at 2. The
//! threshold is solved numerically at first use instead of being hard-coded,
//! then sanity-checked against the known bracket [1.321, 1.322].

use std::sync::LazyLock;

use crate::error::{CoreError, Result};

/// Residual of the threshold equation; negative below the root, positive
/// above it on (1, 2].
fn threshold_residual(t: f64) -> f64 {
    let c = 2.0 - 3.0_f64.sqrt();
    t * (t - 1.0) / 2.0 - 1.0 + (1.0 + c * t / (t - 1.0)).powf(1.0 - t)
}

static T_HAT: LazyLock<f64> = LazyLock::new(|| {
    // The residual is negative just above 1 (the power term approaches 1
    // slower than the quadratic term grows) and ≈ +0.65 at t = 2.
    let mut lo = 1.0 + 1e-9;
    let mut hi = 2.0;
    debug_assert!(threshold_residual(lo) < 0.0 && threshold_residual(hi) > 0.0);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if threshold_residual(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    assert!(
        (1.321..=1.322).contains(&root),
        "kappa threshold solver drifted out of its certified bracket: {root}"
    );
    root
});

/// The branch threshold t̂ ≈ 1.3214, computed once by bisection (tolerance
/// 1e−12).
pub fn t_hat() -> f64 {
    *T_HAT
}

/// κ(t) for t ∈ (1, 2]; errors outside that range.
pub fn kappa(t: f64) -> Result<f64> {
    if !(t.is_finite() && t > 1.0 && t <= 2.0) {
        return Err(CoreError::invalid(format!(
            "kappa is defined on (1, 2], got {t}"
        )));
    }
    let scale = (2.0 + 3.0_f64.sqrt()) / 16.0;
    if t == 2.0 {
        Ok(1.0)
    } else if t <= t_hat() {
        Ok(scale * (t - 1.0))
    } else {
        Ok(scale * (1.0 - (3.0 - 3.0_f64.sqrt()).powf(1.0 - t)))
    }
}
