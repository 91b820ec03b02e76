//! The high-order Moreau envelope (HOME) and its proximal objects.
//!
//! For an objective f, a power p > 1, and a prox parameter γ > 0, the
//! envelope and the high-order proximal operator (HOPE) are
//!
//! ```text
//! M(x)      = inf_y  f(y) + 1/(p·γ) · ‖x − y‖^p
//! prox(x)   = argmin_y  f(y) + 1/(p·γ) · ‖x − y‖^p
//! ```
//!
//! Inner solvers produce approximate prox points; this module defines the
//! parameter bundle, the subproblem objective, the inexact envelope value
//! carried by a [`ProxApproximation`], the envelope gradient formula, and the
//! fixed-point residual.

use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::oracle::ObjectiveOracle;
use crate::point::Point;

/// Parameters of the envelope and of the descent test used by the boosted
/// outer loop: power `p > 1`, prox parameter `gamma > 0`, descent coefficient
/// `sigma ∈ (0, 1/(p·gamma))`, and backtracking factor `theta_ls ∈ (0, 1)`.
#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeParams {
    p: f64,
    gamma: f64,
    sigma: f64,
    theta_ls: f64,
}

impl EnvelopeParams {
    /// Builds parameters with the default descent coefficient
    /// `sigma = 1/(1.1·p·gamma)` and backtracking factor `theta_ls = 0.8`.
    pub fn new(p: f64, gamma: f64) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(CoreError::invalid(format!("p must be > 1, got {p}")));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(CoreError::invalid(format!("gamma must be > 0, got {gamma}")));
        }
        Ok(EnvelopeParams {
            p,
            gamma,
            sigma: 1.0 / (1.1 * p * gamma),
            theta_ls: 0.8,
        })
    }

    /// Overrides the descent coefficient; must stay strictly inside
    /// `(0, 1/(p·gamma))`.
    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        let cap = 1.0 / (self.p * self.gamma);
        if !(sigma.is_finite() && sigma > 0.0 && sigma < cap) {
            return Err(CoreError::invalid(format!(
                "sigma must lie in (0, {cap:.6e}) = (0, 1/(p*gamma)), got {sigma}"
            )));
        }
        self.sigma = sigma;
        Ok(self)
    }

    /// Overrides the backtracking factor ϑ ∈ (0, 1).
    pub fn with_theta_ls(mut self, theta_ls: f64) -> Result<Self> {
        if !(theta_ls.is_finite() && theta_ls > 0.0 && theta_ls < 1.0) {
            return Err(CoreError::invalid(format!(
                "theta_ls must lie in (0, 1), got {theta_ls}"
            )));
        }
        self.theta_ls = theta_ls;
        Ok(self)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn theta_ls(&self) -> f64 {
        self.theta_ls
    }

    /// The regularization coefficient 1/(p·γ).
    pub fn reg_coeff(&self) -> f64 {
        1.0 / (self.p * self.gamma)
    }

    /// ‖x − y‖^p scaled by 1/(p·γ); the distance penalty of the subproblem.
    pub fn penalty(&self, distance: f64) -> f64 {
        self.reg_coeff() * pow_abs(distance, self.p)
    }
}

/// |t|^p with cheap exact paths for the powers that dominate the test grids.
#[inline]
pub(crate) fn pow_abs(t: f64, p: f64) -> f64 {
    let a = t.abs();
    if p == 2.0 {
        a * a
    } else if p == 3.0 {
        a * a * a
    } else if p == 1.0 {
        a
    } else {
        a.powf(p)
    }
}

/// The subproblem objective `f(y) + 1/(p·γ)·‖x − y‖^p` evaluated at `y`.
///
/// Errors on dimension mismatch and on a non-finite oracle value.
pub fn subproblem_value(
    y: &Point,
    x: &Point,
    f: &dyn ObjectiveOracle,
    params: &EnvelopeParams,
) -> Result<f64> {
    if y.dim() != x.dim() {
        return Err(CoreError::dim(x.dim(), y.dim()));
    }
    if f.dimension() != x.dim() {
        return Err(CoreError::dim(f.dimension(), x.dim()));
    }
    let fy = f.value_at(y);
    if !fy.is_finite() {
        return Err(CoreError::OracleFailure { what: "value", at_norm: y.norm() });
    }
    Ok(fy + params.penalty(x.sub(y)?.norm()))
}

/// An approximate prox point together with the quantities the outer loops
/// consume. The envelope value is always recomputed from `(anchor, y_bar)`
/// with the defining formula — never trusted from solver bookkeeping.
#[derive(Clone, Debug)]
pub struct ProxApproximation {
    pub anchor: Point,
    pub y_bar: Point,
    /// f(y_bar) + 1/(p·γ)·‖anchor − y_bar‖^p, the inexact envelope value.
    pub envelope_value_inexact: f64,
    /// anchor − y_bar, the approximate fixed-point residual.
    pub residual: Point,
    /// The accuracy target ε the producing solver was run for (bookkeeping;
    /// stamped by the outer loop, 0 when unknown).
    pub epsilon_used: f64,
    pub inner_iterations: usize,
    pub inner_final_step: f64,
}

impl ProxApproximation {
    /// Packages a solver output, recomputing the envelope value and residual.
    pub fn new(
        anchor: Point,
        y_bar: Point,
        f: &dyn ObjectiveOracle,
        params: &EnvelopeParams,
        inner_iterations: usize,
        inner_final_step: f64,
    ) -> Result<Self> {
        let envelope_value_inexact = subproblem_value(&y_bar, &anchor, f, params)?;
        let residual = anchor.sub(&y_bar)?;
        Ok(ProxApproximation {
            anchor,
            y_bar,
            envelope_value_inexact,
            residual,
            epsilon_used: 0.0,
            inner_iterations,
            inner_final_step,
        })
    }

    pub fn residual_norm(&self) -> f64 {
        self.residual.norm()
    }
}

/// The envelope gradient formula `(1/γ)·‖r‖^{p−2}·r` at `r = anchor − y_bar`.
///
/// Returns the zero vector when `r = 0` for every p > 1 (the 0/0 = 0
/// convention; the limit of the formula is 0 in all cases, so this keeps a
/// single code path). Computed as `(‖r‖^{p−1}/γ)·(r/‖r‖)`, which keeps the
/// intermediates in range for p < 2 all the way down to residual norms at
/// the underflow boundary.
pub fn home_gradient(prox: &ProxApproximation, params: &EnvelopeParams) -> Point {
    let r = &prox.residual;
    let norm = r.norm();
    if norm == 0.0 {
        return Point::zeros(r.dim());
    }
    let magnitude = pow_abs(norm, params.p() - 1.0) / params.gamma();
    r.scale(magnitude / norm)
}

/// Euclidean norm of the fixed-point residual `anchor − y_bar`.
pub fn residual_norm(prox: &ProxApproximation) -> f64 {
    prox.residual_norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::FnOracle;

    fn abs_minus_2() -> FnOracle {
        FnOracle::new(
            1,
            |x| (x[0] - 2.0).abs(),
            |x| vec![if x[0] == 2.0 { 0.0 } else { (x[0] - 2.0).signum() }],
        )
    }

    #[test]
    fn params_validate_ranges() {
        assert!(EnvelopeParams::new(1.0, 1.0).is_err());
        assert!(EnvelopeParams::new(2.0, 0.0).is_err());
        let params = EnvelopeParams::new(2.0, 1.0).unwrap();
        assert!((params.sigma() - 1.0 / 2.2).abs() < 1e-15);
        // sigma must stay strictly below 1/(p*gamma)
        assert!(params.clone().with_sigma(0.5).is_err());
        assert!(params.clone().with_sigma(0.49).is_ok());
        assert!(params.with_theta_ls(1.0).is_err());
    }

    #[test]
    fn subproblem_value_examples() {
        let f = abs_minus_2();
        // y = x: the penalty vanishes and only f(x) remains.
        let p21 = EnvelopeParams::new(2.0, 1.0).unwrap();
        let x = Point::scalar(4.0).unwrap();
        assert_eq!(subproblem_value(&x, &x, &f, &p21).unwrap(), 2.0);
        // |3−2| + (1/2)·|4−3|² = 1.5
        let y = Point::scalar(3.0).unwrap();
        assert_eq!(subproblem_value(&y, &x, &f, &p21).unwrap(), 1.5);
        // p=3, γ=0.5: 0 + (1/1.5)·|4−2|³ = 16/3
        let p305 = EnvelopeParams::new(3.0, 0.5).unwrap();
        let y = Point::scalar(2.0).unwrap();
        let v = subproblem_value(&y, &x, &f, &p305).unwrap();
        assert!((v - 16.0 / 3.0).abs() < 1e-14, "got {v}");
    }

    #[test]
    fn subproblem_value_rejects_mismatch() {
        let f = abs_minus_2();
        let x = Point::scalar(4.0).unwrap();
        let y = Point::zeros(2);
        assert!(matches!(
            subproblem_value(&y, &x, &f, &EnvelopeParams::new(2.0, 1.0).unwrap()),
            Err(CoreError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn gradient_formula_on_soft_threshold_points() {
        let f = abs_minus_2();
        let params = EnvelopeParams::new(2.0, 1.0).unwrap();
        // Exact prox of |·−2| at x=4 is y=3: gradient (x−y)/γ = 1.
        let prox = ProxApproximation::new(
            Point::scalar(4.0).unwrap(),
            Point::scalar(3.0).unwrap(),
            &f,
            &params,
            0,
            0.0,
        )
        .unwrap();
        assert_eq!(home_gradient(&prox, &params).as_slice(), &[1.0]);
        assert_eq!(residual_norm(&prox), 1.0);

        // Inside the kink region: x=2.5 has exact prox 2, gradient 0.5,
        // and envelope value 0.5²/2 = 0.125.
        let prox = ProxApproximation::new(
            Point::scalar(2.5).unwrap(),
            Point::scalar(2.0).unwrap(),
            &f,
            &params,
            0,
            0.0,
        )
        .unwrap();
        assert_eq!(home_gradient(&prox, &params).as_slice(), &[0.5]);
        assert!((prox.envelope_value_inexact - 0.125).abs() < 1e-15);
    }

    #[test]
    fn gradient_zero_at_zero_residual_for_all_p() {
        let f = abs_minus_2();
        let x = Point::scalar(2.0).unwrap();
        for p in [1.25, 1.5, 2.0, 3.0] {
            let params = EnvelopeParams::new(p, 0.7).unwrap();
            let prox =
                ProxApproximation::new(x.clone(), x.clone(), &f, &params, 0, 0.0).unwrap();
            assert_eq!(home_gradient(&prox, &params).as_slice(), &[0.0]);
        }
    }

    #[test]
    fn gradient_stays_finite_for_tiny_residuals_and_small_p() {
        let f = FnOracle::new(1, |_| 0.0, |_| vec![0.0]);
        let params = EnvelopeParams::new(1.25, 1.0).unwrap();
        let anchor = Point::scalar(1e-150).unwrap();
        let prox =
            ProxApproximation::new(anchor, Point::scalar(0.0).unwrap(), &f, &params, 0, 0.0)
                .unwrap();
        let g = home_gradient(&prox, &params);
        assert!(g.is_finite());
        // ‖g‖ = ‖r‖^{p−1}/γ = (1e−150)^{0.25} ≈ 3.1623e−38
        let expected = 1e-150_f64.powf(0.25);
        assert!((g.norm() - expected).abs() < 1e-50, "got {}", g.norm());
    }

    #[test]
    fn residual_norm_quadratic_example() {
        // f = ½y², p=2, γ=1, x=4: prox minimizes ½y² + ½(4−y)² at y=2.
        let f = FnOracle::new(1, |x| 0.5 * x[0] * x[0], |x| vec![x[0]]);
        let params = EnvelopeParams::new(2.0, 1.0).unwrap();
        let prox = ProxApproximation::new(
            Point::scalar(4.0).unwrap(),
            Point::scalar(2.0).unwrap(),
            &f,
            &params,
            0,
            0.0,
        )
        .unwrap();
        assert_eq!(residual_norm(&prox), 2.0);
    }
}
