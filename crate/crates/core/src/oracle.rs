//! First-order oracle interface for the objectives being smoothed.
//!
//! The solvers only ever see an [`ObjectiveOracle`]: a function value, one
//! subgradient selection, the ambient dimension, and an optional lower bound
//! (used by Polyak steps and by the iteration-bound certificate). Objectives
//! are expected to be proper, lower semicontinuous, and bounded below on the
//! region the solvers visit.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::point::Point;

/// A nonsmooth objective exposed through value and subgradient queries.
///
/// Implementations must be deterministic: the solvers' reproducibility
/// contract is only as strong as the oracle's.
pub trait ObjectiveOracle: Sync {
    /// f(x). Must be finite on points the caller feeds in; callers check.
    fn value_at(&self, x: &Point) -> f64;

    /// One element of ∂f(x), same dimension as `x`.
    fn subgradient_at(&self, x: &Point) -> Point;

    /// f(x) and a subgradient in one query. When the value is finite the pair
    /// is bit-identical to the individual calls; when it is not, the
    /// subgradient slot holds an unspecified valid point (a diverging iterate
    /// may overflow the subgradient too, so it is never computed there) and
    /// callers must check the value before using the subgradient. Oracles
    /// whose value and subgradient share intermediate work (such as a common
    /// measurement pass) override this to do it once.
    fn value_and_subgradient_at(&self, x: &Point) -> (f64, Point) {
        let value = self.value_at(x);
        if !value.is_finite() {
            return (value, x.clone());
        }
        (value, self.subgradient_at(x))
    }

    /// Ambient dimension n.
    fn dimension(&self) -> usize;

    /// A finite lower bound on inf f, when one is known (0 for ℓ1 losses).
    fn lower_bound_hint(&self) -> Option<f64> {
        None
    }
}

impl<T: ObjectiveOracle + ?Sized> ObjectiveOracle for &T {
    fn value_at(&self, x: &Point) -> f64 {
        (**self).value_at(x)
    }
    fn subgradient_at(&self, x: &Point) -> Point {
        (**self).subgradient_at(x)
    }
    fn value_and_subgradient_at(&self, x: &Point) -> (f64, Point) {
        (**self).value_and_subgradient_at(x)
    }
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn lower_bound_hint(&self) -> Option<f64> {
        (**self).lower_bound_hint()
    }
}

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type SubgradFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// Closure-backed oracle, the workhorse for test functions and 1D examples.
pub struct FnOracle {
    dim: usize,
    value: Box<ValueFn>,
    subgrad: Box<SubgradFn>,
    lower_bound: Option<f64>,
}

impl FnOracle {
    pub fn new(
        dim: usize,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        subgrad: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        FnOracle {
            dim,
            value: Box::new(value),
            subgrad: Box::new(subgrad),
            lower_bound: None,
        }
    }

    pub fn with_lower_bound(mut self, bound: f64) -> Self {
        self.lower_bound = Some(bound);
        self
    }
}

impl ObjectiveOracle for FnOracle {
    fn value_at(&self, x: &Point) -> f64 {
        (self.value)(x.as_slice())
    }

    fn subgradient_at(&self, x: &Point) -> Point {
        let g = (self.subgrad)(x.as_slice());
        debug_assert_eq!(g.len(), self.dim, "subgradient dimension drifted");
        Point::new(g).expect("subgradient closures must return finite vectors")
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn lower_bound_hint(&self) -> Option<f64> {
        self.lower_bound
    }
}

/// Transparent wrapper that counts oracle queries.
///
/// Subgradient calls are the unit of "inner work" used to hand every method
/// the same budget in comparisons; value calls are tracked separately for
/// diagnostics.
pub struct CountingOracle<'a> {
    inner: &'a dyn ObjectiveOracle,
    value_calls: AtomicU64,
    subgradient_calls: AtomicU64,
}

impl<'a> CountingOracle<'a> {
    pub fn new(inner: &'a dyn ObjectiveOracle) -> Self {
        CountingOracle {
            inner,
            value_calls: AtomicU64::new(0),
            subgradient_calls: AtomicU64::new(0),
        }
    }

    pub fn value_calls(&self) -> u64 {
        self.value_calls.load(Ordering::Relaxed)
    }

    pub fn subgradient_calls(&self) -> u64 {
        self.subgradient_calls.load(Ordering::Relaxed)
    }
}

impl ObjectiveOracle for CountingOracle<'_> {
    fn value_at(&self, x: &Point) -> f64 {
        self.value_calls.fetch_add(1, Ordering::Relaxed);
        self.inner.value_at(x)
    }

    fn subgradient_at(&self, x: &Point) -> Point {
        self.subgradient_calls.fetch_add(1, Ordering::Relaxed);
        self.inner.subgradient_at(x)
    }

    fn value_and_subgradient_at(&self, x: &Point) -> (f64, Point) {
        self.value_calls.fetch_add(1, Ordering::Relaxed);
        self.subgradient_calls.fetch_add(1, Ordering::Relaxed);
        self.inner.value_and_subgradient_at(x)
    }

    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn lower_bound_hint(&self) -> Option<f64> {
        self.inner.lower_bound_hint()
    }
}
