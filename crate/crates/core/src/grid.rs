//! Exhaustive grid oracle for the prox subproblem in one or two dimensions.
//!
//! This is the independent reference the rest of the crate is validated
//! against: it evaluates the subproblem objective at every node of a regular
//! grid and reports the minimum together with an explicit discretization
//! slack, so every downstream assertion can state the tolerance it was
//! checked at. Nothing here is fast; it exists to be obviously correct.

use crate::envelope::{pow_abs, EnvelopeParams};
use crate::error::{CoreError, Result};
use crate::oracle::ObjectiveOracle;
use crate::point::Point;

/// Hard cap on grid nodes; beyond this the request is refused.
const MAX_GRID_NODES: usize = 10_000_000;

/// A regular grid over an axis-aligned box in R^1 or R^2. All axes share the
/// same node count.
#[derive(Clone, Debug)]
pub struct GridSpec {
    lower: Point,
    upper: Point,
    points_per_axis: usize,
}

impl GridSpec {
    pub fn new(lower: Point, upper: Point, points_per_axis: usize) -> Result<Self> {
        let dim = lower.dim();
        if dim != upper.dim() {
            return Err(CoreError::dim(dim, upper.dim()));
        }
        if dim > 2 {
            return Err(CoreError::invalid(format!(
                "brute-force grids support dimension 1 or 2, got {dim}"
            )));
        }
        for a in 0..dim {
            if lower.coord(a) >= upper.coord(a) {
                return Err(CoreError::invalid(format!(
                    "grid axis {a} is empty: lower {} >= upper {}",
                    lower.coord(a),
                    upper.coord(a)
                )));
            }
        }
        if points_per_axis < 2 {
            return Err(CoreError::invalid("a grid needs at least 2 points per axis"));
        }
        let total = points_per_axis.checked_pow(dim as u32);
        if total.is_none_or(|t| t > MAX_GRID_NODES) {
            return Err(CoreError::ResourceLimit(format!(
                "{points_per_axis}^{dim} grid nodes exceed the {MAX_GRID_NODES} cap"
            )));
        }
        Ok(GridSpec { lower, upper, points_per_axis })
    }

    /// Symmetric 1D helper: `points` nodes over `[lo, hi]`.
    pub fn line(lo: f64, hi: f64, points: usize) -> Result<Self> {
        GridSpec::new(Point::scalar(lo)?, Point::scalar(hi)?, points)
    }

    pub fn dim(&self) -> usize {
        self.lower.dim()
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn total_nodes(&self) -> usize {
        self.points_per_axis.pow(self.dim() as u32)
    }

    /// Node spacing along `axis`.
    pub fn step(&self, axis: usize) -> f64 {
        (self.upper.coord(axis) - self.lower.coord(axis)) / (self.points_per_axis - 1) as f64
    }

    /// Length of one grid cell's diagonal — the natural resolution unit.
    pub fn cell_diagonal(&self) -> f64 {
        (0..self.dim()).map(|a| self.step(a).powi(2)).sum::<f64>().sqrt()
    }

    /// The largest distance from `x` to any box corner; bounds the penalty
    /// gradient over the box.
    fn max_corner_distance(&self, x: &Point) -> f64 {
        let mut d2 = 0.0;
        for a in 0..self.dim() {
            let lo = (x.coord(a) - self.lower.coord(a)).abs();
            let hi = (x.coord(a) - self.upper.coord(a)).abs();
            d2 += lo.max(hi).powi(2);
        }
        d2.sqrt()
    }

    fn node_coords(&self, idx: [usize; 2]) -> Vec<f64> {
        (0..self.dim())
            .map(|a| self.lower.coord(a) + idx[a] as f64 * self.step(a))
            .collect()
    }

    /// Grid node as a point.
    pub fn node(&self, idx: [usize; 2]) -> Point {
        Point::new(self.node_coords(idx)).expect("grid nodes are finite by construction")
    }

    /// All nodes in linear (row-major) order.
    pub fn nodes(&self) -> Vec<Point> {
        (0..self.total_nodes()).map(|lin| self.node(self.unravel(lin))).collect()
    }

    fn unravel(&self, lin: usize) -> [usize; 2] {
        if self.dim() == 1 {
            [lin, 0]
        } else {
            [lin / self.points_per_axis, lin % self.points_per_axis]
        }
    }
}

/// Evaluates `f` at every node, checking finiteness.
fn objective_table(f: &dyn ObjectiveOracle, grid: &GridSpec) -> Result<Vec<f64>> {
    if f.dimension() != grid.dim() {
        return Err(CoreError::dim(grid.dim(), f.dimension()));
    }
    let mut values = Vec::with_capacity(grid.total_nodes());
    for lin in 0..grid.total_nodes() {
        let node = grid.node(grid.unravel(lin));
        let v = f.value_at(&node);
        if !v.is_finite() {
            return Err(CoreError::OracleFailure { what: "value", at_norm: node.norm() });
        }
        values.push(v);
    }
    Ok(values)
}

/// Max |Δvalue|/step over axis-adjacent node pairs: a discrete Lipschitz
/// estimate of the tabulated function.
fn lipschitz_estimate(values: &[f64], grid: &GridSpec) -> f64 {
    let n = grid.points_per_axis;
    let mut worst: f64 = 0.0;
    match grid.dim() {
        1 => {
            let h = grid.step(0);
            for i in 1..n {
                worst = worst.max((values[i] - values[i - 1]).abs() / h);
            }
        }
        _ => {
            let h0 = grid.step(0);
            let h1 = grid.step(1);
            for i in 0..n {
                for j in 0..n {
                    let v = values[i * n + j];
                    if i + 1 < n {
                        worst = worst.max((values[(i + 1) * n + j] - v).abs() / h0);
                    }
                    if j + 1 < n {
                        worst = worst.max((values[i * n + j + 1] - v).abs() / h1);
                    }
                }
            }
        }
    }
    worst
}

fn distance(a: &[f64], b: &Point) -> f64 {
    a.iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Result of an exhaustive prox solve: every grid node whose subproblem value
/// lies within `slack` of the grid minimum, plus the audit quantities.
#[derive(Clone, Debug)]
pub struct GridMinimizers {
    /// Near-minimizing nodes, in grid order.
    pub minimizers: Vec<Point>,
    /// Subproblem values of `minimizers` (same order).
    pub minimizer_values: Vec<f64>,
    /// Grid indices of `minimizers` (axis 1 index is 0 for 1D grids).
    pub indices: Vec<[usize; 2]>,
    /// The grid minimum of the subproblem — an upper estimate of the true
    /// envelope value, accurate to `slack`.
    pub value: f64,
    /// Lipschitz-estimate × cell-diagonal: the objective-value resolution of
    /// this grid, reported so assertions can state their tolerance.
    pub slack: f64,
    pub lipschitz_estimate: f64,
    pub cell_diagonal: f64,
    axis_steps: [f64; 2],
}

impl GridMinimizers {
    /// Groups the near-minimizers into connected clusters (index adjacency,
    /// diagonal neighbors included) and returns the best node of each.
    pub fn cluster_representatives(&self) -> Vec<Point> {
        if self.minimizers.is_empty() {
            return Vec::new();
        }
        let positions: std::collections::HashMap<[usize; 2], usize> = self
            .indices
            .iter()
            .enumerate()
            .map(|(slot, idx)| (*idx, slot))
            .collect();
        let mut cluster_of = vec![usize::MAX; self.indices.len()];
        let mut reps = Vec::new();
        for start in 0..self.indices.len() {
            if cluster_of[start] != usize::MAX {
                continue;
            }
            let cluster = reps.len();
            let mut best = start;
            let mut queue = vec![start];
            cluster_of[start] = cluster;
            while let Some(slot) = queue.pop() {
                if self.minimizer_values[slot] < self.minimizer_values[best] {
                    best = slot;
                }
                let [i, j] = self.indices[slot];
                for di in -1i64..=1 {
                    for dj in -1i64..=1 {
                        let ni = i as i64 + di;
                        let nj = j as i64 + dj;
                        if ni < 0 || nj < 0 {
                            continue;
                        }
                        if let Some(&other) = positions.get(&[ni as usize, nj as usize]) {
                            if cluster_of[other] == usize::MAX {
                                cluster_of[other] = cluster;
                                queue.push(other);
                            }
                        }
                    }
                }
            }
            reps.push(self.minimizers[best].clone());
        }
        reps
    }

    /// Whether the minimizer set resolves into representatives farther apart
    /// than 3 grid cells — the working definition of a multivalued prox at
    /// this resolution.
    pub fn is_multivalued(&self) -> bool {
        let reps = self.cluster_representatives();
        let threshold = 3.0 * self.cell_diagonal;
        for (i, a) in reps.iter().enumerate() {
            for b in reps.iter().skip(i + 1) {
                if a.sub(b).map(|d| d.norm()).unwrap_or(0.0) > threshold {
                    return true;
                }
            }
        }
        false
    }

    /// Node spacing along `axis`, for callers converting cell counts to
    /// coordinate tolerances.
    pub fn axis_step(&self, axis: usize) -> f64 {
        self.axis_steps[axis]
    }
}

/// Exhaustively minimizes the prox subproblem of `f` anchored at `x` over
/// `grid`, returning all nodes within one grid-cell objective slack of the
/// minimum.
pub fn brute_force_prox(
    x: &Point,
    f: &dyn ObjectiveOracle,
    params: &EnvelopeParams,
    grid: &GridSpec,
) -> Result<GridMinimizers> {
    if x.dim() != grid.dim() {
        return Err(CoreError::dim(grid.dim(), x.dim()));
    }
    let fvals = objective_table(f, grid)?;
    let mut subvals = Vec::with_capacity(fvals.len());
    let mut min_value = f64::INFINITY;
    for (lin, fv) in fvals.iter().enumerate() {
        let node = grid.node_coords(grid.unravel(lin));
        let v = fv + params.penalty(distance(&node, x));
        min_value = min_value.min(v);
        subvals.push(v);
    }
    let lipschitz = lipschitz_estimate(&subvals, grid);
    let cell_diagonal = grid.cell_diagonal();
    let slack = lipschitz * cell_diagonal;

    let mut minimizers = Vec::new();
    let mut minimizer_values = Vec::new();
    let mut indices = Vec::new();
    for (lin, v) in subvals.iter().enumerate() {
        if *v <= min_value + slack {
            let idx = grid.unravel(lin);
            minimizers.push(grid.node(idx));
            minimizer_values.push(*v);
            indices.push(idx);
        }
    }
    Ok(GridMinimizers {
        minimizers,
        minimizer_values,
        indices,
        value: min_value,
        slack,
        lipschitz_estimate: lipschitz,
        cell_diagonal,
        axis_steps: [grid.step(0), if grid.dim() == 2 { grid.step(1) } else { 0.0 }],
    })
}

/// Envelope estimates at many anchors sharing one objective table.
///
/// `values[i]` is the grid minimum of the subproblem anchored at
/// `anchors[i]`; each is an upper estimate of the true envelope accurate to
/// `slack`. Much cheaper than calling [`brute_force_prox`] per anchor when
/// profiling the envelope along a whole axis.
#[derive(Clone, Debug)]
pub struct EnvelopeProfile {
    pub values: Vec<f64>,
    /// Conservative objective-value resolution, uniform over all anchors:
    /// (objective Lipschitz estimate + worst-case penalty slope) × cell
    /// diagonal.
    pub slack: f64,
}

pub fn brute_force_envelope_profile(
    anchors: &[Point],
    f: &dyn ObjectiveOracle,
    params: &EnvelopeParams,
    grid: &GridSpec,
) -> Result<EnvelopeProfile> {
    for a in anchors {
        if a.dim() != grid.dim() {
            return Err(CoreError::dim(grid.dim(), a.dim()));
        }
    }
    let fvals = objective_table(f, grid)?;
    let nodes: Vec<Vec<f64>> = (0..grid.total_nodes())
        .map(|lin| grid.node_coords(grid.unravel(lin)))
        .collect();

    let mut values = Vec::with_capacity(anchors.len());
    let mut max_reach: f64 = 0.0;
    for anchor in anchors {
        max_reach = max_reach.max(grid.max_corner_distance(anchor));
        let mut best = f64::INFINITY;
        for (node, fv) in nodes.iter().zip(&fvals) {
            let v = fv + params.penalty(distance(node, anchor));
            if v < best {
                best = v;
            }
        }
        values.push(best);
    }
    // Subproblem slope ≤ objective slope + penalty slope; the penalty slope
    // over the box is at most (1/γ)·D^{p−1} with D the farthest corner.
    let penalty_slope = pow_abs(max_reach, params.p() - 1.0) / params.gamma();
    let slack = (lipschitz_estimate(&fvals, grid) + penalty_slope) * grid.cell_diagonal();
    Ok(EnvelopeProfile { values, slack })
}

/// Single-anchor envelope estimate; `(value, slack)` as in the profile.
pub fn brute_force_envelope(
    x: &Point,
    f: &dyn ObjectiveOracle,
    params: &EnvelopeParams,
    grid: &GridSpec,
) -> Result<(f64, f64)> {
    let profile = brute_force_envelope_profile(std::slice::from_ref(x), f, params, grid)?;
    Ok((profile.values[0], profile.slack))
}

/// Discrete Lipschitz estimate of the bare objective over the grid
/// (max |Δvalue|/step across axis-adjacent nodes).
pub fn objective_lipschitz(f: &dyn ObjectiveOracle, grid: &GridSpec) -> Result<f64> {
    let fvals = objective_table(f, grid)?;
    Ok(lipschitz_estimate(&fvals, grid))
}

/// Grid minimum of the bare objective (no penalty): `(argmin node, value)`.
pub fn grid_min_objective(f: &dyn ObjectiveOracle, grid: &GridSpec) -> Result<(Point, f64)> {
    let fvals = objective_table(f, grid)?;
    let (lin, value) = fvals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("grids are non-empty");
    Ok((grid.node(grid.unravel(lin)), *value))
}
