//! Robust low-rank matrix recovery benchmark: seeded instance generation and
//! objective oracles for the symmetric (Φ) and asymmetric (Ψ) models.
//!
//! Measurements are y_i = ⟨A_i, X_t⟩ + s_i with Gaussian sensing matrices
//! A_i, ground truth X_t = U_tU_tᵀ (symmetric) or U_tV_tᵀ (asymmetric), and a
//! sparse outlier vector s: round(o·m) positions chosen uniformly without
//! replacement carry N(0, 100) noise (standard deviation 10), the rest are 0.
//!
//! Layout conventions: all matrices are row-major; a symmetric-model point is
//! U ∈ R^{n1×r} flattened row-by-row, an asymmetric-model point is U's rows
//! followed by V's rows. Instances regenerate bit-exactly from (seed, config)
//! on a given build; the draw order is fixed as A_1 … A_m, then U_t, then V_t
//! (asymmetric only), then outlier positions, then outlier values in draw
//! order.

use ndarray::{Array1, Array2, ArrayBase, ArrayView1, ArrayView2, Data, Ix2};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::oracle::ObjectiveOracle;
use crate::point::Point;
use crate::rng::GaussianSampler;

/// Which recovery model an instance belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// X = UUᵀ, objective Φ(U) = (1/m)‖y − A(UUᵀ)‖₁. Requires n1 = n2.
    Symmetric,
    /// X = UVᵀ, objective Ψ(U,V) = (1/m)‖y − A(UVᵀ)‖₁ + λ‖UᵀU − VᵀV‖_F.
    Asymmetric,
}

/// Model selection plus the outlier ratio and (asymmetric only) the balance
/// weight λ and its driving constant δ.
#[derive(Clone, Copy, Debug)]
pub struct ModelConfig {
    pub model: ModelKind,
    pub outlier_ratio: f64,
    pub lambda_reg: Option<f64>,
    pub delta: Option<f64>,
}

impl ModelConfig {
    /// δ = (1/6.3)·√(2/π).
    pub fn default_delta() -> f64 {
        (2.0 / std::f64::consts::PI).sqrt() / 6.3
    }

    /// λ = [2(1−o)(√(2/π) − δ) − (√(2/π) + δ)]/2.
    pub fn derived_lambda(outlier_ratio: f64, delta: f64) -> f64 {
        let root = (2.0 / std::f64::consts::PI).sqrt();
        (2.0 * (1.0 - outlier_ratio) * (root - delta) - (root + delta)) / 2.0
    }

    pub fn symmetric(outlier_ratio: f64) -> Result<Self> {
        check_ratio(outlier_ratio)?;
        Ok(ModelConfig {
            model: ModelKind::Symmetric,
            outlier_ratio,
            lambda_reg: None,
            delta: None,
        })
    }

    pub fn asymmetric(outlier_ratio: f64) -> Result<Self> {
        Self::asymmetric_with_delta(outlier_ratio, Self::default_delta())
    }

    pub fn asymmetric_with_delta(outlier_ratio: f64, delta: f64) -> Result<Self> {
        check_ratio(outlier_ratio)?;
        if !(delta.is_finite() && delta > 0.0) {
            return Err(CoreError::invalid(format!("delta must be > 0, got {delta}")));
        }
        let lambda = Self::derived_lambda(outlier_ratio, delta);
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(CoreError::invalid(format!(
                "derived lambda = {lambda} is not positive; lower the outlier ratio or delta"
            )));
        }
        Ok(ModelConfig {
            model: ModelKind::Asymmetric,
            outlier_ratio,
            lambda_reg: Some(lambda),
            delta: Some(delta),
        })
    }

    /// Explicit λ override (asymmetric only); must be positive.
    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        if self.model != ModelKind::Asymmetric {
            return Err(CoreError::invalid("lambda_reg only applies to the asymmetric model"));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(CoreError::invalid(format!("lambda_reg must be > 0, got {lambda}")));
        }
        self.lambda_reg = Some(lambda);
        Ok(self)
    }
}

fn check_ratio(o: f64) -> Result<()> {
    if o.is_finite() && (0.0..1.0).contains(&o) {
        Ok(())
    } else {
        Err(CoreError::invalid(format!("outlier ratio must lie in [0,1), got {o}")))
    }
}

/// A fully materialized benchmark instance.
#[derive(Clone, Debug)]
pub struct RecoveryInstance {
    pub model: ModelKind,
    pub n1: usize,
    pub n2: usize,
    pub r: usize,
    /// m = 5·r·max{n1, n2}.
    pub m: usize,
    pub sensing: Vec<Array2<f64>>,
    pub y: Vec<f64>,
    pub outlier_mask: Vec<bool>,
    pub u_truth: Array2<f64>,
    pub v_truth: Option<Array2<f64>>,
    pub seed: u64,
}

impl RecoveryInstance {
    /// Ground-truth matrix X_t rebuilt from the stored factors.
    pub fn truth_matrix(&self) -> Array2<f64> {
        match &self.v_truth {
            None => self.u_truth.dot(&self.u_truth.t()),
            Some(v) => self.u_truth.dot(&v.t()),
        }
    }

    /// The ground-truth factors flattened in oracle point layout.
    pub fn truth_point(&self) -> Point {
        let mut coords: Vec<f64> = self.u_truth.iter().copied().collect();
        if let Some(v) = &self.v_truth {
            coords.extend(v.iter().copied());
        }
        Point::new(coords).expect("ground truth entries are finite")
    }
}

const MAX_INSTANCE_ELEMENTS: usize = 1 << 31;

/// Draws a seeded instance. The RNG is ChaCha8 on stream 0 of `seed`; see the
/// module docs for the fixed draw order, which is part of the format.
pub fn generate_instance(
    cfg: &ModelConfig,
    n1: usize,
    n2: usize,
    r: usize,
    seed: u64,
) -> Result<RecoveryInstance> {
    if n1 == 0 || n2 == 0 || r == 0 {
        return Err(CoreError::invalid("n1, n2, r must all be positive"));
    }
    if cfg.model == ModelKind::Symmetric && n1 != n2 {
        return Err(CoreError::invalid(format!(
            "the symmetric model needs n1 = n2, got {n1} x {n2}"
        )));
    }
    if r > n1.min(n2) {
        return Err(CoreError::invalid(format!(
            "rank {r} exceeds min(n1, n2) = {}",
            n1.min(n2)
        )));
    }
    let m = 5usize
        .checked_mul(r)
        .and_then(|t| t.checked_mul(n1.max(n2)))
        .ok_or_else(|| CoreError::ResourceLimit("instance size overflows".into()))?;
    let elements = m
        .checked_mul(n1)
        .and_then(|t| t.checked_mul(n2))
        .filter(|t| *t <= MAX_INSTANCE_ELEMENTS)
        .ok_or_else(|| {
            CoreError::ResourceLimit(format!(
                "instance needs more than {MAX_INSTANCE_ELEMENTS} sensing entries"
            ))
        })?;
    let _ = elements;

    let mut rng = GaussianSampler::from_seed_stream(seed, 0);
    let sensing: Vec<Array2<f64>> = (0..m)
        .map(|_| Array2::from_shape_fn((n1, n2), |_| rng.standard_normal()))
        .collect();
    let u_truth = Array2::from_shape_fn((n1, r), |_| rng.standard_normal());
    let v_truth = match cfg.model {
        ModelKind::Symmetric => None,
        ModelKind::Asymmetric => Some(Array2::from_shape_fn((n2, r), |_| rng.standard_normal())),
    };

    let outlier_count = (cfg.outlier_ratio * m as f64).round() as usize;
    let positions = rng.choose_without_replacement(m, outlier_count);
    let mut outlier_mask = vec![false; m];
    let mut s = vec![0.0; m];
    for &pos in &positions {
        outlier_mask[pos] = true;
        s[pos] = 10.0 * rng.standard_normal();
    }

    let x_t = match &v_truth {
        None => u_truth.dot(&u_truth.t()),
        Some(v) => u_truth.dot(&v.t()),
    };
    // Measure through the same stacked operator the oracles use, so an
    // outlier-free instance gives the objective the exact value 0 at the
    // ground truth instead of a rounding-order artifact.
    let measured = StackedSensing::from_parts(&sensing, n1 * n2).apply(&x_t);
    let y: Vec<f64> = measured.iter().zip(&s).map(|(mi, si)| mi + si).collect();

    Ok(RecoveryInstance {
        model: cfg.model,
        n1,
        n2,
        r,
        m,
        sensing,
        y,
        outlier_mask,
        u_truth,
        v_truth,
        seed,
    })
}

fn frob_inner<S1, S2>(a: &ArrayBase<S1, Ix2>, b: &ArrayBase<S2, Ix2>) -> f64
where
    S1: Data<Elem = f64>,
    S2: Data<Elem = f64>,
{
    debug_assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn sgn(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// The sensing matrices stacked as rows (m × n1·n2) plus the transpose in
/// its own standard layout, so measurement and adjoint applications are each
/// one contiguous matrix–vector product instead of m small inner products.
struct StackedSensing {
    rows: Array2<f64>,
    cols: Array2<f64>,
}

impl StackedSensing {
    fn new(inst: &RecoveryInstance) -> Self {
        Self::from_parts(&inst.sensing, inst.n1 * inst.n2)
    }

    fn from_parts(sensing: &[Array2<f64>], cells: usize) -> Self {
        let mut rows = Array2::<f64>::zeros((sensing.len(), cells));
        for (mut row, a) in rows.rows_mut().into_iter().zip(sensing) {
            for (dst, src) in row.iter_mut().zip(a.iter()) {
                *dst = *src;
            }
        }
        let cols = rows.t().as_standard_layout().to_owned();
        StackedSensing { rows, cols }
    }

    /// All measurements ⟨A_i, X⟩ at once.
    fn apply(&self, x: &Array2<f64>) -> Array1<f64> {
        // ndarray's rank-1 products (r = 1 factors) come back in non-standard
        // layout, so fall back to a row-major copy when needed.
        match x.as_slice() {
            Some(flat) => {
                let view = ArrayView1::from_shape(self.rows.ncols(), flat)
                    .expect("X has n1·n2 cells");
                self.rows.dot(&view)
            }
            None => {
                let flat: Array1<f64> = x.iter().copied().collect();
                self.rows.dot(&flat)
            }
        }
    }

    /// The adjoint Σ_i w_i·A_i, reshaped to n1 × n2.
    fn adjoint(&self, w: &Array1<f64>, n1: usize, n2: usize) -> Array2<f64> {
        let flat = self.cols.dot(w);
        flat.into_shape_with_order((n1, n2)).expect("adjoint length is n1·n2")
    }
}

/// Φ(U) = (1/m)·Σ_i |y_i − ⟨A_i, UUᵀ⟩| over flattened U.
pub struct PhiOracle<'a> {
    inst: &'a RecoveryInstance,
    stacked: StackedSensing,
}

/// Oracle for the symmetric model; rejects asymmetric instances.
pub fn phi_oracle(inst: &RecoveryInstance) -> Result<PhiOracle<'_>> {
    if inst.model != ModelKind::Symmetric {
        return Err(CoreError::invalid("phi_oracle needs a symmetric-model instance"));
    }
    Ok(PhiOracle { inst, stacked: StackedSensing::new(inst) })
}

impl PhiOracle<'_> {
    fn factor_view<'p>(&self, point: &'p Point) -> ArrayView2<'p, f64> {
        assert_eq!(
            point.dim(),
            self.dimension(),
            "phi oracle got a point of dimension {}, needs {}",
            point.dim(),
            self.dimension()
        );
        ArrayView2::from_shape((self.inst.n1, self.inst.r), point.as_slice())
            .expect("shape verified above")
    }

    fn value_from(&self, measured: &Array1<f64>) -> f64 {
        let acc: f64 =
            measured.iter().zip(&self.inst.y).map(|(mi, yi)| (yi - mi).abs()).sum();
        acc / self.inst.m as f64
    }

    /// Folds the signs into S = Σ s_i·A_i once, then a single (S + Sᵀ)·U.
    fn subgradient_from(&self, measured: &Array1<f64>, u: &ArrayView2<'_, f64>) -> Point {
        let signs =
            Array1::from_iter(measured.iter().zip(&self.inst.y).map(|(mi, yi)| sgn(mi - yi)));
        let s_sum = self.stacked.adjoint(&signs, self.inst.n1, self.inst.n2);
        let m = self.inst.m as f64;
        let g = (&s_sum + &s_sum.t()).dot(u).mapv_into(|t| t / m);
        Point::new(g.iter().copied().collect()).expect("subgradient stayed finite")
    }
}

impl ObjectiveOracle for PhiOracle<'_> {
    fn value_at(&self, point: &Point) -> f64 {
        let u = self.factor_view(point);
        let x = u.dot(&u.t());
        self.value_from(&self.stacked.apply(&x))
    }

    fn subgradient_at(&self, point: &Point) -> Point {
        let u = self.factor_view(point);
        let x = u.dot(&u.t());
        let measured = self.stacked.apply(&x);
        self.subgradient_from(&measured, &u)
    }

    fn value_and_subgradient_at(&self, point: &Point) -> (f64, Point) {
        let u = self.factor_view(point);
        let x = u.dot(&u.t());
        let measured = self.stacked.apply(&x);
        let value = self.value_from(&measured);
        if !value.is_finite() {
            // Overflowed measurements would poison the sign pattern too;
            // per the trait contract the subgradient slot is unspecified.
            return (value, point.clone());
        }
        (value, self.subgradient_from(&measured, &u))
    }

    fn dimension(&self) -> usize {
        self.inst.n1 * self.inst.r
    }

    fn lower_bound_hint(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// Ψ(U,V) = (1/m)·Σ_i |y_i − ⟨A_i, UVᵀ⟩| + λ·‖UᵀU − VᵀV‖_F over stacked
/// flattened (U; V).
pub struct PsiOracle<'a> {
    inst: &'a RecoveryInstance,
    lambda: f64,
    stacked: StackedSensing,
}

/// Oracle for the asymmetric model; takes λ from the config.
pub fn psi_oracle<'a>(inst: &'a RecoveryInstance, cfg: &ModelConfig) -> Result<PsiOracle<'a>> {
    if inst.model != ModelKind::Asymmetric {
        return Err(CoreError::invalid("psi_oracle needs an asymmetric-model instance"));
    }
    let lambda = cfg
        .lambda_reg
        .ok_or_else(|| CoreError::invalid("asymmetric config must carry lambda_reg"))?;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(CoreError::invalid(format!("lambda_reg must be > 0, got {lambda}")));
    }
    Ok(PsiOracle { inst, lambda, stacked: StackedSensing::new(inst) })
}

impl PsiOracle<'_> {
    fn factor_views<'p>(&self, point: &'p Point) -> (ArrayView2<'p, f64>, ArrayView2<'p, f64>) {
        assert_eq!(
            point.dim(),
            self.dimension(),
            "psi oracle got a point of dimension {}, needs {}",
            point.dim(),
            self.dimension()
        );
        let (pu, pv) = point.as_slice().split_at(self.inst.n1 * self.inst.r);
        let u = ArrayView2::from_shape((self.inst.n1, self.inst.r), pu).expect("shape verified");
        let v = ArrayView2::from_shape((self.inst.n2, self.inst.r), pv).expect("shape verified");
        (u, v)
    }

    fn value_from(&self, measured: &Array1<f64>, gap_norm: f64) -> f64 {
        let data: f64 = measured
            .iter()
            .zip(&self.inst.y)
            .map(|(mi, yi)| (yi - mi).abs())
            .sum::<f64>()
            / self.inst.m as f64;
        data + self.lambda * gap_norm
    }

    fn subgradient_from(
        &self,
        measured: &Array1<f64>,
        u: &ArrayView2<'_, f64>,
        v: &ArrayView2<'_, f64>,
        gram_gap: &Array2<f64>,
        gap_norm: f64,
    ) -> Point {
        let signs =
            Array1::from_iter(measured.iter().zip(&self.inst.y).map(|(mi, yi)| sgn(mi - yi)));
        let s_sum = self.stacked.adjoint(&signs, self.inst.n1, self.inst.n2);
        let m = self.inst.m as f64;
        let mut u_block = s_sum.dot(v).mapv_into(|t| t / m);
        let mut v_block = s_sum.t().dot(u).mapv_into(|t| t / m);
        if gap_norm > 0.0 {
            // d‖G‖_F = ⟨G/‖G‖, dG⟩ with G symmetric gives ±2·(factor)·G/‖G‖.
            let scale = 2.0 * self.lambda / gap_norm;
            u_block.scaled_add(scale, &u.dot(gram_gap));
            v_block.scaled_add(-scale, &v.dot(gram_gap));
        }
        let coords: Vec<f64> = u_block.iter().chain(v_block.iter()).copied().collect();
        Point::new(coords).expect("subgradient stayed finite")
    }
}

impl ObjectiveOracle for PsiOracle<'_> {
    fn value_at(&self, point: &Point) -> f64 {
        let (u, v) = self.factor_views(point);
        let x = u.dot(&v.t());
        let measured = self.stacked.apply(&x);
        let gram_gap = u.t().dot(&u) - v.t().dot(&v);
        self.value_from(&measured, frob_inner(&gram_gap, &gram_gap).sqrt())
    }

    fn subgradient_at(&self, point: &Point) -> Point {
        let (u, v) = self.factor_views(point);
        let x = u.dot(&v.t());
        let measured = self.stacked.apply(&x);
        let gram_gap = u.t().dot(&u) - v.t().dot(&v);
        let gap_norm = frob_inner(&gram_gap, &gram_gap).sqrt();
        self.subgradient_from(&measured, &u, &v, &gram_gap, gap_norm)
    }

    fn value_and_subgradient_at(&self, point: &Point) -> (f64, Point) {
        let (u, v) = self.factor_views(point);
        let x = u.dot(&v.t());
        let measured = self.stacked.apply(&x);
        let gram_gap = u.t().dot(&u) - v.t().dot(&v);
        let gap_norm = frob_inner(&gram_gap, &gram_gap).sqrt();
        let value = self.value_from(&measured, gap_norm);
        if !value.is_finite() {
            // Overflowed measurements would poison the sign pattern too;
            // per the trait contract the subgradient slot is unspecified.
            return (value, point.clone());
        }
        (value, self.subgradient_from(&measured, &u, &v, &gram_gap, gap_norm))
    }

    fn dimension(&self) -> usize {
        (self.inst.n1 + self.inst.n2) * self.inst.r
    }

    fn lower_bound_hint(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// Relative recovery error ‖X̂ − X_t‖_F / ‖X_t‖_F, with X̂ rebuilt from the
/// flattened factors per the instance's model.
pub fn recovery_error(point: &Point, inst: &RecoveryInstance) -> Result<f64> {
    let x_hat = match inst.model {
        ModelKind::Symmetric => {
            let expected = inst.n1 * inst.r;
            if point.dim() != expected {
                return Err(CoreError::dim(expected, point.dim()));
            }
            let u = ArrayView2::from_shape((inst.n1, inst.r), point.as_slice())
                .expect("shape verified");
            u.dot(&u.t())
        }
        ModelKind::Asymmetric => {
            let expected = (inst.n1 + inst.n2) * inst.r;
            if point.dim() != expected {
                return Err(CoreError::dim(expected, point.dim()));
            }
            let (pu, pv) = point.as_slice().split_at(inst.n1 * inst.r);
            let u = ArrayView2::from_shape((inst.n1, inst.r), pu).expect("shape verified");
            let v = ArrayView2::from_shape((inst.n2, inst.r), pv).expect("shape verified");
            u.dot(&v.t())
        }
    };
    let x_t = inst.truth_matrix();
    let denom = frob_inner(&x_t, &x_t).sqrt();
    if denom == 0.0 {
        return Err(CoreError::invalid("ground-truth matrix is zero"));
    }
    let diff = &x_hat - &x_t;
    Ok(frob_inner(&diff, &diff).sqrt() / denom)
}

/// Self-describing, regenerable instance description: seed plus config, not
/// raw matrices. `materialize` redraws the instance deterministically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub format_version: u32,
    pub model: ModelKind,
    pub n1: usize,
    pub n2: usize,
    pub r: usize,
    pub seed: u64,
    pub outlier_ratio: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_reg: Option<f64>,
}

impl InstanceSpec {
    pub const FORMAT_VERSION: u32 = 1;

    pub fn new(model: ModelKind, n1: usize, n2: usize, r: usize, seed: u64, outlier_ratio: f64) -> Self {
        InstanceSpec {
            format_version: Self::FORMAT_VERSION,
            model,
            n1,
            n2,
            r,
            seed,
            outlier_ratio,
            delta: None,
            lambda_reg: None,
        }
    }

    /// The model config this spec describes, with explicit δ/λ overrides
    /// honored; δ/λ on a symmetric spec is an error.
    pub fn model_config(&self) -> Result<ModelConfig> {
        match self.model {
            ModelKind::Symmetric => {
                if self.delta.is_some() || self.lambda_reg.is_some() {
                    return Err(CoreError::invalid(
                        "delta/lambda_reg only apply to the asymmetric model",
                    ));
                }
                ModelConfig::symmetric(self.outlier_ratio)
            }
            ModelKind::Asymmetric => {
                let cfg = match self.delta {
                    Some(d) => ModelConfig::asymmetric_with_delta(self.outlier_ratio, d)?,
                    None => ModelConfig::asymmetric(self.outlier_ratio)?,
                };
                match self.lambda_reg {
                    Some(l) => cfg.with_lambda(l),
                    None => Ok(cfg),
                }
            }
        }
    }

    pub fn materialize(&self) -> Result<(ModelConfig, RecoveryInstance)> {
        if self.format_version != Self::FORMAT_VERSION {
            return Err(CoreError::invalid(format!(
                "unsupported instance format version {} (this build reads {})",
                self.format_version,
                Self::FORMAT_VERSION
            )));
        }
        let cfg = self.model_config()?;
        let inst = generate_instance(&cfg, self.n1, self.n2, self.r, self.seed)?;
        Ok((cfg, inst))
    }
}
