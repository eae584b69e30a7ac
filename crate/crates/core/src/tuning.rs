//! Penalty selection by expected false positive rate.
//!
//! Null coefficients of the dense ADMM iterates are treated as Gaussian with
//! a scale estimated robustly from all coefficients. The penalties are then
//! `λ₁ = Z(α₁) σ₁` and `λ₂ = Z(α₂') σ₂`, recomputed every iteration, where
//! `α₂'` is chosen by Monte Carlo so that the expected share of
//! differential calls among nonzero null pairs equals `α₂`.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::admm::{solve, AdmmConfig, JointEstimate, PenaltyRule};
use crate::error::{Error, Result};
use crate::stats::{median_in_place, normal_upper_quantile, quantile_sorted, student_t_upper_quantile};
use crate::weights::WeightMatrix;

/// Below this dimension, critical values come from Student's t.
pub const STUDENT_T_BELOW_P: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RobustScaleMethod {
    Mad,
    Iqr,
    #[default]
    Rcmad,
}

impl RobustScaleMethod {
    /// Consistency constant for the normal distribution.
    pub fn constant(self) -> f64 {
        match self {
            RobustScaleMethod::Mad => 1.4826,
            RobustScaleMethod::Iqr => 1.0 / 1.349,
            RobustScaleMethod::Rcmad => 1.1926,
        }
    }
}

impl std::str::FromStr for RobustScaleMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mad" => Ok(Self::Mad),
            "iqr" => Ok(Self::Iqr),
            "rcmad" => Ok(Self::Rcmad),
            other => Err(Error::InvalidConfig(format!("unknown scale_method '{other}' (expected mad, iqr or rcmad)"))),
        }
    }
}

/// `k`-th smallest (0-based) element of the union of two ascending
/// sequences of lengths `na` and `nb`, accessed by index.
fn kth_of_two_sorted(na: usize, a: impl Fn(usize) -> f64, nb: usize, b: impl Fn(usize) -> f64, k: usize) -> f64 {
    debug_assert!(k < na + nb);
    // Smallest count `i` taken from `a` such that a[i] >= b[k - i - 1].
    let mut lo = k.saturating_sub(nb);
    let mut hi = k.min(na);
    while lo < hi {
        let i = (lo + hi) / 2;
        if a(i) < b(k - i - 1) {
            lo = i + 1;
        } else {
            hi = i;
        }
    }
    let j = k - lo;
    let from_a = if lo < na { a(lo) } else { f64::INFINITY };
    let from_b = if j < nb { b(j) } else { f64::INFINITY };
    from_a.min(from_b)
}

/// `median_i median_j |x_i - x_j|` over all `i, j` (including `j = i`),
/// computed exactly in `O(m log m)` from the sorted sample.
pub fn rc_pairwise_median(values: &[f64]) -> f64 {
    let mut x = values.to_vec();
    x.sort_by(f64::total_cmp);
    let m = x.len();
    if m == 0 {
        return f64::NAN;
    }
    let mut inner = Vec::with_capacity(m);
    for i in 0..m {
        let xi = x[i];
        // {0} ∪ left distances ∪ right distances, each run ascending
        let kth = |k: usize| -> f64 {
            if k == 0 {
                return 0.0;
            }
            kth_of_two_sorted(i, |t| xi - x[i - 1 - t], m - 1 - i, |t| x[i + 1 + t] - xi, k - 1)
        };
        let med = if m % 2 == 1 { kth(m / 2) } else { 0.5 * (kth(m / 2 - 1) + kth(m / 2)) };
        inner.push(med);
    }
    median_in_place(&mut inner)
}

/// Robust standard deviation estimate.
pub fn robust_scale(values: &[f64], method: RobustScaleMethod) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::EmptyInput);
    }
    let raw = match method {
        RobustScaleMethod::Mad => {
            let mut v = values.to_vec();
            let med = median_in_place(&mut v);
            let mut dev: Vec<f64> = values.iter().map(|x| (x - med).abs()).collect();
            median_in_place(&mut dev)
        }
        RobustScaleMethod::Iqr => {
            let mut v = values.to_vec();
            v.sort_by(f64::total_cmp);
            quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25)
        }
        RobustScaleMethod::Rcmad => rc_pairwise_median(values),
    };
    Ok(method.constant() * raw)
}

/// Two-sided critical value `Z(α) = z(α/2)`; Student's t with
/// `p(p-1)/2 - 1` degrees of freedom when `p` is small.
pub fn critical_value(alpha: f64, p: Option<usize>) -> f64 {
    match p {
        Some(p) if p < STUDENT_T_BELOW_P && p * (p.saturating_sub(1)) / 2 > 1 => {
            let df = (p * (p - 1) / 2 - 1) as f64;
            student_t_upper_quantile(alpha / 2.0, df)
        }
        _ => normal_upper_quantile(alpha / 2.0),
    }
}

/// Penalty thresholds `(Z(α₁) σ₁, Z(α₂') σ₂)` with normal critical values.
pub fn lambdas_from_alpha(sigma1: f64, sigma2: f64, alpha1: f64, alpha2_prime: f64) -> (f64, f64) {
    (critical_value(alpha1, None) * sigma1, critical_value(alpha2_prime, None) * sigma2)
}

/// Pooled off-diagonal coefficients of both matrices (length `p(p-1)`).
pub fn joint_coefficients(a_x: &DMatrix<f64>, a_y: &DMatrix<f64>) -> Vec<f64> {
    let p = a_x.nrows();
    let mut out = Vec::with_capacity(p * p.saturating_sub(1));
    for m in [a_x, a_y] {
        for j in 0..p {
            for i in 0..j {
                out.push(m[(i, j)]);
            }
        }
    }
    out
}

/// Weighted differences `v_ij (a_Y - a_X)` over `i < j` (length `p(p-1)/2`).
pub fn weighted_differences(a_x: &DMatrix<f64>, a_y: &DMatrix<f64>, v: &WeightMatrix) -> Vec<f64> {
    let p = a_x.nrows();
    let mut out = Vec::with_capacity(p * p.saturating_sub(1) / 2);
    for j in 0..p {
        for i in 0..j {
            out.push(v.get(i, j) * (a_y[(i, j)] - a_x[(i, j)]));
        }
    }
    out
}

/// `(σ₁, σ₂)` from the joint coefficients and the weighted differences.
pub fn iteration_scales(
    a_x: &DMatrix<f64>,
    a_y: &DMatrix<f64>,
    v: &WeightMatrix,
    method: RobustScaleMethod,
) -> Result<(f64, f64)> {
    if a_x.shape() != a_y.shape() || v.dim() != a_x.nrows() {
        return Err(Error::DimensionMismatch("scale inputs must share one shape".into()));
    }
    let s1 = robust_scale(&joint_coefficients(a_x, a_y), method)?;
    let s2 = robust_scale(&weighted_differences(a_x, a_y, v), method)?;
    Ok((s1, s2))
}

/// Monte Carlo sample of `(z₁, z₂)` used for the `α₂'` map.
#[derive(Debug, Clone)]
pub struct Alpha2Map {
    alpha1: f64,
    /// `|z₁ - z₂|`, `max(|z₁|, |z₂|)`, `|z₁ + z₂| / 2`.
    samples: Vec<(f64, f64, f64)>,
}

/// Components of the `α₂` map at one `α₂'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alpha2Terms {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub alpha2: f64,
}

impl Alpha2Map {
    pub fn new(alpha1: f64, mc_samples: usize, mc_seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(mc_seed);
        let samples = (0..mc_samples)
            .map(|_| {
                let z1: f64 = StandardNormal.sample(&mut rng);
                let z2: f64 = StandardNormal.sample(&mut rng);
                ((z1 - z2).abs(), z1.abs().max(z2.abs()), (z1 + z2).abs() / 2.0)
            })
            .collect();
        Self { alpha1, samples }
    }

    /// Evaluates `p₁`, `p₂`, `p₃` at similarity critical value `c = Z(α₂')`.
    pub fn terms_at_critical(&self, c: f64) -> Alpha2Terms {
        let z1 = critical_value(self.alpha1, None);
        let cut_diff = c / 2.0 + z1 / std::f64::consts::SQRT_2;
        let cut_fused = z1 / std::f64::consts::SQRT_2;
        let (mut n_diff, mut n_diff_nonzero, mut n_fused, mut n_fused_nonzero) = (0usize, 0usize, 0usize, 0usize);
        for &(d, mx, s) in &self.samples {
            if d > c {
                n_diff += 1;
                if mx > cut_diff {
                    n_diff_nonzero += 1;
                }
            } else if d < c {
                n_fused += 1;
                if s > cut_fused {
                    n_fused_nonzero += 1;
                }
            }
        }
        let total = self.samples.len() as f64;
        let p3 = n_diff as f64 / total;
        let p1 = if n_diff > 0 { n_diff_nonzero as f64 / n_diff as f64 } else { 0.0 };
        let p2 = if n_fused > 0 { n_fused_nonzero as f64 / n_fused as f64 } else { 0.0 };
        let num = p1 * p3;
        let den = num + p2 * (1.0 - p3);
        let alpha2 = if den > 0.0 { num / den } else { 0.0 };
        Alpha2Terms { p1, p2, p3, alpha2 }
    }

    pub fn terms(&self, alpha2_prime: f64) -> Alpha2Terms {
        self.terms_at_critical(critical_value(alpha2_prime, None))
    }

    /// Solves `m(α₂') = α₂` by bisection over `α₂' ∈ (1e-6, 0.5)`.
    pub fn solve(&self, alpha2: f64) -> Result<f64> {
        let (mut lo, mut hi) = (1e-6, 0.5);
        let m_lo = self.terms(lo).alpha2;
        let m_hi = self.terms(hi).alpha2;
        if !(alpha2 >= m_lo && alpha2 <= m_hi) {
            return Err(Error::NoRoot { target: alpha2, low: m_lo, high: m_hi });
        }
        // Bisection on log scale: α₂' spans several decades.
        for _ in 0..60 {
            let mid = (lo * hi).sqrt();
            if self.terms(mid).alpha2 < alpha2 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((lo * hi).sqrt())
    }
}

/// Resolves `α₂'` for the targets `(α₁, α₂)`.
pub fn alpha2_prime(alpha1: f64, alpha2: f64, mc_samples: usize, mc_seed: u64) -> Result<f64> {
    if !(alpha1 > 0.0 && alpha1 < 1.0) || !(alpha2 > 0.0 && alpha2 < 1.0) {
        return Err(Error::InvalidConfig("alpha1 and alpha2 must lie in (0, 1)".into()));
    }
    if mc_samples < 10_000 {
        return Err(Error::InvalidConfig("mc_samples must be >= 10000".into()));
    }
    Alpha2Map::new(alpha1, mc_samples, mc_seed).solve(alpha2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuningConfig {
    pub alpha1: f64,
    pub alpha2: f64,
    pub scale_method: RobustScaleMethod,
    pub mc_samples: usize,
    pub mc_seed: u64,
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self { alpha1: 0.05, alpha2: 0.05, scale_method: RobustScaleMethod::Rcmad, mc_samples: 100_000, mc_seed: 1 }
    }
}

impl TuningConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, a) in [("alpha1", self.alpha1), ("alpha2", self.alpha2)] {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::InvalidConfig(format!("{name} must lie in (0, 1), got {a}")));
            }
        }
        if self.mc_samples < 10_000 {
            return Err(Error::InvalidConfig("mc_samples must be >= 10000".into()));
        }
        Ok(())
    }
}

/// Scales and penalties of one ADMM iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationPenalty {
    pub sigma1: f64,
    pub sigma2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha2_prime: f64,
    pub scale_method: RobustScaleMethod,
    pub mc_samples: usize,
    pub mc_seed: u64,
    pub trajectory: Vec<IterationPenalty>,
}

impl TuningResult {
    pub fn final_lambdas(&self) -> (f64, f64) {
        self.trajectory.last().map(|t| (t.lambda1, t.lambda2)).unwrap_or((0.0, 0.0))
    }
}

/// Adaptive penalty rule: `σ₂` from the weighted differences of the dense
/// iterates entering the fusion step, `σ₁` from the pooled fused
/// coefficients entering the sparsity step.
#[derive(Debug, Clone)]
pub struct EfprRule {
    z1: f64,
    z2: f64,
    rho: f64,
    method: RobustScaleMethod,
    pending: IterationPenalty,
    pub trajectory: Vec<IterationPenalty>,
}

impl EfprRule {
    pub fn new(alpha1: f64, alpha2_prime: f64, p: usize, rho: f64, method: RobustScaleMethod) -> Self {
        Self {
            z1: critical_value(alpha1, Some(p)),
            z2: critical_value(alpha2_prime, Some(p)),
            rho,
            method,
            pending: IterationPenalty { sigma1: 0.0, sigma2: 0.0, lambda1: 0.0, lambda2: 0.0 },
            trajectory: Vec::new(),
        }
    }
}

impl PenaltyRule for EfprRule {
    fn similarity(&mut self, _: usize, ax: &DMatrix<f64>, ay: &DMatrix<f64>, v: &WeightMatrix) -> f64 {
        let sigma2 = robust_scale(&weighted_differences(ax, ay, v), self.method).unwrap_or(0.0);
        self.pending.sigma2 = sigma2;
        // The solver applies λ/ρ; the threshold itself is Z σ.
        self.pending.lambda2 = self.rho * self.z2 * sigma2;
        self.pending.lambda2
    }

    fn sparsity(&mut self, _: usize, ax: &DMatrix<f64>, ay: &DMatrix<f64>) -> f64 {
        let sigma1 = robust_scale(&joint_coefficients(ax, ay), self.method).unwrap_or(0.0);
        self.pending.sigma1 = sigma1;
        self.pending.lambda1 = self.rho * self.z1 * sigma1;
        self.trajectory.push(self.pending);
        self.pending.lambda1
    }
}

/// Adaptive-penalty estimate on precomputed correlation matrices.
pub fn tuned_solve(
    sx: &DMatrix<f64>,
    sy: &DMatrix<f64>,
    v: &WeightMatrix,
    admm: &AdmmConfig,
    tuning: &TuningConfig,
    alpha2_prime: f64,
) -> Result<(JointEstimate, TuningResult)> {
    let mut rule = EfprRule::new(tuning.alpha1, alpha2_prime, sx.nrows(), admm.rho, tuning.scale_method);
    let est = solve(sx, sy, v, admm, &mut rule, None)?;
    let result = TuningResult {
        alpha1: tuning.alpha1,
        alpha2: tuning.alpha2,
        alpha2_prime,
        scale_method: tuning.scale_method,
        mc_samples: tuning.mc_samples,
        mc_seed: tuning.mc_seed,
        trajectory: rule.trajectory,
    };
    Ok((est, result))
}

/// Resolves `α₂'` and runs the adaptive-penalty estimate on paired data.
pub fn tuned_estimate(
    data: &crate::model::PairedDataset,
    v: &WeightMatrix,
    admm: &AdmmConfig,
    tuning: &TuningConfig,
) -> Result<(JointEstimate, TuningResult)> {
    tuning.validate()?;
    let a2p = alpha2_prime(tuning.alpha1, tuning.alpha2, tuning.mc_samples, tuning.mc_seed)?;
    let (sx, sy) = data.correlations()?;
    tuned_solve(&sx, &sy, v, admm, tuning, a2p)
}
