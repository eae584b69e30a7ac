//! Metrics against a known truth and the simulation experiments built on them.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::admm::{solve, AdmmConfig, AdmmState, Edge, EdgeSet, FixedPenalties, JointEstimate};
use crate::error::{Error, Result};
use crate::exec::map_indexed;
use crate::model::{fisher_z, scale_to_partial_correlation, PairedDataset};
use crate::simgen::{build_joint_model, sample_paired_gaussian, GroundTruthModel, SimConfig, TRUTH_ZERO_TOL};
use crate::stats::{descending_average_ranks, mean, quantile};
use crate::triangle::{weakest_edge_pvalues, TriangleCorrection};
use crate::tuning::{alpha2_prime, joint_coefficients, tuned_solve, weighted_differences, TuningConfig};
use crate::weights::{estimate_psi, weights_from_psi, PsiEstimator, PsiMatrix, WeightMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Youden-style difference `TP - FP`.
    pub fn youden(&self) -> i64 {
        self.tp as i64 - self.fp as i64
    }
}

fn check_dims(est: &JointEstimate, truth: &GroundTruthModel) -> Result<()> {
    if est.p() != truth.dim() {
        return Err(Error::DimensionMismatch(format!("estimate has p = {}, truth has {}", est.p(), truth.dim())));
    }
    Ok(())
}

fn all_pairs(p: usize) -> impl Iterator<Item = Edge> {
    (0..p).flat_map(move |j| (0..j).map(move |i| (i, j)))
}

/// Confusion counts of the estimated differential network against
/// `Ω_X - Ω_Y ≠ 0` in the truth.
pub fn differential_confusion(est: &JointEstimate, truth: &GroundTruthModel) -> Result<ConfusionCounts> {
    check_dims(est, truth)?;
    let est_diff = est.differential_edges();
    let mut c = ConfusionCounts::default();
    for e in all_pairs(est.p()) {
        let pos = est_diff.contains(&e);
        let truth_pos = !truth.is_equal_pair(e);
        match (pos, truth_pos) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// A ratio with its numerator and denominator kept for pooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Rate {
    pub hits: usize,
    pub total: usize,
}

impl Rate {
    pub fn value(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.hits as f64 / self.total as f64
        }
    }
}

/// Estimated-nonzero pairs among true zeros, pooled over both conditions.
pub fn support_fpr(est: &JointEstimate, truth: &GroundTruthModel) -> Result<Rate> {
    check_dims(est, truth)?;
    let mut r = Rate::default();
    for (om, tm) in [(&est.omega_x, &truth.omega_x), (&est.omega_y, &truth.omega_y)] {
        for (i, j) in all_pairs(est.p()) {
            if tm[(i, j)].abs() <= TRUTH_ZERO_TOL {
                r.total += 1;
                if om[(i, j)] != 0.0 {
                    r.hits += 1;
                }
            }
        }
    }
    Ok(r)
}

/// Pairs flagged differential among the truth-null pairs (zero in both
/// conditions) that are estimated nonzero in at least one condition.
pub fn differential_fpr(est: &JointEstimate, truth: &GroundTruthModel) -> Result<Rate> {
    check_dims(est, truth)?;
    let diff = est.differential_edges();
    let mut r = Rate::default();
    for (i, j) in all_pairs(est.p()) {
        if truth.omega_x[(i, j)].abs() > TRUTH_ZERO_TOL || truth.omega_y[(i, j)].abs() > TRUTH_ZERO_TOL {
            continue;
        }
        if est.omega_x[(i, j)] != 0.0 || est.omega_y[(i, j)] != 0.0 {
            r.total += 1;
            if diff.contains(&(i, j)) {
                r.hits += 1;
            }
        }
    }
    Ok(r)
}

// ----------------------------------------------------------------------------
// Youden comparison

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct YoudenConfig {
    pub admm: AdmmConfig,
    pub tuning: TuningConfig,
    pub psi_estimator: PsiEstimator,
    /// Bisection steps per level of the nested λ search.
    pub max_steps: usize,
}

impl Default for YoudenConfig {
    fn default() -> Self {
        Self { admm: AdmmConfig::default(), tuning: TuningConfig::default(), psi_estimator: PsiEstimator::RegBasedSim, max_steps: 50 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YoudenOutcome {
    pub delta: f64,
    pub sign: i8,
    pub wfgl: ConfusionCounts,
    pub fgl: ConfusionCounts,
    pub wfgl_common: usize,
    pub wfgl_diff: usize,
    pub fgl_common: usize,
    pub fgl_diff: usize,
    pub fgl_lambda1: f64,
    pub fgl_lambda2: f64,
}

struct Matcher<'a> {
    sx: &'a DMatrix<f64>,
    sy: &'a DMatrix<f64>,
    ones: WeightMatrix,
    admm: AdmmConfig,
    warm: Option<AdmmState>,
}

impl Matcher<'_> {
    fn fit(&mut self, l1: f64, l2: f64) -> Result<JointEstimate> {
        let cfg = AdmmConfig { lambda1: l1, lambda2: l2, ..self.admm };
        let mut rule = FixedPenalties { lambda1: l1, lambda2: l2 };
        let est = solve(self.sx, self.sy, &self.ones, &cfg, &mut rule, self.warm.as_ref())?;
        self.warm = Some(est.state.clone());
        Ok(est)
    }

    /// λ₁ whose common-edge count is within one of `target` for fixed λ₂.
    /// Common counts fall as λ₁ grows.
    fn match_common(&mut self, l2: f64, target: usize, guess: f64, steps: usize) -> Result<(f64, JointEstimate)> {
        let within = |c: usize| c.abs_diff(target) <= 1;
        let mut est = self.fit(guess, l2)?;
        if within(est.common_edges.len()) {
            return Ok((guess, est));
        }
        let (mut lo, mut hi) = if est.common_edges.len() > target { (guess, guess * 2.0) } else { (guess * 0.5, guess) };
        // expand the bracket
        for _ in 0..steps {
            if est.common_edges.len() > target {
                est = self.fit(hi, l2)?;
                if within(est.common_edges.len()) {
                    return Ok((hi, est));
                }
                if est.common_edges.len() < target {
                    break;
                }
                lo = hi;
                hi *= 2.0;
            } else {
                est = self.fit(lo, l2)?;
                if within(est.common_edges.len()) {
                    return Ok((lo, est));
                }
                if est.common_edges.len() > target || lo < 1e-8 {
                    break;
                }
                hi = lo;
                lo *= 0.5;
            }
        }
        let mut best = (f64::NAN, est);
        for _ in 0..steps {
            let mid = 0.5 * (lo + hi);
            let e = self.fit(mid, l2)?;
            let c = e.common_edges.len();
            if within(c) {
                return Ok((mid, e));
            }
            if c > target {
                lo = mid;
            } else {
                hi = mid;
            }
            best = (mid, e);
        }
        Ok(best)
    }

    /// Nested bisection: λ₂ on the differential count, λ₁ on the common count.
    fn match_counts(&mut self, common: usize, diff: usize, guess: (f64, f64), steps: usize) -> Result<(f64, f64, JointEstimate)> {
        let ok = |e: &JointEstimate| e.common_edges.len().abs_diff(common) <= 1 && e.differential_count().abs_diff(diff) <= 1;
        let (mut l1, mut l2) = guess;
        let (mut lo2, mut hi2): (Option<f64>, Option<f64>) = (None, None);
        for _ in 0..steps {
            let (m1, est) = self.match_common(l2, common, l1.max(1e-8), steps)?;
            l1 = m1;
            if ok(&est) {
                return Ok((l1, l2, est));
            }
            if est.differential_count() > diff {
                lo2 = Some(l2);
            } else {
                hi2 = Some(l2);
            }
            l2 = match (lo2, hi2) {
                (Some(a), Some(b)) => 0.5 * (a + b),
                (Some(a), None) => (a * 2.0).max(1e-6),
                (None, Some(b)) => b * 0.5,
                (None, None) => unreachable!(),
            };
            if let (Some(a), Some(b)) = (lo2, hi2) {
                if (b - a) <= 1e-12 * b.max(1e-12) {
                    break;
                }
            }
        }
        Err(Error::MatchFailure)
    }
}

/// WFGL with dependence weights and adaptive penalties against FGL
/// (`V ≡ 1`) with penalties matched to the same common and differential
/// edge counts (±1). Returns `δ = YI_WFGL - YI_FGL`.
pub fn youden_comparison(truth: &GroundTruthModel, data: &PairedDataset, cfg: &YoudenConfig) -> Result<YoudenOutcome> {
    cfg.tuning.validate()?;
    let a2p = alpha2_prime(cfg.tuning.alpha1, cfg.tuning.alpha2, cfg.tuning.mc_samples, cfg.tuning.mc_seed)?;
    youden_with_alpha2_prime(truth, data, cfg, a2p)
}

/// As [`youden_comparison`] with `α₂'` already resolved.
pub fn youden_with_alpha2_prime(
    truth: &GroundTruthModel,
    data: &PairedDataset,
    cfg: &YoudenConfig,
    a2p: f64,
) -> Result<YoudenOutcome> {
    let (sx, sy) = data.correlations()?;
    let psi = estimate_psi(data, cfg.admm.rho, cfg.admm.class_weight, cfg.psi_estimator)?;
    let v = weights_from_psi(&psi);
    let (wfgl, tr) = tuned_solve(&sx, &sy, &v, &cfg.admm, &cfg.tuning, a2p)?;
    let (l1, l2) = tr.final_lambdas();
    let (common, diff) = (wfgl.common_edges.len(), wfgl.differential_count());
    let mut m = Matcher { sx: &sx, sy: &sy, ones: WeightMatrix::ones(data.p()), admm: cfg.admm, warm: Some(wfgl.state.clone()) };
    let (f1, f2, fgl) = m.match_counts(common, diff, (l1, l2), cfg.max_steps)?;
    let cw = differential_confusion(&wfgl, truth)?;
    let cf = differential_confusion(&fgl, truth)?;
    let delta = (cw.youden() - cf.youden()) as f64;
    Ok(YoudenOutcome {
        delta,
        sign: delta.signum() as i8 * (delta != 0.0) as i8,
        wfgl: cw,
        fgl: cf,
        wfgl_common: common,
        wfgl_diff: diff,
        fgl_common: fgl.common_edges.len(),
        fgl_diff: fgl.differential_count(),
        fgl_lambda1: f1,
        fgl_lambda2: f2,
    })
}

// ----------------------------------------------------------------------------
// Rank bias of first-iteration differences

/// First-iteration dense estimates `(Ω̂_X, Ω̂_Y)`.
pub fn first_iteration(data: &PairedDataset, rho: f64, class_weight: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (sx, sy) = data.correlations()?;
    let ox = crate::admm::regularized_inverse(&sx, rho, class_weight)?.into_inner();
    let oy = crate::admm::regularized_inverse(&sy, rho, class_weight)?.into_inner();
    Ok((ox, oy))
}

/// Cut point between the low and high ψ groups.
pub const PSI_GROUP_CUT: f64 = 0.1;

/// `mean rank(L) - mean rank(U)` of `h_ij = v_ij |Ω̂_Y - Ω̂_X|` (rank 1 =
/// largest, ties averaged), with `L = {ψ < 0.1}` and `U = {ψ > 0.1}` taken
/// from `psi_truth`.
pub fn rank_bias_diagnostic(
    data: &PairedDataset,
    psi_truth: &PsiMatrix,
    psi_estimator: PsiEstimator,
    rho: f64,
    class_weight: f64,
) -> Result<f64> {
    let p = data.p();
    if psi_truth.dim() != p {
        return Err(Error::DimensionMismatch("ψ oracle does not match the data".into()));
    }
    let (ox, oy) = first_iteration(data, rho, class_weight)?;
    let v = weights_from_psi(&estimate_psi(data, rho, class_weight, psi_estimator)?);
    rank_bias_from(&ox, &oy, &v, psi_truth)
}

/// Rank-bias statistic from given first-iteration matrices and weights.
pub fn rank_bias_from(ox: &DMatrix<f64>, oy: &DMatrix<f64>, v: &WeightMatrix, psi_truth: &PsiMatrix) -> Result<f64> {
    let h: Vec<f64> = weighted_differences(ox, oy, v).iter().map(|d| d.abs()).collect();
    let ranks = descending_average_ranks(&h);
    let groups = psi_truth.upper_triangle();
    let (mut sl, mut nl, mut su, mut nu) = (0.0, 0usize, 0.0, 0usize);
    for (r, g) in ranks.iter().zip(&groups) {
        if *g < PSI_GROUP_CUT {
            sl += r;
            nl += 1;
        } else if *g > PSI_GROUP_CUT {
            su += r;
            nu += 1;
        }
    }
    if nl == 0 {
        return Err(Error::EmptyGroup("psi < 0.1"));
    }
    if nu == 0 {
        return Err(Error::EmptyGroup("psi > 0.1"));
    }
    Ok(sl / nl as f64 - su / nu as f64)
}

// ----------------------------------------------------------------------------
// ψ oracle

#[derive(Default, Clone)]
struct PairMoments {
    sx: Vec<f64>,
    sy: Vec<f64>,
    sxx: Vec<f64>,
    syy: Vec<f64>,
    sxy: Vec<f64>,
    count: usize,
}

impl PairMoments {
    fn new(m: usize) -> Self {
        Self { sx: vec![0.0; m], sy: vec![0.0; m], sxx: vec![0.0; m], syy: vec![0.0; m], sxy: vec![0.0; m], count: 0 }
    }

    fn push(&mut self, gx: &[f64], gy: &[f64]) {
        for k in 0..gx.len() {
            self.sx[k] += gx[k];
            self.sy[k] += gy[k];
            self.sxx[k] += gx[k] * gx[k];
            self.syy[k] += gy[k] * gy[k];
            self.sxy[k] += gx[k] * gy[k];
        }
        self.count += 1;
    }

    fn merge(&mut self, o: &Self) {
        for k in 0..self.sx.len() {
            self.sx[k] += o.sx[k];
            self.sy[k] += o.sy[k];
            self.sxx[k] += o.sxx[k];
            self.syy[k] += o.syy[k];
            self.sxy[k] += o.sxy[k];
        }
        self.count += o.count;
    }

    fn correlation(&self, k: usize) -> f64 {
        let n = self.count as f64;
        let cov = self.sxy[k] - self.sx[k] * self.sy[k] / n;
        let vx = self.sxx[k] - self.sx[k] * self.sx[k] / n;
        let vy = self.syy[k] - self.sy[k] * self.sy[k] / n;
        if vx <= 0.0 || vy <= 0.0 {
            0.0
        } else {
            cov / (vx * vy).sqrt()
        }
    }
}

fn fisher_upper(w: &crate::model::PartialCorrelationMatrix) -> Vec<f64> {
    all_pairs(w.nrows()).map(|(i, j)| fisher_z(w[(i, j)])).collect()
}

/// Monte Carlo ψ: the correlation across `replicates` datasets of
/// `g(ŵ_X,ij)` and `g(ŵ_Y,ij)` from first-iteration estimates.
pub fn psi_oracle_mc(
    model: &GroundTruthModel,
    n: usize,
    replicates: usize,
    seed: u64,
    rho: f64,
    class_weight: f64,
) -> Result<PsiMatrix> {
    if replicates < 2 {
        return Err(Error::InvalidConfig("ψ oracle needs at least 2 replicates".into()));
    }
    let p = model.dim();
    let m = p * p.saturating_sub(1) / 2;
    let chunks = replicates.min(64);
    let parts = map_indexed(chunks, |c| -> Result<PairMoments> {
        let mut acc = PairMoments::new(m);
        let mut r = c;
        while r < replicates {
            let data = sample_paired_gaussian(model, n, seed.wrapping_add(r as u64))?;
            let (ox, oy) = first_iteration(&data, rho, class_weight)?;
            let gx = fisher_upper(&scale_to_partial_correlation(&ox)?);
            let gy = fisher_upper(&scale_to_partial_correlation(&oy)?);
            acc.push(&gx, &gy);
            r += chunks;
        }
        Ok(acc)
    });
    let mut total = PairMoments::new(m);
    for part in parts {
        total.merge(&part?);
    }
    let mut out = DMatrix::zeros(p, p);
    for (k, (i, j)) in all_pairs(p).enumerate() {
        let v = total.correlation(k);
        out[(i, j)] = v;
        out[(j, i)] = v;
    }
    PsiMatrix::from_entries(out)
}

/// Mean squared error and correlation of upper-triangle ψ estimates.
pub fn psi_accuracy(estimate: &PsiMatrix, oracle: &PsiMatrix) -> (f64, f64) {
    let (a, b) = (estimate.upper_triangle(), oracle.upper_triangle());
    let mse = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len().max(1) as f64;
    (mse, crate::stats::pearson(&a, &b))
}

/// Coefficient vectors for normality diagnostics: the pooled off-diagonal
/// coefficients and the weighted differences, as used by the tuner.
pub fn export_coefficient_distribution(a_x: &DMatrix<f64>, a_y: &DMatrix<f64>, v: &WeightMatrix) -> (Vec<f64>, Vec<f64>) {
    (joint_coefficients(a_x, a_y), weighted_differences(a_x, a_y, v))
}

// ----------------------------------------------------------------------------
// Experiment drivers

/// Which target an FPR calibration sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FprTarget {
    Alpha1,
    Alpha2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FprRow {
    pub target: f64,
    pub median: f64,
    pub q025: f64,
    pub q975: f64,
    pub replicates: usize,
    pub failed: usize,
}

/// Summary quantiles of a set of observed rates.
pub fn fpr_row(target: f64, values: &[f64], failed: usize) -> FprRow {
    if values.is_empty() {
        return FprRow { target, median: f64::NAN, q025: f64::NAN, q975: f64::NAN, replicates: 0, failed };
    }
    FprRow {
        target,
        median: quantile(values, 0.5),
        q025: quantile(values, 0.025),
        q975: quantile(values, 0.975),
        replicates: values.len(),
        failed,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub sim: SimConfig,
    pub admm: AdmmConfig,
    pub tuning: TuningConfig,
    pub psi_estimator: PsiEstimator,
    pub replicates: usize,
    /// Data seeds are `data_seed + r`.
    pub data_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            admm: AdmmConfig::default(),
            tuning: TuningConfig::default(),
            psi_estimator: PsiEstimator::RegBasedSim,
            replicates: 100,
            data_seed: 1000,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.admm.validate()?;
        self.tuning.validate()?;
        if self.replicates < 1 {
            return Err(Error::InvalidConfig("replicates must be >= 1".into()));
        }
        Ok(())
    }

    fn data(&self, model: &GroundTruthModel, r: usize) -> Result<PairedDataset> {
        sample_paired_gaussian(model, self.sim.n, self.data_seed.wrapping_add(r as u64))
    }
}

/// One adaptive-penalty fit of replicate data.
fn tuned_fit(data: &PairedDataset, cfg: &ExperimentConfig, tuning: &TuningConfig, a2p: f64) -> Result<JointEstimate> {
    let (sx, sy) = data.correlations()?;
    let v = weights_from_psi(&estimate_psi(data, cfg.admm.rho, cfg.admm.class_weight, cfg.psi_estimator)?);
    Ok(tuned_solve(&sx, &sy, &v, &cfg.admm, tuning, a2p)?.0)
}

/// Observed support FPR (α₁ sweep) or differential FPR (α₂ sweep) over
/// replicate datasets of one model, per target value.
pub fn fpr_calibration(cfg: &ExperimentConfig, which: FprTarget, targets: &[f64]) -> Result<Vec<FprRow>> {
    cfg.validate()?;
    let model = build_joint_model(&cfg.sim)?;
    let mut rows = Vec::with_capacity(targets.len());
    for &t in targets {
        let tuning = match which {
            FprTarget::Alpha1 => TuningConfig { alpha1: t, ..cfg.tuning },
            FprTarget::Alpha2 => TuningConfig { alpha2: t, ..cfg.tuning },
        };
        tuning.validate()?;
        let a2p = alpha2_prime(tuning.alpha1, tuning.alpha2, tuning.mc_samples, tuning.mc_seed)?;
        let rates = map_indexed(cfg.replicates, |r| -> Result<f64> {
            let data = cfg.data(&model, r)?;
            let est = tuned_fit(&data, cfg, &tuning, a2p)?;
            Ok(match which {
                FprTarget::Alpha1 => support_fpr(&est, &model)?.value(),
                FprTarget::Alpha2 => differential_fpr(&est, &model)?.value(),
            })
        });
        let failed = rates.iter().filter(|r| r.is_err()).count();
        let ok: Vec<f64> = rates.into_iter().filter_map(|r| r.ok()).collect();
        rows.push(fpr_row(t, &ok, failed));
    }
    Ok(rows)
}

/// Weakest-edge TP/FP counts, split by the estimated edge class.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TriangleCounts {
    pub tp_common: f64,
    pub fp_common: f64,
    pub tp_diff: f64,
    pub fp_diff: f64,
}

impl TriangleCounts {
    pub fn fp(&self) -> f64 {
        self.fp_common + self.fp_diff
    }

    pub fn tp(&self) -> f64 {
        self.tp_common + self.tp_diff
    }

    fn add(&mut self, o: &Self) {
        self.tp_common += o.tp_common;
        self.fp_common += o.fp_common;
        self.tp_diff += o.tp_diff;
        self.fp_diff += o.fp_diff;
    }

    fn scale(&mut self, s: f64) {
        self.tp_common *= s;
        self.fp_common *= s;
        self.tp_diff *= s;
        self.fp_diff *= s;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangleRow {
    /// `None` for the unpruned estimate.
    pub alpha: Option<f64>,
    pub counts: TriangleCounts,
}

/// Weakest triangle edges of one estimate with their smallest p-value in
/// each condition where they were tested.
pub struct WeakestEdges {
    pub x: std::collections::BTreeMap<Edge, f64>,
    pub y: std::collections::BTreeMap<Edge, f64>,
}

pub fn weakest_edges(est: &JointEstimate, data: &PairedDataset) -> Result<WeakestEdges> {
    let (rx, ry) = data.correlations()?;
    let (_, x) = weakest_edge_pvalues(&est.graph_x(), &rx, data.n(), TriangleCorrection::None)?;
    let (_, y) = weakest_edge_pvalues(&est.graph_y(), &ry, data.n(), TriangleCorrection::None)?;
    Ok(WeakestEdges { x, y })
}

/// TP/FP of weakest edges kept at `alpha` (`None` keeps all). A common edge
/// is counted once and kept only if it survives in every condition where it
/// was tested; it is a true positive when nonzero in either truth.
pub fn triangle_counts(est: &JointEstimate, truth: &GroundTruthModel, w: &WeakestEdges, alpha: Option<f64>) -> TriangleCounts {
    let keep = |p: f64| alpha.is_none_or(|a| p <= a);
    let mut c = TriangleCounts::default();
    let tx = |e: Edge| truth.omega_x[e].abs() > TRUTH_ZERO_TOL;
    let ty = |e: Edge| truth.omega_y[e].abs() > TRUTH_ZERO_TOL;
    let common: EdgeSet = w.x.keys().chain(w.y.keys()).filter(|e| est.common_edges.contains(e)).copied().collect();
    for e in common {
        let kept = w.x.get(&e).is_none_or(|&p| keep(p)) && w.y.get(&e).is_none_or(|&p| keep(p));
        if kept {
            if tx(e) || ty(e) {
                c.tp_common += 1.0;
            } else {
                c.fp_common += 1.0;
            }
        }
    }
    for (map, truth_m) in [(&w.x, &tx as &dyn Fn(Edge) -> bool), (&w.y, &ty as &dyn Fn(Edge) -> bool)] {
        for (&e, &p) in map.iter() {
            if est.common_edges.contains(&e) || !keep(p) {
                continue;
            }
            if truth_m(e) {
                c.tp_diff += 1.0;
            } else {
                c.fp_diff += 1.0;
            }
        }
    }
    c
}

/// Mean weakest-edge TP/FP over replicates, without pruning and after
/// pruning at each `alpha`.
pub fn triangle_table(cfg: &ExperimentConfig, alphas: &[f64]) -> Result<Vec<TriangleRow>> {
    cfg.validate()?;
    let model = build_joint_model(&cfg.sim)?;
    let a2p = alpha2_prime(cfg.tuning.alpha1, cfg.tuning.alpha2, cfg.tuning.mc_samples, cfg.tuning.mc_seed)?;
    let per_rep = map_indexed(cfg.replicates, |r| -> Result<Vec<TriangleCounts>> {
        let data = cfg.data(&model, r)?;
        let est = tuned_fit(&data, cfg, &cfg.tuning, a2p)?;
        let w = weakest_edges(&est, &data)?;
        let mut out = vec![triangle_counts(&est, &model, &w, None)];
        out.extend(alphas.iter().map(|&a| triangle_counts(&est, &model, &w, Some(a))));
        Ok(out)
    });
    let mut sums = vec![TriangleCounts::default(); alphas.len() + 1];
    let mut ok = 0usize;
    for rep in per_rep.into_iter().flatten() {
        ok += 1;
        for (s, c) in sums.iter_mut().zip(&rep) {
            s.add(c);
        }
    }
    if ok == 0 {
        return Err(Error::InvalidConfig("every replicate failed".into()));
    }
    for s in &mut sums {
        s.scale(1.0 / ok as f64);
    }
    let mut rows = vec![TriangleRow { alpha: None, counts: sums[0] }];
    rows.extend(alphas.iter().zip(&sums[1..]).map(|(&a, c)| TriangleRow { alpha: Some(a), counts: *c }));
    Ok(rows)
}

/// Youden differences over replicate datasets of one model. Replicates
/// whose matching fails are dropped and counted.
pub fn youden_experiment(cfg: &ExperimentConfig, max_steps: usize) -> Result<(Vec<YoudenOutcome>, usize)> {
    cfg.validate()?;
    let model = build_joint_model(&cfg.sim)?;
    let ycfg = YoudenConfig { admm: cfg.admm, tuning: cfg.tuning, psi_estimator: cfg.psi_estimator, max_steps };
    let a2p = alpha2_prime(cfg.tuning.alpha1, cfg.tuning.alpha2, cfg.tuning.mc_samples, cfg.tuning.mc_seed)?;
    let outs = map_indexed(cfg.replicates, |r| -> Result<YoudenOutcome> {
        let data = cfg.data(&model, r)?;
        youden_with_alpha2_prime(&model, &data, &ycfg, a2p)
    });
    let failed = outs.iter().filter(|o| o.is_err()).count();
    Ok((outs.into_iter().filter_map(|o| o.ok()).collect(), failed))
}

/// Rank-bias statistic per replicate under the independence and the
/// configured paired estimator, with groups from the model's ψ.
pub fn rank_bias_experiment(cfg: &ExperimentConfig, psi_truth: &PsiMatrix) -> Result<Vec<(f64, f64)>> {
    cfg.validate()?;
    let model = build_joint_model(&cfg.sim)?;
    let outs = map_indexed(cfg.replicates, |r| -> Result<(f64, f64)> {
        let data = cfg.data(&model, r)?;
        let (ox, oy) = first_iteration(&data, cfg.admm.rho, cfg.admm.class_weight)?;
        let ind = rank_bias_from(&ox, &oy, &WeightMatrix::ones(data.p()), psi_truth)?;
        let v = weights_from_psi(&estimate_psi(&data, cfg.admm.rho, cfg.admm.class_weight, cfg.psi_estimator)?);
        Ok((ind, rank_bias_from(&ox, &oy, &v, psi_truth)?))
    });
    outs.into_iter().collect()
}

/// Mean of a slice of outcomes' deltas.
pub fn mean_delta(outs: &[YoudenOutcome]) -> f64 {
    mean(&outs.iter().map(|o| o.delta).collect::<Vec<_>>())
}
