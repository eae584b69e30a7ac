//! Ground-truth joint models and paired Gaussian sampling.
//!
//! The base precision is almost block diagonal: each cluster wires a
//! truncated-zeta degree sequence with the configuration model, and a few
//! Bernoulli edges connect clusters. Off-diagonal values are drawn from
//! `±Unif(0.5, 0.9)` and the diagonal is raised by `δ` until the condition
//! number is below the dimension and the smallest eigenvalue clears the
//! cross value.
//!
//! Differential structure is appended as two extra blocks: `D_X` is present
//! only in condition X (identity in Y) and `D_Y` only in Y. The joint
//! precision carries a diagonal cross block with `cross_value` on half of the
//! variables. Truth labels come from the marginal precisions
//! `Ω_X = Ω^J_X - C (Ω^J_Y)^{-1} C` and its mirror, so they describe the
//! conditional independence graph of each condition on its own.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::admm::{sym_eigen, Edge, EdgeSet};
use crate::error::{Error, Result};
use crate::model::{scale_to_partial_correlation, PairedDataset, SymmetricMatrix};
use crate::weights::{psi_full_asymptotic, PsiMatrix};

/// Magnitude below which a truth entry counts as zero.
pub const TRUTH_ZERO_TOL: f64 = 1e-10;
/// Smallest admissible global shrink of the cross values.
pub const MIN_CROSS_SHRINK: f64 = 0.1;
/// Lower bound on the smallest eigenvalue of each block, as a multiple of the cross value.
pub const EIGEN_FLOOR_FACTOR: f64 = 1.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Size of the shared base network; the model has `p + 2·diff_block_size` variables.
    pub p: usize,
    pub n: usize,
    pub alpha_powerlaw: f64,
    pub n_clusters: usize,
    pub interblock_edge_prob: f64,
    /// Defaults to `ceil(p / 20)`.
    pub diff_block_size: Option<usize>,
    pub cross_value: f64,
    /// Number of nonzero cross-diagonal entries; defaults to half the model dimension.
    #[serde(alias = "cross_fraction")]
    pub cross_count: Option<usize>,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            p: 100,
            n: 250,
            alpha_powerlaw: 2.3,
            n_clusters: 3,
            interblock_edge_prob: 0.001,
            diff_block_size: None,
            cross_value: 0.6,
            cross_count: None,
            seed: 1,
        }
    }
}

impl SimConfig {
    pub fn diff_block(&self) -> usize {
        self.diff_block_size.unwrap_or(self.p.div_ceil(20))
    }

    pub fn dim(&self) -> usize {
        self.p + 2 * self.diff_block()
    }

    pub fn cross_entries(&self) -> usize {
        self.cross_count.unwrap_or(self.dim() / 2)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.alpha_powerlaw > 1.0) {
            return bad(format!("alpha_powerlaw must satisfy α > 1, got {}", self.alpha_powerlaw));
        }
        if self.n_clusters < 1 {
            return bad("n_clusters must be >= 1".into());
        }
        if self.p < 2 * self.n_clusters {
            return bad(format!("p = {} is too small for {} clusters (need p >= 2·n_clusters)", self.p, self.n_clusters));
        }
        if self.n < 2 {
            return bad("n must be >= 2".into());
        }
        if !(0.0..=1.0).contains(&self.interblock_edge_prob) {
            return bad("interblock_edge_prob must be in [0, 1]".into());
        }
        if !(self.cross_value.abs() < 1.0) {
            return bad("cross_value must be in (-1, 1)".into());
        }
        if self.cross_entries() > self.dim() {
            return bad(format!("cross_count exceeds the model dimension {}", self.dim()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeLabel {
    Common,
    XOnly,
    YOnly,
}

impl EdgeLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeLabel::Common => "common",
            EdgeLabel::XOnly => "x_only",
            EdgeLabel::YOnly => "y_only",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthModel {
    pub omega_joint: SymmetricMatrix,
    pub sigma_joint: SymmetricMatrix,
    pub omega_x: SymmetricMatrix,
    pub omega_y: SymmetricMatrix,
    pub edge_labels: BTreeMap<Edge, EdgeLabel>,
    pub cross_diag: Vec<f64>,
    pub delta: f64,
    pub cross_shrink: f64,
}

impl GroundTruthModel {
    pub fn dim(&self) -> usize {
        self.omega_x.dim()
    }

    pub fn differential_edges(&self) -> EdgeSet {
        self.edge_labels.iter().filter(|(_, l)| **l != EdgeLabel::Common).map(|(e, _)| *e).collect()
    }

    pub fn support_x(&self) -> EdgeSet {
        nonzero_pairs(&self.omega_x)
    }

    pub fn support_y(&self) -> EdgeSet {
        nonzero_pairs(&self.omega_y)
    }

    /// Pairs with equal entries in both marginal precisions (including pairs zero in both).
    pub fn is_equal_pair(&self, (i, j): Edge) -> bool {
        (self.omega_x[(i, j)] - self.omega_y[(i, j)]).abs() <= TRUTH_ZERO_TOL
    }

    /// Cross-covariance block `Σ_XY`.
    pub fn sigma_xy(&self) -> DMatrix<f64> {
        let p = self.dim();
        self.sigma_joint.view((0, p), (p, p)).into_owned()
    }

    /// Population ψ from the asymptotic formula with the true marginal
    /// precisions and the true residual cross correlations.
    pub fn psi_asymptotic(&self) -> Result<PsiMatrix> {
        let p = self.dim();
        let (ox, oy): (&DMatrix<f64>, &DMatrix<f64>) = (&self.omega_x, &self.omega_y);
        let cross = ox * self.sigma_xy() * oy;
        let w_xy = DMatrix::from_fn(p, p, |i, j| cross[(i, j)] / (ox[(i, i)] * oy[(j, j)]).sqrt());
        let wx = scale_to_partial_correlation(ox)?;
        let wy = scale_to_partial_correlation(oy)?;
        psi_full_asymptotic(&wx, &wy, &w_xy)
    }
}

fn nonzero_pairs(m: &DMatrix<f64>) -> EdgeSet {
    let p = m.nrows();
    let mut out = EdgeSet::new();
    for j in 0..p {
        for i in 0..j {
            if m[(i, j)].abs() > TRUTH_ZERO_TOL {
                out.insert((i, j));
            }
        }
    }
    out
}

/// Labels every pair that is nonzero in at least one marginal precision.
pub fn label_edges(ox: &DMatrix<f64>, oy: &DMatrix<f64>) -> BTreeMap<Edge, EdgeLabel> {
    let p = ox.nrows();
    let mut out = BTreeMap::new();
    for j in 0..p {
        for i in 0..j {
            let (x, y) = (ox[(i, j)], oy[(i, j)]);
            let (nx, ny) = (x.abs() > TRUTH_ZERO_TOL, y.abs() > TRUTH_ZERO_TOL);
            if !nx && !ny {
                continue;
            }
            let label = if (x - y).abs() <= TRUTH_ZERO_TOL {
                EdgeLabel::Common
            } else if x.abs() >= y.abs() {
                EdgeLabel::XOnly
            } else {
                EdgeLabel::YOnly
            };
            out.insert((i, j), label);
        }
    }
    out
}

/// Zeta(α) draws truncated to `1..=kmax`.
pub fn sample_power_law_degrees_with<R: Rng>(p: usize, kmax: usize, alpha: f64, rng: &mut R) -> Vec<usize> {
    if p == 0 || kmax == 0 {
        return vec![0; p];
    }
    let weights: Vec<f64> = (1..=kmax).map(|k| (k as f64).powf(-alpha)).collect();
    let dist = WeightedIndex::new(&weights).expect("positive weights");
    let mut deg: Vec<usize> = (0..p).map(|_| dist.sample(rng) + 1).collect();
    if deg.iter().sum::<usize>() % 2 == 1 {
        let idx = rng.random_range(0..p);
        loop {
            let k = dist.sample(rng) + 1;
            if (k + deg[idx]).is_multiple_of(2) {
                continue;
            }
            deg[idx] = k;
            break;
        }
    }
    deg
}

/// Truncated-zeta degree sequence for `p` nodes with support `1..=p-1`
/// and an even sum.
pub fn sample_power_law_degrees(p: usize, alpha: f64, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_power_law_degrees_with(p, p.saturating_sub(1), alpha, &mut rng)
}

/// Configuration-model wiring of `degrees` over `nodes`, dropping self loops
/// and repeated pairs.
fn configuration_model<R: Rng>(nodes: &[usize], degrees: &[usize], rng: &mut R, out: &mut EdgeSet) {
    let mut stubs: Vec<usize> = nodes.iter().zip(degrees).flat_map(|(&v, &d)| std::iter::repeat_n(v, d)).collect();
    stubs.shuffle(rng);
    for pair in stubs.chunks_exact(2) {
        let (a, b) = (pair[0], pair[1]);
        if a != b {
            out.insert((a.min(b), a.max(b)));
        }
    }
}

fn cluster_bounds(p: usize, k: usize) -> Vec<(usize, usize)> {
    (0..k).map(|c| (c * p / k, (c + 1) * p / k)).collect()
}

fn cluster_graph_with<R: Rng>(p: usize, n_clusters: usize, alpha: f64, inter: f64, rng: &mut R) -> EdgeSet {
    let bounds = cluster_bounds(p, n_clusters.max(1));
    let mut edges = EdgeSet::new();
    for &(lo, hi) in &bounds {
        let nodes: Vec<usize> = (lo..hi).collect();
        let deg = sample_power_law_degrees_with(nodes.len(), nodes.len().saturating_sub(1), alpha, rng);
        configuration_model(&nodes, &deg, rng, &mut edges);
    }
    if inter > 0.0 {
        let block_of = |v: usize| bounds.iter().position(|&(lo, hi)| v >= lo && v < hi).unwrap_or(0);
        for j in 0..p {
            for i in 0..j {
                if block_of(i) != block_of(j) && rng.random_bool(inter) {
                    edges.insert((i, j));
                }
            }
        }
    }
    edges
}

/// Base network over `cfg.p` nodes: power-law clusters plus sparse inter-cluster edges.
pub fn generate_cluster_graph(cfg: &SimConfig) -> Result<EdgeSet> {
    cfg.validate()?;
    let mut rng = stream(cfg.seed, 0);
    Ok(cluster_graph_with(cfg.p, cfg.n_clusters, cfg.alpha_powerlaw, cfg.interblock_edge_prob, &mut rng))
}

/// Sampling draws from its own stream so one seed can drive both the model and the data.
const SAMPLE_STREAM: u64 = 4;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn extreme_eigenvalues(m: &DMatrix<f64>) -> Result<(f64, f64)> {
    let (vals, _) = sym_eigen(m)?;
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

/// Condition number of a symmetric matrix, infinite unless positive definite.
pub fn condition_number(m: &DMatrix<f64>) -> Result<f64> {
    let (lo, hi) = extreme_eigenvalues(m)?;
    Ok(if lo > 0.0 { hi / lo } else { f64::INFINITY })
}

/// Smallest `δ >= 0` (up to a relative margin) with `cond(Ω + δI) < target`
/// and `λ_min(Ω + δI) >= floor`.
fn delta_for_condition(lo: f64, hi: f64, target: f64, floor: f64) -> f64 {
    // (hi + δ)/(lo + δ) = target at δ*
    let cond = if lo > 0.0 && hi / lo < target { 0.0 } else { (hi - target * lo) / (target - 1.0) };
    let eig = floor - lo;
    let star = cond.max(eig);
    if star <= 0.0 {
        return 0.0;
    }
    star + 1e-6 * star.max(1e-9)
}

fn precision_with<R: Rng>(edges: &EdgeSet, p: usize, floor: f64, rng: &mut R) -> Result<(SymmetricMatrix, f64)> {
    let mut m = DMatrix::identity(p, p);
    for &(i, j) in edges {
        let mag = rng.random_range(0.5..0.9);
        let v = if rng.random_bool(0.5) { mag } else { -mag };
        m[(i, j)] = v;
        m[(j, i)] = v;
    }
    if p < 2 || (edges.is_empty() && floor <= 1.0) {
        return Ok((SymmetricMatrix::symmetrize(m), 0.0));
    }
    let (lo, hi) = extreme_eigenvalues(&m)?;
    let delta = delta_for_condition(lo, hi, p as f64, floor);
    for i in 0..p {
        m[(i, i)] += delta;
    }
    Ok((SymmetricMatrix::symmetrize(m), delta))
}

/// Precision with `±Unif(0.5, 0.9)` entries on `edges`, unit diagonal raised
/// by the `δ` that brings the condition number below `p`. Returns `δ` too.
pub fn build_precision(edges: &EdgeSet, p: usize, seed: u64) -> Result<(SymmetricMatrix, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    precision_with(edges, p, 0.0, &mut rng)
}

fn place_block(dst: &mut DMatrix<f64>, src: &DMatrix<f64>, at: usize) {
    dst.view_mut((at, at), src.shape()).copy_from(src);
}

fn joint_with_cross(ox: &DMatrix<f64>, oy: &DMatrix<f64>, cross: &[f64], s: f64) -> DMatrix<f64> {
    let p = ox.nrows();
    let mut j = DMatrix::zeros(2 * p, 2 * p);
    place_block(&mut j, ox, 0);
    place_block(&mut j, oy, p);
    for (i, &c) in cross.iter().enumerate() {
        j[(i, p + i)] = s * c;
        j[(p + i, i)] = s * c;
    }
    j
}

fn inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = m.clone().cholesky().ok_or(Error::CholeskyFailure)?;
    Ok(chol.inverse())
}

/// Inverse of a block-diagonal matrix, computed block by block so that
/// zero blocks stay exactly zero.
fn block_inverse(m: &DMatrix<f64>, blocks: &[(usize, usize)]) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for &(lo, hi) in blocks {
        let sub = m.view((lo, lo), (hi - lo, hi - lo)).into_owned();
        place_block(&mut out, &inverse(&sub)?, lo);
    }
    Ok(out)
}

/// Builds the full joint model described by `cfg`.
pub fn build_joint_model(cfg: &SimConfig) -> Result<GroundTruthModel> {
    cfg.validate()?;
    let (p, d) = (cfg.p, cfg.diff_block());
    let dim = cfg.dim();

    let mut graph_rng = stream(cfg.seed, 0);
    let base_edges = cluster_graph_with(p, cfg.n_clusters, cfg.alpha_powerlaw, cfg.interblock_edge_prob, &mut graph_rng);
    let mut value_rng = stream(cfg.seed, 1);
    // Eigenvalue floor above |c| keeps [[A, C], [C, B]] positive definite
    // for any diagonal C with entries up to c.
    let floor = EIGEN_FLOOR_FACTOR * cfg.cross_value.abs();
    let (base, delta) = precision_with(&base_edges, p, floor, &mut value_rng)?;

    let mut diff_rng = stream(cfg.seed, 2);
    let mut diff_block = || -> Result<DMatrix<f64>> {
        let g = cluster_graph_with(d, 1, cfg.alpha_powerlaw, 0.0, &mut diff_rng);
        Ok(precision_with(&g, d, floor, &mut diff_rng)?.0.into_inner())
    };
    let (dx, dy) = (diff_block()?, diff_block()?);

    let mut jx = DMatrix::identity(dim, dim);
    let mut jy = DMatrix::identity(dim, dim);
    place_block(&mut jx, &base, 0);
    place_block(&mut jy, &base, 0);
    place_block(&mut jx, &dx, p);
    place_block(&mut jy, &dy, p + d);

    let mut cross_rng = stream(cfg.seed, 3);
    let mut idx: Vec<usize> = (0..dim).collect();
    idx.shuffle(&mut cross_rng);
    let mut cross = vec![0.0; dim];
    for &i in idx.iter().take(cfg.cross_entries()) {
        cross[i] = cfg.cross_value;
    }

    let limit = 2.0 * dim as f64;
    let feasible = |s: f64| -> Result<bool> { Ok(condition_number(&joint_with_cross(&jx, &jy, &cross, s))? < limit) };
    let shrink = if feasible(1.0)? {
        1.0
    } else {
        let (mut lo, mut hi) = (0.0, 1.0);
        if !feasible(0.0)? {
            return Err(Error::InfeasibleCross(0.0));
        }
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if feasible(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    if shrink < MIN_CROSS_SHRINK {
        return Err(Error::InfeasibleCross(shrink));
    }
    let cross: Vec<f64> = cross.iter().map(|c| c * shrink).collect();

    let blocks = [(0, p), (p, p + d), (p + d, dim)];
    let inv_x = block_inverse(&jx, &blocks)?;
    let inv_y = block_inverse(&jy, &blocks)?;
    let c = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(cross.clone()));
    let omega_x = &jx - &c * inv_y * &c;
    let omega_y = &jy - &c * inv_x * &c;

    let joint = joint_with_cross(&jx, &jy, &cross, 1.0);
    let sigma = inverse(&joint)?;
    finish(joint, sigma, omega_x, omega_y, cross, delta, shrink)
}

fn finish(
    joint: DMatrix<f64>,
    sigma: DMatrix<f64>,
    omega_x: DMatrix<f64>,
    omega_y: DMatrix<f64>,
    cross: Vec<f64>,
    delta: f64,
    shrink: f64,
) -> Result<GroundTruthModel> {
    let omega_x = SymmetricMatrix::symmetrize(omega_x);
    let omega_y = SymmetricMatrix::symmetrize(omega_y);
    Ok(GroundTruthModel {
        edge_labels: label_edges(&omega_x, &omega_y),
        omega_joint: SymmetricMatrix::symmetrize(joint),
        sigma_joint: SymmetricMatrix::symmetrize(sigma),
        omega_x,
        omega_y,
        cross_diag: cross,
        delta,
        cross_shrink: shrink,
    })
}

/// `n` iid draws of `[X, Y] ~ N(0, Σ)` with `Σ = Ω_joint^{-1}`.
pub fn sample_paired_gaussian(model: &GroundTruthModel, n: usize, seed: u64) -> Result<PairedDataset> {
    let p = model.dim();
    let chol = model.sigma_joint.clone().into_inner().cholesky().ok_or(Error::CholeskyFailure)?;
    let mut rng = stream(seed, SAMPLE_STREAM);
    let z = DMatrix::from_fn(n, 2 * p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let draws = z * chol.l().transpose();
    let x = draws.columns(0, p).into_owned();
    let y = draws.columns(p, p).into_owned();
    PairedDataset::new(x, y, None)
}

/// Four-variable single-network model with edges 1–2 and 1–3 of equal
/// strength `rho` and the 2–3 edge missing. Both conditions share it and
/// are independent of each other.
pub fn toy_triangle_model(rho: f64) -> Result<GroundTruthModel> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidConfig(format!("toy model needs 0 <= rho < 1, got {rho}")));
    }
    let r = DMatrix::from_row_slice(
        4,
        4,
        &[1.0, rho, rho, 0.0, rho, 1.0, rho * rho, 0.0, rho, rho * rho, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0],
    );
    let q = 1.0 - rho * rho;
    let off = -rho / q;
    let omega = DMatrix::from_row_slice(
        4,
        4,
        &[(1.0 + rho * rho) / q, off, off, 0.0, off, 1.0 / q, 0.0, 0.0, off, 0.0, 1.0 / q, 0.0, 0.0, 0.0, 0.0, 1.0],
    );
    let mut joint = DMatrix::zeros(8, 8);
    place_block(&mut joint, &omega, 0);
    place_block(&mut joint, &omega, 4);
    let mut sigma = DMatrix::zeros(8, 8);
    place_block(&mut sigma, &r, 0);
    place_block(&mut sigma, &r, 4);
    finish(joint, sigma, omega.clone(), omega, vec![0.0; 4], 0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zeta_head_probability() {
        let deg = {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            sample_power_law_degrees_with(100_000, 10_000, 2.3, &mut rng)
        };
        let ones = deg.iter().filter(|&&k| k == 1).count() as f64 / deg.len() as f64;
        // ζ(2.3) = 1.432418
        assert!((ones - 1.0 / 1.432418).abs() < 0.01, "P(k = 1) = {ones}");
    }

    #[test]
    fn degree_support_and_parity() {
        for seed in 0..50 {
            let deg = sample_power_law_degrees(30, 2.3, seed);
            assert!(deg.iter().all(|&k| (1..=29).contains(&k)));
            assert_eq!(deg.iter().sum::<usize>() % 2, 0);
        }
    }

    #[test]
    fn cluster_structure() {
        let one = SimConfig { p: 40, n_clusters: 1, interblock_edge_prob: 0.0, ..SimConfig::default() };
        assert!(!generate_cluster_graph(&one).unwrap().is_empty());
        let two = SimConfig { p: 40, n_clusters: 2, interblock_edge_prob: 0.0, ..SimConfig::default() };
        let g = generate_cluster_graph(&two).unwrap();
        assert!(g.iter().all(|&(i, j)| (i < 20) == (j < 20)));
    }

    #[test]
    fn degree_one_fraction() {
        let cfg = SimConfig { p: 400, n_clusters: 1, interblock_edge_prob: 0.0, seed: 5, ..SimConfig::default() };
        let mut rng = stream(cfg.seed, 0);
        let deg = sample_power_law_degrees_with(400, 399, 2.3, &mut rng);
        let ones = deg.iter().filter(|&&k| k == 1).count() as f64 / 400.0;
        assert!((ones - 0.698).abs() < 0.05, "{ones}");
    }

    #[test]
    fn precision_properties() {
        let (id, delta) = build_precision(&EdgeSet::new(), 5, 1).unwrap();
        assert_eq!(*id, DMatrix::identity(5, 5));
        assert_eq!(delta, 0.0);

        let cfg = SimConfig { p: 60, ..SimConfig::default() };
        let g = generate_cluster_graph(&cfg).unwrap();
        let (om, delta) = build_precision(&g, 60, 2).unwrap();
        for &(i, j) in &g {
            assert!((0.5..=0.9).contains(&om[(i, j)].abs()));
        }
        assert!(delta >= 0.0);
        assert!(condition_number(&om).unwrap() < 60.0);
    }

    #[test]
    fn joint_model_invariants() {
        let cfg = SimConfig { p: 60, seed: 4, ..SimConfig::default() };
        let m = build_joint_model(&cfg).unwrap();
        let dim = cfg.dim();
        assert_eq!(m.dim(), dim);
        assert!(condition_number(&m.omega_joint).unwrap() < 2.0 * dim as f64);
        let cb = m.omega_joint.view((0, dim), (dim, dim));
        for j in 0..dim {
            for i in 0..dim {
                if i != j {
                    assert_eq!(cb[(i, j)], 0.0);
                }
            }
        }
        assert_eq!(m.cross_diag.iter().filter(|c| **c != 0.0).count(), dim / 2);
        for (&(i, j), &l) in &m.edge_labels {
            let (x, y) = (m.omega_x[(i, j)], m.omega_y[(i, j)]);
            match l {
                EdgeLabel::Common => assert!(x.abs() > TRUTH_ZERO_TOL && y.abs() > TRUTH_ZERO_TOL),
                _ => assert!((x - y).abs() > TRUTH_ZERO_TOL),
            }
        }
        // marginal precision is the inverse of the covariance block
        let sxx = m.sigma_joint.view((0, 0), (dim, dim)).into_owned();
        let prod = &sxx * &*m.omega_x;
        assert!((prod - DMatrix::identity(dim, dim)).amax() < 1e-8);
    }

    #[test]
    fn no_cross_means_marginal_equals_block() {
        let cfg = SimConfig { p: 40, cross_value: 0.0, seed: 7, ..SimConfig::default() };
        let m = build_joint_model(&cfg).unwrap();
        let dim = cfg.dim();
        assert_eq!(*m.omega_x, m.omega_joint.view((0, 0), (dim, dim)).into_owned());

        let nodiff = SimConfig { p: 40, diff_block_size: Some(0), seed: 7, ..SimConfig::default() };
        let m = build_joint_model(&nodiff).unwrap();
        assert!(m.differential_edges().is_empty());
    }

    #[test]
    fn invalid_alpha_rejected() {
        let cfg = SimConfig { alpha_powerlaw: 0.5, ..SimConfig::default() };
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("α > 1"), "{msg}");
    }

    #[test]
    fn sampling_matches_covariance() {
        let cfg = SimConfig { p: 8, n_clusters: 1, diff_block_size: Some(1), seed: 3, ..SimConfig::default() };
        let m = build_joint_model(&cfg).unwrap();
        let d = sample_paired_gaussian(&m, 100_000, 11).unwrap();
        let mut all = DMatrix::zeros(d.n(), 2 * d.p());
        all.columns_mut(0, d.p()).copy_from(&d.x);
        all.columns_mut(d.p(), d.p()).copy_from(&d.y);
        let cov = all.tr_mul(&all) / d.n() as f64;
        assert!((cov - &*m.sigma_joint).amax() < 0.02);
        assert_eq!(d, sample_paired_gaussian(&m, 100_000, 11).unwrap());
    }

    #[test]
    fn independent_conditions_uncorrelated() {
        let cfg = SimConfig { p: 20, cross_value: 0.0, seed: 2, ..SimConfig::default() };
        let m = build_joint_model(&cfg).unwrap();
        let n = 400;
        let d = sample_paired_gaussian(&m, n, 5).unwrap();
        let bound = 3.0 / (n as f64).sqrt();
        let mut over = 0;
        for i in 0..d.p() {
            let r = crate::stats::pearson(d.x.column(i).as_slice(), d.y.column(i).as_slice());
            if r.abs() > bound {
                over += 1;
            }
        }
        assert!(over <= 1);
    }

    #[test]
    fn toy_model_closed_form() {
        let m = toy_triangle_model(0.5).unwrap();
        assert_abs_diff_eq!(m.omega_x[(0, 1)], -(0.5 - 0.125) / (1.0 - (0.5 - 0.0625)), epsilon = 1e-12);
        assert_abs_diff_eq!(m.omega_x[(0, 1)], -0.6667, epsilon = 1e-4);
        assert_eq!(m.omega_x[(1, 2)], 0.0);
        assert_eq!(m.omega_x[(0, 3)], 0.0);
        let r = m.sigma_joint.view((0, 0), (4, 4)).into_owned();
        assert!((r * &*m.omega_x - DMatrix::identity(4, 4)).amax() < 1e-12);
        let zero = toy_triangle_model(0.0).unwrap();
        assert_eq!(*zero.omega_x, DMatrix::identity(4, 4));
    }
}
