//! ADMM solver for the weighted fused graphical lasso with two classes.
//!
//! Each iteration performs, for both conditions `m ∈ {X, Y}`:
//!
//! 1. `Ω_m = V f(D) Vᵀ` where `Ŝ_m = V D Vᵀ` and
//!    `f(d) = (w / 2ρ)(-d + sqrt(d² + 4ρ / w))`;
//! 2. the weighted fused shrinkage of `A'_m = Ω_m + U_m` (pairs with
//!    `v_ij |A'_X - A'_Y| <= λ₂/ρ` are set equal);
//! 3. elementwise soft-thresholding at `λ₁/ρ`;
//! 4. `U_m += Ω_m - A_m`, `Ŝ_m = S_m - (ρ/w)(A_m - U_m)`.
//!
//! Diagonals are never shrunk. Convergence is declared when the largest
//! entrywise change of `A_X` and `A_Y` between iterations drops below `tol`.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PairedDataset, SymmetricMatrix};
use crate::weights::WeightMatrix;

/// Unordered variable pair stored as `(i, j)` with `i < j` (0-based).
pub type Edge = (usize, usize);
pub type EdgeSet = BTreeSet<Edge>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdmmConfig {
    pub rho: f64,
    /// Plays the role of the class sample size in the regularized inverse.
    pub class_weight: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self { rho: 1.0, class_weight: 1.0, max_iter: 500, tol: 1e-4, lambda1: 0.0, lambda2: 0.0 }
    }
}

impl AdmmConfig {
    pub fn with_lambdas(lambda1: f64, lambda2: f64) -> Self {
        Self { lambda1, lambda2, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::InvalidConfig("rho must be > 0".into()));
        }
        if !(self.class_weight > 0.0) || !self.class_weight.is_finite() {
            return Err(Error::InvalidConfig("class_weight must be > 0".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig("tol must be > 0".into()));
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidConfig("max_iter must be >= 1".into()));
        }
        if !(self.lambda1 >= 0.0) || !(self.lambda2 >= 0.0) {
            return Err(Error::InvalidConfig("lambda1 and lambda2 must be >= 0".into()));
        }
        Ok(())
    }
}

/// Primal and dual iterates, usable as a warm start for a nearby problem.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub a_x: DMatrix<f64>,
    pub a_y: DMatrix<f64>,
    pub u_x: DMatrix<f64>,
    pub u_y: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointEstimate {
    pub omega_x: SymmetricMatrix,
    pub omega_y: SymmetricMatrix,
    pub iterations: usize,
    pub converged: bool,
    pub common_edges: EdgeSet,
    pub x_only_edges: EdgeSet,
    pub y_only_edges: EdgeSet,
    /// Penalties used in the final iteration.
    pub lambda1: f64,
    pub lambda2: f64,
    pub state: AdmmState,
}

impl JointEstimate {
    pub fn p(&self) -> usize {
        self.omega_x.dim()
    }

    pub fn differential_count(&self) -> usize {
        self.x_only_edges.len() + self.y_only_edges.len()
    }

    pub fn differential_edges(&self) -> EdgeSet {
        self.x_only_edges.union(&self.y_only_edges).copied().collect()
    }

    /// Off-diagonal support of one condition.
    pub fn graph_x(&self) -> EdgeSet {
        support(&self.omega_x)
    }

    pub fn graph_y(&self) -> EdgeSet {
        support(&self.omega_y)
    }

    /// Recomputes the three edge sets from the current matrices.
    pub fn reclassify(&mut self) {
        let (c, x, y) = classify_edges(&self.omega_x, &self.omega_y);
        self.common_edges = c;
        self.x_only_edges = x;
        self.y_only_edges = y;
    }
}

/// Nonzero off-diagonal pattern of a matrix.
pub fn support(m: &DMatrix<f64>) -> EdgeSet {
    let p = m.nrows();
    let mut out = EdgeSet::new();
    for j in 0..p {
        for i in 0..j {
            if m[(i, j)] != 0.0 {
                out.insert((i, j));
            }
        }
    }
    out
}

/// Splits pairs into common (both nonzero, bitwise equal), X-only and
/// Y-only (entries differ). A pair nonzero in both conditions with
/// different values is attributed to the condition with the larger
/// magnitude.
pub fn classify_edges(ox: &DMatrix<f64>, oy: &DMatrix<f64>) -> (EdgeSet, EdgeSet, EdgeSet) {
    let p = ox.nrows();
    let (mut common, mut xo, mut yo) = (EdgeSet::new(), EdgeSet::new(), EdgeSet::new());
    for j in 0..p {
        for i in 0..j {
            let (x, y) = (ox[(i, j)], oy[(i, j)]);
            if x == y {
                if x != 0.0 {
                    common.insert((i, j));
                }
            } else if y == 0.0 || (x != 0.0 && x.abs() >= y.abs()) {
                xo.insert((i, j));
            } else {
                yo.insert((i, j));
            }
        }
    }
    (common, xo, yo)
}

/// Stateful penalty schedule queried twice per iteration.
pub trait PenaltyRule {
    /// `λ₂` given the dense estimates `A'_m = Ω_m + U_m` entering the fusion step.
    fn similarity(&mut self, iteration: usize, ax: &DMatrix<f64>, ay: &DMatrix<f64>, v: &WeightMatrix) -> f64;
    /// `λ₁` given the fused estimates entering the sparsity step.
    fn sparsity(&mut self, iteration: usize, ax: &DMatrix<f64>, ay: &DMatrix<f64>) -> f64;
}

/// Constant penalties.
#[derive(Debug, Clone, Copy)]
pub struct FixedPenalties {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl PenaltyRule for FixedPenalties {
    fn similarity(&mut self, _: usize, _: &DMatrix<f64>, _: &DMatrix<f64>, _: &WeightMatrix) -> f64 {
        self.lambda2
    }

    fn sparsity(&mut self, _: usize, _: &DMatrix<f64>, _: &DMatrix<f64>) -> f64 {
        self.lambda1
    }
}

/// Eigenvalue map of the regularized inverse.
#[inline]
pub fn regularized_eigenvalue(d: f64, rho: f64, weight: f64) -> f64 {
    // Rationalized form of (w/2ρ)(-d + sqrt(d² + 4ρ/w)); avoids cancellation for d ≫ sqrt(ρ/w).
    let c = 4.0 * rho / weight;
    let root = (d * d + c).sqrt();
    if d >= 0.0 {
        (weight / (2.0 * rho)) * c / (d + root)
    } else {
        (weight / (2.0 * rho)) * (root - d)
    }
}

pub fn sym_eigen(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let eig = m
        .clone()
        .try_symmetric_eigen(1e-14, 10_000)
        .ok_or(Error::EigenDecompositionFailure)?;
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenDecompositionFailure);
    }
    Ok((eig.eigenvalues.iter().copied().collect(), eig.eigenvectors))
}

fn regularized_inverse_raw(s: &DMatrix<f64>, rho: f64, weight: f64) -> Result<DMatrix<f64>> {
    let (vals, mut vecs) = sym_eigen(s)?;
    let basis = vecs.clone();
    for (k, d) in vals.iter().enumerate() {
        let f = regularized_eigenvalue(*d, rho, weight);
        vecs.column_mut(k).scale_mut(f);
    }
    let mut out = vecs * basis.transpose();
    symmetrize_in_place(&mut out);
    Ok(out)
}

/// Regularized inverse `V f(D) Vᵀ` of a symmetric matrix; always positive definite.
pub fn regularized_inverse(s: &DMatrix<f64>, rho: f64, weight: f64) -> Result<SymmetricMatrix> {
    if !s.is_square() {
        return Err(Error::DimensionMismatch("regularized inverse needs a square matrix".into()));
    }
    if !(rho > 0.0) || !(weight > 0.0) {
        return Err(Error::InvalidConfig("rho and weight must be > 0".into()));
    }
    Ok(SymmetricMatrix::symmetrize(regularized_inverse_raw(s, rho, weight)?))
}

fn symmetrize_in_place(m: &mut DMatrix<f64>) {
    let p = m.nrows();
    for j in 0..p {
        for i in 0..j {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// In-place fused shrinkage of the off-diagonal pairs with threshold `t`.
fn fused_shrink_in_place(ax: &mut DMatrix<f64>, ay: &mut DMatrix<f64>, v: &DMatrix<f64>, t: f64) {
    let p = ax.nrows();
    for j in 0..p {
        for i in 0..j {
            let (x, y) = (ax[(i, j)], ay[(i, j)]);
            let w = v[(i, j)];
            let diff = x - y;
            let (nx, ny) = if w * diff.abs() <= t {
                let avg = 0.5 * (x + y);
                (avg, avg)
            } else {
                let shift = t / (2.0 * w);
                if diff > 0.0 {
                    (x - shift, y + shift)
                } else {
                    (x + shift, y - shift)
                }
            };
            ax[(i, j)] = nx;
            ax[(j, i)] = nx;
            ay[(i, j)] = ny;
            ay[(j, i)] = ny;
        }
    }
}

/// Weighted fused shrinkage with threshold `λ₂/ρ`.
///
/// Pairs with `v_ij |ax_ij - ay_ij| <= λ₂/ρ` are replaced by their average.
/// Otherwise both entries move `λ₂ / (2ρ v_ij)` toward each other.
pub fn fused_shrink(
    ax: &DMatrix<f64>,
    ay: &DMatrix<f64>,
    v: &WeightMatrix,
    lambda2: f64,
    rho: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let p = ax.nrows();
    if ax.shape() != ay.shape() || !ax.is_square() || v.dim() != p {
        return Err(Error::DimensionMismatch("fused shrinkage inputs must share one square shape".into()));
    }
    for j in 0..p {
        for i in 0..j {
            if !(v.get(i, j) > 0.0) {
                return Err(Error::NonPositiveWeight(i, j));
            }
        }
    }
    let (mut ox, mut oy) = (ax.clone(), ay.clone());
    fused_shrink_in_place(&mut ox, &mut oy, v, lambda2 / rho);
    Ok((ox, oy))
}

fn soft_threshold_in_place(a: &mut DMatrix<f64>, t: f64) {
    let p = a.nrows();
    for j in 0..p {
        for i in 0..p {
            if i != j {
                let x = a[(i, j)];
                let mag = x.abs() - t;
                a[(i, j)] = if mag > 0.0 { x.signum() * mag } else { 0.0 };
            }
        }
    }
}

/// Off-diagonal soft-thresholding `sign(a)(|a| - λ₁)₊`; diagonal unchanged.
pub fn soft_threshold(a: &DMatrix<f64>, lambda1: f64) -> DMatrix<f64> {
    let mut out = a.clone();
    soft_threshold_in_place(&mut out, lambda1);
    out
}

/// Fixed-penalty estimate from paired data.
pub fn wfgl_estimate(data: &PairedDataset, v: &WeightMatrix, cfg: &AdmmConfig) -> Result<JointEstimate> {
    let mut rule = FixedPenalties { lambda1: cfg.lambda1, lambda2: cfg.lambda2 };
    wfgl_estimate_with(data, v, cfg, &mut rule)
}

/// Estimate from paired data with a caller-supplied penalty schedule.
pub fn wfgl_estimate_with(
    data: &PairedDataset,
    v: &WeightMatrix,
    cfg: &AdmmConfig,
    rule: &mut dyn PenaltyRule,
) -> Result<JointEstimate> {
    let (sx, sy) = data.correlations()?;
    solve(&sx, &sy, v, cfg, rule, None)
}

/// Core ADMM loop on precomputed correlation matrices.
pub fn solve(
    sx: &DMatrix<f64>,
    sy: &DMatrix<f64>,
    v: &WeightMatrix,
    cfg: &AdmmConfig,
    rule: &mut dyn PenaltyRule,
    warm: Option<&AdmmState>,
) -> Result<JointEstimate> {
    cfg.validate()?;
    let p = sx.nrows();
    if sx.shape() != sy.shape() || !sx.is_square() {
        return Err(Error::DimensionMismatch("both correlation matrices must be p x p".into()));
    }
    if v.dim() != p {
        return Err(Error::DimensionMismatch(format!("weights are {}x{}, data has p = {p}", v.dim(), v.dim())));
    }
    let (rho, w) = (cfg.rho, cfg.class_weight);
    let step = rho / w;

    let (mut u_x, mut u_y, mut prev_x, mut prev_y) = match warm {
        Some(st) => (st.u_x.clone(), st.u_y.clone(), Some(st.a_x.clone()), Some(st.a_y.clone())),
        None => (DMatrix::zeros(p, p), DMatrix::zeros(p, p), None, None),
    };
    let mut s_hat_x = sx.clone();
    let mut s_hat_y = sy.clone();
    if let (Some(ax), Some(ay)) = (&prev_x, &prev_y) {
        s_hat_x = sx - (ax - &u_x) * step;
        s_hat_y = sy - (ay - &u_y) * step;
    }

    let mut converged = false;
    let mut iterations = 0;
    let (mut lambda1, mut lambda2) = (0.0, 0.0);
    let mut a_x = DMatrix::zeros(p, p);
    let mut a_y = DMatrix::zeros(p, p);
    for t in 0..cfg.max_iter {
        iterations = t + 1;
        let omega_x = regularized_inverse_raw(&s_hat_x, rho, w)?;
        let omega_y = regularized_inverse_raw(&s_hat_y, rho, w)?;

        a_x = &omega_x + &u_x;
        a_y = &omega_y + &u_y;
        lambda2 = rule.similarity(t, &a_x, &a_y, v);
        fused_shrink_in_place(&mut a_x, &mut a_y, v, lambda2 / rho);
        lambda1 = rule.sparsity(t, &a_x, &a_y);
        soft_threshold_in_place(&mut a_x, lambda1 / rho);
        soft_threshold_in_place(&mut a_y, lambda1 / rho);

        u_x += &omega_x - &a_x;
        u_y += &omega_y - &a_y;
        s_hat_x = sx - (&a_x - &u_x) * step;
        s_hat_y = sy - (&a_y - &u_y) * step;

        if let (Some(px), Some(py)) = (&prev_x, &prev_y) {
            let change = (&a_x - px).amax().max((&a_y - py).amax());
            if change < cfg.tol {
                converged = true;
                break;
            }
        }
        prev_x = Some(a_x.clone());
        prev_y = Some(a_y.clone());
    }

    let state = AdmmState { a_x: a_x.clone(), a_y: a_y.clone(), u_x, u_y };
    let omega_x = SymmetricMatrix::symmetrize(a_x);
    let omega_y = SymmetricMatrix::symmetrize(a_y);
    let (common_edges, x_only_edges, y_only_edges) = classify_edges(&omega_x, &omega_y);
    Ok(JointEstimate {
        omega_x,
        omega_y,
        iterations,
        converged,
        common_edges,
        x_only_edges,
        y_only_edges,
        lambda1,
        lambda2,
        state,
    })
}
