//! Triangle-motif test and pruning.
//!
//! The regularized inverse tends to add the missing third edge to pairs of
//! edges sharing a node. For every estimated triangle the weakest edge (the
//! smallest absolute Fisher-transformed partial correlation from the 3×3
//! sample correlation of the three nodes) is tested with
//! `p = 2 - 2Φ(sqrt(n - 5) g')`. An edge tested in several triangles keeps
//! its smallest p-value; edges whose p-value exceeds `alpha` are removed.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};

use crate::admm::{support, Edge, EdgeSet, JointEstimate};
use crate::error::{Error, Result};
use crate::exec::map_indexed;
use crate::model::{fisher_z, sample_correlation, PairedDataset};
use crate::stats::normal_cdf;

pub type Triangle = (usize, usize, usize);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleTestResult {
    pub triangle: Triangle,
    pub weakest_edge: Edge,
    pub g_min: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TriangleCorrection {
    #[default]
    None,
    /// Benjamini–Hochberg over the tested weakest edges of one condition.
    Bh,
}

impl std::str::FromStr for TriangleCorrection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "bh" => Ok(Self::Bh),
            other => Err(Error::InvalidConfig(format!("unknown triangle correction '{other}' (expected none or bh)"))),
        }
    }
}

/// All node triples `i < j < k` whose three edges are present.
pub fn enumerate_triangles(edges: &EdgeSet, p: usize) -> Vec<Triangle> {
    let mut higher: Vec<Vec<usize>> = vec![Vec::new(); p];
    for &(i, j) in edges {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        higher[a].push(b);
    }
    for list in &mut higher {
        list.sort_unstable();
        list.dedup();
    }
    let mut out = Vec::new();
    for i in 0..p {
        for (idx, &j) in higher[i].iter().enumerate() {
            // k must be adjacent to both i and j with k > j
            let (a, b) = (&higher[i][idx + 1..], &higher[j]);
            let (mut s, mut t) = (0, 0);
            while s < a.len() && t < b.len() {
                match a[s].cmp(&b[t]) {
                    std::cmp::Ordering::Less => s += 1,
                    std::cmp::Ordering::Greater => t += 1,
                    std::cmp::Ordering::Equal => {
                        out.push((i, j, a[s]));
                        s += 1;
                        t += 1;
                    }
                }
            }
        }
    }
    out
}

/// Test of one triangle given the full sample correlation matrix of a condition.
pub fn triangle_test_from_correlation(r: &DMatrix<f64>, tri: Triangle, n: usize) -> Result<TriangleTestResult> {
    if n <= 5 {
        return Err(Error::SampleTooSmall(n));
    }
    let idx = [tri.0, tri.1, tri.2];
    let sub = Matrix3::from_fn(|a, b| r[(idx[a], idx[b])]);
    let inv = sub.try_inverse().ok_or(Error::SingularSubmatrix(tri))?;
    if (0..3).any(|a| !(inv[(a, a)] > 0.0) || !inv[(a, a)].is_finite()) {
        return Err(Error::SingularSubmatrix(tri));
    }
    let mut best = (f64::INFINITY, (idx[0], idx[1]));
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        let w = -inv[(a, b)] / (inv[(a, a)] * inv[(b, b)]).sqrt();
        let g = fisher_z(w).abs();
        if g < best.0 {
            best = (g, (idx[a], idx[b]));
        }
    }
    let (g_min, weakest_edge) = best;
    let p_value = (2.0 - 2.0 * normal_cdf(((n - 5) as f64).sqrt() * g_min)).clamp(0.0, 1.0);
    Ok(TriangleTestResult { triangle: tri, weakest_edge, g_min, p_value })
}

/// Test on raw `n × 3` observations of the three nodes (columns in triangle order).
pub fn triangle_weakest_pvalue(data_condition: &DMatrix<f64>, n: usize) -> Result<TriangleTestResult> {
    if data_condition.ncols() != 3 {
        return Err(Error::DimensionMismatch("triangle test needs exactly 3 columns".into()));
    }
    if n <= 5 {
        return Err(Error::SampleTooSmall(n));
    }
    let r = sample_correlation(data_condition)?;
    triangle_test_from_correlation(&r, (0, 1, 2), n)
}

/// Outcome of pruning one condition's graph.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConditionPrune {
    pub triangles: usize,
    /// Smallest (possibly adjusted) p-value of every edge that was the weakest edge of a triangle.
    pub weakest: BTreeMap<Edge, f64>,
    pub removed: EdgeSet,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PruneReport {
    pub x: ConditionPrune,
    pub y: ConditionPrune,
}

/// Minimum p-value per weakest edge over all triangles of `graph`.
pub fn weakest_edge_pvalues(
    graph: &EdgeSet,
    corr: &DMatrix<f64>,
    n: usize,
    correction: TriangleCorrection,
) -> Result<(usize, BTreeMap<Edge, f64>)> {
    let tris = enumerate_triangles(graph, corr.nrows());
    let tests = map_indexed(tris.len(), |k| triangle_test_from_correlation(corr, tris[k], n));
    let mut min_p: BTreeMap<Edge, f64> = BTreeMap::new();
    for t in tests {
        let t = t?;
        let e = min_p.entry(t.weakest_edge).or_insert(1.0);
        *e = e.min(t.p_value);
    }
    if correction == TriangleCorrection::Bh && !min_p.is_empty() {
        let raw: Vec<f64> = min_p.values().copied().collect();
        let adj = crate::screening::bh_adjust(&raw);
        for (v, a) in min_p.values_mut().zip(adj) {
            *v = a;
        }
    }
    Ok((tris.len(), min_p))
}

fn prune_condition(
    omega: &mut DMatrix<f64>,
    corr: &DMatrix<f64>,
    n: usize,
    alpha: f64,
    correction: TriangleCorrection,
) -> Result<ConditionPrune> {
    let graph = support(omega);
    let (triangles, weakest) = weakest_edge_pvalues(&graph, corr, n, correction)?;
    let mut removed = EdgeSet::new();
    for (&(i, j), &p) in &weakest {
        if p > alpha {
            omega[(i, j)] = 0.0;
            omega[(j, i)] = 0.0;
            removed.insert((i, j));
        }
    }
    Ok(ConditionPrune { triangles, weakest, removed })
}

/// Removes weakest triangle edges whose smallest p-value exceeds `alpha`, in
/// each condition separately, then reclassifies common and differential edges.
pub fn prune_triangles(
    estimate: &JointEstimate,
    data: &PairedDataset,
    alpha: f64,
    correction: TriangleCorrection,
) -> Result<(JointEstimate, PruneReport)> {
    if data.p() != estimate.p() {
        return Err(Error::DimensionMismatch("estimate and data differ in p".into()));
    }
    let (rx, ry) = data.correlations()?;
    prune_with_correlations(estimate, &rx, &ry, data.n(), alpha, correction)
}

/// As [`prune_triangles`] with precomputed sample correlations.
pub fn prune_with_correlations(
    estimate: &JointEstimate,
    rx: &DMatrix<f64>,
    ry: &DMatrix<f64>,
    n: usize,
    alpha: f64,
    correction: TriangleCorrection,
) -> Result<(JointEstimate, PruneReport)> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidConfig(format!("triangle alpha must be in [0, 1], got {alpha}")));
    }
    let mut ox = estimate.omega_x.clone().into_inner();
    let mut oy = estimate.omega_y.clone().into_inner();
    let x = prune_condition(&mut ox, rx, n, alpha, correction)?;
    let y = prune_condition(&mut oy, ry, n, alpha, correction)?;
    let mut out = estimate.clone();
    out.omega_x = crate::model::SymmetricMatrix::symmetrize(ox);
    out.omega_y = crate::model::SymmetricMatrix::symmetrize(oy);
    out.reclassify();
    Ok((out, PruneReport { x, y }))
}
