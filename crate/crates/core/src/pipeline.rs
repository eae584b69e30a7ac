//! Weights, adaptive penalties, the joint fit and triangle pruning in one call.

use serde::{Deserialize, Serialize};

use crate::admm::{AdmmConfig, JointEstimate};
use crate::error::Result;
use crate::model::PairedDataset;
use crate::permutation::FrozenFit;
use crate::triangle::{prune_triangles, PruneReport, TriangleCorrection};
use crate::tuning::{alpha2_prime, tuned_solve, TuningConfig, TuningResult};
use crate::weights::{paired_weights, PsiEstimator, WeightMatrix};

/// Where the similarity weights come from.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSource {
    Independence,
    Paired(PsiEstimator),
    Given(WeightMatrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateOptions {
    pub admm: AdmmConfig,
    pub tuning: TuningConfig,
    pub weights: WeightSource,
    /// Pruning level and correction; `None` skips pruning.
    pub triangle: Option<(f64, TriangleCorrection)>,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        let tuning = TuningConfig::default();
        Self {
            admm: AdmmConfig::default(),
            tuning,
            weights: WeightSource::Paired(PsiEstimator::default()),
            triangle: Some((tuning.alpha1, TriangleCorrection::None)),
        }
    }
}

/// Edge counts of one estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeCounts {
    pub common: usize,
    pub x_only: usize,
    pub y_only: usize,
}

impl EdgeCounts {
    pub fn of(est: &JointEstimate) -> Self {
        Self { common: est.common_edges.len(), x_only: est.x_only_edges.len(), y_only: est.y_only_edges.len() }
    }
}

#[derive(Debug, Clone)]
pub struct EstimateOutcome {
    pub weights: WeightMatrix,
    pub tuning: TuningResult,
    pub unpruned: JointEstimate,
    pub pruned: Option<(JointEstimate, PruneReport)>,
}

impl EstimateOutcome {
    /// The pruned estimate when pruning ran, otherwise the raw fit.
    pub fn estimate(&self) -> &JointEstimate {
        self.pruned.as_ref().map_or(&self.unpruned, |(e, _)| e)
    }

    /// Frozen settings for permutation replicates of this fit.
    pub fn frozen(&self, admm: &AdmmConfig, triangle: Option<(f64, TriangleCorrection)>) -> FrozenFit {
        FrozenFit { admm: AdmmConfig { lambda1: self.unpruned.lambda1, lambda2: self.unpruned.lambda2, ..*admm }, triangle }
    }
}

pub fn resolve_weights(data: &PairedDataset, admm: &AdmmConfig, source: &WeightSource) -> Result<WeightMatrix> {
    match source {
        WeightSource::Independence => Ok(WeightMatrix::ones(data.p())),
        WeightSource::Paired(est) => paired_weights(data, admm.rho, admm.class_weight, *est),
        WeightSource::Given(v) => {
            if v.dim() != data.p() {
                return Err(crate::Error::DimensionMismatch(format!("weights are {0}x{0}, data has p = {1}", v.dim(), data.p())));
            }
            Ok(v.clone())
        }
    }
}

pub fn estimate(data: &PairedDataset, opts: &EstimateOptions) -> Result<EstimateOutcome> {
    opts.admm.validate()?;
    opts.tuning.validate()?;
    let v = resolve_weights(data, &opts.admm, &opts.weights)?;
    let (sx, sy) = data.correlations()?;
    let a2p = alpha2_prime(opts.tuning.alpha1, opts.tuning.alpha2, opts.tuning.mc_samples, opts.tuning.mc_seed)?;
    let (unpruned, tuning) = tuned_solve(&sx, &sy, &v, &opts.admm, &opts.tuning, a2p)?;
    let pruned = match opts.triangle {
        Some((alpha, corr)) => Some(prune_triangles(&unpruned, data, alpha, corr)?),
        None => None,
    };
    Ok(EstimateOutcome { weights: v, tuning, unpruned, pruned })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::{build_joint_model, sample_paired_gaussian, SimConfig};

    fn data() -> PairedDataset {
        let m = build_joint_model(&SimConfig { p: 20, seed: 3, ..Default::default() }).unwrap();
        sample_paired_gaussian(&m, 120, 9).unwrap()
    }

    #[test]
    fn pruning_only_removes_edges() {
        let out = estimate(&data(), &EstimateOptions::default()).unwrap();
        let (pruned, report) = out.pruned.as_ref().unwrap();
        let (a, b) = (EdgeCounts::of(&out.unpruned), EdgeCounts::of(pruned));
        assert!(b.common <= a.common && b.x_only + b.y_only <= a.x_only + a.y_only + report.x.removed.len() + report.y.removed.len());
        assert!(pruned.graph_x().is_subset(&out.unpruned.graph_x()));
        assert!(pruned.graph_y().is_subset(&out.unpruned.graph_y()));
    }

    #[test]
    fn no_pruning_returns_raw_fit() {
        let opts = EstimateOptions { triangle: None, ..Default::default() };
        let out = estimate(&data(), &opts).unwrap();
        assert!(out.pruned.is_none());
        assert_eq!(out.estimate(), &out.unpruned);
    }

    #[test]
    fn independence_gives_unit_weights() {
        let opts = EstimateOptions { weights: WeightSource::Independence, triangle: None, ..Default::default() };
        let out = estimate(&data(), &opts).unwrap();
        assert_eq!(out.weights, WeightMatrix::ones(out.weights.dim()));
    }

    #[test]
    fn given_weights_must_match() {
        let opts = EstimateOptions { weights: WeightSource::Given(WeightMatrix::ones(3)), ..Default::default() };
        assert!(matches!(estimate(&data(), &opts), Err(crate::Error::DimensionMismatch(_))));
    }
}
