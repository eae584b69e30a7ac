//! Paired-permutation null distribution of differential edge counts.
//!
//! Under `Ω_X = Ω_Y` the two rows of a subject are exchangeable. Each
//! replicate swaps the pair of every subject with probability ½ and refits
//! with the penalties and weights of the original fit frozen.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::admm::{wfgl_estimate, AdmmConfig, JointEstimate};
use crate::error::{Error, Result};
use crate::exec::map_indexed;
use crate::model::PairedDataset;
use crate::stats::quantile;
use crate::triangle::{prune_triangles, TriangleCorrection};
use crate::weights::WeightMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffCounts {
    pub x_only: usize,
    pub y_only: usize,
    pub total: usize,
}

impl DiffCounts {
    pub fn of(est: &JointEstimate) -> Self {
        let (x_only, y_only) = (est.x_only_edges.len(), est.y_only_edges.len());
        Self { x_only, y_only, total: x_only + y_only }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountQuantiles {
    pub q025: f64,
    pub q50: f64,
    pub q975: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountSummary<T> {
    pub x_only: T,
    pub y_only: T,
    pub total: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationSummary {
    pub replicate_counts: Vec<DiffCounts>,
    pub observed: DiffCounts,
    pub quantiles: CountSummary<CountQuantiles>,
    /// Fraction of successful replicates with a count at least the observed one.
    pub exceedance: CountSummary<f64>,
    pub failed: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub base_seed: u64,
}

/// Frozen settings of the original fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrozenFit {
    pub admm: AdmmConfig,
    /// Triangle pruning applied to the original fit, repeated on every replicate.
    pub triangle: Option<(f64, TriangleCorrection)>,
}

/// Swaps the two rows of each subject with probability ½.
pub fn paired_permute(data: &PairedDataset, seed: u64) -> PairedDataset {
    permute_with(data, &swap_pattern(data.n(), seed))
}

/// The swap indicators drawn by [`paired_permute`] for `n` subjects.
pub fn swap_pattern(n: usize, seed: u64) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_bool(0.5)).collect()
}

/// Swaps row `k` of `a` and `b` wherever `flips[k]` is set.
pub fn swap_rows(a: &mut DMatrix<f64>, b: &mut DMatrix<f64>, flips: &[bool]) {
    for (k, &swap) in flips.iter().enumerate().take(a.nrows()) {
        if swap {
            for j in 0..a.ncols() {
                std::mem::swap(&mut a[(k, j)], &mut b[(k, j)]);
            }
        }
    }
}

/// Applies an explicit swap pattern (`true` = swap subject `k`).
pub fn permute_with(data: &PairedDataset, flips: &[bool]) -> PairedDataset {
    let (mut x, mut y) = (data.x.clone(), data.y.clone());
    swap_rows(&mut x, &mut y, flips);
    PairedDataset { x, y, variable_names: data.variable_names.clone() }
}

fn quantiles_of(values: &[f64]) -> CountQuantiles {
    if values.is_empty() {
        return CountQuantiles { q025: f64::NAN, q50: f64::NAN, q975: f64::NAN };
    }
    CountQuantiles { q025: quantile(values, 0.025), q50: quantile(values, 0.5), q975: quantile(values, 0.975) }
}

fn exceedance(values: &[usize], observed: usize) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().filter(|&&c| c >= observed).count() as f64 / values.len() as f64
}

/// Summarizes replicate counts against the observed one.
pub fn summarize(replicates: Vec<DiffCounts>, observed: DiffCounts, failed: usize) -> PermutationSummary {
    let col = |f: fn(&DiffCounts) -> usize| -> Vec<usize> { replicates.iter().map(f).collect() };
    let (xs, ys, ts) = (col(|c| c.x_only), col(|c| c.y_only), col(|c| c.total));
    let as_f = |v: &[usize]| -> Vec<f64> { v.iter().map(|&c| c as f64).collect() };
    PermutationSummary {
        quantiles: CountSummary {
            x_only: quantiles_of(&as_f(&xs)),
            y_only: quantiles_of(&as_f(&ys)),
            total: quantiles_of(&as_f(&ts)),
        },
        exceedance: CountSummary {
            x_only: exceedance(&xs, observed.x_only),
            y_only: exceedance(&ys, observed.y_only),
            total: exceedance(&ts, observed.total),
        },
        replicate_counts: replicates,
        observed,
        failed,
        lambda1: f64::NAN,
        lambda2: f64::NAN,
        base_seed: 0,
    }
}

/// Refits `t_reps` permuted datasets (seeds `base_seed + r`) with the
/// penalties and weights of `fitted` frozen.
pub fn differential_count_distribution(
    data: &PairedDataset,
    fitted: &JointEstimate,
    v: &WeightMatrix,
    frozen: &FrozenFit,
    t_reps: usize,
    base_seed: u64,
) -> Result<PermutationSummary> {
    if t_reps < 1 {
        return Err(Error::InvalidConfig("permutation replicates must be >= 1".into()));
    }
    let cfg = AdmmConfig { lambda1: fitted.lambda1, lambda2: fitted.lambda2, ..frozen.admm };
    cfg.validate()?;
    let fits = map_indexed(t_reps, |r| -> Result<DiffCounts> {
        let perm = paired_permute(data, base_seed.wrapping_add(r as u64));
        let mut est = wfgl_estimate(&perm, v, &cfg)?;
        if let Some((alpha, corr)) = frozen.triangle {
            est = prune_triangles(&est, &perm, alpha, corr)?.0;
        }
        Ok(DiffCounts::of(&est))
    });
    let mut counts = Vec::with_capacity(t_reps);
    let mut failed = 0;
    for f in fits {
        match f {
            Ok(c) => counts.push(c),
            Err(_) => failed += 1,
        }
    }
    let mut summary = summarize(counts, DiffCounts::of(fitted), failed);
    summary.lambda1 = cfg.lambda1;
    summary.lambda2 = cfg.lambda2;
    summary.base_seed = base_seed;
    Ok(summary)
}
