//! Gene screening for paired expression data.
//!
//! Two filters: the adjusted squared correlation (AdCor) of each gene in
//! each condition against an empirical null built from simulated N(0, 1)
//! columns, and the sum of squared Fisher-transformed correlation
//! differences between conditions (T_SS) against a paired-permutation null.
//! P-values are BH adjusted and a gene is kept when any adjusted p-value
//! is below the threshold.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::map_indexed;
use crate::model::{fisher_z, sample_correlation, standardize_columns};
use crate::permutation::{swap_pattern, swap_rows};

pub const MIN_NULL_REPS: usize = 100;

/// `((n-1)/(n-2)) (p·SqCor - 1)/(p-1) - 1/(n-2)` from the sum of squared
/// correlations `sum_sq` over all `p` genes including the gene itself.
fn adcor_from_sum(sum_sq: f64, n: usize, p: usize) -> f64 {
    let (n, p) = (n as f64, p as f64);
    ((n - 1.0) / (n - 2.0)) * (sum_sq - 1.0) / (p - 1.0) - 1.0 / (n - 2.0)
}

fn check_adcor(data: &DMatrix<f64>, g: usize) -> Result<()> {
    if data.nrows() < 3 {
        return Err(Error::SampleTooSmall(data.nrows()));
    }
    if data.ncols() < 2 {
        return Err(Error::DimensionMismatch("AdCor needs at least 2 genes".into()));
    }
    if g >= data.ncols() {
        return Err(Error::DimensionMismatch(format!("gene index {g} out of range")));
    }
    Ok(())
}

/// Adjusted squared correlation of gene `g` with all genes.
pub fn adcor(data: &DMatrix<f64>, g: usize) -> Result<f64> {
    check_adcor(data, g)?;
    let z = standardize_columns(data)?;
    let n = z.nrows();
    let r = z.tr_mul(&z.column(g)) / (n as f64 - 1.0);
    let sum_sq: f64 = r.iter().enumerate().map(|(i, v)| if i == g { 1.0 } else { v * v }).sum();
    Ok(adcor_from_sum(sum_sq, n, data.ncols()))
}

/// AdCor of every gene.
pub fn adcor_all(data: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_adcor(data, 0)?;
    let r = sample_correlation(data)?;
    let (n, p) = (data.nrows(), data.ncols());
    Ok((0..p).map(|g| adcor_from_sum(r.column(g).norm_squared(), n, p)).collect())
}

/// `(1 + #{null >= observed}) / (b + 1)`.
pub fn empirical_pvalue(observed: f64, null: &[f64]) -> f64 {
    let exceed = null.iter().filter(|&&v| v >= observed).count();
    (1 + exceed) as f64 / (null.len() + 1) as f64
}

fn check_reps(b_reps: usize) -> Result<()> {
    if b_reps < MIN_NULL_REPS {
        return Err(Error::InvalidConfig(format!("null replicates must be >= {MIN_NULL_REPS}, got {b_reps}")));
    }
    Ok(())
}

fn null_column(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    let mean = v.mean();
    let c = v.add_scalar(-mean);
    let sd = (c.norm_squared() / (n as f64 - 1.0)).sqrt();
    c / sd
}

/// Null AdCor values of every gene: replicate `b` replaces each gene by the
/// same simulated column (seed `seed + b`) and correlates it with the
/// remaining genes. Returns a `b_reps × p` matrix.
pub fn adcor_null_matrix(data: &DMatrix<f64>, b_reps: usize, seed: u64) -> Result<DMatrix<f64>> {
    check_adcor(data, 0)?;
    let z = standardize_columns(data)?;
    let (n, p) = (z.nrows(), z.ncols());
    let rows = map_indexed(b_reps, |b| {
        let s = null_column(n, seed.wrapping_add(b as u64));
        let r = z.tr_mul(&s) / (n as f64 - 1.0);
        let total: f64 = r.norm_squared();
        (0..p).map(|g| adcor_from_sum(1.0 + total - r[g] * r[g], n, p)).collect::<Vec<_>>()
    });
    Ok(DMatrix::from_fn(b_reps, p, |b, g| rows[b][g]))
}

/// Empirical null p-value of AdCor for gene `g`.
pub fn adcor_null_pvalue(data: &DMatrix<f64>, g: usize, b_reps: usize, seed: u64) -> Result<f64> {
    check_adcor(data, g)?;
    check_reps(b_reps)?;
    let observed = adcor(data, g)?;
    let z = standardize_columns(data)?;
    let (n, p) = (z.nrows(), z.ncols());
    let null = map_indexed(b_reps, |b| {
        let s = null_column(n, seed.wrapping_add(b as u64));
        let r = z.tr_mul(&s) / (n as f64 - 1.0);
        adcor_from_sum(1.0 + r.norm_squared() - r[g] * r[g], n, p)
    });
    Ok(empirical_pvalue(observed, &null))
}

fn check_pair(data_t: &DMatrix<f64>, data_h: &DMatrix<f64>) -> Result<()> {
    if data_t.shape() != data_h.shape() {
        return Err(Error::DimensionMismatch("both conditions must be n x p with the same genes".into()));
    }
    if data_t.nrows() < 4 {
        return Err(Error::SampleTooSmall(data_t.nrows()));
    }
    if data_t.ncols() < 2 {
        return Err(Error::DimensionMismatch("T_SS needs at least 2 genes".into()));
    }
    Ok(())
}

fn t_ss_from_correlations(rt: &DMatrix<f64>, rh: &DMatrix<f64>, n: usize) -> Vec<f64> {
    let p = rt.nrows();
    let c = 2.0 * (n as f64 - 3.0) / (p as f64 - 1.0);
    (0..p)
        .map(|g| {
            let ss: f64 = (0..p)
                .filter(|&j| j != g)
                .map(|j| {
                    let d = fisher_z(rt[(j, g)]) - fisher_z(rh[(j, g)]);
                    d * d
                })
                .sum();
            c * ss
        })
        .collect()
}

/// `T_SS(g) = (2(n-3)/(p-1)) Σ_{j≠g} [g(r_T,jg) - g(r_H,jg)]²`.
pub fn t_ss(data_t: &DMatrix<f64>, data_h: &DMatrix<f64>, g: usize) -> Result<f64> {
    check_pair(data_t, data_h)?;
    if g >= data_t.ncols() {
        return Err(Error::DimensionMismatch(format!("gene index {g} out of range")));
    }
    Ok(t_ss_all(data_t, data_h)?[g])
}

/// T_SS of every gene.
pub fn t_ss_all(data_t: &DMatrix<f64>, data_h: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_pair(data_t, data_h)?;
    let rt = sample_correlation(data_t)?;
    let rh = sample_correlation(data_h)?;
    Ok(t_ss_from_correlations(&rt, &rh, data_t.nrows()))
}

/// Paired-permutation null of T_SS for every gene (replicate `b` uses
/// the swap pattern of seed `seed + b`). Returns a `b_reps × p` matrix.
pub fn t_ss_null_matrix(data_t: &DMatrix<f64>, data_h: &DMatrix<f64>, b_reps: usize, seed: u64) -> Result<DMatrix<f64>> {
    check_pair(data_t, data_h)?;
    let (n, p) = data_t.shape();
    let rows = map_indexed(b_reps, |b| -> Result<Vec<f64>> {
        let (mut t, mut h) = (data_t.clone(), data_h.clone());
        swap_rows(&mut t, &mut h, &swap_pattern(n, seed.wrapping_add(b as u64)));
        let rt = sample_correlation(&t)?;
        let rh = sample_correlation(&h)?;
        Ok(t_ss_from_correlations(&rt, &rh, n))
    });
    let rows: Vec<Vec<f64>> = rows.into_iter().collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(b_reps, p, |b, g| rows[b][g]))
}

/// Permutation p-value of T_SS for gene `g`.
pub fn t_ss_null_pvalue(data_t: &DMatrix<f64>, data_h: &DMatrix<f64>, g: usize, b_reps: usize, seed: u64) -> Result<f64> {
    check_reps(b_reps)?;
    let observed = t_ss(data_t, data_h, g)?;
    let null = t_ss_null_matrix(data_t, data_h, b_reps, seed)?;
    Ok(empirical_pvalue(observed, null.column(g).as_slice()))
}

/// Benjamini–Hochberg step-up adjustment, returned in input order.
pub fn bh_adjust(pvals: &[f64]) -> Vec<f64> {
    let m = pvals.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvals[a].total_cmp(&pvals[b]));
    let mut out = vec![0.0; m];
    let mut running = 1.0_f64;
    for (rank, &idx) in order.iter().enumerate().rev() {
        let adj = pvals[idx] * (m as f64 / (rank + 1) as f64);
        running = running.min(adj).min(1.0);
        out[idx] = running;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneScreen {
    pub gene: String,
    /// AdCor in the healthy condition.
    pub adcor_h: f64,
    /// AdCor in the tumor condition.
    pub adcor_t: f64,
    pub tss: f64,
    pub pval_h: f64,
    pub pval_t: f64,
    pub pval_d: f64,
    pub adj_h: f64,
    pub adj_t: f64,
    pub adj_d: f64,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScreenConfig {
    pub adcor_reps: usize,
    pub tss_reps: usize,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for ScreenConfig {
    fn default() -> Self {
        Self { adcor_reps: 1000, tss_reps: 199, threshold: 0.01, seed: 1 }
    }
}

impl ScreenConfig {
    pub fn validate(&self) -> Result<()> {
        check_reps(self.adcor_reps)?;
        check_reps(self.tss_reps)?;
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::InvalidConfig("screening threshold must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Runs both filters on every gene. `data_h`/`data_t` are the healthy and
/// tumor matrices with rows paired by subject.
pub fn screen(
    data_h: &DMatrix<f64>,
    data_t: &DMatrix<f64>,
    genes: &[String],
    cfg: &ScreenConfig,
) -> Result<Vec<GeneScreen>> {
    cfg.validate()?;
    check_pair(data_t, data_h)?;
    let p = data_h.ncols();
    if genes.len() != p {
        return Err(Error::DimensionMismatch(format!("{} gene names for {p} columns", genes.len())));
    }
    let obs_h = adcor_all(data_h)?;
    let obs_t = adcor_all(data_t)?;
    let obs_d = t_ss_all(data_t, data_h)?;
    // distinct seed streams for the three nulls
    let null_h = adcor_null_matrix(data_h, cfg.adcor_reps, cfg.seed)?;
    let null_t = adcor_null_matrix(data_t, cfg.adcor_reps, cfg.seed.wrapping_add(1 << 32))?;
    let null_d = t_ss_null_matrix(data_t, data_h, cfg.tss_reps, cfg.seed.wrapping_add(2 << 32))?;
    let pv = |obs: &[f64], null: &DMatrix<f64>| -> Vec<f64> {
        (0..p).map(|g| empirical_pvalue(obs[g], null.column(g).as_slice())).collect()
    };
    let (ph, pt, pd) = (pv(&obs_h, &null_h), pv(&obs_t, &null_t), pv(&obs_d, &null_d));
    let (ah, at, ad) = (bh_adjust(&ph), bh_adjust(&pt), bh_adjust(&pd));
    Ok((0..p)
        .map(|g| GeneScreen {
            gene: genes[g].clone(),
            adcor_h: obs_h[g],
            adcor_t: obs_t[g],
            tss: obs_d[g],
            pval_h: ph[g],
            pval_t: pt[g],
            pval_d: pd[g],
            adj_h: ah[g],
            adj_t: at[g],
            adj_d: ad[g],
            selected: ah[g] < cfg.threshold || at[g] < cfg.threshold || ad[g] < cfg.threshold,
        })
        .collect())
}

/// Indices of genes with any adjusted p-value below `threshold`.
pub fn select_genes(results: &[GeneScreen], threshold: f64) -> Vec<usize> {
    results
        .iter()
        .enumerate()
        .filter(|(_, r)| r.adj_h < threshold || r.adj_t < threshold || r.adj_d < threshold)
        .map(|(i, _)| i)
        .collect()
}
