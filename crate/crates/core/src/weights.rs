//! Similarity-penalty weights that account for the pairing between the two
//! conditions.
//!
//! For each pair `(i, j)` the weight is `v_ij = (1 - ψ_ij)^{-1/2}`, where
//! `ψ_ij` is the correlation between the Fisher-transformed partial
//! correlation estimates of the two conditions. With `ψ ≡ 0` all weights are
//! one and the estimator reduces to the unweighted fused graphical lasso.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{scale_to_partial_correlation, standardize_columns, PairedDataset, PartialCorrelationMatrix};

/// Bound on `|ψ_ij|`; keeps weights in `[(1.9)^{-1/2}, (0.1)^{-1/2}]`.
pub const PSI_CLAMP: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct PsiMatrix(DMatrix<f64>);

impl PsiMatrix {
    /// Clamps entries to `[-PSI_CLAMP, PSI_CLAMP]`; the diagonal is set to 0.
    pub fn from_entries(mut m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch("psi matrix must be square".into()));
        }
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                m[(i, j)] = if i == j { 0.0 } else { clamp_psi(m[(i, j)]) };
            }
        }
        Ok(Self(m))
    }

    pub fn zeros(p: usize) -> Self {
        Self(DMatrix::zeros(p, p))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Upper-triangle entries in column-major `i < j` order.
    pub fn upper_triangle(&self) -> Vec<f64> {
        upper_triangle(&self.0)
    }
}

impl Deref for PsiMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

pub(crate) fn upper_triangle(m: &DMatrix<f64>) -> Vec<f64> {
    let p = m.nrows();
    let mut out = Vec::with_capacity(p * (p.saturating_sub(1)) / 2);
    for j in 0..p {
        for i in 0..j {
            out.push(m[(i, j)]);
        }
    }
    out
}

fn clamp_psi(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(-PSI_CLAMP, PSI_CLAMP)
    }
}

/// Symmetric positive weights on the similarity penalty, unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix(DMatrix<f64>);

impl WeightMatrix {
    pub fn ones(p: usize) -> Self {
        Self(DMatrix::from_element(p, p, 1.0))
    }

    /// Validates symmetry and positivity; the diagonal is forced to one.
    pub fn from_entries(mut m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch("weight matrix must be square".into()));
        }
        let p = m.nrows();
        for i in 0..p {
            m[(i, i)] = 1.0;
            for j in (i + 1)..p {
                let (a, b) = (m[(i, j)], m[(j, i)]);
                if !(a > 0.0 && a.is_finite()) {
                    return Err(Error::NonPositiveWeight(i, j));
                }
                if (a - b).abs() > 1e-12 * a.abs().max(1.0) {
                    return Err(Error::InvalidConfig(format!("weight matrix not symmetric at ({i}, {j})")));
                }
                m[(j, i)] = a;
            }
        }
        Ok(Self(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }
}

impl Deref for WeightMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Which estimator of ψ feeds the weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsiEstimator {
    /// `ψ ≡ 0`: unit weights.
    Independence,
    RegBased,
    #[default]
    RegBasedSim,
}

/// Cross-condition partial correlation of each variable with itself:
/// the correlation between the regression residuals of `X_i` on `X_{-i}` and
/// of `Y_i` on `Y_{-i}`, with coefficients `β_m = -(Ω_m)_{i,-i} / (Ω_m)_{ii}`.
pub fn estimate_cross_partial_diag(
    data: &PairedDataset,
    omega_x: &DMatrix<f64>,
    omega_y: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    let p = data.p();
    if omega_x.shape() != (p, p) || omega_y.shape() != (p, p) {
        return Err(Error::DimensionMismatch("precision matrices do not match the data".into()));
    }
    for i in 0..p {
        if !(omega_x[(i, i)] > 0.0) || !(omega_y[(i, i)] > 0.0) {
            return Err(Error::NonPositiveDiagonal(i));
        }
    }
    let zx = standardize_columns(&data.x)?;
    let zy = standardize_columns(&data.y)?;
    // Column i of Z Ω is Ω_ii times the residual of variable i.
    let rx = &zx * omega_x;
    let ry = &zy * omega_y;
    let n = data.n() as f64;
    let mut out = DVector::zeros(p);
    for i in 0..p {
        let a = rx.column(i);
        let b = ry.column(i);
        let (ma, mb) = (a.sum() / n, b.sum() / n);
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for (x, y) in a.iter().zip(b.iter()) {
            sab += (x - ma) * (y - mb);
            saa += (x - ma) * (x - ma);
            sbb += (y - mb) * (y - mb);
        }
        let scale_a = a.amax().max(1e-300);
        let scale_b = b.amax().max(1e-300);
        if !(saa.sqrt() > 1e-12 * scale_a * n.sqrt()) || !(sbb.sqrt() > 1e-12 * scale_b * n.sqrt()) {
            return Err(Error::ZeroResidualVariance(i));
        }
        out[i] = (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0);
    }
    Ok(out)
}

fn check_psi_inputs(w_x: &PartialCorrelationMatrix, w_y: &PartialCorrelationMatrix, p: usize) -> Result<()> {
    if w_x.dim() != p || w_y.dim() != p {
        return Err(Error::DimensionMismatch("partial correlation matrices and cross diagonal differ in size".into()));
    }
    Ok(())
}

fn denominator(wx: f64, wy: f64) -> f64 {
    ((1.0 - wx * wx) * (1.0 - wy * wy)).max(0.0).sqrt()
}

fn build_psi(p: usize, f: impl Fn(usize, usize) -> f64) -> PsiMatrix {
    let mut m = DMatrix::zeros(p, p);
    for j in 0..p {
        for i in 0..j {
            let v = clamp_psi(f(i, j));
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    PsiMatrix(m)
}

/// Regression-based estimator under diagonal cross dependence:
/// `[c_i c_j + w_X w_Y (c_i² + c_j²)/2] / sqrt((1 - w_X²)(1 - w_Y²))`.
pub fn psi_reg_based(
    w_x: &PartialCorrelationMatrix,
    w_y: &PartialCorrelationMatrix,
    w_xy_diag: &DVector<f64>,
) -> Result<PsiMatrix> {
    let p = w_xy_diag.len();
    check_psi_inputs(w_x, w_y, p)?;
    let c = w_xy_diag;
    Ok(build_psi(p, |i, j| {
        let (wx, wy) = (w_x.get(i, j), w_y.get(i, j));
        (c[i] * c[j] + wx * wy * (c[i] * c[i] + c[j] * c[j]) / 2.0) / denominator(wx, wy)
    }))
}

/// Simplified regression-based estimator `c_i c_j / sqrt((1 - w_X²)(1 - w_Y²))`.
pub fn psi_reg_based_sim(
    w_x: &PartialCorrelationMatrix,
    w_y: &PartialCorrelationMatrix,
    w_xy_diag: &DVector<f64>,
) -> Result<PsiMatrix> {
    let p = w_xy_diag.len();
    check_psi_inputs(w_x, w_y, p)?;
    let c = w_xy_diag;
    Ok(build_psi(p, |i, j| {
        c[i] * c[j] / denominator(w_x.get(i, j), w_y.get(i, j))
    }))
}

/// Asymptotic ψ for a general (not necessarily diagonal) cross partial
/// correlation matrix `w_XY` (rows: X variables, columns: Y variables).
pub fn psi_full_asymptotic(
    w_x: &PartialCorrelationMatrix,
    w_y: &PartialCorrelationMatrix,
    w_xy: &DMatrix<f64>,
) -> Result<PsiMatrix> {
    let p = w_xy.nrows();
    if !w_xy.is_square() {
        return Err(Error::DimensionMismatch("cross partial correlation matrix must be square".into()));
    }
    check_psi_inputs(w_x, w_y, p)?;
    Ok(build_psi(p, |i, j| {
        let (wx, wy) = (w_x.get(i, j), w_y.get(i, j));
        let (cii, cjj, cij, cji) = (w_xy[(i, i)], w_xy[(j, j)], w_xy[(i, j)], w_xy[(j, i)]);
        let num = cii * cjj + cij * cji + wx * wy * (cii * cii + cjj * cjj + cij * cij + cji * cji) / 2.0
            - (wx * (wx * cij + cji * wy) + wy * (cji * cii + cjj * cij));
        num / denominator(wx, wy)
    }))
}

/// `v_ij = (1 - ψ_ij)^{-1/2}` with unit diagonal.
pub fn weights_from_psi(psi: &PsiMatrix) -> WeightMatrix {
    let p = psi.dim();
    let m = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { (1.0 - psi.get(i, j)).powf(-0.5) });
    WeightMatrix(m)
}

/// First-iteration ψ estimate from data: dense regularized inverses of the
/// two correlation matrices, their partial correlations and the residual
/// cross correlations.
pub fn estimate_psi(
    data: &PairedDataset,
    rho: f64,
    class_weight: f64,
    estimator: PsiEstimator,
) -> Result<PsiMatrix> {
    let p = data.p();
    if estimator == PsiEstimator::Independence {
        return Ok(PsiMatrix::zeros(p));
    }
    let (sx, sy) = data.correlations()?;
    let ox = crate::admm::regularized_inverse(&sx, rho, class_weight)?;
    let oy = crate::admm::regularized_inverse(&sy, rho, class_weight)?;
    let wx = scale_to_partial_correlation(&ox)?;
    let wy = scale_to_partial_correlation(&oy)?;
    let c = estimate_cross_partial_diag(data, &ox, &oy)?;
    match estimator {
        PsiEstimator::RegBased => psi_reg_based(&wx, &wy, &c),
        PsiEstimator::RegBasedSim => psi_reg_based_sim(&wx, &wy, &c),
        PsiEstimator::Independence => unreachable!(),
    }
}

/// Convenience: weights for data under the chosen estimator.
pub fn paired_weights(data: &PairedDataset, rho: f64, class_weight: f64, estimator: PsiEstimator) -> Result<WeightMatrix> {
    Ok(weights_from_psi(&estimate_psi(data, rho, class_weight, estimator)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pc2(w: f64) -> PartialCorrelationMatrix {
        PartialCorrelationMatrix::from_entries(DMatrix::from_row_slice(2, 2, &[1.0, w, w, 1.0])).unwrap()
    }

    #[test]
    fn reg_based_examples() {
        let zero = DVector::from_vec(vec![0.0, 0.0]);
        assert_eq!(psi_reg_based(&pc2(0.3), &pc2(0.2), &zero).unwrap().get(0, 1), 0.0);
        let c = DVector::from_vec(vec![0.6, 0.6]);
        assert_abs_diff_eq!(psi_reg_based(&pc2(0.5), &pc2(0.5), &c).unwrap().get(0, 1), 0.6, epsilon = 1e-12);
        let one = DVector::from_vec(vec![1.0, 1.0]);
        assert_eq!(psi_reg_based(&pc2(0.0), &pc2(0.0), &one).unwrap().get(0, 1), 0.9);
    }

    #[test]
    fn reg_based_sim_examples() {
        let zero = DVector::from_vec(vec![0.0, 0.0]);
        assert_eq!(psi_reg_based_sim(&pc2(0.3), &pc2(0.2), &zero).unwrap().get(0, 1), 0.0);
        let c = DVector::from_vec(vec![0.6, 0.6]);
        assert_abs_diff_eq!(psi_reg_based_sim(&pc2(0.0), &pc2(0.0), &c).unwrap().get(0, 1), 0.36, epsilon = 1e-12);
        assert_abs_diff_eq!(psi_reg_based_sim(&pc2(0.5), &pc2(0.5), &c).unwrap().get(0, 1), 0.48, epsilon = 1e-12);
    }

    #[test]
    fn full_asymptotic_reduces_to_diagonal_case() {
        let w = PartialCorrelationMatrix::from_entries(DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 0.4, -0.2, 0.4, 1.0, 0.1, -0.2, 0.1, 1.0],
        ))
        .unwrap();
        let wy = PartialCorrelationMatrix::from_entries(DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 0.3, 0.0, 0.3, 1.0, -0.5, 0.0, -0.5, 1.0],
        ))
        .unwrap();
        let c = DVector::from_vec(vec![0.6, 0.3, 0.5]);
        let full = psi_full_asymptotic(&w, &wy, &DMatrix::from_diagonal(&c)).unwrap();
        let reg = psi_reg_based(&w, &wy, &c).unwrap();
        assert!((&*full - &*reg).amax() < 1e-14);
        assert_eq!(psi_full_asymptotic(&w, &wy, &DMatrix::zeros(3, 3)).unwrap().amax(), 0.0);
    }

    #[test]
    fn weight_examples() {
        let psi = |v: f64| PsiMatrix::from_entries(DMatrix::from_row_slice(2, 2, &[0.0, v, v, 0.0])).unwrap();
        assert_eq!(weights_from_psi(&psi(0.0)).get(0, 1), 1.0);
        assert_abs_diff_eq!(weights_from_psi(&psi(0.5)).get(0, 1), std::f64::consts::SQRT_2, epsilon = 1e-7);
        assert_abs_diff_eq!(weights_from_psi(&psi(0.875)).get(0, 1), 2.8284271, epsilon = 1e-7);
        assert_eq!(weights_from_psi(&psi(0.5)).get(1, 1), 1.0);
        assert_abs_diff_eq!(weights_from_psi(&psi(1.0)).get(0, 1), 10f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn cross_diag_identical_and_diagonal_cases() {
        let x = DMatrix::from_fn(20, 3, |i, j| ((i * 7 + j * 3) % 5) as f64 + (i as f64).sqrt() * (j + 1) as f64);
        let y = DMatrix::from_fn(20, 3, |i, j| ((i * 5 + j * 11) % 7) as f64 - (i as f64 * 0.7).cos() * j as f64);
        let data = PairedDataset::new(x.clone(), x.clone(), None).unwrap();
        let om = DMatrix::from_row_slice(3, 3, &[2.0, -0.5, 0.1, -0.5, 2.0, 0.3, 0.1, 0.3, 1.5]);
        let c = estimate_cross_partial_diag(&data, &om, &om).unwrap();
        for v in c.iter() {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-12);
        }
        let data = PairedDataset::new(x.clone(), y.clone(), None).unwrap();
        let diag = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let c = estimate_cross_partial_diag(&data, &diag, &diag).unwrap();
        for i in 0..3 {
            let r = crate::stats::pearson(x.column(i).as_slice(), y.column(i).as_slice());
            assert_abs_diff_eq!(c[i], r, epsilon = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn weights_increase_with_psi(a in -0.9f64..0.9, b in -0.9f64..0.9) {
            let psi = |v: f64| PsiMatrix::from_entries(DMatrix::from_row_slice(2, 2, &[0.0, v, v, 0.0])).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi - lo > 1e-9);
            prop_assert!(weights_from_psi(&psi(lo)).get(0, 1) < weights_from_psi(&psi(hi)).get(0, 1));
        }

        #[test]
        fn estimators_agree_without_partial_correlation(ci in -1.0f64..1.0, cj in -1.0f64..1.0) {
            let c = DVector::from_vec(vec![ci, cj]);
            let a = psi_reg_based(&pc2(0.0), &pc2(0.0), &c).unwrap().get(0, 1);
            let b = psi_reg_based_sim(&pc2(0.0), &pc2(0.0), &c).unwrap().get(0, 1);
            prop_assert_eq!(a, b);
        }
    }
}
