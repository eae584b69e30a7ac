//! Shared numerical primitives and the paired data model.
//!
//! Everything downstream works on column-standardized data, so the sample
//! "covariance" handed to the solver is a correlation matrix and the
//! penalties live on the partial-correlation scale.

use std::ops::Deref;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest magnitude passed to the Fisher transform.
pub const FISHER_CLAMP: f64 = 1.0 - 1e-8;

/// Dense symmetric matrix. Construction symmetrizes the input exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix(DMatrix<f64>);

impl SymmetricMatrix {
    /// Wraps `m` after checking squareness, finiteness and symmetry up to a
    /// relative tolerance of `1e-8`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("matrix has non-finite entries".into()));
        }
        let scale = m.amax().max(1.0);
        let p = m.nrows();
        for i in 0..p {
            for j in (i + 1)..p {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-8 * scale {
                    return Err(Error::InvalidConfig(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self::symmetrize(m))
    }

    /// Averages `m` with its transpose without validation.
    pub fn symmetrize(mut m: DMatrix<f64>) -> Self {
        let p = m.nrows();
        for i in 0..p {
            for j in (i + 1)..p {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self(m)
    }

    pub fn identity(p: usize) -> Self {
        Self(DMatrix::identity(p, p))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

impl Deref for SymmetricMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Partial correlations `w_ij = -Ω_ij / sqrt(Ω_ii Ω_jj)` with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialCorrelationMatrix(DMatrix<f64>);

impl PartialCorrelationMatrix {
    /// Builds from raw entries, forcing a unit diagonal and clipping to [-1, 1].
    pub fn from_entries(mut m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch("partial correlation matrix must be square".into()));
        }
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                m[(i, j)] = if i == j { 1.0 } else { m[(i, j)].clamp(-1.0, 1.0) };
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

impl Deref for PartialCorrelationMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Two aligned `n × p` observation matrices: row `k` of `x` and row `k` of
/// `y` come from the same subject.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedDataset {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub variable_names: Vec<String>,
}

impl PairedDataset {
    pub fn new(x: DMatrix<f64>, y: DMatrix<f64>, variable_names: Option<Vec<String>>) -> Result<Self> {
        if x.shape() != y.shape() {
            return Err(Error::DimensionMismatch(format!(
                "x is {}x{} but y is {}x{}",
                x.nrows(),
                x.ncols(),
                y.nrows(),
                y.ncols()
            )));
        }
        if x.nrows() < 4 {
            return Err(Error::InvalidConfig(format!("need at least 4 samples, got {}", x.nrows())));
        }
        let p = x.ncols();
        let names = match variable_names {
            Some(names) if names.len() != p => {
                return Err(Error::DimensionMismatch(format!("{} names for {} variables", names.len(), p)))
            }
            Some(names) => names,
            None => (1..=p).map(|i| format!("V{i}")).collect(),
        };
        Ok(Self { x, y, variable_names: names })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Sample correlation matrices of both conditions.
    pub fn correlations(&self) -> Result<(SymmetricMatrix, SymmetricMatrix)> {
        Ok((sample_correlation(&self.x)?, sample_correlation(&self.y)?))
    }
}

fn column_mean_sd(data: &DMatrix<f64>, j: usize) -> (f64, f64) {
    let n = data.nrows() as f64;
    let col = data.column(j);
    let mean = col.sum() / n;
    let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Centers every column and scales it to unit sample standard deviation
/// (`n - 1` denominator).
pub fn standardize_columns(data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if data.nrows() < 2 {
        return Err(Error::InvalidConfig("standardization needs at least 2 rows".into()));
    }
    let mut out = data.clone();
    for j in 0..data.ncols() {
        let (mean, sd) = column_mean_sd(data, j);
        let scale = data.column(j).amax().max(1.0);
        if !(sd > 1e-12 * scale) {
            return Err(Error::ZeroVarianceColumn(j));
        }
        out.column_mut(j).apply(|v| *v = (*v - mean) / sd);
    }
    Ok(out)
}

/// Pearson correlation matrix of the columns of `data`.
pub fn sample_correlation(data: &DMatrix<f64>) -> Result<SymmetricMatrix> {
    let z = standardize_columns(data)?;
    let n = z.nrows() as f64;
    let mut r = z.tr_mul(&z) / (n - 1.0);
    let p = r.nrows();
    for i in 0..p {
        r[(i, i)] = 1.0;
        for j in (i + 1)..p {
            let v = (0.5 * (r[(i, j)] + r[(j, i)])).clamp(-1.0, 1.0);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    Ok(SymmetricMatrix(r))
}

/// Fisher transform `atanh(r)`, with `|r|` clamped to `1 - 1e-8`.
pub fn fisher_z(r: f64) -> f64 {
    let a = r.abs().min(FISHER_CLAMP);
    (0.5 * (2.0 * a / (1.0 - a)).ln_1p()).copysign(r)
}

pub fn inverse_fisher_z(z: f64) -> f64 {
    z.tanh()
}

/// Scales a precision matrix to partial correlations, `w_ij = -Ω_ij / sqrt(Ω_ii Ω_jj)`.
pub fn scale_to_partial_correlation(omega: &DMatrix<f64>) -> Result<PartialCorrelationMatrix> {
    if !omega.is_square() {
        return Err(Error::DimensionMismatch("precision matrix must be square".into()));
    }
    let p = omega.nrows();
    let mut inv_sqrt = Vec::with_capacity(p);
    for i in 0..p {
        let d = omega[(i, i)];
        if !(d > 0.0) {
            return Err(Error::NonPositiveDiagonal(i));
        }
        inv_sqrt.push(1.0 / d.sqrt());
    }
    let w = DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else {
            (-omega[(i, j)] * inv_sqrt[i] * inv_sqrt[j]).clamp(-1.0, 1.0)
        }
    });
    Ok(PartialCorrelationMatrix(w))
}
