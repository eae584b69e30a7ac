//! Small statistical helpers shared by tuning, testing and evaluation.

use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, Normal, StudentsT};

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

pub fn normal_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

/// Upper-`q` critical value `z` with `P(Z > z) = q`.
pub fn normal_upper_quantile(q: f64) -> f64 {
    std_normal().inverse_cdf(1.0 - q)
}

/// Upper-`q` critical value of Student's t with `df` degrees of freedom.
pub fn student_t_upper_quantile(q: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df).expect("valid df").inverse_cdf(1.0 - q)
}

/// Median with the midpoint convention for even lengths. `NaN` on empty input.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    median_in_place(&mut v)
}

pub fn median_in_place(v: &mut [f64]) -> f64 {
    let m = v.len();
    if m == 0 {
        return f64::NAN;
    }
    let mid = m / 2;
    let (_, hi, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let hi = *hi;
    if m % 2 == 1 {
        hi
    } else {
        let lo = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    }
}

/// Sample quantile with linear interpolation between order statistics
/// (the `type 7` definition). `sorted` must be ascending.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let m = sorted.len();
    if m == 0 {
        return f64::NAN;
    }
    let h = (m - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, q)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn sample_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() as f64 - 1.0)
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let ma = mean(a);
    let mb = mean(b);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Ranks with 1 for the largest value; ties get the average of their ranks.
pub fn descending_average_ranks(values: &[f64]) -> Vec<f64> {
    let m = values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut ranks = vec![0.0; m];
    let mut start = 0;
    while start < m {
        let mut end = start + 1;
        while end < m && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = avg;
        }
        start = end;
    }
    ranks
}

/// Two-sided one-sample t-test of `mean == 0`. Returns 1 when all values are
/// identical zeros and 0 when they are identical non-zeros.
pub fn one_sample_t_pvalue(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let m = mean(values);
    let var = sample_variance(values);
    if !(var > 0.0) {
        return if m == 0.0 { 1.0 } else { 0.0 };
    }
    let t = m / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).expect("df > 0");
    2.0 * (1.0 - dist.cdf(t.abs()))
}

/// One-sided sign test of "positive more often than negative". Zeros are
/// dropped. Returns `P(B >= #positive)` with `B ~ Binomial(#nonzero, 1/2)`.
pub fn sign_test_greater_pvalue(values: &[f64]) -> f64 {
    let pos = values.iter().filter(|v| **v > 0.0).count() as u64;
    let neg = values.iter().filter(|v| **v < 0.0).count() as u64;
    let total = pos + neg;
    if total == 0 {
        return 1.0;
    }
    if pos == 0 {
        return 1.0;
    }
    let b = Binomial::new(0.5, total).expect("valid binomial");
    1.0 - b.cdf(pos - 1)
}

/// Kolmogorov–Smirnov test of `values` against Uniform(0, 1). Returns the
/// statistic and its asymptotic p-value (with the Stephens small-sample
/// correction).
pub fn ks_uniform(values: &[f64]) -> (f64, f64) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let x = x.clamp(0.0, 1.0);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max(hi - x).max(x - lo);
    }
    let sqrt_n = n.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    (d, kolmogorov_survival(lambda))
}

/// `P(K > lambda)` for the Kolmogorov distribution.
fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quantiles_match_tables() {
        assert_abs_diff_eq!(normal_upper_quantile(0.025), 1.959964, epsilon = 1e-6);
        assert_abs_diff_eq!(normal_upper_quantile(0.005), 2.5758293, epsilon = 1e-6);
        assert_abs_diff_eq!(normal_cdf(2.0), 0.9772499, epsilon = 1e-7);
        assert_abs_diff_eq!(student_t_upper_quantile(0.025, 10.0), 2.228139, epsilon = 1e-5);
    }

    #[test]
    fn medians_and_quantiles() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.25), 2.0);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.75), 3.25);
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(descending_average_ranks(&[1.0, 3.0, 3.0, 0.0]), vec![3.0, 1.5, 1.5, 4.0]);
    }

    #[test]
    fn sign_and_t_tests() {
        assert_abs_diff_eq!(sign_test_greater_pvalue(&[1.0, 1.0, 1.0]), 0.125, epsilon = 1e-12);
        assert_eq!(sign_test_greater_pvalue(&[0.0, 0.0]), 1.0);
        assert_eq!(one_sample_t_pvalue(&[0.0, 0.0, 0.0]), 1.0);
        assert!(one_sample_t_pvalue(&[-1.0, 1.0, -2.0, 2.0]) > 0.99);
    }

    #[test]
    fn ks_detects_non_uniform() {
        let uniform: Vec<f64> = (0..500).map(|i| (i as f64 + 0.5) / 500.0).collect();
        assert!(ks_uniform(&uniform).1 > 0.99);
        let skewed: Vec<f64> = uniform.iter().map(|u| u * u).collect();
        assert!(ks_uniform(&skewed).1 < 1e-6);
    }
}
