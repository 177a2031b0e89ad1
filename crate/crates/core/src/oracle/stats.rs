//! Robust aggregation of per-user measurements.

use crate::scalar::Real;

pub fn median<T: Real>(values: &[T]) -> T {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / T::lit(2.0)
    }
}

/// Keeps values within `k` median absolute deviations of the median.
/// When the MAD is zero only values equal to the median (within 1e-9) stay.
pub fn mad_filter<T: Real>(values: &[T], k: T) -> Vec<T> {
    if values.is_empty() {
        return Vec::new();
    }
    let med = median(values);
    let deviations: Vec<T> = values.iter().map(|&v| (v - med).abs()).collect();
    let mad = median(&deviations);
    let limit = if mad == T::zero() { T::lit(1e-9) } else { k * mad };
    values.iter().copied().filter(|&v| (v - med).abs() <= limit).collect()
}

/// `avg_time · (1 + 0.5·frac_minor + 0.8·frac_severe)`.
pub fn task_metric<T: Real>(avg_time: T, frac_minor: T, frac_severe: T) -> T {
    avg_time * (T::one() + T::lit(0.5) * frac_minor + T::lit(0.8) * frac_severe)
}
