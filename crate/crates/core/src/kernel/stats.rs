//! Batch statistics used by the weighting stages.

use crate::Scalar;

pub fn mean<T: Scalar>(values: &[T]) -> T {
    values.iter().copied().sum::<T>() / T::from_usize_lossy(values.len())
}

/// Median; even lengths average the two middle order statistics.
pub fn median<T: Scalar>(values: &[T]) -> T {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / T::two()
    }
}

/// Population standard deviation (divides by N).
///
/// Returns exactly zero when every element is identical, so that rounding in
/// the mean cannot produce a spurious tiny spread.
pub fn population_std<T: Scalar>(values: &[T]) -> T {
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        return T::zero();
    }
    let mu = mean(values);
    let var = values.iter().map(|&v| (v - mu) * (v - mu)).sum::<T>()
        / T::from_usize_lossy(values.len());
    var.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
        assert_eq!(median(&[7.0f32]), 7.0);
    }

    #[test]
    fn std_is_population_form() {
        let s: f64 = population_std(&[1.0, 2.0, 3.0]);
        assert!((s - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn identical_values_have_exactly_zero_spread() {
        assert_eq!(population_std(&[0.1f64; 7]), 0.0);
        assert_eq!(population_std(&[1.0e300f64, 1.0e300]), 0.0);
    }
}
