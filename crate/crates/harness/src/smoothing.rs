//! Learning-curve statistics.

/// Trailing moving average; point `i` averages the last `min(window, i+1)`
/// raw points.
///
/// Each window is summed afresh rather than with a running sum, so rounding
/// error does not build up along the curve.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1, "window must be >= 1");
    (0..values.len())
        .map(|i| {
            let span = &values[(i + 1).saturating_sub(window)..=i];
            span.iter().sum::<f64>() / span.len() as f64
        })
        .collect()
}

/// Slack for threshold tests: averaged success rates such as `(1/3 + 1)/2`
/// are not exact in binary and may land an ulp below a threshold they meet.
pub const THRESHOLD_SLACK: f64 = 1e-9;

pub fn meets_threshold(value: f64, threshold: f64) -> bool {
    value >= threshold - THRESHOLD_SLACK
}

/// Index of the first point that starts a run of `patience` consecutive
/// values at or above `threshold`.
pub fn first_sustained_crossing(values: &[f64], threshold: f64, patience: usize) -> Option<usize> {
    let mut run = 0;
    for (i, &v) in values.iter().enumerate() {
        if meets_threshold(v, threshold) {
            run += 1;
            if run == patience {
                return Some(i + 1 - patience);
            }
        } else {
            run = 0;
        }
    }
    None
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn population_std(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64).sqrt()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Element-wise mean of equally long series.
pub fn mean_curve(series: &[Vec<f64>]) -> Vec<f64> {
    let len = series.iter().map(Vec::len).min().unwrap_or(0);
    (0..len)
        .map(|i| series.iter().map(|s| s[i]).sum::<f64>() / series.len() as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_one_is_identity() {
        let raw = [3.0, -1.0, 4.5, 2.0];
        assert_eq!(moving_average(&raw, 1), raw.to_vec());
    }

    #[test]
    fn window_ten_on_twelve_points() {
        let raw: Vec<f64> = (1..=12).map(|i| (i * i) as f64).collect();
        // Hand-computed: prefix means, then trailing windows of 10.
        let expected = [
            1.0, 2.5, 14.0 / 3.0, 7.5, 11.0, 91.0 / 6.0, 20.0, 25.5, 31.666666666666668, 38.5, 50.5, 64.5,
        ];
        for (a, e) in moving_average(&raw, 10).iter().zip(expected) {
            assert!((a - e).abs() < 1e-12, "{a} vs {e}");
        }
    }

    #[test]
    fn sustained_crossing() {
        let v = [0.1, 0.95, 0.95, 0.2, 0.9, 0.91, 0.92, 1.0];
        assert_eq!(first_sustained_crossing(&v, 0.9, 3), Some(4));
        assert_eq!(first_sustained_crossing(&v, 0.9, 5), None);
        assert_eq!(first_sustained_crossing(&v, 0.9, 1), Some(1));
        // (0.4 + 1.0 + 0.7) / 3 rounds to just below 0.7.
        let avg = moving_average(&[0.4, 1.0, 0.7], 3);
        assert!(avg[2] < 0.7);
        assert_eq!(first_sustained_crossing(&avg, 0.7, 2), Some(1));
    }

    #[test]
    fn summary_stats() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
        assert!((population_std(&[1.0, 3.0]) - 1.0).abs() < 1e-15);
        assert_eq!(mean_curve(&[vec![1.0, 2.0], vec![3.0, 4.0, 9.0]]), vec![2.0, 3.0]);
    }
}
