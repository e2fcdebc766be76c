use super::stats::{mean, median, population_std};
use super::{check_finite, CompensationNorm, KernelError, Normalization, TdErrorBatch, WeightVector};
use crate::Scalar;

/// Centres `|δ|` and divides by its population standard deviation.
///
/// A batch with zero spread maps to the zero vector.
pub fn normalize<T: Scalar>(batch: &TdErrorBatch<T>, mode: Normalization) -> Vec<T> {
    let magnitudes = batch.abs();
    let sigma = population_std(&magnitudes);
    if sigma == T::zero() {
        return vec![T::zero(); magnitudes.len()];
    }
    let centre = match mode {
        Normalization::Combined => mean(&magnitudes).min(median(&magnitudes)),
        Normalization::Mean => mean(&magnitudes),
        Normalization::Median => median(&magnitudes),
    };
    magnitudes.iter().map(|&m| (m - centre) / sigma).collect()
}

#[inline]
pub fn positive_preferential_value<T: Scalar>(x: T) -> T {
    x / (x.max(T::zero()) + T::one())
}

/// `x / (max(x, 0) + 1)` element-wise: identity below zero, bounded by 1 above.
pub fn positive_preferential<T: Scalar>(delta_n: &[T]) -> Result<Vec<T>, KernelError> {
    check_finite(delta_n)?;
    Ok(delta_n.iter().map(|&x| positive_preferential_value(x)).collect())
}

/// Zero-mean normal density with standard deviation `sigma`.
#[inline]
pub fn gaussian_density<T: Scalar>(x: T, sigma: T) -> T {
    let z = x / sigma;
    let norm = T::one() / (T::lit(std::f64::consts::TAU).sqrt() * sigma);
    norm * (-(z * z) / T::two()).exp()
}

/// Raw priorities: the Gaussian density at each element, with the batch's own
/// population standard deviation. Zero spread gives all ones.
pub fn gaussian_raw_priority<T: Scalar>(delta_m: &[T]) -> Result<Vec<T>, KernelError> {
    if delta_m.is_empty() {
        return Err(KernelError::EmptyBatch);
    }
    check_finite(delta_m)?;
    let sigma = population_std(delta_m);
    if sigma == T::zero() {
        return Ok(vec![T::one(); delta_m.len()]);
    }
    Ok(delta_m.iter().map(|&x| gaussian_density(x, sigma)).collect())
}

/// Softmax with the maximum subtracted first; the result is unchanged by any
/// constant offset of the input.
pub fn softmax_weights<T: Scalar>(delta_g: &[T]) -> Result<Vec<T>, KernelError> {
    if delta_g.is_empty() {
        return Err(KernelError::EmptyBatch);
    }
    check_finite(delta_g)?;
    let max = delta_g.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = delta_g.iter().map(|&g| (g - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Scales `p` by `‖δ‖ / ‖p∘δ‖` so that the weighted errors keep the norm of
/// the raw errors.
///
/// Equal weights compensate to exactly one, as does a zero denominator.
pub fn compensate<T: Scalar>(
    p: &[T],
    batch: &TdErrorBatch<T>,
    norm: CompensationNorm,
) -> Result<WeightVector<T>, KernelError> {
    if p.len() != batch.len() {
        return Err(KernelError::LengthMismatch {
            expected: batch.len(),
            actual: p.len(),
        });
    }
    check_finite(p)?;
    if p.iter().all(|&x| x == p[0]) {
        return Ok(WeightVector::ones(p.len()));
    }
    let deltas = batch.values();
    let (raw, weighted) = match norm {
        CompensationNorm::L1 => (
            deltas.iter().map(|d| d.abs()).sum::<T>(),
            p.iter().zip(deltas).map(|(&w, &d)| (w * d).abs()).sum::<T>(),
        ),
        CompensationNorm::L2 => (
            deltas.iter().map(|&d| d * d).sum::<T>().sqrt(),
            p.iter()
                .zip(deltas)
                .map(|(&w, &d)| (w * d) * (w * d))
                .sum::<T>()
                .sqrt(),
        ),
    };
    if weighted == T::zero() {
        return Ok(WeightVector::ones(p.len()));
    }
    let factor = raw / weighted;
    Ok(WeightVector {
        omegas: p.iter().map(|&w| factor * w).collect(),
        stages: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(v: &[f64]) -> TdErrorBatch<f64> {
        TdErrorBatch::new(v.to_vec()).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn combined_normalization_examples() {
        let n = normalize(&batch(&[1.0, -2.0, 3.0]), Normalization::Combined);
        close(&n, &[-1.224744871391589, 0.0, 1.224744871391589], 1e-12);

        assert_eq!(normalize(&batch(&[5.0, 5.0, 5.0]), Normalization::Combined), vec![0.0; 3]);

        // mean 2.5, median 0.5: the median is the centre under positive skew.
        let n = normalize(&batch(&[0.0, 0.0, 1.0, 9.0]), Normalization::Combined);
        close(
            &n,
            &[-0.13245323570650439, -0.13245323570650439, 0.13245323570650439, 2.2517050070105746],
            1e-12,
        );
        assert_eq!(n, normalize(&batch(&[0.0, 0.0, 1.0, 9.0]), Normalization::Median));
        assert_ne!(n, normalize(&batch(&[0.0, 0.0, 1.0, 9.0]), Normalization::Mean));
    }

    #[test]
    fn normalized_values_have_unit_spread() {
        let n = normalize(&batch(&[0.3, -7.0, 2.0, 11.0, 0.01]), Normalization::Mean);
        assert!((population_std(&n) - 1.0).abs() < 1e-12);
        assert!(mean(&n).abs() < 1e-12);
    }

    #[test]
    fn positive_preferential_examples() {
        assert_eq!(positive_preferential_value(-1.0), -1.0);
        assert_eq!(positive_preferential_value(2.0), 2.0 / 3.0);
        assert_eq!(positive_preferential_value(0.0), 0.0);
        assert!(positive_preferential(&[f64::NAN]).is_err());
    }

    #[test]
    fn gaussian_examples() {
        assert!((gaussian_density(0.0f64, 1.0) - 0.3989422804014327).abs() < 1e-15);
        assert_eq!(gaussian_raw_priority(&[0.0, 0.0, 0.0]).unwrap(), vec![1.0; 3]);
        let g = gaussian_raw_priority(&[-1.0, 0.0, 1.0]).unwrap();
        close(&g, &[0.23079948420818297, 0.48860251190292003, 0.23079948420818297], 1e-14);
        assert!(g[1] > g[0]);
        assert_eq!(g[0], g[2]);
    }

    #[test]
    fn softmax_examples() {
        let a = softmax_weights(&[0.2, 0.4, 0.6]).unwrap();
        let b = softmax_weights(&[0.4, 0.6, 0.8]).unwrap();
        close(&a, &b, 1e-15);
        assert_eq!(softmax_weights(&[3.3; 4]).unwrap(), vec![0.25; 4]);
        close(&softmax_weights(&[0.0, 2f64.ln()]).unwrap(), &[1.0 / 3.0, 2.0 / 3.0], 1e-15);
    }

    #[test]
    fn compensation_examples() {
        let w = compensate(&[0.75, 0.25], &batch(&[1.0, 2.0]), CompensationNorm::L1).unwrap();
        close(&w.omegas, &[1.8, 0.6], 1e-12);

        let w = compensate(&[0.2, 0.3, 0.5], &batch(&[0.0, 0.0, 0.0]), CompensationNorm::L1).unwrap();
        assert_eq!(w.omegas, vec![1.0; 3]);

        let w = compensate(&[0.25; 4], &batch(&[1.0, -3.0, 0.2, 9.0]), CompensationNorm::L1).unwrap();
        assert_eq!(w.omegas, vec![1.0; 4]);

        // Zero weight on the only nonzero error.
        let w = compensate(&[0.0, 1.0], &batch(&[4.0, 0.0]), CompensationNorm::L2).unwrap();
        assert_eq!(w.omegas, vec![1.0; 2]);

        assert_eq!(
            compensate(&[0.5, 0.5], &batch(&[1.0]), CompensationNorm::L1).unwrap_err(),
            KernelError::LengthMismatch { expected: 1, actual: 2 }
        );
    }

    #[test]
    fn l2_compensation_preserves_l2_norm() {
        let d = [1.0, -2.0, 0.5, 4.0];
        let p = [0.1, 0.2, 0.3, 0.4];
        let w = compensate(&p, &batch(&d), CompensationNorm::L2).unwrap();
        let lhs: f64 = w.omegas.iter().zip(d).map(|(o, d)| (o * d).powi(2)).sum::<f64>();
        let rhs: f64 = d.iter().map(|d| d * d).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
