use super::ReplayError;
use crate::kernel::TdErrorBatch;
use crate::Scalar;

/// Element-wise product of importance-sampling weights and loss weights.
///
/// The loss weights are computed on the raw TD errors of the prioritized
/// batch before the importance-sampling weights are folded in.
pub fn compose_per_pbwl<T: Scalar>(is_weights: &[T], omegas: &[T]) -> Result<Vec<T>, ReplayError> {
    if is_weights.len() != omegas.len() {
        return Err(ReplayError::LengthMismatch {
            expected: is_weights.len(),
            actual: omegas.len(),
        });
    }
    Ok(is_weights.iter().zip(omegas).map(|(&w, &o)| w * o).collect())
}

/// `(1/N) Σ (m_j δ_j)²` for combined multipliers `m`.
pub fn composed_loss<T: Scalar>(batch: &TdErrorBatch<T>, multipliers: &[T]) -> Result<T, ReplayError> {
    crate::kernel::weighted_loss(batch, multipliers).map_err(|_| ReplayError::LengthMismatch {
        expected: batch.len(),
        actual: multipliers.len(),
    })
}
