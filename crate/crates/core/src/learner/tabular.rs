use super::{ActionValues, GradientForm, LearnerError};
use crate::kernel::TdErrorBatch;
use crate::replay::Transition;
use crate::Scalar;

/// Dense `|S| × |A|` action-value table. States are read from `state[0]` as
/// an index.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable<T> {
    n_states: usize,
    n_actions: usize,
    values: Vec<T>,
    gamma: T,
    gradient_form: GradientForm,
}

impl<T: Scalar> QTable<T> {
    pub fn new(n_states: usize, n_actions: usize, gamma: T) -> Self {
        Self {
            n_states,
            n_actions,
            values: vec![T::zero(); n_states * n_actions],
            gamma,
            gradient_form: GradientForm::Exact,
        }
    }

    pub fn with_gradient_form(mut self, form: GradientForm) -> Self {
        self.gradient_form = form;
        self
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn get(&self, state: usize, action: usize) -> T {
        self.values[state * self.n_actions + action]
    }

    pub fn set(&mut self, state: usize, action: usize, value: T) {
        self.values[state * self.n_actions + action] = value;
    }

    pub fn row(&self, state: usize) -> &[T] {
        &self.values[state * self.n_actions..(state + 1) * self.n_actions]
    }

    fn state_index(&self, state: &[T]) -> Result<usize, LearnerError> {
        if state.len() != 1 {
            return Err(LearnerError::DimensionMismatch { expected: 1, actual: state.len() });
        }
        let s = state[0].to_usize().ok_or(LearnerError::InvalidState(usize::MAX))?;
        if s >= self.n_states {
            return Err(LearnerError::InvalidState(s));
        }
        Ok(s)
    }

    fn max_value(&self, state: usize) -> T {
        self.row(state).iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// Signed TD errors, bootstrapping from the table itself.
    pub fn td_errors(&self, batch: &[Transition<T>]) -> Result<TdErrorBatch<T>, LearnerError> {
        if batch.is_empty() {
            return Err(LearnerError::EmptyBatch);
        }
        let mut deltas = Vec::with_capacity(batch.len());
        for t in batch {
            let s = self.state_index(&t.state)?;
            if t.action >= self.n_actions {
                return Err(LearnerError::InvalidAction { action: t.action, n_actions: self.n_actions });
            }
            let bootstrap = if t.terminal {
                T::zero()
            } else {
                self.gamma * self.max_value(self.state_index(&t.next_state)?)
            };
            deltas.push(t.reward + bootstrap - self.get(s, t.action));
        }
        Ok(TdErrorBatch::new(deltas)?)
    }

    /// One descent step on the weighted loss with ω held constant.
    ///
    /// The table entry of sample `j` moves by `lr·ω_j²·δ_j/N` (`lr·ω_j·δ_j/N`
    /// under [`GradientForm::Linear`]): half the loss gradient, so that a
    /// single unweighted sample gives the classical `Q += lr·δ`. Returns the
    /// weighted loss before the update.
    pub fn train_step(&mut self, batch: &[Transition<T>], weights: &[T], lr: T) -> Result<T, LearnerError> {
        if weights.len() != batch.len() {
            return Err(LearnerError::WeightMismatch { expected: batch.len(), actual: weights.len() });
        }
        let deltas = self.td_errors(batch)?;
        let n = T::from_usize_lossy(batch.len());
        let mut updates = Vec::with_capacity(batch.len());
        for ((t, &d), &w) in batch.iter().zip(deltas.values()).zip(weights) {
            let slope = self.gradient_form.loss_slope(d, w, n) / T::two();
            updates.push((self.state_index(&t.state)?, t.action, lr * slope));
        }
        for (s, a, step) in updates {
            let v = self.get(s, a) + step;
            self.set(s, a, v);
        }
        Ok(crate::kernel::weighted_loss(&deltas, weights)?)
    }

    /// Largest absolute difference from a reference table, over the first
    /// `states` rows.
    pub fn sup_distance(&self, reference: &[[f64; 2]]) -> f64 {
        reference
            .iter()
            .enumerate()
            .flat_map(|(s, row)| row.iter().enumerate().map(move |(a, &v)| (s, a, v)))
            .map(|(s, a, v)| (self.get(s, a).as_f64() - v).abs())
            .fold(0.0, f64::max)
    }
}

impl<T: Scalar> ActionValues<T> for QTable<T> {
    fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn action_values(&self, state: &[T]) -> Vec<T> {
        let s = self.state_index(state).expect("valid state index");
        self.row(s).to_vec()
    }
}
