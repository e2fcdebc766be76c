use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ActionValues, GradientForm, LearnerError, Optimizer, OptimizerConfig};
use crate::kernel::TdErrorBatch;
use crate::replay::Transition;
use crate::Scalar;

/// Fully connected Q-network with `tanh` hidden units and a linear output
/// layer, plus a frozen target copy of its parameters.
///
/// Parameters are flattened layer by layer: the weight matrix row-major
/// (`[out][in]`) followed by the bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpQNetwork<T> {
    sizes: Vec<usize>,
    params: Vec<T>,
    target: Vec<T>,
}

#[derive(Debug, Clone, Copy)]
struct Layer {
    weights: usize,
    bias: usize,
    inputs: usize,
    outputs: usize,
}

fn layers(sizes: &[usize]) -> impl Iterator<Item = Layer> + '_ {
    let mut offset = 0;
    sizes.windows(2).map(move |w| {
        let layer = Layer {
            weights: offset,
            bias: offset + w[0] * w[1],
            inputs: w[0],
            outputs: w[1],
        };
        offset += w[0] * w[1] + w[1];
        layer
    })
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

#[inline]
fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

/// Parameters with each weight matrix transposed to `[in][out]`, so that a
/// forward pass is a run of `axpy` calls over contiguous rows. Each output
/// accumulates `bias + Σ_i x_i w_i` in input order.
fn transpose_weights<T: Scalar>(sizes: &[usize], params: &[T]) -> Vec<T> {
    let mut out = params.to_vec();
    for layer in layers(sizes) {
        for o in 0..layer.outputs {
            for i in 0..layer.inputs {
                out[layer.weights + i * layer.outputs + o] = params[layer.weights + o * layer.inputs + i];
            }
        }
    }
    out
}

/// Layer activations of one sample: input, hidden outputs, and Q-values.
/// `transposed` comes from [`transpose_weights`].
fn forward_all<T: Scalar>(sizes: &[usize], transposed: &[T], input: &[T]) -> Vec<Vec<T>> {
    let n_layers = sizes.len() - 1;
    let mut acts = Vec::with_capacity(sizes.len());
    acts.push(input.to_vec());
    for (l, layer) in layers(sizes).enumerate() {
        let prev = &acts[l];
        let mut out = transposed[layer.bias..layer.bias + layer.outputs].to_vec();
        for (i, &x) in prev.iter().enumerate() {
            let row = layer.weights + i * layer.outputs;
            axpy(x, &transposed[row..row + layer.outputs], &mut out);
        }
        if l + 1 < n_layers {
            for z in &mut out {
                *z = z.tanh();
            }
        }
        acts.push(out);
    }
    acts
}

/// Forward pass over a batch, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct TdPass<T> {
    activations: Vec<Vec<Vec<T>>>,
    actions: Vec<usize>,
    td_errors: TdErrorBatch<T>,
}

impl<T: Scalar> TdPass<T> {
    pub fn td_errors(&self) -> &TdErrorBatch<T> {
        &self.td_errors
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

impl<T: Scalar> MlpQNetwork<T> {
    /// Parameters uniform in `±1/√fan_in`; the target starts as a copy.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|&s| s > 0), "invalid layer sizes {sizes:?}");
        let mut params = vec![T::zero(); param_count(sizes)];
        for layer in layers(sizes) {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            let end = layer.bias + layer.outputs;
            for p in &mut params[layer.weights..end] {
                *p = T::lit(rng.random_range(-bound..bound));
            }
        }
        Self {
            sizes: sizes.to_vec(),
            target: params.clone(),
            params,
        }
    }

    pub fn from_params(sizes: &[usize], params: Vec<T>) -> Result<Self, LearnerError> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(LearnerError::Checkpoint(format!("invalid layer sizes {sizes:?}")));
        }
        if params.len() != param_count(sizes) {
            return Err(LearnerError::DimensionMismatch {
                expected: param_count(sizes),
                actual: params.len(),
            });
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            target: params.clone(),
            params,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn target_params(&self) -> &[T] {
        &self.target
    }

    pub fn sync_target(&mut self) {
        self.target.copy_from_slice(&self.params);
    }

    fn check_input(&self, x: &[T]) -> Result<(), LearnerError> {
        if x.len() != self.input_dim() {
            return Err(LearnerError::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn q_values(&self, x: &[T]) -> Vec<T> {
        forward_all(&self.sizes, &transpose_weights(&self.sizes, &self.params), x)
            .pop()
            .unwrap()
    }

    pub fn target_q_values(&self, x: &[T]) -> Vec<T> {
        forward_all(&self.sizes, &transpose_weights(&self.sizes, &self.target), x)
            .pop()
            .unwrap()
    }

    /// Forward pass and TD errors; the bootstrap term uses the target copy.
    pub fn forward_td(&self, batch: &[Transition<T>], gamma: T) -> Result<TdPass<T>, LearnerError> {
        if batch.is_empty() {
            return Err(LearnerError::EmptyBatch);
        }
        let mut activations = Vec::with_capacity(batch.len());
        let mut actions = Vec::with_capacity(batch.len());
        let mut deltas = Vec::with_capacity(batch.len());
        let online = transpose_weights(&self.sizes, &self.params);
        let target = transpose_weights(&self.sizes, &self.target);
        for t in batch {
            self.check_input(&t.state)?;
            self.check_input(&t.next_state)?;
            if t.action >= self.output_dim() {
                return Err(LearnerError::InvalidAction {
                    action: t.action,
                    n_actions: self.output_dim(),
                });
            }
            let acts = forward_all(&self.sizes, &online, &t.state);
            let q = acts.last().unwrap()[t.action];
            let bootstrap = if t.terminal {
                T::zero()
            } else {
                let next = forward_all(&self.sizes, &target, &t.next_state).pop().unwrap();
                gamma * next.into_iter().fold(T::neg_infinity(), T::max)
            };
            deltas.push(t.reward + bootstrap - q);
            actions.push(t.action);
            activations.push(acts);
        }
        Ok(TdPass {
            activations,
            actions,
            td_errors: TdErrorBatch::new(deltas)?,
        })
    }

    /// Accumulates `Σ_j slope_j · ∇θ δ_j` where `slope_j = ∂L/∂δ_j`.
    fn backward(&self, pass: &TdPass<T>, slopes: &[T]) -> Vec<T> {
        let mut grads = vec![T::zero(); self.params.len()];
        let layer_list: Vec<Layer> = layers(&self.sizes).collect();
        for (j, acts) in pass.activations.iter().enumerate() {
            // δ = target − Q(s, a), so ∂L/∂Q = −slope at the taken action.
            let mut dz = vec![T::zero(); self.output_dim()];
            dz[pass.actions[j]] = -slopes[j];
            for (l, layer) in layer_list.iter().enumerate().rev() {
                let input = &acts[l];
                let mut d_input = vec![T::zero(); layer.inputs];
                for (o, &g) in dz.iter().enumerate() {
                    if g == T::zero() {
                        continue;
                    }
                    let w = layer.weights + o * layer.inputs;
                    axpy(g, input, &mut grads[w..w + layer.inputs]);
                    grads[layer.bias + o] = grads[layer.bias + o] + g;
                    if l > 0 {
                        axpy(g, &self.params[w..w + layer.inputs], &mut d_input);
                    }
                }
                if l > 0 {
                    dz = d_input
                        .iter()
                        .zip(input)
                        .map(|(&d, &a)| d * (T::one() - a * a))
                        .collect();
                }
            }
        }
        grads
    }

    /// Weighted loss and its gradient with the weights held constant.
    pub fn gradient(
        &self,
        pass: &TdPass<T>,
        weights: &[T],
        form: GradientForm,
    ) -> Result<(T, Vec<T>), LearnerError> {
        if weights.len() != pass.len() {
            return Err(LearnerError::WeightMismatch {
                expected: pass.len(),
                actual: weights.len(),
            });
        }
        let n = T::from_usize_lossy(pass.len());
        let slopes: Vec<T> = pass
            .td_errors
            .values()
            .iter()
            .zip(weights)
            .map(|(&d, &w)| form.loss_slope(d, w, n))
            .collect();
        let loss = crate::kernel::weighted_loss(&pass.td_errors, weights)?;
        Ok((loss, self.backward(pass, &slopes)))
    }

    /// Unweighted mean-squared TD loss and its gradient.
    pub fn mse_gradient(&self, pass: &TdPass<T>) -> (T, Vec<T>) {
        let n = T::from_usize_lossy(pass.len());
        let slopes: Vec<T> = pass
            .td_errors
            .values()
            .iter()
            .map(|&d| T::two() * d / n)
            .collect();
        (crate::kernel::mse_loss(&pass.td_errors), self.backward(pass, &slopes))
    }

    /// Weighted loss at the current parameters; no gradient.
    pub fn weighted_loss(&self, batch: &[Transition<T>], weights: &[T], gamma: T) -> Result<T, LearnerError> {
        let pass = self.forward_td(batch, gamma)?;
        Ok(crate::kernel::weighted_loss(&pass.td_errors, weights)?)
    }
}

impl<T: Scalar> ActionValues<T> for MlpQNetwork<T> {
    fn n_actions(&self) -> usize {
        self.output_dim()
    }

    fn action_values(&self, state: &[T]) -> Vec<T> {
        self.q_values(state)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DqnConfig {
    pub hidden: Vec<usize>,
    pub gamma: f64,
    pub optimizer: OptimizerConfig,
    /// Train steps between target synchronisations.
    pub target_sync: u64,
    pub gradient_form: GradientForm,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            gamma: 0.99,
            optimizer: OptimizerConfig::Sgd { lr: 0.01 },
            target_sync: 200,
            gradient_form: GradientForm::Exact,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepReport<T> {
    pub loss: T,
    pub synced: bool,
}

/// Q-network, optimizer state and target-sync bookkeeping.
#[derive(Debug, Clone)]
pub struct DqnLearner<T> {
    net: MlpQNetwork<T>,
    optimizer: Optimizer<T>,
    gamma: T,
    target_sync: u64,
    gradient_form: GradientForm,
    train_steps: u64,
    rejected_steps: u64,
}

impl<T: Scalar> DqnLearner<T> {
    pub fn new<R: Rng + ?Sized>(config: &DqnConfig, input_dim: usize, n_actions: usize, rng: &mut R) -> Self {
        let mut sizes = vec![input_dim];
        sizes.extend(&config.hidden);
        sizes.push(n_actions);
        Self::from_network(config, MlpQNetwork::new(&sizes, rng))
    }

    pub fn from_network(config: &DqnConfig, net: MlpQNetwork<T>) -> Self {
        Self {
            optimizer: Optimizer::new(config.optimizer, net.param_count()),
            net,
            gamma: T::lit(config.gamma),
            target_sync: config.target_sync.max(1),
            gradient_form: config.gradient_form,
            train_steps: 0,
            rejected_steps: 0,
        }
    }

    pub fn network(&self) -> &MlpQNetwork<T> {
        &self.net
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    /// Steps refused because of a non-finite gradient.
    pub fn rejected_steps(&self) -> u64 {
        self.rejected_steps
    }

    pub fn evaluate(&self, batch: &[Transition<T>]) -> Result<TdPass<T>, LearnerError> {
        self.net.forward_td(batch, self.gamma)
    }

    /// Applies one optimizer step on the weighted loss of an evaluated batch.
    pub fn apply(&mut self, pass: &TdPass<T>, weights: &[T]) -> Result<StepReport<T>, LearnerError> {
        let (loss, grads) = self.net.gradient(pass, weights, self.gradient_form)?;
        self.finish_step(loss, grads)
    }

    pub fn train_step(&mut self, batch: &[Transition<T>], weights: &[T]) -> Result<StepReport<T>, LearnerError> {
        let pass = self.evaluate(batch)?;
        self.apply(&pass, weights)
    }

    /// Unweighted step, the reference the weighted path must reproduce when
    /// every weight is one.
    pub fn mse_step(&mut self, batch: &[Transition<T>]) -> Result<StepReport<T>, LearnerError> {
        let pass = self.evaluate(batch)?;
        let (loss, grads) = self.net.mse_gradient(&pass);
        self.finish_step(loss, grads)
    }

    fn finish_step(&mut self, loss: T, grads: Vec<T>) -> Result<StepReport<T>, LearnerError> {
        if let Some(index) = grads.iter().position(|g| !g.is_finite()) {
            self.rejected_steps += 1;
            return Err(LearnerError::NonFiniteGradient { index });
        }
        self.optimizer.apply(&mut self.net.params, &grads);
        self.train_steps += 1;
        let synced = self.train_steps % self.target_sync == 0;
        if synced {
            self.net.sync_target();
        }
        Ok(StepReport { loss, synced })
    }
}

impl<T: Scalar> ActionValues<T> for DqnLearner<T> {
    fn n_actions(&self) -> usize {
        self.net.output_dim()
    }

    fn action_values(&self, state: &[T]) -> Vec<T> {
        self.net.q_values(state)
    }
}
