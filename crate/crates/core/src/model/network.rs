//! Parameters, forward pass and hand-derived backward pass of the network.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::optim::AdamState;
use super::spec::{ModelSpec, ShapeTrace};
use crate::error::{shape_err, Error, Result};
use crate::kernels::{
    batch_norm_backward, batch_norm_forward_infer, batch_norm_forward_train, conv2d_backward,
    conv2d_forward, dense_backward, dense_forward, dropout_backward, dropout_forward,
    maxpool2d_backward, maxpool2d_forward, BatchNormCache, DropoutMask, Phase, RunningStats,
    KERNEL_SIZE,
};
use crate::lstm::{lstm_backward, lstm_sequence_forward, LstmCache, LstmParams};
use crate::seed::{self, STREAM_DROPOUT, STREAM_INIT};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub weights: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormAffine {
    pub gamma: Tensor,
    pub beta: Tensor,
}

/// Every trainable tensor of the network. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    /// All convolutions in forward order, across blocks.
    pub convs: Vec<Affine>,
    /// One batch norm per block.
    pub norms: Vec<NormAffine>,
    pub lstm: LstmParams,
    pub fc: Affine,
    pub output: Affine,
}

impl Params {
    /// Canonical order used by the optimizer and checkpoints.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for c in &self.convs {
            out.push(&c.weights);
            out.push(&c.bias);
        }
        for n in &self.norms {
            out.push(&n.gamma);
            out.push(&n.beta);
        }
        out.extend(self.lstm.tensors());
        out.extend([
            &self.fc.weights,
            &self.fc.bias,
            &self.output.weights,
            &self.output.bias,
        ]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for c in &mut self.convs {
            out.push(&mut c.weights);
            out.push(&mut c.bias);
        }
        for n in &mut self.norms {
            out.push(&mut n.gamma);
            out.push(&mut n.beta);
        }
        out.extend(self.lstm.tensors_mut());
        out.extend([
            &mut self.fc.weights,
            &mut self.fc.bias,
            &mut self.output.weights,
            &mut self.output.bias,
        ]);
        out
    }

    /// Names parallel to [`Params::tensors`].
    pub fn names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for i in 0..self.convs.len() {
            out.push(format!("conv{}.weights", i + 1));
            out.push(format!("conv{}.bias", i + 1));
        }
        for i in 0..self.norms.len() {
            out.push(format!("bn{}.gamma", i + 1));
            out.push(format!("bn{}.beta", i + 1));
        }
        for g in ["w_i", "w_c", "w_f", "w_o", "b_i", "b_c", "b_f", "b_o"] {
            out.push(format!("lstm.{g}"));
        }
        for n in ["fc.weights", "fc.bias", "output.weights", "output.bias"] {
            out.push(n.to_string());
        }
        out
    }

    pub fn zeros_like(&self) -> Params {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.data_mut().fill(0.0);
        }
        z
    }

    pub fn count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    /// All values concatenated in canonical order.
    pub fn flatten(&self) -> Vec<f64> {
        self.tensors()
            .iter()
            .flat_map(|t| t.data().iter().copied())
            .collect()
    }

    /// Inverse of [`Params::flatten`].
    pub fn assign_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.count() {
            return Err(shape_err!(
                "expected {} values, got {}",
                self.count(),
                values.len()
            ));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.data_mut().copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }
}

/// Learned weights, batch-norm running statistics, optimizer moments and
/// bookkeeping for a model built from a [`ModelSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub spec: ModelSpec,
    pub params: Params,
    pub running: Vec<RunningStats>,
    pub optimizer: AdamState,
    /// Completed training epochs.
    pub epoch: usize,
    pub seed: u64,
}

fn uniform(shape: &[usize], limit: f64, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(-limit..limit))
}

/// Allocates and initializes a model: He-uniform convolutions, Glorot-uniform
/// dense layers, unit/zero batch norm, zero biases.
pub fn build_model(spec: &ModelSpec, seed: u64) -> Result<(ModelState, ShapeTrace)> {
    let trace = spec.shape_trace()?;
    let mut rng = seed::stream(seed, &[STREAM_INIT]);
    let mut convs = Vec::with_capacity(spec.conv_count());
    let mut norms = Vec::with_capacity(spec.blocks());
    let mut channels = spec.channels;
    for (&filters, &count) in spec.block_filters.iter().zip(&spec.convs_per_block) {
        for _ in 0..count {
            let fan_in = KERNEL_SIZE * KERNEL_SIZE * channels;
            convs.push(Affine {
                weights: uniform(
                    &[KERNEL_SIZE, KERNEL_SIZE, channels, filters],
                    (6.0 / fan_in as f64).sqrt(),
                    &mut rng,
                ),
                bias: Tensor::zeros(&[filters]),
            });
            channels = filters;
        }
        norms.push(NormAffine {
            gamma: Tensor::full(&[filters], 1.0),
            beta: Tensor::zeros(&[filters]),
        });
    }
    let lstm = LstmParams::init(spec.lstm_input(), spec.lstm_units, &mut rng);
    let glorot = |fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng| Affine {
        weights: uniform(
            &[fan_in, fan_out],
            (6.0 / (fan_in + fan_out) as f64).sqrt(),
            rng,
        ),
        bias: Tensor::zeros(&[fan_out]),
    };
    let fc = glorot(spec.flat_width(), spec.fc_units, &mut rng);
    let output = glorot(spec.fc_units, spec.classes, &mut rng);
    let running = spec
        .block_filters
        .iter()
        .map(|&c| RunningStats::new(c))
        .collect();
    let state = ModelState {
        spec: spec.clone(),
        params: Params {
            convs,
            norms,
            lstm,
            fc,
            output,
        },
        running,
        optimizer: AdamState::default(),
        epoch: 0,
        seed,
    };
    Ok((state, trace))
}

struct BlockCache {
    /// Input of every convolution; the ReLU output of conv `j` is the input
    /// of conv `j + 1`.
    conv_inputs: Vec<Tensor>,
    /// ReLU output of the block's last convolution (batch norm input).
    last_activation: Tensor,
    norm: BatchNormCache,
    pool_input_shape: Vec<usize>,
    argmax: Vec<usize>,
    dropout: Option<DropoutMask>,
}

/// Intermediate values of a train-phase forward pass.
pub struct ForwardCache {
    blocks: Vec<BlockCache>,
    feature_shape: [usize; 4],
    lstm: LstmCache,
    flat: Tensor,
    fc_out: Tensor,
}

fn relu_in_place(t: &mut Tensor) {
    t.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
}

/// Zeroes `grad` wherever the ReLU output was not positive.
fn relu_mask(grad: &mut Tensor, activated: &Tensor) {
    for (g, &a) in grad.data_mut().iter_mut().zip(activated.data()) {
        if a <= 0.0 {
            *g = 0.0;
        }
    }
}

impl ModelState {
    pub fn trace(&self) -> Result<ShapeTrace> {
        self.spec.shape_trace()
    }

    fn check_batch(&self, batch: &Tensor) -> Result<usize> {
        let [n, h, w, c] = batch.dims4()?;
        let s = self.spec.input_size;
        if c != self.spec.channels {
            return Err(shape_err!(
                "model expects {} channels, batch has {c}",
                self.spec.channels
            ));
        }
        if h != s || w != s {
            return Err(shape_err!("model expects {s}x{s} input, batch is {h}x{w}"));
        }
        Ok(n)
    }

    fn convs_of_block(&self, block: usize) -> std::ops::Range<usize> {
        let start: usize = self.spec.convs_per_block[..block].iter().sum();
        start..start + self.spec.convs_per_block[block]
    }

    /// Inference-phase logits `[N, classes]`.
    pub fn forward_infer(&self, batch: &Tensor) -> Result<Tensor> {
        let n = self.check_batch(batch)?;
        let mut x = batch.clone();
        for block in 0..self.spec.blocks() {
            for ci in self.convs_of_block(block) {
                let conv = &self.params.convs[ci];
                x = conv2d_forward(&x, &conv.weights, &conv.bias)?;
                relu_in_place(&mut x);
            }
            let norm = &self.params.norms[block];
            x = batch_norm_forward_infer(&x, &norm.gamma, &norm.beta, &self.running[block])?;
            x = maxpool2d_forward(&x)?.output;
        }
        let (t, d) = (self.spec.timesteps(), self.spec.lstm_input());
        let seq = x.reshape(&[n, t, d])?;
        let (h, _) = lstm_sequence_forward(&seq, &self.params.lstm, None)?;
        let flat = h.reshape(&[n, self.spec.flat_width()])?;
        let mut fc = dense_forward(&flat, &self.params.fc.weights, &self.params.fc.bias)?;
        relu_in_place(&mut fc);
        dense_forward(&fc, &self.params.output.weights, &self.params.output.bias)
    }

    /// Train-phase forward: batch statistics (running stats are updated),
    /// dropout masks drawn from `dropout_seed`.
    pub fn forward_train(
        &mut self,
        batch: &Tensor,
        dropout_seed: u64,
    ) -> Result<(Tensor, ForwardCache)> {
        let n = self.check_batch(batch)?;
        let mut x = batch.clone();
        let mut blocks = Vec::with_capacity(self.spec.blocks());
        for block in 0..self.spec.blocks() {
            let mut conv_inputs = Vec::new();
            for ci in self.convs_of_block(block) {
                let conv = &self.params.convs[ci];
                let mut y = conv2d_forward(&x, &conv.weights, &conv.bias)?;
                relu_in_place(&mut y);
                conv_inputs.push(std::mem::replace(&mut x, y));
            }
            let norm = &self.params.norms[block];
            let (normed, norm_cache) =
                batch_norm_forward_train(&x, &norm.gamma, &norm.beta, &mut self.running[block])?;
            let pooled = maxpool2d_forward(&normed)?;
            let mask_seed = seed::derive_seed(dropout_seed, &[STREAM_DROPOUT, block as u64]);
            let (dropped, mask) = dropout_forward(
                &pooled.output,
                self.spec.dropout_rate,
                mask_seed,
                Phase::Train,
            )?;
            blocks.push(BlockCache {
                conv_inputs,
                last_activation: x,
                norm: norm_cache,
                pool_input_shape: normed.shape().to_vec(),
                argmax: pooled.argmax,
                dropout: mask,
            });
            x = dropped;
        }
        let feature_shape = x.dims4()?;
        let (t, d) = (self.spec.timesteps(), self.spec.lstm_input());
        let seq = x.reshape(&[n, t, d])?;
        let (h, lstm_cache) = lstm_sequence_forward(&seq, &self.params.lstm, None)?;
        let flat = h.reshape(&[n, self.spec.flat_width()])?;
        let mut fc_out = dense_forward(&flat, &self.params.fc.weights, &self.params.fc.bias)?;
        relu_in_place(&mut fc_out);
        let logits = dense_forward(
            &fc_out,
            &self.params.output.weights,
            &self.params.output.bias,
        )?;
        Ok((
            logits,
            ForwardCache {
                blocks,
                feature_shape,
                lstm: lstm_cache,
                flat,
                fc_out,
            },
        ))
    }

    /// Forward pass in the given phase. The train phase updates batch-norm
    /// running statistics.
    pub fn forward(&mut self, batch: &Tensor, phase: Phase, dropout_seed: u64) -> Result<Tensor> {
        match phase {
            Phase::Infer => self.forward_infer(batch),
            Phase::Train => Ok(self.forward_train(batch, dropout_seed)?.0),
        }
    }

    /// Gradients of the loss with respect to every parameter, given the
    /// gradient with respect to the logits.
    pub fn backward(&self, cache: &ForwardCache, d_logits: &Tensor) -> Result<Params> {
        if cache.blocks.len() != self.spec.blocks() {
            return Err(Error::Validation(
                "forward cache does not match model".into(),
            ));
        }
        let mut grads = self.params.zeros_like();

        let out_g = dense_backward(&cache.fc_out, &self.params.output.weights, d_logits)?;
        grads.output.weights = out_g.d_weights;
        grads.output.bias = out_g.d_bias;
        let mut d_fc = out_g.d_input;
        relu_mask(&mut d_fc, &cache.fc_out);
        let fc_g = dense_backward(&cache.flat, &self.params.fc.weights, &d_fc)?;
        grads.fc.weights = fc_g.d_weights;
        grads.fc.bias = fc_g.d_bias;

        let [n, _, _, _] = cache.feature_shape;
        let d_h = fc_g
            .d_input
            .reshape(&[n, self.spec.timesteps(), self.spec.lstm_units])?;
        let (d_seq, lstm_g) = lstm_backward(&cache.lstm, &self.params.lstm, &d_h)?;
        grads.lstm = lstm_g;
        let mut d_x = d_seq.reshape(&cache.feature_shape)?;

        for block in (0..self.spec.blocks()).rev() {
            let bc = &cache.blocks[block];
            let d_pool = dropout_backward(&d_x, bc.dropout.as_ref())?;
            let d_norm_out = maxpool2d_backward(&d_pool, &bc.argmax, &bc.pool_input_shape)?;
            let (mut d_act, d_gamma, d_beta) =
                batch_norm_backward(&bc.norm, &self.params.norms[block].gamma, &d_norm_out)?;
            grads.norms[block].gamma = d_gamma;
            grads.norms[block].beta = d_beta;

            let convs: Vec<usize> = self.convs_of_block(block).collect();
            for (j, &ci) in convs.iter().enumerate().rev() {
                let activated = if j + 1 < convs.len() {
                    &bc.conv_inputs[j + 1]
                } else {
                    &bc.last_activation
                };
                relu_mask(&mut d_act, activated);
                let g =
                    conv2d_backward(&bc.conv_inputs[j], &self.params.convs[ci].weights, &d_act)?;
                grads.convs[ci].weights = g.d_weights;
                grads.convs[ci].bias = g.d_bias;
                d_act = g.d_input;
            }
            d_x = d_act;
        }
        Ok(grads)
    }
}
