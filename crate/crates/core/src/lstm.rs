//! Unidirectional LSTM layer with backpropagation through time.
//!
//! Each gate owns one `(D + U) x U` weight matrix applied to the
//! concatenation `[x_t, h_{t-1}]`:
//!
//! ```text
//! i_t  = sigmoid(W_i [x_t, h_{t-1}] + b_i)
//! c~_t = tanh   (W_c [x_t, h_{t-1}] + b_c)
//! f_t  = sigmoid(W_f [x_t, h_{t-1}] + b_f)
//! o_t  = sigmoid(W_o [x_t, h_{t-1}] + b_o)
//! C_t  = f_t * C_{t-1} + i_t * c~_t
//! h_t  = o_t * tanh(C_t)
//! ```

use rand::Rng;

use crate::error::{shape_err, Error, Result};
use crate::kernels::activation_sigmoid as sigmoid;
use crate::tensor::Tensor;

/// Forget-gate bias at initialization.
pub const FORGET_BIAS_INIT: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w_i: Tensor,
    pub w_c: Tensor,
    pub w_f: Tensor,
    pub w_o: Tensor,
    pub b_i: Tensor,
    pub b_c: Tensor,
    pub b_f: Tensor,
    pub b_o: Tensor,
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let w = Tensor::zeros(&[input + hidden, hidden]);
        let b = Tensor::zeros(&[hidden]);
        Self {
            w_i: w.clone(),
            w_c: w.clone(),
            w_f: w.clone(),
            w_o: w,
            b_i: b.clone(),
            b_c: b.clone(),
            b_f: b.clone(),
            b_o: b,
        }
    }

    /// Uniform weights in `+-sqrt(6 / (D + 2U))`, zero biases except the
    /// forget gate which starts at [`FORGET_BIAS_INIT`].
    pub fn init<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (input + 2 * hidden) as f64).sqrt();
        let mut draw = || {
            Tensor::from_fn(&[input + hidden, hidden], |_| {
                rng.random_range(-limit..limit)
            })
        };
        let (w_i, w_c, w_f, w_o) = (draw(), draw(), draw(), draw());
        let mut p = Self::zeros(input, hidden);
        p.w_i = w_i;
        p.w_c = w_c;
        p.w_f = w_f;
        p.w_o = w_o;
        p.b_f = Tensor::full(&[hidden], FORGET_BIAS_INIT);
        p
    }

    pub fn input_size(&self) -> usize {
        self.w_i.shape()[0] - self.hidden_size()
    }

    pub fn hidden_size(&self) -> usize {
        self.w_i.shape()[1]
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// `[w_i, w_c, w_f, w_o, b_i, b_c, b_f, b_o]`.
    pub fn tensors(&self) -> [&Tensor; 8] {
        [
            &self.w_i, &self.w_c, &self.w_f, &self.w_o, &self.b_i, &self.b_c, &self.b_f, &self.b_o,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 8] {
        [
            &mut self.w_i,
            &mut self.w_c,
            &mut self.w_f,
            &mut self.w_o,
            &mut self.b_i,
            &mut self.b_c,
            &mut self.b_f,
            &mut self.b_o,
        ]
    }

    fn validate(&self) -> Result<()> {
        let w_shape = self.w_i.shape();
        let u = self.hidden_size();
        if w_shape.len() != 2 || w_shape[0] <= u {
            return Err(shape_err!(
                "lstm gate weights must be (D+U) x U, got {w_shape:?}"
            ));
        }
        for w in [&self.w_c, &self.w_f, &self.w_o] {
            if w.shape() != w_shape {
                return Err(shape_err!(
                    "lstm gate weights disagree: {:?} vs {w_shape:?}",
                    w.shape()
                ));
            }
        }
        for b in [&self.b_i, &self.b_c, &self.b_f, &self.b_o] {
            if b.shape() != [u] {
                return Err(shape_err!(
                    "lstm bias {:?} does not match {u} units",
                    b.shape()
                ));
            }
        }
        Ok(())
    }

    fn fingerprint(&self) -> u64 {
        // FNV-1a over the raw bits of every parameter.
        let mut hash = 0xcbf2_9ce4_8422_2325u64;
        for t in self.tensors() {
            for v in t.data() {
                hash ^= v.to_bits();
                hash = hash.wrapping_mul(0x0100_0000_01b3);
            }
        }
        hash
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Tensor,
    pub c: Tensor,
}

impl LstmState {
    pub fn zeros(batch: usize, hidden: usize) -> Self {
        Self {
            h: Tensor::zeros(&[batch, hidden]),
            c: Tensor::zeros(&[batch, hidden]),
        }
    }
}

/// Gate activations of one step, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct StepCache {
    z: Vec<f64>,
    i: Vec<f64>,
    g: Vec<f64>,
    f: Vec<f64>,
    o: Vec<f64>,
    c_prev: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl StepCache {
    pub fn input_gate(&self) -> &[f64] {
        &self.i
    }
    pub fn forget_gate(&self) -> &[f64] {
        &self.f
    }
    pub fn output_gate(&self) -> &[f64] {
        &self.o
    }
    pub fn candidate(&self) -> &[f64] {
        &self.g
    }
}

pub struct LstmCache {
    steps: Vec<StepCache>,
    batch: usize,
    input: usize,
    hidden: usize,
    fingerprint: u64,
}

/// Row-vector times matrix plus bias for every row of `z`.
fn gate_preactivation(z: &[f64], width: usize, w: &Tensor, b: &Tensor) -> Vec<f64> {
    let u = b.len();
    let mut out = Vec::with_capacity(z.len() / width * u);
    for row in z.chunks_exact(width) {
        let mut acc = b.data().to_vec();
        for (&a, w_row) in row.iter().zip(w.data().chunks_exact(u)) {
            if a == 0.0 {
                continue;
            }
            for (o, &wv) in acc.iter_mut().zip(w_row) {
                *o += a * wv;
            }
        }
        out.extend_from_slice(&acc);
    }
    out
}

/// One time step. Returns the new state and the cache needed for BPTT.
pub fn lstm_cell_step(
    x_t: &Tensor,
    prev: &LstmState,
    params: &LstmParams,
) -> Result<(LstmState, StepCache)> {
    params.validate()?;
    let (d, u) = (params.input_size(), params.hidden_size());
    let [n, xd] = x_t.dims2()?;
    if xd != d {
        return Err(shape_err!("lstm input width {xd} does not match {d}"));
    }
    if prev.h.shape() != [n, u] || prev.c.shape() != [n, u] {
        return Err(shape_err!(
            "lstm state {:?}/{:?} does not match [{n}, {u}]",
            prev.h.shape(),
            prev.c.shape()
        ));
    }
    let width = d + u;
    let mut z = Vec::with_capacity(n * width);
    for (x_row, h_row) in x_t
        .data()
        .chunks_exact(d)
        .zip(prev.h.data().chunks_exact(u))
    {
        z.extend_from_slice(x_row);
        z.extend_from_slice(h_row);
    }
    let i: Vec<f64> = gate_preactivation(&z, width, &params.w_i, &params.b_i)
        .into_iter()
        .map(sigmoid)
        .collect();
    let g: Vec<f64> = gate_preactivation(&z, width, &params.w_c, &params.b_c)
        .into_iter()
        .map(f64::tanh)
        .collect();
    let f: Vec<f64> = gate_preactivation(&z, width, &params.w_f, &params.b_f)
        .into_iter()
        .map(sigmoid)
        .collect();
    let o: Vec<f64> = gate_preactivation(&z, width, &params.w_o, &params.b_o)
        .into_iter()
        .map(sigmoid)
        .collect();
    let c_prev = prev.c.data().to_vec();
    let c: Vec<f64> = (0..n * u).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = o.iter().zip(&tanh_c).map(|(a, b)| a * b).collect();
    let state = LstmState {
        h: Tensor::new(&[n, u], h)?,
        c: Tensor::new(&[n, u], c)?,
    };
    Ok((
        state,
        StepCache {
            z,
            i,
            g,
            f,
            o,
            c_prev,
            tanh_c,
        },
    ))
}

/// Runs the cell over `x [N, T, D]` and emits `h_t` for every step as
/// `[N, T, U]`. Starts from zeros unless `init` is given.
pub fn lstm_sequence_forward(
    x: &Tensor,
    params: &LstmParams,
    init: Option<&LstmState>,
) -> Result<(Tensor, LstmCache)> {
    params.validate()?;
    let (d, u) = (params.input_size(), params.hidden_size());
    let [n, t, xd] = x.dims3()?;
    if xd != d {
        return Err(shape_err!("lstm input width {xd} does not match {d}"));
    }
    let mut state = match init {
        Some(s) => s.clone(),
        None => LstmState::zeros(n, u),
    };
    let mut out = vec![0.0; n * t * u];
    let mut steps = Vec::with_capacity(t);
    for step in 0..t {
        let mut x_t = Vec::with_capacity(n * d);
        for b in 0..n {
            x_t.extend_from_slice(&x.data()[(b * t + step) * d..][..d]);
        }
        let (next, cache) = lstm_cell_step(&Tensor::new(&[n, d], x_t)?, &state, params)?;
        for b in 0..n {
            out[(b * t + step) * u..][..u].copy_from_slice(&next.h.data()[b * u..][..u]);
        }
        steps.push(cache);
        state = next;
    }
    Ok((
        Tensor::new(&[n, t, u], out)?,
        LstmCache {
            steps,
            batch: n,
            input: d,
            hidden: u,
            fingerprint: params.fingerprint(),
        },
    ))
}

/// Backpropagation through time. Returns the input gradient `[N, T, D]` and
/// parameter gradients laid out like [`LstmParams`].
pub fn lstm_backward(
    cache: &LstmCache,
    params: &LstmParams,
    d_out: &Tensor,
) -> Result<(Tensor, LstmParams)> {
    let (n, d, u, t) = (cache.batch, cache.input, cache.hidden, cache.steps.len());
    if params.input_size() != d || params.hidden_size() != u {
        return Err(Error::Validation(format!(
            "lstm cache was built for D={d}, U={u} but params have D={}, U={}",
            params.input_size(),
            params.hidden_size()
        )));
    }
    if params.fingerprint() != cache.fingerprint {
        return Err(Error::Validation(
            "lstm cache is stale: parameters changed since the forward pass".into(),
        ));
    }
    if d_out.shape() != [n, t, u] {
        return Err(Error::Validation(format!(
            "lstm upstream gradient {:?} does not match cached [{n}, {t}, {u}]",
            d_out.shape()
        )));
    }
    let width = d + u;
    let mut grads = LstmParams::zeros(d, u);
    let mut dx = vec![0.0; n * t * d];
    let mut dh_next = vec![0.0; n * u];
    let mut dc_next = vec![0.0; n * u];
    let gate_weights = [&params.w_i, &params.w_c, &params.w_f, &params.w_o];

    for step in (0..t).rev() {
        let s = &cache.steps[step];
        // pre-activation gradients in gate order i, c, f, o
        let mut da = [
            vec![0.0; n * u],
            vec![0.0; n * u],
            vec![0.0; n * u],
            vec![0.0; n * u],
        ];
        for b in 0..n {
            for k in 0..u {
                let idx = b * u + k;
                let dh = d_out.data()[(b * t + step) * u + k] + dh_next[idx];
                let tc = s.tanh_c[idx];
                let dc = dh * s.o[idx] * (1.0 - tc * tc) + dc_next[idx];
                let d_o = dh * tc;
                let d_i = dc * s.g[idx];
                let d_g = dc * s.i[idx];
                let d_f = dc * s.c_prev[idx];
                dc_next[idx] = dc * s.f[idx];
                da[0][idx] = d_i * s.i[idx] * (1.0 - s.i[idx]);
                da[1][idx] = d_g * (1.0 - s.g[idx] * s.g[idx]);
                da[2][idx] = d_f * s.f[idx] * (1.0 - s.f[idx]);
                da[3][idx] = d_o * s.o[idx] * (1.0 - s.o[idx]);
            }
        }

        let mut dz = vec![0.0; n * width];
        {
            let [gw_i, gw_c, gw_f, gw_o, gb_i, gb_c, gb_f, gb_o] = grads.tensors_mut();
            let grad_w = [gw_i, gw_c, gw_f, gw_o];
            let grad_b = [gb_i, gb_c, gb_f, gb_o];
            for gate in 0..4 {
                let w = gate_weights[gate].data();
                let gw = grad_w[gate].data_mut();
                for b in 0..n {
                    let a_row = &da[gate][b * u..][..u];
                    let z_row = &s.z[b * width..][..width];
                    let dz_row = &mut dz[b * width..][..width];
                    for r in 0..width {
                        let w_row = &w[r * u..][..u];
                        dz_row[r] += w_row.iter().zip(a_row).map(|(p, q)| p * q).sum::<f64>();
                        let zr = z_row[r];
                        if zr != 0.0 {
                            for (acc, &av) in gw[r * u..][..u].iter_mut().zip(a_row) {
                                *acc += zr * av;
                            }
                        }
                    }
                    for (acc, &av) in grad_b[gate].data_mut().iter_mut().zip(a_row) {
                        *acc += av;
                    }
                }
            }
        }
        for b in 0..n {
            let dz_row = &dz[b * width..][..width];
            dx[(b * t + step) * d..][..d].copy_from_slice(&dz_row[..d]);
            dh_next[b * u..][..u].copy_from_slice(&dz_row[d..]);
        }
    }
    Ok((Tensor::new(&[n, t, d], dx)?, grads))
}
