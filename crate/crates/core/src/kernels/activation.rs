use crate::error::{shape_err, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    /// Normalizes over the last axis.
    Softmax,
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Row-wise softmax over the last axis with max subtraction.
pub fn softmax_rows(input: &Tensor) -> Tensor {
    let k = *input.shape().last().unwrap();
    let mut out = Vec::with_capacity(input.len());
    for row in input.data().chunks_exact(k) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let start = out.len();
        let mut total = 0.0;
        for &v in row {
            let e = (v - max).exp();
            total += e;
            out.push(e);
        }
        out[start..].iter_mut().for_each(|e| *e /= total);
    }
    Tensor::new(input.shape(), out).expect("shape preserved")
}

pub fn activation_forward(kind: Activation, input: &Tensor) -> Tensor {
    match kind {
        Activation::Relu => input.map(|v| v.max(0.0)),
        Activation::Sigmoid => input.map(sigmoid),
        Activation::Tanh => input.map(f64::tanh),
        Activation::Softmax => softmax_rows(input),
    }
}

/// Gradient with respect to the activation input, given the forward input,
/// output and upstream gradient.
pub fn activation_backward(
    kind: Activation,
    input: &Tensor,
    output: &Tensor,
    d_out: &Tensor,
) -> Result<Tensor> {
    if input.shape() != d_out.shape() || output.shape() != d_out.shape() {
        return Err(shape_err!(
            "activation gradient {:?} does not match forward {:?}",
            d_out.shape(),
            input.shape()
        ));
    }
    let x = input.data();
    let y = output.data();
    let g = d_out.data();
    let data: Vec<f64> = match kind {
        Activation::Relu => x
            .iter()
            .zip(g)
            .map(|(&xv, &gv)| if xv > 0.0 { gv } else { 0.0 })
            .collect(),
        Activation::Sigmoid => y
            .iter()
            .zip(g)
            .map(|(&s, &gv)| gv * s * (1.0 - s))
            .collect(),
        Activation::Tanh => y
            .iter()
            .zip(g)
            .map(|(&t, &gv)| gv * (1.0 - t * t))
            .collect(),
        Activation::Softmax => {
            let k = *input.shape().last().unwrap();
            let mut out = Vec::with_capacity(g.len());
            for (y_row, g_row) in y.chunks_exact(k).zip(g.chunks_exact(k)) {
                let inner: f64 = y_row.iter().zip(g_row).map(|(a, b)| a * b).sum();
                out.extend(y_row.iter().zip(g_row).map(|(yv, gv)| yv * (gv - inner)));
            }
            out
        }
    };
    Tensor::new(input.shape(), data)
}
