use crate::error::{shape_err, Result};
use crate::tensor::Tensor;

pub struct PoolOutput {
    pub output: Tensor,
    /// Flat input index of the selected element for every output element.
    pub argmax: Vec<usize>,
}

/// 2x2 max pooling with stride 2. Ties resolve to the first element of the
/// window in row-major order.
pub fn maxpool2d_forward(input: &Tensor) -> Result<PoolOutput> {
    let [n, h, w, c] = input.dims4()?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(shape_err!("max pool needs even spatial dims, got {h}x{w}"));
    }
    let (oh, ow) = (h / 2, w / 2);
    let x = input.data();
    let mut out = Vec::with_capacity(n * oh * ow * c);
    let mut argmax = Vec::with_capacity(n * oh * ow * c);
    for b in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                for ch in 0..c {
                    let mut best_idx = ((b * h + 2 * oy) * w + 2 * ox) * c + ch;
                    let mut best = x[best_idx];
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = ((b * h + 2 * oy + dy) * w + 2 * ox + dx) * c + ch;
                        if x[idx] > best {
                            best = x[idx];
                            best_idx = idx;
                        }
                    }
                    out.push(best);
                    argmax.push(best_idx);
                }
            }
        }
    }
    Ok(PoolOutput {
        output: Tensor::new(&[n, oh, ow, c], out)?,
        argmax,
    })
}

/// Routes each upstream gradient to the stored argmax position.
pub fn maxpool2d_backward(
    d_out: &Tensor,
    argmax: &[usize],
    input_shape: &[usize],
) -> Result<Tensor> {
    if d_out.len() != argmax.len() {
        return Err(shape_err!(
            "pool gradient has {} elements but argmax has {}",
            d_out.len(),
            argmax.len()
        ));
    }
    let mut dx = Tensor::zeros(input_shape);
    let buf = dx.data_mut();
    for (&g, &idx) in d_out.data().iter().zip(argmax) {
        buf[idx] += g;
    }
    Ok(dx)
}
