use super::KernelGrads;
use crate::error::{shape_err, Result};
use crate::tensor::Tensor;

/// Spatial extent of every convolution kernel (stride 1, "same" zero padding).
pub const KERNEL_SIZE: usize = 3;
const PAD: usize = KERNEL_SIZE / 2;

struct ConvDims {
    n: usize,
    h: usize,
    w: usize,
    cin: usize,
    cout: usize,
}

fn conv_dims(input: &Tensor, weights: &Tensor, bias: Option<&Tensor>) -> Result<ConvDims> {
    let [n, h, w, cin] = input.dims4()?;
    let [kh, kw, wcin, cout] = weights.dims4()?;
    if kh != KERNEL_SIZE || kw != KERNEL_SIZE {
        return Err(shape_err!("conv kernel must be 3x3, got {kh}x{kw}"));
    }
    if wcin != cin {
        return Err(shape_err!(
            "conv input has {cin} channels but weights expect {wcin}"
        ));
    }
    if let Some(b) = bias {
        if b.shape() != [cout] {
            return Err(shape_err!(
                "conv bias shape {:?} does not match {cout} filters",
                b.shape()
            ));
        }
    }
    Ok(ConvDims { n, h, w, cin, cout })
}

/// Input row/column touched by kernel tap `k` for output coordinate `o`.
#[inline]
fn tap(o: usize, k: usize, extent: usize) -> Option<usize> {
    let i = (o + k).checked_sub(PAD)?;
    (i < extent).then_some(i)
}

pub fn conv2d_param_count(cin: usize, cout: usize) -> usize {
    KERNEL_SIZE * KERNEL_SIZE * cin * cout + cout
}

/// Cross-correlation of `input [N,H,W,Cin]` with `weights [3,3,Cin,Cout]`
/// plus a per-filter bias. Spatial size is preserved.
pub fn conv2d_forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let ConvDims { n, h, w, cin, cout } = conv_dims(input, weights, Some(bias))?;
    let x = input.data();
    let k = weights.data();
    let mut out = vec![0.0; n * h * w * cout];

    for (pix, out_px) in out.chunks_exact_mut(cout).enumerate() {
        let (b, y, xx) = (pix / (h * w), (pix / w) % h, pix % w);
        out_px.copy_from_slice(bias.data());
        for ky in 0..KERNEL_SIZE {
            let Some(iy) = tap(y, ky, h) else { continue };
            for kx in 0..KERNEL_SIZE {
                let Some(ix) = tap(xx, kx, w) else { continue };
                let in_px = &x[((b * h + iy) * w + ix) * cin..][..cin];
                let taps = &k[(ky * KERNEL_SIZE + kx) * cin * cout..][..cin * cout];
                for (&a, w_row) in in_px.iter().zip(taps.chunks_exact(cout)) {
                    if a == 0.0 {
                        continue;
                    }
                    for (o, &wv) in out_px.iter_mut().zip(w_row) {
                        *o += a * wv;
                    }
                }
            }
        }
    }
    Tensor::new(&[n, h, w, cout], out)
}

pub fn conv2d_backward(input: &Tensor, weights: &Tensor, d_out: &Tensor) -> Result<KernelGrads> {
    let ConvDims { n, h, w, cin, cout } = conv_dims(input, weights, None)?;
    if d_out.shape() != [n, h, w, cout] {
        return Err(shape_err!(
            "conv upstream gradient {:?} does not match output [{n}, {h}, {w}, {cout}]",
            d_out.shape()
        ));
    }
    let x = input.data();
    let k = weights.data();
    let dy = d_out.data();
    let mut dx = vec![0.0; x.len()];
    let mut dk = vec![0.0; k.len()];
    let mut db = vec![0.0; cout];

    for (pix, g) in dy.chunks_exact(cout).enumerate() {
        let (b, y, xx) = (pix / (h * w), (pix / w) % h, pix % w);
        for (acc, &v) in db.iter_mut().zip(g) {
            *acc += v;
        }
        for ky in 0..KERNEL_SIZE {
            let Some(iy) = tap(y, ky, h) else { continue };
            for kx in 0..KERNEL_SIZE {
                let Some(ix) = tap(xx, kx, w) else { continue };
                let base = ((b * h + iy) * w + ix) * cin;
                let tap_off = (ky * KERNEL_SIZE + kx) * cin * cout;
                let taps = &k[tap_off..][..cin * cout];
                let d_taps = &mut dk[tap_off..][..cin * cout];
                let in_px = &x[base..][..cin];
                let d_in_px = &mut dx[base..][..cin];
                for ci in 0..cin {
                    let w_row = &taps[ci * cout..][..cout];
                    d_in_px[ci] += dot(g, w_row);
                    let a = in_px[ci];
                    if a != 0.0 {
                        for (d, &gv) in d_taps[ci * cout..][..cout].iter_mut().zip(g) {
                            *d += a * gv;
                        }
                    }
                }
            }
        }
    }

    Ok(KernelGrads {
        d_input: Tensor::new(input.shape(), dx)?,
        d_weights: Tensor::new(weights.shape(), dk)?,
        d_bias: Tensor::new(&[cout], db)?,
    })
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
