use super::KernelGrads;
use crate::error::{shape_err, Result};
use crate::tensor::Tensor;

pub fn dense_param_count(inputs: usize, units: usize) -> usize {
    inputs * units + units
}

fn dense_dims(input: &Tensor, weights: &Tensor) -> Result<(usize, usize, usize)> {
    let [n, d] = input.dims2()?;
    let [wd, u] = weights.dims2()?;
    if wd != d {
        return Err(shape_err!(
            "dense input width {d} does not match weight rows {wd}"
        ));
    }
    Ok((n, d, u))
}

/// `input [N,D] x weights [D,U] + bias [U]`.
pub fn dense_forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (n, d, u) = dense_dims(input, weights)?;
    if bias.shape() != [u] {
        return Err(shape_err!(
            "dense bias {:?} does not match {u} units",
            bias.shape()
        ));
    }
    let w = weights.data();
    let mut out = Vec::with_capacity(n * u);
    for row in input.data().chunks_exact(d) {
        let mut acc = bias.data().to_vec();
        for (&a, w_row) in row.iter().zip(w.chunks_exact(u)) {
            if a == 0.0 {
                continue;
            }
            for (o, &wv) in acc.iter_mut().zip(w_row) {
                *o += a * wv;
            }
        }
        out.extend_from_slice(&acc);
    }
    Tensor::new(&[n, u], out)
}

pub fn dense_backward(input: &Tensor, weights: &Tensor, d_out: &Tensor) -> Result<KernelGrads> {
    let (n, d, u) = dense_dims(input, weights)?;
    if d_out.shape() != [n, u] {
        return Err(shape_err!(
            "dense gradient {:?} does not match output [{n}, {u}]",
            d_out.shape()
        ));
    }
    let w = weights.data();
    let mut dx = Vec::with_capacity(n * d);
    let mut dw = vec![0.0; d * u];
    let mut db = vec![0.0; u];
    for (x_row, g) in input
        .data()
        .chunks_exact(d)
        .zip(d_out.data().chunks_exact(u))
    {
        for (acc, &gv) in db.iter_mut().zip(g) {
            *acc += gv;
        }
        for (i, (&a, w_row)) in x_row.iter().zip(w.chunks_exact(u)).enumerate() {
            dx.push(w_row.iter().zip(g).map(|(wv, gv)| wv * gv).sum());
            if a != 0.0 {
                for (acc, &gv) in dw[i * u..][..u].iter_mut().zip(g) {
                    *acc += a * gv;
                }
            }
        }
    }
    Ok(KernelGrads {
        d_input: Tensor::new(&[n, d], dx)?,
        d_weights: Tensor::new(&[d, u], dw)?,
        d_bias: Tensor::new(&[u], db)?,
    })
}
