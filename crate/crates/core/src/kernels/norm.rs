//! Per-channel batch normalization over every axis but the last.

use crate::error::{shape_err, Error, Result};
use crate::tensor::Tensor;

pub const BN_EPSILON: f64 = 1e-5;
/// Weight kept on the previous running statistic at each update.
pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl RunningStats {
    pub fn new(channels: usize) -> Self {
        Self {
            mean: vec![0.0; channels],
            var: vec![1.0; channels],
        }
    }
}

pub struct BatchNormCache {
    x_hat: Vec<f64>,
    inv_std: Vec<f64>,
    shape: Vec<usize>,
}

fn channels(input: &Tensor, gamma: &Tensor, beta: &Tensor) -> Result<usize> {
    let c = *input.shape().last().unwrap();
    if gamma.shape() != [c] || beta.shape() != [c] {
        return Err(shape_err!(
            "batch norm affine params {:?}/{:?} do not match {c} channels",
            gamma.shape(),
            beta.shape()
        ));
    }
    Ok(c)
}

/// Normalizes with batch statistics (biased variance) and folds them into
/// `running` with momentum [`BN_MOMENTUM`].
pub fn batch_norm_forward_train(
    input: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    running: &mut RunningStats,
) -> Result<(Tensor, BatchNormCache)> {
    let c = channels(input, gamma, beta)?;
    let m = input.len() / c;
    if m < 2 {
        return Err(Error::Precondition(format!(
            "batch norm in train phase needs at least 2 values per channel, got {m}"
        )));
    }
    if running.mean.len() != c || running.var.len() != c {
        return Err(shape_err!("running stats do not match {c} channels"));
    }
    let x = input.data();
    let mut mean = vec![0.0; c];
    for row in x.chunks_exact(c) {
        for (acc, v) in mean.iter_mut().zip(row) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= m as f64);
    let mut var = vec![0.0; c];
    for row in x.chunks_exact(c) {
        for ((acc, v), mu) in var.iter_mut().zip(row).zip(&mean) {
            *acc += (v - mu) * (v - mu);
        }
    }
    var.iter_mut().for_each(|v| *v /= m as f64);
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPSILON).sqrt()).collect();

    let mut x_hat = Vec::with_capacity(x.len());
    let mut out = Vec::with_capacity(x.len());
    for row in x.chunks_exact(c) {
        for ch in 0..c {
            let xh = (row[ch] - mean[ch]) * inv_std[ch];
            x_hat.push(xh);
            out.push(gamma.data()[ch] * xh + beta.data()[ch]);
        }
    }
    for ch in 0..c {
        running.mean[ch] = BN_MOMENTUM * running.mean[ch] + (1.0 - BN_MOMENTUM) * mean[ch];
        running.var[ch] = BN_MOMENTUM * running.var[ch] + (1.0 - BN_MOMENTUM) * var[ch];
    }
    Ok((
        Tensor::new(input.shape(), out)?,
        BatchNormCache {
            x_hat,
            inv_std,
            shape: input.shape().to_vec(),
        },
    ))
}

pub fn batch_norm_forward_infer(
    input: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    running: &RunningStats,
) -> Result<Tensor> {
    let c = channels(input, gamma, beta)?;
    if running.mean.len() != c || running.var.len() != c {
        return Err(shape_err!("running stats do not match {c} channels"));
    }
    let scale: Vec<f64> = (0..c)
        .map(|ch| gamma.data()[ch] / (running.var[ch] + BN_EPSILON).sqrt())
        .collect();
    let mut out = Vec::with_capacity(input.len());
    for row in input.data().chunks_exact(c) {
        for ch in 0..c {
            out.push((row[ch] - running.mean[ch]) * scale[ch] + beta.data()[ch]);
        }
    }
    Tensor::new(input.shape(), out)
}

/// Returns `(d_input, d_gamma, d_beta)`.
pub fn batch_norm_backward(
    cache: &BatchNormCache,
    gamma: &Tensor,
    d_out: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    if d_out.shape() != cache.shape.as_slice() {
        return Err(shape_err!(
            "batch norm gradient {:?} does not match cached {:?}",
            d_out.shape(),
            cache.shape
        ));
    }
    let c = cache.inv_std.len();
    let m = d_out.len() / c;
    let dy = d_out.data();
    let mut d_gamma = vec![0.0; c];
    let mut d_beta = vec![0.0; c];
    for (g_row, xh_row) in dy.chunks_exact(c).zip(cache.x_hat.chunks_exact(c)) {
        for ch in 0..c {
            d_beta[ch] += g_row[ch];
            d_gamma[ch] += g_row[ch] * xh_row[ch];
        }
    }
    let mf = m as f64;
    let mut dx = Vec::with_capacity(dy.len());
    for (g_row, xh_row) in dy.chunks_exact(c).zip(cache.x_hat.chunks_exact(c)) {
        for ch in 0..c {
            let k = gamma.data()[ch] * cache.inv_std[ch] / mf;
            dx.push(k * (mf * g_row[ch] - d_beta[ch] - xh_row[ch] * d_gamma[ch]));
        }
    }
    Ok((
        Tensor::new(&cache.shape, dx)?,
        Tensor::new(&[c], d_gamma)?,
        Tensor::new(&[c], d_beta)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn channel_stats(t: &Tensor, c: usize) -> Vec<(f64, f64)> {
        (0..c)
            .map(|ch| {
                let vals: Vec<f64> = t.data().iter().skip(ch).step_by(c).copied().collect();
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                let var =
                    vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
                (mean, var)
            })
            .collect()
    }

    #[test]
    fn train_output_is_standardized() {
        let input = Tensor::from_fn(&[3, 4, 4, 2], |i| ((i * 37) % 11) as f64 * 1.7 - 3.0);
        let gamma = Tensor::full(&[2], 1.0);
        let beta = Tensor::zeros(&[2]);
        let mut rs = RunningStats::new(2);
        let (out, _) = batch_norm_forward_train(&input, &gamma, &beta, &mut rs).unwrap();
        for (mean, var) in channel_stats(&out, 2) {
            assert!(mean.abs() < 1e-6);
            // the epsilon in the denominator pulls the variance slightly below 1
            assert!((var - 1.0).abs() < 1e-5, "{var}");
        }
    }

    #[test]
    fn constant_input_maps_to_zero() {
        let input = Tensor::full(&[2, 2, 2, 3], 4.2);
        let gamma = Tensor::full(&[3], 1.0);
        let beta = Tensor::zeros(&[3]);
        let mut rs = RunningStats::new(3);
        let (out, _) = batch_norm_forward_train(&input, &gamma, &beta, &mut rs).unwrap();
        assert!(out.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn affine_shifts_and_scales() {
        let input = Tensor::from_fn(&[4, 3, 3, 1], |i| (i as f64 * 0.91).cos() * 5.0);
        let gamma = Tensor::full(&[1], 2.0);
        let beta = Tensor::full(&[1], 3.0);
        let mut rs = RunningStats::new(1);
        let (out, _) = batch_norm_forward_train(&input, &gamma, &beta, &mut rs).unwrap();
        let (mean, var) = channel_stats(&out, 1)[0];
        assert!((mean - 3.0).abs() < 1e-9);
        assert!((var.sqrt() - 2.0).abs() < 1e-5);
    }

    #[test]
    fn infer_with_unit_stats_is_identity() {
        let input = Tensor::from_fn(&[2, 2, 2, 2], |i| i as f64 - 3.5);
        let rs = RunningStats::new(2);
        let out =
            batch_norm_forward_infer(&input, &Tensor::full(&[2], 1.0), &Tensor::zeros(&[2]), &rs)
                .unwrap();
        assert!(out.max_abs_diff(&input) < 1e-4);
    }

    #[test]
    fn running_stats_follow_momentum() {
        let input = Tensor::new(&[4, 1], vec![1.0, 3.0, 5.0, 7.0]).unwrap();
        let mut rs = RunningStats::new(1);
        batch_norm_forward_train(
            &input,
            &Tensor::full(&[1], 1.0),
            &Tensor::zeros(&[1]),
            &mut rs,
        )
        .unwrap();
        assert!((rs.mean[0] - 0.4).abs() < 1e-12);
        assert!((rs.var[0] - (0.9 + 0.1 * 5.0)).abs() < 1e-12);
    }

    #[test]
    fn single_value_per_channel_rejected() {
        let input = Tensor::zeros(&[1, 1, 1, 2]);
        let mut rs = RunningStats::new(2);
        let err = batch_norm_forward_train(
            &input,
            &Tensor::full(&[2], 1.0),
            &Tensor::zeros(&[2]),
            &mut rs,
        );
        assert!(matches!(err, Err(Error::Precondition(_))));
    }
}
