use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Phase;
use crate::error::{shape_err, Error, Result};
use crate::tensor::Tensor;

/// Per-element multipliers applied in the forward pass: `0` for dropped
/// elements, `1 / (1 - rate)` for survivors.
#[derive(Debug, Clone)]
pub struct DropoutMask(Vec<f64>);

impl DropoutMask {
    pub fn dropped_fraction(&self) -> f64 {
        self.0.iter().filter(|m| **m == 0.0).count() as f64 / self.0.len() as f64
    }
}

/// Inverted dropout. Inference, and a zero rate, return the input unchanged
/// and no mask.
pub fn dropout_forward(
    input: &Tensor,
    rate: f64,
    seed: u64,
    phase: Phase,
) -> Result<(Tensor, Option<DropoutMask>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!(
            "dropout rate must be in [0, 1), got {rate}"
        )));
    }
    if phase == Phase::Infer || rate == 0.0 {
        return Ok((input.clone(), None));
    }
    let keep_scale = 1.0 / (1.0 - rate);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mask: Vec<f64> = (0..input.len())
        .map(|_| {
            if rng.random::<f64>() < rate {
                0.0
            } else {
                keep_scale
            }
        })
        .collect();
    let out = input.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
    Ok((Tensor::new(input.shape(), out)?, Some(DropoutMask(mask))))
}

pub fn dropout_backward(d_out: &Tensor, mask: Option<&DropoutMask>) -> Result<Tensor> {
    let Some(DropoutMask(mask)) = mask else {
        return Ok(d_out.clone());
    };
    if mask.len() != d_out.len() {
        return Err(shape_err!(
            "dropout mask has {} elements, gradient has {}",
            mask.len(),
            d_out.len()
        ));
    }
    let data = d_out.data().iter().zip(mask).map(|(g, m)| g * m).collect();
    Tensor::new(d_out.shape(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_and_inference_are_identity() {
        let x = Tensor::from_fn(&[4, 5], |i| i as f64);
        assert_eq!(dropout_forward(&x, 0.0, 1, Phase::Train).unwrap().0, x);
        assert_eq!(dropout_forward(&x, 0.5, 1, Phase::Infer).unwrap().0, x);
    }

    #[test]
    fn rate_outside_unit_interval_rejected() {
        let x = Tensor::zeros(&[2]);
        assert!(matches!(
            dropout_forward(&x, 1.0, 0, Phase::Train),
            Err(Error::Config(_))
        ));
        assert!(dropout_forward(&x, -0.1, 0, Phase::Train).is_err());
    }

    #[test]
    fn drop_fraction_converges_to_rate() {
        let x = Tensor::full(&[1_000_000], 1.0);
        let (out, mask) = dropout_forward(&x, 0.2, 42, Phase::Train).unwrap();
        let frac = mask.unwrap().dropped_fraction();
        assert!((frac - 0.2).abs() < 0.002, "{frac}");
        // inverted scaling keeps the expectation
        let mean = out.sum() / out.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn same_seed_same_mask() {
        let x = Tensor::full(&[64], 1.0);
        let a = dropout_forward(&x, 0.2, 9, Phase::Train).unwrap().0;
        let b = dropout_forward(&x, 0.2, 9, Phase::Train).unwrap().0;
        assert_eq!(a, b);
    }
}
