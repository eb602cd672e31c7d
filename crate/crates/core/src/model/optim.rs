//! Adam with an exponentially decaying, epoch-stepped learning rate.

use serde::{Deserialize, Serialize};

use super::network::{ModelState, Params};
use crate::error::{shape_err, Error, Result};
use crate::tensor::Tensor;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// `lr(epoch) = initial * decay_rate ^ floor(epoch / decay_step)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub initial: f64,
    pub decay_rate: f64,
    pub decay_step: usize,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self {
            initial: 0.001,
            decay_rate: 0.95,
            decay_step: 1,
        }
    }
}

impl LrSchedule {
    pub fn lr(&self, epoch: usize) -> f64 {
        let exponent = (epoch / self.decay_step.max(1)) as i32;
        self.initial * self.decay_rate.powi(exponent)
    }
}

/// First and second moments per parameter tensor, allocated on the first
/// step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub step: u64,
}

impl AdamState {
    /// One bias-corrected Adam update of `params` in place.
    pub fn update(&mut self, params: &mut [&mut Tensor], grads: &[&Tensor], lr: f64) -> Result<()> {
        if params.len() != grads.len() {
            return Err(shape_err!(
                "{} parameter tensors but {} gradients",
                params.len(),
                grads.len()
            ));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() {
                return Err(shape_err!(
                    "gradient {i} shaped {:?}, parameter {:?}",
                    g.shape(),
                    p.shape()
                ));
            }
            if !g.is_finite() {
                return Err(Error::NonFinite(format!(
                    "gradient of parameter tensor {i} contains NaN or Inf at optimizer step {}",
                    self.step + 1
                )));
            }
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| Tensor::zeros_like(p)).collect();
            self.v = self.m.clone();
        } else if self.m.len() != params.len() {
            return Err(shape_err!(
                "optimizer holds {} moments for {} tensors",
                self.m.len(),
                params.len()
            ));
        }
        self.step += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.step as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.step as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let pd = p.data_mut();
            for (k, &gk) in g.data().iter().enumerate() {
                let mk = &mut m.data_mut()[k];
                *mk = ADAM_BETA1 * *mk + (1.0 - ADAM_BETA1) * gk;
                let mk = *mk;
                let vk = &mut v.data_mut()[k];
                *vk = ADAM_BETA2 * *vk + (1.0 - ADAM_BETA2) * gk * gk;
                let vk = *vk;
                let m_hat = mk / bc1;
                let v_hat = vk / bc2;
                pd[k] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
            }
        }
        Ok(())
    }
}

/// Applies one optimizer step to the model at the learning rate of `epoch`.
pub fn adam_step(
    state: &mut ModelState,
    grads: &Params,
    schedule: &LrSchedule,
    epoch: usize,
) -> Result<()> {
    let lr = schedule.lr(epoch);
    let grads = grads.tensors();
    let mut params = state.params.tensors_mut();
    state.optimizer.update(&mut params, &grads, lr)
}
