use std::path::Path;

use super::checkpoint::load_checkpoint;
use super::network::ModelState;
use crate::error::{Error, Result};
use crate::kernels::softmax_rows;
use crate::tensor::Tensor;

/// Index of the largest entry of each row; ties go to the lowest index.
pub fn argmax_rows(t: &Tensor) -> Vec<usize> {
    let k = *t.shape().last().unwrap();
    t.data()
        .chunks_exact(k)
        .map(|row| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Softmax probabilities `[N, classes]`.
    pub probabilities: Tensor,
    pub labels: Vec<usize>,
}

pub fn predict(state: &ModelState, batch: &Tensor) -> Result<Prediction> {
    let logits = state.forward_infer(batch)?;
    let probabilities = softmax_rows(&logits);
    let labels = argmax_rows(&logits);
    Ok(Prediction {
        probabilities,
        labels,
    })
}

/// Holds an optional model; prediction fails until one is loaded.
#[derive(Debug, Default)]
pub struct Classifier {
    state: Option<ModelState>,
}

impl Classifier {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_state(state: ModelState) -> Self {
        Self { state: Some(state) }
    }

    pub fn load(&mut self, path: &Path) -> Result<&ModelState> {
        Ok(self.state.insert(load_checkpoint(path)?))
    }

    pub fn state(&self) -> Option<&ModelState> {
        self.state.as_ref()
    }

    pub fn predict(&self, batch: &Tensor) -> Result<Prediction> {
        let state = self
            .state
            .as_ref()
            .ok_or_else(|| Error::State("no model loaded".into()))?;
        predict(state, batch)
    }
}
