use super::activation::softmax_rows;
use crate::error::{shape_err, Error, Result};
use crate::tensor::Tensor;

/// Mean softmax cross-entropy over the batch. Returns the loss and its
/// gradient with respect to the logits, `(softmax - labels) / N`.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &Tensor) -> Result<(f64, Tensor)> {
    let [n, k] = logits.dims2()?;
    if labels.shape() != logits.shape() {
        return Err(shape_err!(
            "labels {:?} do not match logits {:?}",
            labels.shape(),
            logits.shape()
        ));
    }
    for (i, row) in labels.data().chunks_exact(k).enumerate() {
        let ones = row.iter().filter(|v| **v == 1.0).count();
        let zeros = row.iter().filter(|v| **v == 0.0).count();
        if ones != 1 || zeros != k - 1 {
            return Err(Error::Validation(format!(
                "label row {i} is not one-hot: {row:?}"
            )));
        }
    }
    let probs = softmax_rows(logits);
    let mut loss = 0.0;
    for (z, y) in logits
        .data()
        .chunks_exact(k)
        .zip(labels.data().chunks_exact(k))
    {
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let target: f64 = z.iter().zip(y).map(|(zv, yv)| zv * yv).sum();
        loss += lse - target;
    }
    let nf = n as f64;
    let grad = probs
        .data()
        .iter()
        .zip(labels.data())
        .map(|(p, y)| (p - y) / nf)
        .collect();
    Ok((loss / nf, Tensor::new(&[n, k], grad)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_hot(rows: &[usize], k: usize) -> Tensor {
        Tensor::from_fn(&[rows.len(), k], |i| {
            if rows[i / k] == i % k {
                1.0
            } else {
                0.0
            }
        })
    }

    #[test]
    fn uniform_logits_cost_ln_k() {
        let (loss, _) =
            softmax_cross_entropy(&Tensor::zeros(&[3, 4]), &one_hot(&[0, 1, 3], 4)).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_prediction_costs_nothing() {
        let logits = Tensor::new(&[1, 4], vec![60.0, 0.0, 0.0, 0.0]).unwrap();
        let (loss, grad) = softmax_cross_entropy(&logits, &one_hot(&[0], 4)).unwrap();
        assert!(loss < 1e-25);
        assert!(grad.data().iter().all(|g| g.abs() < 1e-25));
    }

    #[test]
    fn non_one_hot_labels_rejected() {
        let labels = Tensor::new(&[1, 3], vec![0.5, 0.5, 0.0]).unwrap();
        let err = softmax_cross_entropy(&Tensor::zeros(&[1, 3]), &labels);
        assert!(matches!(err, Err(Error::Validation(_))));
    }
}
