use serde::{Deserialize, Serialize};

use crate::error::{QramError, Result};

/// Clamp applied to BCE inputs before taking logarithms.
pub const BCE_EPS: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    Mse,
    Bce,
}

/// Mean loss over the vector and its gradient with respect to `predictions`.
pub fn loss_and_grad(
    kind: LossKind,
    predictions: &[f64],
    targets: &[f64],
) -> Result<(f64, Vec<f64>)> {
    if predictions.len() != targets.len() {
        return Err(QramError::Structure(format!(
            "{} predictions vs {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    if predictions.is_empty() {
        return Err(QramError::Structure("empty prediction vector".into()));
    }
    let len = predictions.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(predictions.len());
    match kind {
        LossKind::Mse => {
            for (p, t) in predictions.iter().zip(targets) {
                let d = p - t;
                loss += d * d;
                grad.push(2.0 * d / len);
            }
        }
        LossKind::Bce => {
            for (p, t) in predictions.iter().zip(targets) {
                let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
                loss += -t * p.ln() - (1.0 - t) * (1.0 - p).ln();
                grad.push((-t / p + (1.0 - t) / (1.0 - p)) / len);
            }
        }
    }
    Ok((loss / len, grad))
}
