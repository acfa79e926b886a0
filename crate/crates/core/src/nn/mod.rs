//! Dense ReLU networks with manual reverse-mode gradients.

mod gradcheck;
mod mlp;
mod optim;

pub use gradcheck::{grad_check, relative_error, GradCheckReport};
pub use mlp::{Cache, Grads, Mlp, OutputActivation};
pub use optim::{sgd_step, soft_update, Adam, AdamConfig};

/// Mean-squared-error loss `mean((pred - target)^2)` and its gradient w.r.t. `pred`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let n = pred.len().max(1) as f64;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let d = p - t;
            loss += d * d;
            2.0 * d / n
        })
        .collect();
    (loss / n, grad)
}
