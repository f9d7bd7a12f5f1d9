//! Differentiable execution, losses, Adam, and the minibatch loop.

pub mod adam;
pub mod adjoint;
pub mod loss;
pub mod oracles;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{QramError, Result};
use crate::seeding::{self, Purpose};

pub use adam::AdamState;
pub use adjoint::{apply_circuit, grad_expectations, loss_and_param_grad, run_circuit};
pub use loss::{loss_and_grad, LossKind};

/// Uniform samples in `[0, 2pi)`.
pub fn init_params(n_params: usize, seed: u64) -> Vec<f64> {
    init_params_stream(n_params, seed, 0)
}

pub(crate) fn init_params_stream(n_params: usize, seed: u64, index: u64) -> Vec<f64> {
    let mut rng = seeding::stream(seed, Purpose::Init, index);
    (0..n_params)
        .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
        .collect()
}

/// Seeded permutation of `0..len`.
pub fn shuffled_order(len: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(rng);
    order
}

/// One pass over `order` in minibatches. Each sample's `(loss, grad)` may be
/// computed on any worker; gradients are summed in sample order so the result
/// does not depend on the thread count. Returns the mean per-sample loss.
pub fn minibatch_epoch<F>(
    params: &mut [f64],
    adam: &mut AdamState,
    order: &[usize],
    batch_size: usize,
    per_sample: F,
) -> Result<f64>
where
    F: Fn(&[f64], usize) -> Result<(f64, Vec<f64>)> + Sync,
{
    if batch_size == 0 {
        return Err(QramError::Config("batch size must be >= 1".into()));
    }
    let mut total_loss = 0.0;
    for batch in order.chunks(batch_size) {
        let frozen: &[f64] = params;
        let results: Vec<Result<(f64, Vec<f64>)>> =
            batch.par_iter().map(|&i| per_sample(frozen, i)).collect();
        let mut grad = vec![0.0; params.len()];
        for r in results {
            let (loss, g) = r?;
            if !loss.is_finite() {
                return Err(QramError::Numeric("non-finite sample loss".into()));
            }
            total_loss += loss;
            for (acc, x) in grad.iter_mut().zip(&g) {
                *acc += x;
            }
        }
        let scale = 1.0 / batch.len() as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        adam.step(params, &grad)?;
    }
    Ok(total_loss / order.len().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_params_deterministic_and_in_range() {
        let a = init_params(50, 7);
        assert_eq!(a, init_params(50, 7));
        assert!(a.iter().all(|&x| (0.0..std::f64::consts::TAU).contains(&x)));
        assert_ne!(init_params(4, 1), init_params(4, 2));
    }

    #[test]
    fn partial_last_batch_uses_true_size() {
        // loss = (p - 1)^2 per sample; three samples, batch 2 -> batches of 2 and 1
        let mut p = vec![0.0];
        let mut adam = AdamState::new(1, 0.1);
        let mut seen = Vec::new();
        let order = vec![0, 1, 2];
        let seen_ptr = std::sync::Mutex::new(&mut seen);
        minibatch_epoch(&mut p, &mut adam, &order, 2, |q, i| {
            seen_ptr.lock().unwrap().push(i);
            Ok(((q[0] - 1.0).powi(2), vec![2.0 * (q[0] - 1.0)]))
        })
        .unwrap();
        assert_eq!(adam.steps(), 2);
        seen.sort();
        assert_eq!(seen, vec![0, 1, 2]);
    }

    #[test]
    fn same_seed_same_trajectory() {
        let run = || {
            let mut p = init_params(3, 11);
            let mut adam = AdamState::new(3, 0.01);
            let mut rng = seeding::stream(11, Purpose::Shuffle, 0);
            for _ in 0..5 {
                let order = shuffled_order(10, &mut rng);
                minibatch_epoch(&mut p, &mut adam, &order, 4, |q, i| {
                    let t = i as f64 * 0.1;
                    let g: Vec<f64> = q.iter().map(|x| (x - t).sin()).collect();
                    Ok((g.iter().sum(), g))
                })
                .unwrap();
            }
            p
        };
        let a = run();
        let b = run();
        assert_eq!(
            a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }
}
