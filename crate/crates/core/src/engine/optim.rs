use super::config::{OptimizerKind, TrainConfig};

/// Nesterov step used as ascent on `direction`:
///
/// ```text
/// velocity ← momentum·velocity + direction
/// param    ← param + lr·(momentum·velocity + direction)
/// ```
pub fn nesterov_update(param: &mut [f64], velocity: &mut [f64], direction: &[f64], lr: f64, momentum: f64) {
    debug_assert_eq!(param.len(), velocity.len());
    debug_assert_eq!(param.len(), direction.len());
    for ((p, v), d) in param.iter_mut().zip(velocity.iter_mut()).zip(direction) {
        *v = momentum * *v + d;
        *p += lr * (momentum * *v + d);
    }
}

/// Applies the configured optimizer to one parameter block.
pub fn apply_update(cfg: &TrainConfig, param: &mut [f64], velocity: &mut [f64], direction: &[f64], lr: f64) {
    match cfg.optimizer {
        OptimizerKind::Nesterov => nesterov_update(param, velocity, direction, lr, cfg.momentum),
        OptimizerKind::Plain => {
            for (p, d) in param.iter_mut().zip(direction) {
                *p += lr * d;
            }
        }
    }
}

/// `base_lr · ratio^(#decay epochs ≤ epoch)`
pub fn lr_at(cfg: &TrainConfig, epoch: usize) -> f64 {
    let decays = cfg.lr_decay_epochs.iter().filter(|&&e| e <= epoch).count();
    cfg.base_lr * cfg.lr_decay_ratio.powi(decays as i32)
}

/// `grad / B − λ·param`, the ascent direction of a batch-summed gradient.
pub(crate) fn batch_direction(grad: &[f64], inv_batch: f64, weight_decay: f64, param: &[f64]) -> Vec<f64> {
    grad.iter()
        .zip(param)
        .map(|(g, p)| g * inv_batch - weight_decay * p)
        .collect()
}
