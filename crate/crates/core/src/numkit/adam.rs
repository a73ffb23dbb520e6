use serde::{Deserialize, Serialize};

use super::ParamTensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// One bias-corrected Adam step with decoupled weight decay. Zeroes the
/// gradient afterwards.
pub fn adam_step(p: &mut ParamTensor, lr: f64, weight_decay: f64, cfg: &AdamConfig) -> Result<()> {
    if !(lr >= 0.0) {
        return Err(Error::Parameter(format!("learning rate must be >= 0, got {lr}")));
    }
    if !p.grad.is_finite() {
        return Err(Error::Diverged("non-finite gradient entry".into()));
    }
    p.step_count += 1;
    let t = p.step_count as f64;
    let bc1 = 1.0 - cfg.beta1.powf(t);
    let bc2 = 1.0 - cfg.beta2.powf(t);
    let ParamTensor { value, grad, adam_m, adam_v, .. } = p;
    let it = value.data_mut().iter_mut().zip(grad.data_mut()).zip(adam_m.data_mut().iter_mut().zip(adam_v.data_mut()));
    for ((w, g), (m, v)) in it {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * *g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * *g * *g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *w -= lr * (m_hat / (v_hat.sqrt() + cfg.eps) + weight_decay * *w);
        *g = 0.0;
    }
    Ok(())
}
