use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::ParamStore;

/// Adaptive-moment optimizer over a [`ParamStore`], reading each
/// parameter's accumulated gradient.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    moments: BTreeMap<String, (Vec<f64>, Vec<f64>)>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            moments: BTreeMap::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update from the stored gradients and clears them.
    /// Parameters without a gradient are left alone.
    pub fn step(&mut self, params: &mut ParamStore) -> Result<()> {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (name, p) in params.iter_mut() {
            let Some(g) = p.grad().map(<[f64]>::to_vec) else { continue };
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::Contract(format!("non-finite gradient for '{name}'")));
            }
            let (m, v) = self
                .moments
                .entry(name.clone())
                .or_insert_with(|| (vec![0.0; g.len()], vec![0.0; g.len()]));
            let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
            for (((x, gi), mi), vi) in p.data_mut().iter_mut().zip(&g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = b1 * *mi + (1.0 - b1) * gi;
                *vi = b2 * *vi + (1.0 - b2) * gi * gi;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *x -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            p.zero_grad();
        }
        Ok(())
    }
}
