use crate::error::{Error, Result};

use super::params::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    SgdMomentum { momentum: f64 },
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl OptimizerKind {
    pub fn sgd(momentum: f64) -> Self {
        OptimizerKind::SgdMomentum { momentum }
    }

    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Optimizer hyperparameters plus per-parameter buffers. For SGD the first
/// buffer holds the velocity; for Adam the two buffers are the moments.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    learning_rate: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                learning_rate
            )));
        }
        Ok(OptimizerState {
            kind,
            learning_rate,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        })
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.learning_rate = lr;
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    fn ensure_buffers(&mut self, params: &ParamStore) -> Result<()> {
        if self.first.is_empty() {
            self.first = params.iter().map(|(_, p)| vec![0.0; p.value.len()]).collect();
            if matches!(self.kind, OptimizerKind::Adam { .. }) {
                self.second = self.first.clone();
            }
        }
        if self.first.len() != params.len()
            || self
                .first
                .iter()
                .zip(params.iter())
                .any(|(b, (_, p))| b.len() != p.value.len())
        {
            return Err(Error::Shape(
                "optimizer buffers do not mirror the parameter store".into(),
            ));
        }
        Ok(())
    }

    /// Apply one update from the gradients currently held in `params`.
    pub fn step(&mut self, params: &mut ParamStore) -> Result<()> {
        self.ensure_buffers(params)?;
        for (name, p) in params.iter() {
            if !p.grad.all_finite() {
                return Err(Error::NonFinite(format!("gradient of {}", name)));
            }
        }
        self.step += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::SgdMomentum { momentum } => {
                for ((_, p), vel) in params.iter_mut().zip(self.first.iter_mut()) {
                    let grad = p.grad.values();
                    for ((v, x), &g) in vel.iter_mut().zip(p.value.values_mut()).zip(grad) {
                        *v = momentum * *v - lr * g;
                        *x += *v;
                    }
                }
            }
            OptimizerKind::Adam {
                beta1,
                beta2,
                epsilon,
            } => {
                let t = self.step as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for (((_, p), m), v) in params
                    .iter_mut()
                    .zip(self.first.iter_mut())
                    .zip(self.second.iter_mut())
                {
                    let grad = p.grad.values();
                    for (((mi, vi), x), &g) in m
                        .iter_mut()
                        .zip(v.iter_mut())
                        .zip(p.value.values_mut())
                        .zip(grad)
                    {
                        *mi = beta1 * *mi + (1.0 - beta1) * g;
                        *vi = beta2 * *vi + (1.0 - beta2) * g * g;
                        let mhat = *mi / c1;
                        let vhat = *vi / c2;
                        *x -= lr * mhat / (vhat.sqrt() + epsilon);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Learning rate for epoch `epoch` (0-based) under `lr₀ / (1 + decay·epoch)`.
pub fn decayed_learning_rate(initial: f64, decay: f64, epoch: usize) -> f64 {
    initial / (1.0 + decay * epoch as f64)
}
