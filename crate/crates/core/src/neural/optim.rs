//! Gradient-descent optimizers over a flat [`ParameterSet`].

use crate::error::{Error, Result};

use super::network::{GradientSet, ParameterSet};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OptimizerKind {
    /// `theta -= lr * grad`
    Plain,
    /// Adaptive moments with bias correction.
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Optimizer state for one parameter set.
#[derive(Clone, Debug, PartialEq)]
pub struct Optimizer {
    kind: OptimizerKind,
    first: Vec<f64>,
    second: Vec<f64>,
    steps: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, num_params: usize) -> Self {
        let moments = match kind {
            OptimizerKind::Plain => 0,
            OptimizerKind::Adam { .. } => num_params,
        };
        Self {
            kind,
            first: vec![0.0; moments],
            second: vec![0.0; moments],
            steps: 0,
        }
    }

    pub fn for_params(kind: OptimizerKind, params: &ParameterSet) -> Self {
        Self::new(kind, params.len())
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Apply one descent step. Rejects non-finite gradients without touching
    /// the parameters or the optimizer state.
    pub fn step(&mut self, params: &mut ParameterSet, grad: &GradientSet, lr: f64) -> Result<()> {
        params.check_congruent(&grad.layout)?;
        if !(lr >= 0.0) || !lr.is_finite() {
            return Err(Error::InvalidArgument(format!("learning rate must be >= 0, got {lr}")));
        }
        if let Some(index) = grad.values().iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { index });
        }
        self.steps += 1;
        match self.kind {
            OptimizerKind::Plain => {
                for (p, g) in params.values.iter_mut().zip(grad.values()) {
                    *p -= lr * g;
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                if self.first.len() != params.len() {
                    return Err(Error::DimensionMismatch {
                        context: "optimizer state",
                        expected: params.len(),
                        actual: self.first.len(),
                    });
                }
                let t = self.steps as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for (((p, g), m), v) in params
                    .values
                    .iter_mut()
                    .zip(grad.values())
                    .zip(self.first.iter_mut())
                    .zip(self.second.iter_mut())
                {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                }
            }
        }
        debug_assert!(params.is_finite());
        Ok(())
    }
}
