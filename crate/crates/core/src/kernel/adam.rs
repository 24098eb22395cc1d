use super::Matrix;
use crate::error::{Error, Result};

/// A named learnable tensor with its gradient buffer and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBlock {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
    pub adam_m: Matrix,
    pub adam_v: Matrix,
    pub step_count: u64,
}

impl ParamBlock {
    pub fn new(name: impl Into<String>, value: Matrix) -> Self {
        let (r, c) = value.shape();
        ParamBlock {
            name: name.into(),
            grad: Matrix::zeros(r, c),
            adam_m: Matrix::zeros(r, c),
            adam_v: Matrix::zeros(r, c),
            value,
            step_count: 0,
        }
    }

    pub fn zeros(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        Self::new(name, Matrix::zeros(rows, cols))
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value.shape()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update. The gradient is zeroed afterwards. A
/// non-finite gradient leaves the block untouched and returns an error.
pub fn adam_step(param: &mut ParamBlock, learning_rate: f32, config: &AdamConfig) -> Result<()> {
    if !param.grad.is_finite() {
        return Err(Error::NonFiniteGradient(param.name.clone()));
    }
    param.step_count += 1;
    let t = param.step_count as i32;
    let correction1 = (1.0 - (config.beta1 as f64).powi(t)) as f32;
    let correction2 = (1.0 - (config.beta2 as f64).powi(t)) as f32;
    let (b1, b2) = (config.beta1, config.beta2);

    let value = param.value.as_mut_slice();
    let m = param.adam_m.as_mut_slice();
    let v = param.adam_v.as_mut_slice();
    for (i, g) in param.grad.as_mut_slice().iter_mut().enumerate() {
        m[i] = b1 * m[i] + (1.0 - b1) * *g;
        v[i] = b2 * v[i] + (1.0 - b2) * *g * *g;
        let m_hat = m[i] / correction1;
        let v_hat = v[i] / correction2;
        value[i] -= learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
        *g = 0.0;
    }
    Ok(())
}
