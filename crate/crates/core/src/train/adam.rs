use serde::{Deserialize, Serialize};

use super::backprop::GradientSet;
use super::TrainConfig;
use crate::error::{Error, Result};
use crate::model::{ModelParams, Weights};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment estimates, shaped like the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub first_moment: Weights,
    pub second_moment: Weights,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            first_moment: params.weights.zeros_like(),
            second_moment: params.weights.zeros_like(),
            step: 0,
        }
    }
}

/// Rescales `grads` in place so their global L2 norm is at most
/// `clip_norm`. Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut GradientSet, clip_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > clip_norm {
        let scale = clip_norm / norm;
        for arr in grads.arrays_mut() {
            arr.iter_mut().for_each(|g| *g *= scale);
        }
    }
    norm
}

/// One Adam update with bias correction, after global-norm clipping.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &GradientSet,
    opt: &mut OptimizerState,
    config: &TrainConfig,
) -> Result<()> {
    params.check_shape(grads)?;
    params.check_shape(&opt.first_moment)?;
    params.check_shape(&opt.second_moment)?;
    if !grads.is_finite() {
        return Err(Error::Numeric {
            index: 0,
            message: "non-finite gradient passed to the optimizer".into(),
        });
    }
    let mut grads = grads.clone();
    clip_global_norm(&mut grads, config.clip_norm);

    opt.step += 1;
    let t = opt.step as i32;
    let bias1 = 1.0 - BETA1.powi(t);
    let bias2 = 1.0 - BETA2.powi(t);
    let lr = config.learning_rate;

    let arrays = params
        .weights
        .arrays_mut()
        .into_iter()
        .zip(grads.arrays())
        .zip(opt.first_moment.arrays_mut())
        .zip(opt.second_moment.arrays_mut());
    for (((theta, g), m), v) in arrays {
        for i in 0..theta.len() {
            m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
            v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
            let m_hat = m[i] / bias1;
            let v_hat = v[i] / bias2;
            theta[i] -= lr * m_hat / (v_hat.sqrt() + EPSILON);
        }
    }
    Ok(())
}
