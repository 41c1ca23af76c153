//! Maximum-likelihood training: the window objective (observed-event term
//! plus sampled survival term), exact gradients through the unrolled
//! embedding updates, Adam with global-norm clipping, and global BPTT.

mod adam;
mod backprop;
mod bptt;
mod gradcheck;
mod objective;

use serde::{Deserialize, Serialize};

pub use adam::{adam_step, clip_global_norm, OptimizerState, BETA1, BETA2, EPSILON};
pub use backprop::{window_loss_and_gradients, GradientSet};
pub use bptt::{
    epoch_objective, history_to_csv, train_global_bptt, TrainOutcome, Trainer, WindowRecord,
};
pub use gradcheck::{grad_check, relative_error, GradCheckReport, REL_ERROR_FLOOR};
pub use objective::{
    batch_entity_list, event_nll, survival_loss_minibatch, window_loss, LossBreakdown,
};

use crate::error::{Error, Result};
use crate::model::{Dims, Numerics};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Events per BPTT window.
    pub window_steps: usize,
    pub learning_rate: f64,
    /// Global L2 norm threshold for gradient clipping.
    pub clip_norm: f64,
    /// Half-width of the uniform initialization of non-embedding weights.
    pub weight_scale: f64,
    /// Number of windows (optimizer steps).
    pub max_iter: usize,
    pub seed: u64,
    pub dims: Dims,
    pub numerics: Numerics,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            window_steps: 200,
            learning_rate: 0.0005,
            clip_norm: 5.0,
            weight_scale: 0.1,
            max_iter: 1000,
            seed: 0,
            dims: Dims {
                embed: 16,
                hidden: 16,
                relation: 8,
            },
            numerics: Numerics::default(),
        }
    }
}

impl TrainConfig {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if self.window_steps == 0 {
            return Err(Error::arg("window_steps must be at least 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::arg("learning_rate must be positive"));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::arg("clip_norm must be positive"));
        }
        if !(self.weight_scale >= 0.0) {
            return Err(Error::arg("weight_scale must be non-negative"));
        }
        if !(self.numerics.gap_floor >= 0.0) || !(self.numerics.score_clamp > 0.0) {
            return Err(Error::arg("gap_floor must be >= 0 and score_clamp > 0"));
        }
        self.dims.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_reported_hyperparameters() {
        let c = TrainConfig::default();
        assert_eq!(c.window_steps, 200);
        assert_eq!(c.learning_rate, 0.0005);
        assert_eq!(c.weight_scale, 0.1);
        c.validate().unwrap();
    }

    #[test]
    fn invalid_configs() {
        let bad = |f: fn(&mut TrainConfig)| {
            let mut c = TrainConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.window_steps = 0));
        assert!(bad(|c| c.learning_rate = 0.0));
        assert!(bad(|c| c.clip_norm = -1.0));
        assert!(bad(|c| c.dims.hidden = 0));
    }
}
