use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, OptimizerState};
use super::backprop::window_loss_and_gradients;
use super::objective::{window_loss, LossBreakdown};
use super::TrainConfig;
use crate::error::{Error, Result};
use crate::model::{DynamicState, ModelParams};
use crate::tkg::EventLog;

/// One optimizer step of global BPTT.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub window_index: usize,
    /// Index of the window's first event in the training log.
    pub start: usize,
    pub len: usize,
    pub loss: LossBreakdown,
    /// The cursor wrapped to the start of the timeline after this window.
    pub wrapped: bool,
}

/// Result of a finished training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub state: DynamicState,
    pub optimizer: OptimizerState,
    pub history: Vec<WindowRecord>,
}

/// Global BPTT over a single event timeline.
///
/// Windows of `window_steps` consecutive events are taken in order. State
/// is carried from one window to the next as plain values, so gradients stop
/// at window boundaries. When the window after the current one would run
/// past the end of the log, the cursor returns to the first event and the
/// state restarts from the initial embeddings.
pub struct Trainer<'a> {
    log: &'a EventLog,
    config: TrainConfig,
    params: ModelParams,
    state: DynamicState,
    optimizer: OptimizerState,
    cursor: usize,
    history: Vec<WindowRecord>,
}

impl<'a> Trainer<'a> {
    pub fn new(log: &'a EventLog, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if log.is_empty() {
            return Err(Error::arg("cannot train on an empty log"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let params = ModelParams::init(
            config.dims,
            log.n_entities(),
            log.n_relations(),
            config.weight_scale,
            &mut rng,
        )
        .with_numerics(config.numerics);
        Ok(Self::resume(log, config, params))
    }

    /// Starts from given parameters with a fresh optimizer and state.
    pub fn resume(log: &'a EventLog, config: TrainConfig, params: ModelParams) -> Self {
        let state = DynamicState::new(&params);
        let optimizer = OptimizerState::new(&params);
        Self {
            log,
            config,
            params,
            state,
            optimizer,
            cursor: 0,
            history: Vec::new(),
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn optimizer(&self) -> &OptimizerState {
        &self.optimizer
    }

    pub fn state(&self) -> &DynamicState {
        &self.state
    }

    pub fn history(&self) -> &[WindowRecord] {
        &self.history
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    /// Trains on the next window. On error nothing is modified, so
    /// [`Trainer::params`] still holds the last good parameters.
    pub fn step(&mut self) -> Result<WindowRecord> {
        let n = self.log.len();
        let s = self.config.window_steps;
        let start = self.cursor;
        let end = (start + s).min(n);
        let window = &self.log.events()[start..end];

        let (loss, grads, state_out) = window_loss_and_gradients(window, &self.state, &self.params)
            .map_err(|e| match e {
                Error::Numeric { index, message } => Error::Numeric {
                    index: start + index,
                    message,
                },
                other => other,
            })?;
        let mut params = self.params.clone();
        let mut optimizer = self.optimizer.clone();
        adam_step(&mut params, &grads, &mut optimizer, &self.config)?;
        self.params = params;
        self.optimizer = optimizer;

        let next = start + s;
        let wrapped = next + s > n;
        if wrapped {
            self.cursor = 0;
            self.state = DynamicState::new(&self.params);
        } else {
            self.cursor = next;
            self.state = state_out;
        }
        let record = WindowRecord {
            window_index: self.history.len(),
            start,
            len: window.len(),
            loss,
            wrapped,
        };
        self.history.push(record);
        Ok(record)
    }

    pub fn finish(self) -> TrainOutcome {
        TrainOutcome {
            params: self.params,
            state: self.state,
            optimizer: self.optimizer,
            history: self.history,
        }
    }
}

/// Runs `config.max_iter` windows of global BPTT from a fresh
/// initialization.
pub fn train_global_bptt(log: &EventLog, config: &TrainConfig) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(log, config.clone())?;
    for _ in 0..config.max_iter {
        trainer.step()?;
    }
    Ok(trainer.finish())
}

/// Objective summed over one pass of the timeline in windows of
/// `window_steps`, with state carried across windows as in training.
pub fn epoch_objective(
    log: &EventLog,
    params: &ModelParams,
    window_steps: usize,
) -> Result<LossBreakdown> {
    if window_steps == 0 {
        return Err(Error::arg("window_steps must be at least 1"));
    }
    let mut state = DynamicState::new(params);
    let mut total = LossBreakdown::default();
    for chunk in log.events().chunks(window_steps) {
        let (loss, next) = window_loss(chunk, &state, params)?;
        total += loss;
        state = next;
    }
    Ok(total)
}

/// `window_index,event_nll,survival,total`
pub fn history_to_csv(history: &[WindowRecord]) -> String {
    let mut out = String::from("window_index,event_nll,survival,total\n");
    for r in history {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.window_index, r.loss.event_nll, r.loss.survival, r.loss.total
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Dims;
    use crate::tkg::{simulate, EventRecord};

    fn small_log(n: usize) -> EventLog {
        let events = (0..n)
            .map(|i| EventRecord::new(i % 3, i % 2, (i + 1) % 3, i as f64 * 0.3))
            .collect();
        EventLog::from_events(events, 3, 2).unwrap().0
    }

    fn cfg(s: usize, max_iter: usize) -> TrainConfig {
        TrainConfig {
            window_steps: s,
            max_iter,
            dims: Dims::square(2, 2).unwrap(),
            ..TrainConfig::default()
        }
    }

    #[test]
    fn cursor_wraps_before_overrunning() {
        let log = small_log(10);
        let out = train_global_bptt(&log, &cfg(4, 7)).unwrap();
        let starts: Vec<_> = out.history.iter().map(|r| r.start).collect();
        assert_eq!(starts, vec![0, 4, 0, 4, 0, 4, 0]);
        let wraps: Vec<_> = out.history.iter().map(|r| r.wrapped).collect();
        assert_eq!(wraps, vec![false, true, false, true, false, true, false]);
    }

    #[test]
    fn short_log_uses_partial_window() {
        let log = small_log(3);
        let out = train_global_bptt(&log, &cfg(5, 2)).unwrap();
        assert!(out.history.iter().all(|r| r.start == 0 && r.len == 3));
    }

    #[test]
    fn zero_iterations_return_initialization() {
        let log = small_log(6);
        let config = cfg(2, 0);
        let out = train_global_bptt(&log, &config).unwrap();
        let init = Trainer::new(&log, config).unwrap();
        assert_eq!(&out.params, init.params());
        assert!(out.history.is_empty());
        assert!(out
            .params
            .weights
            .initial_embeddings
            .iter()
            .all(|&x| x == 0.0));
    }

    #[test]
    fn deterministic_history() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let truth = ModelParams::random(Dims::square(3, 2).unwrap(), 4, 2, 0.5, &mut rng);
        let log = simulate(&truth, 4, 2, 40, 7).unwrap();
        let config = TrainConfig {
            window_steps: 8,
            max_iter: 12,
            dims: Dims::square(3, 2).unwrap(),
            ..TrainConfig::default()
        };
        let a = train_global_bptt(&log, &config).unwrap();
        let b = train_global_bptt(&log, &config).unwrap();
        let bits =
            |h: &[WindowRecord]| -> Vec<u64> { h.iter().map(|r| r.loss.total.to_bits()).collect() };
        assert_eq!(bits(&a.history), bits(&b.history));
        assert_eq!(a.params, b.params);
        assert_eq!(history_to_csv(&a.history), history_to_csv(&b.history));
        assert!(history_to_csv(&a.history).starts_with("window_index,event_nll,survival,total\n0,"));
    }

    #[test]
    fn same_timestamp_bursts_stay_finite() {
        let events = (0..30)
            .map(|i| EventRecord::new(i % 4, 0, (i + 1) % 4, (i / 10) as f64))
            .collect();
        let log = EventLog::from_events(events, 4, 1).unwrap().0;
        let out = train_global_bptt(&log, &cfg(6, 10)).unwrap();
        for r in &out.history {
            assert!(r.loss.total.is_finite());
            assert!(r.loss.survival >= 0.0);
        }
    }
}
