//! Forward-only evaluation of the window objective.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{linalg, rayleigh_log_intensity, DynamicState, ModelParams};
use crate::tkg::{EntityId, EventRecord};

/// The two braces of the negative log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// `−Σ log λ` over observed events.
    pub event_nll: f64,
    /// Sampled survival penalty; never negative.
    pub survival: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(event_nll: f64, survival: f64) -> Self {
        Self {
            event_nll,
            survival,
            total: event_nll + survival,
        }
    }
}

impl std::ops::AddAssign for LossBreakdown {
    fn add_assign(&mut self, rhs: Self) {
        *self = LossBreakdown::new(self.event_nll + rhs.event_nll, self.survival + rhs.survival);
    }
}

/// Distinct entities of a window in order of first appearance, subject
/// before object.
pub fn batch_entity_list(window: &[EventRecord]) -> Vec<EntityId> {
    let mut seen = Vec::new();
    for ev in window {
        for e in [ev.subject, ev.object] {
            if !seen.contains(&e) {
                seen.push(e);
            }
        }
    }
    seen
}

/// `(t² − t̄²)·exp(g)` summed over replacement objects, then over
/// replacement subjects, for one event against the pre-event state.
pub(crate) fn event_survival(
    state: &DynamicState,
    params: &ModelParams,
    ev: &EventRecord,
    batch_entities: &[EntityId],
) -> f64 {
    let n = &params.numerics;
    let rel = params.relation_matrix(ev.relation);
    let subj_feat = state.embedding(params, ev.subject);
    let obj_feat = state.embedding(params, ev.object);
    let t_end_sq = ev.time * ev.time;

    let mut subj_surv = 0.0;
    for &other in batch_entities {
        if other == ev.subject {
            continue;
        }
        let t_bar = state.pair_reference(ev.subject, other);
        let g = linalg::bilinear(subj_feat, rel, state.embedding(params, other));
        subj_surv += (t_end_sq - t_bar * t_bar) * n.clamp_score(g).exp();
    }
    let mut obj_surv = 0.0;
    for &other in batch_entities {
        if other == ev.object {
            continue;
        }
        let t_bar = state.pair_reference(other, ev.object);
        let g = linalg::bilinear(state.embedding(params, other), rel, obj_feat);
        obj_surv += (t_end_sq - t_bar * t_bar) * n.clamp_score(g).exp();
    }
    subj_surv + obj_surv
}

/// `−log λ` of an observed event against the pre-event state.
pub(crate) fn event_neg_log_intensity(
    state: &DynamicState,
    params: &ModelParams,
    ev: &EventRecord,
) -> f64 {
    let g = crate::model::score_unchecked(state, params, ev.subject, ev.relation, ev.object);
    let elapsed = ev.time - state.pair_reference(ev.subject, ev.object);
    -rayleigh_log_intensity(g, elapsed, &params.numerics)
}

/// Replays `window` from `state_in`, summing `−log λ` of each event before
/// applying it.
pub fn event_nll(
    window: &[EventRecord],
    state_in: &DynamicState,
    params: &ModelParams,
) -> Result<f64> {
    let mut state = state_in.clone();
    let mut total = 0.0;
    for (i, ev) in window.iter().enumerate() {
        state.check_event(params, ev, i)?;
        total += event_neg_log_intensity(&state, params, ev);
        state.apply_traced(params, ev, i)?;
    }
    Ok(total)
}

/// Sampled survival loss over the window's batch entity list.
pub fn survival_loss_minibatch(
    window: &[EventRecord],
    state_in: &DynamicState,
    params: &ModelParams,
) -> Result<f64> {
    let bl = batch_entity_list(window);
    let mut state = state_in.clone();
    let mut loss = 0.0;
    for (i, ev) in window.iter().enumerate() {
        state.check_event(params, ev, i)?;
        loss += event_survival(&state, params, ev, &bl);
        state.apply_traced(params, ev, i)?;
    }
    Ok(loss)
}

/// Every additive term of the window objective, in replay order: for each
/// event its `−log λ` followed by each survival summand. Differencing these
/// term by term lets unchanged terms cancel exactly.
pub(crate) fn window_loss_terms(
    window: &[EventRecord],
    state_in: &DynamicState,
    params: &ModelParams,
) -> Result<Vec<f64>> {
    let bl = batch_entity_list(window);
    let n = &params.numerics;
    let mut state = state_in.clone();
    let mut terms = Vec::with_capacity(window.len() * (2 * bl.len() + 1));
    for (i, ev) in window.iter().enumerate() {
        state.check_event(params, ev, i)?;
        terms.push(event_neg_log_intensity(&state, params, ev));
        let rel = params.relation_matrix(ev.relation);
        let t_sq = ev.time * ev.time;
        for &other in &bl {
            if other != ev.subject {
                let t_bar = state.pair_reference(ev.subject, other);
                let g = linalg::bilinear(
                    state.embedding(params, ev.subject),
                    rel,
                    state.embedding(params, other),
                );
                terms.push((t_sq - t_bar * t_bar) * n.clamp_score(g).exp());
            }
        }
        for &other in &bl {
            if other != ev.object {
                let t_bar = state.pair_reference(other, ev.object);
                let g = linalg::bilinear(
                    state.embedding(params, other),
                    rel,
                    state.embedding(params, ev.object),
                );
                terms.push((t_sq - t_bar * t_bar) * n.clamp_score(g).exp());
            }
        }
        state.apply_traced(params, ev, i)?;
    }
    Ok(terms)
}

/// Both loss terms in a single replay, plus the post-window state.
pub fn window_loss(
    window: &[EventRecord],
    state_in: &DynamicState,
    params: &ModelParams,
) -> Result<(LossBreakdown, DynamicState)> {
    let bl = batch_entity_list(window);
    let mut state = state_in.clone();
    let (mut nll, mut surv) = (0.0, 0.0);
    for (i, ev) in window.iter().enumerate() {
        state.check_event(params, ev, i)?;
        nll += event_neg_log_intensity(&state, params, ev);
        surv += event_survival(&state, params, ev, &bl);
        if !nll.is_finite() || !surv.is_finite() {
            return Err(Error::Numeric {
                index: i,
                message: format!("loss terms nll={nll} survival={surv}"),
            });
        }
        state.apply_traced(params, ev, i)?;
    }
    Ok((LossBreakdown::new(nll, surv), state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Dims;

    fn zero_params(ne: usize) -> ModelParams {
        ModelParams::zeros(Dims::square(2, 1).unwrap(), ne, 1)
    }

    #[test]
    fn nll_examples() {
        let p = zero_params(3);
        let st = DynamicState::new(&p);
        // λ = exp(0)·1 = 1
        let one = [EventRecord::new(0, 0, 1, 1.0)];
        assert_eq!(event_nll(&one, &st, &p).unwrap(), 0.0);

        // λ = e: unit gap and a relation matrix giving score 1
        let mut q = zero_params(3);
        q.weights.initial_embeddings = vec![1.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        q.weights.relation_matrices = vec![1.0, 0.0, 0.0, 0.0];
        let st = DynamicState::new(&q);
        assert!((event_nll(&one, &st, &q).unwrap() + 1.0).abs() < 1e-15);

        // λ = 2 then λ = 0.5 with zero scores: gaps 2 and 0.5
        let two = [
            EventRecord::new(0, 0, 1, 2.0),
            EventRecord::new(1, 0, 2, 2.5),
        ];
        let st = DynamicState::new(&p);
        assert!(event_nll(&two, &st, &p).unwrap().abs() < 1e-15);
    }

    #[test]
    fn survival_examples() {
        let p = zero_params(3);
        let st = DynamicState::new(&p);
        let one = [EventRecord::new(0, 0, 1, 1.0)];
        assert_eq!(survival_loss_minibatch(&one, &st, &p).unwrap(), 2.0);

        let mut st = DynamicState::new(&p);
        st.apply_event(&p, &EventRecord::new(0, 0, 1, 1.0)).unwrap();
        let again = [EventRecord::new(1, 0, 0, 1.0)];
        assert_eq!(survival_loss_minibatch(&again, &st, &p).unwrap(), 0.0);
    }

    #[test]
    fn window_loss_matches_parts() {
        let p = zero_params(4);
        let st = DynamicState::new(&p);
        let w = [
            EventRecord::new(0, 0, 1, 0.5),
            EventRecord::new(2, 0, 3, 0.7),
            EventRecord::new(1, 0, 2, 1.5),
        ];
        let (loss, _) = window_loss(&w, &st, &p).unwrap();
        assert_eq!(loss.event_nll, event_nll(&w, &st, &p).unwrap());
        assert_eq!(loss.survival, survival_loss_minibatch(&w, &st, &p).unwrap());
        assert_eq!(loss.total, loss.event_nll + loss.survival);
    }

    #[test]
    fn ordering_violation() {
        let p = zero_params(3);
        let w = [
            EventRecord::new(0, 0, 1, 2.0),
            EventRecord::new(1, 0, 2, 1.0),
        ];
        let st = DynamicState::new(&p);
        assert!(matches!(
            event_nll(&w, &st, &p),
            Err(Error::Ordering { index: 1, .. })
        ));
        assert!(survival_loss_minibatch(&w, &st, &p).is_err());
    }

    #[test]
    fn batch_list_first_appearance() {
        let w = [
            EventRecord::new(3, 0, 1, 0.0),
            EventRecord::new(1, 0, 0, 0.0),
        ];
        assert_eq!(batch_entity_list(&w), vec![3, 1, 0]);
    }
}
