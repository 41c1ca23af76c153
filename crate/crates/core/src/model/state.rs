use serde::{Deserialize, Serialize};

use super::linalg::{matvec, matvec_t_add};
use super::ModelParams;
use crate::error::{Error, Result};
use crate::tkg::{EntityId, EventRecord, RelationId};

/// Evolving per-entity embeddings with each entity's last event time and
/// relation. Embeddings are constant between an entity's own events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicState {
    dim: usize,
    embeddings: Vec<f64>,
    last_time: Vec<Option<f64>>,
    last_relation: Vec<Option<RelationId>>,
}

/// Intermediate values of one embedding update, kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct UpdateTrace {
    /// `[own ⊕ other ⊕ previous relation embedding]`.
    pub input: Vec<f64>,
    pub hidden: Vec<f64>,
    pub output: Vec<f64>,
    pub elapsed: f64,
    pub prev_relation: Option<RelationId>,
}

#[derive(Debug, Clone)]
pub(crate) struct EventTrace {
    pub subject: UpdateTrace,
    pub object: UpdateTrace,
}

impl DynamicState {
    /// State before any event: every entity sits at its initial embedding.
    pub fn new(params: &ModelParams) -> Self {
        Self {
            dim: params.dims.embed,
            embeddings: params.weights.initial_embeddings.clone(),
            last_time: vec![None; params.n_entities],
            last_relation: vec![None; params.n_entities],
        }
    }

    pub fn n_entities(&self) -> usize {
        self.last_time.len()
    }

    /// Current embedding. Entities without history read their initial
    /// embedding straight from `params`, so the state never holds a stale
    /// copy after a parameter update.
    pub fn embedding<'a>(&'a self, params: &'a ModelParams, e: EntityId) -> &'a [f64] {
        if self.last_time[e].is_some() {
            &self.embeddings[e * self.dim..(e + 1) * self.dim]
        } else {
            params.initial_embedding(e)
        }
    }

    pub fn last_time(&self, e: EntityId) -> Option<f64> {
        self.last_time[e]
    }

    pub fn last_relation(&self, e: EntityId) -> Option<RelationId> {
        self.last_relation[e]
    }

    pub fn has_history(&self, e: EntityId) -> bool {
        self.last_time[e].is_some()
    }

    /// `max` of the two entities' last event times, `0` without history.
    pub fn last_time_bar(&self, s: EntityId, o: EntityId) -> Result<f64> {
        if s == o {
            return Err(Error::arg(format!("subject and object are both {s}")));
        }
        if s >= self.n_entities() || o >= self.n_entities() {
            return Err(Error::arg(format!("entity pair ({s}, {o}) out of range")));
        }
        Ok(self.pair_reference(s, o))
    }

    pub(crate) fn pair_reference(&self, s: EntityId, o: EntityId) -> f64 {
        self.last_time[s]
            .unwrap_or(0.0)
            .max(self.last_time[o].unwrap_or(0.0))
    }

    /// Updates both entities of `event` from the pre-event snapshot.
    pub fn apply_event(&mut self, params: &ModelParams, event: &EventRecord) -> Result<()> {
        self.apply_traced(params, event, 0).map(|_| ())
    }

    pub(crate) fn check_event(
        &self,
        params: &ModelParams,
        event: &EventRecord,
        index: usize,
    ) -> Result<()> {
        params.check_entity(event.subject)?;
        params.check_entity(event.object)?;
        params.check_relation(event.relation)?;
        if event.subject == event.object {
            return Err(Error::arg(format!("self-loop on entity {}", event.subject)));
        }
        for e in [event.subject, event.object] {
            if let Some(last) = self.last_time[e] {
                if event.time < last {
                    return Err(Error::Ordering {
                        index,
                        time: event.time,
                        last,
                    });
                }
            }
        }
        Ok(())
    }

    pub(crate) fn apply_traced(
        &mut self,
        params: &ModelParams,
        event: &EventRecord,
        index: usize,
    ) -> Result<EventTrace> {
        self.check_event(params, event, index)?;
        let (s, o) = (event.subject, event.object);
        let w = &params.weights;
        let subject = update_embedding(
            params,
            self.embedding(params, s),
            self.embedding(params, o),
            self.last_relation[s],
            event.time - self.last_time[s].unwrap_or(0.0),
            &w.drift_subject,
        );
        let object = update_embedding(
            params,
            self.embedding(params, o),
            self.embedding(params, s),
            self.last_relation[o],
            event.time - self.last_time[o].unwrap_or(0.0),
            &w.drift_object,
        );
        let d = self.dim;
        self.embeddings[s * d..(s + 1) * d].copy_from_slice(&subject.output);
        self.embeddings[o * d..(o + 1) * d].copy_from_slice(&object.output);
        for e in [s, o] {
            self.last_time[e] = Some(event.time);
            self.last_relation[e] = Some(event.relation);
        }
        Ok(EventTrace { subject, object })
    }
}

/// `tanh(drift·elapsed + W_hh·tanh(W_h·[own ⊕ other ⊕ rel_prev]))`.
/// A missing previous relation contributes a zero vector.
pub(crate) fn update_embedding(
    params: &ModelParams,
    own: &[f64],
    other: &[f64],
    prev_relation: Option<RelationId>,
    elapsed: f64,
    drift: &[f64],
) -> UpdateTrace {
    let dims = params.dims;
    let mut input = Vec::with_capacity(dims.update_input());
    input.extend_from_slice(own);
    input.extend_from_slice(other);
    match prev_relation {
        Some(r) => input.extend_from_slice(params.relation_embedding(r)),
        None => input.resize(dims.update_input(), 0.0),
    }

    let mut hidden = vec![0.0; dims.hidden];
    matvec(&params.weights.projection, &input, &mut hidden);
    hidden.iter_mut().for_each(|h| *h = h.tanh());

    let mut output: Vec<f64> = drift.iter().map(|w| w * elapsed).collect();
    let mut pre = vec![0.0; dims.embed];
    matvec(&params.weights.recurrent, &hidden, &mut pre);
    for (o, p) in output.iter_mut().zip(&pre) {
        *o = (*o + p).tanh();
    }
    UpdateTrace {
        input,
        hidden,
        output,
        elapsed,
        prev_relation,
    }
}

/// Accumulates gradients of one [`update_embedding`] call given the adjoint of
/// its output, returning the adjoint of its input vector.
pub(crate) fn backprop_update(
    params: &ModelParams,
    trace: &UpdateTrace,
    output_adjoint: &[f64],
    drift_grad: &mut [f64],
    recurrent_grad: &mut [f64],
    projection_grad: &mut [f64],
) -> Vec<f64> {
    use super::linalg::add_outer;
    let dims = params.dims;
    let pre_adj: Vec<f64> = output_adjoint
        .iter()
        .zip(&trace.output)
        .map(|(a, v)| a * (1.0 - v * v))
        .collect();
    for (g, a) in drift_grad.iter_mut().zip(&pre_adj) {
        *g += a * trace.elapsed;
    }
    add_outer(recurrent_grad, &pre_adj, &trace.hidden, 1.0);
    let mut hidden_adj = vec![0.0; dims.hidden];
    matvec_t_add(&params.weights.recurrent, &pre_adj, &mut hidden_adj);
    for (a, h) in hidden_adj.iter_mut().zip(&trace.hidden) {
        *a *= 1.0 - h * h;
    }
    add_outer(projection_grad, &hidden_adj, &trace.input, 1.0);
    let mut input_adj = vec![0.0; dims.update_input()];
    matvec_t_add(&params.weights.projection, &hidden_adj, &mut input_adj);
    input_adj
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Dims;

    fn scalar_params() -> ModelParams {
        let mut p = ModelParams::zeros(Dims::new(1, 1, 1).unwrap(), 3, 2);
        p.weights.projection = vec![1.0, 1.0, 1.0];
        p.weights.recurrent = vec![1.0];
        p.weights.relation_embeddings = vec![0.1, -0.3];
        p
    }

    #[test]
    fn last_time_bar_cases() {
        let p = ModelParams::zeros(Dims::square(2, 1).unwrap(), 3, 1);
        let mut st = DynamicState::new(&p);
        assert_eq!(st.last_time_bar(0, 1).unwrap(), 0.0);
        st.apply_event(&p, &EventRecord::new(0, 0, 2, 3.0)).unwrap();
        assert_eq!(st.last_time_bar(0, 1).unwrap(), 3.0);
        st.apply_event(&p, &EventRecord::new(1, 0, 2, 5.0)).unwrap();
        assert_eq!(st.last_time_bar(0, 1).unwrap(), 5.0);
        assert!(st.last_time_bar(1, 1).is_err());
    }

    #[test]
    fn zero_params_keep_zero_embeddings() {
        let p = ModelParams::zeros(Dims::square(3, 2).unwrap(), 3, 1);
        let mut st = DynamicState::new(&p);
        st.apply_event(&p, &EventRecord::new(0, 0, 1, 4.0)).unwrap();
        assert_eq!(st.embedding(&p, 0), &[0.0; 3]);
        assert_eq!(st.embedding(&p, 1), &[0.0; 3]);
        assert_eq!(st.last_time(0), Some(4.0));
        assert_eq!(st.last_relation(1), Some(0));
        assert_eq!(st.last_time(2), None);
    }

    #[test]
    fn scalar_hand_computation() {
        // v_s = 0.5, v_o = 0.25, previous relation embedding 0.1, no drift:
        // h = tanh(0.85), v_s' = tanh(h); values from an independent
        // double-precision evaluation
        let mut p = scalar_params();
        p.weights.initial_embeddings = vec![0.5, 0.25, 0.0];
        let trace = update_embedding(&p, &[0.5], &[0.25], Some(0), 2.0, &[0.0]);
        assert!((trace.hidden[0] - 0.691_069_470).abs() < 1e-9);
        assert!((trace.output[0] - 0.598_668_607).abs() < 1e-9);
    }

    #[test]
    fn first_event_uses_absolute_time_and_zero_relation() {
        let mut p = scalar_params();
        p.weights.drift_subject = vec![0.2];
        p.weights.initial_embeddings = vec![0.5, 0.25, 0.0];
        let mut st = DynamicState::new(&p);
        st.apply_event(&p, &EventRecord::new(0, 1, 1, 1.5)).unwrap();
        let expected = (0.2f64 * 1.5 + (0.75f64).tanh()).tanh();
        assert!((st.embedding(&p, 0)[0] - expected).abs() < 1e-15);
        // object update sees the pre-event subject embedding
        let expected_o = ((0.75f64).tanh()).tanh();
        assert!((st.embedding(&p, 1)[0] - expected_o).abs() < 1e-15);
    }

    #[test]
    fn ordering_error() {
        let p = scalar_params();
        let mut st = DynamicState::new(&p);
        st.apply_event(&p, &EventRecord::new(0, 0, 1, 2.0)).unwrap();
        let err = st.apply_event(&p, &EventRecord::new(1, 0, 2, 1.0));
        assert!(matches!(err, Err(Error::Ordering { .. })));
        // equal timestamps are allowed
        st.apply_event(&p, &EventRecord::new(2, 0, 0, 2.0)).unwrap();
    }
}
