//! Exact reverse-mode gradients of the window objective.
//!
//! The window is replayed once. Every embedding value an event reads is a
//! node: either an entity's value on entering the window (its initial
//! embedding when it has no history, otherwise a detached constant) or the
//! output of an update inside the window. Loss terms push adjoints onto the
//! nodes they read while the forward pass runs; the updates are then
//! unwound in reverse, which is a valid topological order because a node is
//! only ever read by later events.

use std::ops::{Deref, DerefMut};

use super::objective::{batch_entity_list, LossBreakdown};
use crate::error::{Error, Result};
use crate::model::{
    backprop_update, linalg, rayleigh_log_intensity, DynamicState, EventTrace, ModelParams, Weights,
};
use crate::tkg::{EntityId, EventRecord};

/// Gradient of the loss with respect to every parameter array.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet(pub Weights);

impl Deref for GradientSet {
    type Target = Weights;
    fn deref(&self) -> &Weights {
        &self.0
    }
}

impl DerefMut for GradientSet {
    fn deref_mut(&mut self) -> &mut Weights {
        &mut self.0
    }
}

impl GradientSet {
    pub fn zeros_for(params: &ModelParams) -> Self {
        GradientSet(params.weights.zeros_like())
    }
}

enum Origin {
    Initial(EntityId),
    Detached,
    Updated,
}

struct Node {
    origin: Origin,
    value: Vec<f64>,
    adjoint: Vec<f64>,
}

struct Step {
    trace: EventTrace,
    subject_in: usize,
    object_in: usize,
    subject_out: usize,
    object_out: usize,
}

struct Tape {
    nodes: Vec<Node>,
    current: Vec<Option<usize>>,
}

impl Tape {
    fn new(n_entities: usize) -> Self {
        Self {
            nodes: Vec::new(),
            current: vec![None; n_entities],
        }
    }

    fn node(&mut self, state: &DynamicState, params: &ModelParams, e: EntityId) -> usize {
        if let Some(id) = self.current[e] {
            return id;
        }
        let origin = if state.has_history(e) {
            Origin::Detached
        } else {
            Origin::Initial(e)
        };
        let id = self.push(origin, state.embedding(params, e).to_vec());
        self.current[e] = Some(id);
        id
    }

    fn push(&mut self, origin: Origin, value: Vec<f64>) -> usize {
        let d = value.len();
        self.nodes.push(Node {
            origin,
            value,
            adjoint: vec![0.0; d],
        });
        self.nodes.len() - 1
    }

    /// Adds `coef · ∂g/∂·` for `g = v_aᵀ·R·v_b` to both nodes and `R`.
    fn push_score_adjoint(
        &mut self,
        a: usize,
        b: usize,
        rel: &[f64],
        rel_grad: &mut [f64],
        coef: f64,
    ) {
        if coef == 0.0 {
            return;
        }
        let d = self.nodes[a].value.len();
        let (va, vb) = (self.nodes[a].value.clone(), self.nodes[b].value.clone());
        // ∂g/∂v_a = R·v_b, ∂g/∂v_b = Rᵀ·v_a
        let mut r_vb = vec![0.0; d];
        linalg::matvec(rel, &vb, &mut r_vb);
        let mut rt_va = vec![0.0; d];
        linalg::matvec_t_add(rel, &va, &mut rt_va);
        linalg::axpy(&mut self.nodes[a].adjoint, coef, &r_vb);
        linalg::axpy(&mut self.nodes[b].adjoint, coef, &rt_va);
        linalg::add_outer(rel_grad, &va, &vb, coef);
    }
}

/// Loss over the window, its exact gradient, and the post-window state
/// (plain values, no graph attached).
pub fn window_loss_and_gradients(
    window: &[EventRecord],
    state_in: &DynamicState,
    params: &ModelParams,
) -> Result<(LossBreakdown, GradientSet, DynamicState)> {
    let numerics = params.numerics;
    let d = params.dims.embed;
    let dd = d * d;
    let bl = batch_entity_list(window);
    let mut grads = GradientSet::zeros_for(params);
    let mut state = state_in.clone();
    let mut tape = Tape::new(params.n_entities);
    let mut steps = Vec::with_capacity(window.len());
    let (mut nll, mut surv) = (0.0, 0.0);

    for (i, ev) in window.iter().enumerate() {
        state.check_event(params, ev, i)?;
        let (s, r, o, t) = (ev.subject, ev.relation, ev.object, ev.time);
        let rel = params.relation_matrix(r);
        let rel_grad_range = r * dd..(r + 1) * dd;
        let s_node = tape.node(&state, params, s);
        let o_node = tape.node(&state, params, o);

        // observed event: −(clamp(g) + ln max(t − t̄, ε))
        let g = linalg::bilinear(&tape.nodes[s_node].value, rel, &tape.nodes[o_node].value);
        nll -= rayleigh_log_intensity(g, t - state.pair_reference(s, o), &numerics);
        tape.push_score_adjoint(
            s_node,
            o_node,
            rel,
            &mut grads.relation_matrices[rel_grad_range.clone()],
            -numerics.clamp_slope(g),
        );

        // survival: replacement objects, then replacement subjects
        let t_sq = t * t;
        let mut subj_surv = 0.0;
        for &other in &bl {
            if other == s {
                continue;
            }
            let other_node = tape.node(&state, params, other);
            let t_bar = state.pair_reference(s, other);
            let g = linalg::bilinear(
                &tape.nodes[s_node].value,
                rel,
                &tape.nodes[other_node].value,
            );
            let term = (t_sq - t_bar * t_bar) * numerics.clamp_score(g).exp();
            subj_surv += term;
            tape.push_score_adjoint(
                s_node,
                other_node,
                rel,
                &mut grads.relation_matrices[rel_grad_range.clone()],
                term * numerics.clamp_slope(g),
            );
        }
        let mut obj_surv = 0.0;
        for &other in &bl {
            if other == o {
                continue;
            }
            let other_node = tape.node(&state, params, other);
            let t_bar = state.pair_reference(other, o);
            let g = linalg::bilinear(
                &tape.nodes[other_node].value,
                rel,
                &tape.nodes[o_node].value,
            );
            let term = (t_sq - t_bar * t_bar) * numerics.clamp_score(g).exp();
            obj_surv += term;
            tape.push_score_adjoint(
                other_node,
                o_node,
                rel,
                &mut grads.relation_matrices[rel_grad_range.clone()],
                term * numerics.clamp_slope(g),
            );
        }
        surv += subj_surv + obj_surv;
        if !nll.is_finite() || !surv.is_finite() {
            return Err(Error::Numeric {
                index: i,
                message: format!("loss terms nll={nll} survival={surv}"),
            });
        }

        let trace = state.apply_traced(params, ev, i)?;
        let subject_out = tape.push(Origin::Updated, trace.subject.output.clone());
        let object_out = tape.push(Origin::Updated, trace.object.output.clone());
        tape.current[s] = Some(subject_out);
        tape.current[o] = Some(object_out);
        steps.push(Step {
            trace,
            subject_in: s_node,
            object_in: o_node,
            subject_out,
            object_out,
        });
    }

    for step in steps.iter().rev() {
        let roles = [
            (
                &step.trace.subject,
                step.subject_out,
                step.subject_in,
                step.object_in,
                true,
            ),
            (
                &step.trace.object,
                step.object_out,
                step.object_in,
                step.subject_in,
                false,
            ),
        ];
        for (trace, out, own_in, other_in, is_subject) in roles {
            let out_adj = tape.nodes[out].adjoint.clone();
            if out_adj.iter().all(|a| *a == 0.0) {
                continue;
            }
            let w = &mut grads.0;
            let drift = if is_subject {
                &mut w.drift_subject
            } else {
                &mut w.drift_object
            };
            let input_adj = backprop_update(
                params,
                trace,
                &out_adj,
                drift,
                &mut w.recurrent,
                &mut w.projection,
            );
            linalg::axpy(&mut tape.nodes[own_in].adjoint, 1.0, &input_adj[..d]);
            linalg::axpy(&mut tape.nodes[other_in].adjoint, 1.0, &input_adj[d..2 * d]);
            if let Some(r) = trace.prev_relation {
                let c = params.dims.relation;
                linalg::axpy(
                    &mut w.relation_embeddings[r * c..(r + 1) * c],
                    1.0,
                    &input_adj[2 * d..],
                );
            }
        }
    }

    for node in &tape.nodes {
        match node.origin {
            Origin::Initial(e) => linalg::axpy(
                &mut grads.initial_embeddings[e * d..(e + 1) * d],
                1.0,
                &node.adjoint,
            ),
            Origin::Detached | Origin::Updated => {}
        }
    }

    if !grads.is_finite() {
        return Err(Error::Numeric {
            index: window.len().saturating_sub(1),
            message: "non-finite gradient".into(),
        });
    }
    Ok((LossBreakdown::new(nll, surv), grads, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Dims;
    use crate::train::objective::window_loss;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_params_give_zero_recurrent_gradient() {
        let p = ModelParams::zeros(Dims::square(3, 2).unwrap(), 4, 2);
        let st = DynamicState::new(&p);
        let w = [
            EventRecord::new(0, 0, 1, 0.5),
            EventRecord::new(2, 1, 3, 0.9),
            EventRecord::new(1, 1, 2, 1.4),
        ];
        let (_, grads, _) = window_loss_and_gradients(&w, &st, &p).unwrap();
        assert!(grads.recurrent.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn forward_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = ModelParams::random(Dims::new(3, 2, 2).unwrap(), 4, 2, 0.6, &mut rng);
        let st = DynamicState::new(&p);
        let w = [
            EventRecord::new(0, 0, 1, 0.5),
            EventRecord::new(2, 1, 3, 0.9),
            EventRecord::new(1, 1, 2, 1.4),
            EventRecord::new(3, 0, 0, 1.4),
        ];
        let (loss, _, out) = window_loss_and_gradients(&w, &st, &p).unwrap();
        let (plain, plain_out) = window_loss(&w, &st, &p).unwrap();
        assert_eq!(loss, plain);
        let mut replay = st.clone();
        for ev in &w {
            replay.apply_event(&p, ev).unwrap();
        }
        assert_eq!(out, replay);
        assert_eq!(out, plain_out);
    }
}
