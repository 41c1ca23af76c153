use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{rayleigh_log_density, score_unchecked, DynamicState, ModelParams};
use crate::tkg::{EntityId, EventLog, EventRecord, RelationId};

/// Triples observed in training, for filtered ranking.
#[derive(Debug, Clone, Default)]
pub struct TrueTripleIndex {
    triples: HashSet<(EntityId, RelationId, EntityId)>,
}

impl TrueTripleIndex {
    pub fn from_log(log: &EventLog) -> Self {
        Self {
            triples: log.events().iter().map(EventRecord::triple).collect(),
        }
    }

    pub fn contains(&self, s: EntityId, r: RelationId, o: EntityId) -> bool {
        self.triples.contains(&(s, r, o))
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }
}

/// Which slot of the query is replaced by candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Slot {
    Object,
    Subject,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankResult {
    pub event: EventRecord,
    pub raw_rank: usize,
    pub filtered_rank: usize,
    pub candidate_count: usize,
    /// The triple never occurs in training.
    pub is_new_fact: bool,
}

/// Ranks the ground truth in `slot` among every other entity by conditional
/// density at the event time. Ties count against the ground truth.
pub fn rank_slot(
    state: &DynamicState,
    params: &ModelParams,
    event: &EventRecord,
    index: &TrueTripleIndex,
    slot: Slot,
) -> Result<RankResult> {
    state.check_event(params, event, 0)?;
    let (s, r, o, t) = (event.subject, event.relation, event.object, event.time);
    let n = &params.numerics;
    let score = |cs: EntityId, co: EntityId| -> Result<f64> {
        let t_bar = state.pair_reference(cs, co);
        if t < t_bar {
            return Err(Error::Ordering {
                index: 0,
                time: t,
                last: t_bar,
            });
        }
        let g = score_unchecked(state, params, cs, r, co);
        Ok(rayleigh_log_density(g, t - t_bar, n))
    };

    let (fixed, truth) = match slot {
        Slot::Object => (s, o),
        Slot::Subject => (o, s),
    };
    let pair = |c: EntityId| match slot {
        Slot::Object => (s, c),
        Slot::Subject => (c, o),
    };
    let truth_score = score(s, o)?;

    let mut raw_rank = 1;
    let mut filtered_rank = 1;
    let mut candidate_count = 0;
    for c in 0..params.n_entities {
        if c == fixed {
            continue;
        }
        candidate_count += 1;
        if c == truth {
            continue;
        }
        let (cs, co) = pair(c);
        if score(cs, co)? >= truth_score {
            raw_rank += 1;
            if !index.contains(cs, r, co) {
                filtered_rank += 1;
            }
        }
    }
    Ok(RankResult {
        event: *event,
        raw_rank,
        filtered_rank,
        candidate_count,
        is_new_fact: !index.contains(s, r, o),
    })
}

pub fn rank_object(
    state: &DynamicState,
    params: &ModelParams,
    event: &EventRecord,
    index: &TrueTripleIndex,
) -> Result<RankResult> {
    rank_slot(state, params, event, index, Slot::Object)
}

pub fn rank_subject(
    state: &DynamicState,
    params: &ModelParams,
    event: &EventRecord,
    index: &TrueTripleIndex,
) -> Result<RankResult> {
    rank_slot(state, params, event, index, Slot::Subject)
}
