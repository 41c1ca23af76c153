//! Temporal knowledge graph event streams: quadruple records, the globally
//! ordered log, text I/O, time splits, evaluation slides, and a simulator
//! that samples from the model's own point process.

mod io;
mod simulate;
mod slides;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{parse_event_log, read_event_file, write_event_file, ParsedLog};
pub use simulate::{rayleigh_gap, rayleigh_gap_after, simulate, Simulator};
pub use slides::{slide_partition, SlidePartition, SlideWindow};

pub type EntityId = usize;
pub type RelationId = usize;

/// One timestamped fact `(subject, relation, object, time)`. Time is in hours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub subject: EntityId,
    pub relation: RelationId,
    pub object: EntityId,
    pub time: f64,
}

impl EventRecord {
    pub fn new(subject: EntityId, relation: RelationId, object: EntityId, time: f64) -> Self {
        Self {
            subject,
            relation,
            object,
            time,
        }
    }

    pub fn triple(&self) -> (EntityId, RelationId, EntityId) {
        (self.subject, self.relation, self.object)
    }

    fn key(&self) -> (EntityId, RelationId, EntityId, u64) {
        (
            self.subject,
            self.relation,
            self.object,
            self.time.to_bits(),
        )
    }
}

/// A validated, time-ordered, duplicate-free event stream.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventLog {
    events: Vec<EventRecord>,
    n_entities: usize,
    n_relations: usize,
    entity_names: Option<Vec<String>>,
    relation_names: Option<Vec<String>>,
}

impl EventLog {
    /// Validates `events`, sorts them stably by time and drops exact
    /// duplicates (first occurrence wins). Returns the log and the number of
    /// duplicates removed.
    pub fn from_events(
        events: Vec<EventRecord>,
        n_entities: usize,
        n_relations: usize,
    ) -> Result<(Self, usize)> {
        for (i, ev) in events.iter().enumerate() {
            validate_record(ev, n_entities, n_relations).map_err(|message| Error::Validation {
                line: i + 1,
                message,
            })?;
        }
        let mut events = events;
        events.sort_by(|a, b| a.time.total_cmp(&b.time));
        let before = events.len();
        let mut seen = HashSet::with_capacity(before);
        events.retain(|ev| seen.insert(ev.key()));
        let dropped = before - events.len();
        Ok((
            Self {
                events,
                n_entities,
                n_relations,
                entity_names: None,
                relation_names: None,
            },
            dropped,
        ))
    }

    /// Builds a log from records that are already validated and ordered.
    pub(crate) fn from_ordered_unchecked(
        events: Vec<EventRecord>,
        n_entities: usize,
        n_relations: usize,
    ) -> Self {
        debug_assert!(events.windows(2).all(|w| w[0].time <= w[1].time));
        Self {
            events,
            n_entities,
            n_relations,
            entity_names: None,
            relation_names: None,
        }
    }

    pub fn with_names(
        mut self,
        entity_names: Option<Vec<String>>,
        relation_names: Option<Vec<String>>,
    ) -> Result<Self> {
        if let Some(names) = &entity_names {
            if names.len() != self.n_entities {
                return Err(Error::arg(format!(
                    "{} entity names for {} entities",
                    names.len(),
                    self.n_entities
                )));
            }
        }
        if let Some(names) = &relation_names {
            if names.len() != self.n_relations {
                return Err(Error::arg(format!(
                    "{} relation names for {} relations",
                    names.len(),
                    self.n_relations
                )));
            }
        }
        self.entity_names = entity_names;
        self.relation_names = relation_names;
        Ok(self)
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn n_entities(&self) -> usize {
        self.n_entities
    }

    pub fn n_relations(&self) -> usize {
        self.n_relations
    }

    pub fn entity_names(&self) -> Option<&[String]> {
        self.entity_names.as_deref()
    }

    pub fn relation_names(&self) -> Option<&[String]> {
        self.relation_names.as_deref()
    }

    pub fn first_time(&self) -> Option<f64> {
        self.events.first().map(|e| e.time)
    }

    pub fn last_time(&self) -> Option<f64> {
        self.events.last().map(|e| e.time)
    }

    pub fn is_time_ordered(&self) -> bool {
        self.events.windows(2).all(|w| w[0].time <= w[1].time)
    }

    /// Mean gap between consecutive events, or `None` with fewer than two.
    pub fn mean_inter_event_gap(&self) -> Option<f64> {
        let n = self.events.len();
        if n < 2 {
            return None;
        }
        Some((self.events[n - 1].time - self.events[0].time) / (n - 1) as f64)
    }

    /// Splits into events strictly before `boundary` and the rest.
    pub fn split_by_time(&self, boundary: f64) -> Result<(EventLog, EventLog)> {
        let max_time = self.last_time().unwrap_or(0.0);
        if !(0.0..=max_time).contains(&boundary) {
            return Err(Error::arg(format!(
                "split boundary {boundary} outside [0, {max_time}]"
            )));
        }
        let cut = self.events.partition_point(|e| e.time < boundary);
        let part = |events: &[EventRecord]| EventLog {
            events: events.to_vec(),
            n_entities: self.n_entities,
            n_relations: self.n_relations,
            entity_names: self.entity_names.clone(),
            relation_names: self.relation_names.clone(),
        };
        Ok((part(&self.events[..cut]), part(&self.events[cut..])))
    }

    /// Splits at an event index; the first `n` events go to the first part.
    pub fn split_at_index(&self, n: usize) -> (EventLog, EventLog) {
        let n = n.min(self.events.len());
        let part = |events: &[EventRecord]| EventLog {
            events: events.to_vec(),
            n_entities: self.n_entities,
            n_relations: self.n_relations,
            entity_names: self.entity_names.clone(),
            relation_names: self.relation_names.clone(),
        };
        (part(&self.events[..n]), part(&self.events[n..]))
    }
}

fn validate_record(
    ev: &EventRecord,
    n_entities: usize,
    n_relations: usize,
) -> std::result::Result<(), String> {
    if ev.subject >= n_entities || ev.object >= n_entities {
        return Err(format!(
            "entity id out of range (subject {}, object {}, n_entities {n_entities})",
            ev.subject, ev.object
        ));
    }
    if ev.relation >= n_relations {
        return Err(format!(
            "relation id {} out of range (n_relations {n_relations})",
            ev.relation
        ));
    }
    if ev.subject == ev.object {
        return Err(format!("self-loop on entity {}", ev.subject));
    }
    if !ev.time.is_finite() || ev.time < 0.0 {
        return Err(format!("time {} must be a non-negative real", ev.time));
    }
    Ok(())
}
