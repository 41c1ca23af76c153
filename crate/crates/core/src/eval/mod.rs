//! Link prediction and time prediction on held-out events.
//!
//! Parameters stay frozen during evaluation, but entity embeddings keep
//! evolving: every test event is scored against the state built from all
//! earlier events and only then applied.

mod metrics;
mod rank;

use serde::{Deserialize, Serialize};

pub use metrics::{hits_at_k, MetricsReport, RankStats, SlideMetrics};
pub use rank::{rank_object, rank_slot, rank_subject, RankResult, Slot, TrueTripleIndex};

use crate::error::{Error, Result};
use crate::model::{expected_next_time, DynamicState, ModelParams};
use crate::tkg::{slide_partition, EventLog, EventRecord};

#[derive(Debug, Clone)]
pub struct LinkEvaluation {
    pub report: MetricsReport,
    /// Object-slot results in test order.
    pub ranks: Vec<RankResult>,
    /// Subject-slot results, when requested.
    pub subject_ranks: Option<Vec<RankResult>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimePrediction {
    pub event: EventRecord,
    pub predicted: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone)]
pub struct TimeEvaluation {
    pub predictions: Vec<TimePrediction>,
    pub mae: f64,
}

impl TimeEvaluation {
    fn from_predictions(predictions: Vec<TimePrediction>) -> Self {
        let mae = predictions.iter().map(|p| p.abs_error).sum::<f64>() / predictions.len() as f64;
        Self { predictions, mae }
    }

    /// `time,subject,relation,object,predicted,abs_error`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,subject,relation,object,predicted,abs_error\n");
        for p in &self.predictions {
            let e = p.event;
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                e.time, e.subject, e.relation, e.object, p.predicted, p.abs_error
            ));
        }
        out
    }
}

fn check_logs(params: &ModelParams, train: &EventLog, test: &EventLog) -> Result<()> {
    if test.is_empty() {
        return Err(Error::arg("test log is empty"));
    }
    for log in [train, test] {
        if log.n_entities() > params.n_entities || log.n_relations() > params.n_relations {
            return Err(Error::arg(format!(
                "log has {} entities / {} relations but the model covers {} / {}",
                log.n_entities(),
                log.n_relations(),
                params.n_entities,
                params.n_relations
            )));
        }
    }
    if let (Some(a), Some(b)) = (train.last_time(), test.first_time()) {
        if b < a {
            return Err(Error::arg(format!(
                "test starts at {b} before the end of training at {a}"
            )));
        }
    }
    Ok(())
}

/// State after replaying `log` from the initial embeddings.
pub fn replay(params: &ModelParams, log: &EventLog) -> Result<DynamicState> {
    let mut state = DynamicState::new(params);
    for ev in log.events() {
        state.apply_event(params, ev)?;
    }
    Ok(state)
}

/// Object-slot link prediction over the test log, reported per equal-duration
/// slide and overall, with raw and filtered ranks.
pub fn evaluate_links(
    params: &ModelParams,
    train: &EventLog,
    test: &EventLog,
    n_slides: usize,
    with_subject_slot: bool,
) -> Result<LinkEvaluation> {
    check_logs(params, train, test)?;
    let slides = slide_partition(test, n_slides)?;
    let index = TrueTripleIndex::from_log(train);
    let mut state = replay(params, train)?;
    let mut ranks = Vec::with_capacity(test.len());
    let mut subject_ranks = with_subject_slot.then(|| Vec::with_capacity(test.len()));
    for ev in test.events() {
        ranks.push(rank_object(&state, params, ev, &index)?);
        if let Some(sr) = subject_ranks.as_mut() {
            sr.push(rank_subject(&state, params, ev, &index)?);
        }
        state.apply_event(params, ev)?;
    }
    let report = MetricsReport::from_ranks(&ranks, &slides);
    Ok(LinkEvaluation {
        report,
        ranks,
        subject_ranks,
    })
}

/// Predicts each test event's time as the expected next occurrence of its
/// triple, then applies the event.
pub fn evaluate_time(
    params: &ModelParams,
    train: &EventLog,
    test: &EventLog,
) -> Result<TimeEvaluation> {
    check_logs(params, train, test)?;
    let mut state = replay(params, train)?;
    let mut predictions = Vec::with_capacity(test.len());
    for ev in test.events() {
        let predicted = expected_next_time(&state, params, ev.subject, ev.relation, ev.object)?;
        predictions.push(TimePrediction {
            event: *ev,
            predicted,
            abs_error: (predicted - ev.time).abs(),
        });
        state.apply_event(params, ev)?;
    }
    Ok(TimeEvaluation::from_predictions(predictions))
}

/// Baseline time predictor `t̄ + mean inter-event gap of train`.
pub fn evaluate_time_constant_gap(train: &EventLog, test: &EventLog) -> Result<TimeEvaluation> {
    if test.is_empty() {
        return Err(Error::arg("test log is empty"));
    }
    let gap = train
        .mean_inter_event_gap()
        .ok_or_else(|| Error::arg("baseline needs at least two training events"))?;
    let n = train.n_entities().max(test.n_entities());
    let mut last: Vec<Option<f64>> = vec![None; n];
    for ev in train.events() {
        last[ev.subject] = Some(ev.time);
        last[ev.object] = Some(ev.time);
    }
    let mut predictions = Vec::with_capacity(test.len());
    for ev in test.events() {
        let t_bar = last[ev.subject]
            .unwrap_or(0.0)
            .max(last[ev.object].unwrap_or(0.0));
        let predicted = t_bar + gap;
        predictions.push(TimePrediction {
            event: *ev,
            predicted,
            abs_error: (predicted - ev.time).abs(),
        });
        last[ev.subject] = Some(ev.time);
        last[ev.object] = Some(ev.time);
    }
    Ok(TimeEvaluation::from_predictions(predictions))
}

/// `time,subject,relation,object,raw_rank,filtered_rank,is_new_fact`
pub fn ranks_to_csv(ranks: &[RankResult]) -> String {
    let mut out = String::from("time,subject,relation,object,raw_rank,filtered_rank,is_new_fact\n");
    for r in ranks {
        let e = r.event;
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            e.time, e.subject, e.relation, e.object, r.raw_rank, r.filtered_rank, r.is_new_fact
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Dims;

    fn log(events: &[(usize, usize, usize, f64)], ne: usize) -> EventLog {
        let ev = events
            .iter()
            .map(|&(s, r, o, t)| EventRecord::new(s, r, o, t))
            .collect();
        EventLog::from_events(ev, ne, 1).unwrap().0
    }

    #[test]
    fn single_event_zero_params() {
        let p = ModelParams::zeros(Dims::square(2, 1).unwrap(), 3, 1);
        let train = log(&[], 3);
        let test = log(&[(0, 0, 1, 1.0)], 3);
        let ev = evaluate_links(&p, &train, &test, 12, false).unwrap();
        assert_eq!(ev.report.overall.raw.mar, 2.0);
        assert_eq!(ev.report.overall.raw.hits_at_10, 1.0);
    }

    #[test]
    fn time_prediction_examples() {
        let p = ModelParams::zeros(Dims::square(2, 1).unwrap(), 3, 1);
        let train = log(&[], 3);
        let t = (std::f64::consts::PI / 2.0).sqrt();
        let test = log(&[(0, 0, 1, t)], 3);
        let r = evaluate_time(&p, &train, &test).unwrap();
        assert!(r.mae < 1e-12);
    }

    #[test]
    fn constant_gap_baseline() {
        let train = log(&[(0, 0, 1, 1.0), (1, 0, 2, 3.0)], 3);
        let test = log(&[(0, 0, 2, 8.0)], 3);
        // t̄ = 3, mean gap 2 → predicted 5, error 3
        let r = evaluate_time_constant_gap(&train, &test).unwrap();
        assert_eq!(r.predictions[0].predicted, 5.0);
        assert_eq!(r.mae, 3.0);
    }

    #[test]
    fn empty_test_is_an_error() {
        let p = ModelParams::zeros(Dims::square(2, 1).unwrap(), 3, 1);
        let train = log(&[(0, 0, 1, 1.0)], 3);
        let test = log(&[], 3);
        assert!(evaluate_links(&p, &train, &test, 2, false).is_err());
        assert!(evaluate_time(&p, &train, &test).is_err());
    }

    #[test]
    fn evaluation_leaves_params_untouched() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let p = ModelParams::random(Dims::square(3, 2).unwrap(), 5, 1, 0.5, &mut rng);
        let before = p.clone();
        let all = crate::tkg::simulate(&p, 5, 1, 40, 3).unwrap();
        let (train, test) = all.split_at_index(30);
        let a = evaluate_links(&p, &train, &test, 3, true).unwrap();
        let b = evaluate_links(&p, &train, &test, 3, true).unwrap();
        assert_eq!(p, before);
        assert_eq!(a.report.to_csv(), b.report.to_csv());
        for r in a.ranks.iter().chain(a.subject_ranks.as_ref().unwrap()) {
            assert!(1 <= r.filtered_rank && r.filtered_rank <= r.raw_rank);
            assert!(r.raw_rank <= r.candidate_count);
        }
    }

    #[test]
    fn rank_csv_format() {
        let r = RankResult {
            event: EventRecord::new(1, 0, 2, 3.5),
            raw_rank: 4,
            filtered_rank: 2,
            candidate_count: 9,
            is_new_fact: true,
        };
        assert_eq!(
            ranks_to_csv(&[r]),
            "time,subject,relation,object,raw_rank,filtered_rank,is_new_fact\n3.5,1,0,2,4,2,true\n"
        );
    }
}
