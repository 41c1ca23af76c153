use serde::{Deserialize, Serialize};

use super::rank::RankResult;
use crate::error::{Error, Result};
use crate::tkg::SlidePartition;

/// Fraction of ranks at most `k`.
pub fn hits_at_k(ranks: &[usize], k: usize) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::arg("hits@k of an empty rank list"));
    }
    Ok(ranks.iter().filter(|&&r| r <= k).count() as f64 / ranks.len() as f64)
}

/// Mean rank, its population standard deviation and HITS@10.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankStats {
    pub count: usize,
    pub mar: f64,
    pub std: f64,
    pub hits_at_10: f64,
}

impl RankStats {
    pub fn from_ranks(ranks: &[usize]) -> Option<Self> {
        if ranks.is_empty() {
            return None;
        }
        let n = ranks.len() as f64;
        let mar = ranks.iter().map(|&r| r as f64).sum::<f64>() / n;
        let var = ranks.iter().map(|&r| (r as f64 - mar).powi(2)).sum::<f64>() / n;
        Some(Self {
            count: ranks.len(),
            mar,
            std: var.sqrt(),
            hits_at_10: ranks.iter().filter(|&&r| r <= 10).count() as f64 / n,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankSummary {
    pub raw: RankStats,
    pub filtered: RankStats,
}

impl RankSummary {
    fn of<'a>(results: impl Iterator<Item = &'a RankResult> + Clone) -> Option<Self> {
        let raw: Vec<usize> = results.clone().map(|r| r.raw_rank).collect();
        let filtered: Vec<usize> = results.map(|r| r.filtered_rank).collect();
        Some(Self {
            raw: RankStats::from_ranks(&raw)?,
            filtered: RankStats::from_ranks(&filtered)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlideMetrics {
    pub index: usize,
    pub start: f64,
    pub end: f64,
    /// `None` when no test event falls in the slide.
    pub summary: Option<RankSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub slides: Vec<SlideMetrics>,
    pub overall: RankSummary,
    pub new_facts: Option<RankSummary>,
    pub recurrent_facts: Option<RankSummary>,
}

impl MetricsReport {
    /// `ranks` must be non-empty and in the order of the partitioned log.
    pub fn from_ranks(ranks: &[RankResult], slides: &SlidePartition) -> Self {
        let slides = slides
            .windows
            .iter()
            .enumerate()
            .map(|(index, w)| SlideMetrics {
                index,
                start: w.start,
                end: w.end,
                summary: RankSummary::of(ranks[w.events.clone()].iter()),
            })
            .collect();
        Self {
            slides,
            overall: RankSummary::of(ranks.iter()).expect("non-empty rank list"),
            new_facts: RankSummary::of(ranks.iter().filter(|r| r.is_new_fact)),
            recurrent_facts: RankSummary::of(ranks.iter().filter(|r| !r.is_new_fact)),
        }
    }

    /// Long-format `slide,metric,value` rows. Empty slides only report
    /// `count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("slide,metric,value\n");
        let mut push = |label: &str, summary: Option<&RankSummary>| {
            let Some(s) = summary else {
                out.push_str(&format!("{label},count,0\n"));
                return;
            };
            out.push_str(&format!("{label},count,{}\n", s.raw.count));
            for (kind, st) in [("raw", &s.raw), ("filtered", &s.filtered)] {
                out.push_str(&format!("{label},{kind}_mar,{}\n", st.mar));
                out.push_str(&format!("{label},{kind}_std,{}\n", st.std));
                out.push_str(&format!("{label},{kind}_hits10,{}\n", st.hits_at_10));
            }
        };
        for s in &self.slides {
            push(&s.index.to_string(), s.summary.as_ref());
        }
        push("overall", Some(&self.overall));
        push("overall_new", self.new_facts.as_ref());
        push("overall_recurrent", self.recurrent_facts.as_ref());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tkg::{EventRecord, SlideWindow};

    #[test]
    fn hits_examples() {
        let r = [1, 5, 12];
        assert!((hits_at_k(&r, 10).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(hits_at_k(&r, 1).unwrap(), 1.0 / 3.0);
        assert_eq!(hits_at_k(&r, 12).unwrap(), 1.0);
        assert!(hits_at_k(&[], 10).is_err());
    }

    #[test]
    fn hits_is_monotone_in_k() {
        let r = [3, 1, 40, 7, 7, 22, 10, 11];
        let mut prev = 0.0;
        for k in 1..50 {
            let h = hits_at_k(&r, k).unwrap();
            assert!(h >= prev);
            prev = h;
        }
    }

    #[test]
    fn population_std() {
        let s = RankStats::from_ranks(&[1, 3]).unwrap();
        assert_eq!((s.mar, s.std), (2.0, 1.0));
        assert!(RankStats::from_ranks(&[]).is_none());
    }

    #[test]
    fn report_splits_by_slide_and_novelty() {
        let mk = |raw, filtered, new| RankResult {
            event: EventRecord::new(0, 0, 1, 0.0),
            raw_rank: raw,
            filtered_rank: filtered,
            candidate_count: 20,
            is_new_fact: new,
        };
        let ranks = [mk(2, 1, false), mk(4, 4, true), mk(12, 9, true)];
        let part = SlidePartition {
            windows: vec![
                SlideWindow {
                    start: 0.0,
                    end: 1.0,
                    events: 0..2,
                },
                SlideWindow {
                    start: 1.0,
                    end: 2.0,
                    events: 2..2,
                },
                SlideWindow {
                    start: 2.0,
                    end: 3.0,
                    events: 2..3,
                },
            ],
        };
        let rep = MetricsReport::from_ranks(&ranks, &part);
        assert_eq!(rep.overall.raw.mar, 6.0);
        assert!((rep.overall.filtered.mar - 14.0 / 3.0).abs() < 1e-12);
        assert_eq!(rep.slides[0].summary.unwrap().raw.mar, 3.0);
        assert!(rep.slides[1].summary.is_none());
        assert_eq!(rep.new_facts.unwrap().raw.count, 2);
        assert_eq!(rep.recurrent_facts.unwrap().raw.mar, 2.0);
        let csv = rep.to_csv();
        assert!(csv.starts_with("slide,metric,value\n0,count,2\n0,raw_mar,3\n"));
        assert!(csv.contains("\n1,count,0\n2,count,1\n"));
        assert!(csv.contains("\noverall,raw_hits10,0.6666666666666666\n"));
    }
}
