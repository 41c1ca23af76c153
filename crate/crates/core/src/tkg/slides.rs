use std::ops::Range;

use super::EventLog;
use crate::error::{Error, Result};

/// One equal-duration evaluation window over the test span.
#[derive(Debug, Clone, PartialEq)]
pub struct SlideWindow {
    pub start: f64,
    pub end: f64,
    /// Indices into the partitioned log's event slice.
    pub events: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlidePartition {
    pub windows: Vec<SlideWindow>,
}

impl SlidePartition {
    /// Window index holding event `i`.
    pub fn window_of(&self, i: usize) -> Option<usize> {
        self.windows.iter().position(|w| w.events.contains(&i))
    }
}

/// Splits `[t_min, t_max]` into `n_slides` windows of equal duration. Every
/// window is half-open except the last, which also takes `t_max`.
pub fn slide_partition(test: &EventLog, n_slides: usize) -> Result<SlidePartition> {
    if n_slides == 0 {
        return Err(Error::arg("n_slides must be at least 1"));
    }
    let (t_min, t_max) = match (test.first_time(), test.last_time()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::arg("cannot partition an empty test log")),
    };
    let width = (t_max - t_min) / n_slides as f64;
    let bound = |k: usize| {
        if k == n_slides {
            t_max
        } else {
            t_min + width * k as f64
        }
    };

    let events = test.events();
    let mut windows = Vec::with_capacity(n_slides);
    let mut cursor = 0;
    for k in 0..n_slides {
        let (start, end) = (bound(k), bound(k + 1));
        let stop = if k + 1 == n_slides {
            events.len()
        } else {
            cursor + events[cursor..].partition_point(|e| e.time < end)
        };
        windows.push(SlideWindow {
            start,
            end,
            events: cursor..stop,
        });
        cursor = stop;
    }
    Ok(SlidePartition { windows })
}
