use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EventLog, EventRecord};
use crate::error::{Error, Result};
use crate::model::{DynamicState, ModelParams};

/// Inverse-transform draw of a Rayleigh waiting time with rate `rate`:
/// `sqrt(-2·ln(u) / rate)` for `u ∈ (0, 1]`.
pub fn rayleigh_gap(u: f64, rate: f64) -> f64 {
    (-2.0 * u.ln() / rate).sqrt()
}

/// Waiting time measured from the reference point, conditioned on no event
/// during the first `elapsed` hours. Reduces to [`rayleigh_gap`] when
/// `elapsed = 0`.
pub fn rayleigh_gap_after(u: f64, rate: f64, elapsed: f64) -> f64 {
    (elapsed * elapsed - 2.0 * u.ln() / rate).sqrt()
}

/// Competing-risks sampler over every `(s, r, o)` dimension, `s ≠ o`.
///
/// At each step every dimension draws its next event time from its Rayleigh
/// law (conditioned on having survived up to the current clock), the earliest
/// fires, and both entities are updated. Cost is `O(n_e²·n_r)` per event.
pub struct Simulator<'a> {
    params: &'a ModelParams,
    state: DynamicState,
    rng: ChaCha8Rng,
    clock: f64,
}

impl<'a> Simulator<'a> {
    pub fn new(params: &'a ModelParams, seed: u64) -> Result<Self> {
        if params.n_entities < 2 {
            return Err(Error::arg("simulation needs at least two entities"));
        }
        if params.n_relations < 1 {
            return Err(Error::arg("simulation needs at least one relation"));
        }
        Ok(Self {
            params,
            state: DynamicState::new(params),
            rng: ChaCha8Rng::seed_from_u64(seed),
            clock: 0.0,
        })
    }

    pub fn state(&self) -> &DynamicState {
        &self.state
    }

    pub fn next_event(&mut self) -> Result<EventRecord> {
        let p = self.params;
        let (ne, nr) = (p.n_entities, p.n_relations);
        let mut best: Option<EventRecord> = None;
        for s in 0..ne {
            for r in 0..nr {
                for o in 0..ne {
                    if s == o {
                        continue;
                    }
                    let g = crate::model::score_unchecked(&self.state, p, s, r, o);
                    let rate = p.numerics.clamp_score(g).exp();
                    let t_bar = self.state.pair_reference(s, o);
                    // u in (0, 1]
                    let u = 1.0 - self.rng.gen::<f64>();
                    let t = t_bar + rayleigh_gap_after(u, rate, self.clock - t_bar);
                    if best.is_none_or(|b| t < b.time) {
                        best = Some(EventRecord::new(s, r, o, t));
                    }
                }
            }
        }
        let ev = best.expect("at least one dimension");
        self.state.apply_event(p, &ev)?;
        self.clock = ev.time;
        Ok(ev)
    }
}

/// Samples `n_events` events from the model defined by `params`.
pub fn simulate(
    params: &ModelParams,
    n_entities: usize,
    n_relations: usize,
    n_events: usize,
    seed: u64,
) -> Result<EventLog> {
    if n_entities < 2 {
        return Err(Error::arg("simulation needs at least two entities"));
    }
    if params.n_entities != n_entities || params.n_relations != n_relations {
        return Err(Error::arg(format!(
            "params are sized for {} entities / {} relations, not {n_entities} / {n_relations}",
            params.n_entities, params.n_relations
        )));
    }
    if n_events == 0 {
        return Err(Error::arg("n_events must be at least 1"));
    }
    let mut sim = Simulator::new(params, seed)?;
    let events = (0..n_events)
        .map(|_| sim.next_event())
        .collect::<Result<Vec<_>>>()?;
    Ok(EventLog::from_ordered_unchecked(
        events,
        n_entities,
        n_relations,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Dims;

    fn zero_params(ne: usize, nr: usize) -> ModelParams {
        ModelParams::zeros(Dims::square(2, 1).unwrap(), ne, nr)
    }

    #[test]
    fn inverse_transform_closed_form() {
        assert!((rayleigh_gap((-2.0f64).exp(), 1.0) - 2.0).abs() < 1e-12);
        assert_eq!(rayleigh_gap_after(0.3, 2.0, 0.0), rayleigh_gap(0.3, 2.0));
        assert_eq!(rayleigh_gap(1.0, 1.0), 0.0);
    }

    #[test]
    fn deterministic_under_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = ModelParams::random(Dims::square(3, 2).unwrap(), 5, 2, 0.5, &mut rng);
        let a = simulate(&p, 5, 2, 60, 42).unwrap();
        let b = simulate(&p, 5, 2, 60, 42).unwrap();
        assert_eq!(a.to_tsv(), b.to_tsv());
        assert_ne!(a, simulate(&p, 5, 2, 60, 43).unwrap());
        assert!(a.is_time_ordered());
        assert!(a.events().iter().all(|e| e.subject != e.object));
    }

    #[test]
    fn argument_errors() {
        assert!(simulate(&zero_params(1, 1), 1, 1, 5, 0).is_err());
        assert!(simulate(&zero_params(3, 1), 3, 2, 5, 0).is_err());
        assert!(simulate(&zero_params(3, 1), 3, 1, 0, 0).is_err());
    }

    /// With three entities every pair shares an entity with each event, so all
    /// six dimensions restart together and each gap is the minimum of six
    /// independent unit-rate Rayleigh draws.
    #[test]
    fn mean_gap_matches_competing_risks_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let draws = 100_000;
        let oracle: f64 = (0..draws)
            .map(|_| {
                (0..6)
                    .map(|_| rayleigh_gap(1.0 - rng.gen::<f64>(), 1.0))
                    .fold(f64::INFINITY, f64::min)
            })
            .sum::<f64>()
            / draws as f64;

        // 20 independent 100-event runs, pooled
        let p = zero_params(3, 1);
        let mut gaps = Vec::new();
        for seed in 0..20 {
            let log = simulate(&p, 3, 1, 100, seed).unwrap();
            let mut prev = 0.0;
            for e in log.events() {
                gaps.push(e.time - prev);
                prev = e.time;
            }
        }
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        assert!(
            (mean / oracle - 1.0).abs() < 0.05,
            "simulated {mean}, oracle {oracle}"
        );
    }
}
