//! Model state and closed-form point-process quantities.
//!
//! Every `(subject, relation, object)` triple is one dimension of a
//! multivariate point process whose intensity grows linearly from the pair's
//! reference time `t̄` (the later of the two entities' last events):
//!
//! ```text
//! λ(t) = exp(g) · (t − t̄)         g = v_sᵀ · R_r · v_o
//! S(t) = exp(−exp(g) · (t − t̄)² / 2)
//! f(t) = λ(t) · S(t)
//! ```
//!
//! i.e. the waiting time after `t̄` is Rayleigh distributed with rate
//! `exp(g)`. Embeddings change only when their entity takes part in an event.

mod checkpoint;
pub(crate) mod linalg;
mod params;
mod state;

use std::f64::consts::PI;

pub use checkpoint::{read_checkpoint, write_checkpoint, ModelCheckpoint, CHECKPOINT_VERSION};
pub use params::{Dims, ModelParams, Numerics, Weights};
pub use state::DynamicState;
pub(crate) use state::{backprop_update, EventTrace};

use crate::error::{Error, Result};
use crate::tkg::{EntityId, RelationId};

/// Intensity `exp(g)·max(elapsed, gap_floor)` with the score clamped.
pub fn rayleigh_intensity(g: f64, elapsed: f64, numerics: &Numerics) -> f64 {
    numerics.clamp_score(g).exp() * elapsed.max(numerics.gap_floor)
}

/// `ln λ`, finite whenever `gap_floor > 0`.
pub fn rayleigh_log_intensity(g: f64, elapsed: f64, numerics: &Numerics) -> f64 {
    numerics.clamp_score(g) + elapsed.max(numerics.gap_floor).ln()
}

pub fn rayleigh_survival(g: f64, elapsed: f64, numerics: &Numerics) -> f64 {
    (-numerics.clamp_score(g).exp() * elapsed * elapsed / 2.0).exp()
}

pub fn rayleigh_density(g: f64, elapsed: f64, numerics: &Numerics) -> f64 {
    rayleigh_intensity(g, elapsed, numerics) * rayleigh_survival(g, elapsed, numerics)
}

/// `ln f`; used for ranking since it never underflows.
pub fn rayleigh_log_density(g: f64, elapsed: f64, numerics: &Numerics) -> f64 {
    let gc = numerics.clamp_score(g);
    rayleigh_log_intensity(g, elapsed, numerics) - gc.exp() * elapsed * elapsed / 2.0
}

/// Mean Rayleigh waiting time `sqrt(π / (2·exp(g)))`.
pub fn rayleigh_mean_gap(g: f64, numerics: &Numerics) -> f64 {
    (PI / (2.0 * numerics.clamp_score(g).exp())).sqrt()
}

fn check_triple(params: &ModelParams, s: EntityId, r: RelationId, o: EntityId) -> Result<()> {
    params.check_entity(s)?;
    params.check_entity(o)?;
    params.check_relation(r)?;
    if s == o {
        return Err(Error::arg(format!("self-loop on entity {s}")));
    }
    Ok(())
}

/// Bilinear compatibility `v_sᵀ·R_r·v_o` from the current embeddings.
pub fn bilinear_score(
    state: &DynamicState,
    params: &ModelParams,
    s: EntityId,
    r: RelationId,
    o: EntityId,
) -> Result<f64> {
    check_triple(params, s, r, o)?;
    Ok(score_unchecked(state, params, s, r, o))
}

pub(crate) fn score_unchecked(
    state: &DynamicState,
    params: &ModelParams,
    s: EntityId,
    r: RelationId,
    o: EntityId,
) -> f64 {
    linalg::bilinear(
        state.embedding(params, s),
        params.relation_matrix(r),
        state.embedding(params, o),
    )
}

/// Score and elapsed time `t − t̄` for a query at time `t`.
fn score_and_elapsed(
    state: &DynamicState,
    params: &ModelParams,
    s: EntityId,
    r: RelationId,
    o: EntityId,
    t: f64,
) -> Result<(f64, f64)> {
    check_triple(params, s, r, o)?;
    let t_bar = state.pair_reference(s, o);
    if t < t_bar {
        return Err(Error::arg(format!(
            "query time {t} precedes the pair's last event at {t_bar}"
        )));
    }
    Ok((score_unchecked(state, params, s, r, o), t - t_bar))
}

pub fn intensity(
    state: &DynamicState,
    params: &ModelParams,
    s: EntityId,
    r: RelationId,
    o: EntityId,
    t: f64,
) -> Result<f64> {
    let (g, dt) = score_and_elapsed(state, params, s, r, o, t)?;
    Ok(rayleigh_intensity(g, dt, &params.numerics))
}

pub fn survival_prob(
    state: &DynamicState,
    params: &ModelParams,
    s: EntityId,
    r: RelationId,
    o: EntityId,
    t: f64,
) -> Result<f64> {
    let (g, dt) = score_and_elapsed(state, params, s, r, o, t)?;
    Ok(rayleigh_survival(g, dt, &params.numerics))
}

pub fn density(
    state: &DynamicState,
    params: &ModelParams,
    s: EntityId,
    r: RelationId,
    o: EntityId,
    t: f64,
) -> Result<f64> {
    let (g, dt) = score_and_elapsed(state, params, s, r, o, t)?;
    Ok(rayleigh_density(g, dt, &params.numerics))
}

pub fn log_density(
    state: &DynamicState,
    params: &ModelParams,
    s: EntityId,
    r: RelationId,
    o: EntityId,
    t: f64,
) -> Result<f64> {
    let (g, dt) = score_and_elapsed(state, params, s, r, o, t)?;
    Ok(rayleigh_log_density(g, dt, &params.numerics))
}

/// Expected time of the next `(s, r, o)` event: `t̄ + sqrt(π/(2·exp(g)))`,
/// or the bare mean when `expectation_offset` is off.
pub fn expected_next_time(
    state: &DynamicState,
    params: &ModelParams,
    s: EntityId,
    r: RelationId,
    o: EntityId,
) -> Result<f64> {
    check_triple(params, s, r, o)?;
    let g = score_unchecked(state, params, s, r, o);
    let mean = rayleigh_mean_gap(g, &params.numerics);
    Ok(if params.numerics.expectation_offset {
        state.pair_reference(s, o) + mean
    } else {
        mean
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tkg::EventRecord;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_dim_state(vs: [f64; 2], vo: [f64; 2], rm: [f64; 4]) -> (DynamicState, ModelParams) {
        let mut p = ModelParams::zeros(Dims::square(2, 1).unwrap(), 2, 1);
        p.weights.initial_embeddings = vec![vs[0], vs[1], vo[0], vo[1]];
        p.weights.relation_matrices = rm.to_vec();
        (DynamicState::new(&p), p)
    }

    #[test]
    fn score_examples() {
        let (st, p) = two_dim_state([0.0; 2], [0.0; 2], [1.0, 2.0, 3.0, 4.0]);
        assert_eq!(bilinear_score(&st, &p, 0, 0, 1).unwrap(), 0.0);
        let (st, p) = two_dim_state([1.0, 0.0], [1.0, 0.0], [1.0, 0.0, 0.0, 1.0]);
        assert_eq!(bilinear_score(&st, &p, 0, 0, 1).unwrap(), 1.0);
        let (st, p) = two_dim_state([1.0, 0.0], [0.0, 1.0], [2.0, 1.0, 0.0, 1.0]);
        assert_eq!(bilinear_score(&st, &p, 0, 0, 1).unwrap(), 1.0);
        assert!(bilinear_score(&st, &p, 0, 1, 1).is_err());
        assert!(bilinear_score(&st, &p, 0, 0, 2).is_err());
    }

    #[test]
    fn closed_forms() {
        let n = Numerics::default();
        assert_eq!(rayleigh_intensity(0.0, 2.0, &n), 2.0);
        assert_abs_diff_eq!(
            rayleigh_intensity(1.0, 1.0, &n),
            std::f64::consts::E,
            epsilon = 1e-15
        );
        assert_eq!(rayleigh_intensity(0.0, 0.0, &n), 1e-8);
        assert_eq!(rayleigh_survival(0.3, 0.0, &n), 1.0);
        assert_abs_diff_eq!(rayleigh_survival(0.0, 2.0, &n), 0.135335, epsilon = 1e-6);
        assert_abs_diff_eq!(rayleigh_survival(-1e6, 2.0, &n), 1.0, epsilon = 1e-20);
        assert_abs_diff_eq!(rayleigh_density(0.0, 1.0, &n), 0.606531, epsilon = 1e-6);
        let no_floor = Numerics {
            gap_floor: 0.0,
            ..n
        };
        assert_eq!(rayleigh_density(0.0, 0.0, &no_floor), 0.0);
        assert_abs_diff_eq!(rayleigh_mean_gap(0.0, &n), 1.253314, epsilon = 1e-6);
        assert_abs_diff_eq!(rayleigh_mean_gap(2f64.ln(), &n), 0.886227, epsilon = 1e-6);
    }

    #[test]
    fn expected_time_offset() {
        let p = ModelParams::zeros(Dims::square(2, 1).unwrap(), 3, 1);
        let mut st = DynamicState::new(&p);
        assert_abs_diff_eq!(
            expected_next_time(&st, &p, 0, 0, 1).unwrap(),
            1.253314,
            epsilon = 1e-6
        );
        st.apply_event(&p, &EventRecord::new(0, 0, 2, 10.0))
            .unwrap();
        assert_abs_diff_eq!(
            expected_next_time(&st, &p, 0, 0, 1).unwrap(),
            11.253314,
            epsilon = 1e-6
        );
        let bare = p.clone().with_numerics(Numerics {
            expectation_offset: false,
            ..Numerics::default()
        });
        assert_abs_diff_eq!(
            expected_next_time(&st, &bare, 0, 0, 1).unwrap(),
            1.253314,
            epsilon = 1e-6
        );
    }

    #[test]
    fn query_before_reference_is_rejected() {
        let p = ModelParams::zeros(Dims::square(2, 1).unwrap(), 3, 1);
        let mut st = DynamicState::new(&p);
        st.apply_event(&p, &EventRecord::new(0, 0, 2, 5.0)).unwrap();
        assert!(intensity(&st, &p, 0, 0, 1, 4.0).is_err());
        assert!(survival_prob(&st, &p, 0, 0, 1, 4.0).is_err());
        assert!(density(&st, &p, 1, 0, 0, 4.0).is_err());
        assert_eq!(intensity(&st, &p, 0, 0, 1, 7.0).unwrap(), 2.0);
    }

    #[test]
    fn score_clamp_keeps_exp_finite() {
        let n = Numerics::default();
        assert!(rayleigh_intensity(1e4, 1.0, &n).is_finite());
        assert_eq!(rayleigh_intensity(1e4, 1.0, &n), 50f64.exp());
    }

    /// Piecewise constancy: an event leaves non-participants untouched.
    #[test]
    fn embeddings_change_only_at_own_events() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = ModelParams::random(Dims::square(3, 2).unwrap(), 5, 2, 0.5, &mut rng);
        let mut st = DynamicState::new(&p);
        let events = [
            (0, 0, 1, 0.5),
            (2, 1, 3, 0.7),
            (1, 1, 2, 1.0),
            (4, 0, 0, 1.0),
        ];
        for (s, r, o, t) in events {
            let before = st.clone();
            st.apply_event(&p, &EventRecord::new(s, r, o, t)).unwrap();
            for e in 0..5 {
                if e != s && e != o {
                    assert_eq!(before.embedding(&p, e), st.embedding(&p, e));
                    assert_eq!(before.last_time(e), st.last_time(e));
                }
            }
        }
    }

    proptest! {
        #[test]
        fn positivity(g in -60.0f64..60.0, dt in 0.0f64..50.0) {
            let n = Numerics::default();
            prop_assert!(rayleigh_intensity(g, dt, &n) > 0.0);
            let s = rayleigh_survival(g, dt, &n);
            prop_assert!(s > 0.0 || dt > 0.0);
            prop_assert!(s <= 1.0);
            prop_assert!(rayleigh_density(g, dt, &n) >= 0.0);
        }

        #[test]
        fn updates_stay_in_tanh_range(seed in 0u64..1000, scale in 0.1f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = ModelParams::random(Dims::new(3, 4, 2).unwrap(), 4, 2, scale, &mut rng);
            let mut st = DynamicState::new(&p);
            for k in 0..6 {
                let s = k % 4;
                let o = (k + 1 + k / 4) % 4;
                if s == o { continue; }
                st.apply_event(&p, &EventRecord::new(s, k % 2, o, k as f64)).unwrap();
                for e in [s, o] {
                    prop_assert!(st.embedding(&p, e).iter().all(|x| x.abs() <= 1.0));
                }
            }
        }

        #[test]
        fn log_density_matches_density(g in -20.0f64..5.0, dt in 0.01f64..3.0) {
            let n = Numerics::default();
            let f = rayleigh_density(g, dt, &n);
            prop_assert!((rayleigh_log_density(g, dt, &n) - f.ln()).abs() < 1e-9);
        }
    }
}
