use super::backprop::window_loss_and_gradients;
use super::objective::window_loss_terms;
use crate::error::Result;
use crate::model::{DynamicState, ModelParams};
use crate::tkg::EventRecord;

/// Denominator floor for relative errors.
pub const REL_ERROR_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Array and offset holding the worst coordinate.
    pub worst: Option<(&'static str, usize)>,
    pub analytic: f64,
    pub numeric: f64,
    pub coordinates: usize,
    /// Worst relative error per parameter array, in [`crate::model::Weights::NAMES`] order.
    pub per_array: [f64; 7],
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_ERROR_FLOOR)
}

/// Compares the analytic window gradient with central finite differences
/// of step `fd_step` on every parameter coordinate.
///
/// The two perturbed objectives are differenced term by term and divided by
/// the exactly represented perturbation width, which keeps round-off well
/// below the truncation error for small coordinates.
pub fn grad_check(
    params: &ModelParams,
    state: &DynamicState,
    window: &[EventRecord],
    fd_step: f64,
) -> Result<GradCheckReport> {
    let (_, grads, _) = window_loss_and_gradients(window, state, params)?;
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        analytic: 0.0,
        numeric: 0.0,
        coordinates: grads.len(),
        per_array: [0.0; 7],
    };
    let names = crate::model::Weights::NAMES;
    for k in 0..grads.len() {
        let original = params.weights.get(k);
        let (hi, lo) = (original + fd_step, original - fd_step);
        *probe.weights.get_mut(k) = hi;
        let plus = window_loss_terms(window, state, &probe)?;
        *probe.weights.get_mut(k) = lo;
        let minus = window_loss_terms(window, state, &probe)?;
        *probe.weights.get_mut(k) = original;

        let delta: f64 = plus.iter().zip(&minus).map(|(a, b)| a - b).sum();
        let numeric = delta / (hi - lo);
        let analytic = grads.get(k);
        let err = relative_error(analytic, numeric);
        let (name, offset) = grads.locate(k);
        let slot = names.iter().position(|n| *n == name).expect("known array");
        report.per_array[slot] = report.per_array[slot].max(err);
        if err > report.max_relative_error || report.worst.is_none() {
            report.max_relative_error = err;
            report.worst = Some((name, offset));
            report.analytic = analytic;
            report.numeric = numeric;
        }
    }
    Ok(report)
}
