//! Central finite-difference verification of analytic gradients.
//!
//! Checks run in 64-bit precision; the relative error of one entry is
//! `|g_a − g_n| / max(|g_a|, |g_n|, 1e-6)` and a report carries the maximum
//! over every entry visited.

use super::param::{Param, Params};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-5;

/// Gradients smaller than this are compared in absolute terms. With an O(1)
/// loss and the default step, cancellation in the central difference leaves
/// about 1e-11 of noise, so tinier entries carry no signal.
pub const GRADIENT_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug)]
pub struct GradCheckOptions {
    pub epsilon: f64,
    /// Check at most this many entries per parameter tensor (evenly
    /// strided); `None` checks every entry.
    pub max_entries_per_param: Option<usize>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            max_entries_per_param: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameter (or `"input"`) holding the worst entry.
    pub worst: String,
    pub worst_index: usize,
    pub entries_checked: usize,
}

impl GradCheckReport {
    fn empty() -> Self {
        Self {
            max_relative_error: 0.0,
            worst: String::new(),
            worst_index: 0,
            entries_checked: 0,
        }
    }

    fn record(&mut self, name: &str, index: usize, analytic: f64, numeric: f64) {
        let err = relative_error(analytic, numeric);
        self.entries_checked += 1;
        if err > self.max_relative_error || self.entries_checked == 1 {
            self.max_relative_error = err;
            self.worst = name.to_string();
            self.worst_index = index;
        }
    }

    /// Combines two reports, keeping the worst entry.
    pub fn merge(mut self, other: GradCheckReport) -> GradCheckReport {
        if other.max_relative_error > self.max_relative_error {
            self.max_relative_error = other.max_relative_error;
            self.worst = other.worst;
            self.worst_index = other.worst_index;
        }
        self.entries_checked += other.entries_checked;
        self
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRADIENT_FLOOR)
}

fn entry_indices(len: usize, limit: Option<usize>) -> Vec<usize> {
    match limit {
        Some(m) if m < len => {
            let stride = len as f64 / m as f64;
            (0..m).map(|i| (i as f64 * stride) as usize).collect()
        }
        _ => (0..len).collect(),
    }
}

fn finite(loss: f64) -> Result<f64> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::Numeric(format!("loss is not finite ({loss})")))
    }
}

/// Compares the gradients accumulated by `loss_and_backward` against
/// central differences of the loss it returns.
///
/// `loss_and_backward` must run a forward pass, accumulate parameter
/// gradients and return the scalar loss. Parameters are restored exactly
/// after each perturbation.
pub fn grad_check<M, F>(
    model: &mut M,
    mut loss_and_backward: F,
    options: GradCheckOptions,
) -> Result<GradCheckReport>
where
    M: Params<f64> + ?Sized,
    F: FnMut(&mut M) -> Result<f64>,
{
    model.zero_grad();
    finite(loss_and_backward(model)?)?;
    let mut analytic: Vec<(String, Tensor<f64>)> = Vec::new();
    model.visit_params(&mut |name, p| analytic.push((name.to_string(), p.grad.clone())));

    let eps = options.epsilon;
    let mut report = GradCheckReport::empty();
    for (pi, (name, grad)) in analytic.iter().enumerate() {
        for idx in entry_indices(grad.len(), options.max_entries_per_param) {
            let original = with_param(model, pi, |p| p.value.data()[idx]);
            with_param(model, pi, |p| p.value.data_mut()[idx] = original + eps);
            let plus = finite(loss_and_backward(model)?)?;
            with_param(model, pi, |p| p.value.data_mut()[idx] = original - eps);
            let minus = finite(loss_and_backward(model)?)?;
            with_param(model, pi, |p| p.value.data_mut()[idx] = original);
            let numeric = (plus - minus) / (2.0 * eps);
            report.record(name, idx, grad.data()[idx], numeric);
        }
    }
    model.zero_grad();
    Ok(report)
}

fn with_param<M, R>(model: &mut M, index: usize, f: impl FnOnce(&mut Param<f64>) -> R) -> R
where
    M: Params<f64> + ?Sized,
{
    let mut f = Some(f);
    let mut out = None;
    let mut i = 0;
    model.visit_params_mut(&mut |_, p| {
        if i == index {
            out = Some((f.take().expect("visited once"))(p));
        }
        i += 1;
    });
    out.expect("parameter index in range")
}

/// Checks an analytic input gradient against central differences of
/// `loss(x)`.
pub fn input_grad_check<F>(
    input: &Tensor<f64>,
    analytic: &Tensor<f64>,
    mut loss: F,
    options: GradCheckOptions,
) -> Result<GradCheckReport>
where
    F: FnMut(&Tensor<f64>) -> Result<f64>,
{
    if input.shape() != analytic.shape() {
        return Err(Error::dim(
            "input_grad_check",
            format!("{:?} vs {:?}", input.shape(), analytic.shape()),
        ));
    }
    let eps = options.epsilon;
    let mut report = GradCheckReport::empty();
    let mut x = input.clone();
    for idx in entry_indices(input.len(), options.max_entries_per_param) {
        let original = x.data()[idx];
        x.data_mut()[idx] = original + eps;
        let plus = finite(loss(&x)?)?;
        x.data_mut()[idx] = original - eps;
        let minus = finite(loss(&x)?)?;
        x.data_mut()[idx] = original;
        report.record(
            "input",
            idx,
            analytic.data()[idx],
            (plus - minus) / (2.0 * eps),
        );
    }
    Ok(report)
}
