use std::collections::BTreeMap;

use rand::seq::index;
use serde::Serialize;

use super::step::{run_batch, Differentiable, Mode, Objective, Target};
use crate::error::{Error, Result};
use crate::models::Input;
use crate::rng::{stream, Purpose};
use crate::tensor::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub samples_per_param: usize,
    /// Half-width of the central difference.
    pub eps: f64,
    /// Relative errors are taken against `max(|analytic|, |numeric|, floor)`.
    pub floor: f64,
    pub seed: u64,
}

impl GradCheckConfig {
    /// Settings for checking gradients computed in precision `T`. Differences
    /// are always taken in `f64` (see [`check_gradients_against`]); the floor
    /// scales with the rounding of the analytic side.
    pub fn for_dtype<T: Scalar>() -> Self {
        GradCheckConfig {
            samples_per_param: 10,
            eps: 1e-6,
            floor: if T::DTYPE == "f32" { 1e-5 } else { 1e-7 },
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
    /// `(flat index, analytic, numeric)` of the worst entry.
    pub worst: (usize, f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradReport {
    pub params: Vec<ParamCheck>,
    pub max_rel_error: f64,
}

impl GradReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error.is_finite() && self.max_rel_error < tolerance
    }
}

/// Analytic gradient of the mean batch loss, per parameter name.
pub fn analytic_gradients<T: Scalar, M: Differentiable<T>>(
    model: &mut M,
    objective: Objective,
    inputs: &[Input<T>],
    targets: &[Target],
    cfg: &GradCheckConfig,
) -> Result<BTreeMap<String, Vec<f64>>> {
    model.zero_grad();
    run_batch(model, objective, inputs, targets, mode(cfg), true)?;
    let mut out = BTreeMap::new();
    model.visit_params("", &mut |name, p| {
        out.insert(name.to_string(), p.grad.data().iter().map(|g| g.f64()).collect());
    });
    Ok(out)
}

fn mode(cfg: &GradCheckConfig) -> Mode {
    // dropout stays active; every pass redraws the same masks
    Mode::Train {
        seed: cfg.seed,
        iteration: 0,
    }
}

/// Compares `analytic` against central differences of the batch loss on
/// `samples_per_param` seeded entries of every parameter tensor.
pub fn compare_gradients<T: Scalar, M: Differentiable<T>>(
    model: &mut M,
    objective: Objective,
    inputs: &[Input<T>],
    targets: &[Target],
    analytic: &BTreeMap<String, Vec<f64>>,
    cfg: &GradCheckConfig,
) -> Result<GradReport> {
    let mut names = Vec::new();
    model.visit_params("", &mut |name, p| names.push((name.to_string(), p.len())));
    let mut params = Vec::with_capacity(names.len());
    for (pi, (name, len)) in names.iter().enumerate() {
        let mut rng = stream(cfg.seed, Purpose::GradCheck, pi as u64);
        let mut picks = index::sample(&mut rng, *len, cfg.samples_per_param.min(*len)).into_vec();
        picks.sort_unstable();
        let mut check = ParamCheck {
            name: name.clone(),
            checked: picks.len(),
            max_rel_error: 0.0,
            worst: (0, 0.0, 0.0),
        };
        for i in picks {
            let mut loss_at = |delta: f64| -> Result<(f64, f64)> {
                let mut orig = T::zero();
                let mut set = T::zero();
                model.visit_params("", &mut |n, p| {
                    if n == name {
                        let w = &mut p.value.data_mut()[i];
                        orig = *w;
                        *w = T::of(w.f64() + delta);
                        set = *w;
                    }
                });
                let loss = run_batch(model, objective, inputs, targets, mode(cfg), false)
                    .map(|s| s.loss);
                model.visit_params("", &mut |n, p| {
                    if n == name {
                        p.value.data_mut()[i] = orig;
                    }
                });
                Ok((loss?, set.f64()))
            };
            let (lp, wp) = loss_at(cfg.eps)?;
            let (lm, wm) = loss_at(-cfg.eps)?;
            // the realized step, which rounding may have changed
            let numeric = (lp - lm) / (wp - wm);
            let a = analytic.get(name).and_then(|g| g.get(i)).copied().unwrap_or(f64::NAN);
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(cfg.floor);
            if !(err <= check.max_rel_error) {
                check.max_rel_error = err;
                check.worst = (i, a, numeric);
            }
        }
        params.push(check);
    }
    let max_rel_error = params
        .iter()
        .map(|p| p.max_rel_error)
        .fold(0.0, |m: f64, e| if e.is_nan() || m.is_nan() { f64::NAN } else { m.max(e) });
    Ok(GradReport {
        params,
        max_rel_error,
    })
}

/// Checks the analytic gradients of `model` against central differences of
/// `reference`, an `f64` twin of the same architecture that is given the
/// model's weights first. Low-precision forward passes are too coarse for
/// differences whose step is small enough to stay clear of ReLU and pooling
/// kinks, so the differences run at full precision.
pub fn check_gradients_against<T: Scalar, M: Differentiable<T>, R: Differentiable<f64>>(
    model: &mut M,
    reference: &mut R,
    objective: Objective,
    inputs: &[Input<T>],
    targets: &[Target],
    cfg: &GradCheckConfig,
) -> Result<GradReport> {
    let analytic = analytic_gradients(model, objective, inputs, targets, cfg)?;
    let mut weights = BTreeMap::new();
    model.visit_params("", &mut |name, p| {
        weights.insert(name.to_string(), p.value.cast::<f64>());
    });
    let mut missing = Vec::new();
    reference.visit_params("", &mut |name, p| match weights.remove(name) {
        Some(w) if w.shape() == p.value.shape() => p.value = w,
        _ => missing.push(name.to_string()),
    });
    if !missing.is_empty() || !weights.is_empty() {
        return Err(Error::Precondition(format!(
            "reference model does not mirror the checked one: {missing:?} {:?}",
            weights.keys().collect::<Vec<_>>()
        )));
    }
    let wide: Vec<Input<f64>> = inputs
        .iter()
        .map(|x| Input {
            spec: x.spec.cast(),
            clip: x.clip.as_ref().map(|c| c.cast()),
        })
        .collect();
    compare_gradients(reference, objective, &wide, targets, &analytic, cfg)
}

/// Checks `model` against its own central differences; meant for `f64` models.
pub fn check_gradients<T: Scalar, M: Differentiable<T>>(
    model: &mut M,
    objective: Objective,
    inputs: &[Input<T>],
    targets: &[Target],
    cfg: &GradCheckConfig,
) -> Result<GradReport> {
    let analytic = analytic_gradients(model, objective, inputs, targets, cfg)?;
    compare_gradients(model, objective, inputs, targets, &analytic, cfg)
}
