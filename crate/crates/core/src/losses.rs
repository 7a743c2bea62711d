//! Cross-entropy and margin contrastive losses, batch-mean reduced.
//!
//! Each loss has a per-example form returning the gradient with respect to
//! its inputs, used by the training loop, and a batch form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// `-log softmax(x)[label]` and its gradient `softmax(x) - onehot(label)`.
pub fn cross_entropy_row<T: Scalar>(logits: &[T], label: usize) -> Result<(f64, Vec<T>)> {
    if label >= logits.len() {
        return Err(Error::Label(format!(
            "label {label} outside [0, {})",
            logits.len()
        )));
    }
    let max = logits
        .iter()
        .map(|v| v.f64())
        .fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v.f64() - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() - (logits[label].f64() - max);
    let grad = exps
        .iter()
        .enumerate()
        .map(|(j, e)| T::of(e / sum - if j == label { 1.0 } else { 0.0 }))
        .collect();
    Ok((loss, grad))
}

/// Mean cross-entropy of `[B, K]` logits against class indices.
pub fn cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<f64> {
    let (b, k) = matrix_dims(logits)?;
    if labels.len() != b {
        return Err(Error::shape(format!("{b} labels"), labels.len()));
    }
    let mut total = 0.0;
    for (row, &label) in logits.data().chunks(k).zip(labels) {
        total += cross_entropy_row(row, label)?.0;
    }
    Ok(total / b as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContrastiveConfig {
    pub margin: f64,
}

impl Default for ContrastiveConfig {
    fn default() -> Self {
        ContrastiveConfig { margin: 1.0 }
    }
}

impl ContrastiveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.margin > 0.0 && self.margin.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!("margin must be positive, got {}", self.margin)))
        }
    }
}

/// `y * d^2 + (1 - y) * max(margin - d, 0)^2` with `d = |f_v - f_a|`, and its
/// gradients with respect to `f_v` and `f_a`.
///
/// At `d = 0` with `y = 0` the direction is undefined; the gradient is taken as zero.
pub fn contrastive_row<T: Scalar>(
    f_v: &[T],
    f_a: &[T],
    matched: bool,
    margin: f64,
) -> Result<(f64, Vec<T>, Vec<T>)> {
    if f_v.len() != f_a.len() {
        return Err(Error::shape(
            format!("embeddings of equal length {}", f_v.len()),
            f_a.len(),
        ));
    }
    let diff: Vec<f64> = f_v.iter().zip(f_a).map(|(v, a)| v.f64() - a.f64()).collect();
    let sq: f64 = diff.iter().map(|d| d * d).sum();
    let dist = sq.sqrt();
    // dL/d(diff)
    let (loss, scale) = if matched {
        (sq, 2.0)
    } else if dist < margin {
        let gap = margin - dist;
        let s = if dist > 0.0 { -2.0 * gap / dist } else { 0.0 };
        (gap * gap, s)
    } else {
        (0.0, 0.0)
    };
    let g_v: Vec<T> = diff.iter().map(|d| T::of(scale * d)).collect();
    let g_a = g_v.iter().map(|&g| -g).collect();
    Ok((loss, g_v, g_a))
}

/// Mean contrastive loss over `[B, D]` embedding batches.
pub fn contrastive<T: Scalar>(
    f_v: &Tensor<T>,
    f_a: &Tensor<T>,
    y: &[bool],
    cfg: &ContrastiveConfig,
) -> Result<f64> {
    let (b, d) = matrix_dims(f_v)?;
    if f_a.shape() != f_v.shape() {
        return Err(Error::shape(format!("{:?}", f_v.shape()), format!("{:?}", f_a.shape())));
    }
    if y.len() != b {
        return Err(Error::shape(format!("{b} match flags"), y.len()));
    }
    let mut total = 0.0;
    for ((v, a), &m) in f_v.data().chunks(d).zip(f_a.data().chunks(d)).zip(y) {
        total += contrastive_row(v, a, m, cfg.margin)?.0;
    }
    Ok(total / b as f64)
}

fn matrix_dims<T: Scalar>(t: &Tensor<T>) -> Result<(usize, usize)> {
    match t.shape() {
        &[b, k] if b > 0 && k > 0 => Ok((b, k)),
        s => Err(Error::shape("[B > 0, K > 0]", format!("{s:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(rows: usize, data: Vec<f64>) -> Tensor<f64> {
        let cols = data.len() / rows;
        Tensor::from_vec(&[rows, cols], data).unwrap()
    }

    #[test]
    fn cross_entropy_reference_values() {
        let uniform = cross_entropy(&t(1, vec![0.7; 4]), &[2]).unwrap();
        assert!((uniform - 4f64.ln()).abs() < 1e-12);
        let sat = cross_entropy(&t(1, vec![0.0, 30.0, 0.0]), &[1]).unwrap();
        assert!(sat < 1e-9);
        // 2.0 - ln(e^1 + e^2 + e^0.5) computed by hand: 0.46436...
        let v = cross_entropy(&t(1, vec![1.0, 2.0, 0.5]), &[1]).unwrap();
        assert!((v - 0.4644).abs() < 5e-5, "{v}");
        assert!(matches!(
            cross_entropy(&t(1, vec![1.0, 2.0]), &[2]),
            Err(Error::Label(_))
        ));
    }

    #[test]
    fn huge_logits_do_not_overflow() {
        let v = cross_entropy(&t(1, vec![1000.0, 0.0]), &[1]).unwrap();
        assert!((v - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn contrastive_reference_values() {
        let cfg = ContrastiveConfig { margin: 2.0 };
        let zero = contrastive(&t(1, vec![0.3, 0.4]), &t(1, vec![0.3, 0.4]), &[true], &cfg).unwrap();
        assert_eq!(zero, 0.0);
        let far = contrastive(&t(1, vec![3.0, 0.0]), &t(1, vec![0.0, 0.0]), &[false], &cfg).unwrap();
        assert_eq!(far, 0.0);
        let near = contrastive(&t(1, vec![1.0, 0.0]), &t(1, vec![0.0, 0.0]), &[false], &cfg).unwrap();
        assert!((near - 1.0).abs() < 1e-12);
        assert!(contrastive(&t(1, vec![1.0, 0.0]), &t(1, vec![0.0]), &[false], &cfg).is_err());
    }

    fn logits_and_label() -> impl Strategy<Value = (Vec<f64>, usize)> {
        (2usize..6).prop_flat_map(|k| (prop::collection::vec(-20.0f64..20.0, k), 0..k))
    }

    proptest! {
        #[test]
        fn cross_entropy_nonnegative_and_shift_invariant((x, label) in logits_and_label(), c in -50.0f64..50.0) {
            let a = cross_entropy(&t(1, x.clone()), &[label]).unwrap();
            let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
            let b = cross_entropy(&t(1, shifted), &[label]).unwrap();
            prop_assert!(a >= 0.0);
            prop_assert!((a - b).abs() < 1e-6);
        }

        #[test]
        fn cross_entropy_gradient_matches_differences((x, label) in logits_and_label()) {
            let (_, g) = cross_entropy_row(&x, label).unwrap();
            for j in 0..x.len() {
                let eps = 1e-6;
                let mut xp = x.clone();
                xp[j] += eps;
                let mut xm = x.clone();
                xm[j] -= eps;
                let num = (cross_entropy_row(&xp, label).unwrap().0
                    - cross_entropy_row(&xm, label).unwrap().0) / (2.0 * eps);
                prop_assert!((num - g[j]).abs() < 1e-6);
            }
        }

        #[test]
        fn contrastive_properties(
            dir in prop::collection::vec(-1.0f64..1.0, 3),
            r1 in 0.0f64..3.0,
            r2 in 0.0f64..3.0,
            margin in 0.1f64..2.0,
        ) {
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assume!(norm > 1e-3);
            let at = |r: f64| -> Vec<f64> { dir.iter().map(|v| v / norm * r).collect() };
            let zero = vec![0.0; 3];
            let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
            let pos_lo = contrastive_row(&at(lo), &zero, true, margin).unwrap().0;
            let pos_hi = contrastive_row(&at(hi), &zero, true, margin).unwrap().0;
            prop_assert!(pos_lo >= 0.0 && pos_lo <= pos_hi + 1e-12);
            let neg = contrastive_row(&at(hi), &zero, false, margin).unwrap().0;
            prop_assert!(neg >= 0.0);
            if hi >= margin {
                prop_assert_eq!(neg, 0.0);
            }
        }

        #[test]
        fn contrastive_gradient_matches_differences(
            v in prop::collection::vec(-1.0f64..1.0, 4),
            a in prop::collection::vec(-1.0f64..1.0, 4),
            matched: bool,
        ) {
            let margin = 1.5;
            let (_, gv, ga) = contrastive_row(&v, &a, matched, margin).unwrap();
            let dist = v.iter().zip(&a).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            // away from the hinge the loss is smooth
            prop_assume!((dist - margin).abs() > 1e-3);
            for j in 0..4 {
                let eps = 1e-6;
                let mut vp = v.clone();
                vp[j] += eps;
                let mut vm = v.clone();
                vm[j] -= eps;
                let num = (contrastive_row(&vp, &a, matched, margin).unwrap().0
                    - contrastive_row(&vm, &a, matched, margin).unwrap().0) / (2.0 * eps);
                prop_assert!((num - gv[j]).abs() < 1e-5);
                prop_assert!((ga[j] + gv[j]).abs() < 1e-15);
            }
        }
    }
}
