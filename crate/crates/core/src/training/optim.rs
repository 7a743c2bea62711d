use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::nn::Parameterized;
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    /// Coupled L2 penalty: `weight_decay * w` is added to the gradient.
    pub weight_decay: f64,
    /// `l1 * sign(w)` is added to the gradient.
    pub l1: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

/// Adam with bias correction. Moments are kept per parameter name.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub cfg: AdamConfig,
    pub step: u64,
    moments: BTreeMap<String, (Vec<T>, Vec<T>)>,
}

const M_PREFIX: &str = "adam.m.";
const V_PREFIX: &str = "adam.v.";

impl<T: Scalar> Adam<T> {
    pub fn new(cfg: AdamConfig) -> Self {
        Adam {
            cfg,
            step: 0,
            moments: BTreeMap::new(),
        }
    }

    /// One update from the accumulated gradients.
    pub fn update(&mut self, model: &mut (impl Parameterized<T> + ?Sized)) {
        self.step += 1;
        let c = self.cfg;
        let t = self.step as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        let moments = &mut self.moments;
        model.visit_params("", &mut |name, p| {
            let n = p.len();
            let (m, v) = moments
                .entry(name.to_string())
                .or_insert_with(|| (vec![T::zero(); n], vec![T::zero(); n]));
            let grads = p.grad.data().to_vec();
            for (i, w) in p.value.data_mut().iter_mut().enumerate() {
                let wf = w.f64();
                let mut g = grads[i].f64() + c.weight_decay * wf;
                if c.l1 != 0.0 && wf != 0.0 {
                    g += c.l1 * wf.signum();
                }
                let mi = c.beta1 * m[i].f64() + (1.0 - c.beta1) * g;
                let vi = c.beta2 * v[i].f64() + (1.0 - c.beta2) * g * g;
                m[i] = T::of(mi);
                v[i] = T::of(vi);
                let update = c.learning_rate * (mi / bc1) / ((vi / bc2).sqrt() + c.eps);
                *w = T::of(wf - update);
            }
        });
    }

    /// Moments as named `f64` tensors for checkpointing.
    pub fn state_tensors(&self) -> BTreeMap<String, Tensor<f64>> {
        let mut out = BTreeMap::new();
        for (name, (m, v)) in &self.moments {
            let as_f64 = |x: &[T]| {
                Tensor::from_vec(&[x.len()], x.iter().map(|v| v.f64()).collect()).expect("1-d")
            };
            out.insert(format!("{M_PREFIX}{name}"), as_f64(m));
            out.insert(format!("{V_PREFIX}{name}"), as_f64(v));
        }
        out
    }

    pub fn load_state(&mut self, step: u64, tensors: &BTreeMap<String, Tensor<f64>>) -> Result<()> {
        self.step = step;
        self.moments.clear();
        for (key, m) in tensors {
            let Some(name) = key.strip_prefix(M_PREFIX) else {
                continue;
            };
            let v = tensors
                .get(&format!("{V_PREFIX}{name}"))
                .filter(|v| v.len() == m.len())
                .ok_or_else(|| Error::Checkpoint(format!("optimizer state for {name} is incomplete")))?;
            let cast = |t: &Tensor<f64>| t.data().iter().map(|&x| T::of(x)).collect();
            self.moments.insert(name.to_string(), (cast(m), cast(v)));
        }
        Ok(())
    }
}
