use rand::Rng as _;

use super::Ctx;
use crate::tensor::{Scalar, Tensor};

/// Rectifier; remembers which inputs were positive.
#[derive(Debug, Clone, Default)]
pub struct Relu {
    mask: Vec<bool>,
}

impl Relu {
    pub fn forward<T: Scalar>(&mut self, mut x: Tensor<T>) -> Tensor<T> {
        self.mask.clear();
        for v in x.data_mut() {
            let keep = *v > T::zero();
            self.mask.push(keep);
            if !keep {
                *v = T::zero();
            }
        }
        x
    }

    pub fn backward<T: Scalar>(&self, mut g: Tensor<T>) -> Tensor<T> {
        for (v, &keep) in g.data_mut().iter_mut().zip(&self.mask) {
            if !keep {
                *v = T::zero();
            }
        }
        g
    }
}

/// Inverted dropout: in training, zeroes each value with probability `p` and
/// scales survivors by `1/(1-p)`; identity in evaluation.
#[derive(Debug, Clone)]
pub struct Dropout {
    pub p: f64,
    scale: Vec<f64>,
}

impl Dropout {
    pub fn new(p: f64) -> Self {
        Dropout {
            p,
            scale: Vec::new(),
        }
    }

    pub fn forward<T: Scalar>(&mut self, mut x: Tensor<T>, ctx: &mut Ctx) -> Tensor<T> {
        self.scale.clear();
        if !ctx.train || self.p <= 0.0 {
            return x;
        }
        let keep = 1.0 - self.p;
        let rng = ctx.rng();
        for v in x.data_mut() {
            let s = if rng.random::<f64>() < keep {
                1.0 / keep
            } else {
                0.0
            };
            self.scale.push(s);
            *v = *v * T::of(s);
        }
        x
    }

    pub fn backward<T: Scalar>(&self, mut g: Tensor<T>) -> Tensor<T> {
        if self.scale.is_empty() {
            return g;
        }
        for (v, &s) in g.data_mut().iter_mut().zip(&self.scale) {
            *v = *v * T::of(s);
        }
        g
    }
}
