//! Hand-written layers with explicit backward passes.
//!
//! Layers process one example at a time: `forward` caches what `backward`
//! needs, and `backward` accumulates parameter gradients (so a batch is a loop
//! of forward/backward pairs followed by one optimizer step). Volumes are laid
//! out `[channels, depth, height, width]`; 2-D feature maps use depth 1.

mod act;
mod conv;
mod linear;
mod pool;
mod recurrent;

use rand::Rng as _;

use crate::rng::Rng;
use crate::tensor::{Scalar, Tensor};

pub use act::{Dropout, Relu};
pub use conv::Conv;
pub use linear::Linear;
pub use pool::MaxPool;
pub use recurrent::{FreqMean, LstmCell, RnnCell};

/// A trainable tensor and its accumulated gradient.
#[derive(Debug, Clone)]
pub struct Param<T> {
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
}

impl<T: Scalar> Param<T> {
    pub fn new(value: Tensor<T>) -> Self {
        let grad = Tensor::zeros(value.shape());
        Param { value, grad }
    }

    /// `U(-bound, bound)` with `bound = 1/sqrt(fan_in)`.
    pub fn fan_in_uniform(shape: &[usize], fan_in: usize, rng: &mut Rng) -> Self {
        Self::uniform(shape, 1.0 / (fan_in.max(1) as f64).sqrt(), rng)
    }

    /// `U(-bound, bound)` with `bound = sqrt(6/fan_in)`, which keeps the
    /// activation variance roughly constant through ReLU layers.
    pub fn he_uniform(shape: &[usize], fan_in: usize, rng: &mut Rng) -> Self {
        Self::uniform(shape, (6.0 / fan_in.max(1) as f64).sqrt(), rng)
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Param::new(Tensor::zeros(shape))
    }

    fn uniform(shape: &[usize], bound: f64, rng: &mut Rng) -> Self {
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| T::of(rng.random_range(-bound..bound)))
            .collect();
        Param::new(Tensor::from_vec(shape, data).expect("shape matches"))
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// Callback used to walk every parameter with a dotted name.
pub type ParamVisitor<'a, T> = dyn FnMut(&str, &mut Param<T>) + 'a;

/// Something that owns named parameters.
pub trait Parameterized<T: Scalar> {
    fn visit_params(&mut self, prefix: &str, f: &mut ParamVisitor<'_, T>);

    fn zero_grad(&mut self) {
        self.visit_params("", &mut |_, p| p.zero_grad());
    }

    fn param_count(&mut self) -> usize {
        let mut n = 0;
        self.visit_params("", &mut |_, p| n += p.len());
        n
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

/// Per-example forward state: whether dropout is active and its random stream.
pub struct Ctx {
    pub train: bool,
    rng: Option<Rng>,
}

impl Ctx {
    pub fn eval() -> Self {
        Ctx {
            train: false,
            rng: None,
        }
    }

    pub fn train(rng: Rng) -> Self {
        Ctx {
            train: true,
            rng: Some(rng),
        }
    }

    pub(crate) fn rng(&mut self) -> &mut Rng {
        self.rng.as_mut().expect("training context carries a random stream")
    }
}
