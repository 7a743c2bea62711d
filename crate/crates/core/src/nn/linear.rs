use super::{join, Param, ParamVisitor, Parameterized};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{gemm, Mat, Scalar, Tensor};

/// Fully connected layer `y = W x + b` on a flat vector.
#[derive(Debug, Clone)]
pub struct Linear<T> {
    pub inputs: usize,
    pub outputs: usize,
    /// `[outputs, inputs]`
    pub weight: Param<T>,
    pub bias: Param<T>,
    x: Vec<T>,
}

impl<T: Scalar> Linear<T> {
    pub fn new(inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        Linear {
            inputs,
            outputs,
            weight: Param::he_uniform(&[outputs, inputs], inputs, rng),
            bias: Param::zeros(&[outputs]),
            x: Vec::new(),
        }
    }

    /// Accepts any tensor with `inputs` elements (it is flattened).
    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        if x.len() != self.inputs {
            return Err(Error::shape(
                format!("{} features", self.inputs),
                format!("{:?}", x.shape()),
            ));
        }
        self.x.clear();
        self.x.extend_from_slice(x.data());
        let mut y = self.bias.value.data().to_vec();
        gemm(
            T::one(),
            Mat::new(self.weight.value.data(), self.outputs, self.inputs),
            Mat::new(&self.x, self.inputs, 1),
            T::one(),
            &mut y,
        );
        Tensor::from_vec(&[self.outputs], y)
    }

    /// Accumulates parameter gradients and returns the (flat) input gradient.
    pub fn backward(&mut self, g: &Tensor<T>) -> Tensor<T> {
        let g = g.data();
        gemm(
            T::one(),
            Mat::new(g, self.outputs, 1),
            Mat::new(&self.x, 1, self.inputs),
            T::one(),
            self.weight.grad.data_mut(),
        );
        for (b, &v) in self.bias.grad.data_mut().iter_mut().zip(g) {
            *b += v;
        }
        let mut dx = vec![T::zero(); self.inputs];
        gemm(
            T::one(),
            Mat::t(self.weight.value.data(), self.outputs, self.inputs),
            Mat::new(g, self.outputs, 1),
            T::zero(),
            &mut dx,
        );
        Tensor::from_vec(&[self.inputs], dx).expect("shape matches")
    }
}

impl<T: Scalar> Parameterized<T> for Linear<T> {
    fn visit_params(&mut self, prefix: &str, f: &mut ParamVisitor<'_, T>) {
        f(&join(prefix, "weight"), &mut self.weight);
        f(&join(prefix, "bias"), &mut self.bias);
    }
}
