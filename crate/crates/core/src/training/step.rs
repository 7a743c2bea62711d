use crate::error::{Error, Result};
use crate::losses::{contrastive_row, cross_entropy_row};
use crate::models::{argmax, AudioNet, Input, Network, TwoStream, VideoNet};
use crate::nn::{Ctx, ParamVisitor, Parameterized};
use crate::rng::{stream, Purpose};
use crate::tensor::{Scalar, Tensor};

/// A model with a per-example forward pass and a matching backward pass that
/// accumulates parameter gradients.
pub trait Differentiable<T: Scalar>: Parameterized<T> {
    fn forward_one(&mut self, x: &Input<T>, ctx: &mut Ctx) -> Result<Tensor<T>>;
    /// Gradient of the output of the last `forward_one`.
    fn backward_one(&mut self, g: &Tensor<T>);
}

fn clip<T>(x: &Input<T>) -> Result<&Tensor<T>> {
    x.clip.as_ref().ok_or_else(|| Error::shape("a video clip", "none"))
}

impl<T: Scalar> Differentiable<T> for AudioNet<T> {
    fn forward_one(&mut self, x: &Input<T>, ctx: &mut Ctx) -> Result<Tensor<T>> {
        self.forward(&x.spec, ctx)
    }

    fn backward_one(&mut self, g: &Tensor<T>) {
        self.backward(g)
    }
}

impl<T: Scalar> Differentiable<T> for VideoNet<T> {
    fn forward_one(&mut self, x: &Input<T>, ctx: &mut Ctx) -> Result<Tensor<T>> {
        self.forward(clip(x)?, ctx)
    }

    fn backward_one(&mut self, g: &Tensor<T>) {
        self.backward(g)
    }
}

impl<T: Scalar> Differentiable<T> for TwoStream<T> {
    fn forward_one(&mut self, x: &Input<T>, ctx: &mut Ctx) -> Result<Tensor<T>> {
        self.forward(&x.spec, clip(x)?, ctx)
    }

    fn backward_one(&mut self, g: &Tensor<T>) {
        self.backward(g)
    }
}

impl<T: Scalar> Differentiable<T> for Network<T> {
    fn forward_one(&mut self, x: &Input<T>, ctx: &mut Ctx) -> Result<Tensor<T>> {
        self.forward(x, ctx)
    }

    fn backward_one(&mut self, g: &Tensor<T>) {
        self.backward(g)
    }
}

/// A two-stream model seen as its embedding pair: the output is `f_a`
/// followed by `f_v`.
pub struct Embeddings<'a, T>(pub &'a mut TwoStream<T>);

impl<T: Scalar> Parameterized<T> for Embeddings<'_, T> {
    fn visit_params(&mut self, prefix: &str, f: &mut ParamVisitor<'_, T>) {
        self.0.visit_params(prefix, f)
    }
}

impl<T: Scalar> Differentiable<T> for Embeddings<'_, T> {
    fn forward_one(&mut self, x: &Input<T>, ctx: &mut Ctx) -> Result<Tensor<T>> {
        let (fa, fv) = self.0.embed(&x.spec, clip(x)?, ctx)?;
        let mut joint = fa.into_data();
        joint.extend_from_slice(fv.data());
        let n = joint.len();
        Tensor::from_vec(&[n], joint)
    }

    fn backward_one(&mut self, g: &Tensor<T>) {
        let d = g.len() / 2;
        let ga = Tensor::from_vec(&[d], g.data()[..d].to_vec()).expect("audio half");
        let gv = Tensor::from_vec(&[d], g.data()[d..].to_vec()).expect("video half");
        self.0.backward_embeddings(&ga, &gv);
    }
}

/// What each example is scored against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Class(usize),
    /// Whether the clip and spectrogram come from the same video.
    Matched(bool),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    CrossEntropy,
    /// On an output holding `f_a` then `f_v`.
    Contrastive { margin: f64 },
}

impl Objective {
    /// Loss of one output and its gradient.
    pub fn loss<T: Scalar>(&self, out: &Tensor<T>, target: Target) -> Result<(f64, Vec<T>)> {
        match (self, target) {
            (Objective::CrossEntropy, Target::Class(k)) => cross_entropy_row(out.data(), k),
            (Objective::Contrastive { margin }, Target::Matched(y)) => {
                let d = out.len() / 2;
                let (fa, fv) = out.data().split_at(d);
                let (loss, g_v, mut g_a) = contrastive_row(fv, fa, y, *margin)?;
                g_a.extend(g_v);
                Ok((loss, g_a))
            }
            (o, t) => Err(Error::Precondition(format!("target {t:?} does not fit objective {o:?}"))),
        }
    }
}

/// How dropout masks are drawn: none (evaluation), or a stream keyed by the
/// iteration and the example's position in the batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    Train { seed: u64, iteration: u64 },
}

impl Mode {
    fn ctx(self, i: usize) -> Ctx {
        match self {
            Mode::Eval => Ctx::eval(),
            Mode::Train { seed, iteration } => {
                Ctx::train(stream(seed, Purpose::Dropout, (iteration << 20) | i as u64))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BatchStats {
    /// Mean loss over the batch.
    pub loss: f64,
    /// Examples whose argmax output equals their class target.
    pub correct: usize,
    pub len: usize,
}

/// Mean loss over a batch. With `backward`, the gradient of that mean is
/// added to the parameter gradients (callers zero them first).
pub fn run_batch<T: Scalar, M: Differentiable<T> + ?Sized>(
    model: &mut M,
    objective: Objective,
    inputs: &[Input<T>],
    targets: &[Target],
    mode: Mode,
    backward: bool,
) -> Result<BatchStats> {
    if inputs.len() != targets.len() {
        return Err(Error::shape(format!("{} targets", inputs.len()), targets.len()));
    }
    if inputs.is_empty() {
        return Err(Error::EmptyInput("empty batch".into()));
    }
    let scale = 1.0 / inputs.len() as f64;
    let mut stats = BatchStats {
        len: inputs.len(),
        ..Default::default()
    };
    for (i, (x, &t)) in inputs.iter().zip(targets).enumerate() {
        let out = model.forward_one(x, &mut mode.ctx(i))?;
        let (loss, grad) = objective.loss(&out, t)?;
        if !loss.is_finite() {
            return Err(Error::Precondition(format!("non-finite loss on batch example {i}")));
        }
        stats.loss += loss * scale;
        if t == Target::Class(argmax(out.data())) {
            stats.correct += 1;
        }
        if backward {
            let g: Vec<T> = grad.into_iter().map(|g| T::of(g.f64() * scale)).collect();
            model.backward_one(&Tensor::from_vec(out.shape(), g)?);
        }
    }
    Ok(stats)
}
