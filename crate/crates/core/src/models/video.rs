use super::ModelConfig;
use crate::error::{Error, Result};
use crate::nn::{join, Conv, Ctx, Dropout, Linear, MaxPool, ParamVisitor, Parameterized, Relu};
use crate::rng::{stream, Purpose};
use crate::tensor::{Scalar, Tensor};

/// Four 3x3x3 conv/ReLU stages (2x2x2 pools after the first three), then
/// FC, ReLU, dropout, FC to the embedding.
#[derive(Debug, Clone)]
pub struct VideoNet<T> {
    cfg: ModelConfig,
    convs: Vec<Conv<T>>,
    relus: Vec<Relu>,
    pools: Vec<MaxPool>,
    fc: Linear<T>,
    relu: Relu,
    drop: Dropout,
    out: Linear<T>,
    conv_out_shape: Vec<usize>,
}

impl<T: Scalar> VideoNet<T> {
    pub fn new(cfg: &ModelConfig, seed: u64) -> Self {
        Self::with_stream_offset(cfg, seed, 0)
    }

    pub(crate) fn with_stream_offset(cfg: &ModelConfig, seed: u64, offset: u64) -> Self {
        let init = |i: u64| stream(seed, Purpose::Init, offset + i);
        let mut convs = Vec::new();
        let mut in_ch = 3;
        for (i, &c) in cfg.video_channels.iter().enumerate() {
            convs.push(Conv::conv3d(in_ch, c, 3, 1, &mut init(i as u64)));
            in_ch = c;
        }
        convs[0].input_grad = false;
        let flat = in_ch * cfg.video_grid().iter().product::<usize>();
        VideoNet {
            cfg: cfg.clone(),
            convs,
            relus: vec![Relu::default(); 4],
            pools: vec![MaxPool::pool3d(); 3],
            fc: Linear::new(flat, cfg.video_fc_hidden, &mut init(4)),
            relu: Relu::default(),
            drop: Dropout::new(cfg.dropout_fc),
            out: Linear::new(cfg.video_fc_hidden, cfg.embedding_dim, &mut init(5)),
            conv_out_shape: Vec::new(),
        }
    }

    /// `[3, T, H, W]` clip to a `D`-vector.
    pub fn forward(&mut self, x: &Tensor<T>, ctx: &mut Ctx) -> Result<Tensor<T>> {
        let [t, h, w] = self.cfg.video_input;
        if x.shape() != [3, t, h, w] {
            return Err(Error::shape(
                format!("[3, {t}, {h}, {w}]"),
                format!("{:?}", x.shape()),
            ));
        }
        let mut a = x.clone();
        for i in 0..4 {
            a = self.convs[i].forward(&a)?;
            a = self.relus[i].forward(a);
            if i < 3 {
                a = self.pools[i].forward(&a)?;
            }
        }
        self.conv_out_shape = a.shape().to_vec();
        let z = self.relu.forward(self.fc.forward(&a)?);
        self.out.forward(&self.drop.forward(z, ctx))
    }

    pub fn backward(&mut self, g: &Tensor<T>) {
        let gz = self.relu.backward(self.drop.backward(self.out.backward(g)));
        let mut ga = self
            .fc
            .backward(&gz)
            .reshape(&self.conv_out_shape)
            .expect("flat gradient matches conv output");
        for i in (0..4).rev() {
            if i < 3 {
                ga = self.pools[i].backward(&ga);
            }
            ga = self.relus[i].backward(ga);
            match self.convs[i].backward(&ga) {
                Some(next) => ga = next,
                None => break,
            }
        }
    }

    /// Evaluation-mode embeddings for a `[B, 3, T, H, W]` batch.
    pub fn forward_batch(&mut self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        let s = batch.shape();
        if s.len() != 5 {
            return Err(Error::shape("[B, 3, T, H, W]", format!("{s:?}")));
        }
        let rows = (0..s[0])
            .map(|b| self.forward(&batch.item(b), &mut Ctx::eval()))
            .collect::<Result<Vec<_>>>()?;
        Tensor::stack(&rows)
    }
}

impl<T: Scalar> Parameterized<T> for VideoNet<T> {
    fn visit_params(&mut self, prefix: &str, f: &mut ParamVisitor<'_, T>) {
        for (i, c) in self.convs.iter_mut().enumerate() {
            c.visit_params(&join(prefix, &format!("conv{}", i + 1)), f);
        }
        self.fc.visit_params(&join(prefix, "fc"), f);
        self.out.visit_params(&join(prefix, "out"), f);
    }
}
