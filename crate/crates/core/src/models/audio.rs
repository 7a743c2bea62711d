use super::{ModelConfig, OutputMode, Variant};
use crate::error::{Error, Result};
use crate::nn::{
    join, Conv, Ctx, Dropout, FreqMean, Linear, LstmCell, MaxPool, ParamVisitor, Parameterized,
    Relu, RnnCell,
};
use crate::rng::{stream, Purpose};
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone)]
enum Recurrence<T> {
    Rnn(RnnCell<T>),
    Lstm(LstmCell<T>),
}

#[derive(Debug, Clone)]
enum Head<T> {
    /// flatten, FC, ReLU, dropout, FC
    Dense {
        fc: Linear<T>,
        relu: Relu,
        drop: Dropout,
        out: Linear<T>,
    },
    /// mean over rows, recurrence, dropout on the final state, FC
    Recurrent {
        mean: FreqMean,
        cell: Recurrence<T>,
        drop: Dropout,
        out: Linear<T>,
    },
}

/// Three conv/ReLU/pool stages followed by a dense or recurrent head.
#[derive(Debug, Clone)]
pub struct AudioNet<T> {
    cfg: ModelConfig,
    mode: OutputMode,
    convs: Vec<Conv<T>>,
    relus: Vec<Relu>,
    pools: Vec<MaxPool>,
    head: Head<T>,
    conv_out_shape: Vec<usize>,
}

impl<T: Scalar> AudioNet<T> {
    /// Layer `i` is initialized from its own stream so architectures that
    /// share a prefix share its initial weights.
    pub fn new(cfg: &ModelConfig, mode: OutputMode, seed: u64) -> Self {
        Self::with_stream_offset(cfg, mode, seed, 0)
    }

    pub(crate) fn with_stream_offset(
        cfg: &ModelConfig,
        mode: OutputMode,
        seed: u64,
        offset: u64,
    ) -> Self {
        let init = |i: u64| stream(seed, Purpose::Init, offset + i);
        let ch = cfg.audio_channels();
        let mut convs = Vec::new();
        let mut in_ch = 3;
        for i in 0..3 {
            convs.push(Conv::conv2d(
                in_ch,
                ch[i],
                cfg.conv_kernels[i],
                cfg.conv_padding[i],
                &mut init(i as u64),
            ));
            in_ch = ch[i];
        }
        // the spectrogram itself needs no gradient
        convs[0].input_grad = false;
        let out_dim = cfg.output_dim(mode);
        let [gh, gw] = cfg.audio_grid();
        let head = match cfg.audio_variant() {
            Variant::Cnn => Head::Dense {
                fc: Linear::new(in_ch * gh * gw, cfg.fc_hidden, &mut init(3)),
                relu: Relu::default(),
                drop: Dropout::new(cfg.dropout_fc),
                out: Linear::new(cfg.fc_hidden, out_dim, &mut init(4)),
            },
            v => {
                let cell = if v == Variant::CnnLstm {
                    Recurrence::Lstm(LstmCell::new(in_ch, cfg.rnn_hidden, &mut init(3)))
                } else {
                    Recurrence::Rnn(RnnCell::new(in_ch, cfg.rnn_hidden, &mut init(3)))
                };
                Head::Recurrent {
                    mean: FreqMean::default(),
                    cell,
                    drop: Dropout::new(cfg.dropout_rnn),
                    out: Linear::new(cfg.rnn_hidden, out_dim, &mut init(4)),
                }
            }
        };
        AudioNet {
            cfg: cfg.clone(),
            mode,
            convs,
            relus: vec![Relu::default(); 3],
            pools: vec![MaxPool::pool2d(); 3],
            head,
            conv_out_shape: Vec::new(),
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn mode(&self) -> OutputMode {
        self.mode
    }

    pub fn output_dim(&self) -> usize {
        self.cfg.output_dim(self.mode)
    }

    /// `[3, H, W]` spectrogram to a logit or embedding vector.
    pub fn forward(&mut self, x: &Tensor<T>, ctx: &mut Ctx) -> Result<Tensor<T>> {
        let [h, w] = self.cfg.audio_input;
        if x.shape() != [3, h, w] {
            return Err(Error::shape(format!("[3, {h}, {w}]"), format!("{:?}", x.shape())));
        }
        let mut a = x.clone().reshape(&[3, 1, h, w])?;
        for i in 0..3 {
            a = self.convs[i].forward(&a)?;
            a = self.relus[i].forward(a);
            a = self.pools[i].forward(&a)?;
        }
        self.conv_out_shape = a.shape().to_vec();
        match &mut self.head {
            Head::Dense { fc, relu, drop, out } => {
                let z = relu.forward(fc.forward(&a)?);
                out.forward(&drop.forward(z, ctx))
            }
            Head::Recurrent {
                mean,
                cell,
                drop,
                out,
            } => {
                let seq = mean.forward(&a)?;
                let last = match cell {
                    Recurrence::Rnn(c) => c.forward(&seq)?,
                    Recurrence::Lstm(c) => c.forward(&seq)?,
                };
                out.forward(&drop.forward(last, ctx))
            }
        }
    }

    /// Back-propagates the gradient of the output from the last `forward`.
    pub fn backward(&mut self, g: &Tensor<T>) {
        let mut ga = match &mut self.head {
            Head::Dense { fc, relu, drop, out } => {
                let gz = relu.backward(drop.backward(out.backward(g)));
                fc.backward(&gz)
                    .reshape(&self.conv_out_shape)
                    .expect("flat gradient matches conv output")
            }
            Head::Recurrent {
                mean,
                cell,
                drop,
                out,
            } => {
                let gl = drop.backward(out.backward(g));
                let gs = match cell {
                    Recurrence::Rnn(c) => c.backward(&gl),
                    Recurrence::Lstm(c) => c.backward(&gl),
                };
                mean.backward(&gs)
            }
        };
        for i in (0..3).rev() {
            ga = self.relus[i].backward(self.pools[i].backward(&ga));
            match self.convs[i].backward(&ga) {
                Some(next) => ga = next,
                None => break,
            }
        }
    }

    /// Evaluation-mode outputs for a `[B, 3, H, W]` batch.
    pub fn forward_batch(&mut self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        let s = batch.shape();
        if s.len() != 4 {
            return Err(Error::shape("[B, 3, H, W]", format!("{s:?}")));
        }
        let rows = (0..s[0])
            .map(|b| self.forward(&batch.item(b), &mut Ctx::eval()))
            .collect::<Result<Vec<_>>>()?;
        Tensor::stack(&rows)
    }
}

impl<T: Scalar> Parameterized<T> for AudioNet<T> {
    fn visit_params(&mut self, prefix: &str, f: &mut ParamVisitor<'_, T>) {
        for (i, c) in self.convs.iter_mut().enumerate() {
            c.visit_params(&join(prefix, &format!("conv{}", i + 1)), f);
        }
        match &mut self.head {
            Head::Dense { fc, out, .. } => {
                fc.visit_params(&join(prefix, "fc"), f);
                out.visit_params(&join(prefix, "out"), f);
            }
            Head::Recurrent { cell, out, .. } => {
                match cell {
                    Recurrence::Rnn(c) => c.visit_params(&join(prefix, "rnn"), f),
                    Recurrence::Lstm(c) => c.visit_params(&join(prefix, "lstm"), f),
                }
                out.visit_params(&join(prefix, "out"), f);
            }
        }
    }
}
