//! Audio CNN / CNN+RNN / CNN+LSTM, the video 3-D CNN, and the two-stream
//! network that concatenates their embeddings.

mod audio;
mod checkpoint;
mod two_stream;
mod video;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Ctx, ParamVisitor, Parameterized};
use crate::signal::{SPEC_HEIGHT, SPEC_WIDTH};
use crate::tensor::{Scalar, Tensor};
use crate::vision::{CLIP_FRAMES, CLIP_HEIGHT, CLIP_WIDTH};

pub use audio::AudioNet;
pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use two_stream::TwoStream;
pub use video::VideoNet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Cnn,
    CnnRnn,
    CnnLstm,
    TwoStream,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Cnn => "cnn",
            Variant::CnnRnn => "cnn_rnn",
            Variant::CnnLstm => "cnn_lstm",
            Variant::TwoStream => "two_stream",
        }
    }

    /// Label used in summary tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Variant::Cnn => "CNN",
            Variant::CnnRnn => "CNN+RNN",
            Variant::CnnLstm => "CNN+LSTM",
            Variant::TwoStream => "CNN+RNN & 3DCNN",
        }
    }

    pub fn uses_video(self) -> bool {
        self == Variant::TwoStream
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "cnn" => Ok(Variant::Cnn),
            "cnn_rnn" => Ok(Variant::CnnRnn),
            "cnn_lstm" => Ok(Variant::CnnLstm),
            "two_stream" => Ok(Variant::TwoStream),
            other => Err(Error::Config(format!("unknown variant {other:?}"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// What an audio network's last layer produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputMode {
    /// `K` class scores
    Logits,
    /// `D`-dimensional embedding
    Embedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: Variant,
    pub num_classes: usize,
    pub width_multiplier: usize,
    /// Base channel counts of the audio conv stack (scaled by the multiplier).
    pub conv_channels: [usize; 3],
    pub conv_kernels: [usize; 3],
    pub conv_padding: [usize; 3],
    pub fc_hidden: usize,
    pub rnn_hidden: usize,
    pub embedding_dim: usize,
    pub dropout_fc: f64,
    pub dropout_rnn: f64,
    /// Audio branch of the two-stream network.
    pub audio_backbone: Variant,
    pub video_channels: [usize; 4],
    pub video_fc_hidden: usize,
    /// Spectrogram `(height, width)`.
    pub audio_input: [usize; 2],
    /// Clip `(frames, height, width)`.
    pub video_input: [usize; 3],
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            variant: Variant::CnnRnn,
            num_classes: 4,
            width_multiplier: 1,
            conv_channels: [16, 32, 64],
            conv_kernels: [7, 5, 3],
            conv_padding: [3, 2, 1],
            fc_hidden: 256,
            rnn_hidden: 128,
            embedding_dim: 128,
            dropout_fc: 0.2,
            dropout_rnn: 0.1,
            audio_backbone: Variant::CnnRnn,
            video_channels: [8, 16, 32, 64],
            video_fc_hidden: 256,
            audio_input: [SPEC_HEIGHT, SPEC_WIDTH],
            video_input: [CLIP_FRAMES, CLIP_HEIGHT, CLIP_WIDTH],
        }
    }
}

impl ModelConfig {
    pub fn new(variant: Variant, num_classes: usize) -> Self {
        ModelConfig {
            variant,
            num_classes,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(3..=4).contains(&self.num_classes) {
            return bad(format!("num_classes must be 3 or 4, got {}", self.num_classes));
        }
        if ![1, 2, 4].contains(&self.width_multiplier) {
            return bad(format!(
                "width_multiplier must be 1, 2 or 4, got {}",
                self.width_multiplier
            ));
        }
        if self.audio_backbone == Variant::TwoStream {
            return bad("audio_backbone must be an audio variant".into());
        }
        let sizes = [self.fc_hidden, self.rnn_hidden, self.embedding_dim, self.video_fc_hidden];
        let mut dims = self
            .conv_channels
            .iter()
            .chain(&self.conv_kernels)
            .chain(&self.video_channels)
            .chain(&sizes)
            .chain(&self.audio_input)
            .chain(&self.video_input);
        if dims.any(|&d| d == 0) {
            return bad("all layer sizes must be positive".into());
        }
        for p in [self.dropout_fc, self.dropout_rnn] {
            if !(0.0..1.0).contains(&p) {
                return bad(format!("dropout must be in [0, 1), got {p}"));
            }
        }
        let [h, w] = self.audio_grid();
        if h == 0 || w == 0 {
            return bad(format!("audio input {:?} too small for the conv stack", self.audio_input));
        }
        if self.variant.uses_video() && self.video_grid().contains(&0) {
            return bad(format!("video input {:?} too small for the conv stack", self.video_input));
        }
        Ok(())
    }

    pub fn audio_channels(&self) -> [usize; 3] {
        self.conv_channels.map(|c| c * self.width_multiplier)
    }

    /// The audio network architecture actually built.
    pub fn audio_variant(&self) -> Variant {
        match self.variant {
            Variant::TwoStream => self.audio_backbone,
            v => v,
        }
    }

    /// Spatial size of the audio conv stack output (rows, columns).
    pub fn audio_grid(&self) -> [usize; 2] {
        let [mut h, mut w] = self.audio_input;
        for i in 0..3 {
            let (k, p) = (self.conv_kernels[i], self.conv_padding[i]);
            h = (h + 2 * p + 1).saturating_sub(k) / 2;
            w = (w + 2 * p + 1).saturating_sub(k) / 2;
        }
        [h, w]
    }

    /// `(frames, rows, columns)` after the three 3-D pools.
    pub fn video_grid(&self) -> [usize; 3] {
        self.video_input.map(|d| d / 8)
    }

    pub fn output_dim(&self, mode: OutputMode) -> usize {
        match mode {
            OutputMode::Logits => self.num_classes,
            OutputMode::Embedding => self.embedding_dim,
        }
    }
}

/// One network input: a `[3, H, W]` spectrogram and, for two-stream models,
/// a `[3, T, H, W]` clip.
#[derive(Debug, Clone)]
pub struct Input<T> {
    pub spec: Tensor<T>,
    pub clip: Option<Tensor<T>>,
}

/// Any of the four architectures, built from a [`ModelConfig`].
#[derive(Debug, Clone)]
pub enum Network<T> {
    Audio(AudioNet<T>),
    TwoStream(TwoStream<T>),
}

impl<T: Scalar> Network<T> {
    pub fn new(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        Ok(match cfg.variant {
            Variant::TwoStream => Network::TwoStream(TwoStream::new(cfg, seed)),
            _ => Network::Audio(AudioNet::new(cfg, OutputMode::Logits, seed)),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        match self {
            Network::Audio(a) => a.config(),
            Network::TwoStream(t) => t.config(),
        }
    }

    pub fn forward(&mut self, x: &Input<T>, ctx: &mut Ctx) -> Result<Tensor<T>> {
        match self {
            Network::Audio(a) => a.forward(&x.spec, ctx),
            Network::TwoStream(t) => {
                let clip = x
                    .clip
                    .as_ref()
                    .ok_or_else(|| Error::shape("a video clip", "none"))?;
                t.forward(&x.spec, clip, ctx)
            }
        }
    }

    /// Gradient of the logits from the last `forward`.
    pub fn backward(&mut self, g: &Tensor<T>) {
        match self {
            Network::Audio(a) => a.backward(g),
            Network::TwoStream(t) => t.backward(g),
        }
    }

    /// Evaluation-mode logits for a batch, `[B, K]`.
    pub fn predict(&mut self, batch: &[Input<T>]) -> Result<Tensor<T>> {
        let rows = batch
            .iter()
            .map(|x| self.forward(x, &mut Ctx::eval()))
            .collect::<Result<Vec<_>>>()?;
        Tensor::stack(&rows)
    }
}

impl<T: Scalar> Parameterized<T> for Network<T> {
    fn visit_params(&mut self, prefix: &str, f: &mut ParamVisitor<'_, T>) {
        match self {
            Network::Audio(a) => a.visit_params(prefix, f),
            Network::TwoStream(t) => t.visit_params(prefix, f),
        }
    }
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax<T: Scalar>(scores: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in scores.iter().enumerate() {
        if v > scores[best] {
            best = i;
        }
    }
    best
}
