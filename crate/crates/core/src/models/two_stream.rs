use super::{AudioNet, ModelConfig, OutputMode, VideoNet};
use crate::error::{Error, Result};
use crate::nn::{join, Ctx, Linear, ParamVisitor, Parameterized};
use crate::rng::{stream, Purpose};
use crate::tensor::{Scalar, Tensor};

const VIDEO_STREAM_OFFSET: u64 = 100;
const OUTPUT_STREAM: u64 = 200;

/// Audio and video embeddings concatenated `(audio, video)` and mapped to
/// class scores by one linear layer.
#[derive(Debug, Clone)]
pub struct TwoStream<T> {
    cfg: ModelConfig,
    pub audio: AudioNet<T>,
    pub video: VideoNet<T>,
    pub out: Linear<T>,
}

impl<T: Scalar> TwoStream<T> {
    pub fn new(cfg: &ModelConfig, seed: u64) -> Self {
        let d = cfg.embedding_dim;
        TwoStream {
            cfg: cfg.clone(),
            audio: AudioNet::with_stream_offset(cfg, OutputMode::Embedding, seed, 0),
            video: VideoNet::with_stream_offset(cfg, seed, VIDEO_STREAM_OFFSET),
            out: Linear::new(
                2 * d,
                cfg.num_classes,
                &mut stream(seed, Purpose::Init, OUTPUT_STREAM),
            ),
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    /// `(f_a, f_v)` for one example.
    pub fn embed(
        &mut self,
        spec: &Tensor<T>,
        clip: &Tensor<T>,
        ctx: &mut Ctx,
    ) -> Result<(Tensor<T>, Tensor<T>)> {
        Ok((self.audio.forward(spec, ctx)?, self.video.forward(clip, ctx)?))
    }

    pub fn backward_embeddings(&mut self, g_audio: &Tensor<T>, g_video: &Tensor<T>) {
        self.audio.backward(g_audio);
        self.video.backward(g_video);
    }

    pub fn forward(&mut self, spec: &Tensor<T>, clip: &Tensor<T>, ctx: &mut Ctx) -> Result<Tensor<T>> {
        let (fa, fv) = self.embed(spec, clip, ctx)?;
        let mut joint = fa.into_data();
        joint.extend_from_slice(fv.data());
        let n = joint.len();
        self.out.forward(&Tensor::from_vec(&[n], joint)?)
    }

    pub fn backward(&mut self, g: &Tensor<T>) {
        let d = self.cfg.embedding_dim;
        let gj = self.out.backward(g).into_data();
        let ga = Tensor::from_vec(&[d], gj[..d].to_vec()).expect("audio half");
        let gv = Tensor::from_vec(&[d], gj[d..].to_vec()).expect("video half");
        self.backward_embeddings(&ga, &gv);
    }

    /// Evaluation-mode logits for matched `[B, 3, H, W]` / `[B, 3, T, H, W]` batches.
    pub fn forward_batch(&mut self, specs: &Tensor<T>, clips: &Tensor<T>) -> Result<Tensor<T>> {
        let (bs, bc) = (specs.shape()[0], clips.shape()[0]);
        if bs != bc {
            return Err(Error::shape(
                format!("{bs} clips to match the spectrogram batch"),
                bc,
            ));
        }
        let rows = (0..bs)
            .map(|b| self.forward(&specs.item(b), &clips.item(b), &mut Ctx::eval()))
            .collect::<Result<Vec<_>>>()?;
        Tensor::stack(&rows)
    }
}

impl<T: Scalar> Parameterized<T> for TwoStream<T> {
    fn visit_params(&mut self, prefix: &str, f: &mut ParamVisitor<'_, T>) {
        self.audio.visit_params(&join(prefix, "audio"), f);
        self.video.visit_params(&join(prefix, "video"), f);
        self.out.visit_params(&join(prefix, "out"), f);
    }
}
