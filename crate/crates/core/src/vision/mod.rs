//! Video front end: uniform frame sampling over a segment window, actor-half
//! selection and head cropping into fixed-size clips.

mod video;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::npy;

pub use video::{write_emv, EmvReader, FrameSource, MemoryVideo};

pub const CLIP_FRAMES: usize = 20;
pub const CLIP_HEIGHT: usize = 100;
pub const CLIP_WIDTH: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// Which half of a two-actor frame to keep, and the head box inside that half
/// as fractions `(x0, y0, x1, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropRegion {
    pub side: Side,
    pub head_box: [f64; 4],
}

impl CropRegion {
    pub const DEFAULT_HEAD_BOX: [f64; 4] = [0.2, 0.0, 0.8, 0.6];

    pub fn new(side: Side, head_box: [f64; 4]) -> Result<Self> {
        let [x0, y0, x1, y1] = head_box;
        if !head_box.iter().all(|v| (0.0..=1.0).contains(v)) || x0 >= x1 || y0 >= y1 {
            return Err(Error::Crop(format!(
                "head box {head_box:?} must satisfy 0 <= x0 < x1 <= 1 and 0 <= y0 < y1 <= 1"
            )));
        }
        Ok(CropRegion { side, head_box })
    }

    pub fn with_default_box(side: Side) -> Self {
        CropRegion {
            side,
            head_box: Self::DEFAULT_HEAD_BOX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipMeta {
    pub source_id: String,
    pub region: CropRegion,
    pub start_s: f64,
    pub duration_s: f64,
}

/// Exactly 20 frames of 100 (h) x 60 (w) x 3, values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct VideoClip {
    frames: Vec<Image>,
    pub meta: ClipMeta,
}

impl VideoClip {
    pub fn new(frames: Vec<Image>, meta: ClipMeta) -> Result<Self> {
        if frames.len() != CLIP_FRAMES {
            return Err(Error::shape(
                format!("{CLIP_FRAMES} frames"),
                format!("{} frames", frames.len()),
            ));
        }
        for f in &frames {
            if (f.height, f.width, f.channels) != (CLIP_HEIGHT, CLIP_WIDTH, 3) {
                return Err(Error::shape(
                    format!("{CLIP_HEIGHT}x{CLIP_WIDTH}x3 frames"),
                    format!("{}x{}x{}", f.height, f.width, f.channels),
                ));
            }
            if !f.data.iter().all(|v| v.is_finite()) {
                return Err(Error::Precondition("clip has non-finite pixels".into()));
            }
        }
        Ok(VideoClip { frames, meta })
    }

    pub fn frames(&self) -> &[Image] {
        &self.frames
    }

    /// `(frames, height, width, channels)`.
    pub fn shape(&self) -> (usize, usize, usize, usize) {
        let f = &self.frames[0];
        (self.frames.len(), f.height, f.width, f.channels)
    }

    /// Channel-first `(3, frames, height, width)` layout used by the video network.
    pub fn to_channel_first(&self) -> Vec<f32> {
        let plane = CLIP_HEIGHT * CLIP_WIDTH;
        let mut out = vec![0.0; 3 * CLIP_FRAMES * plane];
        for (t, f) in self.frames.iter().enumerate() {
            for (p, px) in f.data.chunks_exact(3).enumerate() {
                for c in 0..3 {
                    out[(c * CLIP_FRAMES + t) * plane + p] = px[c];
                }
            }
        }
        out
    }

    /// Stores the clip as an 8-bit `(20, 100, 60, 3)` npy array.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self
            .frames
            .iter()
            .flat_map(|f| f.data.iter())
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        npy::write_u8(path, &[CLIP_FRAMES, CLIP_HEIGHT, CLIP_WIDTH, 3], &bytes)
    }

    pub fn load(path: &Path, meta: ClipMeta) -> Result<Self> {
        let arr = npy::read(path)?;
        if arr.shape != [CLIP_FRAMES, CLIP_HEIGHT, CLIP_WIDTH, 3] {
            return Err(Error::shape(
                format!("[{CLIP_FRAMES}, {CLIP_HEIGHT}, {CLIP_WIDTH}, 3]"),
                format!("{:?} in {}", arr.shape, path.display()),
            ));
        }
        let data = arr.into_f32();
        let frame_len = CLIP_HEIGHT * CLIP_WIDTH * 3;
        let frames = data
            .chunks_exact(frame_len)
            .map(|c| Image::from_data(CLIP_HEIGHT, CLIP_WIDTH, 3, c.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        VideoClip::new(frames, meta)
    }
}

/// Sampling instants `start + (i + 0.5) * duration / count`.
pub fn frame_timestamps(start_s: f64, duration_s: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| start_s + (i as f64 + 0.5) * duration_s / count as f64)
        .collect()
}

/// Nearest-frame sampling over `[start_s, start_s + duration_s]`. Instants past
/// the end of the video repeat the last frame.
pub fn extract_frames(
    video: &mut dyn FrameSource,
    start_s: f64,
    duration_s: f64,
    count: usize,
) -> Result<Vec<Image>> {
    if count == 0 || !(duration_s > 0.0) {
        return Err(Error::Precondition("need count >= 1 and a positive duration".into()));
    }
    let n = video.frame_count();
    if n == 0 {
        return Err(Error::Decode {
            what: "video".into(),
            reason: "no frames".into(),
        });
    }
    if !(start_s >= 0.0) || start_s >= video.duration_s() {
        return Err(Error::Range(format!(
            "start {start_s} s outside video of {:.3} s",
            video.duration_s()
        )));
    }
    let fps = video.fps();
    let mut frames = Vec::with_capacity(count);
    let mut cached: Option<(usize, Image)> = None;
    for t in frame_timestamps(start_s, duration_s, count) {
        let idx = ((t * fps).round() as usize).min(n - 1);
        let img = match &cached {
            Some((i, img)) if *i == idx => img.clone(),
            _ => video.frame(idx)?,
        };
        cached = Some((idx, img.clone()));
        frames.push(img);
    }
    Ok(frames)
}

/// Keeps one actor half, crops the head box and resizes to 100 x 60.
pub fn crop_actor(frame: &Image, region: &CropRegion) -> Result<Image> {
    if frame.width < 2 {
        return Err(Error::Crop(format!("frame width {} < 2", frame.width)));
    }
    let half = frame.width / 2;
    let (x_base, half_w) = match region.side {
        Side::Left => (0, half),
        Side::Right => (half, frame.width - half),
    };
    let [bx0, by0, bx1, by1] = region.head_box;
    let x0 = (bx0 * half_w as f64).round() as usize;
    let x1 = ((bx1 * half_w as f64).round() as usize).min(half_w);
    let y0 = (by0 * frame.height as f64).round() as usize;
    let y1 = ((by1 * frame.height as f64).round() as usize).min(frame.height);
    if x1 <= x0 || y1 <= y0 {
        return Err(Error::Crop(format!(
            "head box {:?} has zero area on a {}x{} half",
            region.head_box, frame.height, half_w
        )));
    }
    let (h, w) = (y1 - y0, x1 - x0);
    let mut sub = Image::new(h, w, frame.channels);
    for y in 0..h {
        let src = ((y0 + y) * frame.width + x_base + x0) * frame.channels;
        let dst = y * w * frame.channels;
        sub.data[dst..dst + w * frame.channels]
            .copy_from_slice(&frame.data[src..src + w * frame.channels]);
    }
    let mut out = sub.resize(CLIP_HEIGHT, CLIP_WIDTH);
    for v in &mut out.data {
        *v = v.clamp(0.0, 1.0);
    }
    Ok(out)
}

pub fn build_clip(
    video: &mut dyn FrameSource,
    source_id: &str,
    start_s: f64,
    duration_s: f64,
    region: &CropRegion,
) -> Result<VideoClip> {
    let frames = extract_frames(video, start_s, duration_s, CLIP_FRAMES)?
        .iter()
        .map(|f| crop_actor(f, region))
        .collect::<Result<Vec<_>>>()?;
    VideoClip::new(
        frames,
        ClipMeta {
            source_id: source_id.to_string(),
            region: *region,
            start_s,
            duration_s,
        },
    )
}
