//! Raw-frame video container (`.emv`).
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   8 bytes  "EMVIDEO1"
//! width   u32
//! height  u32
//! fps     f64
//! frames  u32
//! then `frames` x (height x width x 3) RGB bytes, row-major
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::imaging::Image;

const MAGIC: &[u8; 8] = b"EMVIDEO1";
const HEADER_LEN: u64 = 8 + 4 + 4 + 8 + 4;

/// Anything that yields RGB frames at a fixed rate.
pub trait FrameSource {
    fn fps(&self) -> f64;
    fn frame_count(&self) -> usize;
    /// Frame `index` as an HWC image with values in [0, 1].
    fn frame(&mut self, index: usize) -> Result<Image>;

    fn duration_s(&self) -> f64 {
        self.frame_count() as f64 / self.fps()
    }
}

/// Frames held in memory.
#[derive(Debug, Clone)]
pub struct MemoryVideo {
    pub fps: f64,
    pub frames: Vec<Image>,
}

impl FrameSource for MemoryVideo {
    fn fps(&self) -> f64 {
        self.fps
    }

    fn frame_count(&self) -> usize {
        self.frames.len()
    }

    fn frame(&mut self, index: usize) -> Result<Image> {
        self.frames
            .get(index)
            .cloned()
            .ok_or_else(|| Error::Range(format!("frame {index} of {}", self.frames.len())))
    }
}

/// Reads frames on demand from an `.emv` file.
pub struct EmvReader {
    path: PathBuf,
    reader: BufReader<File>,
    width: usize,
    height: usize,
    fps: f64,
    count: usize,
}

impl EmvReader {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let file_len = file.metadata().map_err(|e| Error::io(path, e))?.len();
        let mut reader = BufReader::new(file);
        let bad = |reason: &str| Error::Decode {
            what: path.display().to_string(),
            reason: reason.to_string(),
        };
        let mut head = [0u8; HEADER_LEN as usize];
        reader.read_exact(&mut head).map_err(|_| bad("truncated header"))?;
        if &head[..8] != MAGIC {
            return Err(bad("not an EMVIDEO1 file"));
        }
        let width = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
        let height = u32::from_le_bytes(head[12..16].try_into().unwrap()) as usize;
        let fps = f64::from_le_bytes(head[16..24].try_into().unwrap());
        let count = u32::from_le_bytes(head[24..28].try_into().unwrap()) as usize;
        if width == 0 || height == 0 || !(fps.is_finite() && fps > 0.0) {
            return Err(bad("invalid dimensions or frame rate"));
        }
        let need = HEADER_LEN + (count * width * height * 3) as u64;
        if file_len < need {
            return Err(bad("truncated frame data"));
        }
        Ok(EmvReader {
            path: path.to_path_buf(),
            reader,
            width,
            height,
            fps,
            count,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }
}

impl FrameSource for EmvReader {
    fn fps(&self) -> f64 {
        self.fps
    }

    fn frame_count(&self) -> usize {
        self.count
    }

    fn frame(&mut self, index: usize) -> Result<Image> {
        if index >= self.count {
            return Err(Error::Range(format!("frame {index} of {}", self.count)));
        }
        let size = self.width * self.height * 3;
        let offset = HEADER_LEN + (index * size) as u64;
        let mut buf = vec![0u8; size];
        self.reader
            .seek(SeekFrom::Start(offset))
            .and_then(|_| self.reader.read_exact(&mut buf))
            .map_err(|e| Error::io(&self.path, e))?;
        Image::from_data(
            self.height,
            self.width,
            3,
            buf.into_iter().map(|b| b as f32 / 255.0).collect(),
        )
    }
}

/// Writes frames (values in [0, 1], rounded to 8 bits) as an `.emv` file.
pub fn write_emv(path: &Path, fps: f64, frames: &[Image]) -> Result<()> {
    let first = frames
        .first()
        .ok_or_else(|| Error::EmptyInput("no frames to write".into()))?;
    if frames
        .iter()
        .any(|f| (f.height, f.width, f.channels) != (first.height, first.width, 3))
    {
        return Err(Error::shape("equal RGB frames", "mixed frame shapes"));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&(first.width as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&(first.height as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&fps.to_le_bytes()).map_err(io)?;
    w.write_all(&(frames.len() as u32).to_le_bytes()).map_err(io)?;
    for f in frames {
        let bytes: Vec<u8> = f
            .data
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        w.write_all(&bytes).map_err(io)?;
    }
    w.flush().map_err(io)
}
