//! Interleaved (HWC) float images and the resampling primitives shared by the
//! spectrogram, augmentation and video-crop code.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize) -> Self {
        Image {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn from_data(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::shape(
                format!("{height}x{width}x{channels}"),
                format!("{} values", data.len()),
            ));
        }
        Ok(Image {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Self {
        Image {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f32) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Bilinear sample at continuous pixel-center coordinates, clamped to the border.
    pub fn sample(&self, y: f64, x: f64, c: usize) -> f32 {
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let (y0, x0) = (y.floor() as usize, x.floor() as usize);
        let (y1, x1) = ((y0 + 1).min(self.height - 1), (x0 + 1).min(self.width - 1));
        let (fy, fx) = ((y - y0 as f64) as f32, (x - x0 as f64) as f32);
        let top = self.at(y0, x0, c) * (1.0 - fx) + self.at(y0, x1, c) * fx;
        let bottom = self.at(y1, x0, c) * (1.0 - fx) + self.at(y1, x1, c) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Resamples the source window `[top, bottom) x [left, right)` (in pixel-edge
    /// coordinates) onto an `out_h x out_w` grid by bilinear interpolation.
    pub fn crop_resize(
        &self,
        (top, left, bottom, right): (f64, f64, f64, f64),
        out_h: usize,
        out_w: usize,
    ) -> Image {
        let sy = (bottom - top) / out_h as f64;
        let sx = (right - left) / out_w as f64;
        let mut out = Image::new(out_h, out_w, self.channels);
        for oy in 0..out_h {
            let y = top + (oy as f64 + 0.5) * sy - 0.5;
            for ox in 0..out_w {
                let x = left + (ox as f64 + 0.5) * sx - 0.5;
                for c in 0..self.channels {
                    out.set(oy, ox, c, self.sample(y, x, c));
                }
            }
        }
        out
    }

    pub fn resize(&self, out_h: usize, out_w: usize) -> Image {
        self.crop_resize(
            (0.0, 0.0, self.height as f64, self.width as f64),
            out_h,
            out_w,
        )
    }

    /// Rotates by `degrees` counter-clockwise (as displayed, row 0 on top) about
    /// the image center. Pixels that map outside the source take `fill`.
    pub fn rotate(&self, degrees: f64, fill: f32) -> Image {
        let (s, c) = degrees.to_radians().sin_cos();
        let cy = (self.height as f64 - 1.0) / 2.0;
        let cx = (self.width as f64 - 1.0) / 2.0;
        let (maxy, maxx) = ((self.height - 1) as f64, (self.width - 1) as f64);
        let mut out = Image::filled(self.height, self.width, self.channels, fill);
        for oy in 0..self.height {
            let dy = oy as f64 - cy;
            for ox in 0..self.width {
                let dx = ox as f64 - cx;
                // inverse map; y points down so a visual CCW turn is clockwise in (x, y)
                let x = c * dx - s * dy + cx;
                let y = s * dx + c * dy + cy;
                if (-0.5..=maxy + 0.5).contains(&y) && (-0.5..=maxx + 0.5).contains(&x) {
                    for ch in 0..self.channels {
                        out.set(oy, ox, ch, self.sample(y, x, ch));
                    }
                }
            }
        }
        out
    }
}
