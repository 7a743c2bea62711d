//! Minimal raster charts encoded as PNG: axes, gridlines and polylines, no text.

use crate::error::{Error, Result};

const WIDTH: usize = 640;
const HEIGHT: usize = 400;
const MARGIN: usize = 40;
const GRID: [u8; 3] = [225, 225, 225];
const AXIS: [u8; 3] = [60, 60, 60];

pub struct Series<'a> {
    pub points: &'a [(f64, f64)],
    pub color: [u8; 3],
}

impl<'a> Series<'a> {
    pub fn new(points: &'a [(f64, f64)], color: [u8; 3]) -> Self {
        Series { points, color }
    }
}

struct Canvas {
    w: usize,
    h: usize,
    rgb: Vec<u8>,
}

impl Canvas {
    fn new(w: usize, h: usize) -> Self {
        Canvas {
            w,
            h,
            rgb: vec![255; w * h * 3],
        }
    }

    fn put(&mut self, x: i64, y: i64, c: [u8; 3]) {
        if x >= 0 && y >= 0 && (x as usize) < self.w && (y as usize) < self.h {
            let i = (y as usize * self.w + x as usize) * 3;
            self.rgb[i..i + 3].copy_from_slice(&c);
        }
    }

    /// Bresenham segment.
    fn line(&mut self, (mut x0, mut y0): (i64, i64), (x1, y1): (i64, i64), c: [u8; 3]) {
        let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
        let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
        let mut err = dx + dy;
        loop {
            self.put(x0, y0, c);
            if x0 == x1 && y0 == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x0 += sx;
            }
            if e2 <= dx {
                err += dx;
                y0 += sy;
            }
        }
    }

    fn fill(&mut self, x0: usize, y0: usize, x1: usize, y1: usize, c: [u8; 3]) {
        for y in y0..y1 {
            for x in x0..x1 {
                self.put(x as i64, y as i64, c);
            }
        }
    }

    fn encode(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        let mut enc = png::Encoder::new(&mut out, self.w as u32, self.h as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let err = |e: png::EncodingError| Error::Decode {
            what: "png".into(),
            reason: e.to_string(),
        };
        let mut writer = enc.write_header().map_err(err)?;
        writer.write_image_data(&self.rgb).map_err(err)?;
        writer.finish().map_err(err)?;
        Ok(out)
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > hi {
        return None;
    }
    Some(if hi - lo < 1e-12 { (lo - 0.5, hi + 0.5) } else { (lo, hi) })
}

/// Line chart of all series over shared axes; `y_range` fixes the y axis.
pub fn render_line_plot(series: &[Series], y_range: Option<(f64, f64)>) -> Result<Vec<u8>> {
    let all = || series.iter().flat_map(|s| s.points.iter());
    let (x_lo, x_hi) = bounds(all().map(|p| p.0))
        .ok_or_else(|| Error::EmptyInput("no points to plot".into()))?;
    let (y_lo, y_hi) = match y_range {
        Some(r) => r,
        None => bounds(all().map(|p| p.1)).expect("x bounds imply y values"),
    };
    let mut c = Canvas::new(WIDTH, HEIGHT);
    let (pw, ph) = ((WIDTH - 2 * MARGIN) as f64, (HEIGHT - 2 * MARGIN) as f64);
    let to_px = |(x, y): (f64, f64)| -> (i64, i64) {
        let px = MARGIN as f64 + (x - x_lo) / (x_hi - x_lo) * pw;
        let py = (HEIGHT - MARGIN) as f64 - (y - y_lo) / (y_hi - y_lo) * ph;
        (px.round() as i64, py.round() as i64)
    };
    for i in 0..=4 {
        let y = (MARGIN as f64 + ph * i as f64 / 4.0) as i64;
        c.line((MARGIN as i64, y), ((WIDTH - MARGIN) as i64, y), GRID);
    }
    let (x0, y0) = (MARGIN as i64, (HEIGHT - MARGIN) as i64);
    c.line((x0, y0), ((WIDTH - MARGIN) as i64, y0), AXIS);
    c.line((x0, y0), (x0, MARGIN as i64), AXIS);
    for s in series {
        let pts: Vec<(i64, i64)> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&p| to_px(p))
            .collect();
        if let [only] = pts.as_slice() {
            c.fill(only.0 as usize - 1, only.1 as usize - 1, only.0 as usize + 2, only.1 as usize + 2, s.color);
        }
        for w in pts.windows(2) {
            c.line(w[0], w[1], s.color);
        }
    }
    c.encode()
}

/// Square cells shaded white (0) to dark blue (row maximum), one row per true class.
pub fn render_heatmap(counts: &[Vec<u64>]) -> Result<Vec<u8>> {
    let k = counts.len();
    if k == 0 {
        return Err(Error::EmptyInput("empty confusion matrix".into()));
    }
    const CELL: usize = 60;
    let mut c = Canvas::new(k * CELL + 2, k * CELL + 2);
    for (i, row) in counts.iter().enumerate() {
        let max = row.iter().copied().max().unwrap_or(0).max(1) as f64;
        for (j, &v) in row.iter().enumerate() {
            let t = v as f64 / max;
            let shade = |lo: f64| (255.0 - t * (255.0 - lo)).round() as u8;
            let color = [shade(20.0), shade(60.0), shade(140.0)];
            c.fill(j * CELL + 1, i * CELL + 1, (j + 1) * CELL + 1, (i + 1) * CELL + 1, color);
        }
    }
    for i in 0..=k {
        let p = (i * CELL) as i64 + 1;
        let end = (k * CELL) as i64 + 1;
        c.line((p, 1), (p, end), AXIS);
        c.line((1, p), (end, p), AXIS);
    }
    c.encode()
}
