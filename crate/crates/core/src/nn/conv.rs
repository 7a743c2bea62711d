use super::{join, Param, ParamVisitor, Parameterized};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{gemm, Mat, Scalar, Tensor};

/// Stride-1 zero-padded convolution over `[C, D, H, W]` volumes.
/// A 2-D convolution is the `kernel[0] == 1, padding[0] == 0` case.
#[derive(Debug, Clone)]
pub struct Conv<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: [usize; 3],
    pub padding: [usize; 3],
    /// `[out, in * kd * kh * kw]`
    pub weight: Param<T>,
    pub bias: Param<T>,
    /// First layers skip the input gradient.
    pub input_grad: bool,
    cols: Vec<T>,
    in_dims: [usize; 3],
    out_dims: [usize; 3],
}

impl<T: Scalar> Conv<T> {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: [usize; 3],
        padding: [usize; 3],
        rng: &mut Rng,
    ) -> Self {
        let fan_in = in_channels * kernel.iter().product::<usize>();
        Conv {
            in_channels,
            out_channels,
            kernel,
            padding,
            weight: Param::he_uniform(&[out_channels, fan_in], fan_in, rng),
            bias: Param::zeros(&[out_channels]),
            input_grad: true,
            cols: Vec::new(),
            in_dims: [0; 3],
            out_dims: [0; 3],
        }
    }

    pub fn conv2d(in_ch: usize, out_ch: usize, k: usize, pad: usize, rng: &mut Rng) -> Self {
        Self::new(in_ch, out_ch, [1, k, k], [0, pad, pad], rng)
    }

    pub fn conv3d(in_ch: usize, out_ch: usize, k: usize, pad: usize, rng: &mut Rng) -> Self {
        Self::new(in_ch, out_ch, [k, k, k], [pad, pad, pad], rng)
    }

    pub fn output_dims(&self, in_dims: [usize; 3]) -> Option<[usize; 3]> {
        let mut out = [0; 3];
        for a in 0..3 {
            let padded = in_dims[a] + 2 * self.padding[a];
            if padded < self.kernel[a] {
                return None;
            }
            out[a] = padded - self.kernel[a] + 1;
        }
        Some(out)
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel.iter().product::<usize>()
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let s = x.shape();
        if s.len() != 4 || s[0] != self.in_channels {
            return Err(Error::shape(
                format!("[{}, D, H, W]", self.in_channels),
                format!("{s:?}"),
            ));
        }
        let in_dims = [s[1], s[2], s[3]];
        let out_dims = self
            .output_dims(in_dims)
            .ok_or_else(|| Error::shape("input at least kernel-sized", format!("{s:?}")))?;
        let n: usize = out_dims.iter().product();
        let rows = self.patch_len();
        self.cols.resize(rows * n, T::zero());
        im2col(
            x.data(),
            self.in_channels,
            in_dims,
            self.kernel,
            self.padding,
            out_dims,
            &mut self.cols,
        );
        let mut out = vec![T::zero(); self.out_channels * n];
        for (o, chunk) in out.chunks_mut(n).enumerate() {
            chunk.fill(self.bias.value.data()[o]);
        }
        gemm(
            T::one(),
            Mat::new(self.weight.value.data(), self.out_channels, rows),
            Mat::new(&self.cols, rows, n),
            T::one(),
            &mut out,
        );
        self.in_dims = in_dims;
        self.out_dims = out_dims;
        Tensor::from_vec(&[self.out_channels, out_dims[0], out_dims[1], out_dims[2]], out)
    }

    /// Accumulates weight/bias gradients; returns the input gradient unless
    /// `input_grad` is off.
    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Option<Tensor<T>> {
        let n: usize = self.out_dims.iter().product();
        let rows = self.patch_len();
        let g = grad_out.data();
        debug_assert_eq!(g.len(), self.out_channels * n);
        gemm(
            T::one(),
            Mat::new(g, self.out_channels, n),
            Mat::t(&self.cols, rows, n),
            T::one(),
            self.weight.grad.data_mut(),
        );
        for (o, chunk) in g.chunks(n).enumerate() {
            let s: T = chunk.iter().copied().sum();
            self.bias.grad.data_mut()[o] += s;
        }
        if !self.input_grad {
            return None;
        }
        let mut dcols = vec![T::zero(); rows * n];
        gemm(
            T::one(),
            Mat::t(self.weight.value.data(), self.out_channels, rows),
            Mat::new(g, self.out_channels, n),
            T::zero(),
            &mut dcols,
        );
        let [d, h, w] = self.in_dims;
        let mut dx = vec![T::zero(); self.in_channels * d * h * w];
        col2im(
            &dcols,
            self.in_channels,
            self.in_dims,
            self.kernel,
            self.padding,
            self.out_dims,
            &mut dx,
        );
        Some(Tensor::from_vec(&[self.in_channels, d, h, w], dx).expect("shape matches"))
    }
}

impl<T: Scalar> Parameterized<T> for Conv<T> {
    fn visit_params(&mut self, prefix: &str, f: &mut ParamVisitor<'_, T>) {
        f(&join(prefix, "weight"), &mut self.weight);
        f(&join(prefix, "bias"), &mut self.bias);
    }
}

/// For output position `o` along one axis and kernel tap `k`, the input index
/// is `o + k - pad`; returns the range of `o` for which that index is valid.
#[inline]
fn valid_range(k: usize, pad: usize, in_len: usize, out_len: usize) -> (usize, usize) {
    let lo = pad.saturating_sub(k);
    let hi = (in_len + pad).saturating_sub(k).min(out_len);
    (lo.min(hi), hi)
}

fn im2col<T: Scalar>(
    x: &[T],
    channels: usize,
    [d, h, w]: [usize; 3],
    [kd, kh, kw]: [usize; 3],
    [pd, ph, pw]: [usize; 3],
    [od, oh, ow]: [usize; 3],
    cols: &mut [T],
) {
    let n = od * oh * ow;
    let mut row = 0;
    for c in 0..channels {
        let xc = &x[c * d * h * w..(c + 1) * d * h * w];
        for kz in 0..kd {
            for ky in 0..kh {
                for kx in 0..kw {
                    let dst_row = &mut cols[row * n..(row + 1) * n];
                    row += 1;
                    let (x_lo, x_hi) = valid_range(kx, pw, w, ow);
                    for oz in 0..od {
                        let iz = (oz + kz) as isize - pd as isize;
                        for oy in 0..oh {
                            let iy = (oy + ky) as isize - ph as isize;
                            let dst = &mut dst_row[(oz * oh + oy) * ow..(oz * oh + oy + 1) * ow];
                            if iz < 0 || iz >= d as isize || iy < 0 || iy >= h as isize {
                                dst.fill(T::zero());
                                continue;
                            }
                            let src_row = (iz as usize * h + iy as usize) * w;
                            dst[..x_lo].fill(T::zero());
                            dst[x_hi..].fill(T::zero());
                            if x_hi > x_lo {
                                let s0 = src_row + x_lo + kx - pw;
                                dst[x_lo..x_hi].copy_from_slice(&xc[s0..s0 + (x_hi - x_lo)]);
                            }
                        }
                    }
                }
            }
        }
    }
}

fn col2im<T: Scalar>(
    cols: &[T],
    channels: usize,
    [d, h, w]: [usize; 3],
    [kd, kh, kw]: [usize; 3],
    [pd, ph, pw]: [usize; 3],
    [od, oh, ow]: [usize; 3],
    dx: &mut [T],
) {
    let n = od * oh * ow;
    let mut row = 0;
    for c in 0..channels {
        let xc = &mut dx[c * d * h * w..(c + 1) * d * h * w];
        for kz in 0..kd {
            for ky in 0..kh {
                for kx in 0..kw {
                    let src_row = &cols[row * n..(row + 1) * n];
                    row += 1;
                    let (x_lo, x_hi) = valid_range(kx, pw, w, ow);
                    if x_hi <= x_lo {
                        continue;
                    }
                    for oz in 0..od {
                        let iz = (oz + kz) as isize - pd as isize;
                        if iz < 0 || iz >= d as isize {
                            continue;
                        }
                        for oy in 0..oh {
                            let iy = (oy + ky) as isize - ph as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let src = &src_row[(oz * oh + oy) * ow + x_lo..(oz * oh + oy) * ow + x_hi];
                            let d0 = (iz as usize * h + iy as usize) * w + x_lo + kx - pw;
                            for (a, &b) in xc[d0..d0 + src.len()].iter_mut().zip(src) {
                                *a += b;
                            }
                        }
                    }
                }
            }
        }
    }
}
