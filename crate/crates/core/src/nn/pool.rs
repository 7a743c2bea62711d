use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Non-overlapping max pooling over `[C, D, H, W]` with window = stride.
/// Trailing rows/columns that do not fill a window are dropped.
#[derive(Debug, Clone)]
pub struct MaxPool {
    pub window: [usize; 3],
    argmax: Vec<usize>,
    in_shape: Vec<usize>,
}

impl MaxPool {
    pub fn new(window: [usize; 3]) -> Self {
        MaxPool {
            window,
            argmax: Vec::new(),
            in_shape: Vec::new(),
        }
    }

    pub fn pool2d() -> Self {
        Self::new([1, 2, 2])
    }

    pub fn pool3d() -> Self {
        Self::new([2, 2, 2])
    }

    pub fn output_dims(&self, [d, h, w]: [usize; 3]) -> [usize; 3] {
        [d / self.window[0], h / self.window[1], w / self.window[2]]
    }

    pub fn forward<T: Scalar>(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let s = x.shape();
        if s.len() != 4 {
            return Err(Error::shape("[C, D, H, W]", format!("{s:?}")));
        }
        let (c, d, h, w) = (s[0], s[1], s[2], s[3]);
        let [od, oh, ow] = self.output_dims([d, h, w]);
        if od == 0 || oh == 0 || ow == 0 {
            return Err(Error::shape("input at least window-sized", format!("{s:?}")));
        }
        let [wd, wh, ww] = self.window;
        let xd = x.data();
        let mut out = Vec::with_capacity(c * od * oh * ow);
        self.argmax.clear();
        for ch in 0..c {
            for z in 0..od {
                for y in 0..oh {
                    for xo in 0..ow {
                        let mut best = usize::MAX;
                        let mut best_v = T::neg_infinity();
                        for a in 0..wd {
                            for b in 0..wh {
                                let row = ((ch * d + z * wd + a) * h + y * wh + b) * w + xo * ww;
                                for e in 0..ww {
                                    let v = xd[row + e];
                                    if best == usize::MAX || v > best_v {
                                        best = row + e;
                                        best_v = v;
                                    }
                                }
                            }
                        }
                        out.push(best_v);
                        self.argmax.push(best);
                    }
                }
            }
        }
        self.in_shape = s.to_vec();
        Tensor::from_vec(&[c, od, oh, ow], out)
    }

    pub fn backward<T: Scalar>(&self, g: &Tensor<T>) -> Tensor<T> {
        let mut dx = Tensor::zeros(&self.in_shape);
        let d = dx.data_mut();
        for (&i, &v) in self.argmax.iter().zip(g.data()) {
            d[i] += v;
        }
        dx
    }
}
