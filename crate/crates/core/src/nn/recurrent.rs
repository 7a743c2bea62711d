use super::{join, Param, ParamVisitor, Parameterized};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{gemm, Mat, Scalar, Tensor};

/// Collapses the frequency (row) axis of a `[C, 1, H, W]` map by averaging,
/// giving a `[W, C]` sequence: one `C`-vector per time column.
#[derive(Debug, Clone, Default)]
pub struct FreqMean {
    in_shape: Vec<usize>,
}

impl FreqMean {
    pub fn forward<T: Scalar>(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let s = x.shape();
        if s.len() != 4 || s[1] != 1 {
            return Err(Error::shape("[C, 1, H, W]", format!("{s:?}")));
        }
        let (c, h, w) = (s[0], s[2], s[3]);
        let inv = T::of(1.0 / h as f64);
        let mut seq = vec![T::zero(); w * c];
        for ch in 0..c {
            for row in x.data()[ch * h * w..(ch + 1) * h * w].chunks(w) {
                for (t, &v) in row.iter().enumerate() {
                    seq[t * c + ch] += v;
                }
            }
        }
        for v in &mut seq {
            *v = *v * inv;
        }
        self.in_shape = s.to_vec();
        Tensor::from_vec(&[w, c], seq)
    }

    pub fn backward<T: Scalar>(&self, g: &Tensor<T>) -> Tensor<T> {
        let (c, h, w) = (self.in_shape[0], self.in_shape[2], self.in_shape[3]);
        let inv = T::of(1.0 / h as f64);
        let mut dx = Tensor::zeros(&self.in_shape);
        let d = dx.data_mut();
        for ch in 0..c {
            for row in d[ch * h * w..(ch + 1) * h * w].chunks_mut(w) {
                for (t, v) in row.iter_mut().enumerate() {
                    *v = g.data()[t * c + ch] * inv;
                }
            }
        }
        dx
    }
}

fn check_seq<T: Scalar>(x: &Tensor<T>, inputs: usize) -> Result<usize> {
    let s = x.shape();
    if s.len() != 2 || s[1] != inputs || s[0] == 0 {
        return Err(Error::shape(format!("[T>0, {inputs}]"), format!("{s:?}")));
    }
    Ok(s[0])
}

/// `out += A (m x k) * B (k x n)` on row-major slices.
fn mm_acc<T: Scalar>(a: Mat<'_, T>, b: Mat<'_, T>, out: &mut [T]) {
    gemm(T::one(), a, b, T::one(), out);
}

/// Elman recurrence `h_t = tanh(W_ih x_t + W_hh h_{t-1} + b)`, `h_0 = 0`.
/// `forward` returns the final hidden state.
#[derive(Debug, Clone)]
pub struct RnnCell<T> {
    pub inputs: usize,
    pub hidden: usize,
    pub w_ih: Param<T>,
    pub w_hh: Param<T>,
    pub bias: Param<T>,
    xs: Vec<T>,
    /// `(T + 1) x H`, row 0 is the zero initial state
    hs: Vec<T>,
}

impl<T: Scalar> RnnCell<T> {
    pub fn new(inputs: usize, hidden: usize, rng: &mut Rng) -> Self {
        RnnCell {
            inputs,
            hidden,
            w_ih: Param::fan_in_uniform(&[hidden, inputs], hidden, rng),
            w_hh: Param::fan_in_uniform(&[hidden, hidden], hidden, rng),
            bias: Param::fan_in_uniform(&[hidden], hidden, rng),
            xs: Vec::new(),
            hs: Vec::new(),
        }
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let steps = check_seq(x, self.inputs)?;
        let hsz = self.hidden;
        self.xs = x.data().to_vec();
        // pre-activations from the inputs for every step at once
        let mut pre = Vec::with_capacity(steps * hsz);
        for _ in 0..steps {
            pre.extend_from_slice(self.bias.value.data());
        }
        mm_acc(
            Mat::new(&self.xs, steps, self.inputs),
            Mat::t(self.w_ih.value.data(), hsz, self.inputs),
            &mut pre,
        );
        self.hs = vec![T::zero(); (steps + 1) * hsz];
        for t in 0..steps {
            let (prev, next) = self.hs.split_at_mut((t + 1) * hsz);
            let a = &mut next[..hsz];
            a.copy_from_slice(&pre[t * hsz..(t + 1) * hsz]);
            mm_acc(
                Mat::new(self.w_hh.value.data(), hsz, hsz),
                Mat::new(&prev[t * hsz..], hsz, 1),
                a,
            );
            for v in a.iter_mut() {
                *v = v.tanh();
            }
        }
        Tensor::from_vec(&[hsz], self.hs[steps * hsz..].to_vec())
    }

    /// Takes the gradient of the final hidden state; returns the `[T, I]`
    /// input-sequence gradient.
    pub fn backward(&mut self, g_last: &Tensor<T>) -> Tensor<T> {
        let hsz = self.hidden;
        let steps = self.hs.len() / hsz - 1;
        let mut da = vec![T::zero(); steps * hsz];
        let mut dh = g_last.data().to_vec();
        for t in (0..steps).rev() {
            let h = &self.hs[(t + 1) * hsz..(t + 2) * hsz];
            let dat = &mut da[t * hsz..(t + 1) * hsz];
            for ((d, &g), &hv) in dat.iter_mut().zip(&dh).zip(h) {
                *d = g * (T::one() - hv * hv);
            }
            dh.fill(T::zero());
            mm_acc(
                Mat::t(self.w_hh.value.data(), hsz, hsz),
                Mat::new(dat, hsz, 1),
                &mut dh,
            );
        }
        mm_acc(
            Mat::t(&da, steps, hsz),
            Mat::new(&self.xs, steps, self.inputs),
            self.w_ih.grad.data_mut(),
        );
        mm_acc(
            Mat::t(&da, steps, hsz),
            Mat::new(&self.hs[..steps * hsz], steps, hsz),
            self.w_hh.grad.data_mut(),
        );
        for row in da.chunks(hsz) {
            for (b, &v) in self.bias.grad.data_mut().iter_mut().zip(row) {
                *b += v;
            }
        }
        let mut dx = vec![T::zero(); steps * self.inputs];
        mm_acc(
            Mat::new(&da, steps, hsz),
            Mat::new(self.w_ih.value.data(), hsz, self.inputs),
            &mut dx,
        );
        Tensor::from_vec(&[steps, self.inputs], dx).expect("shape matches")
    }
}

impl<T: Scalar> Parameterized<T> for RnnCell<T> {
    fn visit_params(&mut self, prefix: &str, f: &mut ParamVisitor<'_, T>) {
        f(&join(prefix, "w_ih"), &mut self.w_ih);
        f(&join(prefix, "w_hh"), &mut self.w_hh);
        f(&join(prefix, "bias"), &mut self.bias);
    }
}

fn sigmoid<T: Scalar>(v: T) -> T {
    T::one() / (T::one() + (-v).exp())
}

/// LSTM with gate order (input, forget, cell, output); `forward` returns the
/// final hidden state.
#[derive(Debug, Clone)]
pub struct LstmCell<T> {
    pub inputs: usize,
    pub hidden: usize,
    /// `[4H, I]`
    pub w_ih: Param<T>,
    /// `[4H, H]`
    pub w_hh: Param<T>,
    pub bias: Param<T>,
    xs: Vec<T>,
    /// activated gates per step, `T x 4H`
    gates: Vec<T>,
    /// `(T + 1) x H`
    cs: Vec<T>,
    hs: Vec<T>,
}

impl<T: Scalar> LstmCell<T> {
    pub fn new(inputs: usize, hidden: usize, rng: &mut Rng) -> Self {
        LstmCell {
            inputs,
            hidden,
            w_ih: Param::fan_in_uniform(&[4 * hidden, inputs], hidden, rng),
            w_hh: Param::fan_in_uniform(&[4 * hidden, hidden], hidden, rng),
            bias: Param::fan_in_uniform(&[4 * hidden], hidden, rng),
            xs: Vec::new(),
            gates: Vec::new(),
            cs: Vec::new(),
            hs: Vec::new(),
        }
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let steps = check_seq(x, self.inputs)?;
        let hsz = self.hidden;
        let g4 = 4 * hsz;
        self.xs = x.data().to_vec();
        let mut pre = Vec::with_capacity(steps * g4);
        for _ in 0..steps {
            pre.extend_from_slice(self.bias.value.data());
        }
        mm_acc(
            Mat::new(&self.xs, steps, self.inputs),
            Mat::t(self.w_ih.value.data(), g4, self.inputs),
            &mut pre,
        );
        self.hs = vec![T::zero(); (steps + 1) * hsz];
        self.cs = vec![T::zero(); (steps + 1) * hsz];
        self.gates = pre;
        for t in 0..steps {
            let z = &mut self.gates[t * g4..(t + 1) * g4];
            mm_acc(
                Mat::new(self.w_hh.value.data(), g4, hsz),
                Mat::new(&self.hs[t * hsz..(t + 1) * hsz], hsz, 1),
                z,
            );
            for j in 0..hsz {
                z[j] = sigmoid(z[j]);
                z[hsz + j] = sigmoid(z[hsz + j]);
                z[2 * hsz + j] = z[2 * hsz + j].tanh();
                z[3 * hsz + j] = sigmoid(z[3 * hsz + j]);
                let c = z[hsz + j] * self.cs[t * hsz + j] + z[j] * z[2 * hsz + j];
                self.cs[(t + 1) * hsz + j] = c;
                self.hs[(t + 1) * hsz + j] = z[3 * hsz + j] * c.tanh();
            }
        }
        Tensor::from_vec(&[hsz], self.hs[steps * hsz..].to_vec())
    }

    pub fn backward(&mut self, g_last: &Tensor<T>) -> Tensor<T> {
        let hsz = self.hidden;
        let g4 = 4 * hsz;
        let steps = self.hs.len() / hsz - 1;
        let mut dz = vec![T::zero(); steps * g4];
        let mut dh = g_last.data().to_vec();
        let mut dc = vec![T::zero(); hsz];
        for t in (0..steps).rev() {
            let z = &self.gates[t * g4..(t + 1) * g4];
            let dzt = &mut dz[t * g4..(t + 1) * g4];
            for j in 0..hsz {
                let (i, f, g, o) = (z[j], z[hsz + j], z[2 * hsz + j], z[3 * hsz + j]);
                let c = self.cs[(t + 1) * hsz + j];
                let c_prev = self.cs[t * hsz + j];
                let tc = c.tanh();
                let d_o = dh[j] * tc;
                dc[j] += dh[j] * o * (T::one() - tc * tc);
                let (di, df, dg) = (dc[j] * g, dc[j] * c_prev, dc[j] * i);
                dzt[j] = di * i * (T::one() - i);
                dzt[hsz + j] = df * f * (T::one() - f);
                dzt[2 * hsz + j] = dg * (T::one() - g * g);
                dzt[3 * hsz + j] = d_o * o * (T::one() - o);
                dc[j] = dc[j] * f;
            }
            dh.fill(T::zero());
            mm_acc(
                Mat::t(self.w_hh.value.data(), g4, hsz),
                Mat::new(dzt, g4, 1),
                &mut dh,
            );
        }
        mm_acc(
            Mat::t(&dz, steps, g4),
            Mat::new(&self.xs, steps, self.inputs),
            self.w_ih.grad.data_mut(),
        );
        mm_acc(
            Mat::t(&dz, steps, g4),
            Mat::new(&self.hs[..steps * hsz], steps, hsz),
            self.w_hh.grad.data_mut(),
        );
        for row in dz.chunks(g4) {
            for (b, &v) in self.bias.grad.data_mut().iter_mut().zip(row) {
                *b += v;
            }
        }
        let mut dx = vec![T::zero(); steps * self.inputs];
        mm_acc(
            Mat::new(&dz, steps, g4),
            Mat::new(self.w_ih.value.data(), g4, self.inputs),
            &mut dx,
        );
        Tensor::from_vec(&[steps, self.inputs], dx).expect("shape matches")
    }
}

impl<T: Scalar> Parameterized<T> for LstmCell<T> {
    fn visit_params(&mut self, prefix: &str, f: &mut ParamVisitor<'_, T>) {
        f(&join(prefix, "w_ih"), &mut self.w_ih);
        f(&join(prefix, "w_hh"), &mut self.w_hh);
        f(&join(prefix, "bias"), &mut self.bias);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    fn seq(steps: usize, inputs: usize) -> Tensor<f64> {
        let data = (0..steps * inputs)
            .map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0)
            .collect();
        Tensor::from_vec(&[steps, inputs], data).unwrap()
    }

    /// Central differences of `sum(final_h * probe)` w.r.t. every input.
    fn numeric_input_grad(
        forward: &mut dyn FnMut(&Tensor<f64>) -> Tensor<f64>,
        x: &Tensor<f64>,
        probe: &[f64],
    ) -> Vec<f64> {
        let eps = 1e-6;
        (0..x.len())
            .map(|i| {
                let mut xp = x.clone();
                xp.data_mut()[i] += eps;
                let mut xm = x.clone();
                xm.data_mut()[i] -= eps;
                let lp: f64 = forward(&xp).data().iter().zip(probe).map(|(a, b)| a * b).sum();
                let lm: f64 = forward(&xm).data().iter().zip(probe).map(|(a, b)| a * b).sum();
                (lp - lm) / (2.0 * eps)
            })
            .collect()
    }

    #[test]
    fn rnn_input_gradient_matches_differences() {
        let mut cell = RnnCell::<f64>::new(3, 4, &mut stream(2, Purpose::Init, 0));
        let x = seq(5, 3);
        let probe = [0.3, -0.2, 0.5, 0.1];
        cell.forward(&x).unwrap();
        let dx = cell.backward(&Tensor::from_vec(&[4], probe.to_vec()).unwrap());
        let mut c2 = cell.clone();
        let num = numeric_input_grad(&mut |x| c2.forward(x).unwrap(), &x, &probe);
        for (a, n) in dx.data().iter().zip(&num) {
            assert!((a - n).abs() < 1e-7, "{a} vs {n}");
        }
    }

    #[test]
    fn lstm_input_gradient_matches_differences() {
        let mut cell = LstmCell::<f64>::new(3, 4, &mut stream(2, Purpose::Init, 1));
        let x = seq(6, 3);
        let probe = [0.3, -0.2, 0.5, 0.1];
        cell.forward(&x).unwrap();
        let dx = cell.backward(&Tensor::from_vec(&[4], probe.to_vec()).unwrap());
        let mut c2 = cell.clone();
        let num = numeric_input_grad(&mut |x| c2.forward(x).unwrap(), &x, &probe);
        for (a, n) in dx.data().iter().zip(&num) {
            assert!((a - n).abs() < 1e-7, "{a} vs {n}");
        }
    }

    #[test]
    fn freq_mean_averages_rows() {
        let x = Tensor::from_vec(&[2, 1, 2, 3], (0..12).map(|v| v as f64).collect()).unwrap();
        let mut m = FreqMean::default();
        let s = m.forward(&x).unwrap();
        assert_eq!(s.shape(), &[3, 2]);
        // channel 0 rows (0,1,2),(3,4,5); channel 1 rows (6,7,8),(9,10,11)
        assert_eq!(s.data(), &[1.5, 7.5, 2.5, 8.5, 3.5, 9.5]);
        let g = m.backward(&Tensor::full(&[3, 2], 1.0));
        assert!(g.data().iter().all(|&v| v == 0.5));
    }
}
