use std::io::{Read, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{gemm, DenseMatrix};

/// Hidden-layer layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    /// 40, 60, 100.
    Base,
    /// 16, 64, 128, 128, 128.
    Deep,
}

impl Architecture {
    pub fn hidden(self) -> &'static [usize] {
        match self {
            Architecture::Base => &[40, 60, 100],
            Architecture::Deep => &[16, 64, 128, 128, 128],
        }
    }

    /// Full layer sizes for `d_in` inputs and `d_out` outputs.
    pub fn sizes(self, d_in: usize, d_out: usize) -> Vec<usize> {
        let mut s = vec![d_in];
        s.extend_from_slice(self.hidden());
        s.push(d_out);
        s
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Architecture::Base => "base",
            Architecture::Deep => "deep",
        })
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "base" => Ok(Architecture::Base),
            "deep" => Ok(Architecture::Deep),
            _ => Err(Error::Invalid(format!("unknown architecture '{s}'"))),
        }
    }
}

/// Multilayer perceptron: tanh on hidden layers, identity on the output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    /// `weights[l]` is `sizes[l+1] × sizes[l]`.
    weights: Vec<DenseMatrix>,
    biases: Vec<Vec<f64>>,
}

impl Mlp {
    /// Weights uniform in `±1/√fan_in`, zero biases.
    pub fn new(sizes: &[usize], seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::with_init(sizes, |fan_in| {
            let a = 1.0 / (fan_in as f64).sqrt();
            rng.gen_range(-a..=a)
        })
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        Self::with_init(sizes, |_| 0.0)
    }

    fn with_init(sizes: &[usize], mut f: impl FnMut(usize) -> f64) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(Error::Invalid(format!("bad layer sizes {sizes:?}")));
        }
        let mut weights = Vec::with_capacity(sizes.len() - 1);
        let mut biases = Vec::with_capacity(sizes.len() - 1);
        for w in sizes.windows(2) {
            let data = (0..w[0] * w[1]).map(|_| f(w[0])).collect();
            weights.push(DenseMatrix::from_vec(w[1], w[0], data)?);
            biases.push(vec![0.0; w[1]]);
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            weights,
            biases,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn d_in(&self) -> usize {
        self.sizes[0]
    }

    pub fn d_out(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self, l: usize) -> &DenseMatrix {
        &self.weights[l]
    }

    pub fn biases(&self, l: usize) -> &[f64] {
        &self.biases[l]
    }

    pub fn n_params(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Flat parameters: per layer, `W` row-major then `b`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            p.extend_from_slice(w.data());
            p.extend_from_slice(b);
        }
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        check_len("MLP parameters", self.n_params(), p.len())?;
        let mut off = 0;
        for (w, b) in self.weights.iter_mut().zip(&mut self.biases) {
            let n = w.data().len();
            w.data_mut().copy_from_slice(&p[off..off + n]);
            off += n;
            let nb = b.len();
            b.copy_from_slice(&p[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    /// Single-sample forward pass.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("MLP input", self.d_in(), x.len())?;
        let xm = DenseMatrix::from_vec(1, x.len(), x.to_vec())?;
        Ok(self.forward_batch(&xm)?.into_data())
    }

    /// Forward pass over the rows of `x`.
    pub fn forward_batch(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        check_len("MLP input width", self.d_in(), x.cols())?;
        let mut h = x.clone();
        for l in 0..self.n_layers() {
            h = self.layer(l, &h);
        }
        Ok(h)
    }

    fn layer(&self, l: usize, h: &DenseMatrix) -> DenseMatrix {
        let w = &self.weights[l];
        let b = &self.biases[l];
        let mut z = DenseMatrix::zeros(h.rows(), w.rows());
        gemm(1.0, h, false, w, true, 0.0, &mut z);
        let last = l + 1 == self.n_layers();
        for r in 0..z.rows() {
            for (v, bi) in z.row_mut(r).iter_mut().zip(b) {
                *v += bi;
                if !last {
                    *v = v.tanh();
                }
            }
        }
        z
    }

    /// Mean squared error over all outputs and its gradient with respect to
    /// [`params`](Self::params).
    pub fn loss_and_gradient(&self, x: &DenseMatrix, y: &DenseMatrix) -> Result<(f64, Vec<f64>)> {
        check_len("MLP input width", self.d_in(), x.cols())?;
        check_len("MLP target width", self.d_out(), y.cols())?;
        check_len("MLP samples", x.rows(), y.rows())?;
        let n = (y.rows() * y.cols()).max(1) as f64;
        let mut acts = Vec::with_capacity(self.n_layers() + 1);
        acts.push(x.clone());
        for l in 0..self.n_layers() {
            let h = self.layer(l, &acts[l]);
            acts.push(h);
        }
        let out = acts.last().unwrap();
        let mut delta = out.clone();
        let mut loss = 0.0;
        for (d, t) in delta.data_mut().iter_mut().zip(y.data()) {
            let e = *d - t;
            loss += e * e;
            *d = 2.0 * e / n;
        }
        loss /= n;
        let mut grads: Vec<(DenseMatrix, Vec<f64>)> = Vec::with_capacity(self.n_layers());
        for l in (0..self.n_layers()).rev() {
            let h_in = &acts[l];
            let w = &self.weights[l];
            let mut gw = DenseMatrix::zeros(w.rows(), w.cols());
            gemm(1.0, &delta, true, h_in, false, 0.0, &mut gw);
            let mut gb = vec![0.0; w.rows()];
            for r in 0..delta.rows() {
                for (g, d) in gb.iter_mut().zip(delta.row(r)) {
                    *g += d;
                }
            }
            grads.push((gw, gb));
            if l > 0 {
                let mut dh = DenseMatrix::zeros(delta.rows(), w.cols());
                gemm(1.0, &delta, false, w, false, 0.0, &mut dh);
                for (d, a) in dh.data_mut().iter_mut().zip(h_in.data()) {
                    *d *= 1.0 - a * a;
                }
                delta = dh;
            }
        }
        let mut g = Vec::with_capacity(self.n_params());
        for (gw, gb) in grads.iter().rev() {
            g.extend_from_slice(gw.data());
            g.extend_from_slice(gb);
        }
        Ok((loss, g))
    }

    /// Binary net archive:
    /// `"MLPN v1\n"`, u32 layer-size count, u64 sizes, then the flat
    /// parameters as f64, all little endian.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"MLPN v1\n")?;
        w.write_all(&(self.sizes.len() as u32).to_le_bytes())?;
        for &s in &self.sizes {
            w.write_all(&(s as u64).to_le_bytes())?;
        }
        for v in self.params() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let eof = |e: std::io::Error| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::Format("truncated net archive".into())
            } else {
                Error::Io(e)
            }
        };
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(eof)?;
        if &magic != b"MLPN v1\n" {
            return Err(Error::Format(format!(
                "not a net archive (header {:?})",
                String::from_utf8_lossy(&magic)
            )));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4).map_err(eof)?;
        let count = u32::from_le_bytes(b4) as usize;
        if !(2..=64).contains(&count) {
            return Err(Error::Format(format!("bad layer count {count}")));
        }
        let mut sizes = Vec::with_capacity(count);
        let mut b8 = [0u8; 8];
        for _ in 0..count {
            r.read_exact(&mut b8).map_err(eof)?;
            sizes.push(u64::from_le_bytes(b8) as usize);
        }
        let mut net = Self::zeros(&sizes).map_err(|e| Error::Format(e.to_string()))?;
        let mut p = Vec::with_capacity(net.n_params());
        for _ in 0..net.n_params() {
            r.read_exact(&mut b8).map_err(eof)?;
            p.push(f64::from_le_bytes(b8));
        }
        net.set_params(&p)?;
        Ok(net)
    }
}

/// Adam settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamOptions {
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Stop once the loss is at or below this value.
    pub loss_target: f64,
}

impl Default for AdamOptions {
    fn default() -> Self {
        Self {
            epochs: 5000,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            loss_target: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Loss before each update; the last entry is the final loss.
    pub loss_history: Vec<f64>,
    pub epochs: usize,
    pub reached_target: bool,
}

impl TrainReport {
    pub fn final_loss(&self) -> f64 {
        *self.loss_history.last().unwrap_or(&f64::NAN)
    }
}

/// Full-batch Adam on the mean squared error.
pub fn adam_train(net: &mut Mlp, x: &DenseMatrix, y: &DenseMatrix, opts: &AdamOptions) -> Result<TrainReport> {
    let np = net.n_params();
    let mut p = net.params();
    let (mut m, mut v) = (vec![0.0; np], vec![0.0; np]);
    let mut history = Vec::with_capacity(opts.epochs + 1);
    let (mut b1t, mut b2t) = (1.0, 1.0);
    for epoch in 0..=opts.epochs {
        let (loss, g) = net.loss_and_gradient(x, y)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        history.push(loss);
        if loss <= opts.loss_target {
            return Ok(TrainReport {
                loss_history: history,
                epochs: epoch,
                reached_target: true,
            });
        }
        if epoch == opts.epochs {
            break;
        }
        b1t *= opts.beta1;
        b2t *= opts.beta2;
        for k in 0..np {
            m[k] = opts.beta1 * m[k] + (1.0 - opts.beta1) * g[k];
            v[k] = opts.beta2 * v[k] + (1.0 - opts.beta2) * g[k] * g[k];
            let mh = m[k] / (1.0 - b1t);
            let vh = v[k] / (1.0 - b2t);
            p[k] -= opts.learning_rate * mh / (vh.sqrt() + opts.epsilon);
        }
        net.set_params(&p)?;
    }
    Ok(TrainReport {
        loss_history: history,
        epochs: opts.epochs,
        reached_target: false,
    })
}
