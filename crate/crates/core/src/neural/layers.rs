use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;

const LN_EPS: f64 = 1e-5;

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bound: f64) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.gen_range(-bound..=bound))
}

/// `y = x·W + b` applied to each row of `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    /// `in × out`.
    pub w: Mat,
    /// `1 × out`.
    pub b: Mat,
}

impl Linear {
    pub fn init(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        Self {
            w: uniform(rng, fan_in, fan_out, bound),
            b: uniform(rng, 1, fan_out, bound),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn forward(&self, x: &Mat) -> Result<Mat> {
        if x.ncols() != self.in_dim() {
            return Err(Error::ShapeMismatch(format!(
                "linear layer expects {} inputs, got {}",
                self.in_dim(),
                x.ncols()
            )));
        }
        let mut y = x * &self.w;
        for mut row in y.row_iter_mut() {
            row += &self.b;
        }
        Ok(y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gamma: Mat,
    pub beta: Mat,
}

impl LayerNorm {
    pub fn new(dim: usize) -> Self {
        Self {
            gamma: Mat::from_element(1, dim, 1.0),
            beta: Mat::zeros(1, dim),
        }
    }

    pub fn forward(&self, x: &Mat) -> Result<Mat> {
        if x.ncols() != self.gamma.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "layer norm over {} features, got {}",
                self.gamma.ncols(),
                x.ncols()
            )));
        }
        let n = x.ncols() as f64;
        let mut y = x.clone();
        for mut row in y.row_iter_mut() {
            let mean = row.sum() / n;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let inv = 1.0 / (var + LN_EPS).sqrt();
            for (k, v) in row.iter_mut().enumerate() {
                *v = (*v - mean) * inv * self.gamma[k] + self.beta[k];
            }
        }
        Ok(y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Gelu,
    Relu,
}

/// Tanh approximation of GELU.
pub fn gelu(x: f64) -> f64 {
    const K: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
    0.5 * x * (1.0 + (K * (x + 0.044715 * x * x * x)).tanh())
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Gelu => gelu(x),
            Activation::Relu => x.max(0.0),
        }
    }
}

/// Linear layers with an activation between consecutive layers (none after
/// the last).
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub activation: Activation,
}

impl Mlp {
    /// `dims = [in, hidden.., out]`.
    pub fn init(rng: &mut ChaCha8Rng, dims: &[usize], activation: Activation) -> Self {
        let layers = dims
            .windows(2)
            .map(|w| Linear::init(rng, w[0], w[1]))
            .collect();
        Self { layers, activation }
    }

    pub fn forward(&self, x: &Mat) -> Result<Mat> {
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(&h)?;
            if i + 1 < self.layers.len() {
                h.apply(|v| *v = self.activation.apply(*v));
            }
        }
        Ok(h)
    }
}

/// In-place row softmax; returns the largest deviation of a row sum from 1.
pub fn softmax_rows(x: &mut Mat) -> f64 {
    let mut worst: f64 = 0.0;
    for mut row in x.row_iter_mut() {
        let max = row.max();
        row.apply(|v| *v = (*v - max).exp());
        let s = row.sum();
        row /= s;
        worst = worst.max((row.sum() - 1.0).abs());
    }
    worst
}

pub fn ensure_finite(x: &Mat, what: &str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericOverflow(format!(
            "non-finite activations in {what}"
        )))
    }
}

/// Rearranges a `channels`-channel image of `h × w` pixels into one row per
/// `p × p` patch (row-major patch order), each row laid out as
/// `(dy, dx, channel)`.
pub fn patchify(data: &[f64], channels: usize, w: usize, h: usize, p: usize) -> Mat {
    let (pw, ph) = (w / p, h / p);
    let mut out = Mat::zeros(pw * ph, p * p * channels);
    for py in 0..ph {
        for px in 0..pw {
            let r = py * pw + px;
            for dy in 0..p {
                for dx in 0..p {
                    let pix = (py * p + dy) * w + px * p + dx;
                    for c in 0..channels {
                        out[(r, (dy * p + dx) * channels + c)] = data[pix * channels + c];
                    }
                }
            }
        }
    }
    out
}

/// Inverse of [`patchify`]: returns per-pixel channel vectors, row-major.
pub fn unpatchify(x: &Mat, channels: usize, w: usize, h: usize, p: usize) -> Vec<f64> {
    let pw = w / p;
    let mut out = vec![0.0; w * h * channels];
    for r in 0..x.nrows() {
        let (py, px) = (r / pw, r % pw);
        for dy in 0..p {
            for dx in 0..p {
                let pix = (py * p + dy) * w + px * p + dx;
                for c in 0..channels {
                    out[pix * channels + c] = x[(r, (dy * p + dx) * channels + c)];
                }
            }
        }
    }
    out
}

/// Fixed 2D sinusoidal embedding of the patch grid, shared by all views.
pub fn patch_position_embedding(pw: usize, ph: usize, dim: usize) -> Mat {
    Mat::from_fn(pw * ph, dim, |r, k| {
        let pos = if k % 2 == 0 {
            (r / pw) as f64
        } else {
            (r % pw) as f64
        };
        let freq = 1.0 / 10000f64.powf((k / 4) as f64 * 4.0 / dim as f64);
        if (k / 2) % 2 == 0 {
            (pos * freq).sin()
        } else {
            (pos * freq).cos()
        }
    })
}
