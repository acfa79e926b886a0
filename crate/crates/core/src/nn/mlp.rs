use std::fmt::Write as _;

use rand::Rng;

use crate::{Error, Prng, Result};

/// Output nonlinearity of the last layer. Hidden layers are always ReLU.
#[derive(Debug, Clone, PartialEq)]
pub enum OutputActivation {
    Linear,
    /// `mid + half * tanh(z)` per output, mapping onto `[low, high]`.
    TanhScaled { low: Vec<f64>, high: Vec<f64> },
}

/// Dense ReLU network. Layer `l` maps `sizes[l]` inputs to `sizes[l+1]`
/// outputs with a row-major `out x in` weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    pub(crate) weights: Vec<Vec<f64>>,
    pub(crate) biases: Vec<Vec<f64>>,
    output: OutputActivation,
}

/// Gradient bundle mirroring an [`Mlp`]'s parameter shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Grads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn scale(&mut self, k: f64) {
        for x in self.weights.iter_mut().chain(self.biases.iter_mut()).flatten() {
            *x *= k;
        }
    }

    pub fn norm(&self) -> f64 {
        self.weights
            .iter()
            .chain(self.biases.iter())
            .flatten()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales so that the global norm is at most `max_norm`.
    pub fn clip_norm(&mut self, max_norm: f64) {
        let n = self.norm();
        if n > max_norm {
            self.scale(max_norm / n);
        }
    }
}

/// Activations kept by a batched forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct Cache {
    batch: usize,
    /// Input of every layer (`batch x sizes[l]`).
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of every layer (`batch x sizes[l+1]`).
    pre: Vec<Vec<f64>>,
}

/// `c (m x n) = a (m x k) * b (k x n)` with explicit row/column strides.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], rsa: isize, csa: isize, b: &[f64], rsb: isize, csb: isize, c: &mut [f64]) {
    debug_assert!(c.len() >= m * n);
    // SAFETY: strides and extents describe views inside `a`, `b` and `c`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl Mlp {
    /// Weights and biases drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new(sizes: &[usize], output: OutputActivation, rng: &mut Prng) -> Result<Self> {
        let mut net = Self::zeros(sizes, output)?;
        for l in 0..net.n_layers() {
            let bound = 1.0 / (sizes[l] as f64).sqrt();
            for w in net.weights[l].iter_mut().chain(net.biases[l].iter_mut()) {
                *w = rng.gen_range(-bound..bound);
            }
        }
        Ok(net)
    }

    pub fn zeros(sizes: &[usize], output: OutputActivation) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Shape(format!("need at least two positive layer sizes, got {sizes:?}")));
        }
        if let OutputActivation::TanhScaled { low, high } = &output {
            let out = sizes[sizes.len() - 1];
            if low.len() != out || high.len() != out || low.iter().zip(high).any(|(l, h)| !(l < h)) {
                return Err(Error::Shape("action bounds must match the output size with low < high".into()));
            }
        }
        let weights = sizes.windows(2).map(|w| vec![0.0; w[0] * w[1]]).collect();
        let biases = sizes[1..].iter().map(|&n| vec![0.0; n]).collect();
        Ok(Self {
            sizes: sizes.to_vec(),
            weights,
            biases,
            output,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        self.sizes[self.sizes.len() - 1]
    }

    pub fn output_activation(&self) -> &OutputActivation {
        &self.output
    }

    /// Row-major `out x in` weights of layer `l`.
    pub fn weights(&self, l: usize) -> &[f64] {
        &self.weights[l]
    }

    pub fn weights_mut(&mut self, l: usize) -> &mut [f64] {
        &mut self.weights[l]
    }

    pub fn biases(&self, l: usize) -> &[f64] {
        &self.biases[l]
    }

    pub fn biases_mut(&mut self, l: usize) -> &mut [f64] {
        &mut self.biases[l]
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().chain(self.biases.iter()).map(Vec::len).sum()
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(self.biases.iter()).flatten()
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.biases.iter_mut()).flatten()
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|x| x.is_finite())
    }

    pub fn same_shape(&self, other: &Mlp) -> bool {
        self.sizes == other.sizes
    }

    fn squash(&self, z: &mut [f64]) {
        if let OutputActivation::TanhScaled { low, high } = &self.output {
            let n = low.len();
            for (i, v) in z.iter_mut().enumerate() {
                let (lo, hi) = (low[i % n], high[i % n]);
                *v = 0.5 * (hi + lo) + 0.5 * (hi - lo) * v.tanh();
            }
        }
    }

    /// Forward pass over a row-major `batch x input_dim` matrix.
    pub fn forward_batch(&self, x: &[f64], batch: usize) -> Result<(Vec<f64>, Cache)> {
        if x.len() != batch * self.input_dim() {
            return Err(Error::Shape(format!(
                "input of length {} for batch {batch} x {}",
                x.len(),
                self.input_dim()
            )));
        }
        let mut inputs = Vec::with_capacity(self.n_layers());
        let mut pre = Vec::with_capacity(self.n_layers());
        let mut h = x.to_vec();
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let mut z = vec![0.0; batch * n_out];
            gemm(batch, n_in, n_out, &h, n_in as isize, 1, &self.weights[l], 1, n_in as isize, &mut z);
            for row in z.chunks_exact_mut(n_out) {
                for (v, b) in row.iter_mut().zip(&self.biases[l]) {
                    *v += b;
                }
            }
            let mut out = z.clone();
            if l + 1 < self.n_layers() {
                for v in out.iter_mut() {
                    *v = v.max(0.0);
                }
            } else {
                self.squash(&mut out);
            }
            inputs.push(h);
            pre.push(z);
            h = out;
        }
        Ok((h, Cache { batch, inputs, pre }))
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_batch(x, 1)?.0)
    }

    /// Reverse pass for the loss whose gradient w.r.t. the outputs is `d_out`.
    /// Returns parameter gradients and the gradient w.r.t. the inputs.
    pub fn backward(&self, cache: &Cache, d_out: &[f64]) -> Result<(Grads, Vec<f64>)> {
        let batch = cache.batch;
        if cache.pre.len() != self.n_layers() || d_out.len() != batch * self.output_dim() {
            return Err(Error::Shape("output gradient does not match the cached forward pass".into()));
        }
        let mut grads = Grads::zeros_like(self);
        let last = self.n_layers() - 1;
        let mut dz = d_out.to_vec();
        if let OutputActivation::TanhScaled { low, high } = &self.output {
            let n = low.len();
            for (i, g) in dz.iter_mut().enumerate() {
                let t = cache.pre[last][i].tanh();
                *g *= 0.5 * (high[i % n] - low[i % n]) * (1.0 - t * t);
            }
        }
        for l in (0..self.n_layers()).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            // dW = dZ^T X
            gemm(
                n_out,
                batch,
                n_in,
                &dz,
                1,
                n_out as isize,
                &cache.inputs[l],
                n_in as isize,
                1,
                &mut grads.weights[l],
            );
            for row in dz.chunks_exact(n_out) {
                for (g, d) in grads.biases[l].iter_mut().zip(row) {
                    *g += d;
                }
            }
            // dX = dZ W
            let mut dx = vec![0.0; batch * n_in];
            gemm(batch, n_out, n_in, &dz, n_out as isize, 1, &self.weights[l], n_in as isize, 1, &mut dx);
            if l > 0 {
                for (g, z) in dx.iter_mut().zip(&cache.pre[l - 1]) {
                    if *z <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            dz = dx;
        }
        Ok((grads, dz))
    }

    /// Text checkpoint: a shape header, then one line of weights and one of
    /// biases per layer. Floats use shortest round-trip formatting.
    pub fn to_text(&self) -> String {
        let mut out = String::from("mlp");
        for s in &self.sizes {
            let _ = write!(out, " {s}");
        }
        out.push('\n');
        match &self.output {
            OutputActivation::Linear => out.push_str("output linear\n"),
            OutputActivation::TanhScaled { low, high } => {
                out.push_str("output tanh");
                for (l, h) in low.iter().zip(high) {
                    let _ = write!(out, " {l:?} {h:?}");
                }
                out.push('\n');
            }
        }
        for l in 0..self.n_layers() {
            for vals in [&self.weights[l], &self.biases[l]] {
                let line: Vec<String> = vals.iter().map(|v| format!("{v:?}")).collect();
                out.push_str(&line.join(" "));
                out.push('\n');
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::parse(0, format!("missing {what}")))
        };
        let floats = |line: usize, s: &str| -> Result<Vec<f64>> {
            s.split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| Error::parse(line, format!("bad number `{t}`"))))
                .collect()
        };
        let (i, header) = next("header")?;
        let mut head = header.split_whitespace();
        if head.next() != Some("mlp") {
            return Err(Error::parse(i + 1, "expected `mlp` header"));
        }
        let sizes = head
            .map(|t| t.parse::<usize>().map_err(|_| Error::parse(i + 1, format!("bad size `{t}`"))))
            .collect::<Result<Vec<_>>>()?;
        let (i, out_line) = next("output line")?;
        let output = match out_line.split_once(' ').map(|(a, b)| (a, b.trim())) {
            Some(("output", "linear")) => OutputActivation::Linear,
            Some(("output", rest)) if rest.starts_with("tanh") => {
                let bounds = floats(i + 1, &rest[4..])?;
                OutputActivation::TanhScaled {
                    low: bounds.iter().step_by(2).copied().collect(),
                    high: bounds.iter().skip(1).step_by(2).copied().collect(),
                }
            }
            _ => return Err(Error::parse(i + 1, "expected `output linear|tanh ...`")),
        };
        let mut net = Self::zeros(&sizes, output)?;
        for l in 0..net.n_layers() {
            for target in 0..2 {
                let (i, line) = next("parameter line")?;
                let vals = floats(i + 1, line)?;
                let slot = if target == 0 { &mut net.weights[l] } else { &mut net.biases[l] };
                if vals.len() != slot.len() {
                    return Err(Error::parse(i + 1, format!("expected {} values, found {}", slot.len(), vals.len())));
                }
                slot.copy_from_slice(&vals);
            }
        }
        Ok(net)
    }
}
