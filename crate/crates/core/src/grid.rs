//! Token grids and the small dense operators applied to them.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Dot product with four independent accumulators.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// A `height × width` grid of `channels`-dimensional tokens, stored
/// token-major: the token at `(y, x)` occupies
/// `data[(y * width + x) * channels ..][..channels]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenGrid {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl TokenGrid {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::Shape(format!(
                "grid data length {} does not match {height}x{width}x{channels}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("grid element {i} is {}", data[i])));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::filled(height, width, channels, 0.0)
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    /// Grid whose element `(y, x, c)` is `f(y, x, c)`.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c));
                }
            }
        }
        Self {
            height,
            width,
            channels,
            data,
        }
    }

    /// Standard-normal entries drawn from `rng`.
    pub fn random(height: usize, width: usize, channels: usize, rng: &mut impl Rng) -> Self {
        Self::from_fn(height, width, channels, |_, _, _| rng.sample(StandardNormal))
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn tokens(&self) -> usize {
        self.height * self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn token(&self, index: usize) -> &[f64] {
        &self.data[index * self.channels..(index + 1) * self.channels]
    }

    #[inline]
    pub fn token_mut(&mut self, index: usize) -> &mut [f64] {
        &mut self.data[index * self.channels..(index + 1) * self.channels]
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize) -> &[f64] {
        self.token(y * self.width + x)
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, value: f64) {
        self.data[(y * self.width + x) * self.channels + c] = value;
    }

    /// Element `(y, x, c)` with coordinates clamped to the grid (edge replication).
    #[inline]
    pub fn get_clamped(&self, y: isize, x: isize, c: usize) -> f64 {
        let y = y.clamp(0, self.height as isize - 1) as usize;
        let x = x.clamp(0, self.width as isize - 1) as usize;
        self.get(y, x, c)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= factor);
        out
    }

    /// Adds `vector` to every token.
    pub fn add_to_tokens(&mut self, vector: &[f64]) -> Result<()> {
        if vector.len() != self.channels {
            return Err(Error::Shape(format!(
                "cannot add a {}-vector to {}-channel tokens",
                vector.len(),
                self.channels
            )));
        }
        for tok in self.data.chunks_exact_mut(self.channels) {
            tok.iter_mut().zip(vector).for_each(|(a, b)| *a += b);
        }
        Ok(())
    }

    pub fn same_layout(&self, other: &TokenGrid) -> bool {
        self.height == other.height && self.width == other.width
    }

    /// Channel-wise concatenation of grids sharing one layout.
    pub fn concat(parts: &[&TokenGrid]) -> Result<TokenGrid> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Shape("nothing to concatenate".into()))?;
        if let Some(p) = parts.iter().find(|p| !p.same_layout(first)) {
            return Err(Error::Shape(format!(
                "cannot concatenate {}x{} with {}x{}",
                first.height, first.width, p.height, p.width
            )));
        }
        let channels: usize = parts.iter().map(|p| p.channels).sum();
        let mut data = Vec::with_capacity(first.tokens() * channels);
        for i in 0..first.tokens() {
            for p in parts {
                data.extend_from_slice(p.token(i));
            }
        }
        Ok(TokenGrid {
            height: first.height,
            width: first.width,
            channels,
            data,
        })
    }

    /// Mean over all elements.
    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::NonFinite(format!("{what}: element {i} is {}", self.data[i]))),
            None => Ok(()),
        }
    }
}

/// A dense per-token linear map `out = W · in` (no bias).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    inputs: usize,
    outputs: usize,
    /// Row-major `outputs × inputs`.
    weights: Vec<f64>,
}

impl LinearMap {
    pub fn new(outputs: usize, inputs: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != inputs * outputs {
            return Err(Error::Shape(format!(
                "linear map needs {} weights, got {}",
                inputs * outputs,
                weights.len()
            )));
        }
        Ok(Self {
            inputs,
            outputs,
            weights,
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut weights = vec![0.0; n * n];
        for i in 0..n {
            weights[i * n + i] = 1.0;
        }
        Self {
            inputs: n,
            outputs: n,
            weights,
        }
    }

    pub fn zeros(outputs: usize, inputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
        }
    }

    /// Gaussian weights with variance `1 / inputs`.
    pub fn seeded(outputs: usize, inputs: usize, rng: &mut impl Rng) -> Self {
        let std = 1.0 / (inputs as f64).sqrt();
        let weights = (0..inputs * outputs)
            .map(|_| std * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self {
            inputs,
            outputs,
            weights,
        }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn apply_token(&self, input: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.weights.chunks_exact(self.inputs)) {
            *o = dot(row, input);
        }
    }

    pub fn apply(&self, grid: &TokenGrid) -> Result<TokenGrid> {
        if grid.channels() != self.inputs {
            return Err(Error::Shape(format!(
                "linear map expects {} channels, grid has {}",
                self.inputs,
                grid.channels()
            )));
        }
        let mut out = TokenGrid::zeros(grid.height(), grid.width(), self.outputs);
        for i in 0..grid.tokens() {
            let (src, dst) = (grid.token(i), i);
            let mut buf = vec![0.0; self.outputs];
            self.apply_token(src, &mut buf);
            out.token_mut(dst).copy_from_slice(&buf);
        }
        Ok(out)
    }
}

/// A 3×3 convolution with bias and edge-replication padding.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv3x3 {
    pub inputs: usize,
    pub outputs: usize,
    /// Indexed `[out][in][ky][kx]`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Gradients of a [`Conv3x3`] with respect to its parameters and input.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub input: TokenGrid,
}

impl Conv3x3 {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; outputs * inputs * 9],
            bias: vec![0.0; outputs],
        }
    }

    /// Gaussian weights with variance `gain² / (9 · inputs)`, zero bias.
    pub fn seeded(inputs: usize, outputs: usize, gain: f64, rng: &mut impl Rng) -> Self {
        let std = gain / ((9 * inputs) as f64).sqrt();
        Self {
            inputs,
            outputs,
            weights: (0..outputs * inputs * 9)
                .map(|_| std * rng.sample::<f64, _>(StandardNormal))
                .collect(),
            bias: vec![0.0; outputs],
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    #[inline]
    fn widx(&self, o: usize, i: usize, ky: usize, kx: usize) -> usize {
        ((o * self.inputs + i) * 3 + ky) * 3 + kx
    }

    /// Padded copy of `input`, `(h+2) × (w+2)`, edges replicated.
    fn pad(input: &TokenGrid) -> TokenGrid {
        let (h, w, c) = input.shape();
        TokenGrid::from_fn(h + 2, w + 2, c, |y, x, ch| {
            input.get_clamped(y as isize - 1, x as isize - 1, ch)
        })
    }

    pub fn forward(&self, input: &TokenGrid) -> Result<TokenGrid> {
        if input.channels() != self.inputs {
            return Err(Error::Shape(format!(
                "conv expects {} channels, input has {}",
                self.inputs,
                input.channels()
            )));
        }
        let (h, w, _) = input.shape();
        let padded = Self::pad(input);
        let mut out = TokenGrid::zeros(h, w, self.outputs);
        // reorder weights as [ky][kx][out][in] for contiguous inner loops
        let mut wt = vec![0.0; self.weights.len()];
        for o in 0..self.outputs {
            for i in 0..self.inputs {
                for ky in 0..3 {
                    for kx in 0..3 {
                        wt[((ky * 3 + kx) * self.outputs + o) * self.inputs + i] =
                            self.weights[self.widx(o, i, ky, kx)];
                    }
                }
            }
        }
        for y in 0..h {
            for x in 0..w {
                let dst = out.token_mut(y * w + x);
                dst.copy_from_slice(&self.bias);
                for ky in 0..3 {
                    for kx in 0..3 {
                        let src = padded.at(y + ky, x + kx);
                        let block = &wt[(ky * 3 + kx) * self.outputs * self.inputs..][..self.outputs * self.inputs];
                        for (o, row) in block.chunks_exact(self.inputs).enumerate() {
                            dst[o] += dot(row, src);
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Backpropagates `grad_out` (same layout as the forward output).
    pub fn backward(&self, input: &TokenGrid, grad_out: &TokenGrid) -> Result<ConvGrad> {
        let (h, w, _) = input.shape();
        if grad_out.shape() != (h, w, self.outputs) {
            return Err(Error::Shape("conv gradient does not match the forward output".into()));
        }
        let padded = Self::pad(input);
        let mut gw = vec![0.0; self.weights.len()];
        let mut gb = vec![0.0; self.outputs];
        let mut gpad = TokenGrid::zeros(h + 2, w + 2, self.inputs);
        for y in 0..h {
            for x in 0..w {
                let g = grad_out.at(y, x);
                for (o, &go) in g.iter().enumerate() {
                    gb[o] += go;
                    if go == 0.0 {
                        continue;
                    }
                    for ky in 0..3 {
                        for kx in 0..3 {
                            let src = padded.at(y + ky, x + kx);
                            for (i, &v) in src.iter().enumerate() {
                                gw[self.widx(o, i, ky, kx)] += go * v;
                            }
                            let gp = gpad.token_mut((y + ky) * (w + 2) + x + kx);
                            for (i, slot) in gp.iter_mut().enumerate() {
                                *slot += go * self.weights[self.widx(o, i, ky, kx)];
                            }
                        }
                    }
                }
            }
        }
        // fold the replicated border back onto the edge pixels
        let mut gin = TokenGrid::zeros(h, w, self.inputs);
        for py in 0..h + 2 {
            for px in 0..w + 2 {
                let y = (py as isize - 1).clamp(0, h as isize - 1) as usize;
                let x = (px as isize - 1).clamp(0, w as isize - 1) as usize;
                let src = gpad.at(py, px).to_vec();
                gin.token_mut(y * w + x).iter_mut().zip(src).for_each(|(a, b)| *a += b);
            }
        }
        Ok(ConvGrad {
            weights: gw,
            bias: gb,
            input: gin,
        })
    }
}
