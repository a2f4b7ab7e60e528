//! Convolutional GRU update operator with a two-layer residual head.

use crate::error::{Error, Result};
use crate::grid::{Conv3x3, TokenGrid};
use crate::seed::{rng_for, tags};

pub const DEFAULT_HIDDEN: usize = 32;

/// Gain of the residual head's output layer. Small so untrained updates
/// stay within a few pixels per iteration.
const DELTA_GAIN: f64 = 0.1;

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `z = σ(W_z ∗ [h, x])`, `r = σ(W_r ∗ [h, x])`,
/// `h̃ = tanh(W_h ∗ [r ⊙ h, x])`, `h' = (1 - z) ⊙ h + z ⊙ h̃`, and
/// `Δd = W_2 ∗ relu(W_1 ∗ h')`.
#[derive(Debug, Clone, PartialEq)]
pub struct GruCell {
    pub input_channels: usize,
    pub hidden_channels: usize,
    pub update: Conv3x3,
    pub reset: Conv3x3,
    pub candidate: Conv3x3,
    pub head_hidden: Conv3x3,
    pub head_out: Conv3x3,
}

impl GruCell {
    pub fn seeded(input_channels: usize, hidden_channels: usize, seed: u64) -> Self {
        let mut rng = rng_for(seed, tags::GRU);
        let gate_in = input_channels + hidden_channels;
        Self {
            input_channels,
            hidden_channels,
            update: Conv3x3::seeded(gate_in, hidden_channels, 1.0, &mut rng),
            reset: Conv3x3::seeded(gate_in, hidden_channels, 1.0, &mut rng),
            candidate: Conv3x3::seeded(gate_in, hidden_channels, 1.0, &mut rng),
            head_hidden: Conv3x3::seeded(hidden_channels, hidden_channels, 1.0, &mut rng),
            head_out: Conv3x3::seeded(hidden_channels, 1, DELTA_GAIN, &mut rng),
        }
    }

    pub fn zeros(input_channels: usize, hidden_channels: usize) -> Self {
        let gate_in = input_channels + hidden_channels;
        Self {
            input_channels,
            hidden_channels,
            update: Conv3x3::zeros(gate_in, hidden_channels),
            reset: Conv3x3::zeros(gate_in, hidden_channels),
            candidate: Conv3x3::zeros(gate_in, hidden_channels),
            head_hidden: Conv3x3::zeros(hidden_channels, hidden_channels),
            head_out: Conv3x3::zeros(hidden_channels, 1),
        }
    }

    /// One update: returns the new hidden state and the residual `Δd`.
    pub fn step(&self, hidden: &TokenGrid, input: &TokenGrid) -> Result<(TokenGrid, TokenGrid)> {
        if hidden.channels() != self.hidden_channels || input.channels() != self.input_channels {
            return Err(Error::Shape(format!(
                "GRU expects {} hidden and {} input channels, got {} and {}",
                self.hidden_channels,
                self.input_channels,
                hidden.channels(),
                input.channels()
            )));
        }
        let hx = TokenGrid::concat(&[hidden, input])?;
        let mut z = self.update.forward(&hx)?;
        z.data_mut().iter_mut().for_each(|v| *v = sigmoid(*v));
        let mut r = self.reset.forward(&hx)?;
        r.data_mut().iter_mut().for_each(|v| *v = sigmoid(*v));
        r.data_mut().iter_mut().zip(hidden.data()).for_each(|(r, h)| *r *= h);
        let mut cand = self.candidate.forward(&TokenGrid::concat(&[&r, input])?)?;
        cand.data_mut().iter_mut().for_each(|v| *v = v.tanh());
        let mut next = hidden.clone();
        next.data_mut()
            .iter_mut()
            .zip(z.data().iter().zip(cand.data()))
            .for_each(|(h, (z, c))| *h = (1.0 - z) * *h + z * c);
        let mut mid = self.head_hidden.forward(&next)?;
        mid.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
        let delta = self.head_out.forward(&mid)?;
        Ok((next, delta))
    }
}

/// Free-function form of [`GruCell::step`].
pub fn gru_step(cell: &GruCell, hidden: &TokenGrid, input: &TokenGrid) -> Result<(TokenGrid, TokenGrid)> {
    cell.step(hidden, input)
}
