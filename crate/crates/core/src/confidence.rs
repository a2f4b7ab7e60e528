//! Frame confidence: the two-layer convolutional head, its ground-truth
//! targets and L1 loss, analytic gradients, a plain gradient-descent trainer
//! and a training-free photometric proxy.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Conv3x3, TokenGrid};
use crate::raster::FloatRaster;
use crate::seed::{rng_for, tags};

pub const DEFAULT_HIDDEN: usize = 16;
pub const DEFAULT_SIGMA: f64 = 5.0;
pub const DEFAULT_GAMMA: f64 = 0.9;
pub const DEFAULT_PROXY_SIGMA: f64 = 0.1;

const HEAD_MAGIC: &[u8; 4] = b"PPMH";
const HEAD_VERSION: u32 = 1;

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `conv3×3 → tanh → conv3×3 → sigmoid`, mapping `C`-channel value
/// embeddings to a one-channel confidence map in `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceHead {
    pub conv1: Conv3x3,
    pub conv2: Conv3x3,
}

/// Parameter gradients, laid out like the head.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGradients {
    pub conv1_weights: Vec<f64>,
    pub conv1_bias: Vec<f64>,
    pub conv2_weights: Vec<f64>,
    pub conv2_bias: Vec<f64>,
}

impl HeadGradients {
    pub fn flatten(&self) -> Vec<f64> {
        [
            &self.conv1_weights,
            &self.conv1_bias,
            &self.conv2_weights,
            &self.conv2_bias,
        ]
        .into_iter()
        .flat_map(|v| v.iter().copied())
        .collect()
    }
}

struct Activations {
    hidden: TokenGrid,
    output: TokenGrid,
}

impl ConfidenceHead {
    pub fn seeded(channels: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = rng_for(seed, tags::CONFIDENCE_HEAD);
        Self {
            conv1: Conv3x3::seeded(channels, hidden, 1.0, &mut rng),
            conv2: Conv3x3::seeded(hidden, 1, 1.0, &mut rng),
        }
    }

    pub fn zeros(channels: usize, hidden: usize) -> Self {
        Self {
            conv1: Conv3x3::zeros(channels, hidden),
            conv2: Conv3x3::zeros(hidden, 1),
        }
    }

    pub fn channels(&self) -> usize {
        self.conv1.inputs
    }

    pub fn hidden(&self) -> usize {
        self.conv1.outputs
    }

    fn run(&self, value: &TokenGrid) -> Result<Activations> {
        let mut hidden = self.conv1.forward(value)?;
        hidden.data_mut().iter_mut().for_each(|v| *v = v.tanh());
        let mut output = self.conv2.forward(&hidden)?;
        output.data_mut().iter_mut().for_each(|v| *v = sigmoid(*v));
        Ok(Activations { hidden, output })
    }

    /// Confidence map `u` for one frame's value embedding.
    pub fn forward(&self, value: &TokenGrid) -> Result<TokenGrid> {
        Ok(self.run(value)?.output)
    }

    /// Flat parameter vector: conv1 weights, conv1 bias, conv2 weights, conv2 bias.
    pub fn parameters(&self) -> Vec<f64> {
        [
            &self.conv1.weights,
            &self.conv1.bias,
            &self.conv2.weights,
            &self.conv2.bias,
        ]
        .into_iter()
        .flat_map(|v| v.iter().copied())
        .collect()
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        let total = self.conv1.parameter_count() + self.conv2.parameter_count();
        if params.len() != total {
            return Err(Error::Shape(format!(
                "head has {total} parameters, got {}",
                params.len()
            )));
        }
        let mut rest = params;
        for dst in [
            &mut self.conv1.weights,
            &mut self.conv1.bias,
            &mut self.conv2.weights,
            &mut self.conv2.bias,
        ] {
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 8 * self.parameters().len());
        out.extend_from_slice(HEAD_MAGIC);
        out.extend_from_slice(&HEAD_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.channels() as u32).to_le_bytes());
        out.extend_from_slice(&(self.hidden() as u32).to_le_bytes());
        for p in self.parameters() {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..4] != HEAD_MAGIC {
            return Err(Error::Missing("confidence head file has no PPMH header".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
        if word(4) != HEAD_VERSION {
            return Err(Error::Missing(format!(
                "unsupported confidence head version {}",
                word(4)
            )));
        }
        let (channels, hidden) = (word(8) as usize, word(12) as usize);
        let mut head = Self::zeros(channels, hidden);
        let payload = &bytes[16..];
        let count = head.conv1.parameter_count() + head.conv2.parameter_count();
        if payload.len() != count * 8 {
            return Err(Error::Missing(format!(
                "confidence head payload has {} bytes, expected {}",
                payload.len(),
                count * 8
            )));
        }
        let params: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("confidence head parameter".into()));
        }
        head.set_parameters(&params)?;
        Ok(head)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| e.context(path.display().to_string()))
    }
}

/// Spatial mean of a confidence map: the frame-level score `S^c`.
pub fn frame_confidence(map: &TokenGrid) -> f64 {
    map.mean()
}

fn check_maps(a: &TokenGrid, b: &TokenGrid) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!("maps {:?} and {:?} differ", a.shape(), b.shape())));
    }
    Ok(())
}

/// `û = exp(-|d - d̂| / σ)`, elementwise.
pub fn gt_confidence(predicted: &TokenGrid, truth: &TokenGrid, sigma: f64) -> Result<TokenGrid> {
    check_maps(predicted, truth)?;
    let (h, w, c) = predicted.shape();
    let data = predicted
        .data()
        .iter()
        .zip(truth.data())
        .map(|(d, g)| (-((d - g) / sigma).abs()).exp())
        .collect();
    TokenGrid::new(h, w, c, data)
}

/// Per-map mean absolute difference.
pub fn mean_abs_diff(a: &TokenGrid, b: &TokenGrid) -> Result<f64> {
    check_maps(a, b)?;
    let n = a.data().len().max(1) as f64;
    Ok(a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum::<f64>() / n)
}

/// `γ^{N-n}` for `n = 1..=N`.
pub fn iteration_weights(iterations: usize, gamma: f64) -> Vec<f64> {
    (1..=iterations).map(|n| gamma.powi((iterations - n) as i32)).collect()
}

/// `Σ_t Σ_n γ^{N-n} · mean|u_t^n - û_t^n|`, with `maps[t][n]` and
/// `targets[t][n]`.
pub fn confidence_loss(maps: &[Vec<TokenGrid>], targets: &[Vec<TokenGrid>], gamma: f64) -> Result<f64> {
    if maps.len() != targets.len() {
        return Err(Error::Shape(format!(
            "{} frames of maps but {} of targets",
            maps.len(),
            targets.len()
        )));
    }
    let mut total = 0.0;
    for (t, (u, uh)) in maps.iter().zip(targets).enumerate() {
        if u.len() != uh.len() {
            return Err(Error::Shape(format!(
                "frame {t}: {} iterations vs {} targets",
                u.len(),
                uh.len()
            )));
        }
        for (w, (a, b)) in iteration_weights(u.len(), gamma).into_iter().zip(u.iter().zip(uh)) {
            total += w * mean_abs_diff(a, b)?;
        }
    }
    Ok(total)
}

/// Loss `mean|u - û|` for one frame and its analytic parameter gradients.
/// The L1 subgradient at zero is taken as zero.
pub fn confidence_grad(head: &ConfidenceHead, value: &TokenGrid, target: &TokenGrid) -> Result<(f64, HeadGradients)> {
    let act = head.run(value)?;
    check_maps(&act.output, target)?;
    let n = act.output.data().len() as f64;
    let (h, w, _) = act.output.shape();
    let mut loss = 0.0;
    let mut grad_logit = TokenGrid::zeros(h, w, 1);
    for ((g, &u), &t) in grad_logit
        .data_mut()
        .iter_mut()
        .zip(act.output.data())
        .zip(target.data())
    {
        loss += (u - t).abs();
        let sign = if u > t {
            1.0
        } else if u < t {
            -1.0
        } else {
            0.0
        };
        *g = sign * u * (1.0 - u) / n;
    }
    let g2 = head.conv2.backward(&act.hidden, &grad_logit)?;
    let mut grad_pre = g2.input;
    grad_pre
        .data_mut()
        .iter_mut()
        .zip(act.hidden.data())
        .for_each(|(g, &a)| *g *= 1.0 - a * a);
    let g1 = head.conv1.backward(value, &grad_pre)?;
    Ok((
        loss / n,
        HeadGradients {
            conv1_weights: g1.weights,
            conv1_bias: g1.bias,
            conv2_weights: g2.weights,
            conv2_bias: g2.bias,
        },
    ))
}

/// Mean loss and mean gradient over a dataset of `(value, target)` pairs.
pub fn dataset_grad(head: &ConfidenceHead, dataset: &[(TokenGrid, TokenGrid)]) -> Result<(f64, Vec<f64>)> {
    if dataset.is_empty() {
        return Err(Error::Missing("empty confidence dataset".into()));
    }
    let mut loss = 0.0;
    let mut grad = vec![0.0; head.parameters().len()];
    for (v, t) in dataset {
        let (l, g) = confidence_grad(head, v, t)?;
        loss += l;
        grad.iter_mut().zip(g.flatten()).for_each(|(a, b)| *a += b);
    }
    let n = dataset.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((loss / n, grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub head: ConfidenceHead,
    /// Dataset loss before each step, then once more after the last.
    pub losses: Vec<f64>,
}

impl TrainReport {
    pub fn initial_loss(&self) -> f64 {
        self.losses[0]
    }

    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("at least one loss")
    }
}

/// Plain full-batch gradient descent on the mean per-frame L1 loss.
pub fn train_head(
    head: &ConfidenceHead,
    dataset: &[(TokenGrid, TokenGrid)],
    steps: usize,
    learning_rate: f64,
) -> Result<TrainReport> {
    let mut head = head.clone();
    let mut params = head.parameters();
    let mut losses = Vec::with_capacity(steps + 1);
    for step in 0..=steps {
        let (loss, grad) = dataset_grad(&head, dataset)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("confidence loss at step {step}")));
        }
        losses.push(loss);
        if step == steps {
            break;
        }
        params.iter_mut().zip(&grad).for_each(|(p, g)| *p -= learning_rate * g);
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite(format!("confidence head parameters at step {step}")));
        }
        head.set_parameters(&params)?;
    }
    Ok(TrainReport { head, losses })
}

/// `exp(-|I_L(x, y) - I_R(x - d, y)| / σ_p)` at full resolution, with linear
/// interpolation along the row and zero where `x - d` leaves the image.
pub fn proxy_confidence(
    disparity: &FloatRaster,
    left: &FloatRaster,
    right: &FloatRaster,
    sigma_p: f64,
) -> Result<FloatRaster> {
    let (w, h) = (left.width(), left.height());
    if right.width() != w || right.height() != h || disparity.width() != w || disparity.height() != h {
        return Err(Error::Shape("proxy confidence inputs must share one resolution".into()));
    }
    FloatRaster::from_fn(w, h, |x, y| {
        let xs = x as f64 - disparity.get(x, y, 0) as f64;
        if !(0.0..=(w - 1) as f64).contains(&xs) {
            return 0.0;
        }
        let x0 = xs.floor() as usize;
        let frac = xs - x0 as f64;
        let r0 = right.luminance(x0, y) as f64;
        let sample = if frac == 0.0 {
            r0
        } else {
            (1.0 - frac) * r0 + frac * right.luminance(x0 + 1, y) as f64
        };
        (-(left.luminance(x, y) as f64 - sample).abs() / sigma_p).exp() as f32
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zero_head_is_half() {
        let head = ConfidenceHead::zeros(4, 3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let u = head.forward(&TokenGrid::random(5, 5, 4, &mut rng)).unwrap();
        assert!(u.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn saturated_bias() {
        let mut head = ConfidenceHead::zeros(4, 3);
        head.conv2.bias[0] = 20.0;
        let u = head.forward(&TokenGrid::filled(3, 3, 4, 1.0)).unwrap();
        assert!(u.data().iter().all(|&v| (1.0 - v) < 1e-8));
        assert!(head.forward(&TokenGrid::zeros(3, 3, 5)).is_err());
    }

    #[test]
    fn head_matches_straight_loop() {
        let head = ConfidenceHead::seeded(3, 4, 17);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let v = TokenGrid::random(6, 5, 3, &mut rng);
        let u = head.forward(&v).unwrap();
        let px = |g: &TokenGrid, y: isize, x: isize, c: usize| g.get_clamped(y, x, c);
        let hidden = TokenGrid::from_fn(6, 5, 4, |y, x, o| {
            let mut acc = head.conv1.bias[o];
            for i in 0..3 {
                for ky in 0..3 {
                    for kx in 0..3 {
                        acc += head.conv1.weights[((o * 3 + i) * 3 + ky) * 3 + kx]
                            * px(&v, y as isize + ky as isize - 1, x as isize + kx as isize - 1, i);
                    }
                }
            }
            acc.tanh()
        });
        for y in 0..6 {
            for x in 0..5 {
                let mut acc = head.conv2.bias[0];
                for i in 0..4 {
                    for ky in 0..3 {
                        for kx in 0..3 {
                            acc += head.conv2.weights[(i * 3 + ky) * 3 + kx]
                                * px(&hidden, y as isize + ky as isize - 1, x as isize + kx as isize - 1, i);
                        }
                    }
                }
                assert!((u.get(y, x, 0) - 1.0 / (1.0 + (-acc).exp())).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn gt_confidence_values() {
        let d = TokenGrid::new(1, 3, 1, vec![2.0, 7.0, 100.0]).unwrap();
        let g = TokenGrid::new(1, 3, 1, vec![2.0, 2.0, 2.0]).unwrap();
        let u = gt_confidence(&d, &g, 5.0).unwrap();
        assert_eq!(u.get(0, 0, 0), 1.0);
        assert!((u.get(0, 1, 0) - 0.367879).abs() < 1e-6);
        assert!(u.get(0, 2, 0) < 1e-8);
        assert!(gt_confidence(&d, &TokenGrid::zeros(1, 2, 1), 5.0).is_err());
    }

    #[test]
    fn loss_geometric_series() {
        let one = TokenGrid::filled(2, 2, 1, 1.0);
        let zero = TokenGrid::zeros(2, 2, 1);
        let loss = confidence_loss(&[vec![one.clone(); 10]], &[vec![zero.clone(); 10]], 0.9).unwrap();
        let oracle: f64 = (0..10).map(|k| 0.9f64.powi(k)).sum();
        assert!((loss - oracle).abs() < 1e-12);
        assert!((loss - 6.513216).abs() < 1e-6);
        let half = TokenGrid::filled(2, 2, 1, 0.5);
        let l_half = confidence_loss(&[vec![half; 10]], &[vec![zero.clone(); 10]], 0.9).unwrap();
        assert!((2.0 * l_half - loss).abs() < 1e-12);
        assert_eq!(
            confidence_loss(&[vec![one.clone(); 3]], &[vec![one.clone(); 3]], 0.9).unwrap(),
            0.0
        );
        assert!(confidence_loss(&[vec![one.clone(); 3]], &[vec![one; 2]], 0.9).is_err());
        let w = iteration_weights(10, 0.9);
        assert!(w.windows(2).all(|p| p[0] < p[1]));
        assert_eq!(w[9], 1.0);
    }

    #[test]
    fn zero_gap_has_zero_gradient() {
        let head = ConfidenceHead::seeded(3, 4, 2);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let v = TokenGrid::random(4, 4, 3, &mut rng);
        let u = head.forward(&v).unwrap();
        let (loss, g) = confidence_grad(&head, &v, &u).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.flatten().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn final_bias_gradient_closed_form() {
        let head = ConfidenceHead::seeded(3, 4, 5);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let v = TokenGrid::random(4, 4, 3, &mut rng);
        let u = head.forward(&v).unwrap();
        let target = TokenGrid::from_fn(4, 4, 1, |y, x, _| {
            let base = u.get(y, x, 0);
            if (x + y) % 2 == 0 {
                base + 0.1
            } else {
                base - 0.1
            }
        });
        let (_, g) = confidence_grad(&head, &v, &target).unwrap();
        let expected: f64 = u
            .data()
            .iter()
            .zip(target.data())
            .map(|(&a, &b)| (a - b).signum() * a * (1.0 - a))
            .sum::<f64>()
            / 16.0;
        assert!((g.conv2_bias[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn training_edge_cases() {
        let head = ConfidenceHead::seeded(3, 4, 8);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let v = TokenGrid::random(4, 4, 3, &mut rng);
        let t = TokenGrid::filled(4, 4, 1, 0.9);
        let data = vec![(v.clone(), t)];
        let frozen = train_head(&head, &data, 5, 0.0).unwrap();
        assert_eq!(frozen.head, head);
        let at_target = vec![(v.clone(), head.forward(&v).unwrap())];
        assert_eq!(train_head(&head, &at_target, 1, 1.0).unwrap().head, head);
        assert!(train_head(&head, &[], 1, 0.1).is_err());
    }

    #[test]
    fn head_file_round_trip() {
        let head = ConfidenceHead::seeded(6, 5, 3);
        let bytes = head.to_bytes();
        assert_eq!(&bytes[..4], b"PPMH");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 6);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 5);
        assert_eq!(ConfidenceHead::from_bytes(&bytes).unwrap(), head);
        assert!(ConfidenceHead::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn proxy_oracle_and_bounds() {
        let left = FloatRaster::from_fn(8, 2, |x, y| ((x * 3 + y) % 5) as f32 * 0.2).unwrap();
        let right = FloatRaster::from_fn(8, 2, |x, y| ((x * 7 + y) % 4) as f32 * 0.25).unwrap();
        let disp = FloatRaster::from_fn(8, 2, |x, _| x as f32 * 0.3).unwrap();
        let p = proxy_confidence(&disp, &left, &right, 0.1).unwrap();
        for y in 0..2 {
            for x in 0..8 {
                // straight-loop warp
                let xs = x as f64 - x as f64 * 0.3f32 as f64;
                let i0 = xs.floor() as usize;
                let f = xs - i0 as f64;
                let r = if f == 0.0 {
                    right.get(i0, y, 0) as f64
                } else {
                    right.get(i0, y, 0) as f64 * (1.0 - f) + right.get(i0 + 1, y, 0) as f64 * f
                };
                let e = (-(left.get(x, y, 0) as f64 - r).abs() / 0.1).exp();
                assert!((p.get(x, y, 0) as f64 - e).abs() < 1e-6);
            }
        }
        let far = FloatRaster::filled(8, 2, 1, 20.0);
        assert!(proxy_confidence(&far, &left, &right, 0.1)
            .unwrap()
            .data()
            .iter()
            .all(|&v| v == 0.0));
    }
}
