//! Fully-connected sigmoid(−y) networks: forward records, loss and the
//! straight-through backward pass.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::math::{logistic, softplus};
use crate::matrix::dot;
use crate::{Error, Matrix, Result};

/// Weights are `out × in`, row-major.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Layer {
    pub weights: Matrix,
    pub biases: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weights: Matrix::zeros(outputs, inputs),
            biases: vec![0.0; outputs],
        }
    }

    pub fn in_nodes(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_nodes(&self) -> usize {
        self.weights.rows()
    }

    pub(crate) fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.as_mut_slice().iter_mut().chain(self.biases.iter_mut())
    }

    pub(crate) fn values(&self) -> impl Iterator<Item = &f64> {
        self.weights.as_slice().iter().chain(self.biases.iter())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Network {
    layers: Vec<Layer>,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        for l in &layers {
            if l.biases.len() != l.out_nodes() {
                return Err(Error::Dimension {
                    expected: l.out_nodes(),
                    actual: l.biases.len(),
                    context: "bias length",
                });
            }
        }
        for pair in layers.windows(2) {
            if pair[0].out_nodes() != pair[1].in_nodes() {
                return Err(Error::Dimension {
                    expected: pair[0].out_nodes(),
                    actual: pair[1].in_nodes(),
                    context: "adjacent layer sizes",
                });
            }
        }
        Ok(Self { layers })
    }

    pub fn zeros(topology: &[usize]) -> Self {
        Self {
            layers: topology.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
        }
    }

    /// Every parameter drawn uniformly from `[-range, range]`.
    pub fn uniform<R: Rng + ?Sized>(topology: &[usize], range: f64, rng: &mut R) -> Self {
        let mut net = Self::zeros(topology);
        for l in &mut net.layers {
            for v in l.values_mut() {
                *v = rng.gen_range(-range..=range);
            }
        }
        net
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn topology(&self) -> Vec<usize> {
        let mut t: Vec<usize> = self.layers.first().map(|l| l.in_nodes()).into_iter().collect();
        t.extend(self.layers.iter().map(|l| l.out_nodes()));
        t
    }

    /// Same layer shapes.
    pub fn same_shape(&self, other: &Network) -> bool {
        self.topology() == other.topology()
    }

    pub fn map_values(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        let mut out = self.clone();
        for l in &mut out.layers {
            for v in l.values_mut() {
                *v = f(*v);
            }
        }
        out
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.values())
    }

    pub(crate) fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.values_mut())
    }
}

impl AsRef<Network> for Network {
    fn as_ref(&self) -> &Network {
        self
    }
}

/// Pre-activation and activation of one layer for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerRecord {
    pub y: Vec<f64>,
    pub o: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchRecord {
    pub y: Matrix,
    pub o: Matrix,
}

fn check_input_len(net: &Network, len: usize) -> Result<()> {
    let expected = net.layers.first().map_or(0, |l| l.in_nodes());
    if len != expected || net.layers.is_empty() {
        return Err(Error::Dimension {
            expected,
            actual: len,
            context: "network input",
        });
    }
    Ok(())
}

/// `y = Wx + b`, `o = logistic(−y)` for each layer in turn.
pub fn forward(net: &Network, x: &[f64]) -> Result<Vec<LayerRecord>> {
    check_input_len(net, x.len())?;
    let mut records: Vec<LayerRecord> = Vec::with_capacity(net.layers.len());
    for layer in &net.layers {
        let input = records.last().map_or(x, |r| r.o.as_slice());
        let y: Vec<f64> = (0..layer.out_nodes())
            .map(|j| dot(layer.weights.row(j), input) + layer.biases[j])
            .collect();
        let o = y.iter().map(|&v| logistic(-v)).collect();
        records.push(LayerRecord { y, o });
    }
    Ok(records)
}

/// Final-layer activations.
pub fn predict(net: &Network, x: &[f64]) -> Result<Vec<f64>> {
    Ok(forward(net, x)?.pop().map(|r| r.o).unwrap_or_default())
}

pub fn forward_batch(net: &Network, inputs: &Matrix) -> Result<Vec<BatchRecord>> {
    check_input_len(net, inputs.cols())?;
    let n = inputs.rows();
    let mut records: Vec<BatchRecord> = Vec::with_capacity(net.layers.len());
    for layer in &net.layers {
        let input = records.last().map_or(inputs, |r| &r.o);
        let mut y = Matrix::zeros(n, layer.out_nodes());
        for b in 0..n {
            let xb = input.row(b);
            for (j, yj) in y.row_mut(b).iter_mut().enumerate() {
                *yj = dot(layer.weights.row(j), xb) + layer.biases[j];
            }
        }
        let mut o = y.clone();
        for v in o.as_mut_slice() {
            *v = logistic(-*v);
        }
        records.push(BatchRecord { y, o });
    }
    Ok(records)
}

/// Summed per-class binary cross-entropy. Saturated probabilities are
/// clamped to the nearest representable interior value so the result stays
/// finite.
pub fn loss(o: &[f64], target: &[f64]) -> f64 {
    const HI: f64 = 1.0 - f64::EPSILON / 2.0;
    o.iter()
        .zip(target)
        .map(|(&o, &t)| {
            let o = o.clamp(f64::MIN_POSITIVE, HI);
            -(t * libm::log(o) + (1.0 - t) * libm::log(1.0 - o))
        })
        .sum()
}

/// [`loss`] evaluated from pre-activations, exact even where `o` would
/// round to 0 or 1: `ln σ(−y) = −softplus(y)`, `ln(1 − σ(−y)) = −softplus(−y)`.
pub fn loss_from_preactivation(y: &[f64], target: &[f64]) -> f64 {
    y.iter()
        .zip(target)
        .map(|(&y, &t)| t * softplus(y) + (1.0 - t) * softplus(-y))
        .sum()
}

/// Gradient container; same shapes as the network.
pub type Gradients = Network;

/// Gradients of the batch-mean loss with respect to the parameters used in
/// the forward pass.
///
/// With `o = σ(−y)` and summed binary cross-entropy, `∂L/∂y = t − o` at the
/// output; hidden layers pick up `dσ(−y)/dy = −o(1 − o)`. When `net` is a
/// binarized student, the result is applied unchanged to the real-valued
/// teacher (identity straight-through estimator).
pub fn backward(net: &Network, inputs: &Matrix, records: &[BatchRecord], targets: &Matrix) -> Result<Gradients> {
    let nl = net.layers.len();
    if records.len() != nl {
        return Err(Error::Dimension {
            expected: nl,
            actual: records.len(),
            context: "forward records",
        });
    }
    let n = inputs.rows();
    let last = records.last().ok_or(Error::Config("network has no layers"))?;
    if targets.rows() != n || targets.cols() != last.o.cols() || last.o.rows() != n {
        return Err(Error::Dimension {
            expected: n * last.o.cols(),
            actual: targets.rows() * targets.cols(),
            context: "targets",
        });
    }
    let scale = if n == 0 { 0.0 } else { 1.0 / n as f64 };

    let mut delta = Matrix::zeros(n, last.o.cols());
    for ((d, &t), &o) in delta
        .as_mut_slice()
        .iter_mut()
        .zip(targets.as_slice())
        .zip(last.o.as_slice())
    {
        *d = (t - o) * scale;
    }

    let mut grads = Network::zeros(&net.topology());
    for l in (0..nl).rev() {
        let layer = &net.layers[l];
        let input = if l == 0 { inputs } else { &records[l - 1].o };
        let g = &mut grads.layers[l];
        for b in 0..n {
            let xb = input.row(b);
            for (j, &dj) in delta.row(b).iter().enumerate() {
                if dj != 0.0 {
                    for (gw, &xi) in g.weights.row_mut(j).iter_mut().zip(xb) {
                        *gw += dj * xi;
                    }
                }
                g.biases[j] += dj;
            }
        }
        if l > 0 {
            let mut prev = Matrix::zeros(n, layer.in_nodes());
            for b in 0..n {
                let a = input.row(b);
                let out = prev.row_mut(b);
                for (j, &dj) in delta.row(b).iter().enumerate() {
                    for (p, &w) in out.iter_mut().zip(layer.weights.row(j)) {
                        *p += dj * w;
                    }
                }
                for (p, &ai) in out.iter_mut().zip(a) {
                    *p *= -ai * (1.0 - ai);
                }
            }
            delta = prev;
        }
    }
    Ok(grads)
}

/// Mean [`loss`] of a network over a batch, for finite-difference checks.
pub fn batch_loss(net: &Network, inputs: &Matrix, targets: &Matrix) -> Result<f64> {
    let records = forward_batch(net, inputs)?;
    let last = records.last().ok_or(Error::Config("network has no layers"))?;
    let n = inputs.rows();
    let total: f64 = (0..n)
        .map(|b| loss_from_preactivation(last.y.row(b), targets.row(b)))
        .sum();
    Ok(if n == 0 { 0.0 } else { total / n as f64 })
}
