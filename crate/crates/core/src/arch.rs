//! Crossbar controller semantics: control signalling, the row-at-a-time
//! programming protocol, cycle accounting and power/area bookkeeping.

use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use crate::analog::{CrossbarLayer, Sign};
use crate::device::{DeviceParams, MagState};
use crate::{Error, Matrix, Result};

/// Clock cycles a highly-parallel GPU needs for one binarized-MLP inference.
pub const GPU_CYCLES_PER_IMAGE: u64 = 100_000;
/// Average power of one sigmoidal neuron at VDD = 0.8 V, W.
pub const NEURON_POWER_W: f64 = 64e-6;
/// Layout area of one sigmoidal neuron, m².
pub const NEURON_AREA_M2: f64 = 0.02e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Level {
    Vdd,
    Gnd,
    HiZ,
    Vin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Operation {
    TrainPlus,
    TrainMinus,
    Inference,
}

impl Operation {
    pub const ALL: [Operation; 3] = [Operation::TrainPlus, Operation::TrainMinus, Operation::Inference];

    pub fn write(weight: Sign) -> Self {
        match weight {
            Sign::Plus => Operation::TrainPlus,
            Sign::Minus => Operation::TrainMinus,
        }
    }
}

/// Line levels of one crossbar column during an operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ControlSignals {
    pub wwl: Level,
    pub rwl: Level,
    pub bl: Level,
    pub sl: Level,
    pub input: Level,
}

impl ControlSignals {
    /// The operation these levels encode, if they form a legal combination.
    pub fn operation(&self) -> Option<Operation> {
        Operation::ALL.into_iter().find(|&op| signal_table(op) == *self)
    }
}

pub fn signal_table(op: Operation) -> ControlSignals {
    use Level::*;
    let (wwl, rwl, bl, sl, input) = match op {
        Operation::TrainPlus => (Vdd, Gnd, Vdd, Gnd, HiZ),
        Operation::TrainMinus => (Vdd, Gnd, Gnd, Vdd, HiZ),
        Operation::Inference => (Gnd, Vdd, HiZ, HiZ, Vin),
    };
    ControlSignals {
        wwl,
        rwl,
        bl,
        sl,
        input,
    }
}

/// Write-current direction through the heavy metals of a synapse pair.
/// BL high drives the `+` cell to P and the `−` cell to AP.
fn write_states(signals: &ControlSignals) -> Option<(MagState, MagState)> {
    if signals.wwl != Level::Vdd {
        return None;
    }
    match (signals.bl, signals.sl) {
        (Level::Vdd, Level::Gnd) => Some((MagState::Parallel, MagState::AntiParallel)),
        (Level::Gnd, Level::Vdd) => Some((MagState::AntiParallel, MagState::Parallel)),
        _ => None,
    }
}

/// Elapsed clock cycles, split by phase. Increments are atomic so a shared
/// pipeline can be used for concurrent inference.
#[derive(Debug, Default)]
pub struct CycleCounter {
    training: AtomicU64,
    inference: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CycleSnapshot {
    pub training_cycles: u64,
    pub inference_cycles: u64,
}

impl CycleCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn training_cycles(&self) -> u64 {
        self.training.load(Ordering::Relaxed)
    }

    pub fn inference_cycles(&self) -> u64 {
        self.inference.load(Ordering::Relaxed)
    }

    pub fn snapshot(&self) -> CycleSnapshot {
        CycleSnapshot {
            training_cycles: self.training_cycles(),
            inference_cycles: self.inference_cycles(),
        }
    }

    pub(crate) fn add_training(&self, n: u64) {
        self.training.fetch_add(n, Ordering::Relaxed);
    }

    pub(crate) fn add_inference(&self, n: u64) {
        self.inference.fetch_add(n, Ordering::Relaxed);
    }
}

impl Clone for CycleCounter {
    fn clone(&self) -> Self {
        Self {
            training: AtomicU64::new(self.training_cycles()),
            inference: AtomicU64::new(self.inference_cycles()),
        }
    }
}

fn to_signs(layer: &CrossbarLayer, weights: &Matrix, biases: &[f64]) -> Result<(Vec<Sign>, Vec<Sign>)> {
    if weights.rows() != layer.out_nodes() {
        return Err(Error::Dimension {
            expected: layer.out_nodes(),
            actual: weights.rows(),
            context: "weight rows",
        });
    }
    if weights.cols() != layer.in_nodes() {
        return Err(Error::Dimension {
            expected: layer.in_nodes(),
            actual: weights.cols(),
            context: "weight columns",
        });
    }
    if biases.len() != layer.out_nodes() {
        return Err(Error::Dimension {
            expected: layer.out_nodes(),
            actual: biases.len(),
            context: "bias length",
        });
    }
    let mut w = Vec::with_capacity(weights.rows() * weights.cols());
    for r in 0..weights.rows() {
        for (c, &value) in weights.row(r).iter().enumerate() {
            w.push(Sign::from_value(value).ok_or(Error::NonBinaryWeight { row: r, col: c, value })?);
        }
    }
    let b = biases
        .iter()
        .enumerate()
        .map(|(r, &value)| {
            Sign::from_value(value).ok_or(Error::NonBinaryWeight {
                row: r,
                col: layer.in_nodes(),
                value,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((w, b))
}

/// Writes binary weights and biases into a layer, one row per clock cycle.
///
/// Every entry is validated before any cell is touched. Each row activation
/// costs one training cycle even if the stored states already match.
pub fn program_layer(
    layer: &mut CrossbarLayer,
    weights: &Matrix,
    biases: &[f64],
    counter: &CycleCounter,
) -> Result<()> {
    let (w, b) = to_signs(layer, weights, biases)?;
    let cols = layer.in_nodes();
    for row in 0..layer.out_nodes() {
        for col in 0..cols {
            let signals = signal_table(Operation::write(w[row * cols + col]));
            let (plus, minus) = write_states(&signals).expect("write rows of the signal table drive a current");
            layer.synapse_mut(row, col).set(plus, minus);
        }
        let signals = signal_table(Operation::write(b[row]));
        let (plus, minus) = write_states(&signals).expect("write rows of the signal table drive a current");
        layer.bias_synapse_mut(row).set(plus, minus);
        counter.add_training(1);
    }
    // Neuron BL/SL at VDD/VSS during the same sweep fix the P/AP divider.
    for n in layer.neurons_mut() {
        n.reset_cells();
    }
    Ok(())
}

/// Reads stored states back into `±1` weight and bias values.
pub fn decode_layer(layer: &CrossbarLayer) -> (Matrix, Vec<f64>) {
    let sign = |s: Option<Sign>| s.expect("programmed synapse pairs hold opposite states").value();
    let weights = Matrix::from_fn(layer.out_nodes(), layer.in_nodes(), |r, c| {
        sign(layer.synapse(r, c).weight())
    });
    let biases = (0..layer.out_nodes())
        .map(|r| sign(layer.bias_synapse(r).weight()))
        .collect();
    (weights, biases)
}

/// Concatenated crossbar layers sharing one cycle counter.
#[derive(Debug, Clone)]
pub struct MlpPipeline {
    layers: Vec<CrossbarLayer>,
    counter: CycleCounter,
}

impl MlpPipeline {
    pub fn new(layers: Vec<CrossbarLayer>) -> Result<Self> {
        for pair in layers.windows(2) {
            if pair[0].out_nodes() != pair[1].in_nodes() {
                return Err(Error::Dimension {
                    expected: pair[0].out_nodes(),
                    actual: pair[1].in_nodes(),
                    context: "adjacent layer sizes",
                });
            }
        }
        Ok(Self {
            layers,
            counter: CycleCounter::new(),
        })
    }

    /// Fresh layers for `topology = [inputs, hidden.., outputs]`.
    pub fn build(device: DeviceParams, topology: &[usize], read_voltage: f64, nonideal: bool) -> Result<Self> {
        let layers = topology
            .windows(2)
            .map(|w| CrossbarLayer::new(device, w[0], w[1], read_voltage, nonideal))
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }

    pub fn layers(&self) -> &[CrossbarLayer] {
        &self.layers
    }

    pub fn counter(&self) -> &CycleCounter {
        &self.counter
    }

    pub fn topology(&self) -> Vec<usize> {
        let mut t: Vec<usize> = self.layers.first().map(|l| l.in_nodes()).into_iter().collect();
        t.extend(self.layers.iter().map(|l| l.out_nodes()));
        t
    }

    pub fn set_nonideal_tmr_bias(&mut self, on: bool) {
        for l in &mut self.layers {
            l.set_nonideal_tmr_bias(on);
        }
    }

    /// Programs layer `index`; see [`program_layer`].
    pub fn program(&mut self, index: usize, weights: &Matrix, biases: &[f64]) -> Result<()> {
        let len = self.layers.len();
        let layer = self.layers.get_mut(index).ok_or(Error::Dimension {
            expected: len,
            actual: index,
            context: "layer index",
        })?;
        program_layer(layer, weights, biases, &self.counter)
    }

    fn propagate(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (first, rest) = self
            .layers
            .split_first()
            .ok_or(Error::Config("pipeline has no layers"))?;
        let mut act = first.forward(x)?;
        for layer in rest {
            act = layer.forward(&act)?;
        }
        Ok(act)
    }

    /// One end-to-end inference. The whole concatenated array settles in a
    /// single clock cycle regardless of depth.
    pub fn infer(&self, x: &[f64]) -> Result<(Vec<f64>, u64)> {
        let out = self.propagate(x)?;
        self.counter.add_inference(1);
        Ok((out, 1))
    }

    /// Row-per-sample inference; charges one cycle per sample.
    pub fn infer_batch(&self, inputs: &Matrix) -> Result<(Matrix, u64)> {
        let n = inputs.rows();
        let width = self.layers.last().map_or(0, |l| l.out_nodes());
        let mut out = Vec::with_capacity(n * width);
        for r in 0..n {
            out.extend(self.propagate(inputs.row(r))?);
        }
        self.counter.add_inference(n as u64);
        Ok((Matrix::from_vec(n, width, out)?, n as u64))
    }
}

pub fn pipeline_infer(p: &MlpPipeline, x: &[f64]) -> Result<(Vec<f64>, u64)> {
    p.infer(x)
}

pub fn gpu_cycle_estimate(batch: u64, cycles_per_image: u64) -> u64 {
    batch * cycles_per_image
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpeedupReport {
    pub crossbar_cycles: u64,
    pub gpu_cycles: u64,
    pub speedup: f64,
}

impl SpeedupReport {
    pub fn new(crossbar_cycles: u64, gpu_cycles_per_image: u64) -> Self {
        let gpu_cycles = gpu_cycle_estimate(crossbar_cycles, gpu_cycles_per_image);
        let speedup = if crossbar_cycles == 0 {
            0.0
        } else {
            gpu_cycles as f64 / crossbar_cycles as f64
        };
        Self {
            crossbar_cycles,
            gpu_cycles,
            speedup,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PowerAreaReport {
    pub neuron_count: usize,
    pub per_neuron_power: f64,
    pub per_neuron_area: f64,
    pub total_power: f64,
    pub total_area: f64,
}

impl PowerAreaReport {
    pub fn for_neurons(neuron_count: usize, per_neuron_power: f64, per_neuron_area: f64) -> Self {
        Self {
            neuron_count,
            per_neuron_power,
            per_neuron_area,
            total_power: neuron_count as f64 * per_neuron_power,
            total_area: neuron_count as f64 * per_neuron_area,
        }
    }
}

/// Neuron bookkeeping only; synapse cells sit above the transistors.
pub fn power_area_report(p: &MlpPipeline, per_neuron_power: f64, per_neuron_area: f64) -> PowerAreaReport {
    let count = p.layers().iter().map(|l| l.out_nodes()).sum();
    PowerAreaReport::for_neurons(count, per_neuron_power, per_neuron_area)
}
