//! Circuit-behavioural models: the differential binary synapse, the 2T-2R
//! sigmoidal neuron and a full crossbar layer.
//!
//! Voltages are absolute (V). Activations leaving a layer are normalized to
//! `(0, 1)` and re-applied to the next layer as `x · read_voltage_full_scale`.
//! The differential amplifier output is referenced to the inverter midpoint,
//! so a zero net row current lands the neuron on its symmetry point.

use alloc::vec;
use alloc::vec::Vec;

use crate::device::{conductance, DeviceParams, MagState, MtjCell};
use crate::math::logistic;
use crate::{Error, Matrix, Result};

pub const DEFAULT_VDD: f64 = 0.8;
pub const DEFAULT_VSS: f64 = 0.0;
/// Full-scale read voltage applied for an input of 1.0.
pub const DEFAULT_READ_VOLTAGE: f64 = 0.1;

/// A binarized weight value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    #[inline]
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    /// Exact `±1.0` only.
    pub fn from_value(v: f64) -> Option<Self> {
        if v == 1.0 {
            Some(Sign::Plus)
        } else if v == -1.0 {
            Some(Sign::Minus)
        } else {
            None
        }
    }
}

/// Two cells feeding a differential amplifier; `+1 ⇒ (P, AP)`, `−1 ⇒ (AP, P)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynapsePair {
    pub(crate) cell_plus: MtjCell,
    pub(crate) cell_minus: MtjCell,
}

impl SynapsePair {
    pub fn programmed(params: DeviceParams, weight: Sign) -> Self {
        let (plus, minus) = match weight {
            Sign::Plus => (MagState::Parallel, MagState::AntiParallel),
            Sign::Minus => (MagState::AntiParallel, MagState::Parallel),
        };
        Self {
            cell_plus: MtjCell::new(params, plus),
            cell_minus: MtjCell::new(params, minus),
        }
    }

    /// Arbitrary cell pair, including the degenerate same-state case that a
    /// programmed crossbar never holds.
    pub fn from_cells(cell_plus: MtjCell, cell_minus: MtjCell) -> Self {
        Self { cell_plus, cell_minus }
    }

    pub fn cell_plus(&self) -> &MtjCell {
        &self.cell_plus
    }

    pub fn cell_minus(&self) -> &MtjCell {
        &self.cell_minus
    }

    /// Decoded weight; `None` when both cells share a state.
    pub fn weight(&self) -> Option<Sign> {
        match (self.cell_plus.state, self.cell_minus.state) {
            (MagState::Parallel, MagState::AntiParallel) => Some(Sign::Plus),
            (MagState::AntiParallel, MagState::Parallel) => Some(Sign::Minus),
            _ => None,
        }
    }

    /// `G⁺ − G⁻` at the given bias.
    pub fn delta_g(&self, v_bias: f64) -> f64 {
        conductance(&self.cell_plus, v_bias) - conductance(&self.cell_minus, v_bias)
    }

    pub(crate) fn set(&mut self, plus: MagState, minus: MagState) {
        self.cell_plus.state = plus;
        self.cell_minus.state = minus;
    }
}

/// Signed differential read current `x·v_full·(G⁺ − G⁻)` of one synapse.
///
/// With `nonideal` set the conductances are evaluated at the cell's terminal
/// voltage `x·v_full`; otherwise at zero bias.
pub fn synapse_current(pair: &SynapsePair, x: f64, v_full: f64, nonideal: bool) -> Result<f64> {
    check_input(x)?;
    let v = x * v_full;
    let v_bias = if nonideal { v } else { 0.0 };
    Ok(v * (conductance(&pair.cell_plus, v_bias) - conductance(&pair.cell_minus, v_bias)))
}

#[inline]
fn check_input(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain {
            value: x,
            domain: "input in [0, 1]",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffAmpParams {
    transimpedance_gain: f64,
}

impl DiffAmpParams {
    pub fn new(transimpedance_gain: f64) -> Result<Self> {
        if !(transimpedance_gain > 0.0 && transimpedance_gain.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "transimpedance_gain",
                value: transimpedance_gain,
            });
        }
        Ok(Self { transimpedance_gain })
    }

    /// V/A.
    pub fn transimpedance_gain(&self) -> f64 {
        self.transimpedance_gain
    }
}

/// Inverter loaded by a P/AP SOT-MRAM divider.
///
/// `inverter_gain` is the composite small-signal gain seen from the neuron
/// input, i.e. after the divider. The bare inverter gain is recovered by
/// dividing out [`NeuronCircuit::divider_factor`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronCircuit {
    cell_p: MtjCell,
    cell_ap: MtjCell,
    vdd: f64,
    vss: f64,
    inverter_midpoint: f64,
    inverter_gain: f64,
}

impl NeuronCircuit {
    pub fn new(params: DeviceParams, vdd: f64, vss: f64, inverter_midpoint: f64, inverter_gain: f64) -> Result<Self> {
        if !(vss < inverter_midpoint && inverter_midpoint < vdd) {
            return Err(Error::InvalidParameter {
                name: "inverter_midpoint",
                value: inverter_midpoint,
            });
        }
        if !(inverter_gain > 0.0 && inverter_gain.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "inverter_gain",
                value: inverter_gain,
            });
        }
        Ok(Self {
            cell_p: MtjCell::new(params, MagState::Parallel),
            cell_ap: MtjCell::new(params, MagState::AntiParallel),
            vdd,
            vss,
            inverter_midpoint,
            inverter_gain,
        })
    }

    /// VDD = 0.8 V, VSS = 0, midpoint VDD/2, gain pre-set to the calibrated
    /// value for the default read voltage.
    pub fn with_defaults(params: DeviceParams) -> Self {
        Self::new(
            params,
            DEFAULT_VDD,
            DEFAULT_VSS,
            DEFAULT_VDD / 2.0,
            DEFAULT_VDD / DEFAULT_READ_VOLTAGE,
        )
        .expect("default neuron constants are valid")
    }

    pub fn vdd(&self) -> f64 {
        self.vdd
    }

    pub fn vss(&self) -> f64 {
        self.vss
    }

    pub fn inverter_midpoint(&self) -> f64 {
        self.inverter_midpoint
    }

    pub fn inverter_gain(&self) -> f64 {
        self.inverter_gain
    }

    pub fn cell_p(&self) -> &MtjCell {
        &self.cell_p
    }

    pub fn cell_ap(&self) -> &MtjCell {
        &self.cell_ap
    }

    /// Fraction of an input swing that reaches the inverter gate,
    /// `G_P / (G_P + G_AP)` at zero bias.
    pub fn divider_factor(&self) -> f64 {
        let gp = conductance(&self.cell_p, 0.0);
        let gap = conductance(&self.cell_ap, 0.0);
        gp / (gp + gap)
    }

    pub fn bare_inverter_gain(&self) -> f64 {
        self.inverter_gain / self.divider_factor()
    }

    /// Normalized activation `logistic(−gain·(v_in − midpoint)/vdd)`.
    pub fn transfer(&self, v_in: f64) -> f64 {
        logistic(-self.inverter_gain * (v_in - self.inverter_midpoint) / self.vdd)
    }

    /// Gate-node voltage and absolute output voltage for a VTC sweep.
    pub fn vtc_divider(&self, v_in: f64) -> (f64, f64) {
        let gp = conductance(&self.cell_p, 0.0);
        let gap = conductance(&self.cell_ap, 0.0);
        let v_gate = (v_in * gp + self.inverter_midpoint * gap) / (gp + gap);
        let s = logistic(-self.bare_inverter_gain() * (v_gate - self.inverter_midpoint) / self.vdd);
        (v_gate, self.vss + (self.vdd - self.vss) * s)
    }

    /// Slope of the bare inverter VTC at its midpoint, V/V.
    pub fn bare_midpoint_slope(&self) -> f64 {
        -(self.vdd - self.vss) * self.bare_inverter_gain() / (4.0 * self.vdd)
    }

    pub(crate) fn reset_cells(&mut self) {
        self.cell_p.state = MagState::Parallel;
        self.cell_ap.state = MagState::AntiParallel;
    }

    pub(crate) fn set_gain(&mut self, gain: f64) {
        self.inverter_gain = gain;
    }
}

pub fn neuron_transfer(n: &NeuronCircuit, v_in: f64) -> f64 {
    n.transfer(v_in)
}

pub fn neuron_vtc_divider(n: &NeuronCircuit, v_in: f64) -> (f64, f64) {
    n.vtc_divider(v_in)
}

/// One MLP layer realized as a crossbar of synapse pairs, a bias column
/// driven by a constant 1, per-row differential amplifiers and neurons.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossbarLayer {
    device: DeviceParams,
    in_nodes: usize,
    out_nodes: usize,
    synapses: Vec<SynapsePair>,
    bias_column: Vec<SynapsePair>,
    read_voltage_full_scale: f64,
    amp: DiffAmpParams,
    neurons: Vec<NeuronCircuit>,
    nonideal_tmr_bias: bool,
}

impl CrossbarLayer {
    /// Fresh layer with every synapse at +1, calibrated.
    pub fn new(
        device: DeviceParams,
        in_nodes: usize,
        out_nodes: usize,
        read_voltage_full_scale: f64,
        nonideal_tmr_bias: bool,
    ) -> Result<Self> {
        device.validate()?;
        if in_nodes == 0 || out_nodes == 0 {
            return Err(Error::Dimension {
                expected: 1,
                actual: 0,
                context: "layer size must be at least 1",
            });
        }
        if !(read_voltage_full_scale > 0.0 && read_voltage_full_scale.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "read_voltage_full_scale",
                value: read_voltage_full_scale,
            });
        }
        let unit = SynapsePair::programmed(device, Sign::Plus);
        let mut layer = Self {
            device,
            in_nodes,
            out_nodes,
            synapses: vec![unit; in_nodes * out_nodes],
            bias_column: vec![unit; out_nodes],
            read_voltage_full_scale,
            amp: DiffAmpParams::new(1.0)?,
            neurons: vec![NeuronCircuit::with_defaults(device); out_nodes],
            nonideal_tmr_bias,
        };
        layer.calibrate()?;
        Ok(layer)
    }

    /// Replaces every neuron; the layer is recalibrated afterwards.
    pub fn with_neuron(mut self, neuron: NeuronCircuit) -> Result<Self> {
        self.neurons = vec![neuron; self.out_nodes];
        self.calibrate()?;
        Ok(self)
    }

    pub fn device(&self) -> &DeviceParams {
        &self.device
    }

    pub fn in_nodes(&self) -> usize {
        self.in_nodes
    }

    pub fn out_nodes(&self) -> usize {
        self.out_nodes
    }

    pub fn read_voltage_full_scale(&self) -> f64 {
        self.read_voltage_full_scale
    }

    pub fn amp(&self) -> &DiffAmpParams {
        &self.amp
    }

    pub fn nonideal_tmr_bias(&self) -> bool {
        self.nonideal_tmr_bias
    }

    pub fn set_nonideal_tmr_bias(&mut self, on: bool) {
        self.nonideal_tmr_bias = on;
    }

    pub fn synapse(&self, row: usize, col: usize) -> &SynapsePair {
        &self.synapses[row * self.in_nodes + col]
    }

    pub fn bias_synapse(&self, row: usize) -> &SynapsePair {
        &self.bias_column[row]
    }

    pub fn neuron(&self, row: usize) -> &NeuronCircuit {
        &self.neurons[row]
    }

    pub(crate) fn synapse_mut(&mut self, row: usize, col: usize) -> &mut SynapsePair {
        &mut self.synapses[row * self.in_nodes + col]
    }

    pub(crate) fn bias_synapse_mut(&mut self, row: usize) -> &mut SynapsePair {
        &mut self.bias_column[row]
    }

    pub(crate) fn neurons_mut(&mut self) -> &mut [NeuronCircuit] {
        &mut self.neurons
    }

    /// Calibrates against a freshly programmed +1 reference synapse.
    pub fn calibrate(&mut self) -> Result<()> {
        let reference = SynapsePair::programmed(self.device, Sign::Plus);
        self.calibrate_with_reference(&reference)
    }

    /// Sets the amplifier and neuron gains so that one reference synapse at
    /// full-scale input drives the neuron to `logistic(−1)`.
    ///
    /// The amplifier maps the reference current `v_full·ΔG` back to `v_full`
    /// and every neuron gets gain `vdd / v_full`. Both depend only on the
    /// zero-bias device conductances and the read voltage.
    pub fn calibrate_with_reference(&mut self, reference: &SynapsePair) -> Result<()> {
        let delta_g = reference.delta_g(0.0);
        if !(delta_g > 0.0 && delta_g.is_finite()) {
            return Err(Error::Calibration { delta_g });
        }
        self.amp = DiffAmpParams::new(1.0 / delta_g)?;
        let v_full = self.read_voltage_full_scale;
        for n in &mut self.neurons {
            n.set_gain(n.vdd / v_full);
        }
        Ok(())
    }

    fn check_inputs(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.in_nodes {
            return Err(Error::Dimension {
                expected: self.in_nodes,
                actual: x.len(),
                context: "crossbar input vector",
            });
        }
        x.iter().try_for_each(|&v| check_input(v))
    }

    /// Differential amplifier output for one row, relative to the neuron
    /// midpoint reference.
    pub fn row_output(&self, row: usize, x: &[f64]) -> Result<f64> {
        self.check_inputs(x)?;
        if row >= self.out_nodes {
            return Err(Error::Dimension {
                expected: self.out_nodes,
                actual: row,
                context: "row index",
            });
        }
        let v_full = self.read_voltage_full_scale;
        let nonideal = self.nonideal_tmr_bias;
        let mut current = 0.0;
        for (col, &xi) in x.iter().enumerate() {
            current += synapse_current(self.synapse(row, col), xi, v_full, nonideal)?;
        }
        current += synapse_current(&self.bias_column[row], 1.0, v_full, nonideal)?;
        Ok(self.amp.transimpedance_gain * current)
    }

    /// All rows evaluated in parallel: per-row neuron activation.
    ///
    /// Cells of one layer share device parameters, so each column's P and AP
    /// conductances are evaluated once and reused down the column. The result
    /// is bit-identical to summing [`synapse_current`] per cell.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_inputs(x)?;
        let v_full = self.read_voltage_full_scale;
        let column = |xi: f64| {
            let v = xi * v_full;
            let v_bias = if self.nonideal_tmr_bias { v } else { 0.0 };
            let gp = conductance(&MtjCell::new(self.device, MagState::Parallel), v_bias);
            let gap = conductance(&MtjCell::new(self.device, MagState::AntiParallel), v_bias);
            (v, gp, gap)
        };
        let cols: Vec<(f64, f64, f64)> = x.iter().map(|&xi| column(xi)).collect();
        let bias = column(1.0);
        let g = |state: MagState, gp: f64, gap: f64| match state {
            MagState::Parallel => gp,
            MagState::AntiParallel => gap,
        };

        let mut out = Vec::with_capacity(self.out_nodes);
        for row in 0..self.out_nodes {
            let pairs = &self.synapses[row * self.in_nodes..(row + 1) * self.in_nodes];
            let mut current = 0.0;
            for (pair, &(v, gp, gap)) in pairs.iter().zip(&cols) {
                current += v * (g(pair.cell_plus.state, gp, gap) - g(pair.cell_minus.state, gp, gap));
            }
            let b = &self.bias_column[row];
            let (v, gp, gap) = bias;
            current += v * (g(b.cell_plus.state, gp, gap) - g(b.cell_minus.state, gp, gap));
            let v_row = self.amp.transimpedance_gain * current;
            let n = &self.neurons[row];
            out.push(n.transfer(n.inverter_midpoint + v_row));
        }
        Ok(out)
    }

    /// Row-wise [`CrossbarLayer::forward`] over a batch.
    pub fn forward_batch(&self, inputs: &Matrix) -> Result<Matrix> {
        let mut out = Vec::with_capacity(inputs.rows() * self.out_nodes);
        for r in 0..inputs.rows() {
            out.extend(self.forward(inputs.row(r))?);
        }
        Matrix::from_vec(inputs.rows(), self.out_nodes, out)
    }
}

pub fn row_output(layer: &CrossbarLayer, row: usize, x: &[f64]) -> Result<f64> {
    layer.row_output(row, x)
}

pub fn layer_forward(layer: &CrossbarLayer, x: &[f64]) -> Result<Vec<f64>> {
    layer.forward(x)
}
