//! Compact model of a single SOT-MRAM cell.
//!
//! The MTJ resistance follows the angle-dependent form
//! `R(θ) = 2·R_MTJ·(1 + TMR) / (2 + TMR·(1 + cos θ))` with
//! `R_MTJ = RA / area` and a bias-dependent TMR
//! `TMR(V_b) = (TMR_0 / 100) / (1 + (V_b / V_0)²)`.
//!
//! Everything here is in SI units. Conversions from the customary
//! nm / Ω·µm² figures happen where configuration is loaded.

use core::f64::consts::PI;

use crate::{Error, Result};

/// Geometry and material constants of one SOT-MRAM device.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DeviceParams {
    /// MTJ ellipse major axis, m.
    pub mtj_length: f64,
    /// MTJ ellipse minor axis, m.
    pub mtj_width: f64,
    /// Heavy-metal strip length, m.
    pub hm_length: f64,
    /// Heavy-metal strip width, m.
    pub hm_width: f64,
    /// Heavy-metal strip thickness, m.
    pub hm_thickness: f64,
    /// Resistance-area product, Ω·m².
    pub ra_product: f64,
    /// TMR bias roll-off fitting voltage, V.
    pub v0: f64,
    /// Zero-bias TMR expressed as a percentage constant.
    pub tmr0: f64,
    /// Kelvin. Carried for completeness; the TMR model has no thermal term.
    pub temperature: f64,
}

impl DeviceParams {
    /// 50 nm × 30 nm elliptical MTJ on a 100 × 50 × 3 nm heavy metal,
    /// RA = 10 Ω·µm², V0 = 0.65 V, TMR0 = 100.
    pub const fn reference() -> Self {
        Self {
            mtj_length: 50e-9,
            mtj_width: 30e-9,
            hm_length: 100e-9,
            hm_width: 50e-9,
            hm_thickness: 3e-9,
            ra_product: 10e-12,
            v0: 0.65,
            tmr0: 100.0,
            temperature: 300.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mtj_length", self.mtj_length),
            ("mtj_width", self.mtj_width),
            ("hm_length", self.hm_length),
            ("hm_width", self.hm_width),
            ("hm_thickness", self.hm_thickness),
            ("ra_product", self.ra_product),
            ("v0", self.v0),
            ("tmr0", self.tmr0),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "temperature",
                value: self.temperature,
            });
        }
        Ok(())
    }

    /// Heavy-metal volume, m³.
    pub fn hm_volume(&self) -> f64 {
        self.hm_length * self.hm_width * self.hm_thickness
    }
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self::reference()
    }
}

/// Free-layer orientation relative to the pinned layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum MagState {
    Parallel,
    AntiParallel,
}

impl MagState {
    pub fn angle(self) -> f64 {
        match self {
            MagState::Parallel => 0.0,
            MagState::AntiParallel => PI,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            MagState::Parallel => MagState::AntiParallel,
            MagState::AntiParallel => MagState::Parallel,
        }
    }
}

/// One device with its stored magnetization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MtjCell {
    pub params: DeviceParams,
    pub state: MagState,
}

impl MtjCell {
    pub fn new(params: DeviceParams, state: MagState) -> Self {
        Self { params, state }
    }

    pub fn resistance(&self, v_bias: f64) -> f64 {
        resistance(self, v_bias)
    }

    pub fn conductance(&self, v_bias: f64) -> f64 {
        conductance(self, v_bias)
    }
}

/// Elliptical junction area `l·w·π/4`, m².
pub fn mtj_area(params: &DeviceParams) -> f64 {
    params.mtj_length * params.mtj_width * PI / 4.0
}

/// `R_MTJ = RA / area`, the parallel-state resistance.
pub fn base_resistance(params: &DeviceParams) -> f64 {
    params.ra_product / mtj_area(params)
}

/// Bias-dependent tunnelling magnetoresistance ratio (dimensionless).
pub fn tmr(params: &DeviceParams, v_bias: f64) -> f64 {
    let r = v_bias / params.v0;
    (params.tmr0 / 100.0) / (1.0 + r * r)
}

/// Resistance of a stored cell. P returns `R_MTJ` exactly, AP returns
/// `R_MTJ·(1 + TMR(v_bias))`.
pub fn resistance(cell: &MtjCell, v_bias: f64) -> f64 {
    let r = base_resistance(&cell.params);
    match cell.state {
        MagState::Parallel => r,
        MagState::AntiParallel => r * (1.0 + tmr(&cell.params, v_bias)),
    }
}

/// Full angle-dependent resistance, for validating the P/AP endpoints.
pub fn resistance_at_angle(params: &DeviceParams, theta: f64, v_bias: f64) -> Result<f64> {
    if !(0.0..=PI).contains(&theta) {
        return Err(Error::Domain {
            value: theta,
            domain: "theta in [0, pi]",
        });
    }
    let r = base_resistance(params);
    let t = tmr(params, v_bias);
    Ok(2.0 * r * (1.0 + t) / (2.0 + t * (1.0 + libm::cos(theta))))
}

pub fn conductance(cell: &MtjCell, v_bias: f64) -> f64 {
    1.0 / resistance(cell, v_bias)
}
