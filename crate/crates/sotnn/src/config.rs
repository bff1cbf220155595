//! Experiment configuration as a flat list of dotted keys.
//!
//! Files are TOML; nested tables are flattened, so `[device] ra_ohm_um2 = 10`
//! and `device.ra_ohm_um2 = 10` are the same key. Device geometry is kept in
//! nm and Ω·µm² here and converted to SI by [`ExperimentConfig::device_params`].

use std::path::PathBuf;

use sotnn_core::analog::{NeuronCircuit, DEFAULT_READ_VOLTAGE, DEFAULT_VDD, DEFAULT_VSS};
use sotnn_core::arch::{GPU_CYCLES_PER_IMAGE, NEURON_AREA_M2, NEURON_POWER_W};
use sotnn_core::device::DeviceParams;
use sotnn_core::train::{Binarization, Optimizer, TrainConfig};
use toml::{Table, Value};

use crate::CliError;

pub const SCHEMA_VERSION: i64 = 1;
pub const DATA_DIR_ENV: &str = "SOTNN_DATA_DIR";
pub const DEFAULT_DATA_DIR: &str = "data/mnist";

/// Every recognised key, in echo order.
pub const KEYS: &[&str] = &[
    "schema_version",
    "seed",
    "device.mtj_length_nm",
    "device.mtj_width_nm",
    "device.hm_length_nm",
    "device.hm_width_nm",
    "device.hm_thickness_nm",
    "device.ra_ohm_um2",
    "device.v0",
    "device.tmr0",
    "device.temperature_k",
    "model.topology",
    "train.learning_rate",
    "train.epochs",
    "train.batch_size",
    "train.binarization",
    "train.delta_b",
    "train.optimizer",
    "train.init_range",
    "train.validation_fraction",
    "circuit.read_voltage",
    "circuit.nonideal",
    "circuit.vdd",
    "circuit.vss",
    "circuit.inverter_midpoint",
    "arch.gpu_cycles_per_image",
    "arch.neuron_power_w",
    "arch.neuron_area_um2",
    "data.dir",
    "data.train_limit",
    "data.test_limit",
    "eval.crossbar_train",
    "output.dir",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub mtj_length_nm: f64,
    pub mtj_width_nm: f64,
    pub hm_length_nm: f64,
    pub hm_width_nm: f64,
    pub hm_thickness_nm: f64,
    pub ra_ohm_um2: f64,
    pub v0: f64,
    pub tmr0: f64,
    pub temperature_k: f64,
    pub topology: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub binarization: Binarization,
    pub delta_b: f64,
    pub optimizer: Optimizer,
    pub init_range: f64,
    /// Tail fraction of the training file held out to pick the deployed
    /// epoch. 0 deploys the last epoch.
    pub validation_fraction: f64,
    pub read_voltage: f64,
    pub nonideal: bool,
    pub vdd: f64,
    pub vss: f64,
    pub inverter_midpoint: f64,
    pub gpu_cycles_per_image: u64,
    pub neuron_power_w: f64,
    pub neuron_area_um2: f64,
    pub data_dir: PathBuf,
    /// 0 means the whole split.
    pub train_limit: usize,
    pub test_limit: usize,
    /// Also score the crossbar on the training split each epoch.
    pub crossbar_train: bool,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let d = DeviceParams::reference();
        let t = TrainConfig::default();
        Self {
            seed: t.rng_seed,
            mtj_length_nm: d.mtj_length * 1e9,
            mtj_width_nm: 30.0,
            hm_length_nm: 100.0,
            hm_width_nm: 50.0,
            hm_thickness_nm: 3.0,
            ra_ohm_um2: 10.0,
            v0: d.v0,
            tmr0: d.tmr0,
            temperature_k: d.temperature,
            topology: vec![784, 16, 10],
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            batch_size: t.batch_size,
            binarization: t.binarization,
            delta_b: t.delta_b,
            optimizer: t.optimizer,
            init_range: t.init_range,
            validation_fraction: 0.1,
            read_voltage: DEFAULT_READ_VOLTAGE,
            nonideal: true,
            vdd: DEFAULT_VDD,
            vss: DEFAULT_VSS,
            inverter_midpoint: DEFAULT_VDD / 2.0,
            gpu_cycles_per_image: GPU_CYCLES_PER_IMAGE,
            neuron_power_w: NEURON_POWER_W,
            neuron_area_um2: NEURON_AREA_M2 * 1e12,
            data_dir: std::env::var_os(DATA_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR)),
            train_limit: 0,
            test_limit: 0,
            crossbar_train: true,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn bad(key: &str, value: &Value, want: &str) -> CliError {
    CliError::Config(format!("`{key}` expects {want}, got {value}"))
}

fn as_f64(key: &str, v: &Value) -> Result<f64, CliError> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(bad(key, v, "a number")),
    }
}

fn as_u64(key: &str, v: &Value) -> Result<u64, CliError> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        _ => Err(bad(key, v, "a non-negative integer")),
    }
}

fn as_bool(key: &str, v: &Value) -> Result<bool, CliError> {
    match v {
        Value::Boolean(b) => Ok(*b),
        Value::String(s) if s == "on" => Ok(true),
        Value::String(s) if s == "off" => Ok(false),
        _ => Err(bad(key, v, "true/false or on/off")),
    }
}

fn as_str<'a>(key: &str, v: &'a Value) -> Result<&'a str, CliError> {
    v.as_str().ok_or_else(|| bad(key, v, "a string"))
}

fn as_topology(key: &str, v: &Value) -> Result<Vec<usize>, CliError> {
    let parsed: Option<Vec<usize>> = match v {
        Value::Array(a) => a
            .iter()
            .map(|x| x.as_integer().filter(|&i| i > 0).map(|i| i as usize))
            .collect(),
        Value::String(s) => s.split(',').map(|p| p.trim().parse().ok().filter(|&n| n > 0)).collect(),
        _ => None,
    };
    match parsed {
        Some(t) if t.len() >= 2 => Ok(t),
        _ => Err(bad(key, v, "at least two positive layer sizes")),
    }
}

/// Parses a command-line value as a TOML scalar, falling back to a bare
/// string (so paths and enum names need no quoting).
pub fn parse_value(text: &str) -> Value {
    format!("v = {text}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(text.to_string()))
}

fn flatten(prefix: &str, table: &Table, out: &mut Vec<(String, Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            _ => out.push((key, v.clone())),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let table: Table = text.parse().map_err(|e| CliError::Config(format!("parse: {e}")))?;
        let mut flat = Vec::new();
        flatten("", &table, &mut flat);
        let mut cfg = Self::default();
        for (k, v) in &flat {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    /// Sets one dotted key. Unknown keys are configuration errors.
    pub fn set(&mut self, key: &str, v: &Value) -> Result<(), CliError> {
        match key {
            "schema_version" => {
                if v.as_integer() != Some(SCHEMA_VERSION) {
                    return Err(bad(key, v, "schema version 1"));
                }
            }
            "seed" => self.seed = as_u64(key, v)?,
            "device.mtj_length_nm" => self.mtj_length_nm = as_f64(key, v)?,
            "device.mtj_width_nm" => self.mtj_width_nm = as_f64(key, v)?,
            "device.hm_length_nm" => self.hm_length_nm = as_f64(key, v)?,
            "device.hm_width_nm" => self.hm_width_nm = as_f64(key, v)?,
            "device.hm_thickness_nm" => self.hm_thickness_nm = as_f64(key, v)?,
            "device.ra_ohm_um2" => self.ra_ohm_um2 = as_f64(key, v)?,
            "device.v0" => self.v0 = as_f64(key, v)?,
            "device.tmr0" => self.tmr0 = as_f64(key, v)?,
            "device.temperature_k" => self.temperature_k = as_f64(key, v)?,
            "model.topology" => self.topology = as_topology(key, v)?,
            "train.learning_rate" => self.learning_rate = as_f64(key, v)?,
            "train.epochs" => self.epochs = as_u64(key, v)? as usize,
            "train.batch_size" => self.batch_size = as_u64(key, v)? as usize,
            "train.binarization" => {
                self.binarization = match as_str(key, v)? {
                    "deterministic" => Binarization::Deterministic,
                    "stochastic" => Binarization::Stochastic,
                    _ => return Err(bad(key, v, "deterministic or stochastic")),
                }
            }
            "train.delta_b" => self.delta_b = as_f64(key, v)?,
            "train.optimizer" => {
                self.optimizer = match as_str(key, v)? {
                    "adam" => Optimizer::adam(),
                    "sgd" => Optimizer::Sgd,
                    _ => return Err(bad(key, v, "adam or sgd")),
                }
            }
            "train.init_range" => self.init_range = as_f64(key, v)?,
            "train.validation_fraction" => self.validation_fraction = as_f64(key, v)?,
            "circuit.read_voltage" => self.read_voltage = as_f64(key, v)?,
            "circuit.nonideal" => self.nonideal = as_bool(key, v)?,
            "circuit.vdd" => self.vdd = as_f64(key, v)?,
            "circuit.vss" => self.vss = as_f64(key, v)?,
            "circuit.inverter_midpoint" => self.inverter_midpoint = as_f64(key, v)?,
            "arch.gpu_cycles_per_image" => self.gpu_cycles_per_image = as_u64(key, v)?,
            "arch.neuron_power_w" => self.neuron_power_w = as_f64(key, v)?,
            "arch.neuron_area_um2" => self.neuron_area_um2 = as_f64(key, v)?,
            "data.dir" => self.data_dir = PathBuf::from(as_str(key, v)?),
            "data.train_limit" => self.train_limit = as_u64(key, v)? as usize,
            "data.test_limit" => self.test_limit = as_u64(key, v)? as usize,
            "eval.crossbar_train" => self.crossbar_train = as_bool(key, v)?,
            "output.dir" => self.out_dir = PathBuf::from(as_str(key, v)?),
            _ => return Err(CliError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn set_str(&mut self, key: &str, text: &str) -> Result<(), CliError> {
        self.set(key, &parse_value(text))
    }

    pub fn get(&self, key: &str) -> Option<Value> {
        let f = Value::Float;
        let i = |n: u64| Value::Integer(n as i64);
        let s = |p: &std::path::Path| Value::String(p.to_string_lossy().into_owned());
        Some(match key {
            "schema_version" => Value::Integer(SCHEMA_VERSION),
            "seed" => i(self.seed),
            "device.mtj_length_nm" => f(self.mtj_length_nm),
            "device.mtj_width_nm" => f(self.mtj_width_nm),
            "device.hm_length_nm" => f(self.hm_length_nm),
            "device.hm_width_nm" => f(self.hm_width_nm),
            "device.hm_thickness_nm" => f(self.hm_thickness_nm),
            "device.ra_ohm_um2" => f(self.ra_ohm_um2),
            "device.v0" => f(self.v0),
            "device.tmr0" => f(self.tmr0),
            "device.temperature_k" => f(self.temperature_k),
            "model.topology" => Value::Array(self.topology.iter().map(|&n| i(n as u64)).collect()),
            "train.learning_rate" => f(self.learning_rate),
            "train.epochs" => i(self.epochs as u64),
            "train.batch_size" => i(self.batch_size as u64),
            "train.binarization" => Value::String(
                match self.binarization {
                    Binarization::Deterministic => "deterministic",
                    Binarization::Stochastic => "stochastic",
                }
                .into(),
            ),
            "train.delta_b" => f(self.delta_b),
            "train.optimizer" => Value::String(
                match self.optimizer {
                    Optimizer::Sgd => "sgd",
                    Optimizer::Adam { .. } => "adam",
                }
                .into(),
            ),
            "train.init_range" => f(self.init_range),
            "train.validation_fraction" => f(self.validation_fraction),
            "circuit.read_voltage" => f(self.read_voltage),
            "circuit.nonideal" => Value::Boolean(self.nonideal),
            "circuit.vdd" => f(self.vdd),
            "circuit.vss" => f(self.vss),
            "circuit.inverter_midpoint" => f(self.inverter_midpoint),
            "arch.gpu_cycles_per_image" => i(self.gpu_cycles_per_image),
            "arch.neuron_power_w" => f(self.neuron_power_w),
            "arch.neuron_area_um2" => f(self.neuron_area_um2),
            "data.dir" => s(&self.data_dir),
            "data.train_limit" => i(self.train_limit as u64),
            "data.test_limit" => i(self.test_limit as u64),
            "eval.crossbar_train" => Value::Boolean(self.crossbar_train),
            "output.dir" => s(&self.out_dir),
            _ => return None,
        })
    }

    /// Canonical flat-key TOML text. Parsing it back yields an equal config
    /// whose echo is byte-identical.
    pub fn to_echo(&self) -> String {
        let mut out = String::from("# sotnn experiment config (flat dotted keys)\n");
        for key in KEYS {
            let v = self.get(key).expect("every listed key has a value");
            out.push_str(&format!("{key} = {v}\n"));
        }
        out
    }

    /// SI device parameters.
    pub fn device_params(&self) -> Result<DeviceParams, CliError> {
        let d = DeviceParams {
            mtj_length: self.mtj_length_nm / 1e9,
            mtj_width: self.mtj_width_nm / 1e9,
            hm_length: self.hm_length_nm / 1e9,
            hm_width: self.hm_width_nm / 1e9,
            hm_thickness: self.hm_thickness_nm / 1e9,
            ra_product: self.ra_ohm_um2 / 1e12,
            v0: self.v0,
            tmr0: self.tmr0,
            temperature: self.temperature_k,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn neuron(&self) -> Result<NeuronCircuit, CliError> {
        Ok(NeuronCircuit::new(
            self.device_params()?,
            self.vdd,
            self.vss,
            self.inverter_midpoint,
            self.vdd / self.read_voltage,
        )?)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            binarization: self.binarization,
            delta_b: self.delta_b,
            rng_seed: self.seed,
            optimizer: self.optimizer,
            init_range: self.init_range,
        }
    }

    pub fn neuron_area_m2(&self) -> f64 {
        self.neuron_area_um2 / 1e12
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.device_params()?;
        self.neuron()?;
        self.train_config().validate()?;
        if !(self.read_voltage > 0.0 && self.read_voltage.is_finite()) {
            return Err(CliError::Config("circuit.read_voltage must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(CliError::Config("train.validation_fraction must be in [0, 1)".into()));
        }
        if self.topology.len() < 2 || self.topology.contains(&0) {
            return Err(CliError::Config(
                "model.topology needs at least two positive sizes".into(),
            ));
        }
        Ok(())
    }
}
