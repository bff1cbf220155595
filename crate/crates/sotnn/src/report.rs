//! Run summaries written next to the metric series.

use serde::{Deserialize, Serialize};
use sotnn_core::arch::{CycleSnapshot, PowerAreaReport, SpeedupReport};
use sotnn_core::train::Metrics;

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub seed: u64,
    pub topology: Vec<usize>,
    pub nonideal: bool,
    /// Epoch whose student is deployed and checkpointed; `None` with zero
    /// epochs.
    pub selected_epoch: Option<usize>,
    pub validation_acc: Option<f64>,
    /// Test accuracy of the deployed student in software.
    pub oracle_test_acc: Option<f64>,
    /// Test accuracy of the deployed student on the crossbar.
    pub crossbar_test_acc: Option<f64>,
    /// `oracle_test_acc − crossbar_test_acc`.
    pub accuracy_gap: Option<f64>,
    /// Per-epoch series; confusion matrices belong to the deployed epoch.
    pub oracle: Metrics,
    pub crossbar: Metrics,
    pub cycles: CycleSnapshot,
    pub power_area: PowerAreaReport,
    pub speedup: SpeedupReport,
    pub config_echo: String,
    pub duration_s: f64,
}

/// Output of `sotnn report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareReport {
    pub schema_version: u32,
    pub topology: Vec<usize>,
    pub programming_cycles: u64,
    pub inference_cycles_per_image: u64,
    pub speedup: SpeedupReport,
    pub power_area: PowerAreaReport,
}
