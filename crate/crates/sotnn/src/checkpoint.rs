//! JSON checkpoints holding the teacher and its deployed binary student.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sotnn_core::train::{clip_teacher, Layer, Network, StudentView, TeacherNet};
use sotnn_core::Matrix;

use crate::files::write_atomic;
use crate::CliError;

pub const CHECKPOINT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub topology: Vec<usize>,
    pub delta_b: f64,
    pub teacher: Network,
    pub student: Network,
}

/// A checkpoint whose networks passed shape and range checks.
#[derive(Debug, Clone)]
pub struct LoadedCheckpoint {
    pub delta_b: f64,
    pub teacher: TeacherNet,
    pub student: StudentView,
}

impl Checkpoint {
    pub fn new(teacher: &TeacherNet, student: &StudentView, delta_b: f64) -> Self {
        Self {
            schema_version: CHECKPOINT_SCHEMA,
            topology: teacher.network().topology(),
            delta_b,
            teacher: teacher.network().clone(),
            student: student.network().clone(),
        }
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        serde_json::to_string_pretty(self).map_err(|e| CliError::Runtime(format!("checkpoint encode: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn parse(path: &Path, text: &str) -> Result<LoadedCheckpoint, CliError> {
        let raw: Checkpoint =
            serde_json::from_str(text).map_err(|e| CliError::data(path, format!("checkpoint: {e}")))?;
        raw.validate(path)
    }

    pub fn load(path: &Path) -> Result<LoadedCheckpoint, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::data(path, e))?;
        Self::parse(path, &text)
    }

    fn validate(self, path: &Path) -> Result<LoadedCheckpoint, CliError> {
        let err = |m: String| CliError::data(path, format!("checkpoint: {m}"));
        if self.schema_version != CHECKPOINT_SCHEMA {
            return Err(err(format!("unsupported schema_version {}", self.schema_version)));
        }
        let teacher = rebuild(&self.teacher).map_err(|e| err(format!("teacher: {e}")))?;
        let student = rebuild(&self.student).map_err(|e| err(format!("student: {e}")))?;
        if teacher.topology() != self.topology || student.topology() != self.topology {
            return Err(err(format!("network shapes do not match topology {:?}", self.topology)));
        }
        if let Some(v) = teacher.values().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(err(format!("teacher value {v} outside [-1, 1]")));
        }
        let student = StudentView::from_network(student).map_err(|e| err(format!("student: {e}")))?;
        if !self.delta_b.is_finite() {
            return Err(err("delta_b must be finite".into()));
        }
        Ok(LoadedCheckpoint {
            delta_b: self.delta_b,
            teacher: clip_teacher(teacher),
            student,
        })
    }
}

/// Re-runs the constructors that deserialization bypasses.
fn rebuild(net: &Network) -> sotnn_core::Result<Network> {
    let layers = net
        .layers()
        .iter()
        .map(|l| {
            let weights = Matrix::from_vec(l.weights.rows(), l.weights.cols(), l.weights.as_slice().to_vec())?;
            Ok(Layer {
                weights,
                biases: l.biases.clone(),
            })
        })
        .collect::<sotnn_core::Result<Vec<_>>>()?;
    Network::new(layers)
}
