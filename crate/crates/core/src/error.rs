use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid device parameter `{name}`: {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("value {value} outside domain {domain}")]
    Domain { value: f64, domain: &'static str },

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    Dimension {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("non-binary weight {value} at ({row}, {col})")]
    NonBinaryWeight { row: usize, col: usize, value: f64 },

    #[error("calibration failed: differential conductance is {delta_g} S")]
    Calibration { delta_g: f64 },

    #[error("bad IDX magic: expected {expected:#010x}, found {found:#010x}")]
    IdxMagic { expected: u32, found: u32 },

    #[error("IDX payload length mismatch: header implies {expected} bytes, found {actual}")]
    IdxLength { expected: usize, actual: usize },

    #[error("IDX header declares a payload that overflows usize")]
    IdxOverflow,

    #[error("label {label} at index {index} is not a digit")]
    IdxLabel { index: usize, label: u8 },

    #[error("invalid training configuration: {0}")]
    Config(&'static str),
}
