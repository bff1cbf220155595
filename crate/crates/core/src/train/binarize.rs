use rand::Rng;

use crate::analog::Sign;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Binarization {
    #[default]
    Deterministic,
    Stochastic,
}

/// `+1` iff `w ≥ delta_b`.
#[inline]
pub fn binarize_deterministic(w: f64, delta_b: f64) -> Sign {
    if w >= delta_b {
        Sign::Plus
    } else {
        Sign::Minus
    }
}

/// `+1` with probability `clamp((w + 1) / 2, 0, 1)`.
pub fn binarize_stochastic<R: Rng + ?Sized>(w: f64, rng: &mut R) -> Result<Sign> {
    if !(-1.0..=1.0).contains(&w) {
        return Err(Error::Domain {
            value: w,
            domain: "teacher weight in [-1, 1]",
        });
    }
    let p = ((w + 1.0) / 2.0).clamp(0.0, 1.0);
    // gen::<f64>() is in [0, 1): p = 1 always yields +1, p = 0 never does.
    Ok(if rng.gen::<f64>() < p { Sign::Plus } else { Sign::Minus })
}
