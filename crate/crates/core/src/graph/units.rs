use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// Vacuum speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// `k = 2 pi f / c` in rad/m.
pub fn frequency_to_wavenumber(frequency_hz: f64) -> Result<f64> {
    if !(frequency_hz >= 0.0) {
        return Err(Error::InvalidParameter(format!("negative frequency {frequency_hz}")));
    }
    Ok(TAU * frequency_hz / SPEED_OF_LIGHT)
}

pub fn wavenumber_to_frequency(k: f64) -> Result<f64> {
    if !(k >= 0.0) {
        return Err(Error::InvalidParameter(format!("negative wavenumber {k}")));
    }
    Ok(k * SPEED_OF_LIGHT / TAU)
}
