use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::SensorError;
use crate::dynamics::VehicleState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    /// Pulses per revolution.
    pub ppr: u32,
    /// Cumulative gear ratio between encoder shaft and wheel.
    pub cgr: f64,
}

impl Default for EncoderParams {
    fn default() -> Self {
        Self { ppr: 16, cgr: 120.0 }
    }
}

impl EncoderParams {
    pub fn validate(&self) -> Result<(), SensorError> {
        if self.ppr < 1 {
            return Err(SensorError::invalid("encoder.ppr", "must be at least 1"));
        }
        if !(self.cgr > 0.0 && self.cgr.is_finite()) {
            return Err(SensorError::invalid("encoder.cgr", format!("must be positive, got {}", self.cgr)));
        }
        Ok(())
    }

    pub fn ticks_per_rev(&self) -> f64 {
        self.ppr as f64 * self.cgr
    }
}

/// Cumulative ticks `⌊PPR·CGR·N_rev⌋`, negative for reverse rotation.
pub fn encoder_ticks(revolutions: f64, params: &EncoderParams) -> i64 {
    (params.ticks_per_rev() * revolutions).floor() as i64
}

/// Ticks of all four wheels from their cumulative rotation angle.
pub fn wheel_ticks(state: &VehicleState, params: &EncoderParams) -> [i64; 4] {
    state.wheel_angle.map(|a| encoder_ticks(a / TAU, params))
}
