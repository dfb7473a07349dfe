//! Winch drum encoder: deployed length quantised to counts of drum rotation.

use crate::world::WinchState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderReading {
    pub ticks: i64,
    pub cpr: u32,
    pub drum_radius: f64,
}

impl EncoderReading {
    /// Length represented by one tick, m.
    pub fn tick_length(&self) -> f64 {
        std::f64::consts::TAU * self.drum_radius / self.cpr as f64
    }
}

/// Quantises the deployed length: `round(length / circumference * cpr)`.
pub fn read_encoder(winch: &WinchState) -> EncoderReading {
    let circumference = std::f64::consts::TAU * winch.drum_radius;
    let ticks = (winch.deployed_length / circumference * winch.encoder_cpr as f64).round() as i64;
    EncoderReading {
        ticks,
        cpr: winch.encoder_cpr,
        drum_radius: winch.drum_radius,
    }
}

/// Inverse of [`read_encoder`] up to quantisation.
pub fn length_from_encoder(reading: &EncoderReading) -> f64 {
    reading.ticks as f64 / reading.cpr as f64 * std::f64::consts::TAU * reading.drum_radius
}
