use serde::{Deserialize, Serialize};

/// Logistic SNR-to-PER link curve
/// `PER = 1 / (1 + exp(slope · (snr − m(len))))`.
///
/// The midpoint is given at 100 and 500 bytes and interpolated linearly in
/// `ln(len)` for other packet sizes, so it grows strictly with length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerCurve {
    /// Steepness, 1/dB.
    pub slope: f64,
    pub midpoint_100: f64,
    pub midpoint_500: f64,
}

impl Default for PerCurve {
    fn default() -> Self {
        Self {
            slope: 1.0,
            midpoint_100: 5.0,
            midpoint_500: 7.0,
        }
    }
}

impl PerCurve {
    pub fn midpoint(&self, length_bytes: u32) -> f64 {
        let x = (f64::from(length_bytes) / 100.0).ln() / 5f64.ln();
        self.midpoint_100 + (self.midpoint_500 - self.midpoint_100) * x
    }

    /// SNR (dB) at which the error probability equals `per`.
    pub fn snr_for(&self, per: f64, length_bytes: u32) -> f64 {
        self.midpoint(length_bytes) + ((1.0 - per) / per).ln() / self.slope
    }
}

pub fn packet_error_probability(snr_db: f64, length_bytes: u32, curve: &PerCurve) -> f64 {
    1.0 / (1.0 + (curve.slope * (snr_db - curve.midpoint(length_bytes))).exp())
}
