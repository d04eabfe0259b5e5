//! Decibel and power unit conversions.

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) / 1000.0
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

/// Noise power in watts over `bandwidth_hz` for a density given in dBm/Hz.
pub fn noise_power(density_dbm_hz: f64, bandwidth_hz: f64) -> f64 {
    dbm_to_watts(density_dbm_hz) * bandwidth_hz
}

pub fn kmh_to_mps(kmh: f64) -> f64 {
    kmh / 3.6
}
