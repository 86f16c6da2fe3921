//! Sensor power model.
//!
//! Total power per pixel is `2^N * P_scan + alpha * P_deliver`: the array is
//! scanned once per quantization level, and only active pixels pay for
//! delivering their address off-chip. Powers are in µW/pixel, energies in pJ.

use std::io::Write;

use crate::error::{Error, Result};
use crate::sensor::SensorConfig;

/// Per-pixel constants of the gradient sensor and the conventional-sensor reference.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerConstants {
    /// µW/pixel to scan the array once.
    pub scan_power_per_pixel: f64,
    /// µW/pixel to deliver addresses when every pixel is active.
    pub deliver_power_per_pixel: f64,
    /// pJ/pixel of a modern conventional image sensor.
    pub reference_comparison_energy: f64,
}

impl Default for PowerConstants {
    fn default() -> Self {
        Self {
            scan_power_per_pixel: 0.0024,
            deliver_power_per_pixel: 0.0195,
            reference_comparison_energy: 300.0,
        }
    }
}

impl PowerConstants {
    pub fn new(scan: f64, deliver: f64, reference_energy: f64) -> Result<Self> {
        let c = Self {
            scan_power_per_pixel: scan,
            deliver_power_per_pixel: deliver,
            reference_comparison_energy: reference_energy,
        };
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("scan power", self.scan_power_per_pixel),
            ("deliver power", self.deliver_power_per_pixel),
            ("reference energy", self.reference_comparison_energy),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Contract(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerReport {
    pub bits: u8,
    pub active_fraction: f64,
    /// µW/pixel
    pub scan_power: f64,
    /// µW/pixel
    pub deliver_power: f64,
    /// µW/pixel
    pub total_power: f64,
    /// µW for the whole array
    pub total_power_sensor: f64,
    /// pJ per pixel per frame at the configured frame rate
    pub energy_per_pixel_per_frame: f64,
    pub frame_rate: f32,
    pub pixel_count: usize,
}

/// Energy per frame, in pJ, of a load drawing `power_uw` µW at `frame_rate` fps.
///
/// Every µW ↔ pJ conversion in the crate goes through here.
pub fn energy_per_frame_pj(power_uw: f64, frame_rate: f64) -> f64 {
    // 1 µW for 1/fps seconds = 1e-6 / fps J = 1e6 / fps pJ
    power_uw * 1.0e6 / frame_rate
}

pub fn estimate_power(
    constants: &PowerConstants,
    bits: u8,
    active_fraction: f64,
    config: &SensorConfig,
) -> Result<PowerReport> {
    constants.validate()?;
    if !(1..=8).contains(&bits) {
        return Err(Error::Contract(format!("bits must lie in 1..=8, got {bits}")));
    }
    if !(0.0..=1.0).contains(&active_fraction) {
        return Err(Error::Contract(format!(
            "active fraction must lie in [0, 1], got {active_fraction}"
        )));
    }
    let scan_power = f64::from(1u32 << bits) * constants.scan_power_per_pixel;
    let deliver_power = active_fraction * constants.deliver_power_per_pixel;
    let total_power = scan_power + deliver_power;
    let pixel_count = config.width() * config.height();
    Ok(PowerReport {
        bits,
        active_fraction,
        scan_power,
        deliver_power,
        total_power,
        total_power_sensor: total_power * pixel_count as f64,
        energy_per_pixel_per_frame: energy_per_frame_pj(total_power, f64::from(config.frame_rate())),
        frame_rate: config.frame_rate(),
        pixel_count,
    })
}

/// `a.total_power / b.total_power`.
pub fn power_ratio(a: &PowerReport, b: &PowerReport) -> Result<f64> {
    if a.pixel_count != b.pixel_count || a.frame_rate != b.frame_rate {
        return Err(Error::Contract(
            "power reports come from different sensor configurations".into(),
        ));
    }
    if !(b.total_power > 0.0) {
        return Err(Error::Contract("denominator report has zero total power".into()));
    }
    Ok(a.total_power / b.total_power)
}

pub const POWER_CSV_HEADER: [&str; 6] = [
    "bits",
    "active_fraction",
    "scan_uW",
    "deliver_uW",
    "total_uW",
    "energy_pJ",
];

pub fn write_power_csv<W: Write>(writer: W, reports: &[PowerReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(POWER_CSV_HEADER)?;
    for r in reports {
        w.write_record([
            r.bits.to_string(),
            r.active_fraction.to_string(),
            r.scan_power.to_string(),
            r.deliver_power.to_string(),
            r.total_power.to_string(),
            r.energy_per_pixel_per_frame.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
