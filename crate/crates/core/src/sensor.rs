//! Pixel-level sensor model.
//!
//! Each pixel `P` compares itself with its left (`L`) and top (`T`)
//! neighbours and fires when the largest of the three pairwise absolute
//! differences strictly exceeds the capture threshold. The temporal mode
//! keeps one bit of memory per pixel and reports pixels whose spatial bit
//! flipped since the previous frame.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::{max_code, GradientFrame, IntensityFrame, Modality};

/// Capture-time parameters of the simulated sensor.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorConfig {
    threshold: f32,
    bits: u8,
    modality: Modality,
    width: usize,
    height: usize,
    frame_rate: f32,
}

pub const DEFAULT_THRESHOLD: f32 = 0.05;
pub const DEFAULT_FRAME_RATE: f32 = 30.0;

impl SensorConfig {
    pub fn new(
        threshold: f32,
        bits: u8,
        modality: Modality,
        width: usize,
        height: usize,
        frame_rate: f32,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&threshold) {
            return Err(Error::Config(format!("threshold must lie in [0, 1), got {threshold}")));
        }
        if !(1..=8).contains(&bits) {
            return Err(Error::Config(format!("bits must lie in 1..=8, got {bits}")));
        }
        if modality == Modality::Temporal && bits != 1 {
            return Err(Error::Config(format!(
                "temporal modality is binary; bits must be 1, got {bits}"
            )));
        }
        if !(frame_rate > 0.0 && frame_rate.is_finite()) {
            return Err(Error::Config(format!("frame rate must be positive, got {frame_rate}")));
        }
        if width < 2 || height < 2 {
            return Err(Error::Config(format!(
                "sensor must be at least 2x2, got {width}x{height}"
            )));
        }
        Ok(Self {
            threshold,
            bits,
            modality,
            width,
            height,
            frame_rate,
        })
    }

    /// Binary spatial sensor with the default threshold and frame rate.
    pub fn binary(width: usize, height: usize) -> Result<Self> {
        Self::new(DEFAULT_THRESHOLD, 1, Modality::Spatial, width, height, DEFAULT_FRAME_RATE)
    }

    pub fn threshold(&self) -> f32 {
        self.threshold
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn frame_rate(&self) -> f32 {
        self.frame_rate
    }

    pub fn with_threshold(&self, threshold: f32) -> Result<Self> {
        Self::new(threshold, self.bits, self.modality, self.width, self.height, self.frame_rate)
    }

    pub fn with_bits(&self, bits: u8) -> Result<Self> {
        Self::new(self.threshold, bits, self.modality, self.width, self.height, self.frame_rate)
    }

    pub fn with_modality(&self, modality: Modality) -> Result<Self> {
        Self::new(self.threshold, self.bits, modality, self.width, self.height, self.frame_rate)
    }

    fn check_geometry(&self, frame: &IntensityFrame) -> Result<()> {
        if frame.width() != self.width || frame.height() != self.height {
            return Err(Error::Config(format!(
                "frame is {}x{} but sensor is configured for {}x{}",
                frame.width(),
                frame.height(),
                self.width,
                self.height
            )));
        }
        Ok(())
    }
}

/// Largest pairwise absolute difference inside `{P, L, T}` at an interior pixel.
pub fn local_contrast(frame: &IntensityFrame, row: usize, col: usize) -> Result<f32> {
    if row == 0 || col == 0 || row >= frame.height() || col >= frame.width() {
        return Err(Error::Index {
            row,
            col,
            width: frame.width(),
            height: frame.height(),
        });
    }
    Ok(contrast_at(frame, row, col))
}

#[inline]
fn contrast_at(frame: &IntensityFrame, row: usize, col: usize) -> f32 {
    let p = frame.get(row, col);
    let l = frame.get(row, col - 1);
    let t = frame.get(row - 1, col);
    (p - l).abs().max((p - t).abs()).max((l - t).abs())
}

/// Local contrast of every pixel; row 0 and column 0 are reported as 0.
pub fn contrast_map(frame: &IntensityFrame) -> Vec<f32> {
    let (w, h) = (frame.width(), frame.height());
    let mut out = vec![0.0; w * h];
    for row in 1..h {
        for col in 1..w {
            out[row * w + col] = contrast_at(frame, row, col);
        }
    }
    out
}

/// Binary spatial gradient: 1 where the local contrast is strictly above the threshold.
pub fn spatial_gradient(frame: &IntensityFrame, config: &SensorConfig) -> Result<GradientFrame> {
    if config.bits != 1 {
        return Err(Error::Config(format!(
            "spatial_gradient needs a 1-bit configuration, got {} bits",
            config.bits
        )));
    }
    config.check_geometry(frame)?;
    Ok(quantize(frame, config.threshold, 1))
}

/// N-bit spatial gradient.
///
/// Contrast at or below the threshold maps to 0; above it the excess
/// `(c - T) / (1 - T)` is scaled onto `1..=2^N - 1`, rounding up. With one
/// bit this is exactly [`spatial_gradient`].
pub fn multibit_gradient(frame: &IntensityFrame, config: &SensorConfig) -> Result<GradientFrame> {
    if config.modality != Modality::Spatial {
        return Err(Error::Config("multibit gradients are spatial only".into()));
    }
    config.check_geometry(frame)?;
    Ok(quantize(frame, config.threshold, config.bits))
}

fn quantize(frame: &IntensityFrame, threshold: f32, bits: u8) -> GradientFrame {
    let (w, h) = (frame.width(), frame.height());
    let levels = max_code(bits);
    let span = 1.0 - f64::from(threshold);
    let mut values = vec![0u8; w * h];
    for row in 1..h {
        for col in 1..w {
            let c = contrast_at(frame, row, col);
            if c > threshold {
                values[row * w + col] = if levels == 1 {
                    1
                } else {
                    let scaled = (f64::from(c) - f64::from(threshold)) / span * f64::from(levels);
                    scaled.ceil().clamp(1.0, f64::from(levels)) as u8
                };
            }
        }
    }
    GradientFrame::new_unchecked(
        w,
        h,
        values,
        bits,
        Modality::Spatial,
        threshold,
        frame.timestamp_index(),
    )
}

/// Temporal binary gradient: pixels whose spatial bit differs between the two frames.
///
/// The result carries `current`'s timestamp. Timestamps are not compared
/// here; [`convert_stream`] enforces their ordering.
pub fn temporal_gradient(current: &GradientFrame, previous: &GradientFrame) -> Result<GradientFrame> {
    for (name, f) in [("current", current), ("previous", previous)] {
        if f.modality() != Modality::Spatial {
            return Err(Error::Contract(format!("{name} frame is not a spatial gradient")));
        }
        if !f.is_binary() {
            return Err(Error::Contract(format!(
                "{name} frame has {} bits; temporal gradients need binary input",
                f.bits()
            )));
        }
    }
    if current.width() != previous.width() || current.height() != previous.height() {
        return Err(Error::Contract(format!(
            "dimension mismatch: {}x{} vs {}x{}",
            current.width(),
            current.height(),
            previous.width(),
            previous.height()
        )));
    }
    let values = current
        .values()
        .iter()
        .zip(previous.values())
        .map(|(a, b)| a ^ b)
        .collect();
    Ok(GradientFrame::new_unchecked(
        current.width(),
        current.height(),
        values,
        1,
        Modality::Temporal,
        current.threshold(),
        current.timestamp_index(),
    ))
}

/// Runs the sensor over an ordered frame sequence.
///
/// Spatial mode yields one (possibly multi-bit) gradient per frame. Temporal
/// mode compares each binary spatial gradient with its predecessor; the
/// first frame is compared against an all-zero memory.
pub fn convert_stream(frames: &[IntensityFrame], config: &SensorConfig) -> Result<Vec<GradientFrame>> {
    let first = frames
        .first()
        .ok_or_else(|| Error::Contract("cannot convert an empty frame sequence".into()))?;
    for pair in frames.windows(2) {
        if pair[1].width() != first.width() || pair[1].height() != first.height() {
            return Err(Error::Contract(format!(
                "frame {} is {}x{}, expected {}x{}",
                pair[1].timestamp_index(),
                pair[1].width(),
                pair[1].height(),
                first.width(),
                first.height()
            )));
        }
        if pair[1].timestamp_index() <= pair[0].timestamp_index() {
            return Err(Error::Contract(format!(
                "timestamps must be strictly increasing ({} follows {})",
                pair[1].timestamp_index(),
                pair[0].timestamp_index()
            )));
        }
    }
    config.check_geometry(first)?;

    let spatial: Vec<GradientFrame> = frames
        .par_iter()
        .map(|f| multibit_gradient(f, &config.with_modality(Modality::Spatial)?))
        .collect::<Result<_>>()?;

    match config.modality {
        Modality::Spatial => Ok(spatial),
        Modality::Temporal => {
            let zero = GradientFrame::new_unchecked(
                first.width(),
                first.height(),
                vec![0; first.width() * first.height()],
                1,
                Modality::Spatial,
                config.threshold,
                0,
            );
            (0..spatial.len())
                .into_par_iter()
                .map(|i| {
                    let prev = if i == 0 { &zero } else { &spatial[i - 1] };
                    temporal_gradient(&spatial[i], prev)
                })
                .collect()
        }
    }
}
