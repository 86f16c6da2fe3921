//! Frame types shared by the simulator, the codec and the analysis tools.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Sensor readout mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Modality {
    /// Binary (or N-bit) local contrast of a single frame.
    Spatial,
    /// Change of the binary spatial gradient between consecutive frames.
    Temporal,
}

impl Modality {
    /// Wire code used by the `.bgc` format.
    pub fn code(self) -> u8 {
        match self {
            Modality::Spatial => 0,
            Modality::Temporal => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Modality::Spatial),
            1 => Some(Modality::Temporal),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Spatial => "spatial",
            Modality::Temporal => "temporal",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "spatial" => Ok(Modality::Spatial),
            "temporal" => Ok(Modality::Temporal),
            other => Err(Error::Config(format!(
                "unknown modality `{other}` (expected `spatial` or `temporal`)"
            ))),
        }
    }
}

/// A grayscale frame with luminance normalized to `[0, 1]`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct IntensityFrame {
    width: usize,
    height: usize,
    pixels: Vec<f32>,
    timestamp_index: u32,
}

impl IntensityFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<f32>, timestamp_index: u32) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::InvalidFrame(format!(
                "frame must be at least 2x2, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidFrame(format!(
                "expected {} pixels for a {width}x{height} frame, got {}",
                width * height,
                pixels.len()
            )));
        }
        if let Some(i) = pixels.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidFrame(format!(
                "pixel {i} has value {} outside [0, 1]",
                pixels[i]
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
            timestamp_index,
        })
    }

    /// Builds a frame from equally long rows, top row first.
    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R], timestamp_index: u32) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != width) {
            return Err(Error::InvalidFrame("rows have different lengths".into()));
        }
        let pixels = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Self::new(width, height, pixels, timestamp_index)
    }

    pub fn constant(width: usize, height: usize, value: f32, timestamp_index: u32) -> Result<Self> {
        Self::new(width, height, vec![value; width * height], timestamp_index)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn timestamp_index(&self) -> u32 {
        self.timestamp_index
    }

    pub fn with_timestamp(mut self, timestamp_index: u32) -> Self {
        self.timestamp_index = timestamp_index;
        self
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * self.width + col]
    }

    /// `1 - I` for every pixel.
    pub fn inverted(&self) -> Self {
        Self {
            pixels: self.pixels.iter().map(|v| 1.0 - v).collect(),
            ..self.clone()
        }
    }

    /// Copies the `width` x `height` window whose top-left corner is `(row, col)`.
    pub fn crop(&self, row: usize, col: usize, width: usize, height: usize) -> Result<Self> {
        if row + height > self.height || col + width > self.width {
            return Err(Error::InvalidFrame(format!(
                "crop {width}x{height} at ({row}, {col}) exceeds {}x{} frame",
                self.width, self.height
            )));
        }
        let pixels = (row..row + height)
            .flat_map(|r| self.pixels[r * self.width + col..r * self.width + col + width].iter().copied())
            .collect();
        Self::new(width, height, pixels, self.timestamp_index)
    }
}

/// Simulated sensor output: one gradient code per pixel, row-major.
///
/// Codes lie in `0..=2^bits - 1`; row 0 and column 0 are always 0 because
/// those pixels lack a left or top neighbour.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientFrame {
    width: usize,
    height: usize,
    values: Vec<u8>,
    bits: u8,
    modality: Modality,
    threshold: f32,
    timestamp_index: u32,
}

impl GradientFrame {
    pub fn new(
        width: usize,
        height: usize,
        values: Vec<u8>,
        bits: u8,
        modality: Modality,
        threshold: f32,
        timestamp_index: u32,
    ) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::InvalidFrame(format!(
                "frame must be at least 2x2, got {width}x{height}"
            )));
        }
        if values.len() != width * height {
            return Err(Error::InvalidFrame(format!(
                "expected {} values for a {width}x{height} frame, got {}",
                width * height,
                values.len()
            )));
        }
        if !(1..=8).contains(&bits) {
            return Err(Error::InvalidFrame(format!("bits must be in 1..=8, got {bits}")));
        }
        if modality == Modality::Temporal && bits != 1 {
            return Err(Error::InvalidFrame(format!(
                "temporal frames are binary, got bits = {bits}"
            )));
        }
        let max = max_code(bits);
        if let Some(i) = values.iter().position(|&v| v > max) {
            return Err(Error::InvalidFrame(format!(
                "value {} at index {i} exceeds {max} for {bits}-bit codes",
                values[i]
            )));
        }
        let border_active = values[..width].iter().any(|&v| v != 0)
            || (1..height).any(|r| values[r * width] != 0);
        if border_active {
            return Err(Error::InvalidFrame(
                "first row and first column must be zero".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            values,
            bits,
            modality,
            threshold,
            timestamp_index,
        })
    }

    pub(crate) fn new_unchecked(
        width: usize,
        height: usize,
        values: Vec<u8>,
        bits: u8,
        modality: Modality,
        threshold: f32,
        timestamp_index: u32,
    ) -> Self {
        debug_assert_eq!(values.len(), width * height);
        Self {
            width,
            height,
            values,
            bits,
            modality,
            threshold,
            timestamp_index,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn into_values(self) -> Vec<u8> {
        self.values
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn threshold(&self) -> f32 {
        self.threshold
    }

    pub fn timestamp_index(&self) -> u32 {
        self.timestamp_index
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.values[row * self.width + col]
    }

    /// Number of pixels with a nonzero code.
    pub fn active_count(&self) -> usize {
        self.values.iter().filter(|&&v| v > 0).count()
    }

    pub fn is_binary(&self) -> bool {
        self.bits == 1
    }
}

/// Largest code representable with `bits` bits.
#[inline]
pub fn max_code(bits: u8) -> u8 {
    debug_assert!((1..=8).contains(&bits));
    ((1u16 << bits) - 1) as u8
}
