//! Dense gradient images: 8-bit grayscale PNG with codes stretched to 0..=255.

use std::path::Path;

use image::{GrayImage, ImageFormat};

use crate::error::{Error, Result};
use crate::frame::{max_code, GradientFrame, Modality};

/// Gray level written for `code`; binary frames become 0/255 bilevel images.
pub fn code_to_gray(code: u8, bits: u8) -> u8 {
    let levels = u32::from(max_code(bits));
    ((u32::from(code) * 255 + levels / 2) / levels) as u8
}

pub fn gray_to_code(gray: u8, bits: u8) -> u8 {
    let levels = u32::from(max_code(bits));
    ((u32::from(gray) * levels + 127) / 255) as u8
}

pub fn gradient_to_image(frame: &GradientFrame) -> GrayImage {
    let data = frame
        .values()
        .iter()
        .map(|&v| code_to_gray(v, frame.bits()))
        .collect();
    GrayImage::from_raw(frame.width() as u32, frame.height() as u32, data)
        .expect("buffer length matches frame geometry")
}

pub fn write_dense(frame: &GradientFrame, path: &Path) -> Result<()> {
    gradient_to_image(frame)
        .save_with_format(path, ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

/// Reads a dense gradient image back into codes.
pub fn read_dense(
    path: &Path,
    bits: u8,
    modality: Modality,
    threshold: f32,
    timestamp_index: u32,
) -> Result<GradientFrame> {
    let img = image::open(path)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?
        .into_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let values = img.into_raw().into_iter().map(|g| gray_to_code(g, bits)).collect();
    GradientFrame::new(w, h, values, bits, modality, threshold, timestamp_index)
}
