use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageReader};

use crate::error::{Error, Result};
use crate::frame::IntensityFrame;

const IMAGE_EXTENSIONS: &[&str] = &[
    "png", "jpg", "jpeg", "pgm", "ppm", "pbm", "pnm", "bmp", "tif", "tiff", "gif",
];

/// One decoded input image, before conversion.
#[derive(Clone, Debug, PartialEq)]
pub struct IngestedEntry {
    /// Path relative to the ingested directory, `/`-separated.
    pub source: String,
    /// Name of the first subdirectory, if the image is not at the top level.
    pub label: Option<String>,
    pub timestamp_index: u32,
}

#[derive(Debug)]
pub struct Ingested {
    pub frames: Vec<IntensityFrame>,
    pub entries: Vec<IngestedEntry>,
    /// Files that looked like images but failed to decode, with the reason.
    pub skipped: Vec<(PathBuf, String)>,
}

/// Reads every image under `dir` in byte-wise lexicographic order of their
/// relative paths. Undecodable files are skipped and reported; other file
/// types are ignored.
pub fn ingest_images(dir: &Path, recursive: bool) -> Result<Ingested> {
    if !dir.is_dir() {
        return Err(Error::Config(format!("{} is not a directory", dir.display())));
    }
    let mut files = Vec::new();
    collect_images(dir, dir, recursive, &mut files)?;
    files.sort();

    let mut frames = Vec::new();
    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for rel in files {
        let path = dir.join(&rel);
        match load_intensity(&path) {
            Ok(frame) => {
                let index = frames.len() as u32;
                let label = rel.rsplit_once('/').map(|(d, _)| d.split('/').next().unwrap_or(d).to_string());
                frames.push(frame.with_timestamp(index));
                entries.push(IngestedEntry {
                    source: rel,
                    label,
                    timestamp_index: index,
                });
            }
            Err(e) => {
                eprintln!("warning: skipping {}: {e}", path.display());
                skipped.push((path, e.to_string()));
            }
        }
    }
    if frames.is_empty() {
        return Err(Error::Config(format!(
            "no decodable images in {} ({} skipped)",
            dir.display(),
            skipped.len()
        )));
    }
    Ok(Ingested {
        frames,
        entries,
        skipped,
    })
}

fn collect_images(root: &Path, dir: &Path, recursive: bool, out: &mut Vec<String>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        let ft = entry.file_type()?;
        if ft.is_dir() {
            if recursive {
                collect_images(root, &path, recursive, out)?;
            }
        } else if has_image_extension(&path) {
            let rel = path
                .strip_prefix(root)
                .expect("walked path is under root")
                .components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect::<Vec<_>>()
                .join("/");
            out.push(rel);
        }
    }
    Ok(())
}

fn has_image_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Decodes one image into normalized luminance.
///
/// Gray sources are divided by their maximum code; color sources are
/// reduced with `0.299 R + 0.587 G + 0.114 B`.
pub fn load_intensity(path: &Path) -> Result<IntensityFrame> {
    let img = ImageReader::open(path)?
        .with_guessed_format()?
        .decode()
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
    to_intensity(&img)
}

pub fn to_intensity(img: &DynamicImage) -> Result<IntensityFrame> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let pixels: Vec<f32> = match img {
        DynamicImage::ImageLuma8(g) => g.pixels().map(|p| f32::from(p.0[0]) / 255.0).collect(),
        DynamicImage::ImageLumaA8(g) => g.pixels().map(|p| f32::from(p.0[0]) / 255.0).collect(),
        DynamicImage::ImageLuma16(g) => g.pixels().map(|p| f32::from(p.0[0]) / 65535.0).collect(),
        DynamicImage::ImageLumaA16(g) => g.pixels().map(|p| f32::from(p.0[0]) / 65535.0).collect(),
        other => other
            .to_rgb32f()
            .pixels()
            .map(|p| {
                let [r, g, b] = p.0.map(f64::from);
                (0.299 * r + 0.587 * g + 0.114 * b).clamp(0.0, 1.0) as f32
            })
            .collect(),
    };
    IntensityFrame::new(w, h, pixels, 0)
}

/// Splits a raw headerless grayscale video (8-bit, or 16-bit little-endian)
/// into frames.
pub fn ingest_raw_video(path: &Path, width: usize, height: usize, bit_depth: u8) -> Result<Vec<IntensityFrame>> {
    let bytes_per_pixel = match bit_depth {
        8 => 1,
        16 => 2,
        other => return Err(Error::Config(format!("raw video depth must be 8 or 16, got {other}"))),
    };
    let frame_bytes = width * height * bytes_per_pixel;
    if frame_bytes == 0 {
        return Err(Error::Config("raw video geometry must be nonzero".into()));
    }
    let mut data = Vec::new();
    fs::File::open(path)?.read_to_end(&mut data)?;
    if data.is_empty() || data.len() % frame_bytes != 0 {
        return Err(Error::Config(format!(
            "{} holds {} bytes, not a whole number of {width}x{height} {bit_depth}-bit frames",
            path.display(),
            data.len()
        )));
    }
    data.chunks_exact(frame_bytes)
        .enumerate()
        .map(|(i, chunk)| {
            let pixels = if bytes_per_pixel == 1 {
                chunk.iter().map(|&b| f32::from(b) / 255.0).collect()
            } else {
                chunk
                    .chunks_exact(2)
                    .map(|b| f32::from(u16::from_le_bytes([b[0], b[1]])) / 65535.0)
                    .collect()
            };
            IntensityFrame::new(width, height, pixels, i as u32)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{GrayImage, ImageBuffer, Luma, Rgb, RgbImage};

    #[test]
    fn white_image_normalizes_to_one() {
        let dir = tempfile::tempdir().unwrap();
        GrayImage::from_pixel(4, 3, Luma([255])).save(dir.path().join("white.png")).unwrap();
        let ing = ingest_images(dir.path(), false).unwrap();
        assert_eq!(ing.frames.len(), 1);
        assert!(ing.frames[0].pixels().iter().all(|&v| v == 1.0));
        assert_eq!(ing.entries[0].source, "white.png");
        assert_eq!(ing.entries[0].label, None);
    }

    #[test]
    fn pure_red_maps_to_luma_weight() {
        let img = DynamicImage::ImageRgb8(RgbImage::from_pixel(3, 3, Rgb([255, 0, 0])));
        let f = to_intensity(&img).unwrap();
        assert!(f.pixels().iter().all(|&v| (v - 0.299).abs() < 1e-6));
    }

    #[test]
    fn sixteen_bit_gray_uses_full_scale() {
        let img: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_pixel(2, 2, Luma([32768]));
        let f = to_intensity(&DynamicImage::ImageLuma16(img)).unwrap();
        assert!((f.get(0, 0) - 32768.0 / 65535.0).abs() < 1e-7);
    }

    #[test]
    fn corrupt_files_are_skipped_and_order_is_lexicographic() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        fs::create_dir(root.join("cat")).unwrap();
        fs::create_dir(root.join("dog")).unwrap();
        GrayImage::from_pixel(3, 3, Luma([10])).save(root.join("dog/b.png")).unwrap();
        GrayImage::from_pixel(3, 3, Luma([20])).save(root.join("cat/a.png")).unwrap();
        GrayImage::from_pixel(3, 3, Luma([30])).save(root.join("top.png")).unwrap();
        fs::write(root.join("cat/broken.png"), b"not a png").unwrap();
        fs::write(root.join("notes.txt"), b"ignored").unwrap();

        let ing = ingest_images(root, true).unwrap();
        let sources: Vec<_> = ing.entries.iter().map(|e| e.source.as_str()).collect();
        assert_eq!(sources, vec!["cat/a.png", "dog/b.png", "top.png"]);
        let labels: Vec<_> = ing.entries.iter().map(|e| e.label.clone()).collect();
        assert_eq!(labels, vec![Some("cat".into()), Some("dog".into()), None]);
        assert_eq!(ing.skipped.len(), 1);
        assert_eq!(ing.frames[2].timestamp_index(), 2);

        let flat = ingest_images(root, false).unwrap();
        assert_eq!(flat.entries.len(), 1);
    }

    #[test]
    fn empty_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(ingest_images(dir.path(), true).is_err());
        assert!(ingest_images(&dir.path().join("missing"), true).is_err());
    }

    #[test]
    fn raw_video_frames() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("clip.raw");
        fs::write(&p, [0u8, 255, 0, 255, 51, 51, 51, 51]).unwrap();
        let frames = ingest_raw_video(&p, 2, 2, 8).unwrap();
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[0].pixels(), &[0.0, 1.0, 0.0, 1.0]);
        assert_eq!(frames[1].timestamp_index(), 1);
        assert!(ingest_raw_video(&p, 3, 2, 8).is_err());

        let p16 = dir.path().join("clip16.raw");
        fs::write(&p16, [0xff, 0xff, 0, 0, 0, 0, 0, 0]).unwrap();
        let f16 = ingest_raw_video(&p16, 2, 2, 16).unwrap();
        assert_eq!(f16[0].pixels(), &[1.0, 0.0, 0.0, 0.0]);
    }
}
