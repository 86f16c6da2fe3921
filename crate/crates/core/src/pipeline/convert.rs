use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::aer::{bandwidth_stats, BandwidthStats, EventStream, StreamHeader};
use crate::analysis::{calibrate_threshold, frame_stats, write_calibration_csv, write_frame_stats_csv, CalibrationResult};
use crate::error::{Error, Result};
use crate::frame::IntensityFrame;
use crate::pipeline::config::{InputSource, RunConfig};
use crate::pipeline::dense::write_dense;
use crate::pipeline::ingest::{ingest_images, ingest_raw_video, IngestedEntry};
use crate::pipeline::manifest::{DatasetManifest, ManifestEntry, MANIFEST_FILE};
use crate::sensor::convert_stream;

pub const GRADIENT_DIR: &str = "gradients";
pub const STREAM_FILE: &str = "stream.bgc";
pub const FRAME_STATS_FILE: &str = "frame_stats.csv";
pub const CALIBRATION_FILE: &str = "calibration.csv";

/// Upper bound on frames used to calibrate the threshold; larger inputs are
/// subsampled at even spacing.
pub const CALIBRATION_SAMPLE_LIMIT: usize = 1000;

#[derive(Debug)]
pub struct ConvertSummary {
    pub manifest: DatasetManifest,
    pub skipped: Vec<(PathBuf, String)>,
    pub calibration: Option<CalibrationResult>,
    pub bandwidth: BandwidthStats,
}

/// Converts a dataset or video and writes dense gradients, the event stream,
/// the manifest and per-frame statistics into `run.output`.
///
/// Anything written by a failed run is removed again.
pub fn convert_dataset(run: &RunConfig) -> Result<ConvertSummary> {
    run.validate()?;
    let created_root = !run.output.exists();
    let mut written = Written::default();
    let result = convert_into(run, &mut written);
    if result.is_err() {
        if created_root {
            let _ = fs::remove_dir_all(&run.output);
        } else {
            written.remove();
        }
    }
    result
}

#[derive(Default)]
struct Written {
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
}

impl Written {
    fn create_dir_all(&mut self, dir: &Path) -> Result<()> {
        let mut missing = Vec::new();
        let mut cur = Some(dir);
        while let Some(d) = cur {
            if d.exists() {
                break;
            }
            missing.push(d.to_path_buf());
            cur = d.parent();
        }
        fs::create_dir_all(dir)?;
        self.dirs.extend(missing);
        Ok(())
    }

    fn remove(&self) {
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        let mut dirs = self.dirs.clone();
        // innermost first
        dirs.sort_by_key(|d| std::cmp::Reverse(d.components().count()));
        for d in &dirs {
            let _ = fs::remove_dir(d);
        }
    }
}

fn convert_into(run: &RunConfig, written: &mut Written) -> Result<ConvertSummary> {
    let (frames, entries, skipped) = match &run.input {
        InputSource::Images { dir, recursive } => {
            let ing = ingest_images(dir, *recursive)?;
            (ing.frames, ing.entries, ing.skipped)
        }
        InputSource::RawVideo {
            path,
            width,
            height,
            bit_depth,
        } => {
            let frames = ingest_raw_video(path, *width, *height, *bit_depth)?;
            let name = path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "video".into());
            let entries = frames
                .iter()
                .map(|f| IngestedEntry {
                    source: format!("{name}#{:06}", f.timestamp_index()),
                    label: None,
                    timestamp_index: f.timestamp_index(),
                })
                .collect();
            (frames, entries, Vec::new())
        }
    };

    let (width, height) = (frames[0].width(), frames[0].height());
    if let Some((e, f)) = entries
        .iter()
        .zip(&frames)
        .find(|(_, f)| f.width() != width || f.height() != height)
    {
        return Err(Error::Contract(format!(
            "{} is {}x{} but the first input is {width}x{height}",
            e.source,
            f.width(),
            f.height()
        )));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(run.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;

    let calibration = match run.target_fraction {
        Some(target) => {
            let sample = calibration_sample(&frames);
            let cal = pool.install(|| calibrate_threshold(&sample, target, run.tolerance))?;
            if !cal.converged {
                eprintln!(
                    "warning: calibration reached fraction {} (target {target} +/- {}); using threshold {}",
                    cal.achieved_fraction, run.tolerance, cal.threshold
                );
            }
            Some(cal)
        }
        None => None,
    };
    let mut sensor = run.sensor_config(width, height)?;
    if let Some(cal) = &calibration {
        sensor = sensor.with_threshold(cal.threshold)?;
    }

    let gradients = pool.install(|| convert_stream(&frames, &sensor))?;

    let manifest_entries: Vec<ManifestEntry> = entries
        .iter()
        .map(|e| ManifestEntry {
            source: e.source.clone(),
            output: output_name(&e.source, &run.input),
            label: e.label.clone(),
            timestamp_index: e.timestamp_index,
        })
        .collect();
    let manifest = DatasetManifest::new(manifest_entries, sensor.clone())?;
    let stream = EventStream::from_frames(StreamHeader::from_config(&sensor)?, &gradients)?;
    let bandwidth = bandwidth_stats(&stream)?;

    written.create_dir_all(&run.output)?;
    let mut dirs: Vec<PathBuf> = manifest
        .entries
        .iter()
        .filter_map(|e| run.output.join(&e.output).parent().map(Path::to_path_buf))
        .collect();
    dirs.sort();
    dirs.dedup();
    for d in &dirs {
        written.create_dir_all(d)?;
    }

    let outputs: Vec<PathBuf> = manifest.entries.iter().map(|e| run.output.join(&e.output)).collect();
    written.files.extend(outputs.iter().cloned());
    pool.install(|| {
        outputs
            .par_iter()
            .zip(gradients.par_iter())
            .try_for_each(|(path, g)| write_dense(g, path))
    })?;

    let stream_path = run.output.join(STREAM_FILE);
    written.files.push(stream_path.clone());
    write_file(&stream_path, |w| stream.write_to(w))?;

    let manifest_path = run.output.join(MANIFEST_FILE);
    written.files.push(manifest_path.clone());
    write_file(&manifest_path, |w| manifest.write_to(w))?;

    let stats_path = run.output.join(FRAME_STATS_FILE);
    written.files.push(stats_path.clone());
    write_file(&stats_path, |w| write_frame_stats_csv(w, &frame_stats(&gradients)))?;

    if let Some(cal) = &calibration {
        let cal_path = run.output.join(CALIBRATION_FILE);
        written.files.push(cal_path.clone());
        write_file(&cal_path, |w| write_calibration_csv(w, cal))?;
    }

    Ok(ConvertSummary {
        manifest,
        skipped,
        calibration,
        bandwidth,
    })
}

fn calibration_sample(frames: &[IntensityFrame]) -> Vec<IntensityFrame> {
    if frames.len() <= CALIBRATION_SAMPLE_LIMIT {
        return frames.to_vec();
    }
    (0..CALIBRATION_SAMPLE_LIMIT)
        .map(|i| frames[i * frames.len() / CALIBRATION_SAMPLE_LIMIT].clone())
        .collect()
}

fn output_name(source: &str, input: &InputSource) -> String {
    match input {
        InputSource::Images { .. } => {
            let stem = match source.rsplit_once('.') {
                Some((stem, _)) if !stem.ends_with('/') && !stem.is_empty() => stem,
                _ => source,
            };
            format!("{GRADIENT_DIR}/{stem}.png")
        }
        InputSource::RawVideo { .. } => {
            let idx = source.rsplit_once('#').map_or(source, |(_, i)| i);
            format!("{GRADIENT_DIR}/frame_{idx}.png")
        }
    }
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    body(&mut w)?;
    w.flush()?;
    Ok(())
}
