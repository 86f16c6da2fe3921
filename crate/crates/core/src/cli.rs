//! `bgcam` command-line front end.
//!
//! Exit status: 0 success, 1 data/contract error, 2 usage error, 3 finished
//! but some inputs were skipped.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::aer::{bandwidth_stats, EventStream, StreamHeader};
use crate::analysis::{
    build_sweep, calibrate_threshold, parse_accuracy_csv, power_sweep, write_calibration_csv,
    write_frame_stats_csv, write_sweep_csv,
};
use crate::error::{Error, Result};
use crate::frame::Modality;
use crate::pipeline::config::{read_config_file, KeyValues, RunConfig, CONFIG_ENV};
use crate::pipeline::convert::convert_dataset;
use crate::pipeline::dense::{read_dense, write_dense};
use crate::pipeline::ingest::ingest_images;
use crate::pipeline::manifest::DatasetManifest;
use crate::power::{estimate_power, write_power_csv, PowerConstants};
use crate::sensor::SensorConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SKIPPED: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "bgcam", version, about = "Binary gradient camera simulator", arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert an image directory or raw video into simulated sensor output
    Convert(ConvertArgs),
    /// Pack the dense gradients listed in a manifest into a .bgc stream
    Encode(EncodeArgs),
    /// Unpack a .bgc stream into dense gradient images
    Decode(DecodeArgs),
    /// Readout bandwidth statistics of a .bgc stream
    Stats(StatsArgs),
    /// Sensor power for one bit depth and activity level
    Power(PowerArgs),
    /// Power (and optional accuracy) table for 1..=8 bits
    Sweep(SweepArgs),
    /// Find the threshold giving a target active fraction on a sample
    Calibrate(CalibrateArgs),
}

#[derive(Args, Debug)]
struct ConvertArgs {
    /// key=value config file (defaults to $BGCAM_CONFIG when set)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory of input images
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Headerless grayscale video file, used instead of --input
    #[arg(long)]
    raw_video: Option<PathBuf>,
    #[arg(long)]
    raw_width: Option<usize>,
    #[arg(long)]
    raw_height: Option<usize>,
    /// 8 or 16
    #[arg(long)]
    raw_depth: Option<u8>,
    /// Only read the top level of --input
    #[arg(long)]
    no_recursive: bool,
    #[arg(long)]
    threshold: Option<f32>,
    #[arg(long)]
    bits: Option<u8>,
    /// spatial or temporal
    #[arg(long)]
    modality: Option<String>,
    #[arg(long)]
    frame_rate: Option<f32>,
    /// Calibrate the threshold to this mean active fraction
    #[arg(long)]
    target_fraction: Option<f64>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Debug)]
struct EncodeArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct DecodeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Directory for frame_NNNNNN.png images
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[arg(long)]
    input: PathBuf,
    /// Per-frame CSV (frame_index, active_fraction)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PowerArgs {
    #[arg(long)]
    bits: u8,
    #[arg(long)]
    active_fraction: f64,
    #[arg(long, default_value_t = 30.0)]
    frame_rate: f32,
    #[arg(long, default_value_t = 640)]
    width: usize,
    #[arg(long, default_value_t = 480)]
    height: usize,
    #[command(flatten)]
    constants: ConstantArgs,
    /// Write the CSV here instead of standard output
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ConstantArgs {
    /// µW/pixel
    #[arg(long, default_value_t = 0.0024)]
    scan_power: f64,
    /// µW/pixel
    #[arg(long, default_value_t = 0.0195)]
    deliver_power: f64,
    /// pJ/pixel of the conventional reference sensor
    #[arg(long, default_value_t = 300.0)]
    reference_energy: f64,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Active fraction driving the deliver term
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// task,modality,bits,test_accuracy table to join
    #[arg(long)]
    accuracy_csv: Option<PathBuf>,
    /// Only join accuracy rows for this task
    #[arg(long)]
    task: Option<String>,
    #[arg(long, default_value_t = 30.0)]
    frame_rate: f32,
    #[command(flatten)]
    constants: ConstantArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    no_recursive: bool,
    #[arg(long, default_value_t = 0.1)]
    target_fraction: f64,
    #[arg(long, default_value_t = 0.01)]
    tolerance: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Runs the tool on `args` (program name first) and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_DATA
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Convert(a) => convert(a, out),
        Command::Encode(a) => encode(a, out),
        Command::Decode(a) => decode(a, out),
        Command::Stats(a) => stats(a, out),
        Command::Power(a) => power(a, out),
        Command::Sweep(a) => sweep(a, out),
        Command::Calibrate(a) => calibrate(a, out),
    }
}

fn convert(a: ConvertArgs, out: &mut dyn Write) -> Result<i32> {
    let config_path = a.config.clone().or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    let file = match &config_path {
        Some(p) => read_config_file(p)?,
        None => KeyValues::new(),
    };

    let mut flags = KeyValues::new();
    let mut set = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            flags.insert(k.to_string(), v);
        }
    };
    let path_str = |p: Option<PathBuf>| p.map(|p| p.to_string_lossy().into_owned());
    set("input", path_str(a.input));
    set("output", path_str(a.output));
    set("raw_video", path_str(a.raw_video));
    set("raw_width", a.raw_width.map(|v| v.to_string()));
    set("raw_height", a.raw_height.map(|v| v.to_string()));
    set("raw_depth", a.raw_depth.map(|v| v.to_string()));
    set("recursive", a.no_recursive.then(|| "false".to_string()));
    set("threshold", a.threshold.map(|v| v.to_string()));
    set("bits", a.bits.map(|v| v.to_string()));
    set("modality", a.modality);
    set("frame_rate", a.frame_rate.map(|v| v.to_string()));
    set("target_fraction", a.target_fraction.map(|v| v.to_string()));
    set("tolerance", a.tolerance.map(|v| v.to_string()));
    set("workers", a.workers.map(|v| v.to_string()));

    let run = RunConfig::resolve(&file, &flags)?;
    let summary = convert_dataset(&run)?;
    let cfg = &summary.manifest.config;
    writeln!(out, "converted {} frames ({}x{}, {}, {} bit) into {}",
        summary.manifest.entries.len(), cfg.width(), cfg.height(), cfg.modality(), cfg.bits(), run.output.display())?;
    if let Some(cal) = &summary.calibration {
        writeln!(
            out,
            "calibrated threshold {} -> mean active fraction {} (target {}, converged: {})",
            cal.threshold, cal.achieved_fraction, cal.target_fraction, cal.converged
        )?;
    } else {
        writeln!(out, "threshold {}", cfg.threshold())?;
    }
    writeln!(
        out,
        "mean active fraction {}, stream {} bytes ({}x smaller than dense)",
        summary.bandwidth.mean_active_fraction, summary.bandwidth.wire_bytes, summary.bandwidth.compression_ratio
    )?;
    if !summary.skipped.is_empty() {
        writeln!(out, "skipped {} undecodable files", summary.skipped.len())?;
        return Ok(EXIT_SKIPPED);
    }
    Ok(EXIT_OK)
}

fn encode(a: EncodeArgs, out: &mut dyn Write) -> Result<i32> {
    let manifest = DatasetManifest::read_from(BufReader::new(File::open(&a.manifest)?))?;
    let base = a.manifest.parent().unwrap_or(Path::new("."));
    let cfg = &manifest.config;
    let mut entries = manifest.entries.clone();
    entries.sort_by_key(|e| e.timestamp_index);
    let frames = entries
        .iter()
        .map(|e| read_dense(&base.join(&e.output), cfg.bits(), cfg.modality(), cfg.threshold(), e.timestamp_index))
        .collect::<Result<Vec<_>>>()?;
    let stream = EventStream::from_frames(StreamHeader::from_config(cfg)?, &frames)?;
    stream.write_to(BufWriter::new(File::create(&a.output)?))?;
    writeln!(out, "encoded {} frames, {} events, {} bytes", frames.len(), stream.total_events(), stream.wire_bytes())?;
    Ok(EXIT_OK)
}

fn read_stream(path: &Path) -> Result<EventStream> {
    EventStream::read_from(BufReader::new(File::open(path)?))
}

fn decode(a: DecodeArgs, out: &mut dyn Write) -> Result<i32> {
    let stream = read_stream(&a.input)?;
    let frames = stream.decode_all()?;
    fs::create_dir_all(&a.output)?;
    for f in &frames {
        write_dense(f, &a.output.join(format!("frame_{:06}.png", f.timestamp_index())))?;
    }
    writeln!(out, "decoded {} frames of {}x{} into {}",
        frames.len(), stream.header.width, stream.header.height, a.output.display())?;
    Ok(EXIT_OK)
}

fn stats(a: StatsArgs, out: &mut dyn Write) -> Result<i32> {
    let stream = read_stream(&a.input)?;
    let st = bandwidth_stats(&stream)?;
    let h = &stream.header;
    writeln!(out, "frames: {}", stream.frames.len())?;
    writeln!(out, "geometry: {}x{}, {} bit, {}", h.width, h.height, h.bits, h.modality)?;
    writeln!(out, "events: {}", stream.total_events())?;
    writeln!(out, "mean active fraction: {}", st.mean_active_fraction)?;
    writeln!(out, "wire bytes: {}", st.wire_bytes)?;
    writeln!(out, "dense bytes: {}", st.dense_bytes)?;
    writeln!(out, "compression ratio: {}", st.compression_ratio)?;
    if let Some(path) = a.output {
        let pixels = h.pixel_count() as f64;
        let rows: Vec<(u32, f64)> = stream
            .frames
            .iter()
            .map(|f| (f.timestamp_index, f.events.len() as f64 / pixels))
            .collect();
        write_frame_stats_csv(BufWriter::new(File::create(path)?), &rows)?;
    }
    Ok(EXIT_OK)
}

fn constants(c: &ConstantArgs) -> Result<PowerConstants> {
    PowerConstants::new(c.scan_power, c.deliver_power, c.reference_energy)
}

fn power(a: PowerArgs, out: &mut dyn Write) -> Result<i32> {
    let sensor = SensorConfig::new(0.05, 1, Modality::Spatial, a.width, a.height, a.frame_rate)?;
    let c = constants(&a.constants)?;
    let report = estimate_power(&c, a.bits, a.active_fraction, &sensor)?;
    match a.output {
        Some(path) => {
            write_power_csv(BufWriter::new(File::create(&path)?), std::slice::from_ref(&report))?;
            writeln!(out, "{} bit at active fraction {}: {} uW/pixel (scan {} + deliver {}), {} pJ/pixel/frame at {} fps",
                report.bits, report.active_fraction, report.total_power, report.scan_power,
                report.deliver_power, report.energy_per_pixel_per_frame, report.frame_rate)?;
            writeln!(out, "conventional reference: {} pJ/pixel", c.reference_comparison_energy)?;
        }
        None => write_power_csv(&mut *out, &[report])?,
    }
    Ok(EXIT_OK)
}

fn sweep(a: SweepArgs, out: &mut dyn Write) -> Result<i32> {
    let sensor = SensorConfig::new(0.05, 1, Modality::Spatial, 640, 480, a.frame_rate)?;
    let reports = power_sweep(&constants(&a.constants)?, a.alpha, &sensor)?;
    let accuracy = match &a.accuracy_csv {
        Some(p) => {
            let mut recs = parse_accuracy_csv(File::open(p)?)?;
            if let Some(task) = &a.task {
                recs.retain(|r| &r.task == task);
            }
            Some(recs)
        }
        None => None,
    };
    let rows = build_sweep(&reports, accuracy.as_deref())?;
    match a.output {
        Some(path) => {
            write_sweep_csv(BufWriter::new(File::create(&path)?), &rows)?;
            writeln!(out, "sweep at active fraction {} (deliver term scales linearly with it)", a.alpha)?;
            for r in &rows {
                let acc = r.accuracy.map(|v| format!(", accuracy {v}")).unwrap_or_default();
                writeln!(out, "  {} bit: {} uW/pixel, {}x binary{acc}", r.bits, r.total_power, r.relative_power)?;
            }
        }
        None => write_sweep_csv(&mut *out, &rows)?,
    }
    Ok(EXIT_OK)
}

fn calibrate(a: CalibrateArgs, out: &mut dyn Write) -> Result<i32> {
    let ing = ingest_images(&a.input, !a.no_recursive)?;
    let cal = calibrate_threshold(&ing.frames, a.target_fraction, a.tolerance)?;
    if let Some(path) = &a.output {
        write_calibration_csv(BufWriter::new(File::create(path)?), &cal)?;
    }
    writeln!(
        out,
        "threshold {} -> mean active fraction {} over {} frames ({} iterations)",
        cal.threshold,
        cal.achieved_fraction,
        ing.frames.len(),
        cal.iterations
    )?;
    if !cal.converged {
        return Err(Error::Contract(format!(
            "calibration failed: target {} +/- {} not reached; at most {} of pixels can be active",
            cal.target_fraction, cal.tolerance, cal.max_reachable_fraction
        )));
    }
    if !ing.skipped.is_empty() {
        return Ok(EXIT_SKIPPED);
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_with(std::iter::once("bgcam").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn no_arguments_is_a_usage_error() {
        let (code, _, err) = run_capture(&[]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("Usage"), "{err}");
    }

    #[test]
    fn unknown_subcommand_and_flag() {
        assert_eq!(run_capture(&["explode"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["power", "--bits", "1", "--active-fraction", "0.1", "--volume", "11"]).0, EXIT_USAGE);
    }

    #[test]
    fn power_prints_csv_row() {
        let (code, out, _) = run_capture(&["power", "--bits", "4", "--active-fraction", "0.1"]);
        assert_eq!(code, EXIT_OK);
        let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row[0], "4");
        assert!((row[4].parse::<f64>().unwrap() - 0.04035).abs() < 1e-12);
    }

    #[test]
    fn power_contract_violation_is_a_data_error() {
        let (code, _, err) = run_capture(&["power", "--bits", "9", "--active-fraction", "0.1"]);
        assert_eq!(code, EXIT_DATA);
        assert!(err.contains("bits"));
    }

    #[test]
    fn sweep_without_accuracy() {
        let (code, out, _) = run_capture(&["sweep", "--alpha", "0.1"]);
        assert_eq!(code, EXIT_OK);
        assert_eq!(out.lines().count(), 9);
        assert!(out.lines().nth(8).unwrap().starts_with("8,"));
    }
}
