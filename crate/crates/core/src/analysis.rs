//! Activity statistics, threshold calibration, edge-fattening measurement and
//! the bits/power/accuracy sweep table.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::{GradientFrame, IntensityFrame};
use crate::power::{estimate_power, PowerConstants, PowerReport};
use crate::sensor::{contrast_map, SensorConfig};

/// Bisection never runs longer than this.
pub const MAX_CALIBRATION_ITERATIONS: u32 = 64;

/// Fraction of pixels with a nonzero code.
pub fn active_fraction(frame: &GradientFrame) -> f64 {
    frame.active_count() as f64 / (frame.width() * frame.height()) as f64
}

/// `(frame_index, active_fraction)` for every frame.
pub fn frame_stats(frames: &[GradientFrame]) -> Vec<(u32, f64)> {
    frames
        .iter()
        .map(|f| (f.timestamp_index(), active_fraction(f)))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationResult {
    pub threshold: f32,
    pub achieved_fraction: f64,
    pub iterations: u32,
    /// `false` when the tolerance could not be met; `threshold` is then the
    /// best candidate seen.
    pub converged: bool,
    pub target_fraction: f64,
    pub tolerance: f64,
    /// Mean active fraction at `T = 0`, the most any threshold can produce.
    pub max_reachable_fraction: f64,
}

/// Per-frame contrast values, sorted, so the active count at any threshold is
/// one binary search.
struct ContrastSample {
    sorted: Vec<Vec<f32>>,
}

impl ContrastSample {
    fn new(frames: &[IntensityFrame]) -> Self {
        let sorted = frames
            .par_iter()
            .map(|f| {
                let mut c = contrast_map(f);
                c.sort_unstable_by(f32::total_cmp);
                c
            })
            .collect();
        Self { sorted }
    }

    fn mean_fraction(&self, threshold: f32) -> f64 {
        let sum: f64 = self
            .sorted
            .par_iter()
            .map(|c| {
                let inactive = c.partition_point(|&v| v <= threshold);
                (c.len() - inactive) as f64 / c.len() as f64
            })
            .sum();
        sum / self.sorted.len() as f64
    }
}

/// Finds a threshold whose mean active fraction over `frames` is within
/// `tolerance` of `target_fraction`, by bisection on `[0, 1)`.
///
/// The active set shrinks monotonically as the threshold grows, so the search
/// moves up while the sample is too active and down otherwise.
pub fn calibrate_threshold(
    frames: &[IntensityFrame],
    target_fraction: f64,
    tolerance: f64,
) -> Result<CalibrationResult> {
    if frames.is_empty() {
        return Err(Error::Contract("calibration needs at least one frame".into()));
    }
    if !(target_fraction > 0.0 && target_fraction < 1.0) {
        return Err(Error::Contract(format!(
            "target fraction must lie in (0, 1), got {target_fraction}"
        )));
    }
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        return Err(Error::Contract(format!("tolerance must be positive, got {tolerance}")));
    }

    let sample = ContrastSample::new(frames);
    let result = |threshold: f32, achieved: f64, iterations: u32, converged: bool, max: f64| CalibrationResult {
        threshold,
        achieved_fraction: achieved,
        iterations,
        converged,
        target_fraction,
        tolerance,
        max_reachable_fraction: max,
    };

    let max_fraction = sample.mean_fraction(0.0);
    let mut iterations = 1;
    if (max_fraction - target_fraction).abs() <= tolerance {
        return Ok(result(0.0, max_fraction, iterations, true, max_fraction));
    }
    if max_fraction < target_fraction {
        return Ok(result(0.0, max_fraction, iterations, false, max_fraction));
    }

    let (mut lo, mut hi) = (0.0f32, 1.0f32);
    let mut best = (0.0f32, max_fraction);
    while iterations < MAX_CALIBRATION_ITERATIONS {
        let mid = ((f64::from(lo) + f64::from(hi)) / 2.0) as f32;
        if mid <= lo || mid >= hi {
            break;
        }
        let fraction = sample.mean_fraction(mid);
        iterations += 1;
        if (fraction - target_fraction).abs() < (best.1 - target_fraction).abs() {
            best = (mid, fraction);
        }
        if (fraction - target_fraction).abs() <= tolerance {
            return Ok(result(mid, fraction, iterations, true, max_fraction));
        }
        if fraction > target_fraction {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(result(best.0, best.1, iterations, false, max_fraction))
}

/// Ratio of pixels activated by the `{P, L, T}` max-pair rule to pixels whose
/// backward-difference gradient magnitude `sqrt((P-L)^2 + (P-T)^2)` exceeds the
/// same threshold. Both counts cover interior pixels only.
pub fn edge_fattening_ratio(frame: &IntensityFrame, threshold: f32) -> Result<f64> {
    let (num, den) = edge_counts(frame, threshold);
    if den == 0 {
        return Err(Error::UndefinedRatio(format!(
            "no finite-difference gradient exceeds threshold {threshold}"
        )));
    }
    Ok(num as f64 / den as f64)
}

/// `(max-pair active count, finite-difference active count)`.
pub fn edge_counts(frame: &IntensityFrame, threshold: f32) -> (usize, usize) {
    let (w, h) = (frame.width(), frame.height());
    let t = f64::from(threshold);
    let mut max_pair = 0;
    let mut finite_diff = 0;
    for row in 1..h {
        for col in 1..w {
            let p = frame.get(row, col);
            let l = frame.get(row, col - 1);
            let top = frame.get(row - 1, col);
            if (p - l).abs().max((p - top).abs()).max((l - top).abs()) > threshold {
                max_pair += 1;
            }
            let gx = f64::from(p) - f64::from(l);
            let gy = f64::from(p) - f64::from(top);
            if (gx * gx + gy * gy).sqrt() > t {
                finite_diff += 1;
            }
        }
    }
    (max_pair, finite_diff)
}

/// One line of an accuracy table produced by the training harness.
#[derive(Clone, Debug, PartialEq)]
pub struct AccuracyRecord {
    pub task: String,
    pub modality: String,
    pub bits: u8,
    pub test_accuracy: f64,
    /// 1-based line number in the source file.
    pub line: usize,
}

/// Reads a `task,modality,bits,test_accuracy` CSV (columns in any order).
pub fn parse_accuracy_csv<R: Read>(reader: R) -> Result<Vec<AccuracyRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse("line 1", format!("missing column `{name}`")))
    };
    let (task, modality, bits, acc) = (col("task")?, col("modality")?, col("bits")?, col("test_accuracy")?);

    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let loc = format!("line {line}");
        let rec = rec.map_err(|e| Error::parse(&loc, e.to_string()))?;
        let field = |idx: usize| rec.get(idx).ok_or_else(|| Error::parse(&loc, "too few fields"));
        let bits_s = field(bits)?;
        let bits_v: u8 = bits_s
            .parse()
            .ok()
            .filter(|b| (1..=8).contains(b))
            .ok_or_else(|| Error::parse(&loc, format!("bits `{bits_s}` is not an integer in 1..=8")))?;
        let acc_s = field(acc)?;
        let acc_v: f64 = acc_s
            .parse()
            .ok()
            .filter(|a: &f64| (0.0..=1.0).contains(a))
            .ok_or_else(|| Error::parse(&loc, format!("test_accuracy `{acc_s}` is not a number in [0, 1]")))?;
        out.push(AccuracyRecord {
            task: field(task)?.to_string(),
            modality: field(modality)?.to_string(),
            bits: bits_v,
            test_accuracy: acc_v,
            line,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub bits: u8,
    /// µW/pixel
    pub total_power: f64,
    /// Relative to the 1-bit row.
    pub relative_power: f64,
    pub accuracy: Option<f64>,
}

/// Power reports for `N = 1..=8` at a fixed active fraction.
pub fn power_sweep(constants: &PowerConstants, active_fraction: f64, config: &SensorConfig) -> Result<Vec<PowerReport>> {
    (1..=8)
        .map(|bits| estimate_power(constants, bits, active_fraction, config))
        .collect()
}

/// Joins power reports with optional accuracy records, one row per bit depth.
pub fn build_sweep(reports: &[PowerReport], accuracy: Option<&[AccuracyRecord]>) -> Result<Vec<SweepRow>> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Contract("sweep needs at least one power report".into()))?;
    let mut by_bits: BTreeMap<u8, &PowerReport> = BTreeMap::new();
    for r in reports {
        if r.active_fraction != first.active_fraction
            || r.frame_rate != first.frame_rate
            || r.pixel_count != first.pixel_count
        {
            return Err(Error::Contract(
                "power reports must share active fraction and sensor geometry".into(),
            ));
        }
        if by_bits.insert(r.bits, r).is_some() {
            return Err(Error::Contract(format!("duplicate power report for {} bits", r.bits)));
        }
    }
    let base = by_bits
        .get(&1)
        .ok_or_else(|| Error::Contract("sweep needs a 1-bit report to normalize against".into()))?
        .total_power;

    let mut acc_by_bits: BTreeMap<u8, f64> = BTreeMap::new();
    for rec in accuracy.unwrap_or_default() {
        if acc_by_bits.insert(rec.bits, rec.test_accuracy).is_some() {
            return Err(Error::parse(
                format!("line {}", rec.line),
                format!("second accuracy row for {} bits", rec.bits),
            ));
        }
    }

    Ok(by_bits
        .values()
        .map(|r| SweepRow {
            bits: r.bits,
            total_power: r.total_power,
            relative_power: r.total_power / base,
            accuracy: acc_by_bits.get(&r.bits).copied(),
        })
        .collect())
}

pub fn write_sweep_csv<W: Write>(writer: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["bits", "total_uW", "relative_power", "accuracy"])?;
    for r in rows {
        w.write_record([
            r.bits.to_string(),
            r.total_power.to_string(),
            r.relative_power.to_string(),
            r.accuracy.map(|a| a.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_frame_stats_csv<W: Write>(writer: W, stats: &[(u32, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["frame_index", "active_fraction"])?;
    for (idx, frac) in stats {
        w.write_record([idx.to_string(), frac.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_calibration_csv<W: Write>(writer: W, cal: &CalibrationResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "target_fraction",
        "tolerance",
        "threshold",
        "achieved_fraction",
        "iterations",
        "converged",
        "max_reachable_fraction",
    ])?;
    w.write_record([
        cal.target_fraction.to_string(),
        cal.tolerance.to_string(),
        cal.threshold.to_string(),
        cal.achieved_fraction.to_string(),
        cal.iterations.to_string(),
        cal.converged.to_string(),
        cal.max_reachable_fraction.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::Modality;
    use crate::synthetic::{blurred_noise, checkerboard};

    fn sensor() -> SensorConfig {
        SensorConfig::new(0.05, 1, Modality::Spatial, 64, 64, 30.0).unwrap()
    }

    #[test]
    fn active_fraction_examples() {
        let z = GradientFrame::new(2, 2, vec![0; 4], 1, Modality::Spatial, 0.1, 0).unwrap();
        assert_eq!(active_fraction(&z), 0.0);
        let q = GradientFrame::new(2, 2, vec![0, 0, 0, 1], 1, Modality::Spatial, 0.1, 0).unwrap();
        assert_eq!(active_fraction(&q), 0.25);
        let all = GradientFrame::new_unchecked(2, 2, vec![1; 4], 1, Modality::Spatial, 0.1, 0);
        assert_eq!(active_fraction(&all), 1.0);
    }

    #[test]
    fn calibration_fails_on_constant_frames() {
        let frames = vec![IntensityFrame::constant(16, 16, 0.4, 0).unwrap(); 3];
        let cal = calibrate_threshold(&frames, 0.1, 0.01).unwrap();
        assert!(!cal.converged);
        assert_eq!(cal.achieved_fraction, 0.0);
        assert_eq!(cal.max_reachable_fraction, 0.0);
    }

    #[test]
    fn calibration_near_full_activity_drives_threshold_to_zero() {
        // interior fraction of a 256x256 board is (255/256)^2 ~ 0.9922
        let board = checkerboard(256, 256, 1).unwrap();
        let cal = calibrate_threshold(std::slice::from_ref(&board), 0.999, 0.0005).unwrap();
        assert!(!cal.converged);
        assert_eq!(cal.threshold, 0.0);
        assert!((cal.achieved_fraction - (255.0f64 / 256.0).powi(2)).abs() < 1e-12);

        let cal = calibrate_threshold(&[board], 0.99, 0.005).unwrap();
        assert!(cal.converged);
    }

    #[test]
    fn calibration_hits_target_on_noise() {
        let frames: Vec<_> = (0..4).map(|s| blurred_noise(64, 64, 2.0, s).unwrap()).collect();
        let cal = calibrate_threshold(&frames, 0.10, 0.01).unwrap();
        assert!(cal.converged, "{cal:?}");
        assert!(cal.threshold > 0.0 && cal.threshold < 1.0);
        assert!((0.09..=0.11).contains(&cal.achieved_fraction));
        assert!(cal.iterations <= MAX_CALIBRATION_ITERATIONS);

        let again = calibrate_threshold(&frames, 0.10, 0.01).unwrap();
        assert_eq!(cal, again);
    }

    #[test]
    fn calibration_input_errors() {
        assert!(calibrate_threshold(&[], 0.1, 0.01).is_err());
        let f = vec![IntensityFrame::constant(4, 4, 0.0, 0).unwrap()];
        assert!(calibrate_threshold(&f, 0.0, 0.01).is_err());
        assert!(calibrate_threshold(&f, 1.0, 0.01).is_err());
        assert!(calibrate_threshold(&f, 0.5, 0.0).is_err());
    }

    #[test]
    fn fattening_on_constant_frame_is_undefined() {
        let c = IntensityFrame::constant(8, 8, 0.5, 0).unwrap();
        assert!(matches!(edge_fattening_ratio(&c, 0.1), Err(Error::UndefinedRatio(_))));
    }

    #[test]
    fn fattening_on_vertical_step_is_one() {
        let rows: Vec<Vec<f32>> = (0..4).map(|_| vec![0.0, 0.0, 1.0, 1.0]).collect();
        let f = IntensityFrame::from_rows(&rows, 0).unwrap();
        assert_eq!(edge_counts(&f, 0.5), (3, 3));
        assert_eq!(edge_fattening_ratio(&f, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn left_top_pair_alone_triggers_activation() {
        // P sits halfway between L and T: |L - T| = 1 fires, the L2 backward gradient is ~0.707
        let f = IntensityFrame::from_rows(&[[0.0, 1.0], [0.0, 0.5]], 0).unwrap();
        assert_eq!(edge_counts(&f, 0.75), (1, 0));
        assert_eq!(edge_counts(&f, 0.7), (1, 1));
    }

    #[test]
    fn sweep_normalizes_and_joins() {
        let reports = power_sweep(&PowerConstants::default(), 0.1, &sensor()).unwrap();
        let rows = build_sweep(&reports, None).unwrap();
        assert_eq!(rows.len(), 8);
        assert_eq!(rows[0].relative_power, 1.0);
        assert!((rows[7].relative_power - 91.311).abs() < 1e-3);
        assert!(rows.windows(2).all(|w| w[1].relative_power > w[0].relative_power));
        assert!(rows.iter().all(|r| r.accuracy.is_none()));

        let csv = "task,modality,bits,test_accuracy\ncifar10,multibit_gradient,1,0.62\ncifar10,multibit_gradient,8,0.66\n";
        let acc = parse_accuracy_csv(csv.as_bytes()).unwrap();
        let rows = build_sweep(&reports, Some(&acc)).unwrap();
        assert_eq!(rows.len(), 8);
        let with_acc: Vec<u8> = rows.iter().filter(|r| r.accuracy.is_some()).map(|r| r.bits).collect();
        assert_eq!(with_acc, vec![1, 8]);
        assert_eq!(rows[7].accuracy, Some(0.66));
    }

    #[test]
    fn sweep_rejects_bad_inputs() {
        let reports = power_sweep(&PowerConstants::default(), 0.1, &sensor()).unwrap();
        assert!(build_sweep(&reports[1..], None).is_err());
        let mut mixed = reports.clone();
        mixed[3] = estimate_power(&PowerConstants::default(), 4, 0.2, &sensor()).unwrap();
        assert!(build_sweep(&mixed, None).is_err());

        let dup = "task,modality,bits,test_accuracy\nc,m,2,0.5\nc,m,2,0.6\n";
        let acc = parse_accuracy_csv(dup.as_bytes()).unwrap();
        let err = build_sweep(&reports, Some(&acc)).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn accuracy_csv_errors_name_the_row() {
        let bad = "task,modality,bits,test_accuracy\nc,m,1,0.5\nc,m,nine,0.5\n";
        let err = parse_accuracy_csv(bad.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");

        let bad = "task,modality,bits,test_accuracy\nc,m,1,1.5\n";
        assert!(parse_accuracy_csv(bad.as_bytes()).unwrap_err().to_string().contains("line 2"));

        let missing = "task,bits,test_accuracy\nc,1,0.5\n";
        assert!(parse_accuracy_csv(missing.as_bytes()).is_err());
    }

    #[test]
    fn sweep_csv_leaves_missing_accuracy_blank() {
        let rows = vec![
            SweepRow { bits: 1, total_power: 0.5, relative_power: 1.0, accuracy: Some(0.25) },
            SweepRow { bits: 2, total_power: 1.0, relative_power: 2.0, accuracy: None },
        ];
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &rows).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "bits,total_uW,relative_power,accuracy\n1,0.5,1,0.25\n2,1,2,\n"
        );
    }
}
