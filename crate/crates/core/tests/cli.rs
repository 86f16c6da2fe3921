use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bgcam::pipeline::dense::read_dense;
use bgcam::pipeline::manifest::DatasetManifest;
use bgcam::synthetic::blurred_noise;
use bgcam::{spatial_gradient, EventStream, IntensityFrame, Modality, SensorConfig};
use image::{GrayImage, Luma};

fn bgcam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bgcam"))
        .args(args)
        .env_remove("BGCAM_CONFIG")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_png(frame: &IntensityFrame, path: &Path) {
    let data = frame.pixels().iter().map(|v| (v * 255.0).round() as u8).collect();
    GrayImage::from_raw(frame.width() as u32, frame.height() as u32, data)
        .unwrap()
        .save(path)
        .unwrap();
}

/// Two labelled folders of blurred-noise images.
fn dataset(root: &Path) -> std::path::PathBuf {
    let input = root.join("in");
    for (label, seeds) in [("cats", 0..3u64), ("dogs", 3..5)] {
        fs::create_dir_all(input.join(label)).unwrap();
        for s in seeds {
            write_png(&blurred_noise(24, 20, 1.0, s).unwrap(), &input.join(label).join(format!("{s}.png")));
        }
    }
    input
}

#[test]
fn no_arguments_prints_usage() {
    let o = bgcam(&[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn power_subcommand() {
    let o = bgcam(&["power", "--bits", "4", "--active-fraction", "0.1"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), "bits,active_fraction,scan_uW,deliver_uW,total_uW,energy_pJ");
    let total: f64 = lines.next().unwrap().split(',').nth(4).unwrap().parse().unwrap();
    assert!((total - 0.04035).abs() < 1e-12);
}

#[test]
fn sweep_joins_accuracy_table() {
    let dir = tempfile::tempdir().unwrap();
    let acc = dir.path().join("acc.csv");
    fs::write(
        &acc,
        "task,modality,bits,test_accuracy\ncifar,spatial,1,0.61\ncifar,spatial,4,0.70\nmnist,spatial,1,0.98\n",
    )
    .unwrap();
    let o = bgcam(&["sweep", "--accuracy-csv", p(&acc), "--task", "cifar"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let rows: Vec<Vec<&str>> = out.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 8);
    assert_eq!(rows[0][3], "0.61");
    assert_eq!(rows[3][3], "0.7");
    assert!(rows.iter().enumerate().all(|(i, r)| i == 0 || i == 3 || r[3].is_empty()));

    fs::write(&acc, "task,modality,bits,test_accuracy\ncifar,spatial,one,0.61\n").unwrap();
    let o = bgcam(&["sweep", "--accuracy-csv", p(&acc)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn convert_then_encode_decode_stats() {
    let dir = tempfile::tempdir().unwrap();
    let input = dataset(dir.path());
    let out = dir.path().join("out");
    let o = bgcam(&["convert", "--input", p(&input), "--output", p(&out), "--bits", "3", "--threshold", "0.02"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let manifest = DatasetManifest::read_from(fs::read_to_string(out.join("manifest.tsv")).unwrap().as_bytes()).unwrap();
    assert_eq!(manifest.entries.len(), 5);
    assert_eq!(manifest.labels, vec!["cats".to_string(), "dogs".to_string()]);
    assert_eq!(manifest.entries[0].source, "cats/0.png");
    assert_eq!(manifest.entries[0].label.as_deref(), Some("cats"));
    assert_eq!(manifest.entries[4].label.as_deref(), Some("dogs"));
    assert_eq!(manifest.config.bits(), 3);

    // re-encoding the dense outputs reproduces the stream byte for byte
    let again = dir.path().join("again.bgc");
    let o = bgcam(&["encode", "--manifest", p(&out.join("manifest.tsv")), "--output", p(&again)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(&again).unwrap(), fs::read(out.join("stream.bgc")).unwrap());

    let decoded = dir.path().join("decoded");
    let o = bgcam(&["decode", "--input", p(&again), "--output", p(&decoded)]);
    assert_eq!(o.status.code(), Some(0));
    for e in &manifest.entries {
        let c = &manifest.config;
        let a = read_dense(&out.join(&e.output), 3, c.modality(), c.threshold(), e.timestamp_index).unwrap();
        let b = read_dense(
            &decoded.join(format!("frame_{:06}.png", e.timestamp_index)),
            3,
            c.modality(),
            c.threshold(),
            e.timestamp_index,
        )
        .unwrap();
        assert_eq!(a, b);
    }

    let csv = dir.path().join("stats.csv");
    let o = bgcam(&["stats", "--input", p(&again), "--output", p(&csv)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("frames: 5"));
    let stats = fs::read_to_string(&csv).unwrap();
    assert_eq!(stats.lines().next().unwrap(), "frame_index,active_fraction");
    assert_eq!(stats.lines().count(), 6);
    assert_eq!(stats, fs::read_to_string(out.join("frame_stats.csv")).unwrap());
}

#[test]
fn single_temporal_frame_equals_spatial_gradient() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in");
    fs::create_dir_all(&input).unwrap();
    write_png(&blurred_noise(30, 22, 1.0, 9).unwrap(), &input.join("only.png"));
    let out = dir.path().join("out");
    let o = bgcam(&[
        "convert", "--input", p(&input), "--output", p(&out), "--modality", "temporal", "--threshold", "0.03",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let stream = EventStream::from_bytes(&fs::read(out.join("stream.bgc")).unwrap()).unwrap();
    let temporal = stream.decode_all().unwrap().remove(0);
    let frame = bgcam::pipeline::ingest::load_intensity(&input.join("only.png")).unwrap();
    let spatial = spatial_gradient(&frame, &SensorConfig::new(0.03, 1, Modality::Spatial, 30, 22, 30.0).unwrap()).unwrap();
    assert!(spatial.active_count() > 0);
    assert_eq!(temporal.values(), spatial.values());
    assert_eq!(temporal.modality(), Modality::Temporal);
}

#[test]
fn corrupt_inputs_are_skipped_with_status_3() {
    let dir = tempfile::tempdir().unwrap();
    let input = dataset(dir.path());
    fs::write(input.join("cats").join("broken.png"), b"not a png").unwrap();
    fs::write(input.join("notes.txt"), b"ignored").unwrap();
    let out = dir.path().join("out");
    let o = bgcam(&["convert", "--input", p(&input), "--output", p(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("broken.png"));
    assert!(stdout(&o).contains("skipped 1"));
    let manifest = fs::read_to_string(out.join("manifest.tsv")).unwrap();
    assert!(!manifest.contains("broken"));
    assert!(!manifest.contains("notes"));
}

#[test]
fn config_file_and_environment() {
    let dir = tempfile::tempdir().unwrap();
    let input = dataset(dir.path());
    let out = dir.path().join("out");
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        format!("# from file\ninput = {}\noutput = {}\nbits = 2\nthreshold = 0.04\n", p(&input), p(&out)),
    )
    .unwrap();

    let o = Command::new(env!("CARGO_BIN_EXE_bgcam"))
        .args(["convert", "--bits", "5"])
        .env("BGCAM_CONFIG", &cfg)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = DatasetManifest::read_from(fs::read_to_string(out.join("manifest.tsv")).unwrap().as_bytes()).unwrap();
    assert_eq!(m.config.bits(), 5);
    assert_eq!(m.config.threshold(), 0.04);

    fs::write(&cfg, "input = x\nshade = blue\n").unwrap();
    let o = bgcam(&["convert", "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("shade"));
}

#[test]
fn failed_run_leaves_no_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let input = dataset(dir.path());
    GrayImage::from_pixel(10, 10, Luma([0])).save(input.join("small.png")).unwrap();

    let fresh = dir.path().join("fresh");
    let o = bgcam(&["convert", "--input", p(&input), "--output", p(&fresh)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!fresh.exists());

    let existing = dir.path().join("existing");
    fs::create_dir_all(&existing).unwrap();
    fs::write(existing.join("keep.txt"), "mine").unwrap();
    let o = bgcam(&["convert", "--input", p(&input), "--output", p(&existing)]);
    assert_eq!(o.status.code(), Some(1));
    let left: Vec<_> = fs::read_dir(&existing).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(left, vec!["keep.txt"]);
}

#[test]
fn calibrate_reports_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let input = dataset(dir.path());
    let csv = dir.path().join("cal.csv");
    let o = bgcam(&["calibrate", "--input", p(&input), "--target-fraction", "0.2", "--output", p(&csv)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("threshold "));
    assert!(fs::read_to_string(&csv).unwrap().contains("true"));

    let flat = dir.path().join("flat");
    fs::create_dir_all(&flat).unwrap();
    GrayImage::from_pixel(8, 8, Luma([90])).save(flat.join("a.png")).unwrap();
    let o = bgcam(&["calibrate", "--input", p(&flat)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("calibration failed"));
}

#[test]
fn raw_video_input() {
    let dir = tempfile::tempdir().unwrap();
    let video = dir.path().join("clip.raw");
    let mut bytes = Vec::new();
    for s in 0..4 {
        let f = blurred_noise(16, 12, 1.0, s).unwrap();
        bytes.extend(f.pixels().iter().map(|v| (v * 255.0).round() as u8));
    }
    fs::write(&video, &bytes).unwrap();
    let out = dir.path().join("out");
    let o = bgcam(&[
        "convert", "--raw-video", p(&video), "--raw-width", "16", "--raw-height", "12", "--output", p(&out),
        "--modality", "temporal",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("gradients/frame_000003.png").exists());
    let stream = EventStream::from_bytes(&fs::read(out.join("stream.bgc")).unwrap()).unwrap();
    assert_eq!(stream.frames.len(), 4);
}
