//! Run configuration: a flat `key=value` file merged with command-line overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::frame::Modality;
use crate::sensor::{SensorConfig, DEFAULT_FRAME_RATE, DEFAULT_THRESHOLD};

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "BGCAM_CONFIG";

pub const DEFAULT_TOLERANCE: f64 = 0.01;

const KNOWN_KEYS: &[&str] = &[
    "input",
    "output",
    "recursive",
    "raw_video",
    "raw_width",
    "raw_height",
    "raw_depth",
    "threshold",
    "bits",
    "modality",
    "frame_rate",
    "target_fraction",
    "tolerance",
    "workers",
];

/// Ordered `key -> value` pairs.
pub type KeyValues = BTreeMap<String, String>;

/// Parses `key=value` lines; `#` starts a comment, blank lines are ignored.
pub fn parse_key_values(text: &str) -> Result<KeyValues> {
    let mut out = KeyValues::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let loc = format!("line {}", i + 1);
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(&loc, format!("expected key=value, got `{line}`")))?;
        let key = k.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::parse(&loc, format!("unknown key `{key}`")));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> Result<KeyValues> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_key_values(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

#[derive(Clone, Debug, PartialEq)]
pub enum InputSource {
    Images { dir: PathBuf, recursive: bool },
    RawVideo {
        path: PathBuf,
        width: usize,
        height: usize,
        bit_depth: u8,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub input: InputSource,
    pub output: PathBuf,
    pub threshold: f32,
    pub bits: u8,
    pub modality: Modality,
    pub frame_rate: f32,
    /// When set, the threshold is calibrated to this mean active fraction.
    pub target_fraction: Option<f64>,
    pub tolerance: f64,
    pub workers: usize,
}

impl RunConfig {
    /// Merges file settings with overrides; overrides win.
    pub fn resolve(file: &KeyValues, overrides: &KeyValues) -> Result<Self> {
        let mut kv = file.clone();
        kv.extend(overrides.iter().map(|(k, v)| (k.clone(), v.clone())));
        Self::from_key_values(&kv)
    }

    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        fn get<T: std::str::FromStr>(kv: &KeyValues, key: &str) -> Result<Option<T>> {
            kv.get(key)
                .map(|v| {
                    v.parse::<T>()
                        .map_err(|_| Error::Config(format!("invalid value `{v}` for `{key}`")))
                })
                .transpose()
        }

        let input = match (kv.get("raw_video"), kv.get("input")) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("set either `input` or `raw_video`, not both".into()))
            }
            (Some(path), None) => InputSource::RawVideo {
                path: PathBuf::from(path),
                width: get(kv, "raw_width")?
                    .ok_or_else(|| Error::Config("`raw_video` needs `raw_width`".into()))?,
                height: get(kv, "raw_height")?
                    .ok_or_else(|| Error::Config("`raw_video` needs `raw_height`".into()))?,
                bit_depth: get(kv, "raw_depth")?.unwrap_or(8),
            },
            (None, Some(dir)) => InputSource::Images {
                dir: PathBuf::from(dir),
                recursive: get(kv, "recursive")?.unwrap_or(true),
            },
            (None, None) => return Err(Error::Config("no `input` directory given".into())),
        };
        let output = kv
            .get("output")
            .map(PathBuf::from)
            .ok_or_else(|| Error::Config("no `output` directory given".into()))?;

        let cfg = Self {
            input,
            output,
            threshold: get(kv, "threshold")?.unwrap_or(DEFAULT_THRESHOLD),
            bits: get(kv, "bits")?.unwrap_or(1),
            modality: get(kv, "modality")?.unwrap_or(Modality::Spatial),
            frame_rate: get(kv, "frame_rate")?.unwrap_or(DEFAULT_FRAME_RATE),
            target_fraction: get(kv, "target_fraction")?,
            tolerance: get(kv, "tolerance")?.unwrap_or(DEFAULT_TOLERANCE),
            workers: get(kv, "workers")?.unwrap_or(1),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        // geometry is only known after ingestion
        self.sensor_config(2, 2)?;
        if self.workers == 0 {
            return Err(Error::Config("worker count must be at least 1".into()));
        }
        if let Some(t) = self.target_fraction {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::Config(format!("target fraction must lie in (0, 1), got {t}")));
            }
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::Config(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        Ok(())
    }

    pub fn sensor_config(&self, width: usize, height: usize) -> Result<SensorConfig> {
        SensorConfig::new(self.threshold, self.bits, self.modality, width, height, self.frame_rate)
    }
}
