//! Line-oriented dataset manifest.
//!
//! ```text
//! # bgcam-manifest 1
//! # threshold=0.05
//! # bits=1
//! # modality=spatial
//! # width=28
//! # height=28
//! # frame_rate=30
//! # labels=cat,dog
//! # columns=source,output,label,index
//! cat/a.png<TAB>gradients/cat/a.png<TAB>cat<TAB>0
//! ```
//!
//! Sources are relative to the ingested directory, outputs relative to the
//! manifest's directory. An empty label field means "unlabeled".

use std::collections::{BTreeSet, HashSet};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::frame::Modality;
use crate::sensor::SensorConfig;

pub const MANIFEST_MAGIC: &str = "# bgcam-manifest 1";
pub const MANIFEST_FILE: &str = "manifest.tsv";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub source: String,
    pub output: String,
    pub label: Option<String>,
    pub timestamp_index: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub config: SensorConfig,
    /// Declared label set, sorted.
    pub labels: Vec<String>,
}

impl DatasetManifest {
    /// Builds a manifest, deriving the label set from the entries.
    pub fn new(entries: Vec<ManifestEntry>, config: SensorConfig) -> Result<Self> {
        let labels: BTreeSet<String> = entries.iter().filter_map(|e| e.label.clone()).collect();
        let m = Self {
            entries,
            config,
            labels: labels.into_iter().collect(),
        };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        let mut sources = HashSet::new();
        let mut outputs = HashSet::new();
        for e in &self.entries {
            for field in [&e.source, &e.output] {
                if field.is_empty() || field.contains(['\t', '\n', '\r']) {
                    return Err(Error::Contract(format!("unusable path in manifest: {field:?}")));
                }
            }
            if !sources.insert(e.source.as_str()) {
                return Err(Error::Contract(format!("duplicate source {}", e.source)));
            }
            if !outputs.insert(e.output.as_str()) {
                return Err(Error::Contract(format!("duplicate output {}", e.output)));
            }
            if let Some(label) = &e.label {
                if label.is_empty() || label.contains(['\t', '\n', '\r', ',']) {
                    return Err(Error::Contract(format!("unusable label {label:?}")));
                }
                if !self.labels.contains(label) {
                    return Err(Error::Contract(format!("label {label} is not declared")));
                }
            }
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let c = &self.config;
        writeln!(w, "{MANIFEST_MAGIC}")?;
        writeln!(w, "# threshold={}", c.threshold())?;
        writeln!(w, "# bits={}", c.bits())?;
        writeln!(w, "# modality={}", c.modality())?;
        writeln!(w, "# width={}", c.width())?;
        writeln!(w, "# height={}", c.height())?;
        writeln!(w, "# frame_rate={}", c.frame_rate())?;
        writeln!(w, "# labels={}", self.labels.join(","))?;
        writeln!(w, "# columns=source,output,label,index")?;
        for e in &self.entries {
            writeln!(
                w,
                "{}\t{}\t{}\t{}",
                e.source,
                e.output,
                e.label.as_deref().unwrap_or(""),
                e.timestamp_index
            )?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let first = lines.next().transpose()?.unwrap_or_default();
        if first.trim_end() != MANIFEST_MAGIC {
            return Err(Error::parse("line 1", "missing manifest header"));
        }
        let mut threshold = None;
        let mut bits = None;
        let mut modality = None;
        let mut width = None;
        let mut height = None;
        let mut frame_rate = None;
        let mut labels: Option<Vec<String>> = None;
        let mut entries = Vec::new();

        for (i, line) in lines.enumerate() {
            let line = line?;
            let loc = format!("line {}", i + 2);
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                let Some((key, value)) = meta.trim().split_once('=') else {
                    continue;
                };
                let bad = |what: &str| Error::parse(&loc, format!("invalid {what} `{value}`"));
                match key {
                    "threshold" => threshold = Some(value.parse::<f32>().map_err(|_| bad("threshold"))?),
                    "bits" => bits = Some(value.parse::<u8>().map_err(|_| bad("bits"))?),
                    "modality" => modality = Some(value.parse::<Modality>().map_err(|_| bad("modality"))?),
                    "width" => width = Some(value.parse::<usize>().map_err(|_| bad("width"))?),
                    "height" => height = Some(value.parse::<usize>().map_err(|_| bad("height"))?),
                    "frame_rate" => frame_rate = Some(value.parse::<f32>().map_err(|_| bad("frame rate"))?),
                    "labels" => {
                        labels = Some(
                            value
                                .split(',')
                                .filter(|s| !s.is_empty())
                                .map(str::to_string)
                                .collect(),
                        )
                    }
                    _ => {}
                }
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(Error::parse(&loc, format!("expected 4 tab-separated fields, got {}", fields.len())));
            }
            let timestamp_index = fields[3]
                .parse()
                .map_err(|_| Error::parse(&loc, format!("invalid index `{}`", fields[3])))?;
            entries.push(ManifestEntry {
                source: fields[0].to_string(),
                output: fields[1].to_string(),
                label: (!fields[2].is_empty()).then(|| fields[2].to_string()),
                timestamp_index,
            });
        }

        let missing = |k: &str| Error::parse("header", format!("missing `{k}`"));
        let config = SensorConfig::new(
            threshold.ok_or_else(|| missing("threshold"))?,
            bits.ok_or_else(|| missing("bits"))?,
            modality.ok_or_else(|| missing("modality"))?,
            width.ok_or_else(|| missing("width"))?,
            height.ok_or_else(|| missing("height"))?,
            frame_rate.ok_or_else(|| missing("frame_rate"))?,
        )?;
        let mut labels = labels.unwrap_or_default();
        labels.sort();
        let m = Self {
            entries,
            config,
            labels,
        };
        m.validate()?;
        Ok(m)
    }
}
