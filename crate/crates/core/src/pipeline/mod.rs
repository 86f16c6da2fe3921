//! Dataset and video conversion: ingestion, run configuration, dense outputs
//! and the manifest consumed by training tools.

pub mod config;
pub mod convert;
pub mod dense;
pub mod ingest;
pub mod manifest;

pub use config::{InputSource, RunConfig};
pub use convert::{convert_dataset, ConvertSummary};
pub use ingest::{ingest_images, ingest_raw_video, Ingested};
pub use manifest::{DatasetManifest, ManifestEntry};
