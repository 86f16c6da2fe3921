//! Simulation toolkit for binary gradient cameras.
//!
//! Converts intensity images and videos into the spatial and temporal binary
//! (or N-bit) gradient frames such a sensor would read out, estimates the
//! sensor's power draw, packs the sparse active-pixel readout into `.bgc`
//! event streams and measures activity and edge statistics.
//!
//! ```
//! use bgcam::{spatial_gradient, IntensityFrame, SensorConfig};
//!
//! let frame = IntensityFrame::from_rows(&[[0.0, 1.0], [0.0, 1.0]], 0).unwrap();
//! let config = SensorConfig::binary(2, 2).unwrap();
//! let g = spatial_gradient(&frame, &config).unwrap();
//! assert_eq!(g.values(), &[0, 0, 0, 1]);
//! ```

pub mod aer;
pub mod analysis;
pub mod cli;
pub mod error;
pub mod frame;
pub mod pipeline;
pub mod power;
pub mod sensor;
pub mod synthetic;

pub use aer::{bandwidth_stats, decode_frame, encode_frame, BandwidthStats, Event, EventFrame, EventStream, StreamHeader};
pub use analysis::{
    active_fraction, build_sweep, calibrate_threshold, edge_fattening_ratio, CalibrationResult, SweepRow,
};
pub use error::{Error, Result};
pub use frame::{GradientFrame, IntensityFrame, Modality};
pub use power::{estimate_power, power_ratio, PowerConstants, PowerReport};
pub use sensor::{
    convert_stream, local_contrast, multibit_gradient, spatial_gradient, temporal_gradient, SensorConfig,
};
