//! Sparse address-event readout and the `.bgc` stream file.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "BGC1" | version u8 = 1 | modality u8 | bits u8 | reserved u8 = 0
//! width u16 | height u16 | frame_rate f32 | threshold f32 | frame_count u32
//! per frame: timestamp_index u32 | event_count u32
//!            event_count x (address u32 [+ value u8 when bits > 1])
//! ```
//!
//! Addresses are linear row-major pixel indices, ascending within a frame.
//! Binary streams carry addresses only.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::frame::{max_code, GradientFrame, Modality};
use crate::sensor::SensorConfig;

pub const MAGIC: [u8; 4] = *b"BGC1";
pub const VERSION: u8 = 1;
pub const HEADER_BYTES: u64 = 24;
pub const FRAME_HEADER_BYTES: u64 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Event {
    pub address: u32,
    pub value: u8,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventFrame {
    pub timestamp_index: u32,
    pub events: Vec<Event>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StreamHeader {
    pub width: u16,
    pub height: u16,
    pub frame_rate: f32,
    pub threshold: f32,
    pub bits: u8,
    pub modality: Modality,
}

impl StreamHeader {
    pub fn from_config(config: &SensorConfig) -> Result<Self> {
        let dim = |v: usize, name: &str| {
            u16::try_from(v).map_err(|_| Error::Contract(format!("{name} {v} does not fit the .bgc header")))
        };
        Ok(Self {
            width: dim(config.width(), "width")?,
            height: dim(config.height(), "height")?,
            frame_rate: config.frame_rate(),
            threshold: config.threshold(),
            bits: config.bits(),
            modality: config.modality(),
        })
    }

    /// Header matching an existing gradient frame.
    pub fn for_frame(frame: &GradientFrame, frame_rate: f32) -> Result<Self> {
        let dim = |v: usize, name: &str| {
            u16::try_from(v).map_err(|_| Error::Contract(format!("{name} {v} does not fit the .bgc header")))
        };
        Ok(Self {
            width: dim(frame.width(), "width")?,
            height: dim(frame.height(), "height")?,
            frame_rate,
            threshold: frame.threshold(),
            bits: frame.bits(),
            modality: frame.modality(),
        })
    }

    pub fn pixel_count(&self) -> usize {
        usize::from(self.width) * usize::from(self.height)
    }

    fn event_bytes(&self) -> u64 {
        if self.bits > 1 {
            5
        } else {
            4
        }
    }

    fn validate(&self) -> Result<()> {
        if self.width < 2 || self.height < 2 {
            return Err(Error::CorruptStream(format!(
                "geometry {}x{} is smaller than 2x2",
                self.width, self.height
            )));
        }
        if !(1..=8).contains(&self.bits) {
            return Err(Error::CorruptStream(format!("bits {} outside 1..=8", self.bits)));
        }
        if self.modality == Modality::Temporal && self.bits != 1 {
            return Err(Error::CorruptStream("temporal stream with bits > 1".into()));
        }
        Ok(())
    }

    fn matches(&self, frame: &GradientFrame) -> bool {
        frame.width() == usize::from(self.width)
            && frame.height() == usize::from(self.height)
            && frame.bits() == self.bits
            && frame.modality() == self.modality
            && frame.threshold() == self.threshold
    }
}

/// Lists the active pixels of a frame, ascending by address.
pub fn encode_frame(frame: &GradientFrame) -> EventFrame {
    let events = frame
        .values()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0)
        .map(|(i, &v)| Event {
            address: i as u32,
            value: v,
        })
        .collect();
    EventFrame {
        timestamp_index: frame.timestamp_index(),
        events,
    }
}

/// Rebuilds the dense frame; unlisted pixels are 0.
pub fn decode_frame(event_frame: &EventFrame, header: &StreamHeader) -> Result<GradientFrame> {
    header.validate()?;
    let n = header.pixel_count();
    let max = max_code(header.bits);
    let mut values = vec![0u8; n];
    let mut last: Option<u32> = None;
    for ev in &event_frame.events {
        if last.is_some_and(|a| ev.address <= a) {
            return Err(Error::CorruptStream(format!(
                "frame {}: address {} is not ascending",
                event_frame.timestamp_index, ev.address
            )));
        }
        if ev.address as usize >= n {
            return Err(Error::CorruptStream(format!(
                "frame {}: address {} outside {} pixels",
                event_frame.timestamp_index, ev.address, n
            )));
        }
        if ev.value == 0 || ev.value > max {
            return Err(Error::CorruptStream(format!(
                "frame {}: value {} at address {} invalid for {}-bit codes",
                event_frame.timestamp_index, ev.value, ev.address, header.bits
            )));
        }
        values[ev.address as usize] = ev.value;
        last = Some(ev.address);
    }
    GradientFrame::new(
        usize::from(header.width),
        usize::from(header.height),
        values,
        header.bits,
        header.modality,
        header.threshold,
        event_frame.timestamp_index,
    )
    .map_err(|e| Error::CorruptStream(format!("frame {}: {e}", event_frame.timestamp_index)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EventStream {
    pub header: StreamHeader,
    pub frames: Vec<EventFrame>,
}

impl EventStream {
    /// Encodes a sequence of gradient frames that all agree with `header`.
    pub fn from_frames(header: StreamHeader, frames: &[GradientFrame]) -> Result<Self> {
        header.validate().map_err(|e| Error::Contract(e.to_string()))?;
        let mut out = Vec::with_capacity(frames.len());
        for f in frames {
            if !header.matches(f) {
                return Err(Error::Contract(format!(
                    "frame {} does not match the stream header",
                    f.timestamp_index()
                )));
            }
            out.push(encode_frame(f));
        }
        let stream = Self { header, frames: out };
        stream.check_order().map_err(|e| Error::Contract(e.to_string()))?;
        Ok(stream)
    }

    fn check_order(&self) -> Result<()> {
        for pair in self.frames.windows(2) {
            if pair[1].timestamp_index <= pair[0].timestamp_index {
                return Err(Error::CorruptStream(format!(
                    "timestamp {} follows {}",
                    pair[1].timestamp_index, pair[0].timestamp_index
                )));
            }
        }
        Ok(())
    }

    pub fn decode_all(&self) -> Result<Vec<GradientFrame>> {
        self.frames.iter().map(|f| decode_frame(f, &self.header)).collect()
    }

    pub fn total_events(&self) -> u64 {
        self.frames.iter().map(|f| f.events.len() as u64).sum()
    }

    /// Serialized size in bytes.
    pub fn wire_bytes(&self) -> u64 {
        HEADER_BYTES
            + FRAME_HEADER_BYTES * self.frames.len() as u64
            + self.header.event_bytes() * self.total_events()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let h = &self.header;
        w.write_all(&MAGIC)?;
        w.write_u8(VERSION)?;
        w.write_u8(h.modality.code())?;
        w.write_u8(h.bits)?;
        w.write_u8(0)?;
        w.write_u16::<LittleEndian>(h.width)?;
        w.write_u16::<LittleEndian>(h.height)?;
        w.write_f32::<LittleEndian>(h.frame_rate)?;
        w.write_f32::<LittleEndian>(h.threshold)?;
        w.write_u32::<LittleEndian>(count_u32(self.frames.len(), "frame count")?)?;
        for f in &self.frames {
            w.write_u32::<LittleEndian>(f.timestamp_index)?;
            w.write_u32::<LittleEndian>(count_u32(f.events.len(), "event count")?)?;
            for ev in &f.events {
                w.write_u32::<LittleEndian>(ev.address)?;
                if h.bits > 1 {
                    w.write_u8(ev.value)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::with_capacity(self.wire_bytes() as usize);
        self.write_to(&mut buf)?;
        Ok(buf)
    }

    /// Parses and validates a complete stream; trailing bytes are rejected.
    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic, "magic")?;
        if magic != MAGIC {
            return Err(Error::CorruptStream(format!("bad magic {magic:?}")));
        }
        let version = rd(r.read_u8(), "version")?;
        if version != VERSION {
            return Err(Error::CorruptStream(format!("unsupported version {version}")));
        }
        let modality_code = rd(r.read_u8(), "modality")?;
        let modality = Modality::from_code(modality_code)
            .ok_or_else(|| Error::CorruptStream(format!("unknown modality code {modality_code}")))?;
        let bits = rd(r.read_u8(), "bits")?;
        let reserved = rd(r.read_u8(), "reserved byte")?;
        if reserved != 0 {
            return Err(Error::CorruptStream(format!("reserved byte is {reserved}")));
        }
        let header = StreamHeader {
            width: rd(r.read_u16::<LittleEndian>(), "width")?,
            height: rd(r.read_u16::<LittleEndian>(), "height")?,
            frame_rate: rd(r.read_f32::<LittleEndian>(), "frame rate")?,
            threshold: rd(r.read_f32::<LittleEndian>(), "threshold")?,
            bits,
            modality,
        };
        header.validate()?;
        let frame_count = rd(r.read_u32::<LittleEndian>(), "frame count")?;
        let pixels = header.pixel_count();

        let mut frames = Vec::new();
        for _ in 0..frame_count {
            let timestamp_index = rd(r.read_u32::<LittleEndian>(), "frame timestamp")?;
            let event_count = rd(r.read_u32::<LittleEndian>(), "event count")? as usize;
            if event_count > pixels {
                return Err(Error::CorruptStream(format!(
                    "frame {timestamp_index} claims {event_count} events for {pixels} pixels"
                )));
            }
            let mut events = Vec::with_capacity(event_count);
            for _ in 0..event_count {
                let address = rd(r.read_u32::<LittleEndian>(), "event address")?;
                let value = if bits > 1 { rd(r.read_u8(), "event value")? } else { 1 };
                events.push(Event { address, value });
            }
            let frame = EventFrame {
                timestamp_index,
                events,
            };
            // validates addresses, ordering and codes
            decode_frame(&frame, &header)?;
            frames.push(frame);
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::CorruptStream("trailing bytes after last frame".into()));
        }
        let stream = Self { header, frames };
        stream.check_order()?;
        Ok(stream)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::read_from(bytes)
    }
}

fn count_u32(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Contract(format!("{what} {n} exceeds u32")))
}

fn rd<T>(res: std::io::Result<T>, what: &str) -> Result<T> {
    res.map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::CorruptStream(format!("truncated while reading {what}")),
        _ => Error::Io(e),
    })
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    rd(r.read_exact(buf), what)
}

/// Readout bandwidth of a stream.
#[derive(Clone, Debug, PartialEq)]
pub struct BandwidthStats {
    pub frame_event_counts: Vec<u32>,
    pub mean_active_fraction: f64,
    pub wire_bytes: u64,
    /// Size of the same frames as bit-packed dense rasters.
    pub dense_bytes: u64,
    /// `dense_bytes / wire_bytes`
    pub compression_ratio: f64,
}

pub fn bandwidth_stats(stream: &EventStream) -> Result<BandwidthStats> {
    if stream.frames.is_empty() {
        return Err(Error::Contract("bandwidth of an empty stream is undefined".into()));
    }
    let frame_event_counts: Vec<u32> = stream.frames.iter().map(|f| f.events.len() as u32).collect();
    let pixels = stream.header.pixel_count() as u64;
    let frames = stream.frames.len() as u64;
    let mean_active_fraction = stream.total_events() as f64 / (frames * pixels) as f64;
    let wire_bytes = stream.wire_bytes();
    let dense_bytes = frames * (pixels * u64::from(stream.header.bits)).div_ceil(8);
    Ok(BandwidthStats {
        frame_event_counts,
        mean_active_fraction,
        wire_bytes,
        dense_bytes,
        compression_ratio: dense_bytes as f64 / wire_bytes as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary_2x2(values: [u8; 4], ts: u32) -> GradientFrame {
        GradientFrame::new(2, 2, values.to_vec(), 1, Modality::Spatial, 0.5, ts).unwrap()
    }

    fn header(bits: u8) -> StreamHeader {
        StreamHeader {
            width: 2,
            height: 2,
            frame_rate: 30.0,
            threshold: 0.5,
            bits,
            modality: Modality::Spatial,
        }
    }

    #[test]
    fn encode_examples() {
        assert!(encode_frame(&binary_2x2([0; 4], 0)).events.is_empty());
        let ev = encode_frame(&binary_2x2([0, 0, 0, 1], 0));
        assert_eq!(ev.events, vec![Event { address: 3, value: 1 }]);
    }

    #[test]
    fn encode_all_active() {
        // border pixels cannot be active in a valid frame, so build the dense 2x2 directly
        let g = GradientFrame::new_unchecked(2, 2, vec![1; 4], 1, Modality::Spatial, 0.5, 0);
        let ev = encode_frame(&g);
        assert_eq!(ev.events.iter().map(|e| e.address).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
        assert!(ev.events.iter().all(|e| e.value == 1));
    }

    #[test]
    fn decode_examples() {
        let h = header(1);
        let empty = EventFrame { timestamp_index: 4, events: vec![] };
        let g = decode_frame(&empty, &h).unwrap();
        assert_eq!(g.values(), &[0; 4]);
        assert_eq!(g.timestamp_index(), 4);

        let one = EventFrame {
            timestamp_index: 0,
            events: vec![Event { address: 3, value: 1 }],
        };
        assert_eq!(decode_frame(&one, &h).unwrap(), binary_2x2([0, 0, 0, 1], 0));
    }

    #[test]
    fn decode_rejects_corruption() {
        let h = header(2);
        let bad = |events: Vec<(u32, u8)>| {
            let f = EventFrame {
                timestamp_index: 0,
                events: events.into_iter().map(|(address, value)| Event { address, value }).collect(),
            };
            matches!(decode_frame(&f, &h), Err(Error::CorruptStream(_)))
        };
        assert!(bad(vec![(4, 1)]));
        assert!(bad(vec![(3, 1), (3, 1)]));
        assert!(bad(vec![(3, 0)]));
        assert!(bad(vec![(3, 4)]));
        // border address
        assert!(bad(vec![(1, 1)]));
    }

    #[test]
    fn wire_layout_binary() {
        let s = EventStream::from_frames(header(1), &[binary_2x2([0, 0, 0, 1], 7)]).unwrap();
        let bytes = s.to_bytes().unwrap();
        let mut expected = Vec::new();
        expected.extend_from_slice(b"BGC1");
        expected.extend_from_slice(&[1, 0, 1, 0]);
        expected.extend_from_slice(&2u16.to_le_bytes());
        expected.extend_from_slice(&2u16.to_le_bytes());
        expected.extend_from_slice(&30.0f32.to_le_bytes());
        expected.extend_from_slice(&0.5f32.to_le_bytes());
        expected.extend_from_slice(&1u32.to_le_bytes());
        expected.extend_from_slice(&7u32.to_le_bytes());
        expected.extend_from_slice(&1u32.to_le_bytes());
        expected.extend_from_slice(&3u32.to_le_bytes());
        assert_eq!(bytes, expected);
        assert_eq!(bytes.len() as u64, s.wire_bytes());
        assert_eq!(EventStream::from_bytes(&bytes).unwrap(), s);
    }

    #[test]
    fn reader_rejects_malformed_files() {
        let s = EventStream::from_frames(header(1), &[binary_2x2([0, 0, 0, 1], 0)]).unwrap();
        let good = s.to_bytes().unwrap();

        let mut magic = good.clone();
        magic[0] = b'X';
        assert!(matches!(EventStream::from_bytes(&magic), Err(Error::CorruptStream(_))));

        let mut version = good.clone();
        version[4] = 2;
        assert!(EventStream::from_bytes(&version).is_err());

        let mut reserved = good.clone();
        reserved[7] = 1;
        assert!(EventStream::from_bytes(&reserved).is_err());

        assert!(matches!(
            EventStream::from_bytes(&good[..good.len() - 1]),
            Err(Error::CorruptStream(_))
        ));
        let mut trailing = good.clone();
        trailing.push(0);
        assert!(EventStream::from_bytes(&trailing).is_err());
    }

    #[test]
    fn stream_rejects_unordered_frames() {
        let f = binary_2x2([0; 4], 3);
        assert!(EventStream::from_frames(header(1), &[f.clone(), f]).is_err());
        let other_bits = GradientFrame::new(2, 2, vec![0; 4], 2, Modality::Spatial, 0.5, 0).unwrap();
        assert!(EventStream::from_frames(header(1), &[other_bits]).is_err());
    }

    #[test]
    fn bandwidth_examples() {
        let zeros: Vec<_> = (0..3).map(|i| binary_2x2([0; 4], i)).collect();
        let s = EventStream::from_frames(header(1), &zeros).unwrap();
        let st = bandwidth_stats(&s).unwrap();
        assert_eq!(st.mean_active_fraction, 0.0);
        assert_eq!(st.wire_bytes, HEADER_BYTES + 3 * FRAME_HEADER_BYTES);
        assert_eq!(st.frame_event_counts, vec![0, 0, 0]);

        let s = EventStream::from_frames(header(1), &[binary_2x2([0, 0, 0, 1], 0)]).unwrap();
        let st = bandwidth_stats(&s).unwrap();
        assert_eq!(st.mean_active_fraction, 0.25);
        assert_eq!(st.dense_bytes, 1);

        let empty = EventStream { header: header(1), frames: vec![] };
        assert!(bandwidth_stats(&empty).is_err());
    }
}
