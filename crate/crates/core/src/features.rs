//! EVCF feature-sequence files.
//!
//! An EVCF file holds one time-major matrix of encoder features. Layout,
//! all integers and floats little-endian:
//!
//! | bytes            | field                              |
//! |------------------|------------------------------------|
//! | 4                | magic `EVCF`                       |
//! | 4                | `u32` version (= 1)                |
//! | 4                | `u32` feature dimension `d_f`      |
//! | 4                | `u32` sequence length `l_f`        |
//! | 8                | `f64` sampling rate in Hz          |
//! | 2                | `u16` tag length `n`               |
//! | n                | UTF-8 source tag                   |
//! | 4 · l_f · d_f    | `f32` payload, frame after frame   |
//!
//! Values are stored as `f32` and widened to `f64` on read.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"EVCF";
pub const VERSION: u32 = 1;
const HEADER_FIXED: usize = 4 + 4 + 4 + 4 + 8 + 2;

/// A time-major sequence of feature vectors sampled at `rate_hz`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    dims: usize,
    rate_hz: f64,
    data: Vec<f64>,
    source_tag: String,
}

impl FeatureSequence {
    /// Builds a sequence from frame-contiguous `data` (`len / dims` frames).
    pub fn new(dims: usize, rate_hz: f64, data: Vec<f64>, source_tag: impl Into<String>) -> Result<Self> {
        if dims == 0 {
            return Err(Error::InvalidData("feature dimension must be positive".into()));
        }
        if !data.len().is_multiple_of(dims) {
            return Err(Error::InvalidData(format!(
                "payload of {} values is not a multiple of dimension {dims}",
                data.len()
            )));
        }
        let len = data.len() / dims;
        if len < 2 {
            return Err(Error::InvalidData(format!("need at least 2 frames, got {len}")));
        }
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::InvalidData(format!("rate_hz must be positive, got {rate_hz}")));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite value at frame {}, dim {}",
                pos / dims,
                pos % dims
            )));
        }
        let source_tag = source_tag.into();
        if source_tag.len() > u16::MAX as usize {
            return Err(Error::InvalidData("source tag longer than 65535 bytes".into()));
        }
        Ok(Self {
            dims,
            rate_hz,
            data,
            source_tag,
        })
    }

    /// Builds a sequence from a list of equally sized frames.
    pub fn from_frames(frames: &[Vec<f64>], rate_hz: f64, source_tag: impl Into<String>) -> Result<Self> {
        let dims = frames.first().map_or(0, Vec::len);
        if frames.iter().any(|f| f.len() != dims) {
            return Err(Error::InvalidData("frames have differing dimensions".into()));
        }
        Self::new(dims, rate_hz, frames.concat(), source_tag)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Number of frames.
    pub fn len(&self) -> usize {
        self.data.len() / self.dims
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn source_tag(&self) -> &str {
        &self.source_tag
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn frame(&self, index: usize) -> &[f64] {
        &self.data[index * self.dims..(index + 1) * self.dims]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dims)
    }

    /// Multiplies every value by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let data = self.data.iter().map(|v| v * factor).collect();
        Self::new(self.dims, self.rate_hz, data, self.source_tag.clone())
    }

    /// Serializes into EVCF bytes. Values are narrowed to `f32`.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let dims = u32::try_from(self.dims)
            .map_err(|_| Error::InvalidData("feature dimension exceeds u32".into()))?;
        let len = u32::try_from(self.len())
            .map_err(|_| Error::InvalidData("sequence length exceeds u32".into()))?;
        let tag = self.source_tag.as_bytes();
        let mut out = Vec::with_capacity(HEADER_FIXED + tag.len() + 4 * self.data.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&dims.to_le_bytes());
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(&self.rate_hz.to_le_bytes());
        out.extend_from_slice(&(tag.len() as u16).to_le_bytes());
        out.extend_from_slice(tag);
        for &v in &self.data {
            let narrow = v as f32;
            if !narrow.is_finite() {
                return Err(Error::InvalidData(format!("value {v} overflows f32")));
            }
            out.extend_from_slice(&narrow.to_le_bytes());
        }
        Ok(out)
    }

    /// Parses EVCF bytes. Never allocates more than the header declares, and
    /// only after checking that the declared payload is actually present.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic = cur.take(4).ok_or_else(|| Error::Format("file shorter than magic".into()))?;
        if magic != MAGIC {
            return Err(Error::Format(format!("bad magic {magic:?}, expected \"EVCF\"")));
        }
        let version = cur.u32().ok_or_else(|| truncated("version"))?;
        if version != VERSION {
            return Err(Error::UnsupportedVersion {
                found: version,
                expected: VERSION,
            });
        }
        let dims = cur.u32().ok_or_else(|| truncated("dimension"))? as usize;
        let len = cur.u32().ok_or_else(|| truncated("length"))? as usize;
        let rate_hz = f64::from_le_bytes(cur.take(8).ok_or_else(|| truncated("rate"))?.try_into().unwrap());
        let tag_len = u16::from_le_bytes(cur.take(2).ok_or_else(|| truncated("tag length"))?.try_into().unwrap());
        let tag_bytes = cur.take(tag_len as usize).ok_or_else(|| truncated("source tag"))?;
        let source_tag = std::str::from_utf8(tag_bytes)
            .map_err(|_| Error::InvalidData("source tag is not valid UTF-8".into()))?
            .to_owned();

        let count = dims
            .checked_mul(len)
            .ok_or_else(|| Error::CorruptFile("declared payload size overflows".into()))?;
        let payload_len = count
            .checked_mul(4)
            .ok_or_else(|| Error::CorruptFile("declared payload size overflows".into()))?;
        let remaining = bytes.len() - cur.pos;
        if remaining < payload_len {
            return Err(Error::CorruptFile(format!(
                "payload truncated: header declares {count} values ({payload_len} bytes), {remaining} bytes present"
            )));
        }
        if remaining > payload_len {
            return Err(Error::CorruptFile(format!(
                "{} trailing bytes after payload",
                remaining - payload_len
            )));
        }
        let payload = cur.take(payload_len).expect("length checked above");
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        Self::new(dims, rate_hz, data, source_tag)
    }
}

fn truncated(what: &str) -> Error {
    Error::CorruptFile(format!("header truncated before {what}"))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let out = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(out)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureSequence> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    FeatureSequence::from_bytes(&bytes)
}

pub fn write_features(seq: &FeatureSequence, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = seq.to_bytes()?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
