//! EVFM checkpoints.
//!
//! Little-endian: magic `EVFM`, `u32` version, seven `u32` architecture
//! fields (channels, length, hidden[0], hidden[1], time_dim, class_dim,
//! class_count), `u64` parameter count, the `f64` parameters in
//! [`FlowModel::params`] order, then a `u32` CRC-32 of every preceding byte.

use std::fs;
use std::path::Path;

use super::model::{Architecture, FlowModel};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"EVFM";
pub const CHECKPOINT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 7 * 4 + 8;

impl FlowModel {
    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        let a = self.architecture();
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.param_count() + 4);
        out.extend_from_slice(&CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        for v in [
            a.channels,
            a.length,
            a.hidden[0],
            a.hidden[1],
            a.time_dim,
            a.class_dim,
            a.class_count,
        ] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        out.extend_from_slice(&(self.param_count() as u64).to_le_bytes());
        for p in self.params() {
            out.extend_from_slice(&p.to_le_bytes());
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || bytes[..4] != CHECKPOINT_MAGIC {
            return Err(Error::Format("not an EVFM checkpoint".into()));
        }
        if bytes.len() < HEADER_LEN + 4 {
            return Err(Error::CorruptFile("checkpoint header truncated".into()));
        }
        let u32_at = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
        let version = u32_at(4);
        if version != CHECKPOINT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored_crc = u32::from_le_bytes(tail.try_into().unwrap());
        if crc32fast::hash(body) != stored_crc {
            return Err(Error::CorruptFile("checkpoint CRC mismatch".into()));
        }
        let f: Vec<usize> = (0..7).map(|i| u32_at(8 + 4 * i) as usize).collect();
        let arch = Architecture {
            channels: f[0],
            length: f[1],
            hidden: [f[2], f[3]],
            time_dim: f[4],
            class_dim: f[5],
            class_count: f[6],
        };
        arch.validate()?;
        let count = u64::from_le_bytes(bytes[36..44].try_into().unwrap()) as usize;
        if count != arch.param_count() {
            return Err(Error::CorruptFile(format!(
                "checkpoint declares {count} parameters, architecture needs {}",
                arch.param_count()
            )));
        }
        let payload = &body[HEADER_LEN..];
        if payload.len() != 8 * count {
            return Err(Error::CorruptFile(format!(
                "expected {} parameter bytes, found {}",
                8 * count,
                payload.len()
            )));
        }
        let params = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        FlowModel::from_params(arch, params)
    }
}

pub fn write_checkpoint(model: &FlowModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model.to_checkpoint_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<FlowModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    FlowModel::from_checkpoint_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> FlowModel {
        let arch = Architecture {
            channels: 2,
            length: 4,
            hidden: [5, 3],
            time_dim: 2,
            class_dim: 2,
            class_count: 3,
        };
        FlowModel::new(arch, 42).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let m = model();
        let back = FlowModel::from_checkpoint_bytes(&m.to_checkpoint_bytes()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn flipped_bit_fails_crc() {
        let mut bytes = model().to_checkpoint_bytes();
        bytes[60] ^= 0x10;
        assert!(matches!(
            FlowModel::from_checkpoint_bytes(&bytes),
            Err(Error::CorruptFile(_))
        ));
    }

    #[test]
    fn wrong_magic_and_version() {
        let mut bytes = model().to_checkpoint_bytes();
        bytes[0] = b'X';
        assert!(matches!(FlowModel::from_checkpoint_bytes(&bytes), Err(Error::Format(_))));
        let mut bytes = model().to_checkpoint_bytes();
        bytes[4] = 9;
        assert!(matches!(
            FlowModel::from_checkpoint_bytes(&bytes),
            Err(Error::UnsupportedVersion { .. })
        ));
    }
}
