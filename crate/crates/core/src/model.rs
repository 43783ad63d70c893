//! Serialized codec model: frontend geometry plus the quantizer stack.
//!
//! ```text
//! "PURM" | version u8 | sample_rate u32 | frame_len u32 | hop u32 | dim u32
//!        | window u8 | stages u32 | per stage: size u32, size*dim f64
//! ```
//!
//! Integers and floats are little-endian, codebooks row-major.

use crate::error::{Error, Result};
use crate::frontend::{FrontendConfig, Window};
use crate::rvq::{Codebook, QuantizerStack};
use std::path::Path;

pub const MODEL_MAGIC: &[u8; 4] = b"PURM";
pub const MODEL_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CodecModel {
    pub sample_rate: u32,
    pub frontend: FrontendConfig,
    pub stack: QuantizerStack,
}

impl CodecModel {
    pub fn new(sample_rate: u32, frontend: FrontendConfig, stack: QuantizerStack) -> Result<Self> {
        frontend.validate()?;
        if stack.dim() != frontend.dim {
            return Err(Error::DimensionMismatch {
                expected: frontend.dim,
                actual: stack.dim(),
            });
        }
        Ok(Self {
            sample_rate,
            frontend,
            stack,
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let u32_of = |field: &'static str, v: usize| {
            u32::try_from(v).map_err(|_| Error::GeometryOverflow {
                field,
                value: v as u64,
            })
        };
        let mut out = Vec::new();
        out.extend_from_slice(MODEL_MAGIC);
        out.push(MODEL_VERSION);
        out.extend_from_slice(&self.sample_rate.to_le_bytes());
        out.extend_from_slice(&u32_of("frame_len", self.frontend.frame_len)?.to_le_bytes());
        out.extend_from_slice(&u32_of("hop", self.frontend.hop)?.to_le_bytes());
        out.extend_from_slice(&u32_of("dim", self.frontend.dim)?.to_le_bytes());
        out.push(self.frontend.window.code());
        out.extend_from_slice(&u32_of("stages", self.stack.num_stages())?.to_le_bytes());
        for cb in self.stack.stages() {
            out.extend_from_slice(&u32_of("codebook_size", cb.size())?.to_le_bytes());
            for v in cb.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MODEL_MAGIC {
            return Err(Error::BadMagic);
        }
        let version = r.take(1)?[0];
        if version != MODEL_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let sample_rate = r.u32()?;
        let frame_len = r.u32()? as usize;
        let hop = r.u32()? as usize;
        let dim = r.u32()? as usize;
        let code = r.take(1)?[0];
        let window = Window::from_code(code)
            .ok_or_else(|| Error::Malformed(format!("window code {code}")))?;
        let frontend = FrontendConfig {
            frame_len,
            hop,
            dim,
            window,
        };
        frontend.validate()?;
        let n_stages = r.u32()? as usize;
        let mut stages = Vec::new();
        for _ in 0..n_stages {
            let size = r.u32()? as usize;
            let len = size
                .checked_mul(dim)
                .and_then(|n| n.checked_mul(8))
                .ok_or(Error::Malformed("codebook size overflows".into()))?;
            let raw = r.take(len)?;
            let entries = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            stages.push(Codebook::new(entries, dim)?);
        }
        if r.pos != bytes.len() {
            return Err(Error::TrailingBytes(bytes.len() - r.pos));
        }
        Self::new(sample_rate, frontend, QuantizerStack::new(stages)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Truncated {
                needed: self.pos.saturating_add(n),
                got: self.bytes.len(),
            }),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> CodecModel {
        let stages = (0..3)
            .map(|l| {
                Codebook::new(
                    (0..4 * 5)
                        .map(|i| (i * (l + 1)) as f64 * 0.37 - 1.0)
                        .collect(),
                    4,
                )
                .unwrap()
            })
            .collect();
        let frontend = FrontendConfig {
            frame_len: 16,
            hop: 8,
            dim: 4,
            window: Window::Rectangular,
        };
        CodecModel::new(16_000, frontend, QuantizerStack::new(stages).unwrap()).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = model();
        let bytes = m.to_bytes().unwrap();
        assert_eq!(bytes.len(), 4 + 1 + 4 * 4 + 1 + 4 + 3 * (4 + 20 * 8));
        assert_eq!(CodecModel::from_bytes(&bytes).unwrap(), m);
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let bytes = model().to_bytes().unwrap();
        assert!(matches!(
            CodecModel::from_bytes(b"XXXX"),
            Err(Error::BadMagic)
        ));
        let mut v = bytes.clone();
        v[4] = 9;
        assert!(matches!(
            CodecModel::from_bytes(&v),
            Err(Error::UnsupportedVersion(9))
        ));
        assert!(matches!(
            CodecModel::from_bytes(&bytes[..bytes.len() - 1]),
            Err(Error::Truncated { .. })
        ));
        let mut v = bytes.clone();
        v.push(0);
        assert!(matches!(
            CodecModel::from_bytes(&v),
            Err(Error::TrailingBytes(1))
        ));
    }

    #[test]
    fn dim_must_match_frontend() {
        let m = model();
        let fe = FrontendConfig {
            dim: 5,
            ..m.frontend
        };
        assert!(CodecModel::new(16_000, fe, m.stack).is_err());
    }
}
