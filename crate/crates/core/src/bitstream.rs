//! `.pure` packet format.
//!
//! ```text
//! offset size field
//!  0     4    magic "PURE"
//!  4     1    version (1)
//!  5     4    sample_rate, u32 LE
//!  9     2    hop, u16 LE
//! 11     2    dim, u16 LE
//! 13     1    stages L
//! 14     2    codebook size B, u16 LE
//! 16     1    streams_used
//! 17     4    n_frames, u32 LE
//! 21     1    anchored flag (0 or 1)
//! 22     ..   payload
//! ```
//!
//! The payload holds `streams_used * n_frames` indices, stream-major, each in
//! `ceil(log2 B)` bits written most significant bit first, zero-padded to a
//! whole byte.

use crate::error::{Error, Result};
use crate::rvq::QuantizationResult;

pub const MAGIC: &[u8; 4] = b"PURE";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamGeometry {
    pub sample_rate: u32,
    pub hop: usize,
    pub dim: usize,
    pub stages: usize,
    pub codebook_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketHeader {
    pub geometry: StreamGeometry,
    pub streams_used: usize,
    pub n_frames: usize,
    pub anchored: bool,
}

impl PacketHeader {
    pub fn bits_per_index(&self) -> usize {
        index_bits(self.geometry.codebook_size)
    }

    pub fn payload_bits(&self) -> usize {
        self.streams_used * self.n_frames * self.bits_per_index()
    }

    pub fn bitrate(&self) -> f64 {
        bitrate(
            self.geometry.sample_rate,
            self.geometry.hop,
            self.streams_used,
            self.geometry.codebook_size,
        )
    }
}

/// `ceil(log2 B)`; zero for a single-entry codebook.
pub fn index_bits(codebook_size: usize) -> usize {
    if codebook_size <= 1 {
        0
    } else {
        (usize::BITS - (codebook_size - 1).leading_zeros()) as usize
    }
}

/// `(sample_rate / hop) * streams * log2(B)` bits per second.
pub fn bitrate(sample_rate: u32, hop: usize, streams_used: usize, codebook_size: usize) -> f64 {
    let bits = if codebook_size.is_power_of_two() {
        codebook_size.trailing_zeros() as f64
    } else {
        (codebook_size as f64).log2()
    };
    sample_rate as f64 / hop as f64 * streams_used as f64 * bits
}

fn fit<T: TryFrom<usize>>(field: &'static str, value: usize) -> Result<T> {
    T::try_from(value).map_err(|_| Error::GeometryOverflow {
        field,
        value: value as u64,
    })
}

pub fn pack(result: &QuantizationResult, geometry: &StreamGeometry) -> Result<Vec<u8>> {
    let b = geometry.codebook_size;
    if b == 0 {
        return Err(Error::EmptyCodebook);
    }
    if result.streams_used == 0
        || result.streams_used > geometry.stages
        || result.indices.len() != result.streams_used
    {
        return Err(Error::StreamsOutOfRange {
            requested: result.streams_used,
            available: geometry.stages,
        });
    }
    let n_frames = result.frames();
    if result.indices.iter().any(|row| row.len() != n_frames) {
        return Err(Error::ShapeMismatch("ragged index rows".into()));
    }

    let mut out = Vec::with_capacity(HEADER_LEN);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&geometry.sample_rate.to_le_bytes());
    out.extend_from_slice(&fit::<u16>("hop", geometry.hop)?.to_le_bytes());
    out.extend_from_slice(&fit::<u16>("dim", geometry.dim)?.to_le_bytes());
    out.push(fit::<u8>("stages", geometry.stages)?);
    out.extend_from_slice(&fit::<u16>("codebook_size", b)?.to_le_bytes());
    out.push(fit::<u8>("streams_used", result.streams_used)?);
    out.extend_from_slice(&fit::<u32>("n_frames", n_frames)?.to_le_bytes());
    out.push(result.anchored as u8);

    let bits = index_bits(b);
    let mut writer = BitWriter::new(&mut out);
    for row in &result.indices {
        for &j in row {
            if j as usize >= b {
                return Err(Error::IndexOutOfRange { index: j, size: b });
            }
            writer.write(j, bits);
        }
    }
    writer.finish();
    Ok(out)
}

pub fn unpack(bytes: &[u8]) -> Result<(PacketHeader, Vec<Vec<u32>>)> {
    if bytes.len() < MAGIC.len() || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes.len() < 5 {
        return Err(Error::Truncated {
            needed: HEADER_LEN,
            got: bytes.len(),
        });
    }
    if bytes[4] != VERSION {
        return Err(Error::UnsupportedVersion(bytes[4]));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            needed: HEADER_LEN,
            got: bytes.len(),
        });
    }
    let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]) as usize;
    let u32_at =
        |i: usize| u32::from_le_bytes([bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]]);

    let geometry = StreamGeometry {
        sample_rate: u32_at(5),
        hop: u16_at(9),
        dim: u16_at(11),
        stages: bytes[13] as usize,
        codebook_size: u16_at(14),
    };
    let header = PacketHeader {
        geometry,
        streams_used: bytes[16] as usize,
        n_frames: u32_at(17) as usize,
        anchored: match bytes[21] {
            0 => false,
            1 => true,
            other => return Err(Error::Malformed(format!("anchored flag {other}"))),
        },
    };
    if geometry.sample_rate == 0 || geometry.hop == 0 || geometry.dim == 0 {
        return Err(Error::Malformed("zero sample rate, hop or dim".into()));
    }
    if geometry.codebook_size == 0 {
        return Err(Error::EmptyCodebook);
    }
    if header.streams_used == 0 || header.streams_used > geometry.stages {
        return Err(Error::StreamsOutOfRange {
            requested: header.streams_used,
            available: geometry.stages,
        });
    }

    let payload_len = header.payload_bits().div_ceil(8);
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < payload_len {
        return Err(Error::Truncated {
            needed: HEADER_LEN + payload_len,
            got: bytes.len(),
        });
    }
    if payload.len() > payload_len {
        return Err(Error::TrailingBytes(payload.len() - payload_len));
    }

    let bits = header.bits_per_index();
    let mut reader = BitReader::new(payload);
    let mut indices = Vec::with_capacity(header.streams_used);
    for _ in 0..header.streams_used {
        let mut row = Vec::with_capacity(header.n_frames);
        for _ in 0..header.n_frames {
            let j = reader.read(bits);
            if j as usize >= geometry.codebook_size {
                return Err(Error::IndexOutOfRange {
                    index: j,
                    size: geometry.codebook_size,
                });
            }
            row.push(j);
        }
        indices.push(row);
    }
    if !reader.rest_is_zero() {
        return Err(Error::Malformed("non-zero padding bits".into()));
    }
    Ok((header, indices))
}

struct BitWriter<'a> {
    out: &'a mut Vec<u8>,
    acc: u64,
    filled: usize,
}

impl<'a> BitWriter<'a> {
    fn new(out: &'a mut Vec<u8>) -> Self {
        Self {
            out,
            acc: 0,
            filled: 0,
        }
    }

    fn write(&mut self, value: u32, bits: usize) {
        if bits == 0 {
            return;
        }
        self.acc = (self.acc << bits) | u64::from(value);
        self.filled += bits;
        while self.filled >= 8 {
            self.filled -= 8;
            self.out.push((self.acc >> self.filled) as u8);
        }
        self.acc &= (1u64 << self.filled) - 1;
    }

    fn finish(self) {
        if self.filled > 0 {
            self.out.push((self.acc << (8 - self.filled)) as u8);
        }
    }
}

struct BitReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    fn read(&mut self, bits: usize) -> u32 {
        let mut v = 0u32;
        for _ in 0..bits {
            let byte = self.data[self.pos / 8];
            let bit = (byte >> (7 - self.pos % 8)) & 1;
            v = (v << 1) | u32::from(bit);
            self.pos += 1;
        }
        v
    }

    fn rest_is_zero(&self) -> bool {
        let mut pos = self.pos;
        while pos < self.data.len() * 8 {
            if (self.data[pos / 8] >> (7 - pos % 8)) & 1 != 0 {
                return false;
            }
            pos += 1;
        }
        true
    }
}
