//! Raw EEG sidecar: a flat file of little-endian IEEE-754 `f32` values. Each
//! stored batch is written channel-major (all samples of channel 0, then
//! channel 1, ...). Records elsewhere reference batches by value offset and
//! count.

use std::io::{self, Read, Write};

pub fn encode(values: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> io::Result<Vec<f32>> {
    if !bytes.len().is_multiple_of(4) {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "sidecar length is not a multiple of 4"));
    }
    Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}

pub fn write_to<W: Write>(w: &mut W, values: &[f32]) -> io::Result<()> {
    w.write_all(&encode(values))
}

pub fn read_from<R: Read>(r: &mut R) -> io::Result<Vec<f32>> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    decode(&buf)
}

/// Converts a frame-major batch (`frames × channels`) into channel-major.
pub fn to_channel_major(frames: &[f32], channels: usize) -> Vec<f32> {
    let n = frames.len() / channels.max(1);
    let mut out = Vec::with_capacity(frames.len());
    for c in 0..channels {
        out.extend((0..n).map(|i| frames[i * channels + c]));
    }
    out
}
