//! WAV audio: 16-bit PCM, mono. Samples normalize to [−1, 1] as s/32768.

use std::path::Path;

use super::{write_atomic, IoError};
use crate::train::SignalBuffer;

const PCM_FORMAT: u16 = 1;

fn read_u16(bytes: &[u8], pos: usize) -> Result<u16, IoError> {
    bytes
        .get(pos..pos + 2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]))
        .ok_or(IoError::Parse { offset: pos, message: "unexpected end of file".into() })
}

fn read_u32(bytes: &[u8], pos: usize) -> Result<u32, IoError> {
    bytes
        .get(pos..pos + 4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(IoError::Parse { offset: pos, message: "unexpected end of file".into() })
}

/// Decodes a PCM16 mono WAV file; returns the buffer and its sample rate.
pub fn load_wav(path: &Path) -> Result<(SignalBuffer, u32), IoError> {
    let bytes = std::fs::read(path)?;
    decode_wav(&bytes)
}

pub fn decode_wav(bytes: &[u8]) -> Result<(SignalBuffer, u32), IoError> {
    if bytes.get(0..4) != Some(b"RIFF") || bytes.get(8..12) != Some(b"WAVE") {
        return Err(IoError::Parse { offset: 0, message: "not a RIFF/WAVE file".into() });
    }
    let mut pos = 12usize;
    let mut format: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let chunk_id = &bytes[pos..pos + 4];
        let chunk_len = read_u32(bytes, pos + 4)? as usize;
        let body_start = pos + 8;
        let body_end = body_start + chunk_len;
        if body_end > bytes.len() {
            return Err(IoError::Parse {
                offset: pos,
                message: format!("chunk {:?} overruns the file", String::from_utf8_lossy(chunk_id)),
            });
        }
        match chunk_id {
            b"fmt " => {
                format = Some((
                    read_u16(bytes, body_start)?,
                    read_u16(bytes, body_start + 2)?,
                    read_u32(bytes, body_start + 4)?,
                    read_u16(bytes, body_start + 14)?,
                ));
            }
            b"data" => data = Some(&bytes[body_start..body_end]),
            _ => {}
        }
        pos = body_end + chunk_len % 2; // chunks are word-aligned
    }
    let (audio_format, channels, sample_rate, bits) =
        format.ok_or(IoError::Parse { offset: 12, message: "missing fmt chunk".into() })?;
    if audio_format != PCM_FORMAT || bits != 16 {
        return Err(IoError::Unsupported(format!(
            "need 16-bit PCM, got format {audio_format} with {bits} bits"
        )));
    }
    if channels != 1 {
        return Err(IoError::Unsupported(format!("need mono audio, got {channels} channels")));
    }
    let data = data.ok_or(IoError::Parse { offset: 12, message: "missing data chunk".into() })?;
    if data.len() % 2 != 0 {
        return Err(IoError::Parse { offset: 0, message: "odd PCM16 data length".into() });
    }
    let samples: Vec<f64> = data
        .chunks_exact(2)
        .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0)
        .collect();
    let n = samples.len();
    let buffer = SignalBuffer::new(vec![n], 1, samples)
        .map_err(|e| IoError::Parse { offset: 0, message: e.to_string() })?;
    Ok((buffer, sample_rate))
}

/// Encodes a mono buffer as a canonical 44-byte-header PCM16 WAV.
pub fn encode_wav(buffer: &SignalBuffer, sample_rate: u32) -> Result<Vec<u8>, IoError> {
    if buffer.channels != 1 || buffer.dims.len() != 1 {
        return Err(IoError::Unsupported("wav writer expects a mono 1-D buffer".into()));
    }
    let n = buffer.samples.len();
    let data_len = (n * 2) as u32;
    let mut out = Vec::with_capacity(44 + n * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&PCM_FORMAT.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &v in &buffer.samples {
        let q = (v.clamp(-1.0, 1.0) * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    Ok(out)
}

pub fn save_wav(buffer: &SignalBuffer, sample_rate: u32, path: &Path) -> Result<(), IoError> {
    write_atomic(path, &encode_wav(buffer, sample_rate)?)
}
