//! Binary netpbm images: P5 (grayscale) and P6 (RGB), 8-bit, maxval 255.

use std::path::Path;

use super::{write_atomic, IoError};
use crate::train::SignalBuffer;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, message: impl Into<String>) -> IoError {
        IoError::Parse { offset: self.pos, message: message.into() }
    }

    /// Skips whitespace and `#` comments between header tokens.
    fn skip_separators(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\r' | b'\n' => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn ascii_int(&mut self) -> Result<usize, IoError> {
        self.skip_separators();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("expected ASCII integer"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| self.err("integer out of range"))
    }
}

/// Decodes a P5/P6 file into a buffer with values in [0, 1].
pub fn load_pnm(path: &Path) -> Result<SignalBuffer, IoError> {
    let bytes = std::fs::read(path)?;
    decode_pnm(&bytes)
}

pub fn decode_pnm(bytes: &[u8]) -> Result<SignalBuffer, IoError> {
    let mut cur = Cursor { bytes, pos: 0 };
    let channels = match bytes.get(0..2) {
        Some(b"P5") => 1usize,
        Some(b"P6") => 3usize,
        _ => return Err(cur.err("expected P5 or P6 magic")),
    };
    cur.pos = 2;
    let width = cur.ascii_int()?;
    let height = cur.ascii_int()?;
    let maxval = cur.ascii_int()?;
    if maxval != 255 {
        return Err(cur.err(format!("only maxval 255 is supported, got {maxval}")));
    }
    if width == 0 || height == 0 {
        return Err(cur.err("zero image dimension"));
    }
    // Exactly one whitespace byte separates the header from pixel data.
    match bytes.get(cur.pos) {
        Some(b' ' | b'\t' | b'\r' | b'\n') => cur.pos += 1,
        _ => return Err(cur.err("expected single whitespace before pixel data")),
    }
    let expected = width * height * channels;
    let data = &bytes[cur.pos.min(bytes.len())..];
    if data.len() < expected {
        cur.pos = bytes.len();
        return Err(cur.err(format!(
            "truncated pixel data: have {} bytes, need {expected}",
            data.len()
        )));
    }
    let samples = data[..expected].iter().map(|&b| b as f64 / 255.0).collect();
    SignalBuffer::new(vec![height, width], channels, samples)
        .map_err(|e| IoError::Parse { offset: 0, message: e.to_string() })
}

/// Encodes a buffer (clamped to [0, 1], quantized to 8 bits) as P5 or P6
/// depending on the channel count.
pub fn encode_pnm(buffer: &SignalBuffer) -> Result<Vec<u8>, IoError> {
    if buffer.dims.len() != 2 {
        return Err(IoError::Unsupported(format!(
            "netpbm wants a 2-D image, got dims {:?}",
            buffer.dims
        )));
    }
    let (h, w) = (buffer.dims[0], buffer.dims[1]);
    let magic = match buffer.channels {
        1 => "P5",
        3 => "P6",
        c => return Err(IoError::Unsupported(format!("{c} channels"))),
    };
    let mut out = format!("{magic}\n{w} {h}\n255\n").into_bytes();
    out.extend(buffer.samples.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    Ok(out)
}

pub fn save_pnm(buffer: &SignalBuffer, path: &Path) -> Result<(), IoError> {
    write_atomic(path, &encode_pnm(buffer)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grayscale_normalization() {
        let bytes = b"P5\n2 2\n255\n\x00\xff\x80\x40";
        let buf = decode_pnm(bytes).unwrap();
        assert_eq!(buf.dims, vec![2, 2]);
        assert_eq!(buf.channels, 1);
        assert_eq!(buf.samples, vec![0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0]);
    }

    #[test]
    fn rgb_round_trip_is_bit_identical() {
        let mut pixel_data = Vec::new();
        for i in 0..(4 * 3 * 3) {
            pixel_data.push((i * 7 % 256) as u8);
        }
        let mut bytes = b"P6\n3 4\n255\n".to_vec();
        bytes.extend(&pixel_data);
        let buf = decode_pnm(&bytes).unwrap();
        let encoded = encode_pnm(&buf).unwrap();
        assert_eq!(encoded, bytes);
        let again = decode_pnm(&encoded).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn truncated_data_errors_with_offset() {
        let bytes = b"P5\n4 4\n255\n\x01\x02";
        match decode_pnm(bytes) {
            Err(IoError::Parse { offset, message }) => {
                assert_eq!(offset, bytes.len());
                assert!(message.contains("truncated"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn comments_in_header() {
        let bytes = b"P5\n# a comment\n2 1\n# another\n255\n\x10\x20";
        let buf = decode_pnm(bytes).unwrap();
        assert_eq!(buf.dims, vec![1, 2]);
    }

    #[test]
    fn rejects_other_maxval() {
        let bytes = b"P5\n1 1\n100\n\x42";
        assert!(matches!(decode_pnm(bytes), Err(IoError::Parse { .. })));
    }

    #[test]
    fn save_and_load_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pgm");
        let buf = SignalBuffer::new(vec![2, 3], 1, vec![0.0, 0.25, 0.5, 0.75, 1.0, 0.3]).unwrap();
        save_pnm(&buf, &path).unwrap();
        let loaded = load_pnm(&path).unwrap();
        assert_eq!(loaded.dims, buf.dims);
        for (a, b) in loaded.samples.iter().zip(&buf.samples) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }
}
