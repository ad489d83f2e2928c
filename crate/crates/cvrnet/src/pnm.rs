//! Binary 8-bit PGM (`P5`) and PPM (`P6`) images.

use cvrnet_core::Tensor;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PnmError {
    #[error("not a binary PGM/PPM file (magic {0:?})")]
    BadMagic(String),
    #[error("malformed header: {0}")]
    Header(String),
    #[error("unsupported maxval {0}, expected 1..=255")]
    Maxval(u32),
    #[error("truncated payload: {got} of {expected} bytes")]
    Truncated { expected: usize, got: usize },
}

/// Decoded raster; `channels` is 1 for PGM and 3 for PPM.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PnmImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub maxval: u32,
    pub data: Vec<u8>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n' && c != b'\r') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, PnmError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(PnmError::Header(format!("missing {}", what)));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PnmError::Header(format!("{} out of range", what)))
    }
}

pub fn decode(bytes: &[u8]) -> Result<PnmImage, PnmError> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        other => return Err(PnmError::BadMagic(String::from_utf8_lossy(other.unwrap_or(bytes)).into_owned())),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(PnmError::Header(format!("empty raster {}×{}", width, height)));
    }
    if maxval == 0 || maxval > 255 {
        return Err(PnmError::Maxval(maxval));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(PnmError::Header("maxval must be followed by one whitespace byte".into())),
    }
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| PnmError::Header("raster size overflows".into()))?;
    let payload = &bytes[cur.pos..];
    if payload.len() < expected {
        return Err(PnmError::Truncated { expected, got: payload.len() });
    }
    Ok(PnmImage { width, height, channels, maxval, data: payload[..expected].to_vec() })
}

/// Binary PGM for one channel, PPM for three.
pub fn encode(width: usize, height: usize, channels: usize, data: &[u8]) -> Vec<u8> {
    assert!(channels == 1 || channels == 3, "PNM stores 1 or 3 channels");
    assert_eq!(data.len(), width * height * channels, "raster length");
    let magic = if channels == 1 { "P5" } else { "P6" };
    let mut out = format!("{}\n{} {}\n255\n", magic, width, height).into_bytes();
    out.extend_from_slice(data);
    out
}

impl PnmImage {
    /// 1×H×W×3 tensor in `[0, 1]`; gray values are replicated over RGB.
    pub fn to_rgb_tensor(&self) -> Tensor<f32> {
        let scale = self.maxval as f32;
        let mut out = Vec::with_capacity(self.width * self.height * 3);
        for px in self.data.chunks_exact(self.channels) {
            match *px {
                [g] => out.extend([g as f32 / scale; 3]),
                [r, g, b] => out.extend([r as f32 / scale, g as f32 / scale, b as f32 / scale]),
                _ => unreachable!(),
            }
        }
        Tensor::new(&[1, self.height, self.width, 3], out).expect("raster length matches shape")
    }
}

/// Quantizes a 1×H×W×C tensor in `[0, 1]` to 8 bits, keeping the first
/// channel when `channels` is 1.
pub fn quantize(t: &Tensor<f32>, channels: usize) -> (usize, usize, Vec<u8>) {
    let s = t.shape();
    let (h, w, c) = (s[1], s[2], s[3]);
    let mut out = Vec::with_capacity(h * w * channels);
    for px in t.data().chunks_exact(c) {
        for ch in 0..channels {
            out.push((px[ch.min(c - 1)].clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    (h, w, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray_roundtrip_and_replication() {
        let bytes = encode(2, 1, 1, &[0, 255]);
        let img = decode(&bytes).unwrap();
        assert_eq!((img.width, img.height, img.channels), (2, 1, 1));
        assert_eq!(img.to_rgb_tensor().data(), &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn header_comments_and_maxval_scaling() {
        let bytes = b"P6\n# made by hand\n1 1 # trailing\n15\n\x0f\x05\x00";
        let img = decode(bytes).unwrap();
        assert_eq!(img.to_rgb_tensor().data(), &[1.0, 5.0 / 15.0, 0.0]);
    }

    #[test]
    fn errors() {
        assert!(matches!(decode(b"P3\n1 1\n255\n"), Err(PnmError::BadMagic(_))));
        assert!(matches!(decode(b"P5\n1\n255\n"), Err(PnmError::Header(_))));
        assert!(matches!(decode(b"P5\n1 1\n65535\n\0\0"), Err(PnmError::Maxval(65535))));
        assert!(matches!(decode(b"P5\n1 1\n0\n\0"), Err(PnmError::Maxval(0))));
        assert!(matches!(decode(b"P5\n2 2\n255\n\0\0\0"), Err(PnmError::Truncated { expected: 4, got: 3 })));
        assert!(matches!(decode(b"P5\n0 2\n255\n"), Err(PnmError::Header(_))));
        assert!(matches!(decode(b"P5\n1 1\n255"), Err(PnmError::Header(_))));
    }

    #[test]
    fn quantize_inverts_scaling() {
        let bytes = encode(3, 1, 3, &[0, 1, 2, 100, 128, 200, 253, 254, 255]);
        let t = decode(&bytes).unwrap().to_rgb_tensor();
        assert_eq!(quantize(&t, 3).2, vec![0, 1, 2, 100, 128, 200, 253, 254, 255]);
    }
}
