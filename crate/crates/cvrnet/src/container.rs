//! Chunked tensor container shared by checkpoints and raw-tensor sidecars:
//! 4-byte magic, `u32` version, `u32`-length-prefixed UTF-8 header, then
//! records of `u32` name length, name bytes, `u32` rank, `u32` extents and a
//! little-endian `f32` payload. All integers are little-endian.

use thiserror::Error;

const MAX_RANK: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContainerError {
    #[error("bad magic {found:?}, expected {expected:?}")]
    BadMagic { found: Vec<u8>, expected: [u8; 4] },
    #[error("format version {found}, this build reads {expected}")]
    Version { found: u32, expected: u32 },
    #[error("truncated while reading {0}")]
    Truncated(String),
    #[error("{0} is not valid UTF-8")]
    Utf8(String),
    #[error("record `{name}` has rank {rank}, at most {MAX_RANK} allowed")]
    Rank { name: String, rank: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub header: String,
    pub records: Vec<Record>,
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    let v = u32::try_from(v).expect("container fields fit in u32");
    out.extend_from_slice(&v.to_le_bytes());
}

pub fn encode<'a>(magic: [u8; 4], version: u32, header: &str, records: impl IntoIterator<Item = (&'a str, &'a [usize], Vec<f32>)>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&magic);
    out.extend_from_slice(&version.to_le_bytes());
    put_u32(&mut out, header.len());
    out.extend_from_slice(header.as_bytes());
    for (name, shape, data) in records {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "record `{}` payload length", name);
        put_u32(&mut out, name.len());
        out.extend_from_slice(name.as_bytes());
        put_u32(&mut out, shape.len());
        for &e in shape {
            put_u32(&mut out, e);
        }
        for v in data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], ContainerError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| ContainerError::Truncated(what.to_string()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<usize, ContainerError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn string(&mut self, what: &str) -> Result<String, ContainerError> {
        let n = self.u32(what)?;
        let b = self.take(n, what)?;
        String::from_utf8(b.to_vec()).map_err(|_| ContainerError::Utf8(what.to_string()))
    }
}

/// Parses the whole buffer; nothing is returned unless every record is intact.
pub fn decode(bytes: &[u8], magic: [u8; 4], version: u32) -> Result<Container, ContainerError> {
    let mut r = Reader { bytes, pos: 0 };
    let found = r.take(4, "magic").map_err(|_| ContainerError::BadMagic { found: bytes.to_vec(), expected: magic })?;
    if found != magic {
        return Err(ContainerError::BadMagic { found: found.to_vec(), expected: magic });
    }
    let v = r.u32("version")? as u32;
    if v != version {
        return Err(ContainerError::Version { found: v, expected: version });
    }
    let header = r.string("header")?;
    let mut records = Vec::new();
    while r.pos < bytes.len() {
        let name = r.string("record name")?;
        let rank = r.u32(&format!("rank of `{}`", name))?;
        if rank > MAX_RANK {
            return Err(ContainerError::Rank { name, rank });
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32(&format!("extents of `{}`", name))?);
        }
        let len = shape.iter().try_fold(1usize, |a, &e| a.checked_mul(e));
        let bytes_len = len.and_then(|n| n.checked_mul(4)).ok_or_else(|| ContainerError::Truncated(format!("payload of `{}`", name)))?;
        let payload = r.take(bytes_len, &format!("payload of `{}`", name))?;
        let data = payload.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        records.push(Record { name, shape, data });
    }
    Ok(Container { header, records })
}
