//! Binary checkpoint format.
//!
//! ```text
//! magic "CHEGNPAR" | u32 version | u32 entry count
//! per entry: u32 name length | name (UTF-8) | u32 ndim | u64 dims...
//! then every entry's values as f64, in header order
//! ```
//!
//! All integers and floats are little-endian.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"CHEGNPAR";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl ArchiveEntry {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            shape,
            values,
        }
    }
}

pub fn encode(entries: &[ArchiveEntry]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for e in entries {
        let expected: usize = e.shape.iter().product();
        if expected != e.values.len() {
            return Err(Error::Archive(format!(
                "entry '{}' has shape {:?} but {} values",
                e.name,
                e.shape,
                e.values.len()
            )));
        }
        out.extend_from_slice(&(e.name.len() as u32).to_le_bytes());
        out.extend_from_slice(e.name.as_bytes());
        out.extend_from_slice(&(e.shape.len() as u32).to_le_bytes());
        for d in &e.shape {
            out.extend_from_slice(&(*d as u64).to_le_bytes());
        }
    }
    for e in entries {
        for v in &e.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() < n {
            return Err(Error::Archive("unexpected end of archive".into()));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<ArchiveEntry>> {
    let mut c = Cursor { bytes };
    if c.take(8)? != MAGIC {
        return Err(Error::Archive("not a parameter archive (bad magic)".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::Archive(format!("unsupported archive version {version}")));
    }
    let count = c.u32()? as usize;
    let mut entries = Vec::with_capacity(count.min(4096));
    for _ in 0..count {
        let len = c.u32()? as usize;
        let name = String::from_utf8(c.take(len)?.to_vec())
            .map_err(|_| Error::Archive("entry name is not UTF-8".into()))?;
        let ndim = c.u32()? as usize;
        let mut shape = Vec::with_capacity(ndim.min(16));
        for _ in 0..ndim {
            shape.push(c.u64()? as usize);
        }
        entries.push(ArchiveEntry {
            name,
            shape,
            values: Vec::new(),
        });
    }
    for e in &mut entries {
        let n: usize = e.shape.iter().product();
        let raw = c.take(n.checked_mul(8).ok_or_else(|| Error::Archive("entry too large".into()))?)?;
        e.values = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
    }
    if !c.bytes.is_empty() {
        return Err(Error::Archive(format!("{} trailing bytes", c.bytes.len())));
    }
    Ok(entries)
}

pub fn save(path: &Path, entries: &[ArchiveEntry]) -> Result<()> {
    let bytes = encode(entries)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Vec<ArchiveEntry>> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}

/// Copies `entries` into `targets`, requiring identical names, order and
/// shapes.
pub fn restore<'a, I>(entries: &[ArchiveEntry], targets: I) -> Result<()>
where
    I: IntoIterator<Item = (&'a str, &'a [usize], &'a mut [f64])>,
{
    let mut it = entries.iter();
    let mut seen = 0;
    for (name, shape, value) in targets {
        let e = it
            .next()
            .ok_or_else(|| Error::Archive(format!("archive is missing '{name}'")))?;
        if e.name != name {
            return Err(Error::Archive(format!("expected entry '{name}', found '{}'", e.name)));
        }
        if e.shape != shape {
            return Err(Error::Archive(format!(
                "entry '{name}' has shape {:?}, model expects {:?}",
                e.shape, shape
            )));
        }
        value.copy_from_slice(&e.values);
        seen += 1;
    }
    if let Some(extra) = it.next() {
        return Err(Error::Archive(format!(
            "archive has unexpected entry '{}' after {seen} entries",
            extra.name
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<ArchiveEntry> {
        vec![
            ArchiveEntry::new("a.weight", vec![2, 3], vec![1.0, -2.0, 3.5, 0.0, f64::MIN_POSITIVE, 1e300]),
            ArchiveEntry::new("a.bias", vec![3], vec![0.25, 0.5, -0.75]),
            ArchiveEntry::new("scalar", vec![], vec![7.0]),
        ]
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let bytes = encode(&sample()).unwrap();
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(decode(&bytes).unwrap(), sample());
    }

    #[test]
    fn truncated_or_corrupt_input_is_rejected() {
        let bytes = encode(&sample()).unwrap();
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut longer = bytes;
        longer.push(0);
        assert!(decode(&longer).is_err());
    }

    #[test]
    fn restore_checks_names_and_shapes() {
        let entries = sample();
        let mut w = vec![0.0; 6];
        let mut b = vec![0.0; 3];
        let mut s = vec![0.0; 1];
        restore(
            &entries,
            vec![
                ("a.weight", &[2usize, 3][..], &mut w[..]),
                ("a.bias", &[3usize][..], &mut b[..]),
                ("scalar", &[][..], &mut s[..]),
            ],
        )
        .unwrap();
        assert_eq!(b, vec![0.25, 0.5, -0.75]);

        let mut w2 = vec![0.0; 6];
        let err = restore(&entries, vec![("a.weight", &[3usize, 2][..], &mut w2[..])]).unwrap_err();
        assert!(err.to_string().contains("shape"));
        let mut w3 = vec![0.0; 6];
        let err = restore(&entries, vec![("b.weight", &[2usize, 3][..], &mut w3[..])]).unwrap_err();
        assert!(err.to_string().contains("b.weight"));
    }
}
