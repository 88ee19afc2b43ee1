//! Flat parameter vectors and their on-disk formats.
//!
//! Binary layout (all integers u64 little-endian unless noted):
//!
//! ```text
//! magic     8 bytes  "EXPLFLAT"
//! version   u32 LE   (currently 1)
//! reserved  u32 LE   (zero)
//! entries   u64
//! per entry: name_len u64, name bytes (UTF-8), rank u64, dims u64 × rank
//! values    f64 LE × Σ prod(dims)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"EXPLFLAT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

impl LayoutEntry {
    pub fn new(name: impl Into<String>, shape: Vec<usize>) -> Self {
        Self {
            name: name.into(),
            shape,
        }
    }

    pub fn size(&self) -> usize {
        self.shape.iter().product()
    }
}

/// A contiguous parameter vector plus the layout needed to rebuild the
/// networks it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatParams {
    values: Vec<f64>,
    layout: Vec<LayoutEntry>,
}

impl FlatParams {
    pub fn new(values: Vec<f64>, layout: Vec<LayoutEntry>) -> Result<Self> {
        let expected: usize = layout.iter().map(LayoutEntry::size).sum();
        if expected != values.len() {
            return Err(Error::Layout(format!(
                "layout describes {expected} values but {} were given",
                values.len()
            )));
        }
        Ok(Self { values, layout })
    }

    pub fn zeros(layout: Vec<LayoutEntry>) -> Self {
        let n = layout.iter().map(LayoutEntry::size).sum();
        Self {
            values: vec![0.0; n],
            layout,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn layout(&self) -> &[LayoutEntry] {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same layout, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(values, self.layout.clone())
    }

    pub fn same_layout(&self, other: &FlatParams) -> bool {
        self.layout == other.layout
    }

    /// Values of the named entry.
    pub fn entry(&self, name: &str) -> Option<&[f64]> {
        let mut offset = 0;
        for e in &self.layout {
            if e.name == name {
                return Some(&self.values[offset..offset + e.size()]);
            }
            offset += e.size();
        }
        None
    }

    pub fn entry_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let mut offset = 0;
        for e in &self.layout {
            if e.name == name {
                let size = e.size();
                return Some(&mut self.values[offset..offset + size]);
            }
            offset += e.size();
        }
        None
    }

    pub fn distance(&self, other: &FlatParams) -> f64 {
        euclidean(&self.values, &other.values)
    }

    /// FNV-1a over the raw bit patterns; used in divergence diagnostics.
    pub fn checksum(&self) -> u64 {
        let mut hash = 0xcbf2_9ce4_8422_2325u64;
        for v in &self.values {
            for b in v.to_bits().to_le_bytes() {
                hash ^= b as u64;
                hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        hash
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&0u32.to_le_bytes())?;
        w.write_all(&(self.layout.len() as u64).to_le_bytes())?;
        for e in &self.layout {
            w.write_all(&(e.name.len() as u64).to_le_bytes())?;
            w.write_all(e.name.as_bytes())?;
            w.write_all(&(e.shape.len() as u64).to_le_bytes())?;
            for d in &e.shape {
                w.write_all(&(*d as u64).to_le_bytes())?;
            }
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> std::result::Result<Self, String> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header).map_err(|e| e.to_string())?;
        if &header[..8] != MAGIC {
            return Err("bad magic".into());
        }
        let version = u32::from_le_bytes(header[8..12].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(format!("unsupported version {version}"));
        }
        let read_u64 = |r: &mut R| -> std::result::Result<u64, String> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b).map_err(|e| e.to_string())?;
            Ok(u64::from_le_bytes(b))
        };
        let entries = read_u64(&mut r)?;
        let mut layout = Vec::new();
        for _ in 0..entries {
            let name_len = read_u64(&mut r)? as usize;
            if name_len > 4096 {
                return Err(format!("implausible name length {name_len}"));
            }
            let mut name = vec![0u8; name_len];
            r.read_exact(&mut name).map_err(|e| e.to_string())?;
            let name = String::from_utf8(name).map_err(|e| e.to_string())?;
            let rank = read_u64(&mut r)? as usize;
            if rank > 8 {
                return Err(format!("implausible rank {rank}"));
            }
            let shape = (0..rank)
                .map(|_| read_u64(&mut r).map(|d| d as usize))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            layout.push(LayoutEntry { name, shape });
        }
        let n: usize = layout.iter().map(LayoutEntry::size).sum();
        let mut values = Vec::with_capacity(n);
        let mut b = [0u8; 8];
        for _ in 0..n {
            r.read_exact(&mut b).map_err(|e| e.to_string())?;
            values.push(f64::from_le_bytes(b));
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing).map_err(|e| e.to_string())? != 0 {
            return Err("trailing bytes after values".into());
        }
        Ok(Self { values, layout })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_binary(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_binary(std::io::BufReader::new(file)).map_err(|message| Error::Format {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: FlatParams = serde_json::from_str(text)?;
        Self::new(raw.values, raw.layout)
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> FlatParams {
        FlatParams::new(
            vec![1.0, -2.5, 3.25, f64::MIN_POSITIVE, -0.0, 1e300],
            vec![
                LayoutEntry::new("w", vec![2, 2]),
                LayoutEntry::new("b", vec![2]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn rejects_inconsistent_layout() {
        assert!(FlatParams::new(vec![1.0], vec![LayoutEntry::new("w", vec![2])]).is_err());
    }

    #[test]
    fn header_is_sixteen_bytes() {
        let mut buf = Vec::new();
        sample().write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..8], MAGIC);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(buf[16..24].try_into().unwrap()), 2);
    }

    #[test]
    fn corrupt_files_rejected() {
        let mut buf = Vec::new();
        sample().write_binary(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(FlatParams::read_binary(&bad[..]).is_err());
        assert!(FlatParams::read_binary(&buf[..buf.len() - 3]).is_err());
        let mut extra = buf.clone();
        extra.push(0);
        assert!(FlatParams::read_binary(&extra[..]).is_err());
    }

    #[test]
    fn json_export_reads_back() {
        let p = sample();
        assert_eq!(FlatParams::from_json(&p.to_json().unwrap()).unwrap(), p);
    }

    #[test]
    fn entry_lookup() {
        let p = sample();
        assert_eq!(p.entry("b").unwrap(), &[-0.0, 1e300]);
        assert!(p.entry("missing").is_none());
    }

    proptest! {
        #[test]
        fn binary_round_trip_is_bit_identical(values in prop::collection::vec(any::<f64>(), 0..40)) {
            let n = values.len();
            let p = FlatParams::new(values, vec![LayoutEntry::new("x", vec![n])]).unwrap();
            let mut buf = Vec::new();
            p.write_binary(&mut buf).unwrap();
            let q = FlatParams::read_binary(&buf[..]).unwrap();
            prop_assert_eq!(p.layout(), q.layout());
            for (a, b) in p.values().iter().zip(q.values()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
