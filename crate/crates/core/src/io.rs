//! Binary field/sinogram/mask files, CSV export and `key=value` text.
//!
//! * `RGF1`: magic, `u32 dim`, `u32 n`, `n^dim` little-endian `f64`.
//! * `RSG1`: magic, `u32 n_theta`, `u32 n_s`, `n_theta * n_s` `f64`.
//! * `RMK1`: magic, `u32 n_theta`, `u32 n_s`, one byte (0 or 1) per bin.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::GridField;
use crate::xray::{LineMask, Sinogram, SinogramGeometry};

const FIELD_MAGIC: &[u8; 4] = b"RGF1";
const SINOGRAM_MAGIC: &[u8; 4] = b"RSG1";
const MASK_MAGIC: &[u8; 4] = b"RMK1";

fn header(magic: &[u8; 4], a: usize, b: usize) -> Result<Vec<u8>> {
    let a = u32::try_from(a).map_err(|_| Error::Format("header value exceeds u32".into()))?;
    let b = u32::try_from(b).map_err(|_| Error::Format("header value exceeds u32".into()))?;
    let mut out = Vec::with_capacity(12);
    out.extend_from_slice(magic);
    out.extend_from_slice(&a.to_le_bytes());
    out.extend_from_slice(&b.to_le_bytes());
    Ok(out)
}

fn read_header(bytes: &[u8], magic: &[u8; 4]) -> Result<(usize, usize)> {
    if bytes.len() < 12 {
        return Err(Error::Format("file shorter than its header".into()));
    }
    if &bytes[..4] != magic {
        return Err(Error::Format(format!(
            "expected magic {:?}, found {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(&bytes[..4])
        )));
    }
    let a = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let b = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    Ok((a, b))
}

fn push_floats(out: &mut Vec<u8>, values: &[f64]) {
    out.reserve(values.len() * 8);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn read_floats(body: &[u8], count: usize) -> Result<Vec<f64>> {
    if body.len() != count * 8 {
        return Err(Error::Format(format!(
            "expected {} payload bytes, found {}",
            count * 8,
            body.len()
        )));
    }
    Ok(body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn encode_field(f: &GridField) -> Result<Vec<u8>> {
    let mut out = header(FIELD_MAGIC, f.dim(), f.n())?;
    push_floats(&mut out, f.values());
    Ok(out)
}

pub fn decode_field(bytes: &[u8]) -> Result<GridField> {
    let (dim, n) = read_header(bytes, FIELD_MAGIC)?;
    if dim != 2 && dim != 3 {
        return Err(Error::Format(format!("dimension {dim} is not 2 or 3")));
    }
    let count = n
        .checked_pow(dim as u32)
        .ok_or_else(|| Error::Format("grid size overflows".into()))?;
    let values = read_floats(&bytes[12..], count)?;
    GridField::from_values(dim, n, values)
}

pub fn encode_sinogram(g: &Sinogram) -> Result<Vec<u8>> {
    let geom = g.geometry();
    let mut out = header(SINOGRAM_MAGIC, geom.n_theta(), geom.n_s())?;
    push_floats(&mut out, g.values());
    Ok(out)
}

pub fn decode_sinogram(bytes: &[u8]) -> Result<Sinogram> {
    let (n_theta, n_s) = read_header(bytes, SINOGRAM_MAGIC)?;
    let geom = SinogramGeometry::new(n_theta, n_s)?;
    let values = read_floats(&bytes[12..], geom.len())?;
    Sinogram::from_values(geom, values)
}

pub fn encode_mask(m: &LineMask) -> Result<Vec<u8>> {
    let geom = m.geometry();
    let mut out = header(MASK_MAGIC, geom.n_theta(), geom.n_s())?;
    out.extend(m.bits().iter().map(|b| u8::from(*b)));
    Ok(out)
}

pub fn decode_mask(bytes: &[u8]) -> Result<LineMask> {
    let (n_theta, n_s) = read_header(bytes, MASK_MAGIC)?;
    let geom = SinogramGeometry::new(n_theta, n_s)?;
    let body = &bytes[12..];
    if body.len() != geom.len() {
        return Err(Error::Format(format!(
            "expected {} mask bytes, found {}",
            geom.len(),
            body.len()
        )));
    }
    let bits = body
        .iter()
        .map(|b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::Format(format!("mask byte {other} is not 0 or 1"))),
        })
        .collect::<Result<Vec<_>>>()?;
    LineMask::from_bits(geom, bits)
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    Ok(buf)
}

fn write_all(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(bytes)?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<GridField> {
    decode_field(&read_all(path)?)
}

pub fn write_field(path: &Path, f: &GridField) -> Result<()> {
    write_all(path, &encode_field(f)?)
}

pub fn read_sinogram(path: &Path) -> Result<Sinogram> {
    decode_sinogram(&read_all(path)?)
}

pub fn write_sinogram(path: &Path, g: &Sinogram) -> Result<()> {
    write_all(path, &encode_sinogram(g)?)
}

pub fn read_mask(path: &Path) -> Result<LineMask> {
    decode_mask(&read_all(path)?)
}

pub fn write_mask(path: &Path, m: &LineMask) -> Result<()> {
    write_all(path, &encode_mask(m)?)
}

/// One line per grid row (`iy`), comma-separated, full round-trip precision.
pub fn field_to_csv(f: &GridField) -> Result<String> {
    if f.dim() != 2 {
        return Err(Error::Dimension("CSV export is for 2D fields".into()));
    }
    let n = f.n();
    let mut out = String::new();
    for row in f.values().chunks(n) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    Ok(out)
}

/// Ordered `key=value` records, as used by reports and config files.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses `key=value` lines; blank lines and lines starting with `#`
    /// are skipped. Duplicate keys are an error.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KeyValues::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Format(format!("line {}: expected key=value", lineno + 1))
            })?;
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::Format(format!("line {}: empty key", lineno + 1)));
            }
            if kv.entries.insert(k.to_string(), v.trim().to_string()).is_some() {
                return Err(Error::Format(format!("line {}: duplicate key {k}", lineno + 1)));
            }
        }
        Ok(kv)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Errors on the first key that is not in `allowed`.
    pub fn reject_unknown(&self, allowed: &[&str]) -> Result<()> {
        match self.keys().find(|k| !allowed.contains(k)) {
            Some(k) => Err(Error::Parameter(format!("unknown key {k}"))),
            None => Ok(()),
        }
    }

    pub fn parse_value<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::Parameter(format!("cannot parse {key}={v}")))
            })
            .transpose()
    }

    pub fn value_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parse_value(key)?.unwrap_or(default))
    }

    pub fn require<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.parse_value(key)?
            .ok_or_else(|| Error::Parameter(format!("missing key {key}")))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_round_trip_is_bitwise() {
        let f = GridField::from_fn(2, 8, |x| x[0].sin() + 1e-300 * x[1]).unwrap();
        let bytes = encode_field(&f).unwrap();
        assert_eq!(&bytes[..4], b"RGF1");
        assert_eq!(bytes.len(), 12 + 64 * 8);
        let g = decode_field(&bytes).unwrap();
        assert_eq!(f.values(), g.values());
        assert_eq!(g.dim(), 2);
    }

    #[test]
    fn sinogram_and_mask_round_trip() {
        let geom = SinogramGeometry::new(4, 5).unwrap();
        let g = Sinogram::from_values(geom.clone(), (0..20).map(|v| v as f64 * 0.1).collect())
            .unwrap();
        let back = decode_sinogram(&encode_sinogram(&g).unwrap()).unwrap();
        assert_eq!(g.values(), back.values());
        let bits: Vec<bool> = (0..20).map(|i| i % 3 == 0).collect();
        let m = LineMask::from_bits(geom, bits.clone()).unwrap();
        let bytes = encode_mask(&m).unwrap();
        assert_eq!(bytes[12], 1);
        assert_eq!(decode_mask(&bytes).unwrap().bits(), &bits[..]);
    }

    #[test]
    fn malformed_files_are_rejected() {
        assert!(decode_field(b"RGF1").is_err());
        let mut bytes = encode_field(&GridField::zeros(2, 8).unwrap()).unwrap();
        bytes.pop();
        assert!(decode_field(&bytes).is_err());
        bytes[0] = b'X';
        assert!(decode_field(&bytes).is_err());
        let geom = SinogramGeometry::new(2, 2).unwrap();
        let mut m = encode_mask(&LineMask::full(geom)).unwrap();
        m[13] = 7;
        assert!(decode_mask(&m).is_err());
    }

    #[test]
    fn csv_rows() {
        let f = GridField::from_fn(2, 8, |x| x[0]).unwrap();
        let csv = field_to_csv(&f).unwrap();
        assert_eq!(csv.lines().count(), 8);
        assert_eq!(csv.lines().next().unwrap().split(',').count(), 8);
        assert!(field_to_csv(&GridField::zeros(3, 8).unwrap()).is_err());
    }

    #[test]
    fn key_values() {
        let kv = KeyValues::parse("# c\nn = 64\n\nname=disc\n").unwrap();
        assert_eq!(kv.require::<usize>("n").unwrap(), 64);
        assert_eq!(kv.get("name"), Some("disc"));
        assert!(kv.reject_unknown(&["n"]).is_err());
        assert!(kv.reject_unknown(&["n", "name"]).is_ok());
        assert!(KeyValues::parse("a=1\na=2").is_err());
        assert!(KeyValues::parse("novalue").is_err());
        assert!(kv.require::<f64>("name").is_err());
        assert_eq!(KeyValues::parse(&kv.to_text()).unwrap(), kv);
    }
}
