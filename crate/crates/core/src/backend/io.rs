//! Grid-function files.
//!
//! Binary layout, all integers and floats little-endian:
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 8    | magic `b"KGRID\0\0\x01"`                |
//! | 8      | 1    | backend kind: 0 flat torus, 1 round ℙ¹  |
//! | 9      | 3    | zero padding                            |
//! | 12     | 4    | resolution `N` (u32)                    |
//! | 16     | 8    | volume `V` (f64)                        |
//! | 24     | 8    | value count (u64): `N²` torus, `N` ℙ¹   |
//! | 32     | 8·n  | site values (f64), row-major            |
//!
//! Torus sites are ordered `index = row·N + column` with `x = column/N`,
//! `y = row/N`. ℙ¹ sites are ordered by increasing polar angle.
//!
//! The CSV variant starts with `# backend=<kind>,resolution=<N>,volume=<V>`
//! followed by a `index,value` header and one row per site.

use std::io::{BufRead, Read, Write};

use super::BackendKind;
use crate::error::{Error, Result};

pub const MAGIC: [u8; 8] = *b"KGRID\0\0\x01";

#[derive(Debug, Clone, PartialEq)]
pub struct GridFile {
    pub kind: BackendKind,
    pub resolution: usize,
    pub volume: f64,
    pub values: Vec<f64>,
}

fn expected_len(kind: BackendKind, resolution: usize) -> usize {
    match kind {
        BackendKind::FlatTorus => resolution * resolution,
        BackendKind::RoundP1 => resolution,
    }
}

impl GridFile {
    pub fn new(kind: BackendKind, resolution: usize, volume: f64, values: Vec<f64>) -> Result<Self> {
        let n = expected_len(kind, resolution);
        if values.len() != n {
            return Err(Error::ShapeMismatch {
                expected: n,
                got: values.len(),
            });
        }
        Ok(GridFile {
            kind,
            resolution,
            volume,
            values,
        })
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&MAGIC)?;
        let kind = match self.kind {
            BackendKind::FlatTorus => 0u8,
            BackendKind::RoundP1 => 1u8,
        };
        w.write_all(&[kind, 0, 0, 0])?;
        w.write_all(&(self.resolution as u32).to_le_bytes())?;
        w.write_all(&self.volume.to_le_bytes())?;
        w.write_all(&(self.values.len() as u64).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; 32];
        r.read_exact(&mut header)?;
        if header[..8] != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let kind = match header[8] {
            0 => BackendKind::FlatTorus,
            1 => BackendKind::RoundP1,
            k => return Err(Error::Format(format!("unknown backend tag {k}"))),
        };
        let resolution = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
        let volume = f64::from_le_bytes(header[16..24].try_into().unwrap());
        let count = u64::from_le_bytes(header[24..32].try_into().unwrap()) as usize;
        if count != expected_len(kind, resolution) {
            return Err(Error::Format(format!("count {count} does not match resolution {resolution}")));
        }
        let mut bytes = vec![0u8; 8 * count];
        r.read_exact(&mut bytes)?;
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        GridFile::new(kind, resolution, volume, values)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# backend={},resolution={},volume={:?}",
            self.kind.name(),
            self.resolution,
            self.volume
        )?;
        writeln!(w, "index,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{i},{v:?}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let head = lines.next().ok_or_else(|| Error::Format("empty file".into()))??;
        let head = head
            .strip_prefix("# ")
            .ok_or_else(|| Error::Format("missing header".into()))?;
        let mut kind = None;
        let mut resolution = None;
        let mut volume = None;
        for kv in head.split(',') {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("bad header field {kv}")))?;
            match k {
                "backend" => kind = BackendKind::parse(v),
                "resolution" => resolution = v.parse().ok(),
                "volume" => volume = v.parse().ok(),
                _ => {}
            }
        }
        let (kind, resolution, volume) = match (kind, resolution, volume) {
            (Some(k), Some(r), Some(v)) => (k, r, v),
            _ => return Err(Error::Format("incomplete header".into())),
        };
        match lines.next() {
            Some(Ok(l)) if l.trim() == "index,value" => {}
            _ => return Err(Error::Format("missing column header".into())),
        }
        let mut values = Vec::new();
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (i, v) = line
                .split_once(',')
                .ok_or_else(|| Error::Format(format!("bad row {line}")))?;
            if i.trim().parse::<usize>().ok() != Some(row) {
                return Err(Error::Format(format!("row {row} out of order")));
            }
            values.push(
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("row {row}: {e}")))?,
            );
        }
        GridFile::new(kind, resolution, volume, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn binary_header_layout() {
        let g = GridFile::new(BackendKind::RoundP1, 16, 4.0, (0..16).map(|i| i as f64).collect()).unwrap();
        let mut buf = Vec::new();
        g.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 32 + 16 * 8);
        assert_eq!(&buf[..8], b"KGRID\0\0\x01");
        assert_eq!(buf[8], 1);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 16);
        assert_eq!(f64::from_le_bytes(buf[16..24].try_into().unwrap()), 4.0);
        assert_eq!(f64::from_le_bytes(buf[32 + 8..40 + 8].try_into().unwrap()), 1.0);
    }

    #[test]
    fn rejects_corrupt_input() {
        assert!(matches!(GridFile::read_binary(&b"NOTAGRID"[..]), Err(Error::Io(_))));
        let mut buf = [0u8; 32];
        buf[..8].copy_from_slice(b"XXXXXXXX");
        assert!(matches!(GridFile::read_binary(&buf[..]), Err(Error::Format(_))));
        assert!(GridFile::read_csv(&b"index,value\n0,1\n"[..]).is_err());
    }

    proptest! {
        #[test]
        fn both_layouts_round_trip(values in proptest::collection::vec(-1e6f64..1e6, 16), torus in any::<bool>()) {
            let g = if torus {
                GridFile::new(BackendKind::FlatTorus, 4, 1.0, values).unwrap()
            } else {
                GridFile::new(BackendKind::RoundP1, 16, 4.0 * std::f64::consts::PI, values).unwrap()
            };
            let mut bin = Vec::new();
            g.write_binary(&mut bin).unwrap();
            prop_assert_eq!(&GridFile::read_binary(&bin[..]).unwrap(), &g);
            let mut csv = Vec::new();
            g.write_csv(&mut csv).unwrap();
            prop_assert_eq!(&GridFile::read_csv(&csv[..]).unwrap(), &g);
        }
    }
}
