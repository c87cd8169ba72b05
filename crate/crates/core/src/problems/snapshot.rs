//! Binary container for instance data.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic  b"DPRSNAP\0"
//! u32    version (1)
//! u32    entry count
//! per entry:
//!   u32  name length, then UTF-8 name
//!   u64  rows
//!   u64  cols
//!   f64  rows·cols values, row-major
//! ```

use std::path::Path;

use super::ObjectiveScaling;
use crate::error::{Error, Result};
use crate::linalg::Mat;

const MAGIC: &[u8; 8] = b"DPRSNAP\0";
const VERSION: u32 = 1;

/// Named matrices in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Snapshot {
    pub entries: Vec<(String, Mat)>,
}

impl Snapshot {
    pub fn push(&mut self, name: impl Into<String>, m: Mat) {
        self.entries.push((name.into(), m));
    }

    pub fn get(&self, name: &str) -> Option<&Mat> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = MAGIC.to_vec();
        out.extend(VERSION.to_le_bytes());
        out.extend((self.entries.len() as u32).to_le_bytes());
        for (name, m) in &self.entries {
            out.extend((name.len() as u32).to_le_bytes());
            out.extend(name.as_bytes());
            out.extend((m.nrows() as u64).to_le_bytes());
            out.extend((m.ncols() as u64).to_le_bytes());
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    out.extend(m[(i, j)].to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, at: 0 };
        let magic = cur.take(8)?;
        if magic != MAGIC {
            return Err(Error::BadMagic(u32::from_be_bytes([
                magic[0], magic[1], magic[2], magic[3],
            ])));
        }
        let version = cur.u32()?;
        if version != VERSION {
            return Err(Error::InvalidDims(format!(
                "unsupported snapshot version {version}"
            )));
        }
        let count = cur.u32()?;
        let mut snap = Snapshot::default();
        for _ in 0..count {
            let len = cur.u32()? as usize;
            let name = String::from_utf8(cur.take(len)?.to_vec())
                .map_err(|_| Error::InvalidDims("entry name is not UTF-8".into()))?;
            let rows = cur.u64()? as usize;
            let cols = cur.u64()? as usize;
            let mut m = Mat::zeros(rows, cols);
            for i in 0..rows {
                for j in 0..cols {
                    m[(i, j)] = f64::from_le_bytes(cur.take(8)?.try_into().expect("8 bytes"));
                }
            }
            snap.push(name, m);
        }
        Ok(snap)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let out = self
            .bytes
            .get(self.at..self.at + n)
            .ok_or(Error::TruncatedFile)?;
        self.at += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

/// `meta` entry shared by instance snapshots: `[kind, r, scaling]`.
pub(crate) fn meta(kind: f64, r: usize, scaling: ObjectiveScaling) -> Mat {
    let sc = match scaling {
        ObjectiveScaling::PerSample => 0.0,
        ObjectiveScaling::Raw => 1.0,
    };
    Mat::from_row_slice(1, 3, &[kind, r as f64, sc])
}

pub(crate) fn read_meta(snap: &Snapshot, kind: f64) -> Result<(usize, ObjectiveScaling)> {
    let m = snap
        .get("meta")
        .filter(|m| m.shape() == (1, 3))
        .ok_or_else(|| Error::InvalidDims("snapshot has no meta entry".into()))?;
    if m[0] != kind {
        return Err(Error::InvalidDims(format!(
            "snapshot kind {} is not {kind}",
            m[0]
        )));
    }
    let scaling = match m[2] {
        0.0 => ObjectiveScaling::PerSample,
        1.0 => ObjectiveScaling::Raw,
        v => return Err(Error::InvalidDims(format!("unknown scaling code {v}"))),
    };
    Ok((m[1] as usize, scaling))
}

/// Entries `{prefix}/0`, `{prefix}/1`, … in order.
pub(crate) fn indexed(snap: &Snapshot, prefix: &str) -> Vec<Mat> {
    (0..)
        .map_while(|i| snap.get(&format!("{prefix}/{i}")).cloned())
        .collect()
}

pub fn write_snapshot(path: impl AsRef<Path>, snap: &Snapshot) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, snap.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_snapshot(path: impl AsRef<Path>) -> Result<Snapshot> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Snapshot::from_bytes(&bytes)
}
