use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::rng::Rng;

/// Magic number of an IDX file holding unsigned bytes in three dimensions.
pub const IDX3_MAGIC: u32 = 0x0000_0803;

/// Reads an IDX3-ubyte image file into a `samples × (rows·cols)` matrix scaled to `[0, 1]`.
pub fn load_idx_images(path: impl AsRef<Path>) -> Result<Mat> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_idx_images(&bytes)
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<Mat> {
    let word = |at: usize| -> Result<u32> {
        bytes
            .get(at..at + 4)
            .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
            .ok_or(Error::TruncatedFile)
    };
    let magic = word(0)?;
    if magic != IDX3_MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let count = word(4)? as usize;
    let rows = word(8)? as usize;
    let cols = word(12)? as usize;
    let features = rows * cols;
    let payload = &bytes[16..];
    if payload.len() < count * features {
        return Err(Error::TruncatedFile);
    }
    Ok(Mat::from_fn(count, features, |i, j| {
        f64::from(payload[i * features + j]) / 255.0
    }))
}

/// Rows split into equal shards; `dropped` rows did not divide evenly.
#[derive(Debug, Clone)]
pub struct RowSplit {
    pub shards: Vec<Mat>,
    pub dropped: usize,
}

/// Shuffles rows with `rng` and cuts them into `n` equal shards.
pub fn split_rows(data: &Mat, n: usize, rng: &mut Rng) -> Result<RowSplit> {
    if n == 0 || data.nrows() < n {
        return Err(Error::InvalidDims(format!(
            "cannot split {} rows over {n} nodes",
            data.nrows()
        )));
    }
    let mut order: Vec<usize> = (0..data.nrows()).collect();
    order.shuffle(rng);
    let per = data.nrows() / n;
    let shards = (0..n)
        .map(|i| Mat::from_fn(per, data.ncols(), |r, c| data[(order[i * per + r], c)]))
        .collect();
    Ok(RowSplit {
        shards,
        dropped: data.nrows() - per * n,
    })
}
