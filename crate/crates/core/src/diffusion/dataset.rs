use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{BinReader, BinWriter};

/// `count` samples of dimension `dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    samples: Vec<f64>,
    pub provenance: String,
}

impl Dataset {
    pub fn new(dim: usize, samples: Vec<f64>, provenance: impl Into<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Argument("dataset dimension must be positive".into()));
        }
        if samples.is_empty() || samples.len() % dim != 0 {
            return Err(Error::Argument(format!(
                "dataset of {} values is not a non-empty multiple of dim {dim}",
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Argument(format!(
                "sample {} has a non-finite coordinate",
                i / dim
            )));
        }
        Ok(Self {
            dim,
            samples,
            provenance: provenance.into(),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], provenance: impl Into<String>) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Argument("ragged dataset rows".into()));
        }
        Self::new(dim, rows.concat(), provenance)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.samples.len() / self.dim
    }

    pub fn sample(&self, s: usize) -> &[f64] {
        &self.samples[s * self.dim..(s + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.samples
    }

    /// Per-coordinate mean and population standard deviation.
    pub fn moments(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.count() as f64;
        let mut mean = vec![0.0; self.dim];
        for row in self.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; self.dim];
        for row in self.rows() {
            for ((acc, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *acc += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|v| (v / n).sqrt()).collect();
        (mean, std)
    }

    /// Shift/scale every coordinate to zero mean and unit variance.
    pub fn whiten(&self) -> (Dataset, Whitening) {
        let (mean, std) = self.moments();
        let scale: Vec<f64> = std
            .into_iter()
            .map(|s| if s > 0.0 { s } else { 1.0 })
            .collect();
        let w = Whitening { mean, scale };
        let mut out = self.samples.clone();
        for row in out.chunks_exact_mut(self.dim) {
            w.forward_in_place(row);
        }
        let ds = Dataset {
            dim: self.dim,
            samples: out,
            provenance: format!("whitened({})", self.provenance),
        };
        (ds, w)
    }

    /// Binary layout: `LGDF`, version u32, count u64, dim u64,
    /// count*dim little-endian f64 (row-major), provenance (u32 length + UTF-8).
    pub fn save(&self, path: &Path) -> Result<()> {
        write_rows(path, self.dim, &self.samples, &self.provenance)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (dim, samples, provenance) = read_rows(path)?;
        Self::new(dim, samples, provenance).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// Rows in the dataset layout, allowing zero rows (an empty sample file).
pub fn write_rows(path: &Path, dim: usize, rows: &[f64], provenance: &str) -> Result<()> {
    if dim == 0 || rows.len() % dim != 0 {
        return Err(Error::Argument(format!("{} values do not form rows of dim {dim}", rows.len())));
    }
    let mut w = BinWriter::new();
    w.u64((rows.len() / dim) as u64);
    w.u64(dim as u64);
    w.f64s(rows);
    w.bytes(provenance.as_bytes());
    w.write_to(path)
}

/// `(dim, rows, provenance)` of a file written by [`write_rows`].
pub fn read_rows(path: &Path) -> Result<(usize, Vec<f64>, String)> {
    let mut r = BinReader::open(path)?;
    let count = r.u64()? as usize;
    let dim = r.u64()? as usize;
    let samples = r.f64s(count * dim)?;
    let provenance = String::from_utf8(r.bytes()?).map_err(|_| Error::format(path, "provenance is not UTF-8"))?;
    if !r.is_at_end() {
        return Err(Error::format(path, "trailing bytes after dataset"));
    }
    Ok((dim, samples, provenance))
}

/// Affine per-coordinate map `z = (x - mean) / scale` and its inverse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Whitening {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Whitening {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn forward_in_place(&self, x: &mut [f64]) {
        for ((v, m), s) in x.iter_mut().zip(&self.mean).zip(&self.scale) {
            *v = (*v - m) / s;
        }
    }

    pub fn inverse_in_place(&self, z: &mut [f64]) {
        for ((v, m), s) in z.iter_mut().zip(&self.mean).zip(&self.scale) {
            *v = *v * s + m;
        }
    }
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn whitening_standardizes_and_inverts(
            rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 2..60)
        ) {
            let ds = Dataset::from_rows(&rows, "p").unwrap();
            let (white, w) = ds.whiten();
            let (mean, var) = white.moments();
            // moments() reports standard deviations
            let (_, raw_std) = ds.moments();
            for k in 0..3 {
                if raw_std[k] > 1e-6 {
                    prop_assert!(mean[k].abs() < 1e-9);
                    prop_assert!((var[k] - 1.0).abs() < 1e-9);
                }
            }
            for (z, x) in white.rows().zip(ds.rows()) {
                let mut back = z.to_vec();
                w.inverse_in_place(&mut back);
                for (b, v) in back.iter().zip(x) {
                    prop_assert!((b - v).abs() <= 1e-9 * v.abs().max(1.0));
                }
            }
        }
    }
}
