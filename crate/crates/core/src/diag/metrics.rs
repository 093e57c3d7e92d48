use serde::{Deserialize, Serialize};

use super::ks::ks_two_sample;
use crate::error::{Error, Result};

/// Probability mass added to every histogram bin before renormalizing.
pub const KL_REGULARIZATION: f64 = 1e-10;

/// Distances between two ensembles of the same dimension. Differences are
/// taken as `B - A`; the KL divergence is `KL(A || B)` per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionMetrics {
    pub ks: Vec<f64>,
    pub mean_diff: Vec<f64>,
    /// Frobenius norm of the covariance difference.
    pub cov_diff: f64,
    pub kl: Vec<f64>,
}

impl DistributionMetrics {
    pub fn max_ks(&self) -> f64 {
        self.ks.iter().cloned().fold(0.0, f64::max)
    }
}

fn column(xs: &[f64], dim: usize, k: usize) -> Vec<f64> {
    xs.iter().skip(k).step_by(dim).copied().collect()
}

fn mean_cov(xs: &[f64], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = (xs.len() / dim) as f64;
    let mut mean = vec![0.0; dim];
    for row in xs.chunks_exact(dim) {
        mean.iter_mut().zip(row).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut cov = vec![0.0; dim * dim];
    for row in xs.chunks_exact(dim) {
        for i in 0..dim {
            for j in 0..dim {
                cov[i * dim + j] += (row[i] - mean[i]) * (row[j] - mean[j]);
            }
        }
    }
    cov.iter_mut().for_each(|c| *c /= n);
    (mean, cov)
}

/// `KL(a || b)` over shared bins whose width follows Scott's rule on the
/// pooled sample.
pub fn histogram_kl(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Argument("histogram KL of an empty sample".into()));
    }
    let pooled = a.iter().chain(b);
    let n = (a.len() + b.len()) as f64;
    let (lo, hi, sum) = pooled.clone().fold((f64::INFINITY, f64::NEG_INFINITY, 0.0), |(l, h, s), v| {
        (l.min(*v), h.max(*v), s + v)
    });
    let mean = sum / n;
    let sd = (pooled.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    let width = 3.49 * sd * n.powf(-1.0 / 3.0);
    let bins = if width > 0.0 && hi > lo {
        (((hi - lo) / width).ceil() as usize).clamp(1, 100_000)
    } else {
        1
    };
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let hist = |xs: &[f64]| {
        let mut h = vec![0.0; bins];
        for v in xs {
            let k = (((v - lo) / span) * bins as f64) as usize;
            h[k.min(bins - 1)] += 1.0;
        }
        let n = xs.len() as f64;
        let total = 1.0 + bins as f64 * KL_REGULARIZATION;
        h.iter_mut().for_each(|c| *c = (*c / n + KL_REGULARIZATION) / total);
        h
    };
    let (p, q) = (hist(a), hist(b));
    Ok(p.iter().zip(&q).map(|(p, q)| p * (p / q).ln()).sum())
}

/// Compare ensembles `a` and `b` (row-major, `n x dim`, sizes may differ).
pub fn distribution_metrics(a: &[f64], b: &[f64], dim: usize) -> Result<DistributionMetrics> {
    if dim == 0 || a.len() % dim != 0 || b.len() % dim != 0 {
        return Err(Error::Argument(format!(
            "ensemble lengths {} and {} are not multiples of dimension {dim}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::Argument("distribution metrics need non-empty ensembles".into()));
    }
    let (ma, ca) = mean_cov(a, dim);
    let (mb, cb) = mean_cov(b, dim);
    let mut ks = Vec::with_capacity(dim);
    let mut kl = Vec::with_capacity(dim);
    for k in 0..dim {
        let (ca_k, cb_k) = (column(a, dim, k), column(b, dim, k));
        ks.push(ks_two_sample(&ca_k, &cb_k)?);
        kl.push(histogram_kl(&ca_k, &cb_k)?);
    }
    Ok(DistributionMetrics {
        ks,
        mean_diff: mb.iter().zip(&ma).map(|(b, a)| b - a).collect(),
        cov_diff: ca.iter().zip(&cb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
        kl,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn normals(seed: u64, n: usize) -> Vec<f64> {
        let mut r = rng::stream(seed, 0);
        (0..n).map(|_| rng::normal(&mut r)).collect()
    }

    #[test]
    fn identical_ensembles() {
        let a = normals(1, 3000);
        let m = distribution_metrics(&a, &a, 3).unwrap();
        assert!(m.ks.iter().chain(&m.mean_diff).chain(&m.kl).all(|v| *v == 0.0));
        assert_eq!(m.cov_diff, 0.0);
    }

    #[test]
    fn independent_normals() {
        // The plug-in KL of two same-law samples is biased upwards: a
        // tail bin hit by one sample only costs ~p ln(p / 1e-10). Its mean
        // over replicates sits near 0.01 at n = 1e4, so the bound is on
        // the replicate average.
        let mut kl = 0.0;
        for s in 0..20 {
            let m = distribution_metrics(&normals(2 * s, 10_000), &normals(2 * s + 1, 10_000), 1).unwrap();
            assert!(m.ks[0] < 0.03, "{m:?}");
            assert!(m.kl[0] >= 0.0 && m.kl[0] < 0.03, "{m:?}");
            kl += m.kl[0] / 20.0;
        }
        assert!(kl < 0.015, "{kl}");
    }

    #[test]
    fn shift_by_one() {
        let a: Vec<f64> = (0..64).map(|i| (i as f64 - 20.0) / 8.0).collect();
        let b: Vec<f64> = a.iter().map(|v| v + 1.0).collect();
        let m = distribution_metrics(&a, &b, 2).unwrap();
        assert_eq!(m.mean_diff, vec![1.0, 1.0]);
        assert!(m.cov_diff < 1e-12);

        let a = normals(4, 2000);
        let b: Vec<f64> = a.iter().map(|v| v + 1.0).collect();
        assert!((distribution_metrics(&a, &b, 1).unwrap().mean_diff[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(distribution_metrics(&[1.0, 2.0, 3.0], &[1.0, 2.0], 2).is_err());
    }
}
