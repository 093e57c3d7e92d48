//! Closed-form forward marginal of the OU noising process started from an
//! empirical distribution: an isotropic Gaussian mixture with one
//! component per ground-truth sample.

use std::f64::consts::PI;

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use super::{Dataset, NoiseSchedule, ScoreProvider};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct MixtureMarginal {
    schedule: NoiseSchedule,
    dataset: Dataset,
    sq_norms: Vec<f64>,
}

/// Shrink `a = exp(-B/2)` and variance `1 - exp(-B)` at a fixed time.
#[derive(Debug, Clone, Copy)]
pub struct MarginalParams {
    pub shrink: f64,
    pub variance: f64,
}

impl MixtureMarginal {
    pub fn new(schedule: NoiseSchedule, dataset: Dataset) -> Self {
        let sq_norms = dataset
            .rows()
            .map(|r| r.iter().map(|v| v * v).sum())
            .collect();
        Self {
            schedule,
            dataset,
            sq_norms,
        }
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn dim(&self) -> usize {
        self.dataset.dim()
    }

    pub fn params(&self, t: f64) -> Result<MarginalParams> {
        let variance = self.schedule.variance(t)?;
        if !(variance > 0.0) {
            return Err(Error::Singular(t));
        }
        Ok(MarginalParams {
            shrink: self.schedule.shrink(t)?,
            variance,
        })
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Argument(format!(
                "state has dimension {}, marginal has {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// `log p(x | t)` with log-sum-exp over components.
    pub fn log_density(&self, t: f64, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let MarginalParams { shrink, variance } = self.params(t)?;
        let inv2v = 0.5 / variance;
        let exps: Vec<f64> = self
            .dataset
            .rows()
            .map(|mu| {
                let d2: f64 = x
                    .iter()
                    .zip(mu)
                    .map(|(xi, mi)| {
                        let d = xi - shrink * mi;
                        d * d
                    })
                    .sum();
                -d2 * inv2v
            })
            .collect();
        let max = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = exps.iter().map(|e| (e - max).exp()).sum();
        let d = self.dim() as f64;
        Ok(max + sum.ln() - (self.dataset.count() as f64).ln() - 0.5 * d * (2.0 * PI * variance).ln())
    }

    /// Posterior component weights `P(s | x, t)` (softmax of the log kernels).
    pub fn responsibilities(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let p = self.params(t)?;
        let mut w = vec![0.0; self.dataset.count()];
        self.log_kernels(p, x, &mut w);
        softmax_in_place(&mut w);
        Ok(w)
    }

    // Log kernel up to the x-only term, which cancels in the softmax.
    fn log_kernels(&self, p: MarginalParams, x: &[f64], out: &mut [f64]) {
        let a = p.shrink;
        let inv_v = 1.0 / p.variance;
        for ((o, mu), n2) in out.iter_mut().zip(self.dataset.rows()).zip(&self.sq_norms) {
            let dot: f64 = x.iter().zip(mu).map(|(u, v)| u * v).sum();
            *o = (a * dot - 0.5 * a * a * n2) * inv_v;
        }
    }

    /// `psi(t, x) = -grad_x log p(x | t)`.
    pub fn exact_score(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.score(t, x, &mut out)?;
        Ok(out)
    }
}

fn softmax_in_place(w: &mut [f64]) {
    let max = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in w.iter_mut() {
        // e^-745 underflows to zero anyway; skipping saves the call.
        let z = *v - max;
        *v = if z < -745.0 { 0.0 } else { z.exp() };
        sum += *v;
    }
    let inv = 1.0 / sum;
    w.iter_mut().for_each(|v| *v *= inv);
}

impl ScoreProvider for MixtureMarginal {
    fn dim(&self) -> usize {
        self.dataset.dim()
    }

    fn score(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_dim(x)?;
        self.score_batch(t, x, out)
    }

    fn score_batch(&self, t: f64, xs: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.dim();
        if xs.len() % d != 0 {
            return Err(Error::Argument("batch shape does not match the marginal".into()));
        }
        let p = self.params(t)?;
        self.scores_with(&vec![p; xs.len() / d], xs, out)
    }
}

impl MixtureMarginal {
    /// Exact scores of a batch whose rows sit at different times:
    /// row `i` of `xs` is scored at `ts[i]`.
    pub fn score_batch_at(&self, ts: &[f64], xs: &[f64], out: &mut [f64]) -> Result<()> {
        let params = ts.iter().map(|t| self.params(*t)).collect::<Result<Vec<_>>>()?;
        self.scores_with(&params, xs, out)
    }

    fn scores_with(&self, params: &[MarginalParams], xs: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.dim();
        if xs.len() != params.len() * d || out.len() != xs.len() {
            return Err(Error::Argument("batch shape does not match the marginal".into()));
        }
        let s = self.dataset.count();
        let data = ArrayView2::from_shape((s, d), self.dataset.as_flat()).expect("dataset is s x d");
        // Blocks of rows: log kernels by one GEMM, softmax in place, then
        // the posterior means by a second GEMM.
        const BLOCK: usize = 128;
        xs.par_chunks(BLOCK * d)
            .zip(out.par_chunks_mut(BLOCK * d))
            .zip(params.par_chunks(BLOCK))
            .for_each(|((xb, ob), pb)| {
                let m = xb.len() / d;
                let xv = ArrayView2::from_shape((m, d), xb).expect("block is m x d");
                // row-major output so every row is one contiguous slice
                let mut k = Array2::zeros((m, s));
                general_mat_mul(1.0, &xv, &data.t(), 0.0, &mut k);
                for (mut row, p) in k.rows_mut().into_iter().zip(pb) {
                    let row = row.as_slice_mut().expect("standard layout");
                    let (a, inv_v) = (p.shrink, 1.0 / p.variance);
                    let c = -0.5 * a * a * inv_v;
                    let mut max = f64::NEG_INFINITY;
                    for (z, n2) in row.iter_mut().zip(&self.sq_norms) {
                        *z = *z * a * inv_v + c * n2;
                        max = max.max(*z);
                    }
                    let mut total = 0.0;
                    for z in row.iter_mut() {
                        // e^-37 < 2^-53 relative to the largest weight: such
                        // terms are below half an ulp of the normalizer.
                        let u = *z - max;
                        *z = if u < -37.0 { 0.0 } else { u.exp() };
                        total += *z;
                    }
                    let inv = 1.0 / total;
                    row.iter_mut().for_each(|z| *z *= inv);
                }
                let mean = k.dot(&data);
                for ((oi, xi), (mi, p)) in ob
                    .chunks_mut(d)
                    .zip(xb.chunks(d))
                    .zip(mean.rows().into_iter().zip(pb))
                {
                    let (a, inv_v) = (p.shrink, 1.0 / p.variance);
                    for ((o, x), mu) in oi.iter_mut().zip(xi).zip(mi.iter()) {
                        *o = (x - a * mu) * inv_v;
                    }
                }
            });
        Ok(())
    }
}
