use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Activation, MlpParams, TimeEmbedding};
use crate::diffusion::{NoiseSchedule, ScheduleKind, ScoreProvider};
use crate::error::{Error, Result};
use crate::io::{BinReader, BinWriter};

/// How per-example squared errors are weighted in the loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossWeighting {
    #[default]
    Unweighted,
    /// Multiply each example by `sigma_t^2`, which turns the score error
    /// into a noise-prediction error.
    SigmaSquared,
}

/// Score network `NN(t, x)`: an MLP on `[x, embed(t)]`, optionally divided
/// by `sigma_t` so the raw output stays O(1) as `t -> 0`, and optionally
/// added to `x`, the score of the unit Gaussian every forward marginal of a
/// whitened, decorrelated dataset would be. The MLP then only carries the
/// departure from that reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreNet {
    pub params: MlpParams,
    pub embedding: TimeEmbedding,
    pub schedule: NoiseSchedule,
    pub sigma_reparam: bool,
    pub gaussian_skip: bool,
}

/// One minibatch: `t[i]`, row `i` of `x` and of `target` (both `n x d`).
#[derive(Debug, Clone, Default)]
pub struct Batch {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub target: Vec<f64>,
}

impl ScoreNet {
    /// Network with the given hidden widths between `[x, embed(t)]` and `x`.
    pub fn new(
        dim: usize,
        hidden: &[usize],
        activation: Activation,
        embedding: TimeEmbedding,
        schedule: NoiseSchedule,
        sigma_reparam: bool,
        seed: u64,
    ) -> Result<Self> {
        embedding.validate()?;
        let mut dims = vec![dim + embedding.width()];
        dims.extend_from_slice(hidden);
        dims.push(dim);
        let net = Self {
            params: MlpParams::init(&dims, activation, seed)?,
            embedding,
            schedule,
            sigma_reparam,
            gaussian_skip: false,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn with_gaussian_skip(mut self, on: bool) -> Self {
        self.gaussian_skip = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.embedding.validate()?;
        let d = self.params.output_dim();
        if self.params.input_dim() != d + self.embedding.width() {
            return Err(Error::config(
                "layer_dims",
                format!(
                    "input width {} != state dim {d} + embedding width {}",
                    self.params.input_dim(),
                    self.embedding.width()
                ),
            ));
        }
        Ok(())
    }

    fn inputs(&self, ts: &[f64], xs: &[f64]) -> Result<Array2<f64>> {
        let d = self.dim();
        if xs.len() != ts.len() * d {
            return Err(Error::config("x", format!("batch of {} values is not {} x {d}", xs.len(), ts.len())));
        }
        let w = self.params.input_dim();
        let mut input = Array2::zeros((ts.len(), w));
        for (i, (mut row, t)) in input.rows_mut().into_iter().zip(ts).enumerate() {
            let row = row.as_slice_mut().unwrap();
            row[..d].copy_from_slice(&xs[i * d..(i + 1) * d]);
            self.embedding.embed_into(*t, &mut row[d..]);
        }
        Ok(input)
    }

    fn out_scale(&self, t: f64) -> Result<f64> {
        if !self.sigma_reparam {
            return Ok(1.0);
        }
        let v = self.schedule.variance(t)?;
        if !(v > 0.0) {
            return Err(Error::Singular(t));
        }
        Ok(1.0 / v.sqrt())
    }

    /// Score estimates for a batch of `(t_i, x_i)` pairs.
    pub fn forward_scores(&self, ts: &[f64], xs: &[f64]) -> Result<Vec<f64>> {
        let input = self.inputs(ts, xs)?;
        let mut out = self.params.forward(input.view());
        for (mut row, t) in out.rows_mut().into_iter().zip(ts) {
            let s = self.out_scale(*t)?;
            row.mapv_inplace(|v| v * s);
        }
        // logical order: the GEMM may hand back a column-major array
        let mut out: Vec<f64> = out.iter().copied().collect();
        if self.gaussian_skip {
            out.iter_mut().zip(xs).for_each(|(o, x)| *o += x);
        }
        Ok(out)
    }

    pub fn forward_score(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        self.forward_scores(&[t], x)
    }

    /// Raw network output before the `1/sigma_t` factor and the skip.
    pub fn raw_output(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let input = self.inputs(&[t], x)?;
        Ok(self.params.forward(input.view()).iter().copied().collect())
    }

    /// `loss = mean_i w_i |target_i - score_i|^2` and its parameter gradient.
    pub fn loss_and_grad(&self, batch: &Batch, weighting: LossWeighting) -> Result<(f64, MlpParams)> {
        let n = batch.t.len();
        let d = self.dim();
        if n == 0 {
            return Err(Error::Argument("empty training batch".into()));
        }
        if batch.target.len() != n * d {
            return Err(Error::config("target", "shape does not match the batch"));
        }
        let input = self.inputs(&batch.t, &batch.x)?;
        let (raw, tape) = self.params.forward_tape(input.view());
        let mut d_out = Array2::zeros(raw.raw_dim());
        let mut loss = 0.0;
        for i in 0..n {
            let t = batch.t[i];
            let s = self.out_scale(t)?;
            let w = match weighting {
                LossWeighting::Unweighted => 1.0,
                LossWeighting::SigmaSquared => self.schedule.variance(t)?,
            };
            for k in 0..d {
                let skip = if self.gaussian_skip { batch.x[i * d + k] } else { 0.0 };
                let r = batch.target[i * d + k] - skip - s * raw[[i, k]];
                loss += w * r * r;
                d_out[[i, k]] = -2.0 * w * r * s / n as f64;
            }
        }
        loss /= n as f64;
        if !loss.is_finite() {
            return Err(Error::Numerical {
                step: 0,
                t: f64::NAN,
                detail: "non-finite training loss".into(),
            });
        }
        Ok((loss, self.params.backward(&tape, d_out)))
    }

    /// Binary checkpoint: header, layer count, layer widths, then every
    /// layer's weights (row-major, `out x in`) and biases; a trailer holds
    /// the activation, embedding, output flags (bit 0 `sigma_reparam`, bit 1
    /// `gaussian_skip`) and schedule.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BinWriter::new();
        w.u64(self.params.layer_dims.len() as u64);
        for d in &self.params.layer_dims {
            w.u64(*d as u64);
        }
        for (wt, b) in self.params.weights.iter().zip(&self.params.biases) {
            w.f64s(wt.as_slice().expect("standard layout"));
            w.f64s(b.as_slice().expect("standard layout"));
        }
        w.u32(self.params.activation.code());
        w.u64(self.embedding.n_frequencies as u64);
        w.f64(self.embedding.base_period);
        w.u32(self.sigma_reparam as u32 | (self.gaussian_skip as u32) << 1);
        w.f64(self.schedule.beta_min);
        w.f64(self.schedule.beta_max);
        w.f64(self.schedule.horizon);
        w.u32(match self.schedule.kind {
            ScheduleKind::Constant => 0,
            ScheduleKind::Linear => 1,
        });
        w.write_to(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BinReader::open(path)?;
        let bad = |what: &str| Error::format(path, what);
        let n_layers = r.u64()? as usize;
        if !(2..=1024).contains(&n_layers) {
            return Err(bad("implausible layer count"));
        }
        let dims = (0..n_layers).map(|_| r.u64().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in dims.windows(2) {
            let wt = r.f64s(w[0] * w[1])?;
            weights.push(Array2::from_shape_vec((w[1], w[0]), wt).map_err(|_| bad("weight shape"))?);
            biases.push(r.f64s(w[1])?.into());
        }
        let activation = Activation::from_code(r.u32()?).ok_or_else(|| bad("unknown activation"))?;
        let embedding = TimeEmbedding {
            n_frequencies: r.u64()? as usize,
            base_period: r.f64()?,
        };
        let flags = r.u32()?;
        if flags > 3 {
            return Err(bad("unknown output flags"));
        }
        let (beta_min, beta_max, horizon) = (r.f64()?, r.f64()?, r.f64()?);
        let kind = match r.u32()? {
            0 => ScheduleKind::Constant,
            1 => ScheduleKind::Linear,
            _ => return Err(bad("unknown schedule kind")),
        };
        if !r.is_at_end() {
            return Err(bad("trailing bytes"));
        }
        let net = Self {
            params: MlpParams {
                layer_dims: dims,
                weights,
                biases,
                activation,
            },
            embedding,
            schedule: NoiseSchedule { beta_min, beta_max, horizon, kind }.validated()?,
            sigma_reparam: flags & 1 != 0,
            gaussian_skip: flags & 2 != 0,
        };
        net.validate()?;
        Ok(net)
    }
}

impl ScoreProvider for ScoreNet {
    fn dim(&self) -> usize {
        self.params.output_dim()
    }

    fn score(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(&self.forward_score(t, x)?);
        Ok(())
    }

    fn score_batch(&self, t: f64, xs: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.dim();
        let n = xs.len() / d;
        // Row blocks keep the matrices cache-sized and let rayon split work.
        const BLOCK: usize = 256;
        use rayon::prelude::*;
        let s = self.out_scale(t)?;
        xs.par_chunks(BLOCK * d)
            .zip(out.par_chunks_mut(BLOCK * d))
            .try_for_each(|(x, o)| -> Result<()> {
                let m = x.len() / d;
                let input = self.inputs(&vec![t; m], x)?;
                let raw = self.params.forward(input.view());
                for (oi, ri) in o.iter_mut().zip(raw.iter()) {
                    *oi = s * ri;
                }
                if self.gaussian_skip {
                    o.iter_mut().zip(x).for_each(|(oi, xi)| *oi += xi);
                }
                Ok(())
            })?;
        debug_assert_eq!(out.len(), n * d);
        Ok(())
    }
}

/// Largest relative discrepancy between the analytic gradient and
/// fourth-order central differences of step `h`, over every parameter.
/// Entries whose gradient magnitude is below `floor` are compared absolutely
/// against `floor`.
pub fn gradient_check(net: &ScoreNet, batch: &Batch, weighting: LossWeighting, h: f64, floor: f64) -> Result<f64> {
    let (_, g) = net.loss_and_grad(batch, weighting)?;
    let analytic: Vec<f64> = g.iter().copied().collect();
    let mut probe = net.clone();
    let mut worst = 0.0f64;
    for (k, a) in analytic.iter().enumerate() {
        let orig = *probe.params.get_mut(k).expect("same shape");
        let mut at = |dx: f64| -> Result<f64> {
            *probe.params.get_mut(k).expect("same shape") = orig + dx;
            Ok(probe.loss_and_grad(batch, weighting)?.0)
        };
        let fd = (8.0 * (at(h)? - at(-h)?) - (at(2.0 * h)? - at(-2.0 * h)?)) / (12.0 * h);
        *probe.params.get_mut(k).expect("same shape") = orig;
        worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(floor));
    }
    Ok(worst)
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn checkpoint_round_trip_and_batching_preserve_outputs(
            seed in any::<u64>(),
            dim in 1usize..5,
            width in 1usize..12,
            reparam in any::<bool>(),
            skip in any::<bool>(),
            t in 1e-3f64..1.0,
            x in prop::collection::vec(-3.0f64..3.0, 4),
        ) {
            let net = ScoreNet::new(dim, &[width, width], Activation::Silu,
                TimeEmbedding { n_frequencies: 3, base_period: 20.0 }, NoiseSchedule::default(), reparam, seed).unwrap().with_gaussian_skip(skip);
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("net.bin");
            net.save(&path).unwrap();
            let back = ScoreNet::load(&path).unwrap();
            let x = &x[..dim];
            let one = net.forward_score(t, x).unwrap();
            prop_assert_eq!(&one, &back.forward_score(t, x).unwrap());
            let xs: Vec<f64> = x.iter().chain(x).copied().collect();
            // GEMM blocking may differ with the row count: allow a few ulps
            let both = net.forward_scores(&[0.5, t], &xs).unwrap();
            for (a, b) in both[dim..].iter().zip(&one) {
                prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
    }
}
