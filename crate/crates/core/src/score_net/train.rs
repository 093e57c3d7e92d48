use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Activation, Batch, LossWeighting, MlpParams, ScoreNet, TimeEmbedding};
use crate::diffusion::{Dataset, MixtureMarginal, NoiseSchedule, ScoreProvider};
use crate::error::{Error, Result};
use crate::io;
use crate::rng;

/// What the network is regressed onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreTarget {
    /// Exact score of the whole empirical mixture (costs O(S) per example).
    #[default]
    FullMixture,
    /// Score of the component the example was drawn from, `z / sigma_t`;
    /// equal to the mixture score in expectation.
    Component,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub n_iterations: usize,
    pub seed: u64,
    pub sigma_reparam: bool,
    /// Add `x` to the network output; see [`ScoreNet`].
    pub gaussian_skip: bool,
    pub target: ScoreTarget,
    pub weighting: LossWeighting,
    /// Training times are drawn from `U(t_min, T)`.
    pub t_min: f64,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub embedding: TimeEmbedding,
    /// Cosine-decay the learning rate to this value over the run; `None`
    /// keeps it constant.
    pub final_learning_rate: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 128,
            n_iterations: 20_000,
            seed: 0,
            sigma_reparam: true,
            gaussian_skip: false,
            target: ScoreTarget::FullMixture,
            weighting: LossWeighting::Unweighted,
            t_min: 1e-3,
            hidden: vec![128, 128, 128],
            activation: Activation::Silu,
            embedding: TimeEmbedding::default(),
            final_learning_rate: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, schedule: &NoiseSchedule) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate", "must be > 0"));
        }
        if self.final_learning_rate.is_some_and(|l| !(l >= 0.0)) {
            return Err(Error::config("final_learning_rate", "must be >= 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be >= 1"));
        }
        if !(self.t_min > 0.0 && self.t_min < schedule.horizon) {
            return Err(Error::config("t_min", "must lie in (0, horizon)"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("hidden", "widths must be >= 1"));
        }
        self.embedding.validate()
    }

    fn lr_at(&self, it: usize) -> f64 {
        match self.final_learning_rate {
            None => self.learning_rate,
            Some(lo) => {
                let frac = it as f64 / self.n_iterations.max(1) as f64;
                lo + 0.5 * (self.learning_rate - lo) * (1.0 + (std::f64::consts::PI * frac).cos())
            }
        }
    }
}

/// Adaptive-moment optimizer state.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: MlpParams,
    v: MlpParams,
    step: i32,
}

impl Adam {
    pub fn new(like: &MlpParams) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: like.zeros_like(),
            v: like.zeros_like(),
            step: 0,
        }
    }

    pub fn update(&mut self, params: &mut MlpParams, grads: &MlpParams, lr: f64) {
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        for (((p, g), m), v) in params.iter_mut().zip(grads.iter()).zip(self.m.iter_mut()).zip(self.v.iter_mut()) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub net: ScoreNet,
    /// Minibatch loss at every iteration.
    pub loss_history: Vec<f64>,
}

impl TrainOutput {
    pub fn loss_csv(&self) -> String {
        let mut s = String::from("iteration,loss\n");
        for (i, l) in self.loss_history.iter().enumerate() {
            let _ = writeln!(s, "{i},{l:e}");
        }
        s
    }

    pub fn write_loss_csv(&self, path: &Path) -> Result<()> {
        io::write_text(path, &self.loss_csv())
    }
}

fn draw_batch(
    marginal: &MixtureMarginal,
    schedule: &NoiseSchedule,
    cfg: &TrainConfig,
    it: usize,
) -> Result<Batch> {
    let ds = marginal.dataset();
    let d = ds.dim();
    let n = cfg.batch_size;
    let mut r = rng::stream(cfg.seed, it as u64);
    let mut b = Batch {
        t: Vec::with_capacity(n),
        x: Vec::with_capacity(n * d),
        target: vec![0.0; n * d],
    };
    let mut z = vec![0.0; d];
    for i in 0..n {
        let t = r.gen_range(cfg.t_min..schedule.horizon);
        let s = r.gen_range(0..ds.count());
        let p = marginal.params(t)?;
        let sd = p.variance.sqrt();
        rng::fill_normal(&mut r, &mut z);
        b.t.push(t);
        for (mu, zk) in ds.sample(s).iter().zip(&z) {
            b.x.push(p.shrink * mu + sd * zk);
        }
        if cfg.target == ScoreTarget::Component {
            for (o, zk) in b.target[i * d..(i + 1) * d].iter_mut().zip(&z) {
                *o = zk / sd;
            }
        }
    }
    if cfg.target == ScoreTarget::FullMixture {
        marginal.score_batch_at(&b.t, &b.x, &mut b.target)?;
    }
    Ok(b)
}

/// Fit a score network to the forward marginals of `dataset`.
pub fn train_score(dataset: &Dataset, schedule: &NoiseSchedule, cfg: &TrainConfig) -> Result<TrainOutput> {
    cfg.validate(schedule)?;
    let net = ScoreNet::new(
        dataset.dim(),
        &cfg.hidden,
        cfg.activation,
        cfg.embedding,
        *schedule,
        cfg.sigma_reparam,
        rng::sub_seed(cfg.seed, u64::MAX),
    )?
    .with_gaussian_skip(cfg.gaussian_skip);
    train_from(net, dataset, cfg)
}

/// Continue training an existing network.
pub fn train_from(mut net: ScoreNet, dataset: &Dataset, cfg: &TrainConfig) -> Result<TrainOutput> {
    let schedule = net.schedule;
    cfg.validate(&schedule)?;
    if dataset.dim() != net.dim() {
        return Err(Error::config("dataset", "dimension differs from the network"));
    }
    let marginal = MixtureMarginal::new(schedule, dataset.clone());
    let mut adam = Adam::new(&net.params);
    let mut history = Vec::with_capacity(cfg.n_iterations);
    for it in 0..cfg.n_iterations {
        let batch = draw_batch(&marginal, &schedule, cfg, it)?;
        let (loss, grads) = net.loss_and_grad(&batch, cfg.weighting).map_err(|e| match e {
            Error::Numerical { detail, .. } => Error::Numerical { step: it, t: f64::NAN, detail },
            other => other,
        })?;
        adam.update(&mut net.params, &grads, cfg.lr_at(it));
        history.push(loss);
    }
    Ok(TrainOutput { net, loss_history: history })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_point() -> Dataset {
        Dataset::new(1, vec![0.5], "one").unwrap()
    }

    fn quick(n: usize) -> TrainConfig {
        TrainConfig {
            n_iterations: n,
            batch_size: 64,
            hidden: vec![32, 32],
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn zero_iterations_keeps_initialization() {
        let sched = NoiseSchedule::default();
        let a = train_score(&single_point(), &sched, &quick(0)).unwrap();
        let b = train_score(&single_point(), &sched, &quick(0)).unwrap();
        assert!(a.loss_history.is_empty());
        assert_eq!(a.net, b.net);
        let fresh = ScoreNet::new(
            1,
            &[32, 32],
            Activation::Silu,
            TimeEmbedding::default(),
            sched,
            true,
            rng::sub_seed(3, u64::MAX),
        )
        .unwrap();
        assert_eq!(a.net, fresh);
    }

    #[test]
    fn deterministic_history() {
        let sched = NoiseSchedule::default();
        let a = train_score(&single_point(), &sched, &quick(50)).unwrap();
        let b = train_score(&single_point(), &sched, &quick(50)).unwrap();
        assert_eq!(a.loss_history, b.loss_history);
        assert!(a.loss_csv().starts_with("iteration,loss\n0,"));
    }

    #[test]
    fn adam_minimizes_quadratic() {
        let mut p = MlpParams::init(&[1, 1], Activation::Tanh, 0).unwrap();
        let mut opt = Adam::new(&p);
        for _ in 0..5000 {
            let mut g = p.zeros_like();
            g.weights[0][[0, 0]] = 2.0 * (p.weights[0][[0, 0]] - 3.0);
            g.biases[0][0] = 2.0 * (p.biases[0][0] + 1.0);
            opt.update(&mut p, &g, 1e-2);
        }
        assert!((p.weights[0][[0, 0]] - 3.0).abs() < 1e-3);
        assert!((p.biases[0][0] + 1.0).abs() < 1e-3);
    }

    #[test]
    fn single_gaussian_score_is_learned() {
        // psi(t, x) = (x - a mu) / sigma^2 for a one-point dataset.
        let sched = NoiseSchedule::default();
        let ds = single_point();
        let cfg = TrainConfig {
            n_iterations: 5000,
            batch_size: 64,
            hidden: vec![64, 64],
            seed: 1,
            weighting: LossWeighting::SigmaSquared,
            ..Default::default()
        };
        let out = train_score(&ds, &sched, &cfg).unwrap();
        let m = MixtureMarginal::new(sched, ds.clone());
        let mut r = rng::stream(77, 0);
        let (mut num, mut den) = (0.0, 0.0);
        for _ in 0..2000 {
            let t = r.gen_range(0.05..1.0);
            let p = m.params(t).unwrap();
            let x = p.shrink * 0.5 + p.variance.sqrt() * rng::normal(&mut r);
            let exact = m.exact_score(t, &[x]).unwrap()[0];
            let got = out.net.forward_score(t, &[x]).unwrap()[0];
            num += (got - exact).powi(2);
            den += exact * exact;
        }
        let rel = (num / den).sqrt();
        assert!(rel < 0.1, "relative L2 error {rel}");

        let smooth = |k: usize| out.loss_history[k.saturating_sub(50)..=k].iter().sum::<f64>() / 51.0;
        assert!(smooth(4999) < smooth(100));
        // sigma-scaled output stays bounded near t_min
        for x in [-0.05, 0.5, 1.0] {
            assert!(out.net.raw_output(1e-3, &[x]).unwrap()[0].abs() < 10.0);
        }
    }
}
