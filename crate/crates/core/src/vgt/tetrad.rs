//! Tetrad model: the coarse-grained gradient `M` co-evolving with the
//! inertia tensor `g` of the fluid blob,
//!
//! ```text
//! dM + (1 - alpha) (M^2 - g^-1 tr(M^2) / tr(g^-1)) dt = dW_M
//! dg - (M^T g + g M) dt = dW_g
//! ```
//!
//! integrated by Euler-Maruyama with isotropic noise (traceless for `M`,
//! symmetric for `g`) and an eigenvalue floor keeping `g` positive definite.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::SymmetricEigen;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tensor::{q_r, random_matrix, traceless, Mat3};
use crate::error::{Error, Result};
use crate::{io, rng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TetradState {
    pub m: Mat3,
    pub g: Mat3,
}

impl TetradState {
    pub fn isotropic(m: Mat3, g_scale: f64) -> Self {
        Self {
            m,
            g: Mat3::identity() * g_scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TetradParams {
    pub alpha: f64,
    pub noise_m: f64,
    pub noise_g: f64,
    pub dt: f64,
    pub eig_floor: f64,
    /// Keep `g` fixed (used to reduce the model to restricted Euler).
    #[serde(default)]
    pub freeze_g: bool,
    /// Warn when the floor is hit on more than this fraction of steps.
    #[serde(default = "default_floor_fraction")]
    pub max_floor_fraction: f64,
}

fn default_floor_fraction() -> f64 {
    0.01
}

impl TetradParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config("alpha", "must lie in [0, 1]"));
        }
        if !(self.noise_m >= 0.0 && self.noise_g >= 0.0) {
            return Err(Error::config("noise_m", "noise amplitudes must be >= 0"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::config("dt", "must be > 0"));
        }
        if !(self.eig_floor > 0.0) {
            return Err(Error::config("eig_floor", "must be > 0"));
        }
        Ok(())
    }

    /// Floor at `1e-6 tr(g0) / 3`.
    pub fn default_floor(g0: &Mat3) -> f64 {
        1e-6 * g0.trace() / 3.0
    }
}

/// Drift of `M`: `-(1 - alpha)(M^2 - g^-1 tr(M^2) / tr(g^-1))`.
pub fn tetrad_drift_m(m: &Mat3, g_inv: &Mat3, alpha: f64) -> Mat3 {
    let m2 = m * m;
    -(m2 - g_inv * (m2.trace() / g_inv.trace())) * (1.0 - alpha)
}

fn floor_eigen(g: &Mat3, floor: f64) -> (Mat3, bool) {
    let sym = (g + g.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    if eig.eigenvalues.iter().all(|l| *l >= floor) {
        return (sym, false);
    }
    // Reassembling V diag V^T perturbs eigenvalues by a few ulps of the
    // largest one; lift the floor by that much so the bound holds afterwards.
    let big = eig.eigenvalues.amax();
    let target = floor + 16.0 * f64::EPSILON * big;
    let clamped = eig.eigenvalues.map(|l| l.max(target));
    let v = eig.eigenvectors;
    let out = v * Mat3::from_diagonal(&clamped) * v.transpose();
    ((out + out.transpose()) * 0.5, true)
}

/// One Euler-Maruyama step with given standard-normal draws `zm`, `zg`.
/// Returns the new state and whether the eigenvalue floor was applied.
pub fn tetrad_step(state: &TetradState, p: &TetradParams, zm: &Mat3, zg: &Mat3) -> Result<(TetradState, bool)> {
    let g_inv = state
        .g
        .try_inverse()
        .ok_or_else(|| Error::Numerical {
            step: 0,
            t: f64::NAN,
            detail: "inertia tensor g is singular".into(),
        })?;
    let sq = p.dt.sqrt();
    let mut m = state.m + tetrad_drift_m(&state.m, &g_inv, p.alpha) * p.dt;
    if p.noise_m > 0.0 {
        m += traceless(zm) * (p.noise_m * sq);
    }
    if p.freeze_g {
        return Ok((TetradState { m, g: state.g }, false));
    }
    let (mm, g0) = (&state.m, &state.g);
    let mut g = g0 + (mm.transpose() * g0 + g0 * mm) * p.dt;
    if p.noise_g > 0.0 {
        g += (zg + zg.transpose()) * (0.5 * p.noise_g * sq);
    }
    let (g, floored) = floor_eigen(&g, p.eig_floor);
    Ok((TetradState { m, g }, floored))
}

pub fn draw_noise<R: Rng + ?Sized>(r: &mut R) -> (Mat3, Mat3) {
    (random_matrix(r, 1.0), random_matrix(r, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TetradEnsembleConfig {
    pub params: TetradParams,
    pub n_samples: usize,
    pub n_steps: usize,
    /// Initial `M` entries are `initial_m_scale * N(0,1)`, made traceless.
    #[serde(default)]
    pub initial_m_scale: f64,
    /// Initial `g = initial_g * I`.
    #[serde(default = "one")]
    pub initial_g: f64,
    #[serde(default = "default_bins")]
    pub n_bins: usize,
    /// Histogram half-widths in Q and R; `None` fits the data.
    #[serde(default)]
    pub q_range: Option<f64>,
    #[serde(default)]
    pub r_range: Option<f64>,
}

fn one() -> f64 {
    1.0
}
fn default_bins() -> usize {
    50
}

impl TetradEnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.n_samples == 0 {
            return Err(Error::config("n_samples", "must be >= 1"));
        }
        if self.n_bins == 0 {
            return Err(Error::config("n_bins", "must be >= 1"));
        }
        if !(self.initial_g > 0.0) {
            return Err(Error::config("initial_g", "must be > 0"));
        }
        if !(self.initial_m_scale >= 0.0) {
            return Err(Error::config("initial_m_scale", "must be >= 0"));
        }
        for (name, r) in [("q_range", self.q_range), ("r_range", self.r_range)] {
            if r.is_some_and(|v| !(v > 0.0)) {
                return Err(Error::config(name, "must be > 0"));
            }
        }
        Ok(())
    }
}

/// Joint density of `(Q, R)` on a uniform grid over
/// `[-q_half, q_half] x [-r_half, r_half]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QrHistogram {
    pub q_half: f64,
    pub r_half: f64,
    pub n_bins: usize,
    /// Row-major `[q_bin][r_bin]`, normalized so `sum density * dq * dr = 1`
    /// over in-range samples.
    pub density: Vec<f64>,
    pub n_outside: usize,
}

impl QrHistogram {
    pub fn build(qr: &[(f64, f64)], n_bins: usize, q_half: Option<f64>, r_half: Option<f64>) -> Self {
        let fit = |f: &dyn Fn(&(f64, f64)) -> f64| {
            let m = qr.iter().map(|p| f(p).abs()).fold(0.0, f64::max);
            if m > 0.0 {
                m * (1.0 + 1e-9)
            } else {
                1.0
            }
        };
        let q_half = q_half.unwrap_or_else(|| fit(&|p| p.0));
        let r_half = r_half.unwrap_or_else(|| fit(&|p| p.1));
        let mut counts = vec![0usize; n_bins * n_bins];
        let mut outside = 0;
        let bin = |v: f64, half: f64| {
            let u = (v + half) / (2.0 * half) * n_bins as f64;
            if (0.0..n_bins as f64).contains(&u) {
                Some(u as usize)
            } else {
                None
            }
        };
        for &(q, r) in qr {
            match (bin(q, q_half), bin(r, r_half)) {
                (Some(i), Some(j)) => counts[i * n_bins + j] += 1,
                _ => outside += 1,
            }
        }
        let inside = qr.len() - outside;
        let area = (2.0 * q_half / n_bins as f64) * (2.0 * r_half / n_bins as f64);
        let density = counts
            .iter()
            .map(|c| if inside > 0 { *c as f64 / (inside as f64 * area) } else { 0.0 })
            .collect();
        Self {
            q_half,
            r_half,
            n_bins,
            density,
            n_outside: outside,
        }
    }

    pub fn bin_centers(&self) -> (Vec<f64>, Vec<f64>) {
        let c = |half: f64| {
            (0..self.n_bins)
                .map(|i| -half + (i as f64 + 0.5) * 2.0 * half / self.n_bins as f64)
                .collect()
        };
        (c(self.q_half), c(self.r_half))
    }

    pub fn integral(&self) -> f64 {
        let area = (2.0 * self.q_half / self.n_bins as f64) * (2.0 * self.r_half / self.n_bins as f64);
        self.density.iter().sum::<f64>() * area
    }

    pub fn csv(&self) -> String {
        let (qc, rc) = self.bin_centers();
        let mut s = String::from("q_bin,r_bin,density\n");
        for (i, q) in qc.iter().enumerate() {
            for (j, r) in rc.iter().enumerate() {
                let _ = writeln!(s, "{q:e},{r:e},{:e}", self.density[i * self.n_bins + j]);
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TetradEnsembleStats {
    pub n_samples: usize,
    pub n_steps: usize,
    /// Mean of `M` (row-major).
    pub m_mean: [f64; 9],
    /// Mean of `M_ij^2` (row-major).
    pub m_second_moment: [f64; 9],
    pub mean_q: f64,
    pub mean_r: f64,
    /// Mean of the sorted eigenvalues of `g`, smallest first.
    pub g_eigen_mean: [f64; 3],
    pub g_eigen_min: f64,
    pub g_eigen_max: f64,
    pub floor_events: usize,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub histogram: Option<QrHistogram>,
}

impl TetradEnsembleStats {
    pub fn write(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        let json = dir.join("tetrad_stats.json");
        io::write_json(&json, self)?;
        let mut out = vec![json];
        if let Some(h) = &self.histogram {
            let csv = dir.join("tetrad_qr_histogram.csv");
            io::write_text(&csv, &h.csv())?;
            out.push(csv);
        }
        Ok(out)
    }
}

struct MemberResult {
    state: TetradState,
    floors: usize,
}

fn run_member(cfg: &TetradEnsembleConfig, seed: u64, k: usize) -> Result<MemberResult> {
    let mut r = rng::stream(seed, k as u64);
    let m0 = if cfg.initial_m_scale > 0.0 {
        traceless(&random_matrix(&mut r, cfg.initial_m_scale))
    } else {
        Mat3::zeros()
    };
    let mut s = TetradState::isotropic(m0, cfg.initial_g);
    let mut floors = 0;
    for step in 0..cfg.n_steps {
        let (zm, zg) = draw_noise(&mut r);
        let (next, floored) = tetrad_step(&s, &cfg.params, &zm, &zg).map_err(|e| match e {
            Error::Numerical { detail, .. } => Error::Numerical {
                step,
                t: step as f64 * cfg.params.dt,
                detail: format!("member {k}: {detail}"),
            },
            other => other,
        })?;
        floors += floored as usize;
        s = next;
        if !s.m.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical {
                step,
                t: step as f64 * cfg.params.dt,
                detail: format!("member {k}: M is not finite"),
            });
        }
    }
    Ok(MemberResult { state: s, floors })
}

/// Integrate `n_samples` independent trajectories (member `k` uses stream
/// `k` of `seed`) and summarize the final states.
pub fn tetrad_ensemble(cfg: &TetradEnsembleConfig, seed: u64) -> Result<TetradEnsembleStats> {
    cfg.validate()?;
    let members: Vec<MemberResult> = (0..cfg.n_samples)
        .into_par_iter()
        .map(|k| run_member(cfg, seed, k))
        .collect::<Result<_>>()?;
    let n = members.len() as f64;
    let mut st = TetradEnsembleStats {
        n_samples: cfg.n_samples,
        n_steps: cfg.n_steps,
        m_mean: [0.0; 9],
        m_second_moment: [0.0; 9],
        mean_q: 0.0,
        mean_r: 0.0,
        g_eigen_mean: [0.0; 3],
        g_eigen_min: f64::INFINITY,
        g_eigen_max: f64::NEG_INFINITY,
        floor_events: 0,
        warnings: Vec::new(),
        histogram: None,
    };
    let mut qr = Vec::with_capacity(members.len());
    for (k, mr) in members.iter().enumerate() {
        let m = mr.state.m;
        for i in 0..3 {
            for j in 0..3 {
                st.m_mean[3 * i + j] += m[(i, j)] / n;
                st.m_second_moment[3 * i + j] += m[(i, j)] * m[(i, j)] / n;
            }
        }
        let (q, r) = q_r(&m);
        st.mean_q += q / n;
        st.mean_r += r / n;
        qr.push((q, r));
        let mut ev: Vec<f64> = SymmetricEigen::new(mr.state.g).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        for (d, e) in ev.iter().enumerate() {
            st.g_eigen_mean[d] += e / n;
        }
        st.g_eigen_min = st.g_eigen_min.min(ev[0]);
        st.g_eigen_max = st.g_eigen_max.max(ev[2]);
        st.floor_events += mr.floors;
        if cfg.n_steps > 0 && mr.floors as f64 > cfg.params.max_floor_fraction * cfg.n_steps as f64 {
            st.warnings.push(format!(
                "member {k}: eigenvalue floor applied on {} of {} steps",
                mr.floors, cfg.n_steps
            ));
        }
    }
    st.histogram = Some(QrHistogram::build(&qr, cfg.n_bins, cfg.q_range, cfg.r_range));
    Ok(st)
}


#[cfg(test)]
mod props {
    use super::*;
    use crate::rng;
    use crate::vgt::tensor::max_abs;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn floor_leaves_a_symmetric_matrix_above_the_floor(seed in any::<u64>(), scale in 1e-3f64..10.0, floor in 1e-8f64..1e-1) {
            let mut r = rng::stream(seed, 0);
            let g = random_matrix(&mut r, scale);
            let (out, floored) = floor_eigen(&g, floor);
            prop_assert_eq!(out, out.transpose());
            let min = SymmetricEigen::new(out).eigenvalues.min();
            prop_assert!(min >= floor, "min eigenvalue {} below floor {}", min, floor);
            if !floored {
                prop_assert_eq!(out, (g + g.transpose()) * 0.5);
            }
        }

        #[test]
        fn drift_keeps_m_traceless(seed in any::<u64>(), alpha in 0.0f64..1.0) {
            let mut r = rng::stream(seed, 1);
            let m = traceless(&random_matrix(&mut r, 1.0));
            let a = random_matrix(&mut r, 1.0);
            let g_inv = a * a.transpose() + Mat3::identity() * 0.1;
            let d = tetrad_drift_m(&m, &g_inv, alpha);
            prop_assert!(d.trace().abs() <= 1e-12 * max_abs(&d).max(1.0));
        }
    }
}
