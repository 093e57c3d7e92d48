use std::f64::consts::PI;

use super::{ForcingKind, ForcingSpec, Vec3};
use crate::error::Result;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
struct Mode {
    k: [f64; 3],
    re: Vec3,
    im: Vec3,
}

/// Body-force field with whatever time-dependent state its kind needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingField {
    pub spec: ForcingSpec,
    dims: usize,
    k0: f64,
    seed: u64,
    modes: Vec<Mode>,
    norm: f64,
}

fn project(v: Vec3, k: &[f64; 3]) -> Vec3 {
    let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
    let dot = v[0] * k[0] + v[1] * k[1] + v[2] * k[2];
    [v[0] - dot * k[0] / k2, v[1] - dot * k[1] / k2, v[2] - dot * k[2] / k2]
}

impl ForcingField {
    pub fn none() -> Self {
        Self {
            spec: ForcingSpec::none(),
            dims: 3,
            k0: 0.0,
            seed: 0,
            modes: Vec::new(),
            norm: 0.0,
        }
    }

    pub fn new(spec: &ForcingSpec, dims: usize, box_l: f64, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut f = Self {
            spec: *spec,
            dims,
            k0: 2.0 * PI / box_l,
            seed,
            modes: Vec::new(),
            norm: 0.0,
        };
        if spec.kind == ForcingKind::Stochastic {
            // Wavevectors 0 < |n| <= k_max in one half-space (n and -n give
            // the same real mode).
            let km = spec.k_max_forced as i64;
            let span = |d: usize| if d < dims { -km..=km } else { 0..=0 };
            let mut r = rng::stream(seed, u64::MAX);
            for nz in span(2) {
                for ny in span(1) {
                    for nx in span(0) {
                        let n2 = nx * nx + ny * ny + nz * nz;
                        let first = if nz != 0 { nz } else if ny != 0 { ny } else { nx };
                        if n2 == 0 || n2 > km * km || first < 0 {
                            continue;
                        }
                        let k = [nx as f64, ny as f64, nz as f64];
                        let mut mode = Mode { k, re: [0.0; 3], im: [0.0; 3] };
                        for d in 0..dims {
                            mode.re[d] = rng::normal(&mut r);
                            mode.im[d] = rng::normal(&mut r);
                        }
                        mode.re = project(mode.re, &k);
                        mode.im = project(mode.im, &k);
                        f.modes.push(mode);
                    }
                }
            }
            f.norm = spec.amplitude / (f.modes.len() as f64).sqrt();
        }
        Ok(f)
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn eval(&self, x: &Vec3) -> Vec3 {
        let a = self.spec.amplitude;
        match self.spec.kind {
            ForcingKind::None => [0.0; 3],
            ForcingKind::Uniform => [a, 0.0, 0.0],
            ForcingKind::TaylorGreen => {
                let (sx, cx) = (self.k0 * x[0]).sin_cos();
                let (sy, cy) = (self.k0 * x[1]).sin_cos();
                let cz = if self.dims == 3 { (self.k0 * x[2]).cos() } else { 1.0 };
                [a * sx * cy * cz, -a * cx * sy * cz, 0.0]
            }
            ForcingKind::Stochastic => {
                let mut f = [0.0; 3];
                for m in &self.modes {
                    let phase = self.k0 * (m.k[0] * x[0] + m.k[1] * x[1] + m.k[2] * x[2]);
                    let (s, c) = phase.sin_cos();
                    for d in 0..3 {
                        f[d] += m.re[d] * c - m.im[d] * s;
                    }
                }
                f.map(|v| v * self.norm)
            }
        }
    }

    pub fn add_to(&self, positions: &[Vec3], acc: &mut [Vec3]) {
        if self.spec.kind == ForcingKind::None {
            return;
        }
        for (a, x) in acc.iter_mut().zip(positions) {
            let f = self.eval(x);
            for d in 0..3 {
                a[d] += f[d];
            }
        }
    }

    /// Advance the OU mode coefficients by `dt`; `step` selects the noise stream.
    pub fn advance(&mut self, dt: f64, step: u64) {
        if self.modes.is_empty() {
            return;
        }
        let rho = (-dt / self.spec.ou_correlation_time).exp();
        let s = (1.0 - rho * rho).sqrt();
        let mut r = rng::stream(self.seed, step);
        for m in &mut self.modes {
            let mut re = [0.0; 3];
            let mut im = [0.0; 3];
            for d in 0..self.dims {
                re[d] = rho * m.re[d] + s * rng::normal(&mut r);
                im[d] = rho * m.im[d] + s * rng::normal(&mut r);
            }
            m.re = project(re, &m.k);
            m.im = project(im, &m.k);
        }
    }
}
