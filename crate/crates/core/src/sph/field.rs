//! Eulerian views of the particle field: kernel interpolation onto a
//! periodic grid and shell-summed energy spectra.

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::grid::min_image;
use super::{CellGrid, Kernel, ParticleSet, SphParams};
use crate::error::{Error, Result};

/// A vector field on an `n^dims` periodic grid. Point `(ix, iy, iz)` has
/// flat index `(iz * n + iy) * n + ix` and components stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub n: usize,
    pub dims: usize,
    pub comps: usize,
    pub box_l: f64,
    pub data: Vec<f64>,
    /// Grid points with no particle inside the kernel support (set to 0).
    pub empty_points: Vec<usize>,
}

impl GridField {
    pub fn new(n: usize, dims: usize, comps: usize, box_l: f64, data: Vec<f64>) -> Result<Self> {
        if data.len() != n.pow(dims as u32) * comps {
            return Err(Error::Argument(format!(
                "grid data has {} values, expected {}",
                data.len(),
                n.pow(dims as u32) * comps
            )));
        }
        Ok(Self {
            n,
            dims,
            comps,
            box_l,
            data,
            empty_points: Vec::new(),
        })
    }

    pub fn n_points(&self) -> usize {
        self.n.pow(self.dims as u32)
    }

    pub fn point(&self, idx: usize) -> &[f64] {
        &self.data[idx * self.comps..(idx + 1) * self.comps]
    }

    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let dx = self.box_l / self.n as f64;
        let mut x = [0.0; 3];
        let mut rem = idx;
        for v in x.iter_mut().take(self.dims) {
            *v = (rem % self.n) as f64 * dx;
            rem /= self.n;
        }
        x
    }

    /// The `size^dims` sub-block whose lowest corner is `origin`, wrapping
    /// periodically.
    pub fn patch(&self, origin: [usize; 3], size: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(size.pow(self.dims as u32) * self.comps);
        let zs = if self.dims == 3 { size } else { 1 };
        for z in 0..zs {
            for y in 0..size {
                for x in 0..size {
                    let gx = (origin[0] + x) % self.n;
                    let gy = (origin[1] + y) % self.n;
                    let gz = if self.dims == 3 { (origin[2] + z) % self.n } else { 0 };
                    out.extend_from_slice(self.point((gz * self.n + gy) * self.n + gx));
                }
            }
        }
        out
    }
}

/// Shepard-normalized kernel interpolation of the velocity onto an
/// `grid_n^dims` grid with nodes at `i L / grid_n`.
pub fn grid_interpolate(particles: &ParticleSet, params: &SphParams, grid_n: usize) -> Result<GridField> {
    if grid_n < 4 {
        return Err(Error::Argument(format!("grid_n must be >= 4, got {grid_n}")));
    }
    if particles.densities.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::Argument("densities must be computed before interpolation".into()));
    }
    let dims = params.dims;
    let k = Kernel::new(params.h, dims)?;
    let support = k.support();
    let cells = CellGrid::build(&particles.positions, params.box_l, support, dims);
    let mut field = GridField::new(grid_n, dims, dims, params.box_l, vec![0.0; grid_n.pow(dims as u32) * dims])?;
    let n_pts = field.n_points();
    let coords: Vec<[f64; 3]> = (0..n_pts).map(|i| field.coords(i)).collect();
    let empty: Vec<bool> = field
        .data
        .par_chunks_mut(dims)
        .zip(coords.par_iter())
        .map(|(out, x)| {
            let mut norm = 0.0;
            let mut acc = [0.0; 3];
            for j in cells.candidates(x) {
                let d = min_image(*x, particles.positions[j], params.box_l, dims);
                let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                if r >= support {
                    continue;
                }
                let w = params.mass / particles.densities[j] * k.w(r);
                norm += w;
                for c in 0..dims {
                    acc[c] += w * particles.velocities[j][c];
                }
            }
            if norm > 0.0 {
                for c in 0..dims {
                    out[c] = acc[c] / norm;
                }
                false
            } else {
                true
            }
        })
        .collect();
    field.empty_points = empty.iter().enumerate().filter(|(_, e)| **e).map(|(i, _)| i).collect();
    Ok(field)
}

fn fft_nd(buf: &mut [Complex<f64>], n: usize, dims: usize) {
    let fft = FftPlanner::new().plan_fft_forward(n);
    let mut line = vec![Complex::new(0.0, 0.0); n];
    let total = buf.len();
    for axis in 0..dims {
        let stride = n.pow(axis as u32);
        for base in 0..total {
            // visit each line once, from its first element
            if (base / stride) % n != 0 {
                continue;
            }
            for (i, l) in line.iter_mut().enumerate() {
                *l = buf[base + i * stride];
            }
            fft.process(&mut line);
            for (i, l) in line.iter().enumerate() {
                buf[base + i * stride] = *l;
            }
        }
    }
}

/// Shell-summed kinetic energy `E(k) = sum_{round|k| = k} |u_hat|^2 / 2`
/// with `u_hat = (1/N) sum_x u(x) e^{-i k.x}` and integer wavenumbers in
/// units of `2 pi / L`. With this normalization the shells sum to
/// `mean(|u|^2) / 2`, and `A sin(2 pi k0 x / L)` puts `A^2 / 4` in shell `k0`.
pub fn energy_spectrum(field: &GridField) -> Vec<f64> {
    let (n, dims) = (field.n, field.dims);
    let n_pts = field.n_points();
    let half = n as i64 / 2;
    let signed = |i: usize| {
        let i = i as i64;
        if i > half {
            i - n as i64
        } else {
            i
        }
    };
    let max_shell = ((dims as f64).sqrt() * half as f64).round() as usize;
    let mut shells = vec![0.0; max_shell + 1];
    let scale = 1.0 / n_pts as f64;
    let mut buf = vec![Complex::new(0.0, 0.0); n_pts];
    for c in 0..field.comps {
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex::new(field.data[i * field.comps + c], 0.0);
        }
        fft_nd(&mut buf, n, dims);
        for (i, b) in buf.iter().enumerate() {
            let mut k2 = 0.0;
            let mut rem = i;
            for _ in 0..dims {
                let k = signed(rem % n) as f64;
                k2 += k * k;
                rem /= n;
            }
            let shell = k2.sqrt().round() as usize;
            shells[shell] += 0.5 * (b * scale).norm_sqr();
        }
    }
    shells
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sph::physics::{build_grid, density_summation};
    use std::f64::consts::PI;

    fn mode_field(n: usize, dims: usize, k0: usize, amp: f64) -> GridField {
        let mut data = Vec::new();
        let tmp = GridField::new(n, dims, dims, 1.0, vec![0.0; n.pow(dims as u32) * dims]).unwrap();
        for i in 0..tmp.n_points() {
            let x = tmp.coords(i);
            data.push(0.0);
            data.push(amp * (2.0 * PI * k0 as f64 * x[0]).sin());
            if dims == 3 {
                data.push(0.0);
            }
        }
        GridField::new(n, dims, dims, 1.0, data).unwrap()
    }

    #[test]
    fn single_mode_spectrum() {
        for dims in [2, 3] {
            let f = mode_field(16, dims, 3, 1.5);
            let e = energy_spectrum(&f);
            for (k, v) in e.iter().enumerate() {
                let expect = if k == 3 { 1.5 * 1.5 / 4.0 } else { 0.0 };
                assert!((v - expect).abs() < 1e-12, "dims {dims} shell {k}: {v}");
            }
        }
    }

    #[test]
    fn parseval() {
        let n = 12;
        let mut r = crate::rng::stream(3, 0);
        let data: Vec<f64> = (0..n * n * 2).map(|_| crate::rng::normal(&mut r)).collect();
        let f = GridField::new(n, 2, 2, 1.0, data.clone()).unwrap();
        let total: f64 = energy_spectrum(&f).iter().sum();
        let mean = data.iter().map(|v| v * v).sum::<f64>() / (n * n) as f64;
        assert!((total - 0.5 * mean).abs() < 1e-10);
        let zero = GridField::new(n, 2, 2, 1.0, vec![0.0; n * n * 2]).unwrap();
        assert!(energy_spectrum(&zero).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn uniform_translation_is_reproduced() {
        let p = SphParams::lattice(2, 10, 1.0, 1.3, 10.0);
        let mut set = ParticleSet::lattice(2, 10, 1.0).unwrap();
        for v in &mut set.velocities {
            *v = [0.25, -0.5, 0.0];
        }
        set.densities = density_summation(&set, &p, &build_grid(&set, &p));
        let g = grid_interpolate(&set, &p, 8).unwrap();
        assert!(g.empty_points.is_empty());
        for i in 0..g.n_points() {
            assert!((g.point(i)[0] - 0.25).abs() < 1e-14);
            assert!((g.point(i)[1] + 0.5).abs() < 1e-14);
        }
        assert!(grid_interpolate(&set, &p, 3).is_err());
    }

    #[test]
    fn single_particle_at_node() {
        let mut p = SphParams::lattice(2, 1, 1.0, 0.05, 1.0);
        p.n_particles = 1;
        let mut set = ParticleSet::new(2, 1.0, vec![[0.25, 0.5, 0.0]], vec![[1.5, -2.0, 0.0]]).unwrap();
        set.densities = density_summation(&set, &p, &build_grid(&set, &p));
        let g = grid_interpolate(&set, &p, 8).unwrap();
        let idx = 4 * 8 + 2;
        assert_eq!(g.point(idx), &[1.5, -2.0]);
        assert!(!g.empty_points.is_empty());
        assert_eq!(g.point(0), &[0.0, 0.0]);
    }

    #[test]
    fn patch_wraps() {
        let data: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let f = GridField::new(4, 2, 1, 1.0, data).unwrap();
        assert_eq!(f.patch([3, 3, 0], 2), vec![15.0, 12.0, 3.0, 0.0]);
    }
}
