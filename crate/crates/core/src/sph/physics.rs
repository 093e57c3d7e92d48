//! Density summation, equation of state, artificial viscosity and the
//! momentum right-hand side.
//!
//! Every loop is a per-particle gather over a sorted neighbour list. The
//! pair term for (j, i) is the exact negation of the one for (i, j) — every
//! ingredient is either symmetric under IEEE arithmetic or flips sign
//! exactly — so the result does not depend on the thread count and the
//! cell-list and all-pairs searches agree bit for bit.

use nalgebra::Matrix3;
use rayon::prelude::*;

use super::{CellGrid, ForcingField, Kernel, Neighbours, ParticleSet, SphParams, Vec3};
use crate::error::{Error, Result};

pub fn neighbours(particles: &ParticleSet, params: &SphParams, grid: &CellGrid) -> Neighbours {
    Neighbours::from_grid(&particles.positions, grid, 2.0 * params.h)
}

pub fn build_grid(particles: &ParticleSet, params: &SphParams) -> CellGrid {
    CellGrid::build(&particles.positions, params.box_l, 2.0 * params.h, params.dims)
}

fn kernel(params: &SphParams) -> Kernel {
    Kernel::new(params.h, params.dims).expect("validated parameters")
}

pub fn density_with(params: &SphParams, nb: &Neighbours) -> Vec<f64> {
    let k = kernel(params);
    let m = params.mass;
    let self_term = m * k.w(0.0);
    (0..nb.offsets.len() - 1)
        .into_par_iter()
        .map(|i| {
            let mut rho = self_term;
            for e in nb.of(i) {
                rho += m * k.w(nb.dist[e]);
            }
            rho
        })
        .collect()
}

/// `rho_i = sum_j m W(|r_i - r_j|, h)`, self-term included.
pub fn density_summation(particles: &ParticleSet, params: &SphParams, grid: &CellGrid) -> Vec<f64> {
    density_with(params, &neighbours(particles, params, grid))
}

/// `P = (c^2 rho0 / gamma) [(rho / rho0)^gamma - 1]`.
pub fn eos_pressure(rho: f64, params: &SphParams) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::Argument(format!("density must be > 0, got {rho}")));
    }
    Ok(pressure_unchecked(rho, params))
}

#[inline]
fn pressure_unchecked(rho: f64, p: &SphParams) -> f64 {
    p.sound_c * p.sound_c * p.rho0 / p.gamma * ((rho / p.rho0).powf(p.gamma) - 1.0)
}

/// Specific internal energy `e(rho)` with `de/drho = P / rho^2`, zero at `rho0`.
pub fn internal_energy(rho: f64, p: &SphParams) -> f64 {
    let c2 = p.sound_c * p.sound_c;
    let x = rho / p.rho0;
    if p.gamma == 1.0 {
        c2 * (x.ln() + 1.0 / x - 1.0)
    } else {
        let g = p.gamma;
        c2 / g * ((x.powf(g - 1.0) - 1.0) / (g - 1.0) + 1.0 / x - 1.0)
    }
}

/// Monaghan viscosity for the pair with separation `xij = r_i - r_j` and
/// relative velocity `vij = v_i - v_j`. Nonzero only for approaching pairs.
#[inline]
pub fn artificial_viscosity(xij: Vec3, vij: Vec3, rho_i: f64, rho_j: f64, p: &SphParams) -> f64 {
    let vx = vij[0] * xij[0] + vij[1] * xij[1] + vij[2] * xij[2];
    if vx >= 0.0 {
        return 0.0;
    }
    let r2 = xij[0] * xij[0] + xij[1] * xij[1] + xij[2] * xij[2];
    let mu = p.h * vx / (r2 + 0.01 * p.h * p.h);
    let rho_bar = 0.5 * (rho_i + rho_j);
    (-p.alpha_visc * p.sound_c * mu + p.beta_visc * mu * mu) / rho_bar
}

/// Pressure plus viscous accelerations (no body force).
pub fn pair_acceleration_with(particles: &ParticleSet, params: &SphParams, nb: &Neighbours) -> Vec<Vec3> {
    let k = kernel(params);
    let m = params.mass;
    let rho = &particles.densities;
    let v = &particles.velocities;
    let p_over_rho2: Vec<f64> = rho.iter().map(|r| pressure_unchecked(*r, params) / (r * r)).collect();
    (0..particles.len())
        .into_par_iter()
        .map(|i| {
            let mut a = [0.0; 3];
            for e in nb.of(i) {
                let j = nb.index[e];
                let xij = nb.rij[e];
                let vij = [v[i][0] - v[j][0], v[i][1] - v[j][1], v[i][2] - v[j][2]];
                let coef = p_over_rho2[i] + p_over_rho2[j] + artificial_viscosity(xij, vij, rho[i], rho[j], params);
                let g = k.grad_with(xij, nb.dist[e]);
                for d in 0..3 {
                    a[d] -= m * coef * g[d];
                }
            }
            a
        })
        .collect()
}

/// `a_i = -sum_j m (P_i/rho_i^2 + P_j/rho_j^2 + Pi_ij) grad_i W_ij + f(r_i, t)`.
pub fn acceleration(
    particles: &ParticleSet,
    params: &SphParams,
    forcing: &ForcingField,
    grid: &CellGrid,
) -> Vec<Vec3> {
    let nb = neighbours(particles, params, grid);
    let mut a = pair_acceleration_with(particles, params, &nb);
    forcing.add_to(&particles.positions, &mut a);
    a
}

/// All-pairs reference for [`acceleration`].
pub fn acceleration_brute_force(particles: &ParticleSet, params: &SphParams, forcing: &ForcingField) -> Vec<Vec3> {
    let nb = Neighbours::brute_force(&particles.positions, params.box_l, 2.0 * params.h, params.dims);
    let mut a = pair_acceleration_with(particles, params, &nb);
    forcing.add_to(&particles.positions, &mut a);
    a
}

pub fn estimate_vgt_with(particles: &ParticleSet, params: &SphParams, nb: &Neighbours) -> Vec<Matrix3<f64>> {
    let k = kernel(params);
    let m = params.mass;
    let v = &particles.velocities;
    let rho = &particles.densities;
    (0..particles.len())
        .into_par_iter()
        .map(|i| {
            let mut g = Matrix3::zeros();
            for e in nb.of(i) {
                let j = nb.index[e];
                let w = k.grad_with(nb.rij[e], nb.dist[e]);
                let vol = m / rho[j];
                for a in 0..3 {
                    let dv = vol * (v[j][a] - v[i][a]);
                    for b in 0..3 {
                        g[(a, b)] += dv * w[b];
                    }
                }
            }
            g
        })
        .collect()
}

/// Velocity-gradient estimate `m_ab = sum_j (m/rho_j)(v_j - v_i)_a (grad_i W_ij)_b`.
/// In 2D only the upper-left block is populated.
pub fn estimate_vgt(particles: &ParticleSet, params: &SphParams, grid: &CellGrid) -> Vec<Matrix3<f64>> {
    estimate_vgt_with(particles, params, &neighbours(particles, params, grid))
}
