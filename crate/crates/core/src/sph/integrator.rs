use super::physics::{density_with, internal_energy, pair_acceleration_with};
use super::{CellGrid, CflPolicy, ForcingField, Neighbours, ParticleSet, SphParams, Vec3};
use crate::error::{Error, Result};

/// A running SPH simulation: particle state, forcing state and the cached
/// neighbour lists and accelerations of the current positions.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub params: SphParams,
    pub particles: ParticleSet,
    pub forcing: ForcingField,
    pub t: f64,
    pub step: u64,
    acc: Vec<Vec3>,
    nb: Neighbours,
    pub cfl_warnings: usize,
}

impl Simulation {
    pub fn new(params: SphParams, particles: ParticleSet, forcing: ForcingField) -> Result<Self> {
        params.validate()?;
        particles.check_matches(&params)?;
        let mut sim = Self {
            params,
            particles,
            forcing,
            t: 0.0,
            step: 0,
            acc: Vec::new(),
            nb: Neighbours::default(),
            cfl_warnings: 0,
        };
        sim.refresh();
        Ok(sim)
    }

    /// Rebuild neighbours, densities and accelerations from the positions.
    fn refresh(&mut self) {
        let p = &self.params;
        let grid = CellGrid::build(&self.particles.positions, p.box_l, 2.0 * p.h, p.dims);
        self.nb = Neighbours::from_grid(&self.particles.positions, &grid, 2.0 * p.h);
        self.particles.densities = density_with(p, &self.nb);
        self.acc = pair_acceleration_with(&self.particles, p, &self.nb);
        self.forcing.add_to(&self.particles.positions, &mut self.acc);
    }

    pub fn accelerations(&self) -> &[Vec3] {
        &self.acc
    }

    pub fn neighbours(&self) -> &Neighbours {
        &self.nb
    }

    /// One kick-drift-kick step. Densities are recomputed by summation after
    /// the drift; the second kick evaluates viscosity with the half-step
    /// velocities.
    pub fn step_kdk(&mut self) -> Result<()> {
        let dt = self.params.dt;
        let limit = self.params.cfl_limit(self.particles.max_speed());
        if dt > limit {
            match self.params.cfl_policy {
                CflPolicy::Abort => {
                    return Err(Error::Numerical {
                        step: self.step as usize,
                        t: self.t,
                        detail: format!("dt = {dt} exceeds the CFL limit {limit}"),
                    })
                }
                CflPolicy::Warn => {
                    if self.cfl_warnings == 0 {
                        log::warn!("step {}: dt = {dt} exceeds the CFL limit {limit}", self.step);
                    }
                    self.cfl_warnings += 1;
                }
            }
        }
        let half = 0.5 * dt;
        let dims = self.params.dims;
        for (v, a) in self.particles.velocities.iter_mut().zip(&self.acc) {
            for d in 0..dims {
                v[d] += half * a[d];
            }
        }
        for (x, v) in self.particles.positions.iter_mut().zip(&self.particles.velocities) {
            for d in 0..dims {
                x[d] += dt * v[d];
            }
        }
        self.particles.wrap();
        self.forcing.advance(dt, self.step);
        self.step += 1;
        self.t += dt;
        self.refresh();
        for (v, a) in self.particles.velocities.iter_mut().zip(&self.acc) {
            for d in 0..dims {
                v[d] += half * a[d];
            }
        }
        if self.particles.velocities.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::Numerical {
                step: self.step as usize,
                t: self.t,
                detail: "non-finite velocity".into(),
            });
        }
        Ok(())
    }

    pub fn run(&mut self, n_steps: usize) -> Result<()> {
        for _ in 0..n_steps {
            self.step_kdk()?;
        }
        Ok(())
    }

    pub fn kinetic_energy(&self) -> f64 {
        self.particles.kinetic_energy(self.params.mass)
    }

    pub fn internal_energy(&self) -> f64 {
        self.params.mass
            * self
                .particles
                .densities
                .iter()
                .map(|r| internal_energy(*r, &self.params))
                .sum::<f64>()
    }

    pub fn total_energy(&self) -> f64 {
        self.kinetic_energy() + self.internal_energy()
    }

    pub fn momentum(&self) -> Vec3 {
        self.particles.momentum(self.params.mass)
    }
}
