use super::{SphParams, Vec3};
use crate::error::{Error, Result};

/// Particle state. Coordinates beyond `dims` are kept at zero so 2D and 3D
/// runs share one code path.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    pub dims: usize,
    pub box_l: f64,
    pub positions: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
    pub densities: Vec<f64>,
}

impl ParticleSet {
    pub fn new(dims: usize, box_l: f64, positions: Vec<Vec3>, velocities: Vec<Vec3>) -> Result<Self> {
        if positions.len() != velocities.len() {
            return Err(Error::Argument(format!(
                "{} positions but {} velocities",
                positions.len(),
                velocities.len()
            )));
        }
        if !(dims == 2 || dims == 3) {
            return Err(Error::Argument(format!("dims must be 2 or 3, got {dims}")));
        }
        let n = positions.len();
        let mut p = Self {
            dims,
            box_l,
            positions,
            velocities,
            densities: vec![0.0; n],
        };
        for k in dims..3 {
            for i in 0..n {
                p.positions[i][k] = 0.0;
                p.velocities[i][k] = 0.0;
            }
        }
        p.wrap();
        Ok(p)
    }

    /// Particles at rest on a cubic lattice of `per_side` points per axis,
    /// offset by half a spacing from the origin.
    pub fn lattice(dims: usize, per_side: usize, box_l: f64) -> Result<Self> {
        let dx = box_l / per_side as f64;
        let n = per_side.pow(dims as u32);
        let positions = (0..n)
            .map(|i| {
                let mut p = [0.0; 3];
                let mut rem = i;
                for v in p.iter_mut().take(dims) {
                    *v = ((rem % per_side) as f64 + 0.5) * dx;
                    rem /= per_side;
                }
                p
            })
            .collect();
        Self::new(dims, box_l, positions, vec![[0.0; 3]; n])
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Map every position into `[0, L)`.
    pub fn wrap(&mut self) {
        let l = self.box_l;
        for p in &mut self.positions {
            for v in p.iter_mut().take(self.dims) {
                let w = v.rem_euclid(l);
                // rem_euclid can round up to exactly L for tiny negatives
                *v = if w >= l { 0.0 } else { w };
            }
        }
    }

    pub fn check_matches(&self, params: &SphParams) -> Result<()> {
        if self.dims != params.dims || self.box_l != params.box_l || self.len() != params.n_particles {
            return Err(Error::Argument(
                "particle set does not match the parameter block (dims, box_l or n_particles)".into(),
            ));
        }
        Ok(())
    }

    pub fn momentum(&self, mass: f64) -> Vec3 {
        let mut p = [0.0; 3];
        for v in &self.velocities {
            for k in 0..3 {
                p[k] += mass * v[k];
            }
        }
        p
    }

    pub fn max_speed(&self) -> f64 {
        self.velocities
            .iter()
            .map(|v| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt())
            .fold(0.0, f64::max)
    }

    pub fn kinetic_energy(&self, mass: f64) -> f64 {
        0.5 * mass * self.velocities.iter().map(|v| v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sum::<f64>()
    }

    pub fn rms_velocity(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        (2.0 * self.kinetic_energy(1.0) / (self.len() * self.dims) as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_into_box() {
        let p = ParticleSet::new(2, 1.0, vec![[-0.25, 1.5, 9.0], [-1e-20, 0.0, 0.0]], vec![[0.0; 3]; 2]).unwrap();
        assert_eq!(p.positions[0], [0.75, 0.5, 0.0]);
        assert!(p.positions[1][0] >= 0.0 && p.positions[1][0] < 1.0);
    }

    #[test]
    fn lattice_layout() {
        let p = ParticleSet::lattice(3, 4, 2.0).unwrap();
        assert_eq!(p.len(), 64);
        assert_eq!(p.positions[0], [0.25, 0.25, 0.25]);
        assert_eq!(p.positions[63], [1.75, 1.75, 1.75]);
    }
}
