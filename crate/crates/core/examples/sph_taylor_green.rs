//! Decaying Taylor-Green vortex in a weakly compressible periodic SPH box.

use std::f64::consts::PI;

use lgdf::sph::{ForcingField, ParticleSet, Simulation, SphParams};

fn main() -> lgdf::Result<()> {
    let n = 32;
    let params = SphParams::lattice(2, n, 1.0, 1.3, 10.0);
    let mut set = ParticleSet::lattice(2, n, 1.0)?;
    for (x, v) in set.positions.iter().zip(set.velocities.iter_mut()) {
        v[0] = (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos();
        v[1] = -(2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).sin();
    }
    let mut sim = Simulation::new(params, set, ForcingField::none())?;
    let p0 = sim.momentum();
    println!("dt = {:.2e}, {} particles", params.dt, params.n_particles);
    for block in 0..5 {
        sim.run(100)?;
        let p = sim.momentum();
        println!(
            "step {:4}  t {:.3}  KE {:.5}  E {:.5}  |dP| {:.1e}",
            (block + 1) * 100,
            sim.t,
            sim.kinetic_energy(),
            sim.total_energy(),
            ((p[0] - p0[0]).powi(2) + (p[1] - p0[1]).powi(2)).sqrt()
        );
    }
    Ok(())
}
