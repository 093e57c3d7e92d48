//! Weakly compressible SPH in a periodic box (2D or 3D), with velocity
//! gradient estimation and export onto Eulerian grids.

mod field;
mod forcing;
pub mod grid;
mod integrator;
pub mod io;
mod kernel;
mod params;
mod particles;
pub mod physics;

/// Positions and velocities are stored as 3-vectors; components beyond the
/// run's dimension are zero.
pub type Vec3 = [f64; 3];

pub use field::{energy_spectrum, grid_interpolate, GridField};
pub use forcing::ForcingField;
pub use grid::{CellGrid, Neighbours};
pub use integrator::Simulation;
pub use io::{read_grid, read_snapshot, write_grid, write_snapshot, SnapshotEntry, TrajectoryManifest};
pub use kernel::{kernel_grad, kernel_w, sigma, Kernel};
pub use params::{CflPolicy, ForcingKind, ForcingSpec, SphParams};
pub use particles::ParticleSet;
pub use physics::{
    acceleration, acceleration_brute_force, artificial_viscosity, density_summation, eos_pressure, estimate_vgt,
    internal_energy,
};
