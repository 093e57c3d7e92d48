//! Snapshot, grid and trajectory-manifest files.
//!
//! Snapshot: `LGDF`, version, dims (u32), N (u64), t, parameter block
//! (mass, h, rho0, c, gamma, alpha, beta, L, dt), then positions,
//! velocities (N x dims each) and densities (N), all little-endian f64.
//! Grid file: the same header followed by grid_n (u64), component count
//! (u64) and the point-major field.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CflPolicy, GridField, ParticleSet, SphParams};
use crate::error::{Error, Result};
use crate::io::{BinReader, BinWriter};

fn write_header(w: &mut BinWriter, p: &SphParams, n: usize, t: f64) {
    w.u32(p.dims as u32);
    w.u64(n as u64);
    w.f64(t);
    w.f64s(&[p.mass, p.h, p.rho0, p.sound_c, p.gamma, p.alpha_visc, p.beta_visc, p.box_l, p.dt]);
}

fn read_header(r: &mut BinReader) -> Result<(SphParams, f64)> {
    let dims = r.u32()? as usize;
    let n = r.u64()? as usize;
    let t = r.f64()?;
    let b = r.f64s(9)?;
    let p = SphParams {
        n_particles: n,
        mass: b[0],
        h: b[1],
        rho0: b[2],
        sound_c: b[3],
        gamma: b[4],
        alpha_visc: b[5],
        beta_visc: b[6],
        box_l: b[7],
        dt: b[8],
        dims,
        cfl_policy: CflPolicy::Warn,
    };
    p.validate().map_err(|e| Error::format(r.path(), format!("bad parameter block: {e}")))?;
    Ok((p, t))
}

fn flat(v: &[[f64; 3]], dims: usize) -> Vec<f64> {
    v.iter().flat_map(|x| x[..dims].to_vec()).collect()
}

fn unflat(v: &[f64], dims: usize) -> Vec<[f64; 3]> {
    v.chunks_exact(dims)
        .map(|c| {
            let mut x = [0.0; 3];
            x[..dims].copy_from_slice(c);
            x
        })
        .collect()
}

pub fn write_snapshot(path: &Path, particles: &ParticleSet, params: &SphParams, t: f64) -> Result<()> {
    let mut w = BinWriter::new();
    let d = params.dims;
    write_header(&mut w, params, particles.len(), t);
    w.f64s(&flat(&particles.positions, d));
    w.f64s(&flat(&particles.velocities, d));
    w.f64s(&particles.densities);
    w.write_to(path)
}

pub fn read_snapshot(path: &Path) -> Result<(ParticleSet, SphParams, f64)> {
    let mut r = BinReader::open(path)?;
    let (p, t) = read_header(&mut r)?;
    let (n, d) = (p.n_particles, p.dims);
    let pos = unflat(&r.f64s(n * d)?, d);
    let vel = unflat(&r.f64s(n * d)?, d);
    let rho = r.f64s(n)?;
    if !r.is_at_end() {
        return Err(Error::format(path, "trailing bytes after snapshot"));
    }
    let mut set = ParticleSet::new(d, p.box_l, pos, vel)?;
    set.densities = rho;
    Ok((set, p, t))
}

pub fn write_grid(path: &Path, field: &GridField, params: &SphParams, t: f64) -> Result<()> {
    let mut w = BinWriter::new();
    write_header(&mut w, params, params.n_particles, t);
    w.u64(field.n as u64);
    w.u64(field.comps as u64);
    w.f64s(&field.data);
    w.write_to(path)
}

pub fn read_grid(path: &Path) -> Result<(GridField, SphParams, f64)> {
    let mut r = BinReader::open(path)?;
    let (p, t) = read_header(&mut r)?;
    let n = r.u64()? as usize;
    let comps = r.u64()? as usize;
    let data = r.f64s(n.pow(p.dims as u32) * comps)?;
    if !r.is_at_end() {
        return Err(Error::format(path, "trailing bytes after grid"));
    }
    Ok((GridField::new(n, p.dims, comps, p.box_l, data)?, p, t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub file: String,
    pub step: u64,
    pub t: f64,
    pub kinetic_energy: f64,
    pub total_energy: f64,
    pub sha256: String,
}

/// JSON listing of the snapshots of one run; file names are relative to
/// the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrajectoryManifest {
    pub snapshots: Vec<SnapshotEntry>,
}

impl TrajectoryManifest {
    pub fn paths(&self, dir: &Path) -> Vec<PathBuf> {
        self.snapshots.iter().map(|s| dir.join(&s.file)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sph::physics::{build_grid, density_summation};

    #[test]
    fn snapshot_round_trip() {
        for dims in [2, 3] {
            let p = SphParams::lattice(dims, 6, 1.0, 1.3, 10.0);
            let mut set = ParticleSet::lattice(dims, 6, 1.0).unwrap();
            set.velocities[3][1] = 0.125;
            set.densities = density_summation(&set, &p, &build_grid(&set, &p));
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("s.bin");
            write_snapshot(&path, &set, &p, 0.5).unwrap();
            let (back, q, t) = read_snapshot(&path).unwrap();
            assert_eq!(back, set);
            assert_eq!(q, p);
            assert_eq!(t, 0.5);
        }
    }

    #[test]
    fn grid_round_trip_and_truncation() {
        let p = SphParams::lattice(2, 6, 1.0, 1.3, 10.0);
        let f = GridField::new(4, 2, 2, 1.0, (0..32).map(|i| i as f64).collect()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.bin");
        write_grid(&path, &f, &p, 1.0).unwrap();
        let (g, _, t) = read_grid(&path).unwrap();
        assert_eq!(g, f);
        assert_eq!(t, 1.0);
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(read_grid(&path), Err(Error::Format { .. })));
    }
}
