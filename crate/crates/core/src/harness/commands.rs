//! One function per subcommand. Each writes its outputs into `out`, then a
//! [`RunManifest`] hashing them.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;

use super::config::*;
use super::manifest::RunManifest;
use crate::diag::{
    collapse_diagnostic, distribution_metrics, nearest_sample, recommend_uturn_time, uturn_ensemble,
};
use crate::diffusion::{
    integrate_reverse, write_rows, Dataset, MixtureMarginal, NoiseSchedule, ReverseConfig, ScoreProvider,
    Whitening,
};
use crate::error::{Error, Result};
use crate::io;
use crate::rng::{self, StreamRng};
use crate::scalar::{pair_correlation_estimate, SyntheticFlow};
use crate::score_net::{train_score, ScoreNet};
use crate::sph::{
    energy_spectrum, estimate_vgt, grid_interpolate, read_snapshot, write_snapshot, ForcingField,
    GridField, ParticleSet, Simulation, SnapshotEntry, TrajectoryManifest,
};
use crate::vgt::{
    integrate_restricted_euler, invariants, q_r, random_matrix, split_sym_skew, tetrad_ensemble, traceless, Mat3,
    QrHistogram,
};

pub const DATASET_FILE: &str = "dataset.bin";
pub const WHITENING_FILE: &str = "whitening.json";
pub const DATASET_INFO_FILE: &str = "dataset_info.json";
pub const TRAJECTORY_FILE: &str = "trajectory.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const SAMPLES_FILE: &str = "samples.bin";

fn echo<T: serde::Serialize>(block: &T) -> serde_json::Value {
    serde_json::to_value(block).unwrap_or(serde_json::Value::Null)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

// ---------------------------------------------------------------- gen-mixture

pub fn gen_mixture(b: &GenMixtureBlock, out: &Path, seed: u64) -> Result<RunManifest> {
    b.validate()?;
    ensure_dir(out)?;
    let m = RunManifest::begin("gen-mixture", seed, echo(b));
    let ds = b.mixture.sample_dataset(b.n_samples, seed)?;
    let path = out.join(DATASET_FILE);
    ds.save(&path)?;
    let (mean, std) = ds.moments();
    m.finish(out, &[path], json!({"count": ds.count(), "dim": ds.dim(), "mean": mean, "std": std}))
}

// ---------------------------------------------------------------- sph-run

fn initial_particles(b: &SphRunBlock) -> Result<ParticleSet> {
    let mut set = ParticleSet::lattice(b.dims, b.per_side, b.box_l)?;
    if b.initial_velocity == InitialVelocity::TaylorGreen {
        let k = 2.0 * std::f64::consts::PI / b.box_l;
        let u = b.initial_amplitude;
        for (x, v) in set.positions.iter().zip(set.velocities.iter_mut()) {
            let (sx, cx) = (k * x[0]).sin_cos();
            let (sy, cy) = (k * x[1]).sin_cos();
            let cz = if b.dims == 3 { (k * x[2]).cos() } else { 1.0 };
            v[0] = u * sx * cy * cz;
            v[1] = -u * cx * sy * cz;
        }
    }
    Ok(set)
}

pub fn sph_run(b: &SphRunBlock, out: &Path, seed: u64) -> Result<RunManifest> {
    let params = b.params()?;
    ensure_dir(out)?;
    let manifest = RunManifest::begin("sph-run", seed, echo(b));
    let forcing = ForcingField::new(&b.forcing, b.dims, b.box_l, seed)?;
    let mut sim = Simulation::new(params, initial_particles(b)?, forcing)?;
    let p0 = sim.momentum();
    let mut traj = TrajectoryManifest::default();
    let mut files = Vec::new();
    let snap = |sim: &Simulation, traj: &mut TrajectoryManifest, files: &mut Vec<PathBuf>| -> Result<()> {
        let name = format!("snap_{:07}.bin", sim.step);
        let path = out.join(&name);
        write_snapshot(&path, &sim.particles, &sim.params, sim.t)?;
        traj.snapshots.push(SnapshotEntry {
            file: name,
            step: sim.step,
            t: sim.t,
            kinetic_energy: sim.kinetic_energy(),
            total_energy: sim.total_energy(),
            sha256: io::sha256_file(&path)?,
        });
        files.push(path);
        Ok(())
    };
    snap(&sim, &mut traj, &mut files)?;
    for s in 1..=b.n_steps {
        sim.step_kdk()?;
        if s % b.snapshot_every == 0 || s == b.n_steps {
            snap(&sim, &mut traj, &mut files)?;
        }
    }
    let tpath = out.join(TRAJECTORY_FILE);
    io::write_json(&tpath, &traj)?;
    files.push(tpath);
    let p1 = sim.momentum();
    let drift: f64 = (0..3).map(|k| (p1[k] - p0[k]).abs()).fold(0.0, f64::max);
    manifest.finish(
        out,
        &files,
        json!({
            "n_snapshots": traj.snapshots.len(),
            "final_t": sim.t,
            "final_kinetic_energy": sim.kinetic_energy(),
            "final_total_energy": sim.total_energy(),
            "momentum_drift": drift,
            "cfl_warnings": sim.cfl_warnings,
            "n_particles": params.n_particles,
            "dt": params.dt,
        }),
    )
}

// ---------------------------------------------------------------- make-dataset

/// Cut patches (or VGT invariant rows) from every snapshot listed in `dir`.
/// Returns the raw rows, row dimension, snapshot count and rows per snapshot.
fn extract_rows(b: &MakeDatasetBlock) -> Result<(Vec<f64>, usize, usize, usize, usize, f64)> {
    let tpath = b.snapshots.join(TRAJECTORY_FILE);
    let traj: TrajectoryManifest = io::read_json(&tpath)?;
    let paths: Vec<PathBuf> = traj.paths(&b.snapshots).into_iter().skip(b.skip_snapshots).collect();
    if paths.len() < b.min_snapshots {
        return Err(Error::Argument(format!(
            "{} usable snapshots in {} (after skipping {}), need at least {}",
            paths.len(),
            b.snapshots.display(),
            b.skip_snapshots,
            b.min_snapshots
        )));
    }
    let mut rows = Vec::new();
    let (mut dim, mut per_snap, mut dims, mut box_l) = (0, 0, 0, 0.0);
    for path in &paths {
        let (particles, params, _) = read_snapshot(path)?;
        dims = params.dims;
        box_l = params.box_l;
        let before = rows.len();
        match b.dataset {
            DatasetKind::Patches { grid_n, patch, stride } => {
                let field = grid_interpolate(&particles, &params, grid_n)?;
                let starts: Vec<usize> = (0..grid_n).step_by(stride).collect();
                let zs: &[usize] = if dims == 3 { &starts } else { &[0] };
                for &z in zs {
                    for &y in &starts {
                        for &x in &starts {
                            rows.extend(field.patch([x, y, z], patch));
                        }
                    }
                }
                dim = patch.pow(dims as u32) * dims;
            }
            DatasetKind::VgtInvariants { particle_stride } => {
                let grid = crate::sph::physics::build_grid(&particles, &params);
                let grads = estimate_vgt(&particles, &params, &grid);
                for g in grads.iter().step_by(particle_stride) {
                    rows.extend(invariants(&split_sym_skew(g)).0);
                }
                dim = 5;
            }
        }
        per_snap = (rows.len() - before) / dim;
    }
    Ok((rows, dim, paths.len(), per_snap, dims, box_l))
}

pub fn make_dataset(b: &MakeDatasetBlock, out: &Path, seed: u64) -> Result<RunManifest> {
    b.validate()?;
    ensure_dir(out)?;
    let manifest = RunManifest::begin("make-dataset", seed, echo(b));
    let (rows, dim, n_snap, per_snap, dims, box_l) = extract_rows(b)?;
    let raw = Dataset::new(dim, rows, format!("sph:{}", b.snapshots.display()))?;
    let (ds, whitening) = raw.whiten();
    let dpath = out.join(DATASET_FILE);
    let wpath = out.join(WHITENING_FILE);
    let ipath = out.join(DATASET_INFO_FILE);
    ds.save(&dpath)?;
    io::write_json(&wpath, &whitening)?;
    let info = DatasetInfo {
        kind: b.dataset,
        dims,
        box_l,
        n_snapshots: n_snap,
        per_snapshot: per_snap,
        count: ds.count(),
    };
    io::write_json(&ipath, &info)?;
    manifest.finish(
        out,
        &[dpath, wpath, ipath],
        json!({"count": ds.count(), "dim": dim, "n_snapshots": n_snap, "per_snapshot": per_snap}),
    )
}

// ---------------------------------------------------------------- train

pub fn train(b: &TrainBlock, out: &Path, seed: u64) -> Result<RunManifest> {
    b.validate()?;
    ensure_dir(out)?;
    let manifest = RunManifest::begin("train", seed, echo(b));
    let ds = Dataset::load(&b.dataset)?;
    let mut cfg = b.train.clone();
    cfg.seed = seed;
    let result = train_score(&ds, &b.schedule, &cfg)?;
    let cpath = out.join(CHECKPOINT_FILE);
    let lpath = out.join("loss.csv");
    result.net.save(&cpath)?;
    result.write_loss_csv(&lpath)?;
    let h = &result.loss_history;
    let tail = &h[h.len().saturating_sub(100)..];
    let tail_mean = if tail.is_empty() { f64::NAN } else { tail.iter().sum::<f64>() / tail.len() as f64 };
    manifest.finish(
        out,
        &[cpath, lpath],
        json!({
            "iterations": h.len(),
            "n_params": result.net.params.n_params(),
            "first_loss": h.first(),
            "final_loss_mean_last_100": if tail.is_empty() { None } else { Some(tail_mean) },
        }),
    )
}

// ---------------------------------------------------------------- sample

fn load_whitening(b: &SampleBlock, dim: usize) -> Result<Whitening> {
    let path = match &b.whitening {
        Some(p) => p.clone(),
        None => {
            let p = b.dataset.with_file_name(WHITENING_FILE);
            if !p.exists() {
                return Ok(Whitening::identity(dim));
            }
            p
        }
    };
    let w: Whitening = io::read_json(&path)?;
    if w.mean.len() != dim || w.scale.len() != dim {
        return Err(Error::format(path, "whitening dimension differs from the dataset"));
    }
    Ok(w)
}

/// Reverse ensemble that survives per-member failures: if the batched run
/// fails, every member is rerun alone (with the same stream) and failures
/// are collected instead of aborting.
pub fn robust_reverse_ensemble<P: ScoreProvider + ?Sized>(
    provider: &P,
    schedule: &NoiseSchedule,
    cfg: &ReverseConfig,
    n: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<(usize, String)>)> {
    cfg.validate(schedule)?;
    let dim = provider.dim();
    let prior = |i: usize| -> (Vec<f64>, StreamRng) {
        let mut r = rng::stream(seed, i as u64);
        let mut x = vec![0.0; dim];
        rng::fill_normal(&mut r, &mut x);
        (x, r)
    };
    let (mut states, mut rngs): (Vec<Vec<f64>>, Vec<StreamRng>) = (0..n).map(prior).unzip();
    let mut flat = states.concat();
    if n == 0 {
        return Ok((flat, Vec::new()));
    }
    let run = |x: &mut [f64], r: &mut [StreamRng]| {
        integrate_reverse(provider, schedule, schedule.horizon, cfg.t_min, cfg.steps, x, r, None)
    };
    match run(&mut flat, &mut rngs) {
        Ok(()) => return Ok((flat, Vec::new())),
        Err(Error::Numerical { .. } | Error::Divergence { .. }) => {}
        Err(e) => return Err(e),
    }
    let mut kept = Vec::with_capacity(n * dim);
    let mut failures = Vec::new();
    for (i, x) in states.iter_mut().enumerate() {
        let (x0, r) = prior(i);
        *x = x0;
        let mut r = [r];
        match run(x, &mut r) {
            Ok(()) => kept.extend_from_slice(x),
            Err(e @ (Error::Numerical { .. } | Error::Divergence { .. })) => failures.push((i, e.to_string())),
            Err(e) => return Err(e),
        }
    }
    Ok((kept, failures))
}

fn mean_spectrum(rows: &[f64], dim: usize, info: &DatasetInfo, patch: usize, grid_n: usize) -> Result<Vec<f64>> {
    let mut acc: Vec<f64> = Vec::new();
    let n = rows.len() / dim;
    let l = info.box_l * patch as f64 / grid_n as f64;
    for row in rows.chunks_exact(dim) {
        let f = GridField::new(patch, info.dims, info.dims, l, row.to_vec())?;
        let e = energy_spectrum(&f);
        if acc.is_empty() {
            acc = vec![0.0; e.len()];
        }
        acc.iter_mut().zip(&e).for_each(|(a, v)| *a += v);
    }
    acc.iter_mut().for_each(|a| *a /= n.max(1) as f64);
    Ok(acc)
}

pub fn sample(b: &SampleBlock, out: &Path, seed: u64) -> Result<RunManifest> {
    b.validate()?;
    ensure_dir(out)?;
    let manifest = RunManifest::begin("sample", seed, echo(b));
    let ds = Dataset::load(&b.dataset)?;
    let dim = ds.dim();
    let whitening = load_whitening(b, dim)?;
    let (provider, schedule): (Box<dyn ScoreProvider>, NoiseSchedule) = match b.mode {
        SampleMode::ExactScore => (Box::new(MixtureMarginal::new(b.schedule, ds.clone())), b.schedule),
        SampleMode::Checkpoint => {
            let path = b.checkpoint.as_ref().expect("validated");
            let net = ScoreNet::load(path)?;
            let s = net.schedule;
            (Box::new(net), s)
        }
    };
    if provider.dim() != dim {
        return Err(Error::config("sample.checkpoint", "network dimension differs from the dataset"));
    }
    b.reverse.validate(&schedule)?;
    let provider = provider.as_ref();

    let mut metrics = serde_json::Map::new();
    let (mut samples, failures) = match b.uturn {
        Some(t_u) => {
            let u = uturn_ensemble(&ds, &schedule, provider, t_u, &b.reverse, b.n_samples, seed)?;
            let dists: Vec<f64> = u
                .samples
                .chunks_exact(dim)
                .zip(&u.origins)
                .map(|(x, &o)| x.iter().zip(ds.sample(o)).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt())
                .collect();
            metrics.insert("uturn_time".into(), json!(t_u));
            metrics.insert("max_distance_to_origin".into(), json!(dists.iter().cloned().fold(0.0, f64::max)));
            metrics.insert(
                "mean_distance_to_origin".into(),
                json!(dists.iter().sum::<f64>() / dists.len().max(1) as f64),
            );
            (u.samples, Vec::new())
        }
        None => robust_reverse_ensemble(provider, &schedule, &b.reverse, b.n_samples, seed)?,
    };
    let n_out = samples.len() / dim;

    // Memorization of the delivered samples (whitened units).
    let near: Vec<f64> = samples.par_chunks(dim).map(|x| nearest_sample(&ds, x).1).collect();
    let memorized = near.iter().filter(|d| **d < b.collapse_epsilon).count();
    metrics.insert("n_requested".into(), json!(b.n_samples));
    metrics.insert("n_generated".into(), json!(n_out));
    metrics.insert("n_failed".into(), json!(failures.len()));
    metrics.insert("memorized_fraction".into(), json!(memorized as f64 / n_out.max(1) as f64));

    // Full trajectories for the collapse curves.
    let traj_seed = rng::sub_seed(seed, 0xC0_11A5E);
    let mut collapse = Vec::new();
    if b.uturn.is_none() {
        for k in 0..b.diagnostic_trajectories.min(b.n_samples) {
            let tr = crate::diffusion::reverse_sde_trajectory(provider, &schedule, &b.reverse, rng::sub_seed(traj_seed, k as u64));
            match tr {
                Ok(tr) => collapse.push(collapse_diagnostic(&tr, &ds, b.collapse_epsilon)?),
                Err(e @ (Error::Numerical { .. } | Error::Divergence { .. })) => {
                    log::warn!("diagnostic trajectory {k} failed: {e}")
                }
                Err(e) => return Err(e),
            }
        }
    }
    if n_out >= 2 {
        let m = distribution_metrics(ds.as_flat(), &samples, dim)?;
        metrics.insert("max_ks_vs_dataset".into(), json!(m.max_ks()));
        metrics.insert("cov_diff_vs_dataset".into(), json!(m.cov_diff));
    }

    for x in samples.chunks_exact_mut(dim) {
        whitening.inverse_in_place(x);
    }
    let spath = out.join(SAMPLES_FILE);
    write_rows(&spath, dim, &samples, &format!("generated({:?}, seed={seed})", b.mode))?;
    let dpath = out.join("diagnostics.json");
    io::write_json(
        &dpath,
        &json!({
            "failures": failures.iter().map(|(i, e)| json!({"sample": i, "error": e})).collect::<Vec<_>>(),
            "collapse": collapse,
            "nearest_training_distance": near,
        }),
    )?;
    let mut files = vec![spath, dpath];

    let ipath = b.dataset.with_file_name(DATASET_INFO_FILE);
    if ipath.exists() {
        let info: DatasetInfo = io::read_json(&ipath)?;
        if let DatasetKind::Patches { grid_n, patch, .. } = info.kind {
            let mut gt = ds.as_flat().to_vec();
            for x in gt.chunks_exact_mut(dim) {
                whitening.inverse_in_place(x);
            }
            let e_gt = mean_spectrum(&gt, dim, &info, patch, grid_n)?;
            let e_gen = mean_spectrum(&samples, dim, &info, patch, grid_n)?;
            let mut csv = String::from("shell,generated,ground_truth\n");
            for (k, g) in e_gt.iter().enumerate() {
                let _ = writeln!(csv, "{k},{:e},{g:e}", e_gen.get(k).copied().unwrap_or(0.0));
            }
            let cpath = out.join("spectra.csv");
            io::write_text(&cpath, &csv)?;
            files.push(cpath);
            let ratio: Vec<f64> = e_gen.iter().zip(&e_gt).skip(1).take(6).map(|(a, c)| a / c).collect();
            metrics.insert("spectrum_ratio_shells_1_to_6".into(), json!(ratio));
        }
    }
    manifest.finish(out, &files, serde_json::Value::Object(metrics))
}

// ---------------------------------------------------------------- uturn-scan

pub fn uturn_scan(b: &UturnScanBlock, out: &Path, seed: u64) -> Result<RunManifest> {
    b.validate()?;
    ensure_dir(out)?;
    let manifest = RunManifest::begin("uturn-scan", seed, echo(b));
    let ds = Dataset::load(&b.dataset)?;
    let report = recommend_uturn_time(&ds, &b.schedule, &b.scan, seed)?;
    let path = out.join("uturn_report.json");
    io::write_json(&path, &report)?;
    manifest.finish(
        out,
        &[path],
        json!({"recommended_t": report.recommended_t, "criteria_unmet": report.criteria_unmet}),
    )
}

// ---------------------------------------------------------------- vgt

fn re_initial(init: &ReInitial, k: usize, seed: u64) -> Mat3 {
    match *init {
        ReInitial::Random { scale } => traceless(&random_matrix(&mut rng::stream(seed, k as u64), scale)),
        ReInitial::VieillefosseLine { a } => Mat3::from_diagonal(&nalgebra::Vector3::new(a, a, -2.0 * a)),
    }
}

pub fn vgt(b: &VgtBlock, out: &Path, seed: u64) -> Result<RunManifest> {
    b.validate()?;
    ensure_dir(out)?;
    let manifest = RunManifest::begin("vgt", seed, echo(b));
    match b.model {
        VgtModel::Re => {
            let re = b.re.as_ref().expect("validated");
            let runs = (0..re.n_trajectories)
                .into_par_iter()
                .map(|k| integrate_restricted_euler(&re_initial(&re.initial, k, seed), &re.config))
                .collect::<Result<Vec<_>>>()?;
            let mut log = String::from("trajectory,t,step,norm\n");
            let mut qr = Vec::new();
            let mut report = Vec::new();
            for (k, tr) in runs.iter().enumerate() {
                if let Some(bu) = tr.blowup {
                    let _ = writeln!(log, "{k},{:e},{},{:e}", bu.t, bu.step, bu.norm);
                }
                qr.extend(tr.samples.iter().map(|(_, m)| q_r(m)));
                report.push(json!({
                    "trajectory": k,
                    "t_final": tr.t_final,
                    "blowup": tr.blowup,
                    "max_invariant_drift": tr.max_invariant_drift,
                    "max_abs_trace": tr.max_abs_trace,
                }));
            }
            let lpath = out.join("singularity_log.csv");
            let rpath = out.join("invariant_report.json");
            let hpath = out.join("re_qr_histogram.csv");
            io::write_text(&lpath, &log)?;
            io::write_json(&rpath, &report)?;
            io::write_text(&hpath, &QrHistogram::build(&qr, re.n_bins, None, None).csv())?;
            let n_blow = runs.iter().filter(|t| t.blowup.is_some()).count();
            let drift = runs.iter().map(|t| t.max_invariant_drift).fold(0.0, f64::max);
            manifest.finish(
                out,
                &[lpath, rpath, hpath],
                json!({"n_trajectories": runs.len(), "singularity_events": n_blow, "max_invariant_drift": drift}),
            )
        }
        VgtModel::Tetrad => {
            let cfg = b.tetrad.as_ref().expect("validated");
            let stats = tetrad_ensemble(cfg, seed)?;
            let files = stats.write(out)?;
            manifest.finish(
                out,
                &files,
                json!({"floor_events": stats.floor_events, "mean_q": stats.mean_q, "mean_r": stats.mean_r}),
            )
        }
    }
}

// ---------------------------------------------------------------- scalar

pub fn scalar(b: &ScalarBlock, out: &Path, seed: u64) -> Result<RunManifest> {
    b.validate()?;
    ensure_dir(out)?;
    let manifest = RunManifest::begin("scalar", seed, echo(b));
    let flow = match &b.flow {
        Some(c) => SyntheticFlow::generate(c, rng::sub_seed(seed, 1))?,
        None => SyntheticFlow::zero(),
    };
    // Common random numbers across separations keep the curve smooth.
    let results = b
        .r_sep
        .iter()
        .map(|&r| pair_correlation_estimate(&flow, &b.ensemble, r, seed))
        .collect::<Result<Vec<_>>>()?;
    let path = out.join("pair_correlation.json");
    io::write_json(&path, &json!({"flow": flow, "results": results}))?;
    let n_unreliable = results.iter().filter(|r| r.unreliable).count();
    manifest.finish(
        out,
        &[path],
        json!({
            "estimates": results.iter().map(|r| r.estimate).collect::<Vec<_>>(),
            "unreliable": n_unreliable,
        }),
    )
}
