//! End-to-end acceptance run: one line per criterion, pass/fail plus timing.
//!
//! `cargo test --test acceptance -- 3 7` runs only the listed criteria.
//! Criterion 13 is reported but never fails the run.

use std::time::{Duration, Instant};

use nalgebra::SymmetricEigen;
use rand::Rng;
use serde_json::json;

use lgdf::diag::{ks_two_sample, recommend_uturn_time, uturn_ensemble, UturnScanConfig};
use lgdf::diffusion::{
    langevin_sample, reverse_sde_ensemble, simulate_forward, Dataset, GaussianMixture, GaussianTarget, LangevinConfig,
    MixtureMarginal, NoiseSchedule, ReverseConfig, ScoreProvider,
};
use lgdf::harness::{self, MakeDatasetBlock, SampleBlock, SphRunBlock, TrainBlock};
use lgdf::rng;
use lgdf::scalar::{pair_correlation_estimate, separation_growth, ChiSpec, EnsembleSpec, SyntheticFlow, SyntheticFlowConfig};
use lgdf::score_net::{gradient_check, train_score, Batch, LossWeighting, ScoreTarget, TrainConfig};
use lgdf::sph::{
    acceleration, acceleration_brute_force, density_summation, estimate_vgt, physics::build_grid, ForcingField,
    ParticleSet, Simulation, SphParams,
};
use lgdf::vgt::{
    integrate_restricted_euler, invariants, random_matrix, random_rotation, restricted_euler_step, split_sym_skew,
    tensor_bases, tetrad_step, traceless, draw_noise, Mat3, ReConfig, ReIntegrator, TetradParams, TetradState,
};

type Outcome = lgdf::Result<(bool, String)>;

struct Criterion {
    id: usize,
    limit: Duration,
    soft: bool,
    run: fn() -> Outcome,
}

fn main() {
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let all = [
        Criterion { id: 1, limit: secs(30), soft: false, run: forward_marginal },
        Criterion { id: 2, limit: secs(5), soft: false, run: score_vs_finite_difference },
        Criterion { id: 3, limit: secs(120), soft: false, run: exact_score_generation },
        Criterion { id: 4, limit: secs(600), soft: false, run: neural_score },
        Criterion { id: 5, limit: secs(300), soft: false, run: uturn_limits },
        Criterion { id: 6, limit: secs(60), soft: false, run: langevin_stationarity },
        Criterion { id: 7, limit: secs(300), soft: false, run: sph_conservation },
        Criterion { id: 8, limit: secs(60), soft: false, run: vgt_reconstruction },
        Criterion { id: 9, limit: secs(5), soft: false, run: tensor_basis_algebra },
        Criterion { id: 10, limit: secs(30), soft: false, run: restricted_euler },
        Criterion { id: 11, limit: secs(60), soft: false, run: tetrad_consistency },
        Criterion { id: 12, limit: secs(120), soft: false, run: pair_dispersion },
        Criterion { id: 13, limit: secs(1800), soft: true, run: genturb_loop },
    ];
    let mut hard_failures = 0;
    for c in all.iter().filter(|c| only.is_empty() || only.contains(&c.id)) {
        let start = Instant::now();
        let (ok, detail) = match (c.run)() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        let took = start.elapsed();
        let in_time = took <= c.limit;
        let pass = ok && in_time;
        let verdict = match (pass, c.soft) {
            (true, _) => "PASS",
            (false, false) => "FAIL",
            (false, true) => "FAIL (soft, reported only)",
        };
        let timing = if in_time { "" } else { " OVER TIME LIMIT" };
        println!(
            "criterion {:>2}: {verdict} [{:.1} s / {} s{timing}] {detail}",
            c.id,
            took.as_secs_f64(),
            c.limit.as_secs()
        );
        if !pass && !c.soft {
            hard_failures += 1;
        }
    }
    if hard_failures > 0 {
        println!("{hard_failures} hard criteria failed");
        std::process::exit(1);
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn column(xs: &[f64], dim: usize, k: usize) -> Vec<f64> {
    xs.iter().skip(k).step_by(dim).copied().collect()
}

fn max_ks(a: &[f64], b: &[f64], dim: usize) -> lgdf::Result<Vec<f64>> {
    (0..dim).map(|k| ks_two_sample(&column(a, dim, k), &column(b, dim, k))).collect()
}

fn fmax(v: &[f64]) -> f64 {
    v.iter().cloned().fold(0.0, f64::max)
}

// ------------------------------------------------------------------ 1

fn forward_marginal() -> Outcome {
    let rows = [[1.0, 2.0], [-1.0, 0.5], [3.0, -1.0], [0.0, -2.5]];
    let n = 100_000;
    let schedule = NoiseSchedule::constant(1.0, 2.0)?;
    let mut pick = rng::stream(11, 0);
    let starts: Vec<f64> = (0..n).flat_map(|_| rows[pick.gen_range(0..rows.len())]).collect();
    let times = [0.25, 0.5, 1.0, 2.0];
    let paths = simulate_forward(&schedule, 2, &starts, &times, 1e-3, 12)?;

    let s = rows.len() as f64;
    let mut worst = 0.0f64;
    for (t, xs) in times.iter().zip(&paths) {
        let a = schedule.shrink(*t)?;
        let s2 = schedule.variance(*t)?;
        for k in 0..2 {
            // closed form for a uniform mixture of N(a x_s, s2 I)
            let mu_d = rows.iter().map(|r| r[k]).sum::<f64>() / s;
            let var_d = rows.iter().map(|r| (r[k] - mu_d).powi(2)).sum::<f64>() / s;
            let (mean_cf, var_cf) = (a * mu_d, a * a * var_d + s2);

            let c = column(xs, 2, k);
            let nf = c.len() as f64;
            let m = c.iter().sum::<f64>() / nf;
            let v = c.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (nf - 1.0);
            let m4 = c.iter().map(|x| (x - m).powi(4)).sum::<f64>() / nf;
            let se_m = (v / nf).sqrt();
            let se_v = ((m4 - v * v) / nf).sqrt();
            worst = worst.max((m - mean_cf).abs() / se_m).max((v - var_cf).abs() / se_v);
        }
    }
    Ok((worst < 3.0, format!("worst deviation {worst:.2} standard errors (limit 3)")))
}

// ------------------------------------------------------------------ 2

fn score_vs_finite_difference() -> Outcome {
    let mut r = rng::stream(21, 0);
    let d = 3;
    let rows: Vec<Vec<f64>> = (0..20).map(|_| (0..d).map(|_| 2.0 * rng::normal(&mut r)).collect()).collect();
    let m = MixtureMarginal::new(NoiseSchedule::default(), Dataset::from_rows(&rows, "random")?);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let t = r.gen_range(0.05..1.0);
        let x: Vec<f64> = (0..d).map(|_| 2.0 * rng::normal(&mut r)).collect();
        let psi = m.exact_score(t, &x)?;
        let mut err2 = 0.0;
        for k in 0..d {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[k] += h;
            xm[k] -= h;
            let fd = -(m.log_density(t, &xp)? - m.log_density(t, &xm)?) / (2.0 * h);
            err2 += (fd - psi[k]).powi(2);
        }
        let norm = psi.iter().map(|p| p * p).sum::<f64>().sqrt();
        worst = worst.max(err2.sqrt() / norm);
    }
    Ok((worst < 1e-6, format!("max relative error {worst:.2e} (limit 1e-6)")))
}

// ------------------------------------------------------------------ 3

fn two_mode_mixture() -> GaussianMixture {
    GaussianMixture::symmetric_pair(&[2.0, 0.0])
}

fn exact_score_generation() -> Outcome {
    let gt = two_mode_mixture();
    let n = 10_000;
    let (_, w) = gt.sample_dataset(n, 31)?.whiten();
    let schedule = NoiseSchedule::default();
    let exact = gt.whitened(&w)?.marginal(schedule)?;
    let mut xs = reverse_sde_ensemble(&exact, &schedule, &ReverseConfig::default(), n, 32)?;
    for x in xs.chunks_exact_mut(2) {
        w.inverse_in_place(x);
    }
    let fresh = gt.sample(n, 33)?;
    let ks = max_ks(&xs, &fresh, 2)?;
    let right = column(&xs, 2, 0).iter().filter(|v| **v > 0.0).count() as f64 / n as f64;
    let sigma = (0.25 / n as f64).sqrt();
    let ok = fmax(&ks) < 0.05 && (right - 0.5).abs() < 3.0 * sigma;
    Ok((
        ok,
        format!(
            "KS per coordinate {:.4} {:.4} (limit 0.05); right-mode fraction {right:.4} (0.5 +- {:.4})",
            ks[0],
            ks[1],
            3.0 * sigma
        ),
    ))
}

// ------------------------------------------------------------------ 4

fn neural_score() -> Outcome {
    let gt = two_mode_mixture();
    let (ds, w) = gt.sample_dataset(2000, 41)?.whiten();
    let schedule = NoiseSchedule::default();
    let cfg = TrainConfig {
        n_iterations: 20_000,
        seed: 42,
        weighting: LossWeighting::SigmaSquared,
        target: ScoreTarget::FullMixture,
        final_learning_rate: Some(1e-5),
        ..TrainConfig::default()
    };
    let trained = train_score(&ds, &schedule, &cfg)?;
    let net = trained.net;
    let n = 10_000;
    let rev = ReverseConfig::default();
    let generated = reverse_sde_ensemble(&net, &schedule, &rev, n, 43)?;
    let exact_w = gt.whitened(&w)?.marginal(schedule)?;
    let exact = reverse_sde_ensemble(&exact_w, &schedule, &rev, n, 44)?;
    let ks = max_ks(&generated, &exact, 2)?;

    // a batch drawn the way training draws one, with exact-score targets
    let mut r = rng::stream(45, 0);
    let mut batch = Batch::default();
    for _ in 0..8 {
        let t: f64 = r.gen_range(0.01..1.0);
        let (a, sd) = (schedule.shrink(t)?, schedule.variance(t)?.sqrt());
        let x0 = ds.sample(r.gen_range(0..ds.count()));
        let x: Vec<f64> = x0.iter().map(|v| a * v + sd * rng::normal(&mut r)).collect();
        let mut psi = vec![0.0; 2];
        exact_w.score(t, &x, &mut psi)?;
        batch.t.push(t);
        batch.x.extend(&x);
        batch.target.extend(&psi);
    }
    let grad_err = gradient_check(&net, &batch, cfg.weighting, 1e-4, 1e-6)?;
    let ok = fmax(&ks) < 0.08 && grad_err < 1e-5;
    Ok((
        ok,
        format!(
            "KS vs exact-score ensemble {:.4} {:.4} (limit 0.08); gradient check {grad_err:.2e} (limit 1e-5); final loss {:.4}",
            ks[0],
            ks[1],
            trained.loss_history.last().copied().unwrap_or(f64::NAN)
        ),
    ))
}

// ------------------------------------------------------------------ 5

fn uturn_limits() -> Outcome {
    let gt = two_mode_mixture();
    let (ds, _) = gt.sample_dataset(500, 51)?.whiten();
    let schedule = NoiseSchedule::default();
    let marginal = MixtureMarginal::new(schedule, ds.clone());
    let rev = ReverseConfig {
        steps: 1000,
        t_min: 1e-5,
    };

    let near = uturn_ensemble(&ds, &schedule, &marginal, rev.t_min, &rev, 1000, 52)?;
    let max_dist = near
        .samples
        .chunks_exact(2)
        .zip(&near.origins)
        .map(|(x, &o)| x.iter().zip(ds.sample(o)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);

    let n = 4000;
    let far = uturn_ensemble(&ds, &schedule, &marginal, schedule.horizon, &rev, n, 53)?;
    let full = reverse_sde_ensemble(&marginal, &schedule, &rev, n, 54)?;
    let ks = max_ks(&far.samples, &full, 2)?;

    let report = recommend_uturn_time(&ds, &schedule, &UturnScanConfig::default(), 55)?;
    let t = report.recommended_t;
    let between = !report.criteria_unmet && t > rev.t_min && t < schedule.horizon;
    let ok = max_dist < 1e-2 && fmax(&ks) < 0.05 && between;
    Ok((
        ok,
        format!(
            "t_u = t_min max distance {max_dist:.2e} (limit 1e-2); t_u = T vs full reverse KS {:.4} {:.4} (limit 0.05); recommended t {t:.3} in ({}, {})",
            ks[0], ks[1], rev.t_min, schedule.horizon
        ),
    ))
}

// ------------------------------------------------------------------ 6

fn langevin_stationarity() -> Outcome {
    let d = 4;
    let traj = langevin_sample(&GaussianTarget::standard(d), &LangevinConfig::new(0.01, 1_000_000), &[0.0; 4], 61)?;
    let burn = 10_000;
    let xs = &traj.states[burn * d..];
    let n = (xs.len() / d) as f64;
    let mean: Vec<f64> = (0..d).map(|k| column(xs, d, k).iter().sum::<f64>() / n).collect();
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let c = xs.chunks_exact(d).map(|x| (x[i] - mean[i]) * (x[j] - mean[j])).sum::<f64>() / (n - 1.0);
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((c - target).abs());
        }
    }
    Ok((worst < 0.05, format!("max |C - I| entry {worst:.4} (limit 0.05)")))
}

// ------------------------------------------------------------------ 7

fn jittered(dims: usize, per_side: usize, frac: f64, seed: u64) -> lgdf::Result<ParticleSet> {
    let mut p = ParticleSet::lattice(dims, per_side, 1.0)?;
    let dx = 1.0 / per_side as f64;
    let mut r = rng::stream(seed, 0);
    for x in &mut p.positions {
        for c in x.iter_mut().take(dims) {
            *c += frac * dx * r.gen_range(-1.0..1.0);
        }
    }
    p.wrap();
    Ok(p)
}

fn with_densities(mut p: ParticleSet, params: &SphParams) -> ParticleSet {
    let grid = build_grid(&p, params);
    p.densities = density_summation(&p, params, &grid);
    p
}

fn sph_conservation() -> Outcome {
    use std::f64::consts::PI;
    let mut notes = Vec::new();
    let mut ok = true;

    // momentum over 1000 steps of a Taylor-Green vortex, N = 64^2
    let params = SphParams::lattice(2, 64, 1.0, 1.3, 10.0);
    let mut set = ParticleSet::lattice(2, 64, 1.0)?;
    for (x, v) in set.positions.iter().zip(set.velocities.iter_mut()) {
        let (sx, cx) = (2.0 * PI * x[0]).sin_cos();
        let (sy, cy) = (2.0 * PI * x[1]).sin_cos();
        v[0] = sx * cy;
        v[1] = -cx * sy;
    }
    let scale: f64 = set.velocities.iter().map(|v| params.mass * (v[0] * v[0] + v[1] * v[1]).sqrt()).sum();
    let mut sim = Simulation::new(params, set, ForcingField::none())?;
    let p0 = sim.momentum();
    sim.run(1000)?;
    let p1 = sim.momentum();
    let drift = (0..3).map(|k| (p1[k] - p0[k]).abs()).fold(0.0, f64::max) / scale;
    ok &= drift < 1e-10;
    notes.push(format!("momentum drift {drift:.2e} of sum m|v| (limit 1e-10)"));

    // cell list against all pairs, N = 8^3
    let params = SphParams::lattice(3, 8, 1.0, 1.3, 10.0);
    let mut set = jittered(3, 8, 0.3, 71)?;
    let mut r = rng::stream(72, 0);
    for v in &mut set.velocities {
        *v = [rng::normal(&mut r), rng::normal(&mut r), rng::normal(&mut r)];
    }
    let set = with_densities(set, &params);
    let grid = build_grid(&set, &params);
    let a = acceleration(&set, &params, &ForcingField::none(), &grid);
    let b = acceleration_brute_force(&set, &params, &ForcingField::none());
    let amax = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = a.iter().flatten().zip(b.iter().flatten()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    ok &= diff <= 1e-14 * amax;
    notes.push(format!("cell list vs brute force {:.1e} relative (limit 1e-14)", diff / amax));

    // uniform lattice density
    let params = SphParams::lattice(2, 64, 1.0, 1.3, 10.0);
    let set = with_densities(ParticleSet::lattice(2, 64, 1.0)?, &params);
    let dev = set.densities.iter().map(|r| (r / params.rho0 - 1.0).abs()).fold(0.0, f64::max);
    ok &= dev < 0.01;
    notes.push(format!("lattice density deviation {:.3}% (limit 1%)", 100.0 * dev));

    // Galilean boost; velocities are dyadic so v + U is exact
    let params = SphParams::lattice(2, 32, 1.0, 1.3, 10.0);
    let mut set = jittered(2, 32, 0.3, 73)?;
    let q = (2.0f64).powi(-20);
    for v in &mut set.velocities {
        v[0] = (r.gen_range(-1.0..1.0) / q).round() * q;
        v[1] = (r.gen_range(-1.0..1.0) / q).round() * q;
    }
    let set = with_densities(set, &params);
    let mut boosted = set.clone();
    for v in &mut boosted.velocities {
        v[0] += 0.375;
        v[1] -= 1.25;
    }
    let boosted = with_densities(boosted, &params);
    let grid = build_grid(&set, &params);
    let a0 = acceleration(&set, &params, &ForcingField::none(), &grid);
    let a1 = acceleration(&boosted, &params, &ForcingField::none(), &grid);
    let exact = a0 == a1 && set.densities == boosted.densities;
    ok &= exact;
    notes.push(format!("boosted accelerations bit-identical: {exact}"));
    Ok((ok, notes.join("; ")))
}

// ------------------------------------------------------------------ 8

fn vgt_reconstruction() -> Outcome {
    let mut r = rng::stream(81, 0);
    let mut notes = Vec::new();
    let mut ok = true;
    for (dims, per_side) in [(2, 32), (3, 16)] {
        let params = SphParams::lattice(dims, per_side, 1.0, 1.3, 10.0);
        let mut a = Mat3::zeros();
        for i in 0..dims {
            for j in 0..dims {
                a[(i, j)] = rng::normal(&mut r);
            }
        }
        let mut set = ParticleSet::lattice(dims, per_side, 1.0)?;
        for (x, v) in set.positions.iter().zip(set.velocities.iter_mut()) {
            for i in 0..dims {
                v[i] = (0..dims).map(|j| a[(i, j)] * (x[j] - 0.5)).sum();
            }
        }
        let set = with_densities(set, &params);
        let grid = build_grid(&set, &params);
        let m = estimate_vgt(&set, &params, &grid);
        let margin = 2.0 * params.h;
        let interior = |x: &[f64; 3]| x.iter().take(dims).all(|c| *c > margin && *c < 1.0 - margin);
        let (worst, count) = set
            .positions
            .iter()
            .zip(&m)
            .filter(|(x, _)| interior(x))
            .fold((0.0f64, 0usize), |(w, c), (_, mi)| (w.max((mi - a).norm() / a.norm()), c + 1));
        ok &= worst < 0.05 && count > 0;
        notes.push(format!("{dims}D: {count} interior particles, max relative error {:.3}%", 100.0 * worst));
    }
    Ok((ok, format!("{} (limit 5%)", notes.join("; "))))
}

// ------------------------------------------------------------------ 9

fn tensor_basis_algebra() -> Outcome {
    let mut r = rng::stream(91, 0);
    let (mut inv_err, mut basis_err) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let m = random_matrix(&mut r, 1.0);
        let rot = random_rotation(&mut r);
        let sp = split_sym_skew(&m);
        let spr = sp.rotated(&rot);
        let (i0, i1) = (invariants(&sp).0, invariants(&spr).0);
        for (a, b) in i0.iter().zip(&i1) {
            inv_err = inv_err.max((a - b).abs() / a.abs().max(1.0));
        }
        let (b0, b1) = (tensor_bases(&sp), tensor_bases(&spr));
        for (t0, t1) in b0.iter().zip(&b1) {
            let expect = rot * t0 * rot.transpose();
            basis_err = basis_err.max((t1 - expect).amax() / t0.amax().max(1.0));
        }
    }
    let m = random_matrix(&mut r, 1.0);
    let sym = split_sym_skew(&((m + m.transpose()) * 0.5));
    let bases = tensor_bases(&sym);
    let pattern = bases
        .iter()
        .enumerate()
        .all(|(k, b)| if k == 0 || k == 2 { b.amax() > 0.0 } else { b.iter().all(|v| *v == 0.0) });
    let ok = inv_err < 1e-12 && basis_err < 1e-12 && pattern;
    Ok((
        ok,
        format!(
            "invariant error {inv_err:.1e}, basis error {basis_err:.1e} (limit 1e-12); zero-rotation pattern exact: {pattern}"
        ),
    ))
}

// ------------------------------------------------------------------ 10

fn restricted_euler() -> Outcome {
    let cfg = ReConfig {
        dt: 1e-4,
        t_max: 5.0,
        integrator: ReIntegrator::Rk4,
        record_every: 1000,
        ..ReConfig::default()
    };
    let mut r = rng::stream(101, 0);
    let mut worst = 0.0f64;
    let mut blowups = 0;
    for _ in 0..20 {
        let m = traceless(&random_matrix(&mut r, 1.0));
        let m = m / m.norm();
        let tr = integrate_restricted_euler(&m, &cfg)?;
        worst = worst.max(tr.max_invariant_drift);
        blowups += tr.blowup.is_some() as usize;
    }
    let line = integrate_restricted_euler(&Mat3::from_diagonal(&nalgebra::Vector3::new(1.0, 1.0, -2.0)), &cfg)?;
    let event = line.blowup;
    let ok = worst < 1e-6 && event.is_some();
    Ok((
        ok,
        format!(
            "max invariant drift {worst:.1e} (limit 1e-6, {blowups}/20 random runs blew up); Vieillefosse-line singularity at t = {}",
            event.map_or("none".to_string(), |b| format!("{:.4}", b.t))
        ),
    ))
}

// ------------------------------------------------------------------ 11

fn random_spd(r: &mut impl Rng) -> Mat3 {
    let a = random_matrix(r, 0.5);
    a * a.transpose() + Mat3::identity()
}

fn tetrad_consistency() -> Outcome {
    let mut r = rng::stream(111, 0);
    let zero = Mat3::zeros();

    // drift only: the trace of M must not move
    let p = TetradParams {
        alpha: 0.5,
        noise_m: 0.0,
        noise_g: 0.0,
        dt: 1e-4,
        eig_floor: 1e-8,
        freeze_g: false,
        max_floor_fraction: 0.01,
    };
    let m0 = traceless(&random_matrix(&mut r, 1.0));
    let mut s = TetradState { m: m0 / m0.norm(), g: random_spd(&mut r) };
    let mut trace_step = 0.0f64;
    for _ in 0..10_000 {
        let (next, _) = tetrad_step(&s, &p, &zero, &zero)?;
        trace_step = trace_step.max((next.m.trace() - s.m.trace()).abs());
        s = next;
    }

    // alpha = 0 with g = I frozen is restricted Euler
    let p_re = TetradParams { alpha: 0.0, freeze_g: true, ..p };
    let mut s = TetradState::isotropic(m0 / m0.norm(), 1.0);
    let mut m_re = s.m;
    let mut re_diff = 0.0f64;
    for _ in 0..10_000 {
        s = tetrad_step(&s, &p_re, &zero, &zero)?.0;
        m_re = restricted_euler_step(&m_re, p.dt, ReIntegrator::Euler)?;
        re_diff = re_diff.max((s.m - m_re).amax());
    }

    // noisy run: g stays symmetric positive definite
    let p_noisy = TetradParams {
        alpha: 0.9,
        noise_m: 0.1,
        noise_g: 0.1,
        dt: 1e-4,
        eig_floor: TetradParams::default_floor(&Mat3::identity()),
        freeze_g: false,
        max_floor_fraction: 0.01,
    };
    let mut min_eig = f64::INFINITY;
    let mut finite = true;
    for member in 0..8 {
        let mut r = rng::stream(112, member);
        let m0 = traceless(&random_matrix(&mut r, 0.5));
        let mut s = TetradState::isotropic(m0, 1.0);
        for _ in 0..100_000 {
            let (zm, zg) = draw_noise(&mut r);
            s = tetrad_step(&s, &p_noisy, &zm, &zg)?.0;
            finite &= s.m.iter().chain(s.g.iter()).all(|v| v.is_finite());
            let sym = (s.g - s.g.transpose()).amax() == 0.0;
            let e = SymmetricEigen::new(s.g).eigenvalues.min();
            min_eig = min_eig.min(if sym { e } else { f64::NEG_INFINITY });
        }
    }
    let spd = finite && min_eig >= p_noisy.eig_floor * (1.0 - 1e-9);
    let ok = trace_step < 1e-10 && re_diff < 1e-8 && spd;
    Ok((
        ok,
        format!(
            "drift-only trace change per step {trace_step:.1e} (limit 1e-10); restricted-Euler mismatch {re_diff:.1e} (limit 1e-8); \
             8 x 1e5 noisy steps: min eigenvalue of g {min_eig:.3e} (floor {:.1e}), all finite: {finite}",
            p_noisy.eig_floor
        ),
    ))
}

// ------------------------------------------------------------------ 12

fn pair_dispersion() -> Outcome {
    let kappa = 0.05;
    let dt = 0.01;
    let growth = separation_growth(&SyntheticFlow::zero(), kappa, 0.1, dt, 100, 100_000, 121);
    let ts: Vec<f64> = (1..=growth.len()).map(|k| k as f64 * dt).collect();
    let n = ts.len() as f64;
    let (mt, mg) = (ts.iter().sum::<f64>() / n, growth.iter().sum::<f64>() / n);
    let slope = ts.iter().zip(&growth).map(|(t, g)| (t - mt) * (g - mg)).sum::<f64>()
        / ts.iter().map(|t| (t - mt).powi(2)).sum::<f64>();
    let expect = 4.0 * kappa * 2.0;
    let slope_err = (slope / expect - 1.0).abs();

    let flow = SyntheticFlow::generate(
        &SyntheticFlowConfig {
            n_modes: 32,
            k_min: 2.0 * std::f64::consts::PI,
            k_max: 16.0 * std::f64::consts::PI,
            spectrum_exponent: 4.0,
            correlation_time: Some(0.5),
            rms_velocity: 0.5,
        },
        122,
    )?;
    let ens = EnsembleSpec {
        kappa: 0.01,
        chi: ChiSpec { corr_scale_l: 1.0, chi0: 1.0 },
        ensemble_n: 500,
        dt: 0.005,
        max_t: None,
    };
    let seps = [0.02, 0.1, 0.25, 0.5, 0.75, 1.0];
    let est = seps
        .iter()
        .map(|&s| pair_correlation_estimate(&flow, &ens, s, 123))
        .collect::<lgdf::Result<Vec<_>>>()?;
    let monotone = est
        .windows(2)
        .all(|w| w[1].estimate <= w[0].estimate + 3.0 * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt());
    let values: Vec<String> = est.iter().map(|e| format!("{:.3}", e.estimate)).collect();
    let ok = slope_err < 0.02 && monotone;
    Ok((
        ok,
        format!(
            "separation slope {slope:.4} vs 4 kappa dims = {expect:.4} ({:.2}% off, limit 2%); estimates [{}] non-increasing within 3 sigma: {monotone}",
            100.0 * slope_err,
            values.join(", ")
        ),
    ))
}

// ------------------------------------------------------------------ 13

fn genturb_loop() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| lgdf::Error::Argument(format!("tempdir: {e}")))?;
    let (sph, ds, tr, gen) = (dir.path().join("sph"), dir.path().join("ds"), dir.path().join("tr"), dir.path().join("gen"));
    let sph_cfg: SphRunBlock = parse(json!({
        "dims": 2, "per_side": 64, "sound_c": 10.0,
        "forcing": {"kind": "stochastic", "amplitude": 3.0, "k_max_forced": 2, "ou_correlation_time": 0.2},
        "n_steps": 3000, "snapshot_every": 50
    }))?;
    harness::sph_run(&sph_cfg, &sph, 131)?;

    let ds_cfg: MakeDatasetBlock = parse(json!({
        "snapshots": sph, "skip_snapshots": 21, "min_snapshots": 32,
        "dataset": {"kind": "patches", "grid_n": 64, "patch": 16, "stride": 8}
    }))?;
    let m = harness::make_dataset(&ds_cfg, &ds, 132)?;
    let n_patches = m.metrics["count"].as_u64().unwrap_or(0);

    let tr_cfg: TrainBlock = parse(json!({
        "dataset": ds.join(harness::DATASET_FILE),
        "train": {"n_iterations": 4000, "batch_size": 64, "hidden": [768, 768], "weighting": "sigma_squared", "gaussian_skip": true,
                  "learning_rate": 1e-3, "final_learning_rate": 1e-5}
    }))?;
    harness::train(&tr_cfg, &tr, 133)?;

    let s_cfg: SampleBlock = parse(json!({
        "mode": "checkpoint", "dataset": ds.join(harness::DATASET_FILE), "checkpoint": tr.join(harness::CHECKPOINT_FILE),
        "n_samples": 256, "reverse": {"steps": 500, "t_min": 1e-3}, "diagnostic_trajectories": 0
    }))?;
    let m = harness::sample(&s_cfg, &gen, 134)?;
    let ratio: Vec<f64> = m.metrics["spectrum_ratio_shells_1_to_6"]
        .as_array()
        .map(|a| a.iter().filter_map(|v| v.as_f64()).collect())
        .unwrap_or_default();
    let ok = n_patches >= 2000 && ratio.len() == 6 && ratio.iter().all(|r| (0.5..=2.0).contains(r));
    let shown: Vec<String> = ratio.iter().map(|r| format!("{r:.2}")).collect();
    Ok((
        ok,
        format!(
            "{n_patches} patches; generated/GT spectrum ratio on shells 1-6 [{}] (within a factor of 2 required)",
            shown.join(", ")
        ),
    ))
}

fn parse<T: serde::de::DeserializeOwned>(v: serde_json::Value) -> lgdf::Result<T> {
    serde_json::from_value(v).map_err(|e| lgdf::Error::Argument(e.to_string()))
}
