//! Restricted Euler dynamics of the velocity gradient: invariant
//! conservation and the finite-time singularity.

use nalgebra::Vector3;

use lgdf::rng;
use lgdf::vgt::{integrate_restricted_euler, q_r, random_matrix, traceless, Mat3, ReConfig};

fn main() -> lgdf::Result<()> {
    let cfg = ReConfig { t_max: 5.0, ..ReConfig::default() };
    let mut r = rng::stream(1, 0);
    for k in 0..5 {
        let m = traceless(&random_matrix(&mut r, 1.0));
        let tr = integrate_restricted_euler(&(m / m.norm()), &cfg)?;
        let (q, rr) = q_r(&tr.samples[0].1);
        println!(
            "run {k}: Q0 {q:+.3} R0 {rr:+.3}  invariant drift {:.1e}  blow-up {:?}",
            tr.max_invariant_drift,
            tr.blowup.map(|b| b.t)
        );
    }
    let line = integrate_restricted_euler(&Mat3::from_diagonal(&Vector3::new(1.0, 1.0, -2.0)), &cfg)?;
    println!("Vieillefosse line: singularity at t = {:?} (analytic 1.0)", line.blowup.map(|b| b.t));
    Ok(())
}
