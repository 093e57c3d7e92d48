//! Stochastic tetrad ensemble and its joint (Q, R) statistics.

use lgdf::vgt::{tetrad_ensemble, TetradEnsembleConfig, TetradParams};

fn main() -> lgdf::Result<()> {
    let cfg = TetradEnsembleConfig {
        params: TetradParams {
            alpha: 0.9,
            noise_m: 0.2,
            noise_g: 0.1,
            dt: 1e-3,
            eig_floor: 1e-6,
            freeze_g: false,
            max_floor_fraction: 0.01,
        },
        n_samples: 200,
        n_steps: 2000,
        initial_m_scale: 0.3,
        initial_g: 1.0,
        n_bins: 20,
        q_range: None,
        r_range: None,
    };
    let stats = tetrad_ensemble(&cfg, 1)?;
    println!("<Q> = {:.4}, <R> = {:.4}", stats.mean_q, stats.mean_r);
    println!("mean eigenvalues of g: {:?}", stats.g_eigen_mean);
    println!("floor events: {}, warnings: {:?}", stats.floor_events, stats.warnings);
    if let Some(h) = &stats.histogram {
        println!("histogram mass: {:.3}", h.integral());
    }
    Ok(())
}
