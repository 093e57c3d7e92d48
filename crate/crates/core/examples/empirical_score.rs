//! Sampling with the score of the noised empirical distribution, which
//! reproduces training points once the noise is gone.

use lgdf::diag::{collapse_diagnostic, nearest_sample, DEFAULT_COLLAPSE_EPSILON};
use lgdf::diffusion::{reverse_sde_ensemble, reverse_sde_trajectory, Dataset, MixtureMarginal, NoiseSchedule, ReverseConfig};

fn main() -> lgdf::Result<()> {
    let rows = vec![vec![1.0, 1.0], vec![-1.0, 0.5], vec![0.0, -1.5]];
    let ds = Dataset::from_rows(&rows, "three points")?;
    let schedule = NoiseSchedule::default();
    let marginal = MixtureMarginal::new(schedule, ds.clone());
    let cfg = ReverseConfig::default();

    let xs = reverse_sde_ensemble(&marginal, &schedule, &cfg, 300, 7)?;
    let mut hits = [0usize; 3];
    for x in xs.chunks_exact(2) {
        hits[nearest_sample(&ds, x).0] += 1;
    }
    println!("samples per training point: {hits:?}");

    let traj = reverse_sde_trajectory(&marginal, &schedule, &cfg, 8)?;
    let c = collapse_diagnostic(&traj, &ds, DEFAULT_COLLAPSE_EPSILON)?;
    for (t, d) in c.reverse_times.iter().zip(&c.min_dist_to_trainset).step_by(100) {
        println!("t = {t:.3}: distance to nearest training point {d:.4}");
    }
    println!("memorized: {} (training point {:?})", c.memorized, c.match_index);
    Ok(())
}
