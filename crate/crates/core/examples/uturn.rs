//! U-turn sampling: noise training rows to `t_u`, reverse, and see how far
//! the result lands from where it started.

use lgdf::diag::{recommend_uturn_time, uturn_ensemble, UturnScanConfig};
use lgdf::diffusion::{GaussianMixture, MixtureMarginal, NoiseSchedule, ReverseConfig};

fn main() -> lgdf::Result<()> {
    let (ds, _) = GaussianMixture::symmetric_pair(&[2.0, 0.0]).sample_dataset(300, 1)?.whiten();
    let schedule = NoiseSchedule::default();
    let marginal = MixtureMarginal::new(schedule, ds.clone());
    let cfg = ReverseConfig { steps: 500, t_min: 1e-4 };

    let report = recommend_uturn_time(&ds, &schedule, &UturnScanConfig { n_grid: 20, ..Default::default() }, 2)?;
    println!("recommended t_u = {:.3} (criteria unmet: {})", report.recommended_t, report.criteria_unmet);

    for t_u in [1e-4, 0.05, 0.2, report.recommended_t, 1.0] {
        let out = uturn_ensemble(&ds, &schedule, &marginal, t_u, &cfg, 400, 3)?;
        let mut dist = 0.0;
        let mut same = 0;
        for (x, &o) in out.samples.chunks_exact(2).zip(&out.origins) {
            dist += x.iter().zip(ds.sample(o)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            same += (lgdf::diag::nearest_sample(&ds, x).0 == o) as usize;
        }
        println!("t_u = {t_u:.4}: mean distance to origin {:.3}, returned to origin {same}/400", dist / 400.0);
    }
    Ok(())
}
