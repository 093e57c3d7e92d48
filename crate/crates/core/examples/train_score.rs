//! Denoising score matching on a small mixture, then generation with the
//! trained network.

use lgdf::diag::ks_two_sample;
use lgdf::diffusion::{reverse_sde_ensemble, GaussianMixture, NoiseSchedule, ReverseConfig};
use lgdf::score_net::{train_score, LossWeighting, TrainConfig};

fn main() -> lgdf::Result<()> {
    let gt = GaussianMixture::symmetric_pair(&[2.0, 0.0]);
    let (ds, whitening) = gt.sample_dataset(1000, 1)?.whiten();
    let schedule = NoiseSchedule::default();
    let cfg = TrainConfig {
        n_iterations: 3000,
        hidden: vec![64, 64],
        weighting: LossWeighting::SigmaSquared,
        final_learning_rate: Some(1e-4),
        ..TrainConfig::default()
    };
    let out = train_score(&ds, &schedule, &cfg)?;
    let h = &out.loss_history;
    let tail = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    println!("loss: first 100 {:.4}, last 100 {:.4}", tail(&h[..100]), tail(&h[h.len() - 100..]));

    let mut xs = reverse_sde_ensemble(&out.net, &schedule, &ReverseConfig::default(), 2000, 2)?;
    for x in xs.chunks_exact_mut(2) {
        whitening.inverse_in_place(x);
    }
    let fresh = gt.sample(2000, 3)?;
    let col = |v: &[f64], k: usize| v.iter().skip(k).step_by(2).copied().collect::<Vec<_>>();
    println!("KS vs ground truth: {:.3} {:.3}", ks_two_sample(&col(&xs, 0), &col(&fresh, 0))?, ks_two_sample(&col(&xs, 1), &col(&fresh, 1))?);
    Ok(())
}
