//! Unadjusted Langevin dynamics: a long chain on a standard normal and an
//! annealed run into a two-mode mixture.

use lgdf::diffusion::{
    annealed_langevin_sample, langevin_sample, AnnealSchedule, GaussianMixtureTarget, GaussianTarget, LangevinConfig,
};

fn main() -> lgdf::Result<()> {
    let d = 3;
    let chain = langevin_sample(&GaussianTarget::standard(d), &LangevinConfig::new(0.01, 200_000), &[3.0; 3], 1)?;
    let xs = &chain.states[5000 * d..];
    let n = (xs.len() / d) as f64;
    for k in 0..d {
        let m = xs.iter().skip(k).step_by(d).sum::<f64>() / n;
        let v = xs.iter().skip(k).step_by(d).map(|x| (x - m).powi(2)).sum::<f64>() / n;
        println!("coordinate {k}: mean {m:+.3}, variance {v:.3}");
    }

    let target = GaussianMixtureTarget {
        means: vec![vec![-3.0, 0.0], vec![3.0, 0.0]],
        weights: vec![0.5, 0.5],
        std: 0.5,
    };
    let cfg = LangevinConfig::new(0.01, 3000);
    let ramp = AnnealSchedule::Linear { ramp_steps: 2000 };
    let right = (0..200)
        .map(|s| annealed_langevin_sample(&target, &ramp, &cfg, s))
        .collect::<lgdf::Result<Vec<_>>>()?
        .iter()
        .filter(|x| x[0] > 0.0)
        .count();
    println!("annealed chains ending in the right mode: {right} / 200");
    Ok(())
}
