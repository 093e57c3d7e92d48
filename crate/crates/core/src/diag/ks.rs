use crate::error::{Error, Result};

pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn sorted(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::Argument("KS statistic of an empty sample".into()));
    }
    if samples.iter().any(|v| v.is_nan()) {
        return Err(Error::Argument("KS statistic of a sample containing NaN".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    Ok(xs)
}

/// One-sample Kolmogorov–Smirnov distance `sup |F_n - F|` against `cdf`.
///
/// Both sides of every jump of the empirical CDF are compared, with the
/// reference evaluated just below the jump, so a step-function reference
/// (such as the sample's own ECDF) is handled exactly.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    let xs = sorted(samples)?;
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < xs.len() {
        let v = xs[i];
        let below = i as f64 / n;
        while i < xs.len() && xs[i] == v {
            i += 1;
        }
        let at = i as f64 / n;
        d = d.max((at - cdf(v)).abs()).max((below - cdf(v.next_down())).abs());
    }
    Ok(d)
}

/// Two-sample KS distance between empirical CDFs.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    let xa = sorted(a)?;
    let xb = sorted(b)?;
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < xa.len() && j < xb.len() {
        let v = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= v {
            i += 1;
        }
        while j < xb.len() && xb[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// KS distance of the standardized sample (own mean and std) to N(0, 1):
/// a test of Gaussian shape, not of location or scale.
pub fn ks_gaussianity(samples: &[f64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::Argument("Gaussianity test needs >= 2 samples".into()));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    if !(var > 0.0) {
        return Ok(1.0);
    }
    let sd = var.sqrt();
    let z: Vec<f64> = samples.iter().map(|x| (x - mean) / sd).collect();
    ks_statistic(&z, standard_normal_cdf)
}
