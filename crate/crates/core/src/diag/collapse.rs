use serde::{Deserialize, Serialize};

use crate::diffusion::{Dataset, PathState};
use crate::error::{Error, Result};

/// Default memorization radius, in whitened units.
pub const DEFAULT_COLLAPSE_EPSILON: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseDiagnostic {
    pub reverse_times: Vec<f64>,
    pub min_dist_to_trainset: Vec<f64>,
    pub memorized: bool,
    /// Nearest training row to the final state, when memorized.
    pub match_index: Option<usize>,
}

/// Euclidean distance from `x` to its nearest dataset row, with that row.
pub fn nearest_sample(dataset: &Dataset, x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (s, row) in dataset.rows().enumerate() {
        let d2: f64 = row.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2 < best.1 {
            best = (s, d2);
        }
    }
    (best.0, best.1.sqrt())
}

/// Track the distance from a reverse trajectory to the training set; the
/// run counts as memorized when its final state is within `epsilon` of a
/// training row.
pub fn collapse_diagnostic(trajectory: &[PathState], dataset: &Dataset, epsilon: f64) -> Result<CollapseDiagnostic> {
    let last = trajectory
        .last()
        .ok_or_else(|| Error::Argument("collapse diagnostic of an empty trajectory".into()))?;
    if trajectory.iter().any(|s| s.x.len() != dataset.dim()) {
        return Err(Error::Argument("trajectory and dataset dimensions differ".into()));
    }
    let min_dist_to_trainset = trajectory.iter().map(|s| nearest_sample(dataset, &s.x).1).collect();
    let (idx, d) = nearest_sample(dataset, &last.x);
    let memorized = d < epsilon;
    Ok(CollapseDiagnostic {
        reverse_times: trajectory.iter().map(|s| s.t).collect(),
        min_dist_to_trainset,
        memorized,
        match_index: memorized.then_some(idx),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{reverse_sde_trajectory, MixtureMarginal, NoiseSchedule, ReverseConfig};

    fn ds() -> Dataset {
        Dataset::new(2, vec![0.0, 0.0, 3.0, 4.0], "two").unwrap()
    }

    #[test]
    fn ends_on_sample() {
        let traj = vec![
            PathState { t: 1.0, x: vec![1.0, 1.0] },
            PathState { t: 0.5, x: vec![3.0, 4.0] },
        ];
        let c = collapse_diagnostic(&traj, &ds(), 0.05).unwrap();
        assert!(c.memorized);
        assert_eq!(c.match_index, Some(1));
        assert_eq!(c.min_dist_to_trainset[1], 0.0);
        assert_eq!(c.reverse_times, vec![1.0, 0.5]);
    }

    #[test]
    fn stays_away() {
        let traj = vec![PathState { t: 0.1, x: vec![1.5, 2.0] }];
        let c = collapse_diagnostic(&traj, &ds(), 0.05).unwrap();
        assert!(!c.memorized);
        assert_eq!(c.match_index, None);
        assert!(collapse_diagnostic(&[], &ds(), 0.05).is_err());
    }

    #[test]
    fn single_sample_reverse_run_memorizes() {
        let data = Dataset::new(2, vec![0.7, -0.4], "one").unwrap();
        let sched = NoiseSchedule::default();
        let m = MixtureMarginal::new(sched, data.clone());
        for seed in 0..5 {
            let traj = reverse_sde_trajectory(&m, &sched, &ReverseConfig::default(), seed).unwrap();
            let c = collapse_diagnostic(&traj, &data, DEFAULT_COLLAPSE_EPSILON).unwrap();
            assert!(c.memorized, "seed {seed}: {:?}", c.min_dist_to_trainset.last());
            assert_eq!(c.match_index, Some(0));
        }
    }
}
