//! Distribution distances, U-turn diagnostics and collapse detection.

mod collapse;
mod ks;
mod metrics;
mod uturn;

pub use collapse::{collapse_diagnostic, nearest_sample, CollapseDiagnostic, DEFAULT_COLLAPSE_EPSILON};
pub use ks::{ks_gaussianity, ks_statistic, ks_two_sample, standard_normal_cdf};
pub use metrics::{distribution_metrics, histogram_kl, DistributionMetrics, KL_REGULARIZATION};
pub use uturn::{
    forward_autocorrelation, recommend_uturn_time, uturn_ensemble, uturn_sample, weighted_score_norm,
    weighted_score_norm_estimate, McEstimate, UturnOutput, UturnReport, UturnScanConfig, UturnThresholds,
};
