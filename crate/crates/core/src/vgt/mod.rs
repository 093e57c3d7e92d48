//! Velocity-gradient algebra and reduced Lagrangian models: invariants and
//! tensor bases, pair features, restricted Euler and the tetrad model.

mod euler;
mod features;
mod tensor;
mod tetrad;

pub use euler::{
    integrate_restricted_euler, restricted_euler_rhs, restricted_euler_step, vieillefosse, vieillefosse_scale, BlowUp,
    ReConfig, ReIntegrator, ReTrajectory,
};
pub use features::{lles_pair_features, Normalizers, PairFeatures, PairInput};
pub use tensor::{
    basis_expansion, invariants, max_abs, q_r, random_matrix, random_rotation, split_sym_skew, tensor_bases,
    traceless, InvariantVec, Mat3, SymSkewSplit,
};
pub use tetrad::{
    draw_noise, tetrad_drift_m, tetrad_ensemble, tetrad_step, QrHistogram, TetradEnsembleConfig, TetradEnsembleStats,
    TetradParams, TetradState,
};
