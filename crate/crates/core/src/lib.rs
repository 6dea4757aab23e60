//! Exact-score diffusion sampling on Gaussian mixtures under classifier-free
//! guidance and its non-linear variants.
//!
//! The forward process is the Ornstein–Uhlenbeck SDE `dx = -x dt + sqrt(2) dB`.
//! Every score is available in closed form, so guided trajectories can be
//! simulated without any learned model and compared with analytic results.

pub mod analysis;
pub mod error;
pub mod guidance;
mod knn;
pub mod mixture;
pub mod sampler;
pub mod scores;
pub mod theory;

pub use analysis::{
    alignment_gap, ensemble_stats, final_histogram, knn_jsd, score_diff_curve, Histogram,
    PointSet, SummaryStats,
};
pub use error::{Error, Result};
pub use guidance::{guided_score, phi_weight, regime2_inertness_bound, GuidanceSpec, WeightKnot};
pub use mixture::{
    delta, gamma, ou_scale_and_variance, speciation_time, ClassLabel, MixtureKind, MixtureSpec,
    Schedule,
};
pub use sampler::{
    simulate, simulate_full, simulate_projected_q, simulate_transverse, simulate_with_workers,
    InitialCondition, NoiseMode, SimMode, SimPlan, TrajectoryEnsemble,
};
pub use scores::{cond_score, pair_reduction_check, score_diff, uncond_score, ScoreEval};
