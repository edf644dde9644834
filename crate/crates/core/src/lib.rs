//! Gradient-clipping stochastic optimisers for convex problems with
//! Hölder-continuous gradients and heavy-tailed gradient noise.
//!
//! The crate provides
//!
//! * the clipping operator and a dense [`Vector`] type ([`linalg`], [`clip`]),
//! * problem and stochastic-oracle abstractions with certified smoothness
//!   ([`problem`], [`noise`], [`oracle`], [`problems`]),
//! * the theorem-prescribed parameter schedules ([`schedules`]),
//! * clipped-SSTM, clipped-SGD and their restarted variants ([`sstm`], [`sgd`]),
//! * a deterministic Monte-Carlo harness with high-probability statistics
//!   ([`harness`], [`stats`]).

pub mod clip;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod noise;
pub mod num;
pub mod oracle;
pub mod problem;
pub mod problems;
pub mod record;
pub mod schedules;
pub mod sgd;
pub mod sstm;
pub mod stats;

pub use clip::{clip, clip_coordinatewise};
pub use error::{Error, Result};
pub use linalg::Vector;
pub use noise::{NoiseModel, NoiseSpec};
pub use oracle::{batched_stochastic_gradient, holder_certificate_check, StochasticGradientSample};
pub use problem::{HolderSmoothness, Objective, ProblemInstance};
pub use problems::{make_noise, make_problem, ProblemSpec};
pub use record::{RecordPolicy, RunRecord, TrajectoryPoint};
pub use harness::{
    clip_bias_monte_carlo, run_experiment, DerivedParams, ExperimentSpec, ExperimentSummary, Method,
    TrialSummary,
};
pub use schedules::{
    schedule_inequality_check, restart_plan_sgd, restart_plan_sstm, sgd_params, sgd_theorem_params,
    sstm_params, sstm_schedule, sstm_theorem_params, sstm_unit_batch_a, sstm_unit_batch_params,
    ParamMode, ParamOverrides, RestartPlan, ScheduleEntry, ScheduleInputs, SgdConfig, SstmConfig,
};
pub use sgd::{run_clipped_sgd, run_restarted_sgd, ClipMode, SgdOptions};
pub use sstm::{run_restarted_sstm, run_sstm};

/// Seeded random stream used for every stochastic component.
///
/// ChaCha8 gives a portable, platform-independent stream so that
/// trajectories are reproducible bit-for-bit from a `u64` seed.
pub type TrialRng = rand_chacha::ChaCha8Rng;

/// Build the random stream for a given seed.
pub fn trial_rng(seed: u64) -> TrialRng {
    use rand::SeedableRng;
    TrialRng::seed_from_u64(seed)
}
