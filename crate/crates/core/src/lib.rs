//! Value-envelope shaping for tabular, layered, finite-horizon MDPs.
//!
//! The crate is organised around a two-stage pipeline:
//!
//! * [`offline`] turns a batch of behaviour-policy trajectories into a
//!   [`ValueEnvelope`]: per-step lower and upper bounds on `Q*` and `V*`.
//! * [`online`] runs optimistic value-iteration learners (plain UCBVI,
//!   Q-shaping, V-shaping and upper-bound-only shaping) whose exploration
//!   bonuses and clipping are driven by such an envelope.
//!
//! Around those sit the ground-truth model and exact dynamic-programming
//! oracle ([`mdp`], [`solve`]), trajectory sampling ([`sample`]), analysis
//! sets and scalars ([`diagnostics`]) and the explicit Q-shaping regret bound
//! ([`bound`]).
//!
//! Step indices are zero-based everywhere: a horizon-`H` MDP has steps
//! `0..H`, and value tables carry one extra terminal layer at index `H`
//! whose single state has value zero.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bound;
pub mod diagnostics;
pub mod envelope;
mod error;
pub(crate) mod math;
pub mod mdp;
pub mod offline;
pub mod online;
pub mod rng;
pub mod sample;
pub mod solve;
pub mod table;

pub use bound::{compute_q_bound, QBound, QBoundInputs};
pub use diagnostics::{envelope_report, pair_eff, pseudo_sub_sets, EffectiveSets, EnvelopeReport};
pub use envelope::ValueEnvelope;
pub use error::{Error, Result};
pub use mdp::{generate_mdp, LayeredMdp, MdpGenSpec, RewardMode, Shape};
pub use offline::{
    compute_envelopes, coverage_check, offline_bonus, split_dataset, width_bound_check,
    CoverageReport, OfflineConfig, SplitDataset, WidthBoundReport,
};
pub use online::{run_learner, run_learner_observed, Algorithm, Learner, OnlineConfig, RunRecord};
pub use sample::{collect_dataset, sample_trajectory, Dataset, Trajectory};
pub use solve::{evaluate_policy, occupancy, solve_optimal, OptimalSolution};
pub use table::{ActionTable, DeterministicPolicy, StateTable, StochasticPolicy};

/// Exploration-bonus constant multiplying the variance term.
pub const C1: f64 = 2.0;
/// Exploration-bonus constant multiplying the range term.
pub const C2: f64 = 14.0 / 3.0;
