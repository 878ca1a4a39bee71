//! Fairness-preserving cohort selection.
//!
//! Choose `k` of `n` scored candidates so that selection probabilities never
//! separate two candidates more than their scores do, while maximizing either
//! linear utility (`Σ p_i s_i`) or maxmin utility (`min p_i / s_i`). Offline
//! algorithms see every score up front; the streaming state machines in
//! [`online_linear`] and [`online_ratio`] reject candidates as they arrive
//! and keep only a bounded pending set.

pub mod candidate;
pub mod error;
pub mod exec;
pub mod fairness;
pub mod harness;
pub mod offline;
pub mod online_linear;
pub mod online_ratio;
pub mod rounding;
pub mod water_fill;

pub use candidate::{AdjustMode, CandidateRecord, Cohort, MarginalVector, ScoreVector};
pub use error::{Error, Result};
pub use exec::{Execution, TrialRng};
pub use fairness::{check_fairness, linear_utility, maxmin_utility, worst_case_ratio, FairnessReport, UtilityVector};
pub use online_linear::{group_of, LinearGroupState, StreamDecision, Verdict};
pub use online_ratio::{RatioStreamState, ReservoirSample};
pub use offline::{linear_marginals, ratio_marginals, select_cohort, Objective};
pub use rounding::{dependent_round, round_nat, round_prob, RoundingInput, RoundingOutput};
pub use water_fill::{water_fill_down, water_fill_up};
