//! Maximum-entropy goal selection for long-horizon multi-goal reinforcement
//! learning.
//!
//! The crate bundles kernel density estimation over achieved goals
//! ([`density`]), exact discrete entropy-gain mathematics ([`entropy`]),
//! behavioural-goal selection strategies including MEGA and OMEGA
//! ([`select`]), hindsight relabeling ([`replay`]), a goal-conditioned tabular
//! Q-learner ([`agent`]), two discrete environments ([`envs`]) and the
//! experiment harness ([`harness`]).

pub mod agent;
pub mod density;
pub mod entropy;
pub mod envs;
pub mod goal;
pub mod harness;
pub mod replay;
pub mod select;

pub use goal::{AchievedGoalBuffer, Goal, GoalBuffer};
