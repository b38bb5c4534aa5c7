//! Reward sign-flip attacks on a tabular SARSA learner in stochastic
//! goal-only-rewards gridworlds.
//!
//! - [`gridworld`]: random maps, slip dynamics, shortest paths, map files
//! - [`agent`]: Q-table, exploration strategies, SARSA episodes
//! - [`adversary`]: the reward-channel attacker and its cost accounting
//! - [`metrics`]: discounted returns, smoothing, aggregation, cost curves
//! - [`harness`]: experiment sweeps, seeding, breakage, results on disk
//! - [`plot`]: SVG figures from curve files

pub mod adversary;
pub mod agent;
pub mod error;
pub mod gridworld;
pub mod harness;
pub mod metrics;
pub mod plot;
pub mod verify;

pub use adversary::{attach, intercept, Adversary, AdversaryConfig, AdversaryState, IdentityChannel, RewardChannel};
pub use agent::{dynamic_epsilon, run_episode, select_action, EpisodeRngs, ExplorationStrategy, LearnerConfig, QTable};
pub use error::{ConfigError, GenerationError, HarnessError, MapParseError, MetricsError};
pub use gridworld::{generate_map, Direction, GridWorld, MapSpec, Pos, StateId, StepOutcome};
pub use harness::{attacks_to_breakage, run_cell, run_sweep, Breakage, ExperimentConfig, SweepResult};
pub use metrics::{
    aggregate, discounted_return, performance_vs_cost, sliding_window_smooth, Curve, CurvePoint, EpisodeRecord,
};
