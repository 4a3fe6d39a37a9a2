//! Explainable action advising for tabular reinforcement learners.

pub mod advising;
pub mod distill;
pub mod dtree;
pub mod gridworld;
pub mod harness;
pub mod rollout;
pub mod scalar;
pub mod seed;
pub mod tabular_rl;

pub use scalar::Scalar;

/// Double-precision aliases for the generic types.
pub type QTable64 = tabular_rl::QTable<f64>;
pub type TeamQ64 = tabular_rl::TeamQ<f64>;
pub type LearnerConfig64 = tabular_rl::LearnerConfig<f64>;
pub type StateFeatures64 = gridworld::StateFeatures<f64>;
pub type DecisionTree64 = dtree::DecisionTreePolicy<f64>;
pub type DecisionPath64 = dtree::DecisionPath<f64>;
pub type PartialTree64 = dtree::PartialTree<f64>;
pub type TreeTeam64 = distill::TreeTeam<f64>;
pub type EpisodeRecord64 = harness::EpisodeRecord<f64>;
