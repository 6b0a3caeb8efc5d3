//! Age-of-Information sampling game engine.
//!
//! Platforms buy Poisson-rate samples and share one LCFS-preemptive M/M/1
//! delivery channel. This crate computes the one-shot equilibria and social
//! optima (complete and Bayesian information), the trigger-mechanism
//! cooperation profiles of the repeated game, and simulates both the repeated
//! game and the underlying queue.
//!
//! Platform indices are zero-based throughout: index 0 is the platform whose
//! cost may be private in the Bayesian setting.

pub mod error;
pub mod game_bayesian;
pub mod game_complete;
pub mod mech_bayesian;
pub mod mech_complete;
pub mod model;
pub mod queue_sim;
pub mod repeated_sim;
pub mod solvers;

pub use error::{AoiError, Result};
pub use game_bayesian::{BayesianEquilibriumResult, InfoAdvantageReport};
pub use game_complete::{EquilibriumResult, PoaOutcome};
pub use mech_bayesian::{ApproxCooperationPlan, ApproxThresholds, CheatReport, PlanRates};
pub use mech_complete::{CooperationPlan, Regime};
pub use model::{BayesianRateProfile, BayesianSpec, RateProfile, Realization, SystemParams};
pub use queue_sim::{AoiEstimate, Horizon, Preemption, QueueOptions};
pub use repeated_sim::{Mechanism, Monitoring, SimTrace, Strategy, StrategyKind};
pub use solvers::SolveOptions;
