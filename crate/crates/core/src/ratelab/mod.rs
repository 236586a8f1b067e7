//! Finite-`n` checks of the rate results: the small-ball probability bound,
//! the theorem hypotheses with their rate multipliers, empirical contraction
//! curves, and the experiment runner that persists replication records.
//!
//! Almost-sure and in-probability conclusions are asymptotic; what is checked
//! here is their finite-`n` ingredients and median trends.

pub mod conditions;
pub mod config;
pub mod curve;
pub mod experiment;
pub mod lemma1;
pub mod neighborhoods;
pub mod rates;

pub use conditions::{check_conditions, check_conditions_with, ConditionCheck, ConditionReport, Relation};
pub use config::{DensitySpec, Experiment, ExperimentConfig, PriorSpec, RhoSpec};
pub use curve::{contraction_curve, posterior_radius, CurvePoint};
pub use experiment::{read_records, run_divergence, run_entropy, run_experiment, write_summary, ExperimentRecord};
pub use lemma1::{verify_lemma1, Lemma1Outcome};
pub use neighborhoods::{neighborhood_predicate, NeighborhoodKind, NeighborhoodSpec};
pub use rates::{rate_multiplier, RateConstants, Which};
