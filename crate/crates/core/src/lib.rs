//! Locally differentially private trajectory synthesis.
//!
//! Users discretize their trajectories on a shared grid and send perturbed
//! one-hot reports of their length and transitions. The curator debiases the
//! aggregated reports into a length distribution and a first-order mobility
//! model, from which new trajectories are sampled and evaluated.

pub mod attacks;
pub mod client;
pub mod curator;
pub mod datagen;
pub mod error;
pub mod grid;
pub mod metrics;
pub mod oue;
pub mod pipeline;
pub mod rng;
pub mod synth;

pub use attacks::{AttackConfig, AttackOutcome};
pub use client::{ClientReportBundle, PrivacyBudget, TransitionDomain};
pub use curator::{LengthDistribution, MobilityModel};
pub use error::{Error, Result};
pub use grid::{BoundingBox, CellId, CellTrajectory, Grid, Node, Point, RawTrajectory};
pub use metrics::{MetricsConfig, UtilityReport};
pub use oue::{Aggregator, Report};
pub use pipeline::{GridChoice, PipelineConfig, PipelineResult};
pub use rng::SeedStream;
pub use synth::SynthesisConfig;
