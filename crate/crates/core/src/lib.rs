//! Elo-MOV: an Elo-style rating engine driven by the discretized margin of
//! victory.
//!
//! Game outcomes are bucketed into ordinal categories (strong away win, weak
//! away win, draw, ...) and modelled with an adjacent-categories logistic
//! model over the rating difference. The resulting online update has exactly
//! the familiar Elo form `theta += K * (score - expected_score)`; only the
//! score set and the expected-score curve change with the number of
//! categories. Bradley-Terry (binary games) and the Davidson draw model
//! (ternary games) fall out as the J=1 and J=2 special cases.
//!
//! The crate covers the full workflow:
//!
//! - [`model`]: the category model, likelihood, and score map;
//! - [`estimation`]: closed-form coefficients from category frequencies,
//!   maximum-likelihood fitting across seasons, and the adaptation-step sweep;
//! - [`engine`]: the online rating update and season runs;
//! - [`evaluation`]: merged ternary predictions, logarithmic score, and the
//!   betting-odds baseline;
//! - [`data`]: season CSV ingestion (football-data.co.uk layout) and the
//!   canonical season JSON format;
//! - [`simulator`]: synthetic leagues drawn from a known model, used as the
//!   statistical oracle in tests.

pub mod data;
pub mod engine;
pub mod estimation;
pub mod evaluation;
pub mod model;
pub mod simulator;

pub use data::{DataError, MatchRecord, Odds, SeasonDataset};
pub use engine::{EngineConfig, EngineError, GameUpdate, SeasonRun, SkillTable};
pub use estimation::{
    EstimationError, FitConfig, FitInit, FitReport, FrequencyTable, KSweep,
};
pub use evaluation::{EvalConfig, EvalError, EvalReport, TernaryOutcome, TernaryProbs};
pub use model::{DiscretizationScheme, ModelCoefficients, ModelError, ScoreMap};
pub use simulator::{SimError, SimSpec};
