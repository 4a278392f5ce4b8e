//! Core library for an offline-testable LLM safety evaluation harness:
//! emotional-intensity scoring, adversarial prompt operators, scripted mock
//! backends, judge orchestration, metric aggregation, and a resumable
//! campaign runner.

pub mod affect;
pub mod backends;
pub mod campaign;
pub mod corpus;
pub mod error;
pub mod judge;
pub mod metrics;
pub mod transform;

pub use error::{Error, Result};
