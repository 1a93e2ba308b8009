//! Weak supervision, stance detection and propensity-based causal effect
//! estimation for social media policy studies.

pub mod causal;
pub mod classify;
pub mod cohort;
pub mod corpus;
pub mod error;
pub mod metrics;
pub mod pipeline;
pub mod stance;
pub mod synth;
pub mod text;
pub mod vector;
pub mod weaklabel;

pub use error::{Error, Result};
