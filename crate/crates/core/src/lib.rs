//! Generation and evaluation of requirements-elicitation interview scripts.

pub mod analytics;
pub mod chaingen;
pub mod knowledge;
pub mod quality;
pub mod rubric;
pub mod transcript;
