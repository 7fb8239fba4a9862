//! Detecting if, when, and by whom task milestones were reached in
//! speaker-tagged meeting transcripts.

pub mod baseline;
pub mod detector;
pub mod evaluation;
pub mod exec;
pub mod gateway;
pub mod prompting;
pub mod segmentation;
pub mod synth;
pub mod text;
pub mod transcript;

pub use exec::Execution;
