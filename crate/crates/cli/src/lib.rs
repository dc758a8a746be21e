//! Pipeline around `erasure-core` and `erasure-net`: configuration, file
//! formats and the commands of the `erasure` binary.
//!
//! * [`generate`] – semi-synthetic training sets and toy evaluation frames.
//! * [`training`] – fitting a variant's network.
//! * [`infer`] – heatmaps for evaluation frames.
//! * [`evaluate`] – pooled AP / FPR95 reports.
//! * [`ablate`] – several variants side by side.

pub mod ablate;
pub mod config;
pub mod dataset;
pub mod detect;
pub mod error;
pub mod evaluate;
pub mod external;
pub mod generate;
pub mod infer;
pub mod io;
pub mod training;

pub use config::{PipelineConfig, Variant};
pub use error::{PipelineError, Result};
