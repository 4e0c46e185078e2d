//! File formats, the chat-completions client, the end-to-end pipeline and
//! the `proleg-forge` command line on top of `proleg-core`.

pub mod cli;
pub mod error;
pub mod formats;
pub mod llm;
pub mod pipeline;

pub use error::{ForgeError, Stage};
pub use pipeline::{entailment_evaluate, run_pipeline, EntailmentReport, PipelineConfig};
