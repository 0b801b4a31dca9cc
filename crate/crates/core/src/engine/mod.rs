//! Synthetic corpus generation, quality screening, error injection and
//! training-sample formatting.

pub mod config;
pub mod filter;
pub mod generate;
pub mod perturb;
pub mod samples;

pub use config::{GeneratorConfig, ValueGenerator};
pub use filter::{quality_filter, FilterRule, FilterVerdict};
pub use generate::{chart_id, derive_seed, generate_chart, generate_corpus, GeneratedChart, MAX_ATTEMPTS};
pub use perturb::{inject_errors, InjectedError, PerturbationSpec, Perturbed};
pub use samples::{build_training_samples, ImageRole, SampleKind, SampleTarget, TrainingSample, TrainingSet};
