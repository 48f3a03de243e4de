//! Operational shell: seeded RNG streams, datasets, configuration and result files.

pub mod config;
pub mod idx;
pub mod results;
pub mod rng;
pub mod run;
pub mod synth;

pub use config::{load_config, parse_config, ExperimentConfig, ExperimentKind};
pub use idx::{load_mnist_idx, write_idx};
pub use rng::{derive_seed, RngStream};
pub use synth::{blobs_2d, generate_synthetic, rings, BlobParams, RingParams, SyntheticSpec};
pub use results::{emit_results, results_csv, summarize, GroupSummary, ResultRow};
pub use run::{play_trials, run_experiment, RunOutput};
