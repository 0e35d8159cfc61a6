//! End-to-end audit: ingest or generate, split, stratify, train, recommend,
//! evaluate and write reports plus a checksummed manifest.

mod config;
mod run;

pub use config::{
    validate_config, Algorithm, AlgorithmSelection, ConfigError, DataSource, PopularitySource,
    RunConfig, DEFAULT_OUTPUT_DIR, KEYS,
};
pub use run::{
    run_audit, statistics_csv, AlgorithmResult, OutputFile, PipelineError, RunSummary, Stage,
    MANIFEST_FILE,
};
