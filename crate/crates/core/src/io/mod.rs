//! Run documents, orchestration and output files.

mod config;
mod output;
mod runner;

pub use config::{parse_config, to_toml, RunConfig};
pub use output::{
    read_history, write_field, write_history, DirectorySink, FieldFormat, HISTORY_HEADER,
};
pub use runner::{apply_grid, parse_grid, run_setup, GridAxis, RunSummary};
