//! Run configuration, checkpoints and CSV exchange formats.

mod checkpoint;
mod config;
mod csv;

pub use checkpoint::{
    load_checkpoint, load_checkpoint_for, save_checkpoint, Checkpoint, CHECKPOINT_VERSION,
};
pub use config::{parse_config, Problem, RunConfig, Target};
pub use csv::{
    export_grid, grid_from_csv, grid_to_csv, history_to_csv, read_grid, read_trace, write_grid,
    write_history, write_trace, GRID_HEADER, HISTORY_HEADER, TRACE_HEADER,
};
