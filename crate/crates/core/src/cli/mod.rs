//! Configuration files and the commands behind the `robustrl` binary.

mod commands;
mod config;

pub use commands::{
    cmd_compare, cmd_eval, cmd_grid, cmd_llc, cmd_train, effective_workers, resolve_checkpoints,
    seed_dir, CompareRow, EvalSummary, LlcMeta, RunMeta, COMPARE_CSV, EVAL_JSON, FINAL_CHECKPOINT,
    LLC_META, RUN_META, THREADS_ENV, TRAIN_LOG,
};
pub use config::{
    locate_key, AlgorithmSection, EnvSection, EvalSection, GridSection, LlcSection, OutputSection,
    RunConfig, TrainSection,
};
