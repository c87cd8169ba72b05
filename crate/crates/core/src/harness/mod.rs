//! Configuration, experiment runs, grid search, rate checks and plotting.

mod config;
mod experiment;
mod plot;
mod search;

pub use config::{
    parse_config, parse_config_for, render_config, AlphaRule, ExperimentConfig, ProblemKind,
};
pub use experiment::{
    build_experiment, csv_file_name, csv_row, run_experiment, run_on, to_csv, write_csv,
    Experiment, RunOutput, Summary, CSV_HEADER,
};
pub use plot::{emit_plot_script, plot_script};
pub use search::{
    final_record, fit_slope, grid_search, rate_check, CandidateScore, GridResult, GridSpec,
    RateCheck, SelectionMetric, DEFAULT_BETAS,
};
