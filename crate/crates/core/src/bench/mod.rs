//! Instance loading and generation, experiment orchestration, and reports.

mod experiment;
mod mtx;
mod report;
mod synth;

pub(crate) use experiment::summarize;
pub use experiment::{
    run_experiment, BenchError, ExperimentSpec, InstanceSource, MethodResult, MethodSpec,
    DEFAULT_TIME_BUDGET, DEFAULT_TRIALS,
};
pub use mtx::{
    parse_matrix_market, read_matrix_market, read_vector_market, write_matrix_market,
    write_matrix_market_to, MtxError,
};
pub use report::{
    emit_history_csv, read_history_csv, BenchReport, HistoryPoint, HistoryTable, InstanceMeta,
    Metric,
};
pub use synth::{
    gen_chessboard_boundary, gen_gaussian, gen_sparse_random, make_consistent_system,
    make_ridge_problem, RidgeProblem,
};
