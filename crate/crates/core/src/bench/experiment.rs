//! Experiment orchestration: one instance, a grid of methods, several trials.

use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::mtx::{read_matrix_market, MtxError};
use super::report::{BenchReport, HistoryPoint, InstanceMeta, Metric};
use super::synth::{gen_chessboard_boundary, gen_gaussian, make_consistent_system, make_ridge_problem};
use crate::engine::{
    solve, EngineError, ResidualMode, SolveConfig, SolveReport, StopRule, DEFAULT_MAX_ITERS,
};
use crate::matrix::Matrix;
use crate::ridge::{ridge_solve, NormMode, RidgeConfig, RidgeMethod};
use crate::selection::SelectionStrategy;

pub const DEFAULT_TRIALS: usize = 5;
pub const DEFAULT_TIME_BUDGET: Duration = Duration::from_secs(600);

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Mtx(#[from] MtxError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("malformed report: {0}")]
    Format(String),
    #[error("invalid experiment: {0}")]
    Spec(String),
}

impl BenchError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        BenchError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Debug, Clone)]
pub enum InstanceSource {
    MatrixMarketFile { path: PathBuf, transpose: bool },
    GaussianSynthetic { m: usize, n: usize, seed: u64 },
    /// Chessboard-complex boundary matrix, see [`gen_chessboard_boundary`].
    Chessboard { rows: usize, cols: usize, dim: usize },
    InMemory { name: String, matrix: Matrix },
}

impl InstanceSource {
    pub fn name(&self) -> String {
        match self {
            InstanceSource::MatrixMarketFile { path, transpose } => {
                let stem = path
                    .file_stem()
                    .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into());
                if *transpose {
                    format!("{stem}^T")
                } else {
                    stem
                }
            }
            InstanceSource::GaussianSynthetic { m, n, seed } => format!("gaussian-{m}x{n}-s{seed}"),
            InstanceSource::Chessboard { rows, cols, dim } => format!("ch{rows}-{cols}-b{dim}"),
            InstanceSource::InMemory { name, .. } => name.clone(),
        }
    }

    pub fn load(&self) -> Result<Matrix, BenchError> {
        match self {
            InstanceSource::MatrixMarketFile { path, transpose } => {
                Ok(read_matrix_market(path, *transpose)?)
            }
            InstanceSource::GaussianSynthetic { m, n, seed } => {
                if *m == 0 || *n == 0 {
                    return Err(BenchError::Spec(format!("empty Gaussian shape {m}x{n}")));
                }
                Ok(gen_gaussian(*m, *n, *seed))
            }
            InstanceSource::Chessboard { rows, cols, dim } => {
                if *dim + 1 > (*rows).min(*cols) {
                    return Err(BenchError::Spec(format!(
                        "a {rows}x{cols} board holds no {}-rook placement",
                        dim + 1
                    )));
                }
                Ok(gen_chessboard_boundary(*rows, *cols, *dim))
            }
            InstanceSource::InMemory { matrix, .. } => Ok(matrix.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MethodSpec {
    Linear(SelectionStrategy),
    Ridge {
        method: RidgeMethod,
        norms: NormMode,
        tau: f64,
    },
}

impl MethodSpec {
    pub fn label(&self) -> String {
        match self {
            MethodSpec::Linear(s) => s.to_string(),
            MethodSpec::Ridge { method, norms, tau } => {
                let n = match norms {
                    NormMode::Exact => "exact",
                    NormMode::Estimated => "estimated",
                };
                format!("{method}[{n},tau={tau}]")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub source: InstanceSource,
    pub methods: Vec<MethodSpec>,
    pub tol: f64,
    pub trials: usize,
    pub seed_base: u64,
    pub max_iters: usize,
    pub time_budget: Option<Duration>,
    pub stop_rule: StopRule,
    pub residual_mode: ResidualMode,
    pub record_history: bool,
    pub history_stride: usize,
}

impl ExperimentSpec {
    pub fn new(source: InstanceSource, methods: Vec<MethodSpec>, tol: f64) -> Self {
        Self {
            source,
            methods,
            tol,
            trials: DEFAULT_TRIALS,
            seed_base: 0,
            max_iters: DEFAULT_MAX_ITERS,
            time_budget: Some(DEFAULT_TIME_BUDGET),
            stop_rule: StopRule::KnownSolutionError,
            residual_mode: ResidualMode::Auto,
            record_history: false,
            history_stride: 1,
        }
    }

    pub fn trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn seed_base(mut self, seed: u64) -> Self {
        self.seed_base = seed;
        self
    }

    pub fn max_iters(mut self, n: usize) -> Self {
        self.max_iters = n;
        self
    }

    pub fn record_history(mut self, stride: usize) -> Self {
        self.record_history = true;
        self.history_stride = stride;
        self
    }

    fn validate(&self) -> Result<(), BenchError> {
        if self.trials == 0 {
            return Err(BenchError::Spec("trials must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(BenchError::Spec("no methods given".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: String,
    pub trials: usize,
    pub mean_it: f64,
    pub mean_seconds: f64,
    /// Some trial ended without converging.
    pub failed: bool,
    pub iterations: Vec<usize>,
    pub seconds: Vec<f64>,
    pub setup_seconds: f64,
    pub terminations: Vec<String>,
    pub final_metrics: Vec<Metric>,
    pub matvecs: Vec<usize>,
    /// First-trial history when recording was requested.
    pub history: Option<Vec<HistoryPoint>>,
}

/// Runs every method for `trials` seeds `seed_base + t` on one instance.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<BenchReport, BenchError> {
    spec.validate()?;
    let a = spec.source.load()?;
    let instance = InstanceMeta {
        name: spec.source.name(),
        m: a.rows(),
        n: a.cols(),
        nnz: a.nnz(),
        frobenius: a.frobenius_norm(),
    };
    let stride = if spec.record_history {
        spec.history_stride
    } else {
        usize::MAX
    };

    let needs_linear = spec.methods.iter().any(|m| matches!(m, MethodSpec::Linear(_)));
    let system = if needs_linear {
        Some(make_consistent_system(a.clone())?)
    } else {
        None
    };

    let mut methods = Vec::with_capacity(spec.methods.len());
    for method in &spec.methods {
        let ridge_problem = match method {
            MethodSpec::Ridge { tau, .. } => Some(make_ridge_problem(a.clone(), *tau)?),
            MethodSpec::Linear(_) => None,
        };
        let mut runs: Vec<SolveReport> = Vec::with_capacity(spec.trials);
        for t in 0..spec.trials {
            let seed = spec.seed_base + t as u64;
            let report = match method {
                MethodSpec::Linear(strategy) => {
                    let mut cfg = SolveConfig::new(*strategy)
                        .tol(spec.tol)
                        .max_iters(spec.max_iters)
                        .seed(seed)
                        .stop_rule(spec.stop_rule)
                        .residual_mode(spec.residual_mode)
                        .history_stride(stride);
                    cfg.time_budget = spec.time_budget;
                    solve(system.as_ref().expect("linear system built"), &cfg)?
                }
                MethodSpec::Ridge { method, norms, .. } => {
                    let p = ridge_problem.as_ref().expect("ridge problem built");
                    let mut cfg = RidgeConfig::new(*method, *norms)
                        .tol(spec.tol)
                        .max_iters(spec.max_iters)
                        .seed(seed)
                        .stop_rule(spec.stop_rule)
                        .x_star(p.x_star.clone())
                        .history_stride(stride);
                    cfg.time_budget = spec.time_budget;
                    ridge_solve(&p.a, &p.b, p.tau, &cfg)?.solve
                }
            };
            runs.push(report);
        }
        methods.push(summarize(method.label(), &runs, spec.record_history));
    }

    Ok(BenchReport {
        instance,
        tol: spec.tol,
        trials: spec.trials,
        seed_base: spec.seed_base,
        methods,
    })
}

pub(crate) fn summarize(label: String, runs: &[SolveReport], with_history: bool) -> MethodResult {
    let k = runs.len() as f64;
    let iterations: Vec<usize> = runs.iter().map(|r| r.iterations).collect();
    let seconds: Vec<f64> = runs.iter().map(|r| r.wall_time.as_secs_f64()).collect();
    MethodResult {
        method: label,
        trials: runs.len(),
        mean_it: iterations.iter().sum::<usize>() as f64 / k,
        mean_seconds: seconds.iter().sum::<f64>() / k,
        failed: runs.iter().any(|r| !r.terminated.converged()),
        setup_seconds: runs.iter().map(|r| r.setup_time.as_secs_f64()).sum::<f64>() / k,
        terminations: runs.iter().map(|r| format!("{:?}", r.terminated)).collect(),
        final_metrics: runs.iter().map(|r| Metric(r.final_metric)).collect(),
        matvecs: runs.iter().map(|r| r.matvec_count).collect(),
        history: with_history.then(|| runs[0].history.iter().map(HistoryPoint::from).collect()),
        iterations,
        seconds,
    }
}
