//! The Kaczmarz iteration loop.
//!
//! Each iteration picks a row `i` with the configured [`SelectionStrategy`],
//! projects the iterate onto `{x : A₍ᵢ₎ x = bᵢ}`, maintains the residual when
//! the rule needs it, and evaluates the stopping rule.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::matrix::{self, Matrix, MatrixError, RowNormCache};
use crate::selection::{
    self, greedy_draw, select_cyclic, select_power_t, select_prk, select_prks, select_rk,
    GreedyDraw, NormWeightedSampler, SelectionError, SelectionState, SelectionStrategy,
    SimpleRandomSampler,
};

pub const DEFAULT_MAX_ITERS: usize = 400_000;
pub const DEFAULT_RESYNC_INTERVAL: usize = 10_000;
/// Relative improvement the metric must make within the stagnation window.
pub const STAGNATION_RELATIVE: f64 = 1e-16;
/// The stagnation window is this many times the row count.
pub const STAGNATION_WINDOW_FACTOR: usize = 10;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("right-hand side is inconsistent with the given solution (relative residual {0:e})")]
    Inconsistent(f64),
}

/// `A x = b`, optionally with a known solution used for error tracking.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    a: Matrix,
    b: Vec<f64>,
    x_star: Option<Vec<f64>>,
}

impl LinearSystem {
    /// Relative residual a supplied `x_star` may leave.
    pub const CONSISTENCY_TOL: f64 = 1e-10;

    pub fn new(a: Matrix, b: Vec<f64>, x_star: Option<Vec<f64>>) -> Result<Self, EngineError> {
        if b.len() != a.rows() {
            return Err(MatrixError::DimensionMismatch {
                expected: a.rows(),
                got: b.len(),
            }
            .into());
        }
        if let Some(xs) = &x_star {
            let ax = a.matvec(xs)?;
            let res: f64 = b
                .iter()
                .zip(&ax)
                .map(|(bi, ai)| (bi - ai).powi(2))
                .sum::<f64>()
                .sqrt();
            let bn = matrix::norm_sq(&b).sqrt();
            let rel = if bn > 0.0 { res / bn } else { res };
            if rel > Self::CONSISTENCY_TOL {
                return Err(EngineError::Inconsistent(rel));
            }
        }
        Ok(Self { a, b, x_star })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn x_star(&self) -> Option<&[f64]> {
        self.x_star.as_deref()
    }

    pub fn into_parts(self) -> (Matrix, Vec<f64>, Option<Vec<f64>>) {
        (self.a, self.b, self.x_star)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StopRule {
    /// `‖x* − x_k‖² / ‖x_k‖²`, infinite while `x_k = 0`.
    #[default]
    KnownSolutionError,
    /// `‖b − A x_k‖ / ‖b‖`.
    RelativeResidual,
}

/// How the residual vector is kept up to date between iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResidualMode {
    /// Pick per strategy: lazy where only single entries are read, incremental
    /// where the whole vector is.
    #[default]
    Auto,
    /// `r ← r − α·A A₍ᵢ₎ᵀ`, `rᵢ ← 0`, with a full recomputation every
    /// `resync` iterations (`None`: never).
    Incremental { resync: Option<usize> },
    /// Full `b − A x` after every step.
    Recompute,
    /// No stored residual; entries are evaluated on demand by row products.
    Lazy,
}

impl ResidualMode {
    pub fn incremental() -> Self {
        ResidualMode::Incremental {
            resync: Some(DEFAULT_RESYNC_INTERVAL),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub strategy: SelectionStrategy,
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub stop_rule: StopRule,
    pub history_stride: usize,
    pub residual_mode: ResidualMode,
    /// Starting iterate; zero when absent.
    pub x0: Option<Vec<f64>>,
    pub time_budget: Option<Duration>,
    pub detect_stagnation: bool,
}

impl SolveConfig {
    pub fn new(strategy: SelectionStrategy) -> Self {
        Self {
            strategy,
            tol: 1e-6,
            max_iters: DEFAULT_MAX_ITERS,
            seed: 0,
            stop_rule: StopRule::KnownSolutionError,
            history_stride: 1,
            residual_mode: ResidualMode::Auto,
            x0: None,
            time_budget: None,
            detect_stagnation: true,
        }
    }

    pub fn tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn max_iters(mut self, n: usize) -> Self {
        self.max_iters = n;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn stop_rule(mut self, rule: StopRule) -> Self {
        self.stop_rule = rule;
        self
    }

    pub fn history_stride(mut self, stride: usize) -> Self {
        self.history_stride = stride;
        self
    }

    pub fn residual_mode(mut self, mode: ResidualMode) -> Self {
        self.residual_mode = mode;
        self
    }

    pub fn x0(mut self, x0: Vec<f64>) -> Self {
        self.x0 = Some(x0);
        self
    }

    pub fn time_budget(mut self, budget: Duration) -> Self {
        self.time_budget = Some(budget);
        self
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        self.strategy.validate()?;
        check_common(self.tol, self.history_stride)
    }

    fn resolved_residual_mode(&self) -> ResidualMode {
        match self.residual_mode {
            ResidualMode::Auto => match (self.stop_rule, self.strategy) {
                (StopRule::RelativeResidual, _) => ResidualMode::incremental(),
                (
                    _,
                    SelectionStrategy::Cyclic
                    | SelectionStrategy::NormWeighted
                    | SelectionStrategy::SampledMax(_),
                ) => ResidualMode::Lazy,
                _ => ResidualMode::incremental(),
            },
            mode => mode,
        }
    }
}

pub(crate) fn check_common(tol: f64, history_stride: usize) -> Result<(), EngineError> {
    if !(tol > 0.0) {
        return Err(EngineError::Config(format!("tol must be positive, got {tol}")));
    }
    if history_stride == 0 {
        return Err(EngineError::Config("history_stride must be at least 1".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIters,
    StagnantResidual,
    TimeBudget,
}

impl Termination {
    pub fn converged(self) -> bool {
        self == Termination::Converged
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry {
    pub iteration: usize,
    /// Row projected at this iteration; `None` for the starting point.
    pub row: Option<usize>,
    pub metric: f64,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub x_final: Vec<f64>,
    pub iterations: usize,
    pub terminated: Termination,
    pub history: Vec<HistoryEntry>,
    /// Time spent in the iteration loop.
    pub wall_time: Duration,
    /// Norm cache and selection tables.
    pub setup_time: Duration,
    /// Full products with `A` or `Aᵀ`.
    pub matvec_count: usize,
    /// Columns of `A Aᵀ` formed for residual updates.
    pub gram_column_count: usize,
    /// Single-row dot products and updates.
    pub row_op_count: usize,
    pub final_metric: f64,
    /// Sampling rounds that hit the attempt cap (sampled strategies only).
    pub capped_samples: usize,
}

/// Selection details of one iteration, passed to observers.
#[derive(Debug, Clone, PartialEq)]
pub enum SelectionDetail {
    None,
    Greedy(GreedyDraw),
    Sample { z_score: f64, attempts: usize },
}

/// One completed projection, as seen by an observer.
#[derive(Debug)]
pub struct StepEvent<'a> {
    /// Iteration number after the step (the first step is 1).
    pub iteration: usize,
    pub row: usize,
    pub alpha: f64,
    pub x_before: &'a [f64],
    pub x_after: &'a [f64],
    pub detail: &'a SelectionDetail,
}

/// `x ← x + (bᵢ − A₍ᵢ₎x)/‖A₍ᵢ₎‖² · A₍ᵢ₎ᵀ`; returns the step length `α`.
pub fn kaczmarz_step(
    a: &Matrix,
    b: &[f64],
    x: &mut [f64],
    i: usize,
    norms: &RowNormCache,
) -> Result<f64, MatrixError> {
    let alpha = (b[i] - a.row_dot(i, x)?) / norms.norm_sq(i);
    a.axpy_row(i, alpha, x)?;
    Ok(alpha)
}

/// `r ← r − α·A A₍ᵢ₎ᵀ` with `rᵢ` set to exactly zero. `scratch` has length `m`.
pub fn residual_update(
    r: &mut [f64],
    a: &Matrix,
    i: usize,
    alpha: f64,
    scratch: &mut [f64],
) -> Result<(), MatrixError> {
    if alpha == 0.0 {
        return Ok(());
    }
    a.gram_column_into(i, scratch)?;
    for (rk, g) in r.iter_mut().zip(scratch.iter()) {
        *rk -= alpha * g;
    }
    r[i] = 0.0;
    Ok(())
}

/// `Σᵢ pᵢ rᵢ² / ‖A₍ᵢ₎‖²`, the expected squared step length under `probabilities`.
pub fn expected_progress(state: &SelectionState<'_>, probabilities: &[f64]) -> f64 {
    probabilities
        .iter()
        .enumerate()
        .filter(|(_, &p)| p != 0.0)
        .map(|(i, p)| p * state.ratio(i))
        .sum()
}

/// `b − A x` into `out`.
pub(crate) fn residual_into(a: &Matrix, b: &[f64], x: &[f64], out: &mut [f64]) {
    a.matvec_into(x, out).expect("dimensions checked");
    for (o, bi) in out.iter_mut().zip(b) {
        *o = bi - *o;
    }
}

pub(crate) fn known_error(x_star: &[f64], x: &[f64]) -> f64 {
    let xn = matrix::norm_sq(x);
    if xn == 0.0 {
        return f64::INFINITY;
    }
    let diff: f64 = x_star.iter().zip(x).map(|(s, v)| (s - v).powi(2)).sum();
    diff / xn
}

pub(crate) fn relative_residual(r: &[f64], b_norm: f64) -> f64 {
    let rn = matrix::norm_sq(r).sqrt();
    if b_norm > 0.0 {
        rn / b_norm
    } else {
        rn
    }
}

/// Shared stopping-rule bookkeeping for the linear and ridge loops.
pub(crate) struct Monitor {
    tol: f64,
    max_iters: usize,
    stride: usize,
    budget: Option<Duration>,
    start: Instant,
    stall_window: Option<usize>,
    best: f64,
    last_improvement: usize,
    pub history: Vec<HistoryEntry>,
}

impl Monitor {
    pub fn new(
        tol: f64,
        max_iters: usize,
        stride: usize,
        budget: Option<Duration>,
        stall_window: Option<usize>,
    ) -> Self {
        Self {
            tol,
            max_iters,
            stride,
            budget,
            start: Instant::now(),
            stall_window,
            best: f64::INFINITY,
            last_improvement: 0,
            history: Vec::new(),
        }
    }

    pub fn elapsed(&self) -> Duration {
        self.start.elapsed()
    }

    /// Records iteration `k` and returns the cause if the loop must stop.
    pub fn observe(&mut self, k: usize, row: Option<usize>, metric: f64) -> Option<Termination> {
        if k.is_multiple_of(self.stride) {
            self.history.push(HistoryEntry {
                iteration: k,
                row,
                metric,
            });
        }
        if metric < self.tol {
            return Some(Termination::Converged);
        }
        if k >= self.max_iters {
            return Some(Termination::MaxIters);
        }
        if let Some(budget) = self.budget {
            if self.start.elapsed() >= budget {
                return Some(Termination::TimeBudget);
            }
        }
        if metric < self.best * (1.0 - STAGNATION_RELATIVE) {
            self.best = metric;
            self.last_improvement = k;
        } else if let Some(w) = self.stall_window {
            if k - self.last_improvement >= w {
                return Some(Termination::StagnantResidual);
            }
        }
        None
    }

    /// Makes sure the last iteration appears in the history.
    pub fn finish(&mut self, k: usize, row: Option<usize>, metric: f64) {
        if self.history.last().map(|h| h.iteration) != Some(k) {
            self.history.push(HistoryEntry {
                iteration: k,
                row,
                metric,
            });
        }
    }
}

enum Selector {
    Cyclic,
    NormWeighted(NormWeightedSampler),
    Greedy(f64),
    PowerT(u32),
    Max,
    Sampled(SimpleRandomSampler),
}

/// Solves `A x = b` with the configured strategy.
pub fn solve(system: &LinearSystem, config: &SolveConfig) -> Result<SolveReport, EngineError> {
    run(system, config, None)
}

/// As [`solve`], calling `observer` after every projection.
pub fn solve_with_observer(
    system: &LinearSystem,
    config: &SolveConfig,
    observer: &mut dyn FnMut(&StepEvent<'_>),
) -> Result<SolveReport, EngineError> {
    run(system, config, Some(observer))
}

fn run(
    system: &LinearSystem,
    config: &SolveConfig,
    mut observer: Option<&mut dyn FnMut(&StepEvent<'_>)>,
) -> Result<SolveReport, EngineError> {
    config.validate()?;
    let a = system.a();
    let b = system.b();
    let (m, n) = (a.rows(), a.cols());
    let x_star = match config.stop_rule {
        StopRule::KnownSolutionError => Some(system.x_star().ok_or_else(|| {
            EngineError::Config("known-solution stopping rule requires x_star".into())
        })?),
        StopRule::RelativeResidual => None,
    };

    let setup_start = Instant::now();
    let norms = a.row_norms()?;
    let mut selector = match config.strategy {
        SelectionStrategy::Cyclic => Selector::Cyclic,
        SelectionStrategy::NormWeighted => {
            Selector::NormWeighted(NormWeightedSampler::new(&norms))
        }
        SelectionStrategy::Greedy => Selector::Greedy(0.5),
        SelectionStrategy::RelaxedGreedy { theta } => Selector::Greedy(theta),
        SelectionStrategy::PowerT { t } => Selector::PowerT(t),
        SelectionStrategy::MaxHomogenized => Selector::Max,
        SelectionStrategy::SampledMax(gate) => {
            Selector::Sampled(SimpleRandomSampler::new(&norms, gate)?)
        }
    };
    let setup_time = setup_start.elapsed();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut x = match &config.x0 {
        Some(x0) if x0.len() != n => {
            return Err(MatrixError::DimensionMismatch {
                expected: n,
                got: x0.len(),
            }
            .into())
        }
        Some(x0) => x0.clone(),
        None => vec![0.0; n],
    };
    let b_norm = matrix::norm_sq(b).sqrt();
    let mode = config.resolved_residual_mode();
    let reads_full = matches!(
        config.strategy,
        SelectionStrategy::Greedy
            | SelectionStrategy::RelaxedGreedy { .. }
            | SelectionStrategy::PowerT { .. }
            | SelectionStrategy::MaxHomogenized
    );
    if mode == ResidualMode::Lazy && reads_full {
        return Err(EngineError::Config(format!(
            "strategy {} reads the whole residual; lazy residuals are not supported",
            config.strategy
        )));
    }

    let mut matvecs = 0usize;
    let mut grams = 0usize;
    let mut row_ops = 0usize;
    let mut capped = 0usize;

    // Stored residual, absent in lazy mode.
    let mut r: Option<Vec<f64>> = match mode {
        ResidualMode::Lazy => None,
        _ => {
            let mut r = vec![0.0; m];
            residual_into(a, b, &x, &mut r);
            matvecs += 1;
            Some(r)
        }
    };
    let mut scratch = vec![0.0; m];
    let mut x_before = if observer.is_some() {
        vec![0.0; n]
    } else {
        Vec::new()
    };

    let metric_of = |x: &[f64], r: Option<&[f64]>, scratch: &mut [f64], matvecs: &mut usize| {
        match x_star {
            Some(xs) => known_error(xs, x),
            None => match r {
                Some(r) => relative_residual(r, b_norm),
                None => {
                    residual_into(a, b, x, scratch);
                    *matvecs += 1;
                    relative_residual(scratch, b_norm)
                }
            },
        }
    };

    let stall = config
        .detect_stagnation
        .then(|| STAGNATION_WINDOW_FACTOR.saturating_mul(m));
    let mut monitor = Monitor::new(
        config.tol,
        config.max_iters,
        config.history_stride,
        config.time_budget,
        stall,
    );
    let mut k = 0usize;
    let mut prev_row: Option<usize> = None;
    let mut metric = metric_of(&x, r.as_deref(), &mut scratch, &mut matvecs);
    let terminated = loop {
        if let Some(t) = monitor.observe(k, prev_row, metric) {
            break t;
        }

        let mut detail = SelectionDetail::None;
        let pick: Result<usize, SelectionError> = match &mut selector {
            Selector::Cyclic => Ok(select_cyclic(k, m)),
            Selector::NormWeighted(s) => Ok(select_rk(s, &mut rng)),
            Selector::Greedy(theta) => {
                let res = r.as_deref().expect("stored residual");
                let st = SelectionState::new(res, &norms).with_prev_row(prev_row);
                greedy_draw(&st, *theta, &mut rng).map(|d| {
                    let row = d.row;
                    if observer.is_some() {
                        detail = SelectionDetail::Greedy(d);
                    }
                    row
                })
            }
            Selector::PowerT(t) => {
                let res = r.as_deref().expect("stored residual");
                let st = SelectionState::new(res, &norms).with_prev_row(prev_row);
                select_power_t(&st, *t, &mut rng)
            }
            Selector::Max => {
                let res = r.as_deref().expect("stored residual");
                select_prk(&SelectionState::new(res, &norms).with_prev_row(prev_row))
            }
            Selector::Sampled(sampler) => {
                let sample = sampler.draw(&norms, &mut rng);
                if sample.capped {
                    capped += 1;
                }
                detail = SelectionDetail::Sample {
                    z_score: sample.z_score,
                    attempts: sample.attempts,
                };
                let picked = match r.as_deref() {
                    Some(res) => select_prks(&sample.indices, &norms, |i| res[i]),
                    None => {
                        row_ops += sample.indices.len();
                        select_prks(&sample.indices, &norms, |i| b[i] - a.row(i).dot(&x))
                    }
                };
                match picked {
                    Err(SelectionError::AllSampledResidualsZero) => {
                        // Fall back to the full residual: zero means solved.
                        residual_into(a, b, &x, &mut scratch);
                        matvecs += 1;
                        select_prk(&SelectionState::new(&scratch, &norms))
                    }
                    other => other,
                }
            }
        };
        let i = match pick {
            Ok(i) => i,
            Err(SelectionError::ZeroResidual) => break Termination::Converged,
            Err(e) => return Err(e.into()),
        };

        if observer.is_some() {
            x_before.copy_from_slice(&x);
        }
        let alpha = kaczmarz_step(a, b, &mut x, i, &norms)?;
        row_ops += 2;
        match (mode, r.as_mut()) {
            (ResidualMode::Incremental { resync }, Some(res)) => {
                if resync.is_some_and(|every| (k + 1).is_multiple_of(every)) {
                    residual_into(a, b, &x, res);
                    matvecs += 1;
                } else {
                    residual_update(res, a, i, alpha, &mut scratch)?;
                    grams += 1;
                }
            }
            (ResidualMode::Recompute, Some(res)) => {
                residual_into(a, b, &x, res);
                matvecs += 1;
            }
            _ => {}
        }
        k += 1;
        prev_row = Some(i);
        if let Some(obs) = observer.as_mut() {
            obs(&StepEvent {
                iteration: k,
                row: i,
                alpha,
                x_before: &x_before,
                x_after: &x,
                detail: &detail,
            });
        }
        metric = metric_of(&x, r.as_deref(), &mut scratch, &mut matvecs);
    };
    monitor.finish(k, prev_row, metric);

    Ok(SolveReport {
        x_final: x,
        iterations: k,
        terminated,
        wall_time: monitor.elapsed(),
        history: monitor.history,
        setup_time,
        matvec_count: matvecs,
        gram_column_count: grams,
        row_op_count: row_ops,
        final_metric: metric,
        capped_samples: capped,
    })
}

/// Probability vector a strategy draws from at `state`, for diagnostics.
/// Deterministic rules yield a point mass; sampled rules are not covered.
pub fn strategy_probabilities(
    strategy: &SelectionStrategy,
    state: &SelectionState<'_>,
) -> Result<Vec<f64>, SelectionError> {
    let m = state.residual.len();
    match *strategy {
        SelectionStrategy::NormWeighted => Ok(NormWeightedSampler::probabilities(state.norms)),
        SelectionStrategy::Greedy => selection::greedy_probabilities(state, 0.5),
        SelectionStrategy::RelaxedGreedy { theta } => {
            selection::greedy_probabilities(state, theta)
        }
        SelectionStrategy::PowerT { t } => selection::power_t_probabilities(state, t),
        SelectionStrategy::MaxHomogenized => {
            let i = select_prk(state)?;
            let mut p = vec![0.0; m];
            p[i] = 1.0;
            Ok(p)
        }
        SelectionStrategy::Cyclic | SelectionStrategy::SampledMax(_) => Err(
            SelectionError::InvalidParameter(format!("{strategy} has no closed-form distribution")),
        ),
    }
}
