//! Kaczmarz solvers for the ridge system `(A Aᵀ + τI) x = b`.
//!
//! The `m × m` operator is never formed. The solver keeps `w = Aᵀx` next to the
//! iterate so that `(A Aᵀ + τI) x = A w + τ x` costs one product with `A`, and
//! each projection needs one column of `A Aᵀ` plus one product with `Aᵀ`.
//!
//! Step denominators are either the exact row norms
//! `zᵢ = ‖A A₍ᵢ₎ᵀ + τeᵢ‖` or the cheap upper-biased estimate `y` built from
//! four products with `A`, `|A|` and their transposes.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{
    check_common, known_error, relative_residual, EngineError, Monitor, SolveReport, StopRule,
    Termination, DEFAULT_MAX_ITERS, STAGNATION_WINDOW_FACTOR,
};
use crate::matrix::{self, Matrix, MatrixError, RowNormCache};
use crate::selection::{select_prks, SampleGate, SelectionError, SimpleRandomSampler};

pub const DEFAULT_RIDGE_TOL: f64 = 1e-3;
pub const DEFAULT_RIDGE_RESYNC: usize = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormMode {
    /// Denominators `zᵢ = ‖A A₍ᵢ₎ᵀ + τeᵢ‖`, one column of `A Aᵀ` per row at setup.
    #[default]
    Exact,
    /// Denominators `y = (y₁ + y₂)/2`; the steps become damped projections.
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RidgeMethod {
    /// Largest `|rᵢ|/dᵢ` over all rows.
    Prk,
    /// Largest `|rᵢ|/dᵢ` over a gated random sample. The gate tests the squared
    /// row norms of `A`.
    Prks(SampleGate),
}

impl std::fmt::Display for RidgeMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RidgeMethod::Prk => f.write_str("ridge-prk"),
            RidgeMethod::Prks(g) => write!(f, "ridge-prks(eta={},q={})", g.eta, g.q),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RidgeResidualMode {
    /// Recompute for full-scan selection, lazy for sampled selection.
    #[default]
    Auto,
    /// `r = b − A w − τ x` after every step.
    Recompute,
    /// `r ← r − α (A Aᵀg + τ g)`, recomputed every `resync` steps.
    Incremental { resync: usize },
    /// Only the entries a sampled step reads are evaluated.
    Lazy,
}

#[derive(Debug, Clone)]
pub struct RidgeConfig {
    pub method: RidgeMethod,
    pub norms: NormMode,
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub stop_rule: StopRule,
    /// Known solution of length `m`, required by [`StopRule::KnownSolutionError`].
    pub x_star: Option<Vec<f64>>,
    pub history_stride: usize,
    pub residual_mode: RidgeResidualMode,
    pub x0: Option<Vec<f64>>,
    pub time_budget: Option<Duration>,
    pub detect_stagnation: bool,
    /// In estimated mode, also form `z` and report `max |y − z|/z`.
    pub diagnose_estimate: bool,
}

impl RidgeConfig {
    pub fn new(method: RidgeMethod, norms: NormMode) -> Self {
        Self {
            method,
            norms,
            tol: DEFAULT_RIDGE_TOL,
            max_iters: DEFAULT_MAX_ITERS,
            seed: 0,
            stop_rule: StopRule::KnownSolutionError,
            x_star: None,
            history_stride: 1,
            residual_mode: RidgeResidualMode::Auto,
            x0: None,
            time_budget: None,
            detect_stagnation: true,
            diagnose_estimate: false,
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

    pub fn x_star(mut self, x_star: Vec<f64>) -> Self {
        self.x_star = Some(x_star);
        self
    }

    pub fn stop_rule(mut self, rule: StopRule) -> Self {
        self.stop_rule = rule;
        self
    }

    pub fn residual_mode(mut self, mode: RidgeResidualMode) -> Self {
        self.residual_mode = mode;
        self
    }

    pub fn x0(mut self, x0: Vec<f64>) -> Self {
        self.x0 = Some(x0);
        self
    }

    pub fn history_stride(mut self, stride: usize) -> Self {
        self.history_stride = stride;
        self
    }

    fn resolved_mode(&self) -> RidgeResidualMode {
        match (self.residual_mode, self.method) {
            (RidgeResidualMode::Auto, RidgeMethod::Prks(_))
                if self.stop_rule == StopRule::KnownSolutionError =>
            {
                RidgeResidualMode::Lazy
            }
            (RidgeResidualMode::Auto, _) => RidgeResidualMode::Recompute,
            (mode, _) => mode,
        }
    }
}

/// `zᵢ = ‖A A₍ᵢ₎ᵀ + τeᵢ‖₂` for every row, one column of `A Aᵀ` each.
pub fn ridge_row_norms_exact(a: &Matrix, tau: f64) -> Vec<f64> {
    let m = a.rows();
    let mut col = vec![0.0; m];
    (0..m)
        .map(|i| {
            a.gram_column_into(i, &mut col).expect("row in range");
            col[i] += tau;
            matrix::norm_sq(&col).sqrt()
        })
        .collect()
}

/// `(A Aᵀ + τI) x` through `A(Aᵀx)`.
pub fn ridge_apply(a: &Matrix, tau: f64, x: &[f64]) -> Result<Vec<f64>, MatrixError> {
    let w = a.rmatvec(x)?;
    let mut out = a.matvec(&w)?;
    for (o, xi) in out.iter_mut().zip(x) {
        *o += tau * xi;
    }
    Ok(out)
}

/// The row-norm estimate and its two ingredients.
#[derive(Debug, Clone, PartialEq)]
pub struct YEstimate {
    /// `|A (Aᵀ e) + τ|`.
    pub y1: Vec<f64>,
    /// `|A| (|A|ᵀ e) + τ`.
    pub y2: Vec<f64>,
    /// `(y₁ + y₂) / 2`.
    pub y: Vec<f64>,
}

/// Builds the row-norm estimate from two products with `A`/`Aᵀ` and two with
/// `|A|`/`|A|ᵀ`, where `e` is the all-ones vector.
pub fn ridge_y_estimate(a: &Matrix, tau: f64) -> YEstimate {
    let e = vec![1.0; a.rows()];
    let ate = a.rmatvec(&e).expect("length m");
    let y1: Vec<f64> = a
        .matvec(&ate)
        .expect("length n")
        .into_iter()
        .map(|v| (v + tau).abs())
        .collect();
    let abs_ate = a.abs_rmatvec(&e).expect("length m");
    let y2: Vec<f64> = a
        .abs_matvec(&abs_ate)
        .expect("length n")
        .into_iter()
        .map(|v| v + tau)
        .collect();
    let y = y1.iter().zip(&y2).map(|(p, q)| 0.5 * (p + q)).collect();
    YEstimate { y1, y2, y }
}

/// Implicit `A Aᵀ + τI` together with the step denominators of one norm mode.
#[derive(Debug, Clone)]
pub struct RidgeOperator<'a> {
    a: &'a Matrix,
    tau: f64,
    mode: NormMode,
    denominators: Vec<f64>,
    // Squared denominators, the weights of the argmax selection.
    denom_sq: RowNormCache,
    y_estimate: Option<YEstimate>,
    exact_norms: Option<Vec<f64>>,
}

impl<'a> RidgeOperator<'a> {
    pub fn new(a: &'a Matrix, tau: f64, mode: NormMode) -> Result<Self, EngineError> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(EngineError::Config(format!(
                "tau must be positive, got {tau}"
            )));
        }
        let (denominators, y_estimate, exact_norms) = match mode {
            NormMode::Exact => {
                let z = ridge_row_norms_exact(a, tau);
                (z.clone(), None, Some(z))
            }
            NormMode::Estimated => {
                let est = ridge_y_estimate(a, tau);
                (est.y.clone(), Some(est), None)
            }
        };
        let denom_sq = RowNormCache::from_norms_sq(denominators.iter().map(|d| d * d).collect());
        Ok(Self {
            a,
            tau,
            mode,
            denominators,
            denom_sq,
            y_estimate,
            exact_norms,
        })
    }

    pub fn matrix(&self) -> &Matrix {
        self.a
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn mode(&self) -> NormMode {
        self.mode
    }

    pub fn rows(&self) -> usize {
        self.a.rows()
    }

    /// `dᵢ`: `zᵢ` or `yᵢ` depending on the mode.
    pub fn denominators(&self) -> &[f64] {
        &self.denominators
    }

    pub fn y_estimate(&self) -> Option<&YEstimate> {
        self.y_estimate.as_ref()
    }

    pub fn exact_norms(&self) -> Option<&[f64]> {
        self.exact_norms.as_deref()
    }

    /// `(A Aᵀ + τI) x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, MatrixError> {
        ridge_apply(self.a, self.tau, x)
    }

    /// Floats held by the operator itself.
    fn footprint(&self) -> usize {
        let est = self.y_estimate.as_ref().map_or(0, |e| 3 * e.y.len());
        let exact = self.exact_norms.as_ref().map_or(0, Vec::len);
        self.denominators.len() + self.denom_sq.len() + est + exact
    }
}

/// Iterate `x` (length `m`), `w = Aᵀx` (length `n`) and the residual.
#[derive(Debug, Clone)]
pub struct RidgeState {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
    /// `b − A w − τ x`; stale between steps in lazy mode.
    pub r: Vec<f64>,
    g: Vec<f64>,
    h: Vec<f64>,
    /// Products with `A` (columns of `A Aᵀ` included).
    pub applies: usize,
    /// Products with `Aᵀ`.
    pub transpose_applies: usize,
    pub row_ops: usize,
}

impl RidgeState {
    pub fn new(op: &RidgeOperator<'_>, b: &[f64], x0: Option<&[f64]>) -> Result<Self, MatrixError> {
        let (m, n) = (op.a.rows(), op.a.cols());
        if b.len() != m {
            return Err(MatrixError::DimensionMismatch {
                expected: m,
                got: b.len(),
            });
        }
        let x = match x0 {
            Some(x0) if x0.len() != m => {
                return Err(MatrixError::DimensionMismatch {
                    expected: m,
                    got: x0.len(),
                })
            }
            Some(x0) => x0.to_vec(),
            None => vec![0.0; m],
        };
        let w = op.a.rmatvec(&x)?;
        let mut st = Self {
            x,
            w,
            r: vec![0.0; m],
            g: vec![0.0; m],
            h: vec![0.0; n],
            applies: 0,
            transpose_applies: 1,
            row_ops: 0,
        };
        st.refresh_residual(op, b);
        Ok(st)
    }

    /// `b − A w − τ x` written into `r`.
    pub fn refresh_residual(&mut self, op: &RidgeOperator<'_>, b: &[f64]) {
        op.a.matvec_into(&self.w, &mut self.r).expect("dimensions fixed");
        for ((rj, bj), xj) in self.r.iter_mut().zip(b).zip(&self.x) {
            *rj = bj - *rj - op.tau * xj;
        }
        self.applies += 1;
    }

    /// `b_j − A₍ⱼ₎ w − τ x_j`.
    pub fn residual_entry(&self, op: &RidgeOperator<'_>, b: &[f64], j: usize) -> f64 {
        b[j] - op.a.row(j).dot(&self.w) - op.tau * self.x[j]
    }

    /// `x ← x + α g`, `w ← w + α Aᵀg` with `g = A A₍ᵢ₎ᵀ + τeᵢ`.
    fn project(&mut self, op: &RidgeOperator<'_>, i: usize, alpha: f64) {
        op.a.gram_column_into(i, &mut self.g).expect("row in range");
        self.g[i] += op.tau;
        op.a.rmatvec_into(&self.g, &mut self.h).expect("dimensions fixed");
        self.applies += 1;
        self.transpose_applies += 1;
        for (xj, gj) in self.x.iter_mut().zip(&self.g) {
            *xj += alpha * gj;
        }
        for (wj, hj) in self.w.iter_mut().zip(&self.h) {
            *wj += alpha * hj;
        }
    }

    /// `r ← r − α (A h + τ g)` after [`Self::project`].
    fn update_residual_incremental(&mut self, op: &RidgeOperator<'_>, alpha: f64) {
        let m = self.r.len();
        let mut ah = vec![0.0; m];
        op.a.matvec_into(&self.h, &mut ah).expect("dimensions fixed");
        self.applies += 1;
        for j in 0..m {
            self.r[j] -= alpha * (ah[j] + op.tau * self.g[j]);
        }
    }

    fn footprint(&self) -> usize {
        2 * self.x.len() + 2 * self.w.len() + self.r.len() + self.g.len()
    }
}

/// `b − (A Aᵀ + τI) x` from the maintained `w`; one product with `A`.
pub fn ridge_residual(op: &RidgeOperator<'_>, state: &RidgeState, b: &[f64]) -> Vec<f64> {
    let mut r = op.a.matvec(&state.w).expect("dimensions fixed");
    for ((rj, bj), xj) in r.iter_mut().zip(b).zip(&state.x) {
        *rj = bj - *rj - op.tau * xj;
    }
    r
}

fn argmax_ratio(r: &[f64], d2: &RowNormCache) -> Option<usize> {
    let mut best = (0, r[0] * r[0] / d2.norm_sq(0));
    for (j, rj) in r.iter().enumerate().skip(1) {
        let v = rj * rj / d2.norm_sq(j);
        if v > best.1 {
            best = (j, v);
        }
    }
    (best.1 > 0.0).then_some(best.0)
}

/// One full-scan step with an up-to-date residual, recomputing it afterwards.
/// Returns the projected row, or `None` when the residual is exactly zero.
pub fn ridge_prk_step(op: &RidgeOperator<'_>, state: &mut RidgeState, b: &[f64]) -> Option<usize> {
    let i = argmax_ratio(&state.r, &op.denom_sq)?;
    let alpha = state.r[i] / op.denom_sq.norm_sq(i);
    state.project(op, i, alpha);
    state.refresh_residual(op, b);
    Some(i)
}

/// One sampled step that evaluates only the sampled residual entries.
pub fn ridge_prks_step<R: Rng + ?Sized>(
    op: &RidgeOperator<'_>,
    state: &mut RidgeState,
    b: &[f64],
    sampler: &mut SimpleRandomSampler,
    gate_norms: &RowNormCache,
    rng: &mut R,
) -> Result<usize, SelectionError> {
    let sample = sampler.draw(gate_norms, rng);
    state.row_ops += sample.indices.len();
    let st: &RidgeState = state;
    let i = select_prks(&sample.indices, &op.denom_sq, |j| st.residual_entry(op, b, j))?;
    let alpha = state.residual_entry(op, b, i) / op.denom_sq.norm_sq(i);
    state.project(op, i, alpha);
    Ok(i)
}

#[derive(Debug, Clone)]
pub struct RidgeReport {
    pub solve: SolveReport,
    /// Products with `A` during the iteration, columns of `A Aᵀ` included.
    pub applies: usize,
    pub transpose_applies: usize,
    /// Products spent on the denominators before iterating.
    pub setup_applies: usize,
    /// Floats allocated by the solve: iterate, auxiliary vectors, caches.
    pub workspace_floats: usize,
    /// `max |yᵢ − zᵢ| / zᵢ`, when requested in estimated mode.
    pub estimate_deviation: Option<f64>,
}

/// Solves `(A Aᵀ + τI) x = b`.
pub fn ridge_solve(
    a: &Matrix,
    b: &[f64],
    tau: f64,
    config: &RidgeConfig,
) -> Result<RidgeReport, EngineError> {
    check_common(config.tol, config.history_stride)?;
    if let RidgeMethod::Prks(gate) = config.method {
        gate.validate()?;
    }
    let m = a.rows();
    let x_star = match config.stop_rule {
        StopRule::KnownSolutionError => {
            let xs = config.x_star.as_deref().ok_or_else(|| {
                EngineError::Config("known-solution stopping rule requires x_star".into())
            })?;
            if xs.len() != m {
                return Err(MatrixError::DimensionMismatch {
                    expected: m,
                    got: xs.len(),
                }
                .into());
            }
            Some(xs)
        }
        StopRule::RelativeResidual => None,
    };
    let mode = config.resolved_mode();
    if mode == RidgeResidualMode::Lazy && config.method == RidgeMethod::Prk {
        return Err(EngineError::Config(
            "full-scan ridge selection needs a stored residual".into(),
        ));
    }

    let setup_start = Instant::now();
    let op = RidgeOperator::new(a, tau, config.norms)?;
    let setup_applies = match config.norms {
        NormMode::Exact => m,
        NormMode::Estimated => 4,
    };
    let estimate_deviation = match (config.norms, config.diagnose_estimate) {
        (NormMode::Estimated, true) => {
            let z = ridge_row_norms_exact(a, tau);
            Some(
                op.denominators
                    .iter()
                    .zip(&z)
                    .map(|(y, z)| (y - z).abs() / z)
                    .fold(0.0, f64::max),
            )
        }
        _ => None,
    };
    let mut sampler = match config.method {
        RidgeMethod::Prks(gate) => {
            let gate_norms = RowNormCache::from_norms_sq(
                (0..m).map(|i| a.row(i).norm_sq()).collect(),
            );
            Some((SimpleRandomSampler::new(&gate_norms, gate)?, gate_norms))
        }
        RidgeMethod::Prk => None,
    };
    let setup_time = setup_start.elapsed();

    let mut state = RidgeState::new(&op, b, config.x0.as_deref())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let b_norm = matrix::norm_sq(b).sqrt();
    let mut scratch_applies = 0usize;
    let mut metric_of = |state: &RidgeState, fresh: bool| match x_star {
        Some(xs) => known_error(xs, &state.x),
        None if fresh => relative_residual(&state.r, b_norm),
        None => {
            scratch_applies += 1;
            relative_residual(&ridge_residual(&op, state, b), b_norm)
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
    let residual_fresh = mode != RidgeResidualMode::Lazy;
    let mut k = 0usize;
    let mut prev_row = None;
    let mut capped = 0usize;
    let mut metric = metric_of(&state, residual_fresh);
    let terminated = loop {
        if let Some(t) = monitor.observe(k, prev_row, metric) {
            break t;
        }
        let picked = match (&mut sampler, mode) {
            (None, RidgeResidualMode::Recompute) => ridge_prk_step(&op, &mut state, b),
            (None, _) => {
                let Some(i) = argmax_ratio(&state.r, &op.denom_sq) else {
                    break Termination::Converged;
                };
                let alpha = state.r[i] / op.denom_sq.norm_sq(i);
                state.project(&op, i, alpha);
                advance_residual(&op, &mut state, b, mode, alpha, k);
                Some(i)
            }
            (Some((sampler, gate_norms)), RidgeResidualMode::Lazy) => {
                match ridge_prks_step(&op, &mut state, b, sampler, gate_norms, &mut rng) {
                    Ok(i) => Some(i),
                    Err(SelectionError::AllSampledResidualsZero) => {
                        state.refresh_residual(&op, b);
                        match argmax_ratio(&state.r, &op.denom_sq) {
                            None => None,
                            Some(i) => {
                                let alpha = state.r[i] / op.denom_sq.norm_sq(i);
                                state.project(&op, i, alpha);
                                Some(i)
                            }
                        }
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            (Some((sampler, gate_norms)), _) => {
                let sample = sampler.draw(gate_norms, &mut rng);
                if sample.capped {
                    capped += 1;
                }
                let r = &state.r;
                match select_prks(&sample.indices, &op.denom_sq, |j| r[j]) {
                    Ok(i) => {
                        let alpha = state.r[i] / op.denom_sq.norm_sq(i);
                        state.project(&op, i, alpha);
                        advance_residual(&op, &mut state, b, mode, alpha, k);
                        Some(i)
                    }
                    Err(SelectionError::AllSampledResidualsZero) => {
                        match argmax_ratio(&state.r, &op.denom_sq) {
                            None => None,
                            Some(i) => {
                                let alpha = state.r[i] / op.denom_sq.norm_sq(i);
                                state.project(&op, i, alpha);
                                advance_residual(&op, &mut state, b, mode, alpha, k);
                                Some(i)
                            }
                        }
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        };
        let Some(i) = picked else {
            break Termination::Converged;
        };
        k += 1;
        prev_row = Some(i);
        metric = metric_of(&state, residual_fresh);
    };
    monitor.finish(k, prev_row, metric);

    let sampler_floats = sampler.as_ref().map_or(0, |(_, g)| 2 * g.len());
    let workspace_floats = op.footprint() + state.footprint() + sampler_floats;
    let applies = state.applies + scratch_applies;
    Ok(RidgeReport {
        solve: SolveReport {
            x_final: state.x,
            iterations: k,
            terminated,
            wall_time: monitor.elapsed(),
            history: monitor.history,
            setup_time,
            matvec_count: applies + state.transpose_applies,
            gram_column_count: 0,
            row_op_count: state.row_ops,
            final_metric: metric,
            capped_samples: capped,
        },
        applies,
        transpose_applies: state.transpose_applies,
        setup_applies,
        workspace_floats,
        estimate_deviation,
    })
}

fn advance_residual(
    op: &RidgeOperator<'_>,
    state: &mut RidgeState,
    b: &[f64],
    mode: RidgeResidualMode,
    alpha: f64,
    k: usize,
) {
    match mode {
        RidgeResidualMode::Incremental { resync } if !(k + 1).is_multiple_of(resync.max(1)) => {
            state.update_residual_incremental(op, alpha)
        }
        _ => state.refresh_residual(op, b),
    }
}

/// `(A Aᵀ + τI) x` assembled densely, for tests and small oracles.
pub fn ridge_dense_operator(a: &Matrix, tau: f64) -> Vec<Vec<f64>> {
    let m = a.rows();
    let mut out = vec![vec![0.0; m]; m];
    for (i, row) in out.iter_mut().enumerate() {
        a.gram_column_into(i, row).expect("row in range");
        row[i] += tau;
    }
    out
}
