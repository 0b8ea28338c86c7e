//! Row-selection rules.
//!
//! Every rule maps the current residual `r = b − A x` (or, for the cyclic and
//! norm-weighted rules, nothing at all) to the index of the next working row.
//! Randomized rules take the generator explicitly so that a solve is replayable
//! from its seed. The homogenized residual of row `i` is `|rᵢ| / ‖A₍ᵢ₎‖₂`;
//! internally the squared ratio `rᵢ² / ‖A₍ᵢ₎‖₂²` is used for comparisons.
//!
//! All argmax rules break ties towards the smallest row index.

use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::matrix::RowNormCache;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectionError {
    #[error("residual is exactly zero")]
    ZeroResidual,
    #[error("sample is empty")]
    EmptySample,
    #[error("every sampled residual entry is zero")]
    AllSampledResidualsZero,
    #[error("invalid strategy parameter: {0}")]
    InvalidParameter(String),
}

/// How the Z statistic of a drawn sample is compared against `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZTestMode {
    /// Accept when `Z < q`.
    #[default]
    Signed,
    /// Accept when `|Z| < q`.
    TwoSided,
}

/// Parameters of the simple-random-sampling gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleGate {
    /// Sampling ratio in `(0, 1]`.
    pub eta: f64,
    /// Critical Z value; `f64::INFINITY` disables the gate.
    pub q: f64,
    pub mode: ZTestMode,
    /// Resampling cap; once reached the draw with the smallest `|Z|` is kept.
    pub max_attempts: usize,
}

impl SampleGate {
    pub const DEFAULT_Q: f64 = 1.96;
    pub const DEFAULT_MAX_ATTEMPTS: usize = 100;

    pub fn new(eta: f64, q: f64) -> Self {
        Self {
            eta,
            q,
            mode: ZTestMode::Signed,
            max_attempts: Self::DEFAULT_MAX_ATTEMPTS,
        }
    }

    pub fn two_sided(mut self) -> Self {
        self.mode = ZTestMode::TwoSided;
        self
    }

    pub fn validate(&self) -> Result<(), SelectionError> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(SelectionError::InvalidParameter(format!(
                "eta must lie in (0, 1], got {}",
                self.eta
            )));
        }
        if !(self.q > 0.0) {
            return Err(SelectionError::InvalidParameter(format!(
                "q must be positive, got {}",
                self.q
            )));
        }
        if self.max_attempts == 0 {
            return Err(SelectionError::InvalidParameter(
                "max_attempts must be at least 1".into(),
            ));
        }
        Ok(())
    }

    fn accepts(&self, z: f64) -> bool {
        match self.mode {
            ZTestMode::Signed => z < self.q,
            ZTestMode::TwoSided => z.abs() < self.q,
        }
    }
}

/// The row-selection rule of a solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionStrategy {
    /// Rows in order, `k mod m`.
    Cyclic,
    /// Row `i` with probability `‖A₍ᵢ₎‖² / ‖A‖_F²` (RK).
    NormWeighted,
    /// Greedy randomized rule (GRK).
    Greedy,
    /// Greedy rule with relaxation `theta ∈ [0, 1]` (RGRK).
    RelaxedGreedy { theta: f64 },
    /// Probability proportional to the `t`-th power of the homogenized residual.
    PowerT { t: u32 },
    /// Largest homogenized residual (PRK).
    MaxHomogenized,
    /// Largest homogenized residual over a gated simple random sample (PRKS).
    SampledMax(SampleGate),
}

impl SelectionStrategy {
    pub fn validate(&self) -> Result<(), SelectionError> {
        match *self {
            SelectionStrategy::RelaxedGreedy { theta } if !(0.0..=1.0).contains(&theta) => Err(
                SelectionError::InvalidParameter(format!("theta must lie in [0, 1], got {theta}")),
            ),
            SelectionStrategy::PowerT { t: 0 } => Err(SelectionError::InvalidParameter(
                "t must be at least 1".into(),
            )),
            SelectionStrategy::SampledMax(gate) => gate.validate(),
            _ => Ok(()),
        }
    }

    /// Whether the rule reads the residual vector at all.
    pub fn needs_residual(&self) -> bool {
        !matches!(
            self,
            SelectionStrategy::Cyclic | SelectionStrategy::NormWeighted
        )
    }

    /// Short method name as used on the command line.
    pub fn name(&self) -> &'static str {
        match self {
            SelectionStrategy::Cyclic => "cyclic",
            SelectionStrategy::NormWeighted => "rk",
            SelectionStrategy::Greedy => "grk",
            SelectionStrategy::RelaxedGreedy { .. } => "rgrk",
            SelectionStrategy::PowerT { .. } => "powert",
            SelectionStrategy::MaxHomogenized => "prk",
            SelectionStrategy::SampledMax(_) => "prks",
        }
    }
}

impl fmt::Display for SelectionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectionStrategy::RelaxedGreedy { theta } => write!(f, "rgrk(theta={theta})"),
            SelectionStrategy::PowerT { t } => write!(f, "powert(t={t})"),
            SelectionStrategy::SampledMax(g) => {
                write!(f, "prks(eta={},q={})", g.eta, g.q)?;
                if g.mode == ZTestMode::TwoSided {
                    write!(f, "[two-sided]")?;
                }
                Ok(())
            }
            other => f.write_str(other.name()),
        }
    }
}

/// Read-only view of what a residual-driven rule needs at iteration `k`.
#[derive(Debug, Clone, Copy)]
pub struct SelectionState<'a> {
    /// `r = b − A x_k`, length `m`.
    pub residual: &'a [f64],
    /// Row used at iteration `k − 1`, if any.
    pub prev_row: Option<usize>,
    pub norms: &'a RowNormCache,
}

impl<'a> SelectionState<'a> {
    pub fn new(residual: &'a [f64], norms: &'a RowNormCache) -> Self {
        debug_assert_eq!(residual.len(), norms.len());
        Self {
            residual,
            prev_row: None,
            norms,
        }
    }

    pub fn with_prev_row(mut self, row: Option<usize>) -> Self {
        self.prev_row = row;
        self
    }

    /// Squared homogenized residual of row `i`.
    #[inline]
    pub fn ratio(&self, i: usize) -> f64 {
        let r = self.residual[i];
        r * r / self.norms.norm_sq(i)
    }

    pub fn residual_norm_sq(&self) -> f64 {
        self.residual.iter().map(|r| r * r).sum()
    }

    /// `(argmax_i rᵢ²/‖A₍ᵢ₎‖², max value)`, smallest index on ties.
    pub fn max_ratio(&self) -> (usize, f64) {
        let mut best = (0, self.ratio(0));
        for i in 1..self.residual.len() {
            let v = self.ratio(i);
            if v > best.1 {
                best = (i, v);
            }
        }
        best
    }
}

/// Draws an index from non-decreasing cumulative weights by inverse CDF.
/// Entries with zero weight are never returned. `prefix` must end positive.
pub fn draw_from_prefix<R: Rng + ?Sized>(prefix: &[f64], rng: &mut R) -> usize {
    let total = *prefix.last().expect("non-empty prefix sums");
    debug_assert!(total > 0.0);
    let u = rng.random::<f64>() * total;
    let idx = prefix.partition_point(|&c| c <= u);
    if idx < prefix.len() {
        return idx;
    }
    // u rounded up to the total: take the last index carrying weight.
    (0..prefix.len())
        .rev()
        .find(|&i| i == 0 || prefix[i] > prefix[i - 1])
        .unwrap_or(0)
}

fn prefix_sums(weights: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

/// `k mod m`.
pub fn select_cyclic(k: usize, m: usize) -> usize {
    k % m
}

/// Static inverse-CDF table for the norm-weighted (RK) distribution.
#[derive(Debug, Clone)]
pub struct NormWeightedSampler {
    prefix: Vec<f64>,
}

impl NormWeightedSampler {
    pub fn new(norms: &RowNormCache) -> Self {
        Self {
            prefix: prefix_sums(norms.norms_sq().iter().copied()),
        }
    }

    pub fn probabilities(norms: &RowNormCache) -> Vec<f64> {
        let f = norms.frobenius_sq();
        norms.norms_sq().iter().map(|v| v / f).collect()
    }
}

/// Row `i` with probability `‖A₍ᵢ₎‖₂² / ‖A‖_F²`.
pub fn select_rk<R: Rng + ?Sized>(sampler: &NormWeightedSampler, rng: &mut R) -> usize {
    draw_from_prefix(&sampler.prefix, rng)
}

/// Relaxed greedy factor `θ·max(rᵢ²/‖A₍ᵢ₎‖²)/‖r‖² + (1−θ)/‖A‖_F²`.
pub fn rgrk_epsilon(state: &SelectionState<'_>, theta: f64) -> Result<f64, SelectionError> {
    let rn2 = state.residual_norm_sq();
    if rn2 == 0.0 {
        return Err(SelectionError::ZeroResidual);
    }
    let (_, max) = state.max_ratio();
    Ok(theta * max / rn2 + (1.0 - theta) / state.norms.frobenius_sq())
}

/// Greedy factor `ε_k = ½(max(rᵢ²/‖A₍ᵢ₎‖²)/‖r‖² + 1/‖A‖_F²)`.
pub fn grk_epsilon(state: &SelectionState<'_>) -> Result<f64, SelectionError> {
    rgrk_epsilon(state, 0.5)
}

/// `{ i : rᵢ² ≥ ε ‖r‖² ‖A₍ᵢ₎‖² }`, in increasing index order.
///
/// The threshold is clamped to the maximal ratio so the argmax row always
/// qualifies despite rounding (`ε ≤ max/‖r‖²` holds exactly in real arithmetic).
pub fn grk_index_set(state: &SelectionState<'_>, epsilon: f64) -> Vec<usize> {
    let (_, max) = state.max_ratio();
    let threshold = (epsilon * state.residual_norm_sq()).min(max);
    index_set_above(state, threshold)
}

fn index_set_above(state: &SelectionState<'_>, threshold: f64) -> Vec<usize> {
    (0..state.residual.len())
        .filter(|&i| state.ratio(i) >= threshold)
        .collect()
}

/// Everything a greedy draw computed, for diagnostics and trace comparisons.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyDraw {
    pub epsilon: f64,
    pub index_set: Vec<usize>,
    pub row: usize,
}

/// One relaxed-greedy step: threshold, candidate set, and the residual-weighted
/// draw from it.
pub fn greedy_draw<R: Rng + ?Sized>(
    state: &SelectionState<'_>,
    theta: f64,
    rng: &mut R,
) -> Result<GreedyDraw, SelectionError> {
    let rn2 = state.residual_norm_sq();
    if rn2 == 0.0 {
        return Err(SelectionError::ZeroResidual);
    }
    let (_, max) = state.max_ratio();
    let f = state.norms.frobenius_sq();
    let epsilon = theta * max / rn2 + (1.0 - theta) / f;
    // ε‖r‖² without the division round trip; equals `max` exactly at θ = 1.
    let threshold = (theta * max + (1.0 - theta) * rn2 / f).min(max);
    let index_set = index_set_above(state, threshold);
    let row = if index_set.len() == 1 {
        index_set[0]
    } else {
        let prefix = prefix_sums(index_set.iter().map(|&i| state.residual[i].powi(2)));
        index_set[draw_from_prefix(&prefix, rng)]
    };
    Ok(GreedyDraw {
        epsilon,
        index_set,
        row,
    })
}

/// Greedy randomized Kaczmarz row.
pub fn select_grk<R: Rng + ?Sized>(
    state: &SelectionState<'_>,
    rng: &mut R,
) -> Result<usize, SelectionError> {
    greedy_draw(state, 0.5, rng).map(|d| d.row)
}

/// Relaxed greedy row for `theta ∈ [0, 1]`.
pub fn select_rgrk<R: Rng + ?Sized>(
    state: &SelectionState<'_>,
    theta: f64,
    rng: &mut R,
) -> Result<usize, SelectionError> {
    greedy_draw(state, theta, rng).map(|d| d.row)
}

/// Full probability vector of the relaxed greedy rule (zero outside `υ_k`).
pub fn greedy_probabilities(
    state: &SelectionState<'_>,
    theta: f64,
) -> Result<Vec<f64>, SelectionError> {
    let rn2 = state.residual_norm_sq();
    if rn2 == 0.0 {
        return Err(SelectionError::ZeroResidual);
    }
    let (_, max) = state.max_ratio();
    let threshold = (theta * max + (1.0 - theta) * rn2 / state.norms.frobenius_sq()).min(max);
    let set = index_set_above(state, threshold);
    let total: f64 = set.iter().map(|&i| state.residual[i].powi(2)).sum();
    let mut p = vec![0.0; state.residual.len()];
    for i in set {
        p[i] = state.residual[i].powi(2) / total;
    }
    Ok(p)
}

/// Probabilities proportional to `(|rᵢ|/‖A₍ᵢ₎‖)^t`, normalized by the maximal
/// ratio before exponentiation so large `t` neither overflows nor underflows
/// to an all-zero vector.
pub fn power_t_probabilities(
    state: &SelectionState<'_>,
    t: u32,
) -> Result<Vec<f64>, SelectionError> {
    let weights = power_t_weights(state, t)?;
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

fn power_t_weights(state: &SelectionState<'_>, t: u32) -> Result<Vec<f64>, SelectionError> {
    // Unsquared ratios: squaring would underflow for residuals below ~1e-154.
    let h: Vec<f64> = (0..state.residual.len())
        .map(|i| state.residual[i].abs() / state.norms.norm_sq(i).sqrt())
        .collect();
    let max = h.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Err(SelectionError::ZeroResidual);
    }
    let t = i32::try_from(t).unwrap_or(i32::MAX);
    Ok(h.into_iter().map(|v| (v / max).powi(t)).collect())
}

/// Power-`t` residual-homogenizing row.
pub fn select_power_t<R: Rng + ?Sized>(
    state: &SelectionState<'_>,
    t: u32,
    rng: &mut R,
) -> Result<usize, SelectionError> {
    let weights = power_t_weights(state, t)?;
    let prefix = prefix_sums(weights.into_iter());
    Ok(draw_from_prefix(&prefix, rng))
}

/// Largest homogenized residual (PRK), smallest index on ties.
pub fn select_prk(state: &SelectionState<'_>) -> Result<usize, SelectionError> {
    let (i, max) = state.max_ratio();
    if max == 0.0 {
        return Err(SelectionError::ZeroResidual);
    }
    Ok(i)
}

/// Number of rows drawn per sample: `max(1, ⌈η·m⌉)`, at most `m`.
pub fn sample_size(m: usize, eta: f64) -> usize {
    // The relative shave keeps products like 0.05·20000 from rounding up a row.
    let raw = (eta * m as f64 * (1.0 - 1e-12)).ceil();
    (raw as usize).clamp(1, m)
}

/// Z statistic `(ω̄ − μ)/(s/√k)` of the squared row norms of a sample of size
/// `k`, with `s` the standard deviation using divisor `k`. Zero when `s = 0`
/// or when the sample is the whole population.
pub fn z_score(sample: &[usize], norms: &RowNormCache, mu: f64) -> Result<f64, SelectionError> {
    if sample.is_empty() {
        return Err(SelectionError::EmptySample);
    }
    if sample.len() == norms.len() {
        return Ok(0.0);
    }
    let k = sample.len() as f64;
    let mean = sample.iter().map(|&i| norms.norm_sq(i)).sum::<f64>() / k;
    let var = sample
        .iter()
        .map(|&i| (norms.norm_sq(i) - mean).powi(2))
        .sum::<f64>()
        / k;
    let s = var.sqrt();
    if s == 0.0 {
        return Ok(0.0);
    }
    Ok((mean - mu) / (s / k.sqrt()))
}

/// Outcome of one gated sampling round.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    /// Distinct row indices, `max(1, ⌈η·m⌉)` of them.
    pub indices: Vec<usize>,
    pub z_score: f64,
    pub accepted: bool,
    /// Draws made, including the accepted one.
    pub attempts: usize,
    /// Set when the attempt cap was hit and the smallest-`|Z|` draw was kept.
    pub capped: bool,
}

/// Simple random sampling without replacement (partial Fisher–Yates over a
/// persistent index pool) with Z-test gating.
#[derive(Debug, Clone)]
pub struct SimpleRandomSampler {
    pool: Vec<usize>,
    size: usize,
    gate: SampleGate,
    mu: f64,
}

impl SimpleRandomSampler {
    pub fn new(norms: &RowNormCache, gate: SampleGate) -> Result<Self, SelectionError> {
        Self::with_mean(norms, gate, norms.mean())
    }

    pub fn with_mean(
        norms: &RowNormCache,
        gate: SampleGate,
        mu: f64,
    ) -> Result<Self, SelectionError> {
        gate.validate()?;
        let m = norms.len();
        Ok(Self {
            pool: (0..m).collect(),
            size: sample_size(m, gate.eta),
            gate,
            mu,
        })
    }

    pub fn sample_size(&self) -> usize {
        self.size
    }

    pub fn gate(&self) -> &SampleGate {
        &self.gate
    }

    fn shuffle_prefix<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let m = self.pool.len();
        if self.size == m {
            return;
        }
        for j in 0..self.size {
            let k = rng.random_range(j..m);
            self.pool.swap(j, k);
        }
    }

    /// Draws until the gate accepts or the attempt cap is reached.
    pub fn draw<R: Rng + ?Sized>(&mut self, norms: &RowNormCache, rng: &mut R) -> SampleSet {
        let mut best: Option<(f64, Vec<usize>)> = None;
        for attempt in 1..=self.gate.max_attempts {
            self.shuffle_prefix(rng);
            let indices = &self.pool[..self.size];
            let z = z_score(indices, norms, self.mu).expect("sample size is at least 1");
            if self.gate.accepts(z) {
                return SampleSet {
                    indices: indices.to_vec(),
                    z_score: z,
                    accepted: true,
                    attempts: attempt,
                    capped: false,
                };
            }
            if best.as_ref().is_none_or(|(bz, _)| z.abs() < bz.abs()) {
                best = Some((z, indices.to_vec()));
            }
        }
        let (z, indices) = best.expect("at least one attempt");
        SampleSet {
            indices,
            z_score: z,
            accepted: true,
            attempts: self.gate.max_attempts,
            capped: true,
        }
    }
}

/// One gated sample over `m = norms.len()` rows from a fresh index pool.
pub fn draw_sample<R: Rng + ?Sized>(
    norms: &RowNormCache,
    gate: SampleGate,
    mu: f64,
    rng: &mut R,
) -> Result<SampleSet, SelectionError> {
    Ok(SimpleRandomSampler::with_mean(norms, gate, mu)?.draw(norms, rng))
}

/// Largest homogenized residual over the sampled rows, smallest index on ties.
/// `residual_at(i)` only has to be valid for sampled `i`.
pub fn select_prks(
    sample: &[usize],
    norms: &RowNormCache,
    residual_at: impl Fn(usize) -> f64,
) -> Result<usize, SelectionError> {
    let mut best: Option<(usize, f64)> = None;
    for &i in sample {
        let r = residual_at(i);
        let v = r * r / norms.norm_sq(i);
        best = match best {
            Some((bi, bv)) if bv > v || (bv == v && bi < i) => Some((bi, bv)),
            _ => Some((i, v)),
        };
    }
    match best {
        None => Err(SelectionError::EmptySample),
        Some((_, 0.0)) => Err(SelectionError::AllSampledResidualsZero),
        Some((i, _)) => Ok(i),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn norms_of(rows: &[Vec<f64>]) -> RowNormCache {
        Matrix::from_rows(rows).unwrap().row_norms().unwrap()
    }

    fn identity_norms(m: usize) -> RowNormCache {
        Matrix::identity(m).unwrap().row_norms().unwrap()
    }

    #[test]
    fn cyclic_wraps() {
        assert_eq!(select_cyclic(0, 5), 0);
        assert_eq!(select_cyclic(5, 5), 0);
        assert_eq!(select_cyclic(7, 5), 2);
    }

    #[test]
    fn rk_single_row_always_zero() {
        let norms = norms_of(&[vec![2.0, 1.0]]);
        let s = NormWeightedSampler::new(&norms);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!((0..100).all(|_| select_rk(&s, &mut rng) == 0));
    }

    #[test]
    fn grk_running_example() {
        let norms = identity_norms(2);
        let r = [3.0, 4.0];
        let st = SelectionState::new(&r, &norms);
        let eps = grk_epsilon(&st).unwrap();
        assert!((eps - 0.57).abs() < 1e-15);
        assert_eq!(grk_index_set(&st, eps), vec![1]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            assert_eq!(select_grk(&st, &mut rng).unwrap(), 1);
        }
    }

    #[test]
    fn grk_uniform_residuals() {
        let m = 6;
        let norms = identity_norms(m);
        let r = vec![2.0; m];
        let st = SelectionState::new(&r, &norms);
        let eps = grk_epsilon(&st).unwrap();
        assert!((eps - 1.0 / m as f64).abs() < 1e-15);
        assert_eq!(grk_index_set(&st, eps), (0..m).collect::<Vec<_>>());
        let p = greedy_probabilities(&st, 0.5).unwrap();
        assert!(p.iter().all(|&v| (v - 1.0 / m as f64).abs() < 1e-15));
    }

    #[test]
    fn grk_epsilon_lower_bound_and_zero_residual() {
        let norms = norms_of(&[vec![1.0, 2.0], vec![3.0, 0.5], vec![0.1, 1.0]]);
        let r = [0.3, -0.2, 1.0];
        let st = SelectionState::new(&r, &norms);
        assert!(grk_epsilon(&st).unwrap() >= 0.5 / norms.frobenius_sq());
        let zero = [0.0; 3];
        let st = SelectionState::new(&zero, &norms);
        assert_eq!(grk_epsilon(&st), Err(SelectionError::ZeroResidual));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(select_grk(&st, &mut rng), Err(SelectionError::ZeroResidual));
        assert_eq!(select_prk(&st), Err(SelectionError::ZeroResidual));
        assert_eq!(select_power_t(&st, 2, &mut rng), Err(SelectionError::ZeroResidual));
    }

    #[test]
    fn rgrk_theta_examples() {
        let norms = identity_norms(2);
        let r = [3.0, 4.0];
        let st = SelectionState::new(&r, &norms);
        assert_eq!(rgrk_epsilon(&st, 0.5).unwrap(), grk_epsilon(&st).unwrap());
        let e1 = rgrk_epsilon(&st, 1.0).unwrap();
        assert!((e1 - 0.64).abs() < 1e-15);
        assert_eq!(grk_index_set(&st, e1), vec![1]);
        // θ = 0: ε = 1/‖A‖_F² = 0.5, threshold 12.5: only row 1 (16 ≥ 12.5, 9 < 12.5).
        let e0 = rgrk_epsilon(&st, 0.0).unwrap();
        assert_eq!(e0, 0.5);
        assert_eq!(grk_index_set(&st, e0), vec![1]);
    }

    #[test]
    fn power_t_examples() {
        let norms = identity_norms(2);
        let r = [3.0, 4.0];
        let st = SelectionState::new(&r, &norms);
        let p = power_t_probabilities(&st, 2).unwrap();
        assert!((p[0] - 9.0 / 25.0).abs() < 1e-15);
        assert!((p[1] - 16.0 / 25.0).abs() < 1e-15);

        let r = [1.5; 4];
        let norms4 = identity_norms(4);
        let st = SelectionState::new(&r, &norms4);
        for t in [1, 3, 64] {
            let p = power_t_probabilities(&st, t).unwrap();
            assert!(p.iter().all(|&v| (v - 0.25).abs() < 1e-15));
        }
    }

    #[test]
    fn power_t_large_t_does_not_underflow() {
        let norms = identity_norms(3);
        let r = [1e-200, 3e-200, 2e-200];
        let st = SelectionState::new(&r, &norms);
        let p = power_t_probabilities(&st, 1000).unwrap();
        assert_eq!(p[1], 1.0);
    }

    #[test]
    fn prk_examples() {
        let norms = norms_of(&[vec![1.0, 0.0], vec![0.0, 2.0]]);
        let r = [1.0, 4.0];
        assert_eq!(select_prk(&SelectionState::new(&r, &norms)).unwrap(), 1);

        let norms = identity_norms(3);
        let r = [2.0, -2.0, 2.0];
        assert_eq!(select_prk(&SelectionState::new(&r, &norms)).unwrap(), 0);
    }

    #[test]
    fn z_score_examples() {
        let norms = identity_norms(5);
        assert_eq!(z_score(&[0, 3], &norms, norms.mean()).unwrap(), 0.0);

        let norms = norms_of(&[vec![1.0], vec![1.0], vec![3f64.sqrt()], vec![3f64.sqrt()]]);
        let mu = 2.0;
        let z = z_score(&[0, 2], &norms, mu).unwrap();
        assert!(z.abs() < 1e-15);
        assert_eq!(z_score(&[3, 1, 0, 2], &norms, norms.mean()).unwrap(), 0.0);
        assert_eq!(z_score(&[], &norms, mu), Err(SelectionError::EmptySample));
    }

    #[test]
    fn z_score_hand_value() {
        // Squared norms [1, 4, 9, 16], μ = 7.5, sample {1, 2}: ω̄ = 6.5, s = 2.5,
        // Z = (6.5 − 7.5)/(2.5/√2) = −√2/2.5.
        let norms = norms_of(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0]]);
        let z = z_score(&[1, 2], &norms, norms.mean()).unwrap();
        assert!((z + 2f64.sqrt() / 2.5).abs() < 1e-14);
    }

    #[test]
    fn draw_sample_full_population_and_no_gate() {
        let norms = norms_of(&[vec![1.0], vec![5.0], vec![2.0], vec![9.0]]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = draw_sample(&norms, SampleGate::new(1.0, 1.96), norms.mean(), &mut rng).unwrap();
        assert_eq!(s.indices, vec![0, 1, 2, 3]);
        assert_eq!(s.z_score, 0.0);
        assert_eq!(s.attempts, 1);

        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = draw_sample(&norms, SampleGate::new(0.5, f64::INFINITY), norms.mean(), &mut rng)
                .unwrap();
            assert_eq!(s.attempts, 1);
            assert_eq!(s.indices.len(), 2);
        }
    }

    #[test]
    fn draw_sample_cap_keeps_smallest_abs_z() {
        // Squared norms 1, 4, 9, 16, 25: no pair has mean μ = 11, so Z ≠ 0 always.
        let norms = norms_of(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0], vec![5.0]]);
        let gate = SampleGate {
            eta: 0.4,
            q: 1e-300,
            mode: ZTestMode::TwoSided,
            max_attempts: 7,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut sampler = SimpleRandomSampler::new(&norms, gate).unwrap();
        let s = sampler.draw(&norms, &mut rng);
        assert!(s.capped && s.accepted);
        assert_eq!(s.attempts, 7);
        assert_eq!(s.indices.len(), 2);
        assert_eq!(s.z_score, z_score(&s.indices, &norms, 11.0).unwrap());

        // Replaying the same seed, no draw has a smaller |Z|.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut replay = SimpleRandomSampler::new(&norms, SampleGate { max_attempts: 1, ..gate }).unwrap();
        for _ in 0..7 {
            let d = replay.draw(&norms, &mut rng);
            assert!(d.z_score.abs() >= s.z_score.abs());
        }
    }

    #[test]
    fn sample_size_rounding() {
        assert_eq!(sample_size(20000, 0.05), 1000);
        assert_eq!(sample_size(10, 0.01), 1);
        assert_eq!(sample_size(10, 0.15), 2);
        assert_eq!(sample_size(7, 1.0), 7);
    }

    #[test]
    fn gate_validation() {
        assert!(SampleGate::new(0.0, 1.0).validate().is_err());
        assert!(SampleGate::new(1.5, 1.0).validate().is_err());
        assert!(SampleGate::new(0.5, 0.0).validate().is_err());
        assert!(SampleGate::new(0.5, f64::INFINITY).validate().is_ok());
        assert!(SelectionStrategy::RelaxedGreedy { theta: 1.2 }.validate().is_err());
        assert!(SelectionStrategy::PowerT { t: 0 }.validate().is_err());
    }

    #[test]
    fn prks_examples() {
        let norms = norms_of(&[vec![1.0, 0.0], vec![0.0, 2.0], vec![0.0, 4.0]]);
        let r = [1.0, 4.0, 8.0];
        // Ratios are [1, 2, 2]; over {0, 1} the winner is row 1.
        assert_eq!(select_prks(&[0, 1], &norms, |i| r[i]).unwrap(), 1);
        assert_eq!(select_prks(&[2], &norms, |i| r[i]).unwrap(), 2);
        assert_eq!(
            select_prks(&[0, 1, 2], &norms, |i| r[i]).unwrap(),
            select_prk(&SelectionState::new(&r, &norms)).unwrap()
        );
        // Order of the sample does not affect tie-breaking.
        assert_eq!(select_prks(&[2, 1, 0], &norms, |i| r[i]).unwrap(), 1);
        let zero = [0.0; 3];
        assert_eq!(
            select_prks(&[0, 2], &norms, |i| zero[i]),
            Err(SelectionError::AllSampledResidualsZero)
        );
    }

    #[test]
    fn prefix_draw_skips_zero_weights() {
        let prefix = [0.0, 1.0, 1.0, 3.0];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let i = draw_from_prefix(&prefix, &mut rng);
            assert!(i == 1 || i == 3);
        }
    }
}
