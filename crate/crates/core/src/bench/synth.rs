//! Synthetic instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::engine::{EngineError, LinearSystem};
use crate::matrix::Matrix;
use crate::ridge::ridge_apply;

/// Dense `m × n` matrix of i.i.d. standard normal entries, filled row by row.
pub fn gen_gaussian(m: usize, n: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..m * n).map(|_| rng.sample(StandardNormal)).collect();
    Matrix::dense(m, n, data).expect("m, n >= 1")
}

/// Sparse `m × n` matrix with Gaussian values at roughly `density·n` random
/// positions per row; every row gets at least one entry.
pub fn gen_sparse_random(m: usize, n: usize, density: f64, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_row = ((density * n as f64).round() as usize).clamp(1, n);
    let mut triplets = Vec::with_capacity(m * per_row);
    for i in 0..m {
        for _ in 0..per_row {
            let j = rng.random_range(0..n);
            let v: f64 = rng.sample(StandardNormal);
            triplets.push((i, j, v));
        }
    }
    Matrix::from_triplets(m, n, &triplets).expect("indices in range")
}

/// `b = A·1` with the all-ones vector as known solution.
pub fn make_consistent_system(a: Matrix) -> Result<LinearSystem, EngineError> {
    let x_star = vec![1.0; a.cols()];
    let b = a.matvec(&x_star)?;
    LinearSystem::new(a, b, Some(x_star))
}

/// Ridge instance `(A Aᵀ + τI) x = b` built from the all-ones solution.
#[derive(Debug, Clone)]
pub struct RidgeProblem {
    pub a: Matrix,
    pub tau: f64,
    pub b: Vec<f64>,
    pub x_star: Vec<f64>,
}

pub fn make_ridge_problem(a: Matrix, tau: f64) -> Result<RidgeProblem, EngineError> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(EngineError::Config(format!("tau must be positive, got {tau}")));
    }
    let x_star = vec![1.0; a.rows()];
    let b = ridge_apply(&a, tau, &x_star)?;
    Ok(RidgeProblem { a, tau, b, x_star })
}

/// Boundary map of a chessboard complex.
///
/// The vertices are the cells of a `board_rows × board_cols` board and the
/// simplices are sets of mutually non-attacking rooks. Row `s` of the result is
/// a `(dim+1)`-rook placement, column `t` a `dim`-rook placement, and entry
/// `(s, t)` is `(−1)^p` when `t` drops the `p`-th rook of `s` (cells ordered
/// by `r·board_cols + c`). Placements are enumerated lexicographically.
pub fn gen_chessboard_boundary(board_rows: usize, board_cols: usize, dim: usize) -> Matrix {
    let upper = rook_placements(board_rows, board_cols, dim + 1);
    let lower = rook_placements(board_rows, board_cols, dim);
    let index: std::collections::HashMap<&[usize], usize> = lower
        .iter()
        .enumerate()
        .map(|(k, p)| (p.as_slice(), k))
        .collect();
    let mut triplets = Vec::with_capacity(upper.len() * (dim + 1));
    let mut face = Vec::with_capacity(dim);
    for (s, cells) in upper.iter().enumerate() {
        for p in 0..cells.len() {
            face.clear();
            face.extend(cells.iter().enumerate().filter(|&(q, _)| q != p).map(|(_, &c)| c));
            let t = index[face.as_slice()];
            let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
            triplets.push((s, t, sign));
        }
    }
    Matrix::from_triplets(upper.len().max(1), lower.len().max(1), &triplets)
        .expect("faces are enumerated placements")
}

fn rook_placements(rows: usize, cols: usize, k: usize) -> Vec<Vec<usize>> {
    fn extend(
        rows: usize,
        cols: usize,
        k: usize,
        start: usize,
        used_cols: &mut Vec<bool>,
        current: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        // Cells increase with row-major index, so the next rook sits on a later row.
        let first_row = current.last().map_or(0, |&c| c / cols + 1);
        for cell in start.max(first_row * cols)..rows * cols {
            let c = cell % cols;
            if used_cols[c] {
                continue;
            }
            used_cols[c] = true;
            current.push(cell);
            extend(rows, cols, k, cell + 1, used_cols, current, out);
            current.pop();
            used_cols[c] = false;
        }
    }
    let mut out = Vec::new();
    extend(rows, cols, k, 0, &mut vec![false; cols], &mut Vec::new(), &mut out);
    out
}
