#![allow(dead_code)]

use kaczmarz::bench::{gen_gaussian, gen_sparse_random, make_consistent_system};
use kaczmarz::{LinearSystem, Matrix};
use nalgebra::{DMatrix, DVector};

pub fn to_na(a: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.rows(), a.cols(), &a.to_dense_vec())
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Consistent system with `x* = 1`; even seeds dense Gaussian, odd seeds sparse.
pub fn seeded_system(seed: u64, m: usize, n: usize) -> LinearSystem {
    let a = if seed.is_multiple_of(2) {
        gen_gaussian(m, n, seed)
    } else {
        let mut a = gen_sparse_random(m, n, 0.3, seed);
        // Guarantee full column rank through a scaled identity block.
        let mut t: Vec<_> = a.triplets().collect();
        for j in 0..n.min(m) {
            t.push((j, j, 3.0));
        }
        a = Matrix::from_triplets(m, n, &t).unwrap();
        a
    };
    make_consistent_system(a).unwrap()
}

/// Dense solve of a square system, the direct-solve oracle.
pub fn dense_solve(k: DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let x = k
        .lu()
        .solve(&DVector::from_column_slice(b))
        .expect("nonsingular");
    x.iter().copied().collect()
}
