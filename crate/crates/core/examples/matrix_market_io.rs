//! Store a matrix transposed in Matrix Market, load it back with the transpose
//! flag, and solve the resulting tall system.

use kaczmarz::bench::{gen_sparse_random, make_consistent_system, read_matrix_market, write_matrix_market};
use kaczmarz::{solve, SelectionStrategy, SolveConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::temp_dir().join("kaczmarz_example.mtx");
    let a = gen_sparse_random(400, 60, 0.05, 3);
    write_matrix_market(&a.transpose(), &path)?;
    println!("wrote {}: {}x{}, {} nonzeros", path.display(), a.cols(), a.rows(), a.nnz());

    let stored = read_matrix_market(&path, false)?;
    assert_eq!(stored, a.transpose());
    let loaded = read_matrix_market(&path, true)?;
    assert_eq!(loaded.to_dense_vec(), a.to_dense_vec());
    println!("transposed on load: {}x{}", loaded.rows(), loaded.cols());

    let rep = solve(
        &make_consistent_system(loaded)?,
        &SolveConfig::new(SelectionStrategy::Greedy).tol(1e-3),
    )?;
    println!("{:?} after {} iterations", rep.terminated, rep.iterations);
    std::fs::remove_file(path)?;
    Ok(())
}
