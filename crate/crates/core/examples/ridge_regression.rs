//! Matrix-free ridge regression on a chessboard-complex boundary matrix.

use kaczmarz::bench::{gen_chessboard_boundary, make_ridge_problem};
use kaczmarz::{ridge_solve, NormMode, RidgeConfig, RidgeMethod, SampleGate};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a = gen_chessboard_boundary(6, 6, 2);
    println!("A: {}x{}, {} nonzeros", a.rows(), a.cols(), a.nnz());
    for tau in [0.1, 0.01, 0.001] {
        let p = make_ridge_problem(a.clone(), tau)?;
        for (method, norms) in [
            (RidgeMethod::Prk, NormMode::Exact),
            (RidgeMethod::Prks(SampleGate::new(0.01, SampleGate::DEFAULT_Q)), NormMode::Exact),
            (RidgeMethod::Prk, NormMode::Estimated),
        ] {
            let cfg = RidgeConfig::new(method, norms).x_star(p.x_star.clone()).tol(1e-3);
            let rep = ridge_solve(&p.a, &p.b, tau, &cfg)?;
            println!(
                "tau {tau:<5} {:<28} {:<9} {:>6} iterations, {:>6} products",
                method.to_string(),
                format!("{norms:?}"),
                rep.solve.iterations,
                rep.applies + rep.transpose_applies
            );
        }
    }
    Ok(())
}
