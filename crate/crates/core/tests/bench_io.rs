use kaczmarz::bench::*;
use kaczmarz::engine::HistoryEntry;
use kaczmarz::*;
use proptest::prelude::*;
use tempfile::tempdir;

fn sparse_strategy() -> impl Strategy<Value = Matrix> {
    (1usize..30, 1usize..30).prop_flat_map(|(m, n)| {
        prop::collection::vec((0..m, 0..n, prop::num::f64::NORMAL), 0..60)
            .prop_map(move |t| Matrix::from_triplets(m, n, &t).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn matrix_market_round_trip(a in sparse_strategy()) {
        let mut buf = Vec::new();
        write_matrix_market_to(&a, &mut buf).unwrap();
        let back = parse_matrix_market(buf.as_slice()).unwrap();
        prop_assert_eq!((back.rows(), back.cols(), back.nnz()), (a.rows(), a.cols(), a.nnz()));
        let lhs: Vec<_> = a.triplets().map(|(i, j, v)| (i, j, v.to_bits())).collect();
        let rhs: Vec<_> = back.triplets().map(|(i, j, v)| (i, j, v.to_bits())).collect();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn history_csv_round_trip(metrics in prop::collection::vec(prop_oneof![
        prop::num::f64::NORMAL.prop_map(f64::abs),
        Just(f64::INFINITY),
        Just(0.0),
    ], 0..40)) {
        let hist: Vec<HistoryEntry> = metrics
            .iter()
            .enumerate()
            .map(|(k, &m)| HistoryEntry { iteration: k * 3, row: (k > 0).then_some(k), metric: m })
            .collect();
        let table = HistoryTable::single("prk", &hist);
        let dir = tempdir().unwrap();
        let path = dir.path().join("h.csv");
        table.write_csv(&path).unwrap();
        prop_assert_eq!(read_history_csv(&path).unwrap(), table);
    }
}

#[test]
fn transposed_read() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("a.mtx");
    let a = gen_sparse_random(7, 4, 0.5, 1);
    write_matrix_market(&a, &path).unwrap();
    let t = read_matrix_market(&path, true).unwrap();
    assert_eq!(t.to_dense_vec(), a.transpose().to_dense_vec());
}

#[test]
fn dense_matrix_market_round_trip() {
    let a = gen_gaussian(5, 3, 2);
    let mut buf = Vec::new();
    write_matrix_market_to(&a, &mut buf).unwrap();
    assert!(buf.starts_with(b"%%MatrixMarket matrix array real general"));
    assert_eq!(parse_matrix_market(buf.as_slice()).unwrap().to_dense_vec(), a.to_dense_vec());
}

#[test]
fn history_csv_shapes() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("h.csv");
    let empty = HistoryTable::single("rk", &[]);
    empty.write_csv(&path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), "iteration,rk\n");
    assert_eq!(read_history_csv(&path).unwrap(), empty);

    let three = [
        HistoryEntry { iteration: 0, row: None, metric: f64::INFINITY },
        HistoryEntry { iteration: 1, row: Some(4), metric: 0.25 },
        HistoryEntry { iteration: 2, row: Some(1), metric: 1e-7 },
    ];
    let t = HistoryTable::single("prk", &three);
    t.write_csv(&path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 4);
    assert_eq!(read_history_csv(&path).unwrap(), t);
}

fn small_experiment() -> ExperimentSpec {
    ExperimentSpec::new(
        InstanceSource::GaussianSynthetic { m: 120, n: 15, seed: 3 },
        vec![
            MethodSpec::Linear(SelectionStrategy::NormWeighted),
            MethodSpec::Linear(SelectionStrategy::Greedy),
            MethodSpec::Linear(SelectionStrategy::MaxHomogenized),
            MethodSpec::Ridge { method: RidgeMethod::Prk, norms: NormMode::Exact, tau: 0.1 },
        ],
        1e-6,
    )
    .trials(3)
    .record_history(10)
}

#[test]
fn report_json_round_trip_and_determinism() {
    let rep = run_experiment(&small_experiment()).unwrap();
    assert_eq!(rep.methods.len(), 4);
    assert!(rep.methods.iter().all(|m| m.history.is_some()));
    let back = BenchReport::from_json(&rep.to_json()).unwrap();
    assert_eq!(back, rep);

    let dir = tempdir().unwrap();
    let path = dir.path().join("r.json");
    rep.write_json(&path).unwrap();
    assert_eq!(BenchReport::read_json(&path).unwrap(), rep);

    let again = run_experiment(&small_experiment()).unwrap();
    assert_eq!(again.without_timings().to_json(), rep.without_timings().to_json());
}

#[test]
fn history_csv_from_report() {
    let rep = run_experiment(&small_experiment()).unwrap();
    let dir = tempdir().unwrap();
    let path = dir.path().join("h.csv");
    emit_history_csv(&rep, &path).unwrap();
    let table = read_history_csv(&path).unwrap();
    assert_eq!(table, HistoryTable::from_report(&rep));
    assert_eq!(table.methods.len(), 4);
    assert!(table.rows[0].1.iter().all(|v| *v == Some(f64::INFINITY)));
}

#[test]
fn in_memory_instance_is_left_untouched() {
    let a = gen_sparse_random(80, 20, 0.2, 9);
    let copy = a.clone();
    let spec = ExperimentSpec::new(
        InstanceSource::InMemory { name: "mem".into(), matrix: a.clone() },
        vec![MethodSpec::Linear(SelectionStrategy::Cyclic)],
        1e-4,
    )
    .trials(1);
    let rep = run_experiment(&spec).unwrap();
    assert_eq!(rep.instance.name, "mem");
    assert_eq!(a, copy);
}

#[test]
fn chessboard_ridge_iterations_near_published_count() {
    let a = gen_chessboard_boundary(6, 6, 2);
    assert_eq!((a.rows(), a.cols(), a.nnz()), (2400, 450, 7200));
    let p = make_ridge_problem(a, 0.1).unwrap();
    let cfg = RidgeConfig::new(RidgeMethod::Prk, NormMode::Exact)
        .x_star(p.x_star.clone())
        .tol(1e-3);
    let rep = ridge_solve(&p.a, &p.b, p.tau, &cfg).unwrap();
    let it = rep.solve.iterations as f64;
    assert!(rep.solve.terminated.converged());
    assert!((557.0 * 0.5..=557.0 * 1.5).contains(&it), "{it}");
}

#[test]
fn missing_file_errors_name_the_path() {
    let err = read_matrix_market("/nonexistent/q.mtx", false).unwrap_err();
    assert!(err.to_string().contains("/nonexistent/q.mtx"));
}
