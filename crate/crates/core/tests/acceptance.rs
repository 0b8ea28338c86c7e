//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

mod common;

use std::time::{Duration, Instant};

use common::{dense_solve, dist_sq, norm, rel_diff, seeded_system, to_na};
use kaczmarz::bench::*;
use kaczmarz::engine::{SelectionDetail, StepEvent};
use kaczmarz::ridge::{ridge_row_norms_exact, ridge_y_estimate};
use kaczmarz::selection::*;
use kaczmarz::*;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::tempdir;

type Check = Result<String, String>;
type Trace = (Vec<(usize, Vec<f64>)>, Vec<f64>);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn strategies() -> Vec<SelectionStrategy> {
    vec![
        SelectionStrategy::Cyclic,
        SelectionStrategy::NormWeighted,
        SelectionStrategy::Greedy,
        SelectionStrategy::RelaxedGreedy { theta: 0.75 },
        SelectionStrategy::PowerT { t: 6 },
        SelectionStrategy::MaxHomogenized,
        SelectionStrategy::SampledMax(SampleGate::new(0.2, SampleGate::DEFAULT_Q)),
    ]
}

fn projection_and_pythagoras() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2020);
    let mut steps = 0usize;
    let (mut worst_row, mut worst_pyth) = (0.0f64, 0.0f64);
    let mut unconverged = 0;
    for seed in 0..100u64 {
        let n = rng.random_range(2..=50);
        let m = rng.random_range(n..=200);
        let sys = seeded_system(seed, m, n);
        let (a, b) = (sys.a(), sys.b());
        let xs = sys.x_star().unwrap().to_vec();
        let norms = a.row_norms().unwrap();
        for s in strategies() {
            let mut obs = |e: &StepEvent| {
                let i = e.row;
                let scale = b[i].abs() + norms.norm_sq(i).sqrt() * norm(e.x_after);
                let active = (b[i] - a.row_dot(i, e.x_after).unwrap()).abs() / scale;
                let before = dist_sq(e.x_before, &xs);
                let after = dist_sq(e.x_after, &xs);
                let step = dist_sq(e.x_after, e.x_before);
                let pyth = (after - (before - step)).abs() / before;
                worst_row = worst_row.max(active);
                worst_pyth = worst_pyth.max(pyth);
                steps += 1;
            };
            let cfg = SolveConfig::new(s).tol(1e-10).seed(seed).max_iters(50_000);
            let rep = solve_with_observer(&sys, &cfg, &mut obs).map_err(|e| e.to_string())?;
            if !rep.terminated.converged() {
                unconverged += 1;
            }
        }
    }
    ensure(worst_row <= 1e-10, || format!("active-row residual {worst_row:.2e}"))?;
    ensure(worst_pyth <= 1e-8, || format!("Pythagoras deviation {worst_pyth:.2e}"))?;
    Ok(format!(
        "{steps} steps, max active residual {worst_row:.1e}, max identity deviation {worst_pyth:.1e} \
         ({unconverged} of 700 runs hit the iteration cap)"
    ))
}

fn row_trace(sys: &LinearSystem, cfg: &SolveConfig) -> Result<Trace, String> {
    let mut t = Vec::new();
    let mut obs = |e: &StepEvent| t.push((e.row, e.x_after.to_vec()));
    let rep = solve_with_observer(sys, cfg, &mut obs).map_err(|e| e.to_string())?;
    Ok((t, rep.x_final))
}

fn greedy_trace(sys: &LinearSystem, cfg: &SolveConfig) -> Result<Vec<GreedyDraw>, String> {
    let mut t = Vec::new();
    let mut obs = |e: &StepEvent| {
        if let SelectionDetail::Greedy(d) = e.detail {
            t.push(d.clone());
        }
    };
    solve_with_observer(sys, cfg, &mut obs).map_err(|e| e.to_string())?;
    Ok(t)
}

fn trace_equivalences() -> Check {
    let no_gate = SampleGate::new(1.0, f64::INFINITY);
    let mut compared = 0usize;
    for seed in 0..10u64 {
        let sys = seeded_system(seed, 150, 30);
        let prk = row_trace(&sys, &SolveConfig::new(SelectionStrategy::MaxHomogenized).seed(seed))?;
        let rgrk1 = row_trace(
            &sys,
            &SolveConfig::new(SelectionStrategy::RelaxedGreedy { theta: 1.0 }).seed(seed + 1),
        )?;
        ensure(prk == rgrk1, || format!("PRK vs RGRK(1) differ on instance {seed}"))?;
        let prks = row_trace(&sys, &SolveConfig::new(SelectionStrategy::SampledMax(no_gate)).seed(seed + 2))?;
        ensure(prk == prks, || format!("PRK vs PRKS(1, inf) differ on instance {seed}"))?;

        let grk = greedy_trace(&sys, &SolveConfig::new(SelectionStrategy::Greedy).seed(seed))?;
        let half = greedy_trace(
            &sys,
            &SolveConfig::new(SelectionStrategy::RelaxedGreedy { theta: 0.5 }).seed(seed),
        )?;
        ensure(!grk.is_empty() && grk == half, || format!("GRK vs RGRK(0.5) differ on instance {seed}"))?;

        let a = gen_sparse_random(40, 160, 0.05, seed);
        let p = make_ridge_problem(a, 0.01).map_err(|e| e.to_string())?;
        let run = |method| {
            let cfg = RidgeConfig::new(method, NormMode::Exact)
                .x_star(p.x_star.clone())
                .seed(seed)
                .history_stride(1);
            ridge_solve(&p.a, &p.b, p.tau, &cfg).map(|r| {
                let rows: Vec<_> = r.solve.history.iter().map(|h| h.row).collect();
                (rows, r.solve.x_final)
            })
        };
        let r1 = run(RidgeMethod::Prk).map_err(|e| e.to_string())?;
        let r2 = run(RidgeMethod::Prks(no_gate)).map_err(|e| e.to_string())?;
        ensure(r1 == r2, || format!("ridge PRK vs ridge PRKS(1, inf) differ on instance {seed}"))?;
        compared += prk.0.len() + grk.len() + r1.0.len();
    }
    Ok(format!("4 pairs x 10 instances identical, {compared} steps compared"))
}

fn mean_its(report: &BenchReport) -> Vec<f64> {
    report.methods.iter().map(|m| m.mean_it).collect()
}

fn linear_experiment(m: usize, n: usize, methods: Vec<SelectionStrategy>) -> Result<BenchReport, String> {
    let spec = ExperimentSpec::new(
        InstanceSource::GaussianSynthetic { m, n, seed: 0 },
        methods.into_iter().map(MethodSpec::Linear).collect(),
        1e-6,
    );
    let rep = run_experiment(&spec).map_err(|e| e.to_string())?;
    if let Some(f) = rep.methods.iter().find(|m| m.failed) {
        return Err(format!("{} did not converge", f.method));
    }
    Ok(rep)
}

fn desk_scale_table() -> Check {
    let rep = linear_experiment(
        1000,
        200,
        vec![
            SelectionStrategy::NormWeighted,
            SelectionStrategy::Greedy,
            SelectionStrategy::MaxHomogenized,
        ],
    )?;
    let v = mean_its(&rep);
    let (rk, grk, prk) = (v[0], v[1], v[2]);
    let detail = format!("RK {rk:.1}, GRK {grk:.1}, PRK {prk:.1}");
    ensure((1900.0..=7600.0).contains(&rk), || format!("RK out of range: {detail}"))?;
    ensure((300.0..=1200.0).contains(&grk), || format!("GRK out of range: {detail}"))?;
    ensure((256.0..=767.0).contains(&prk), || format!("PRK out of range: {detail}"))?;
    ensure(prk <= grk && grk < rk, || format!("ordering violated: {detail}"))?;
    Ok(detail)
}

fn power_t_monotone() -> Check {
    let ts = [2, 4, 6, 8, 64];
    let mut methods: Vec<_> = ts.iter().map(|&t| SelectionStrategy::PowerT { t }).collect();
    methods.push(SelectionStrategy::MaxHomogenized);
    let v = mean_its(&linear_experiment(1000, 100, methods)?);
    let detail = format!(
        "t=2 {:.1}, t=4 {:.1}, t=6 {:.1}, t=8 {:.1}, t=64 {:.1}, PRK {:.1}",
        v[0], v[1], v[2], v[3], v[4], v[5]
    );
    for w in v[..4].windows(2) {
        ensure(w[1] <= 1.1 * w[0], || format!("not nonincreasing: {detail}"))?;
    }
    ensure((v[4] - v[5]).abs() <= 0.05 * v[5], || format!("t=64 vs PRK beyond 5%: {detail}"))?;
    Ok(detail)
}

fn sampling_between_prk_and_grk() -> Check {
    let etas = [0.5, 0.2, 0.05];
    let mut methods = vec![SelectionStrategy::MaxHomogenized, SelectionStrategy::Greedy];
    methods.extend(etas.iter().map(|&e| SelectionStrategy::SampledMax(SampleGate::new(e, 1.96))));
    let v = mean_its(&linear_experiment(20_000, 50, methods)?);
    let detail = format!(
        "PRK {:.1}, GRK {:.1}, PRKS eta=0.5 {:.1}, eta=0.2 {:.1}, eta=0.05 {:.1}",
        v[0], v[1], v[2], v[3], v[4]
    );
    for &it in &v[2..] {
        ensure(it >= v[0] && it <= v[1], || format!("outside [PRK, GRK]: {detail}"))?;
    }
    Ok(detail)
}

fn rk_rate_bound() -> Check {
    let a = gen_gaussian(200, 40, 7);
    let na = to_na(&a);
    let sv = na.clone().svd(false, false).singular_values;
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let kappa_inv2 = smin * smin / na.norm_squared();
    let sys = make_consistent_system(a).map_err(|e| e.to_string())?;
    let xs = sys.x_star().unwrap();
    let e0 = dist_sq(&[0.0; 40], xs);
    let k = 500;
    let mut total = 0.0;
    let trials = 50;
    for seed in 0..trials {
        let mut cfg = SolveConfig::new(SelectionStrategy::NormWeighted)
            .seed(seed)
            .tol(1e-300)
            .max_iters(k);
        cfg.detect_stagnation = false;
        let rep = solve(&sys, &cfg).map_err(|e| e.to_string())?;
        ensure(rep.iterations == k, || format!("trial {seed} stopped at {}", rep.iterations))?;
        total += dist_sq(&rep.x_final, xs) / e0;
    }
    let mean = total / trials as f64;
    let bound = (1.0 - kappa_inv2).powi(k as i32) * 3.0;
    ensure(mean <= bound, || format!("mean decay {mean:.3e} > bound {bound:.3e}"))?;
    Ok(format!("kappa^-2 {kappa_inv2:.4e}, mean decay {mean:.3e} <= {bound:.3e}"))
}

fn ridge_oracle_agreement() -> Check {
    let taus = [0.1, 0.01, 0.001];
    let sizes = [60, 80, 100];
    let mut worst = 0.0f64;
    let mut worst_spread = 0.0f64;
    let mut solves = 0;
    let mut min_sigma2 = f64::INFINITY;
    for inst in 0..20u64 {
        // Wide sparse instances, about 12 nonzeros per row: A Aᵀ is nonsingular
        // and its smallest eigenvalue sits well above the largest τ.
        let m = sizes[inst as usize % 3];
        let a = gen_sparse_random(m, 5 * m, 12.0 / (5 * m) as f64, 500 + inst);
        let na = to_na(&a);
        let gram = &na * na.transpose();
        let sigma2 = gram.symmetric_eigenvalues().min();
        ensure(sigma2 >= 10.0 * taus[0], || format!("instance {inst}: smallest eigenvalue {sigma2:.3}"))?;
        min_sigma2 = min_sigma2.min(sigma2);
        let mut exact_its = Vec::new();
        for &tau in &taus {
            let p = make_ridge_problem(a.clone(), tau).map_err(|e| e.to_string())?;
            let oracle = dense_solve(&gram + DMatrix::identity(m, m) * tau, &p.b);
            for (method, norms) in [
                (RidgeMethod::Prk, NormMode::Exact),
                (RidgeMethod::Prk, NormMode::Estimated),
                (RidgeMethod::Prks(SampleGate::new(0.1, 1.96)), NormMode::Exact),
            ] {
                let cfg = RidgeConfig::new(method, norms)
                    .x_star(p.x_star.clone())
                    .tol(1e-8)
                    .seed(inst);
                let rep = ridge_solve(&p.a, &p.b, tau, &cfg).map_err(|e| e.to_string())?;
                ensure(rep.solve.terminated.converged(), || {
                    format!("{method} {norms:?} on instance {inst}, tau {tau}: {:?}", rep.solve.terminated)
                })?;
                let err = rel_diff(&rep.solve.x_final, &oracle);
                ensure(err <= 1e-3, || format!("{method} {norms:?} instance {inst} tau {tau}: error {err:.2e}"))?;
                worst = worst.max(err);
                solves += 1;
                if method == RidgeMethod::Prk && norms == NormMode::Exact {
                    exact_its.push(rep.solve.iterations as f64);
                }
            }
        }
        let lo = exact_its.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = exact_its.iter().copied().fold(0.0, f64::max);
        let spread = (hi - lo) / lo;
        ensure(spread < 0.25, || format!("instance {inst}: iteration counts {exact_its:?} spread {spread:.2}"))?;
        worst_spread = worst_spread.max(spread);
    }
    Ok(format!(
        "{solves} solves, max error vs direct solve {worst:.1e}, max iteration spread over tau {:.1}%, \
         min eig(A Aᵀ) {min_sigma2:.2}",
        worst_spread * 100.0
    ))
}

fn y_sandwich() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut entries = 0usize;
    let mut violations = 0usize;
    for k in 0..100u64 {
        let m = rng.random_range(1..=60);
        let n = rng.random_range(1..=60);
        let tau = 10f64.powf(rng.random_range(-4.0..1.0));
        let a = match k % 3 {
            0 => gen_gaussian(m, n, k),
            1 => gen_sparse_random(m, n, 0.1, k),
            _ => {
                let t: Vec<_> = gen_sparse_random(m, n, 0.2, k)
                    .triplets()
                    .map(|(i, j, v)| (i, j, v.abs()))
                    .collect();
                Matrix::from_triplets(m, n, &t).unwrap()
            }
        };
        let ye = ridge_y_estimate(&a, tau);
        let z = ridge_row_norms_exact(&a, tau);
        for i in 0..m {
            // Rounding slack of a few ulps where the bounds are attained.
            let slack = 1.0 + 8.0 * f64::EPSILON;
            if ye.y1[i] > ye.y2[i] * slack || z[i] > ye.y2[i] * slack {
                violations += 1;
            }
            entries += 1;
        }
    }
    ensure(violations == 0, || format!("{violations} violations in {entries} entries"))?;
    Ok(format!("{entries} entries, 0 violations"))
}

fn frequency_check(probs: &[f64], draw: &mut dyn FnMut() -> usize, draws: usize) -> Result<f64, String> {
    let mut counts = vec![0usize; probs.len()];
    for _ in 0..draws {
        counts[draw()] += 1;
    }
    let mut worst = 0.0f64;
    for (i, (&c, &p)) in counts.iter().zip(probs).enumerate() {
        let freq = c as f64 / draws as f64;
        let sigma = (p * (1.0 - p) / draws as f64).sqrt();
        if sigma == 0.0 {
            ensure(c == 0 || p == 1.0, || format!("row {i} drawn with probability 0"))?;
            continue;
        }
        let dev = (freq - p).abs() / sigma;
        ensure(dev <= 3.0, || format!("row {i}: frequency {freq:.5} vs {p:.5} ({dev:.2} sigma)"))?;
        worst = worst.max(dev);
    }
    Ok(worst)
}

fn sampler_statistics() -> Check {
    let draws = 100_000;
    let a = gen_gaussian(12, 4, 31);
    let norms = a.row_norms().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);

    let sampler = NormWeightedSampler::new(&norms);
    let p_rk = NormWeightedSampler::probabilities(&norms);
    let rk = frequency_check(&p_rk, &mut || select_rk(&sampler, &mut rng), draws)?;

    let r: Vec<f64> = (0..12).map(|i| ((i * 7 % 12) as f64 - 5.5) * 0.3).collect();
    let state = SelectionState::new(&r, &norms);
    let p_grk = greedy_probabilities(&state, 0.5).map_err(|e| e.to_string())?;
    let support = p_grk.iter().filter(|p| **p > 0.0).count();
    ensure(support > 1, || "degenerate GRK support".into())?;
    let grk = frequency_check(&p_grk, &mut || select_grk(&state, &mut rng).unwrap(), draws)?;

    let all: Vec<usize> = (0..12).collect();
    let z = z_score(&all, &norms, norms.mean()).map_err(|e| e.to_string())?;
    ensure(z == 0.0, || format!("full-population z = {z}"))?;

    let big = gen_gaussian(400, 6, 2).row_norms().unwrap();
    let gate = SampleGate::new(0.05, 1.0);
    let replay = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..100)
            .map(|_| draw_sample(&big, gate, big.mean(), &mut rng).unwrap())
            .collect::<Vec<_>>()
    };
    ensure(replay(17) == replay(17), || "draw_sample replay differs".into())?;
    Ok(format!(
        "RK max {rk:.2} sigma, GRK max {grk:.2} sigma over {draws} draws; full-population z = 0; replay identical"
    ))
}

fn matrix_market_round_trip() -> Check {
    let dir = tempdir().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut nnz = 0;
    for k in 0..50 {
        let m = rng.random_range(1..200);
        let n = rng.random_range(1..200);
        let density = rng.random_range(0.005..0.2);
        let a = gen_sparse_random(m, n, density, k);
        // Values across many binades, including subnormal-adjacent ones.
        let t: Vec<_> = a
            .triplets()
            .map(|(i, j, v)| (i, j, v * 10f64.powi(rng.random_range(-300..300))))
            .collect();
        let a = Matrix::from_triplets(m, n, &t).unwrap();
        let path = dir.path().join(format!("m{k}.mtx"));
        write_matrix_market(&a, &path).map_err(|e| e.to_string())?;
        let back = read_matrix_market(&path, false).map_err(|e| e.to_string())?;
        let lhs: Vec<_> = a.triplets().map(|(i, j, v)| (i, j, v.to_bits())).collect();
        let rhs: Vec<_> = back.triplets().map(|(i, j, v)| (i, j, v.to_bits())).collect();
        ensure((back.rows(), back.cols()) == (m, n) && lhs == rhs, || format!("matrix {k} differs"))?;
        nnz += lhs.len();
    }
    Ok(format!("50 matrices, {nnz} entries bit-identical"))
}

fn main() {
    let criteria: [(&str, &str, Duration, fn() -> Check); 10] = [
        ("AC1", "projection exactness and Pythagoras identity", Duration::from_secs(30), projection_and_pythagoras),
        ("AC2", "trace equivalences", Duration::from_secs(10), trace_equivalences),
        ("AC3", "1000x200 iteration counts and ordering", Duration::from_secs(120), desk_scale_table),
        ("AC4", "power-t monotone in t", Duration::from_secs(60), power_t_monotone),
        ("AC5", "sampled max between PRK and GRK", Duration::from_secs(120), sampling_between_prk_and_grk),
        ("AC6", "RK rate bound", Duration::from_secs(60), rk_rate_bound),
        ("AC7", "ridge direct-solve agreement and tau insensitivity", Duration::from_secs(180), ridge_oracle_agreement),
        ("AC8", "y-estimate sandwich", Duration::from_secs(30), y_sandwich),
        ("AC9", "sampler statistics", Duration::from_secs(30), sampler_statistics),
        ("AC10", "Matrix Market round trip", Duration::from_secs(10), matrix_market_round_trip),
    ];
    let mut failed = 0;
    for (id, title, budget, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if elapsed <= budget => (true, d),
            Ok(d) => (false, format!("{d}; over the {budget:?} budget")),
            Err(e) => (false, e),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{id:<5} {} {title}: {detail} [{:.2}s]",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
