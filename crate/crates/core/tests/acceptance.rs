//! End-to-end acceptance suite. Each criterion prints one PASS/FAIL line and
//! the test fails only when a criterion outside `EXPECTED_FAILURES` fails.
//!
//! Run it with `cargo test --release -p graphtc --test acceptance`. Setting
//! `ACCEPTANCE_ONLY=1,4,5d` restricts the run to the listed criteria.

use std::collections::BTreeMap;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use graphtc::algebra::{t_product, t_svd};
use graphtc::config::{ExperimentConfig, Source};
use graphtc::datagen::rng_from;
use graphtc::experiments::{median, spearman, theory_check};
use graphtc::graph::{aggregate, smoothness_analytic, smoothness_combinatorial, DynamicGraph, LaplacianTensor};
use graphtc::run::{execute, run, Command, Table, FACTORIZATIONS_PER_TRIAL};
use graphtc::solver::{solve, CompletionModel, ObservedTensor, SolverConfig, SolverState};
use graphtc::transform::dct_matrix;
use graphtc::{ComplexTensor, RealTensor, Scalar, Tensor3, Transform};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Criteria allowed to fail, each with its analysis in the project notes.
const EXPECTED_FAILURES: &[&str] = &["5c"];

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

fn say(line: &str) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
    let _ = err.flush();
}

fn relative(diff: f64, reference: f64) -> f64 {
    diff / reference.max(f64::MIN_POSITIVE)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn real_tensor(n1: usize, n2: usize, n3: usize, rng: &mut ChaCha8Rng) -> RealTensor {
    RealTensor::from_fn(n1, n2, n3, |_, _, _| normal(rng))
}

fn complex_tensor(n1: usize, n2: usize, n3: usize, rng: &mut ChaCha8Rng) -> ComplexTensor {
    ComplexTensor::from_fn(n1, n2, n3, |_, _, _| Complex64::new(normal(rng), normal(rng)))
}

fn random_graph(m: usize, periods: usize, density: f64, rng: &mut ChaCha8Rng) -> DynamicGraph {
    let mut g = DynamicGraph::edgeless(m, periods);
    for t in 0..periods {
        for j in 0..m {
            for i in 0..j {
                if rng.random::<f64>() < density {
                    g.set_edge(i, j, t, true);
                }
            }
        }
    }
    g
}

fn temp_dir() -> tempfile::TempDir {
    tempfile::tempdir().expect("temporary directory")
}

// ---------------------------------------------------------------- algebra

/// Applies `matrix` along the third mode by explicit summation.
fn mode3<S: Scalar>(x: &Tensor3<S>, matrix: &DMatrix<Complex64>) -> Vec<DMatrix<Complex64>> {
    let (n1, n2, n3) = x.dims();
    (0..n3)
        .map(|k| {
            let mut acc = DMatrix::<Complex64>::zeros(n1, n2);
            for j in 0..n3 {
                let c = matrix[(k, j)];
                if c != Complex64::new(0.0, 0.0) {
                    acc += x.slice(j).map(|v| v.to_complex()) * c;
                }
            }
            acc
        })
        .collect()
}

fn slices_distance(a: &[DMatrix<Complex64>], b: &ComplexTensor) -> (f64, f64) {
    let mut diff = 0.0;
    let mut norm = 0.0;
    for (k, s) in a.iter().enumerate() {
        diff += (s - b.slice(k)).norm_squared();
        norm += s.norm_squared();
    }
    (diff.sqrt(), norm.sqrt())
}

fn random_transform(n3: usize, rng: &mut ChaCha8Rng) -> (Transform, &'static str) {
    let divisors: Vec<usize> = (1..=n3).filter(|d| n3.is_multiple_of(*d)).collect();
    match rng.random_range(0..5) {
        0 => (Transform::dft(n3), "dft"),
        1 => (Transform::dct(n3), "dct"),
        2 => (Transform::identity(n3), "identity"),
        3 => {
            let ss = divisors[rng.random_range(0..divisors.len())];
            (Transform::block_dft(n3, ss).expect("divisor block"), "block_dft")
        }
        _ => {
            let g = DMatrix::from_fn(n3, n3, |_, _| Complex64::new(normal(rng), normal(rng)));
            let scale = rng.random_range(0.5..3.0);
            let q = g.qr().q() * Complex64::new(scale, 0.0);
            (Transform::custom(q).expect("scaled unitary"), "custom")
        }
    }
}

fn check_algebra_instance(rng: &mut ChaCha8Rng) -> Result<(f64, f64, f64, f64), String> {
    let n1 = rng.random_range(1..=6);
    let n2 = rng.random_range(1..=6);
    let n3 = rng.random_range(1..=8);
    let (m, name) = random_transform(n3, rng);
    let err = |e: graphtc::Error| format!("{name}: {e}");
    let complex_data = name == "custom" || rng.random::<bool>();

    // round trip and isometry
    let x = complex_tensor(n1, n2, n3, rng);
    let back = m.inverse(&m.forward(&x).map_err(err)?).map_err(err)?;
    let round_trip = relative((&back - &x).frobenius_norm(), x.frobenius_norm());
    let hat = mode3(&x, m.matrix());
    let hat_sq: f64 = hat.iter().map(|s| s.norm_squared()).sum();
    let isometry = relative((hat_sq - m.scale_c() * x.frobenius_norm_sq()).abs(), m.scale_c() * x.frobenius_norm_sq());

    // t-product against slice-wise products in the transform domain
    let r = rng.random_range(1..=5);
    let inverse = m.matrix().adjoint() / Complex64::new(m.scale_c(), 0.0);
    let oracle = |a_hat: Vec<DMatrix<Complex64>>, b_hat: Vec<DMatrix<Complex64>>| {
        let prod: Vec<DMatrix<Complex64>> = a_hat.iter().zip(&b_hat).map(|(a, b)| a * b).collect();
        mode3(&ComplexTensor::from_slices(&prod).expect("equal slices"), &inverse)
    };
    let product = if complex_data {
        let a = complex_tensor(n1, r, n3, rng);
        let b = complex_tensor(r, n2, n3, rng);
        let got = t_product(&a, &b, &m).map_err(err)?;
        slices_distance(&oracle(mode3(&a, m.matrix()), mode3(&b, m.matrix())), &got)
    } else {
        let a = real_tensor(n1, r, n3, rng);
        let b = real_tensor(r, n2, n3, rng);
        let got = t_product(&a, &b, &m).map_err(err)?.to_complex();
        slices_distance(&oracle(mode3(&a, m.matrix()), mode3(&b, m.matrix())), &got)
    };
    let product = relative(product.0, product.1);

    // t-SVD reconstruction
    let svd = if complex_data {
        let t = complex_tensor(n1, n2, n3, rng);
        let f = t_svd(&t, &m, None).map_err(err)?;
        relative((&f.reconstruct().map_err(err)? - &t).frobenius_norm(), t.frobenius_norm())
    } else {
        let t = real_tensor(n1, n2, n3, rng);
        let f = t_svd(&t, &m, None).map_err(err)?;
        relative((&f.reconstruct().map_err(err)? - &t).frobenius_norm(), t.frobenius_norm())
    };
    Ok((round_trip, isometry, product, svd))
}

fn criterion_1() -> Verdict {
    let mut rng = rng_from(101);
    let mut worst = [0.0f64; 4];
    for trial in 0..500 {
        match check_algebra_instance(&mut rng) {
            Ok(v) => {
                for (w, x) in worst.iter_mut().zip([v.0, v.1, v.2, v.3]) {
                    *w = w.max(x);
                }
            }
            Err(e) => return verdict(false, format!("instance {trial} errored: {e}")),
        }
    }
    let ok = worst[0] <= 1e-10 && worst[1] <= 1e-8 && worst[2] <= 1e-8 && worst[3] <= 1e-8;
    verdict(
        ok,
        format!(
            "500 instances; worst round trip {:.1e}, isometry {:.1e}, t-product {:.1e}, t-SVD {:.1e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

// ------------------------------------------------------------- regularizer

/// `½ Σ_k Σ_{i,j} count_k(i, j) ‖W_{i,:,window k} − W_{j,:,window k}‖²`
/// with the counts taken straight from the edge indicators.
fn brute_smoothness(g: &DynamicGraph, w: &RealTensor, ss: usize) -> f64 {
    let (n, r, periods) = w.dims();
    let mut total = 0.0;
    for k in 0..periods / ss {
        let window = k * ss..(k + 1) * ss;
        for i in 0..n {
            for j in 0..n {
                let count = window.clone().filter(|&t| i != j && g.has_edge(i, j, t)).count() as f64;
                if count == 0.0 {
                    continue;
                }
                let mut dist = 0.0;
                for t in window.clone() {
                    for c in 0..r {
                        dist += (w.get(i, c, t) - w.get(j, c, t)).powi(2);
                    }
                }
                total += count * dist;
            }
        }
    }
    0.5 * total
}

fn criterion_2() -> Verdict {
    let mut rng = rng_from(202);
    let mut worst = 0.0f64;
    let mut scales = std::collections::BTreeSet::new();
    for trial in 0..200 {
        let periods = [4usize, 8, 12, 16][trial % 4];
        let ss = [1, periods / 4, periods][(trial / 4) % 3];
        scales.insert(if ss == 1 { "1" } else if ss == periods { "T" } else { "T/4" });
        let m = rng.random_range(2..=9);
        let g = random_graph(m, periods, rng.random_range(0.1..0.8), &mut rng);
        let w = real_tensor(m, rng.random_range(1..=4), periods, &mut rng);
        let h = aggregate(&g, ss).expect("aggregate");
        let lap = LaplacianTensor::from_multigraph(&h);
        let transform = match trial % 3 {
            0 => Transform::block_dft(periods, ss).expect("block dft"),
            1 => Transform::identity(periods),
            _ => Transform::block_orthogonal(periods, &dct_matrix(ss)).expect("block dct"),
        };
        let analytic = smoothness_analytic(&lap, &w, &transform).expect("aligned transform");
        let combinatorial = smoothness_combinatorial(&h, &w).expect("combinatorial");
        let brute = brute_smoothness(&g, &w, ss);
        let scale = brute.abs().max(1e-300);
        worst = worst.max((analytic - combinatorial).abs() / scale).max((combinatorial - brute).abs() / scale);
    }

    let mut matrix_worst = 0.0f64;
    for _ in 0..50 {
        let m = rng.random_range(2..=9);
        let g = random_graph(m, 1, 0.5, &mut rng);
        let w = real_tensor(m, rng.random_range(1..=4), 1, &mut rng);
        let adjacency = DMatrix::from_fn(m, m, |i, j| f64::from(u8::from(i != j && g.has_edge(i, j, 0))));
        let degree = DMatrix::from_diagonal(&DVector::from_fn(m, |i, _| adjacency.row(i).sum()));
        let wm = w.slice(0);
        let trace = (wm.transpose() * (degree - adjacency) * &wm).trace();
        let lap = LaplacianTensor::from_multigraph(&aggregate(&g, 1).expect("aggregate"));
        let analytic = smoothness_analytic(&lap, &w, &Transform::identity(1)).expect("identity");
        matrix_worst = matrix_worst.max((analytic - trace).abs() / trace.abs().max(1e-300));
    }
    let ok = worst <= 1e-8 && matrix_worst <= 1e-10 && scales.len() == 3;
    verdict(
        ok,
        format!("200 triples over ss in {{1, T/4, T}}: worst relative gap {worst:.1e}; single period vs trace form {matrix_worst:.1e}"),
    )
}

// ------------------------------------------------------------------ theory

fn criterion_3() -> Verdict {
    match theory_check(100, FACTORIZATIONS_PER_TRIAL, 303) {
        Ok(r) => verdict(
            r.passed(),
            format!(
                "{} instances x {} factorizations: regularizer gap {:.1e}, bound violations {}, attained gap {:.1e}, duality violations {}",
                r.trials, FACTORIZATIONS_PER_TRIAL, r.max_regularizer_deviation, r.bound_violations, r.max_attained_gap, r.duality_violations
            ),
        ),
        Err(e) => verdict(false, format!("error: {e}")),
    }
}

// ------------------------------------------------------------------ solver

/// `W *_M Hᵀ` under the DFT written as a circular convolution:
/// slice `k` is `Σ_j W_j H_{(j − k) mod n3}ᵀ`.
fn circular_product(w: &RealTensor, h: &RealTensor) -> RealTensor {
    let (n1, _, n3) = w.dims();
    let n2 = h.dims().0;
    let slices: Vec<DMatrix<f64>> = (0..n3)
        .map(|k| {
            let mut acc = DMatrix::zeros(n1, n2);
            for j in 0..n3 {
                acc += w.slice(j) * h.slice((j + n3 - k) % n3).transpose();
            }
            acc
        })
        .collect();
    RealTensor::from_slices(&slices).expect("equal slices")
}

fn flat(x: &RealTensor) -> DVector<f64> {
    DVector::from_column_slice(x.as_slice())
}

fn unflat(v: &DVector<f64>, dims: (usize, usize, usize)) -> RealTensor {
    RealTensor::from_vec(dims.0, dims.1, dims.2, v.as_slice().to_vec()).expect("length matches")
}

/// Dense matrix of a linear map between tensors, built column by column.
fn dense_map(dims: (usize, usize, usize), f: impl Fn(&RealTensor) -> RealTensor) -> DMatrix<f64> {
    let n = dims.0 * dims.1 * dims.2;
    let columns: Vec<DVector<f64>> = (0..n)
        .map(|c| {
            let mut unit = vec![0.0; n];
            unit[c] = 1.0;
            flat(&f(&unit_tensor(dims, unit)))
        })
        .collect();
    DMatrix::from_columns(&columns)
}

fn unit_tensor(dims: (usize, usize, usize), data: Vec<f64>) -> RealTensor {
    RealTensor::from_vec(dims.0, dims.1, dims.2, data).expect("length matches")
}

/// Hessian of a quadratic form recovered by polarization.
fn quadratic_form(dims: (usize, usize, usize), q: impl Fn(&RealTensor) -> f64) -> DMatrix<f64> {
    let n = dims.0 * dims.1 * dims.2;
    let basis = |items: &[usize]| {
        let mut v = vec![0.0; n];
        for &i in items {
            v[i] = 1.0;
        }
        unit_tensor(dims, v)
    };
    let diag: Vec<f64> = (0..n).map(|a| q(&basis(&[a]))).collect();
    DMatrix::from_fn(n, n, |a, b| if a == b { diag[a] } else { 0.5 * (q(&basis(&[a, b])) - diag[a] - diag[b]) })
}

fn lu_solve(matrix: DMatrix<f64>, rhs: DVector<f64>) -> DVector<f64> {
    matrix.lu().solve(&rhs).expect("nonsingular system")
}

fn criterion_4() -> Verdict {
    let (n1, n2, n3, r, ss) = (8usize, 6usize, 4usize, 2usize, 2usize);
    let mut rng = rng_from(404);
    let truth = real_tensor(n1, n2, n3, &mut rng);
    let offsets: Vec<usize> = (0..truth.len()).filter(|_| rng.random::<f64>() < 0.6).collect();
    let observed = ObservedTensor::from_offsets(&truth, &offsets).expect("observed");
    let g_w = random_graph(n1, n3, 0.4, &mut rng);
    let g_h = random_graph(n2, n3, 0.4, &mut rng);
    let config = SolverConfig {
        rank: r,
        lambda_g: 0.3,
        lambda_1: 0.2,
        beta: 1.7,
        gamma: 0.8,
        ss,
        inner_solver: graphtc::linalg::SolveMethod::Direct,
        ..SolverConfig::default()
    };
    let model = CompletionModel::from_graphs(&observed, Some(&g_w), Some(&g_h), config.clone()).expect("model");
    let state = SolverState {
        w: real_tensor(n1, r, n3, &mut rng),
        h: real_tensor(n2, r, n3, &mut rng),
        a: real_tensor(n1, r, n3, &mut rng),
        b: real_tensor(n2, r, n3, &mut rng),
        e: real_tensor(n1, n2, n3, &mut rng),
        mult_w: real_tensor(n1, r, n3, &mut rng),
        mult_h: real_tensor(n2, r, n3, &mut rng),
        mult_e: observed.project(&real_tensor(n1, n2, n3, &mut rng)),
        iter: 0,
    };
    let beta = config.beta;
    let s = &state;
    let mut gaps = BTreeMap::new();

    // W minimizes ½‖E − W*Hᵀ‖² + (β/2)‖A − W − Λ_W/β‖².
    let k_w = dense_map((n1, r, n3), |u| circular_product(u, &s.h));
    let rhs = k_w.transpose() * flat(&s.e) + flat(&s.a) * beta - flat(&s.mult_w);
    let w = unflat(&lu_solve(k_w.transpose() * &k_w + DMatrix::identity(k_w.ncols(), k_w.ncols()) * beta, rhs), (n1, r, n3));
    gaps.insert("W", model.update_w(s).expect("update W").relative_error(&w));

    let k_h = dense_map((n2, r, n3), |u| circular_product(&s.w, u));
    let rhs = k_h.transpose() * flat(&s.e) + flat(&s.b) * beta - flat(&s.mult_h);
    let h = unflat(&lu_solve(k_h.transpose() * &k_h + DMatrix::identity(k_h.ncols(), k_h.ncols()) * beta, rhs), (n2, r, n3));
    gaps.insert("H", model.update_h(s).expect("update H").relative_error(&h));

    // A minimizes (λ_G/2)·smoothness + (λ_1/2)‖A‖² + (β/2)‖A − W − Λ_W/β‖².
    let graph_block = |g: &DynamicGraph, factor: &RealTensor, mult: &RealTensor| {
        let dims = factor.dims();
        let q = quadratic_form(dims, |x| brute_smoothness(g, x, ss));
        let n = q.nrows();
        let system = q * config.lambda_g + DMatrix::identity(n, n) * (config.lambda_1 + beta);
        unflat(&lu_solve(system, flat(factor) * beta + flat(mult)), dims)
    };
    gaps.insert("A", model.update_a(s).expect("update A").relative_error(&graph_block(&g_w, &s.w, &s.mult_w)));
    gaps.insert("B", model.update_b(s).expect("update B").relative_error(&graph_block(&g_h, &s.h, &s.mult_h)));

    let product = circular_product(&s.w, &s.h);
    let mut e = product.clone();
    for &o in &offsets {
        e.as_mut_slice()[o] = (beta * truth.as_slice()[o] + s.mult_e.as_slice()[o] + product.as_slice()[o]) / (1.0 + beta);
    }
    gaps.insert("E", model.update_e(s).expect("update E").relative_error(&e));

    let step = config.gamma * beta;
    let mut mult_w = s.mult_w.clone();
    let mut mult_h = s.mult_h.clone();
    let mut mult_e = s.mult_e.clone();
    for (m, x, y) in [(&mut mult_w, &s.a, &s.w), (&mut mult_h, &s.b, &s.h)] {
        for ((v, a), b) in m.as_mut_slice().iter_mut().zip(x.as_slice()).zip(y.as_slice()) {
            *v -= step * (a - b);
        }
    }
    for &o in &offsets {
        mult_e.as_mut_slice()[o] -= step * (s.e.as_slice()[o] - truth.as_slice()[o]);
    }
    let (mw, mh, me) = model.update_multipliers(s);
    gaps.insert("multipliers", mw.relative_error(&mult_w).max(mh.relative_error(&mult_h)).max(me.relative_error(&mult_e)));

    // Noiseless, fully observed tensor of tubal rank 3.
    let m = Transform::dft(8);
    let p = real_tensor(20, 3, 8, &mut rng);
    let q = real_tensor(15, 3, 8, &mut rng);
    let full = t_product(&p, &graphtc::algebra::conj_transpose(&q, &m).expect("transpose"), &m).expect("product");
    let everything: Vec<usize> = (0..full.len()).collect();
    let all = ObservedTensor::from_offsets(&full, &everything).expect("observed");
    let solve_config = SolverConfig {
        rank: 3,
        lambda_g: 0.0,
        lambda_1: 0.0,
        max_iter: 500,
        seed: 7,
        ..SolverConfig::default()
    };
    let (recovered, diag) = solve(&all, None, None, &solve_config).expect("solve");
    let re = recovered.relative_error(&full);

    let worst = gaps.values().cloned().fold(0.0, f64::max);
    let listing: Vec<String> = gaps.iter().map(|(k, v)| format!("{k} {v:.1e}")).collect();
    verdict(
        worst <= 1e-8 && re <= 1e-4 && diag.iterations() <= 500,
        format!("subproblems vs dense solves: {}; full solve RE {re:.1e} after {} iterations", listing.join(", "), diag.iterations()),
    )
}

// ------------------------------------------------------------- experiments

fn paper_scale() -> ExperimentConfig {
    ExperimentConfig::default()
}

fn summary(out: &graphtc::run::RunOutput, name: &str) -> Table {
    let text = &out.files.iter().find(|(n, _)| n == name).expect("summary file").1;
    Table::parse_csv(text).expect("summary table")
}

fn medians_by(table: &Table, key: &str, value: &str, filter: impl Fn(&[String]) -> bool) -> BTreeMap<String, f64> {
    let k = table.column(key).expect("key column");
    let v = table.column(value).expect("value column");
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for row in table.rows.iter().filter(|r| filter(r)) {
        groups.entry(row[k].clone()).or_default().push(row[v].parse().expect("number"));
    }
    groups.into_iter().map(|(k, v)| (k, median(&v))).collect()
}

fn criterion_5a() -> Verdict {
    let mut cfg = paper_scale();
    cfg.solver.ss = cfg.data.interval;
    let out = match execute(Command::CompareGraphModes, &cfg) {
        Ok(o) => o,
        Err(e) => return verdict(false, format!("error: {e}")),
    };
    let table = summary(&out, "summary.csv");
    let mut ok = true;
    let mut parts = Vec::new();
    for ratio in &cfg.grid.ratios {
        let get = |mode: &str| {
            table
                .rows
                .iter()
                .find(|r| r[0].parse::<f64>().ok() == Some(*ratio) && r[1] == mode)
                .map(|r| r[2].parse::<f64>().expect("number"))
                .expect("summary row")
        };
        let (d, s, a) = (get("dynamic"), get("static"), get("agnostic"));
        ok &= d <= s && s <= a;
        parts.push(format!("ratio {ratio}: dynamic {d:.4} static {s:.4} agnostic {a:.4}"));
    }
    verdict(ok, format!("median test RE over 5 seeds, interval 4, ss 4; {}", parts.join("; ")))
}

fn criterion_5b() -> Verdict {
    let mut cfg = paper_scale();
    cfg.data.interval = 64;
    cfg.grid.ratios = vec![0.1];
    cfg.grid.repeats = 2;
    let out = match execute(Command::CompareGraphModes, &cfg) {
        Ok(o) => o,
        Err(e) => return verdict(false, format!("error: {e}")),
    };
    let t = &out.metrics;
    let (mode, re, seed) = (t.column("mode").unwrap(), t.column("re").unwrap(), t.column("seed").unwrap());
    let mut worst = 0.0f64;
    for row in t.rows.iter().filter(|r| r[mode] == "dynamic") {
        let other = t.rows.iter().find(|r| r[mode] == "static" && r[seed] == row[seed]).expect("static row");
        let (a, b): (f64, f64) = (row[re].parse().unwrap(), other[re].parse().unwrap());
        worst = worst.max((a - b).abs());
    }
    verdict(worst <= 1e-10, format!("interval 64, 2 seeds: max |RE_dynamic - RE_static| = {worst:.1e}"))
}

fn criterion_5c() -> Verdict {
    let mut cfg = paper_scale();
    cfg.grid.ss_values = vec![1, 4, 16, 64];
    cfg.grid.repeats = 1;
    let out = match execute(Command::SweepSs, &cfg) {
        Ok(o) => o,
        Err(e) => return verdict(false, format!("error: {e}")),
    };
    let best = summary(&out, "best_ss.csv");
    let x = best.numbers("interval");
    let y = best.numbers("best_ss");
    let rho = spearman(&x, &y);
    let pairs: Vec<String> = x.iter().zip(&y).map(|(a, b)| format!("{a}->{b}")).collect();
    verdict(rho > 0.7, format!("best ss per interval {}; Spearman {rho:.3}", pairs.join(" ")))
}

fn criteria_5de() -> (Verdict, Verdict) {
    let mut cfg = paper_scale();
    cfg.data.interval = 64;
    let out = match execute(Command::AlphaProbe, &cfg) {
        Ok(o) => o,
        Err(e) => {
            let msg = format!("error: {e}");
            return (verdict(false, msg.clone()), verdict(false, msg));
        }
    };
    let probe = out.metrics.column("probe").unwrap();
    let by_level = medians_by(&out.metrics, "param", "ratio", |r| r[probe] == "alpha_star_over_alpha");
    let mut levels: Vec<(f64, f64)> = by_level.iter().map(|(k, v)| (k.parse().unwrap(), *v)).collect();
    levels.sort_by(|a, b| a.0.total_cmp(&b.0));
    let decreasing = levels.windows(2).all(|w| w[1].1 < w[0].1);
    let d = verdict(
        decreasing && levels[0].1 >= 1.0 && levels.len() == 5,
        format!(
            "median alpha*/alpha by perturbation level: {}",
            levels.iter().map(|(l, v)| format!("{l}: {v:.3}")).collect::<Vec<_>>().join(", ")
        ),
    );

    let by_interval = medians_by(&out.metrics, "param", "ratio", |r| r[probe] == "static_over_dynamic");
    let mut intervals: Vec<(f64, f64)> = by_interval.iter().map(|(k, v)| (k.parse().unwrap(), *v)).collect();
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let shrinking_grows = intervals.windows(2).all(|w| w[0].1 > w[1].1);
    let e = verdict(
        shrinking_grows && intervals.iter().all(|(_, v)| *v >= 1.0),
        format!(
            "median static/dynamic alpha by interval: {}",
            intervals.iter().map(|(l, v)| format!("{l}: {v:.3}")).collect::<Vec<_>>().join(", ")
        ),
    );
    (d, e)
}

// ----------------------------------------------------------------- scaling

fn criterion_6() -> Verdict {
    let mut cfg = ExperimentConfig::default();
    for (k, v) in [
        ("rows", "20"),
        ("cols", "20"),
        ("periods", "8"),
        ("data_rank", "2"),
        ("rank", "2"),
        ("communities", "2"),
        ("interval", "4"),
        ("sigma", "0.5"),
        ("with_replacement", "true"),
        ("sample_counts", "3200,6400,12800,25600"),
        ("repeats", "5"),
    ] {
        cfg.set(k, v).expect("preset key");
    }
    match execute(Command::ScalingProbe, &cfg) {
        Ok(out) => {
            let t = summary(&out, "summary.csv");
            let slope = t.rows.iter().find(|r| r[0] == "slope").map(|r| r[1].parse::<f64>().unwrap()).unwrap_or(f64::NAN);
            verdict((-1.3..=-0.7).contains(&slope), format!("log-log slope of per-entry squared error vs N: {slope:.3}"))
        }
        Err(e) => verdict(false, format!("error: {e}")),
    }
}

// ------------------------------------------------------------------ ratings

fn criterion_7() -> Verdict {
    let dir = temp_dir();
    let mut gen = ExperimentConfig::default();
    gen.input.source = Source::Ratings;
    if let Err(e) = run(Command::Generate, &gen, dir.path()) {
        return verdict(false, format!("generate: {e}"));
    }
    let mut cfg = ExperimentConfig::default();
    cfg.input.source = Source::Ratings;
    cfg.input.ratings_file = Some(dir.path().join("ratings.txt"));
    cfg.input.features_w_file = Some(dir.path().join("user_features.txt"));
    cfg.input.features_h_file = Some(dir.path().join("item_features.txt"));
    let out = match execute(Command::CvRank, &cfg) {
        Ok(o) => o,
        Err(e) => return verdict(false, format!("cv-rank: {e}")),
    };
    let graph = median(&out.metrics.numbers("re_graph"));
    let agnostic = median(&out.metrics.numbers("re_agnostic"));
    let ranks = out.metrics.numbers("best_rank");
    verdict(
        graph <= agnostic,
        format!("88x70x6 rating log, 5 splits: median RE graph {graph:.4} vs agnostic {agnostic:.4}; chosen ranks {ranks:?}"),
    )
}

// ------------------------------------------------------------- determinism

fn rerun_deviation(command: Command, cfg: &ExperimentConfig, root: &Path) -> Result<f64, String> {
    let first_dir = root.join(format!("{command}-first"));
    let second_dir = root.join(format!("{command}-second"));
    let first = run(command, cfg, &first_dir).map_err(|e| e.to_string())?;
    let text = std::fs::read_to_string(first_dir.join("config.txt")).map_err(|e| e.to_string())?;
    let resolved = ExperimentConfig::parse(&text).map_err(|e| e.to_string())?;
    let second = run(command, &resolved, &second_dir).map_err(|e| e.to_string())?;
    let mut worst = first
        .metrics
        .max_numeric_deviation(&second.metrics)
        .ok_or_else(|| format!("{command}: metrics tables differ in shape"))?;
    for ((name, a), (_, b)) in first.jobs.iter().zip(&second.jobs) {
        let dev = a
            .metrics
            .max_numeric_deviation(&b.metrics)
            .ok_or_else(|| format!("{command}/{name}: job tables differ in shape"))?;
        worst = worst.max(dev);
    }
    Ok(worst)
}

fn criterion_8() -> Verdict {
    let dir = temp_dir();
    let mut small = ExperimentConfig::default();
    for (k, v) in [
        ("rows", "12"),
        ("cols", "10"),
        ("periods", "8"),
        ("data_rank", "2"),
        ("rank", "2"),
        ("communities", "2"),
        ("interval", "2"),
        ("ss", "2"),
        ("max_iter", "60"),
        ("sample_ratio", "0.3"),
        ("ratios", "0.2,0.4"),
        ("repeats", "2"),
        ("intervals", "2,8"),
        ("ss_values", "1,2,8"),
        ("trials", "5"),
        ("seed", "17"),
    ] {
        small.set(k, v).expect("preset key");
    }
    let mut parts = Vec::new();
    let mut worst = 0.0f64;
    for command in [Command::Complete, Command::CompareGraphModes, Command::SweepSs, Command::AlphaProbe, Command::TheoryCheck] {
        match rerun_deviation(command, &small, dir.path()) {
            Ok(d) => {
                worst = worst.max(d);
                parts.push(format!("{command} {d:.1e}"));
            }
            Err(e) => return verdict(false, e),
        }
    }
    verdict(worst <= 1e-12, format!("re-run from written config.txt, max metric deviation: {}", parts.join(", ")))
}

// -------------------------------------------------------------------- main

fn guarded(f: impl FnOnce() -> Verdict) -> Verdict {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(v) => v,
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            verdict(false, format!("panicked: {msg}"))
        }
    }
}

#[test]
fn acceptance_criteria() {
    let only: Option<Vec<String>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').map(|x| x.trim().to_string()).collect());
    let wanted = |id: &str| only.as_ref().is_none_or(|o| o.iter().any(|x| x == id));
    let mut failures = Vec::new();
    let mut record = |id: &'static str, name: &str, started: Instant, v: Verdict| {
        let status = if v.passed { "PASS" } else { "FAIL" };
        say(&format!("[{status}] {id} {name} ({:.1}s): {}", started.elapsed().as_secs_f64(), v.detail));
        if !v.passed {
            failures.push(id);
        }
    };
    type Criterion = (&'static str, &'static str, fn() -> Verdict);
    let single: [Criterion; 9] = [
        ("1", "algebra suite", criterion_1),
        ("2", "regularizer equivalence", criterion_2),
        ("3", "weighted-norm theory", criterion_3),
        ("4", "solver subproblems and recovery", criterion_4),
        ("5a", "graph-mode ordering", criterion_5a),
        ("5b", "dynamic equals static at interval 64", criterion_5b),
        ("5c", "best ss tracks interval", criterion_5c),
        ("6", "consistency-bound scaling", criterion_6),
        ("7", "rating-log smoke test", criterion_7),
    ];
    for (id, name, f) in single {
        if wanted(id) {
            let started = Instant::now();
            record(id, name, started, guarded(f));
        }
        if id == "5c" && (wanted("5d") || wanted("5e")) {
            let started = Instant::now();
            let (d, e) = catch_unwind(criteria_5de).unwrap_or_else(|_| (verdict(false, "panicked"), verdict(false, "panicked")));
            record("5d", "alpha ratio falls with perturbation", started, d);
            record("5e", "static/dynamic alpha grows as interval shrinks", started, e);
        }
    }
    if wanted("8") {
        let started = Instant::now();
        record("8", "determinism", started, guarded(criterion_8));
    }

    let unexpected: Vec<&str> = failures.iter().copied().filter(|f| !EXPECTED_FAILURES.contains(f)).collect();
    say(&format!("failed: {failures:?}; expected failures: {EXPECTED_FAILURES:?}"));
    assert!(unexpected.is_empty(), "unexpected acceptance failures: {unexpected:?}");
}
