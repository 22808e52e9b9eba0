//! Experiment protocols shared by the command line tool and the test suites.
//!
//! Grid points run in parallel on the current rayon pool; results come back
//! in grid order, so output never depends on scheduling.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::algebra::{conj_transpose, t_product};
use crate::datagen::{
    derived_seed, perturb_graph, rng_from, sample_observations, synthetic_instance, ObservationModel,
    SyntheticInstance, SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::graph::{laplacian_tensor, DynamicGraph, GraphPenalty};
use crate::io::Rating;
use crate::solver::{solve, Diagnostics, ObservedTensor, SolverConfig};
use crate::tensor::RealTensor;
use crate::theory::{
    aligned_dual, duality_probe, factorization_bound_check, regularizer_weighted_frobenius_check,
    weight_pair_from_laplacians, GraphWeight, DEFAULT_EIGEN_FLOOR,
};
use crate::transform::Transform;

/// Seed of repeat `k` of a grid point.
pub fn repeat_seed(base: u64, k: usize) -> u64 {
    base ^ k as u64
}

pub const PART_SAMPLE: u64 = 4;
pub const PART_SOLVER: u64 = 5;
pub const PART_PERTURB: u64 = 6;
pub const PART_FOLDS: u64 = 7;
pub const PART_SPLIT: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub re: f64,
    pub rmse: f64,
    pub test_size: usize,
}

/// Relative error and per-entry RMSE on the test offsets.
pub fn evaluate(completed: &RealTensor, truth: &RealTensor, test: &[usize]) -> Result<Metrics> {
    completed.check_same_dims(truth)?;
    if test.is_empty() {
        return Err(Error::Data("the test set is empty".into()));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for &o in test {
        let (c, t) = (completed.as_slice()[o], truth.as_slice()[o]);
        num += (c - t) * (c - t);
        den += t * t;
    }
    Ok(Metrics {
        re: num.sqrt() / den.sqrt().max(f64::MIN_POSITIVE),
        rmse: (num / test.len() as f64).sqrt(),
        test_size: test.len(),
    })
}

/// A completion task: observations, graphs, and the reference values on the test offsets.
#[derive(Debug, Clone)]
pub struct Problem {
    pub observed: ObservedTensor,
    pub truth: RealTensor,
    pub test: Vec<usize>,
    pub g_w: Option<DynamicGraph>,
    pub g_h: Option<DynamicGraph>,
}

impl Problem {
    /// Samples a synthetic instance; the test set is every unobserved entry.
    pub fn synthetic(inst: &SyntheticInstance, model: &ObservationModel) -> Result<Self> {
        let sample = sample_observations(&inst.x, model)?;
        Ok(Self {
            observed: sample.observed,
            truth: inst.x.clone(),
            test: sample.test,
            g_w: Some(inst.g_w.clone()),
            g_h: Some(inst.g_h.clone()),
        })
    }

    /// Holds out `fraction` of the observed entries as the test set.
    pub fn holdout(
        observed: &ObservedTensor,
        g_w: Option<DynamicGraph>,
        g_h: Option<DynamicGraph>,
        fraction: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut offsets = observed.offsets().to_vec();
        offsets.shuffle(&mut rng_from(derived_seed(seed, PART_SPLIT)));
        let n_test = ((fraction * offsets.len() as f64).round() as usize).clamp(1, offsets.len().saturating_sub(1));
        if offsets.len() < 2 {
            return Err(Error::Data("need at least two observations to hold some out".into()));
        }
        let mut test = offsets.split_off(offsets.len() - n_test);
        test.sort_unstable();
        Ok(Self {
            observed: observed.restrict(&offsets)?,
            truth: observed.values().clone(),
            test,
            g_w,
            g_h,
        })
    }

    pub fn without_graphs(&self) -> Self {
        Self {
            g_w: None,
            g_h: None,
            ..self.clone()
        }
    }

    /// Replaces both graphs by their first period held fixed.
    pub fn with_static_graphs(&self) -> Self {
        Self {
            g_w: self.g_w.as_ref().map(DynamicGraph::first_period_static),
            g_h: self.g_h.as_ref().map(DynamicGraph::first_period_static),
            ..self.clone()
        }
    }

    pub fn solve(&self, config: &SolverConfig) -> Result<(RealTensor, Diagnostics, Metrics)> {
        let (completed, diag) = solve(&self.observed, self.g_w.as_ref(), self.g_h.as_ref(), config)?;
        let metrics = evaluate(&completed, &self.truth, &self.test)?;
        Ok((completed, diag, metrics))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GraphMode {
    Agnostic,
    Static,
    Dynamic,
}

impl GraphMode {
    pub const ALL: [GraphMode; 3] = [GraphMode::Agnostic, GraphMode::Static, GraphMode::Dynamic];

    pub fn name(self) -> &'static str {
        match self {
            GraphMode::Agnostic => "agnostic",
            GraphMode::Static => "static",
            GraphMode::Dynamic => "dynamic",
        }
    }
}

/// Solves the same problem, on the same mask, without graphs, with the
/// first-period static graphs, and with the dynamic graphs.
pub fn compare_graph_modes(problem: &Problem, config: &SolverConfig) -> Result<Vec<(GraphMode, Metrics)>> {
    GraphMode::ALL
        .par_iter()
        .map(|&mode| {
            let p = match mode {
                GraphMode::Agnostic => problem.without_graphs(),
                GraphMode::Static => problem.with_static_graphs(),
                GraphMode::Dynamic => problem.clone(),
            };
            Ok((mode, p.solve(config)?.2))
        })
        .collect()
}

/// Test metrics for each similarity scale.
pub fn sweep_ss(problem: &Problem, config: &SolverConfig, ss_values: &[usize]) -> Result<Vec<(usize, Metrics)>> {
    ss_values
        .par_iter()
        .map(|&ss| {
            let cfg = SolverConfig { ss, ..config.clone() };
            Ok((ss, problem.solve(&cfg)?.2))
        })
        .collect()
}

/// The scale with the lowest error; near-ties go to the larger scale.
pub fn best_ss(rows: &[(usize, f64)]) -> Option<usize> {
    let best = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    rows.iter()
        .filter(|r| r.1 <= best + 1e-12 * best.abs())
        .map(|r| r.0)
        .max()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut k = 0;
    while k < order.len() {
        let mut end = k;
        while end + 1 < order.len() && values[order[end + 1]] == values[order[k]] {
            end += 1;
        }
        let avg = (k + end) as f64 / 2.0 + 1.0;
        for &o in &order[k..=end] {
            out[o] = avg;
        }
        k = end + 1;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Spearman rank correlation with average ranks for ties. Undefined (NaN)
/// when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "spearman on unequal lengths");
    pearson(&ranks(x), &ranks(y))
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

/// `(α, α*)` for `x` weighted by the Laplacians of `g_w`, `g_h` at
/// similarity scale `ss`, under the DFT.
pub fn alpha_for_graphs(
    x: &RealTensor,
    g_w: &DynamicGraph,
    g_h: &DynamicGraph,
    ss: usize,
    penalty: GraphPenalty,
) -> Result<(f64, f64)> {
    let m = Transform::dft(x.dims().2);
    let pair = weight_pair_from_laplacians(&laplacian_tensor(g_w, ss)?, &laplacian_tensor(g_h, ss)?, penalty, &m, DEFAULT_EIGEN_FLOOR)?;
    crate::theory::alpha_measure(x, &pair, &m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaRow {
    pub level: f64,
    pub seed: u64,
    pub alpha: f64,
    pub alpha_star: f64,
}

impl AlphaRow {
    pub fn ratio(&self) -> f64 {
        self.alpha_star / self.alpha
    }
}

/// `α*/α` with the true graphs perturbed at each level, over `repeats`
/// instances. The similarity scale equals the generating interval.
pub fn alpha_vs_perturbation(
    spec: &SyntheticSpec,
    levels: &[f64],
    penalty: GraphPenalty,
    repeats: usize,
    base_seed: u64,
) -> Result<Vec<AlphaRow>> {
    let jobs: Vec<(usize, f64)> = (0..repeats).flat_map(|k| levels.iter().map(move |&l| (k, l))).collect();
    jobs.par_iter()
        .map(|&(k, level)| {
            let seed = repeat_seed(base_seed, k);
            let inst = synthetic_instance(&SyntheticSpec { seed, ..spec.clone() })?;
            let ps = derived_seed(seed, PART_PERTURB);
            let g_w = perturb_graph(&inst.g_w, level, ps)?;
            let g_h = perturb_graph(&inst.g_h, level, ps.wrapping_add(1))?;
            let (alpha, alpha_star) = alpha_for_graphs(&inst.x, &g_w, &g_h, spec.interval, penalty)?;
            Ok(AlphaRow {
                level,
                seed,
                alpha,
                alpha_star,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticDynamicRow {
    pub interval: usize,
    pub seed: u64,
    pub alpha_static: f64,
    pub alpha_dynamic: f64,
}

impl StaticDynamicRow {
    pub fn ratio(&self) -> f64 {
        self.alpha_static / self.alpha_dynamic
    }
}

/// Complexity of the truth with the similarity scale spanning all periods
/// (the static model) relative to a scale equal to the generating interval.
pub fn alpha_static_vs_dynamic(
    spec: &SyntheticSpec,
    intervals: &[usize],
    penalty: GraphPenalty,
    repeats: usize,
    base_seed: u64,
) -> Result<Vec<StaticDynamicRow>> {
    let jobs: Vec<(usize, usize)> = (0..repeats).flat_map(|k| intervals.iter().map(move |&iv| (k, iv))).collect();
    jobs.par_iter()
        .map(|&(k, interval)| {
            let seed = repeat_seed(base_seed, k);
            let inst = synthetic_instance(&SyntheticSpec {
                seed,
                interval,
                ..spec.clone()
            })?;
            let (alpha_dynamic, _) = alpha_for_graphs(&inst.x, &inst.g_w, &inst.g_h, interval, penalty)?;
            let (alpha_static, _) = alpha_for_graphs(&inst.x, &inst.g_w, &inst.g_h, spec.periods, penalty)?;
            Ok(StaticDynamicRow {
                interval,
                seed,
                alpha_static,
                alpha_dynamic,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingRow {
    pub samples: usize,
    pub seed: u64,
    /// Mean squared error over all entries.
    pub error_sq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// Log-log slope of the median error against the sample count.
    pub slope: f64,
}

impl ScalingReport {
    pub fn medians(&self) -> Vec<(usize, f64)> {
        let mut counts: Vec<usize> = self.rows.iter().map(|r| r.samples).collect();
        counts.dedup();
        counts
            .into_iter()
            .map(|n| {
                let errs: Vec<f64> = self.rows.iter().filter(|r| r.samples == n).map(|r| r.error_sq).collect();
                (n, median(&errs))
            })
            .collect()
    }
}

/// Per-entry squared error of the completed tensor for each sample count.
/// `model.size` is replaced by each count in turn.
pub fn scaling_probe(
    spec: &SyntheticSpec,
    counts: &[usize],
    model: &ObservationModel,
    config: &SolverConfig,
    repeats: usize,
    base_seed: u64,
) -> Result<ScalingReport> {
    let jobs: Vec<(usize, usize)> = counts.iter().flat_map(|&n| (0..repeats).map(move |k| (n, k))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(n, k)| {
            let seed = repeat_seed(base_seed, k);
            let inst = synthetic_instance(&SyntheticSpec { seed, ..spec.clone() })?;
            let obs = ObservationModel {
                size: crate::datagen::SampleSize::Count(n),
                seed: derived_seed(seed, PART_SAMPLE),
                ..model.clone()
            };
            let sample = sample_observations(&inst.x, &obs)?;
            let cfg = SolverConfig {
                seed: derived_seed(seed, PART_SOLVER),
                ..config.clone()
            };
            let (completed, _) = solve(&sample.observed, Some(&inst.g_w), Some(&inst.g_h), &cfg)?;
            let error_sq = (&completed - &inst.x).frobenius_norm_sq() / inst.x.len() as f64;
            Ok(ScalingRow { samples: n, seed, error_sq })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = ScalingReport { rows, slope: f64::NAN };
    let med = report.medians();
    let (x, y): (Vec<f64>, Vec<f64>) = med.iter().map(|&(n, e)| (n as f64, e)).unzip();
    report.slope = log_log_slope(&x, &y);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    /// Mean validation relative error per rank.
    pub scores: Vec<(usize, f64)>,
    pub best_rank: usize,
}

/// Five-fold style cross-validation of the tubal rank on the observed entries.
pub fn cv_rank(
    observed: &ObservedTensor,
    g_w: Option<&DynamicGraph>,
    g_h: Option<&DynamicGraph>,
    config: &SolverConfig,
    ranks: &[usize],
    folds: usize,
    seed: u64,
) -> Result<CvReport> {
    if folds < 2 || observed.len() < folds {
        return Err(Error::config(format!("cannot split {} observations into {folds} folds", observed.len())));
    }
    let (n1, n2, _) = observed.dims();
    let ranks: Vec<usize> = ranks.iter().copied().filter(|&r| r >= 1 && r <= n1.min(n2)).collect();
    if ranks.is_empty() {
        return Err(Error::config("no admissible rank to cross-validate"));
    }
    let mut offsets = observed.offsets().to_vec();
    offsets.shuffle(&mut rng_from(derived_seed(seed, PART_FOLDS)));
    let fold_of = |k: usize| k % folds;
    let jobs: Vec<(usize, usize)> = ranks.iter().flat_map(|&r| (0..folds).map(move |f| (r, f))).collect();
    let errors = jobs
        .par_iter()
        .map(|&(rank, f)| {
            let (mut train, mut valid) = (Vec::new(), Vec::new());
            for (k, &o) in offsets.iter().enumerate() {
                if fold_of(k) == f { valid.push(o) } else { train.push(o) }
            }
            valid.sort_unstable();
            let sub = observed.restrict(&train)?;
            let cfg = SolverConfig { rank, ..config.clone() };
            let (completed, _) = solve(&sub, g_w, g_h, &cfg)?;
            Ok(evaluate(&completed, observed.values(), &valid)?.re)
        })
        .collect::<Result<Vec<f64>>>()?;
    let scores: Vec<(usize, f64)> = ranks
        .iter()
        .enumerate()
        .map(|(k, &r)| (r, errors[k * folds..(k + 1) * folds].iter().sum::<f64>() / folds as f64))
        .collect();
    let best_rank = scores
        .iter()
        .fold((ranks[0], f64::INFINITY), |acc, &(r, e)| if e < acc.1 { (r, e) } else { acc })
        .0;
    Ok(CvReport { scores, best_rank })
}

/// Worst cases of the weighted-norm probes over randomized small instances.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TheoryReport {
    pub trials: usize,
    pub max_regularizer_deviation: f64,
    pub bound_violations: usize,
    pub max_attained_gap: f64,
    pub max_reconstruction_error: f64,
    pub duality_violations: usize,
    pub min_aligned_ratio: f64,
}

impl TheoryReport {
    pub fn passed(&self) -> bool {
        self.max_regularizer_deviation <= 1e-8
            && self.bound_violations == 0
            && self.max_attained_gap <= 1e-6
            && self.max_reconstruction_error <= 1e-8
            && self.duality_violations == 0
            && self.min_aligned_ratio >= 0.999
    }
}

fn random_dynamic_graph(n: usize, periods: usize, density: f64, rng: &mut impl Rng) -> DynamicGraph {
    let mut g = DynamicGraph::edgeless(n, periods);
    for t in 0..periods {
        for j in 0..n {
            for i in 0..j {
                if rng.random::<f64>() < density {
                    g.set_edge(i, j, t, true);
                }
            }
        }
    }
    g
}

/// Runs the regularizer identity, the factorization bound and the duality
/// probe on `trials` random instances no larger than 10×8×6.
pub fn theory_check(trials: usize, factorizations: usize, seed: u64) -> Result<TheoryReport> {
    let results = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = rng_from(derived_seed(seed, trial as u64));
            let n1 = rng.random_range(3..=10);
            let n2 = rng.random_range(3..=8);
            let n3 = [1usize, 2, 3, 4, 6][rng.random_range(0..5)];
            let divisors: Vec<usize> = (1..=n3).filter(|d| n3.is_multiple_of(*d)).collect();
            let ss = divisors[rng.random_range(0..divisors.len())];
            let m = match rng.random_range(0..3) {
                0 => Transform::dft(n3),
                1 => Transform::dct(n3),
                _ => Transform::identity(n3),
            };
            let penalty = GraphPenalty::new(rng.random_range(0.05..2.0), rng.random_range(0.05..1.0));
            let density = rng.random_range(0.1..0.7);
            let lw = laplacian_tensor(&random_dynamic_graph(n1, n3, density, &mut rng), ss)?;
            let lh = laplacian_tensor(&random_dynamic_graph(n2, n3, density, &mut rng), ss)?;
            let pair = weight_pair_from_laplacians(&lw, &lh, penalty, &m, DEFAULT_EIGEN_FLOOR)?;
            let normal = |a, b, c, rng: &mut rand_chacha::ChaCha8Rng| {
                RealTensor::from_fn(a, b, c, |_, _, _| rng.sample::<f64, _>(StandardNormal))
            };

            let w = normal(n1, rng.random_range(1..=4), n3, &mut rng);
            let weight = GraphWeight::from_combined_tensor(&lw.combined_tensor(penalty, &m)?, &m, DEFAULT_EIGEN_FLOOR)?;
            let reg = regularizer_weighted_frobenius_check(&w, &lw, penalty, &weight, &m)?;

            let r = rng.random_range(1..=n1.min(n2));
            let p = normal(n1, r, n3, &mut rng);
            let q = normal(n2, r, n3, &mut rng);
            let x = t_product(&p, &conj_transpose(&q, &m)?, &m)?;
            let fact = factorization_bound_check(&x, &pair, &m, factorizations, rng.random())?;

            let y = normal(n1, n2, n3, &mut rng).to_complex();
            let random_dual = duality_probe(&x, &y, &pair, &m)?;
            let aligned = duality_probe(&x, &aligned_dual(&x, &pair, &m)?, &pair, &m)?;
            Ok((reg.relative_deviation(), fact, random_dual.holds(1e-8), aligned))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = TheoryReport {
        trials,
        min_aligned_ratio: f64::INFINITY,
        ..Default::default()
    };
    for (dev, fact, dual_ok, aligned) in results {
        report.max_regularizer_deviation = report.max_regularizer_deviation.max(dev);
        report.bound_violations += fact.violations;
        report.max_attained_gap = report.max_attained_gap.max(fact.attained_gap());
        report.max_reconstruction_error = report.max_reconstruction_error.max(fact.reconstruction_error);
        report.duality_violations += usize::from(!dual_ok || !aligned.holds(1e-8));
        report.min_aligned_ratio = report.min_aligned_ratio.min(aligned.ratio());
    }
    Ok(report)
}

/// Parameters of a synthetic rating log with user and item side features.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingLogSpec {
    pub users: usize,
    pub items: usize,
    pub periods: usize,
    pub ratings: usize,
    pub user_features: usize,
    pub item_features: usize,
    pub groups: usize,
    /// Seconds per period.
    pub period_length: i64,
    pub seed: u64,
}

impl Default for RatingLogSpec {
    fn default() -> Self {
        Self {
            users: 88,
            items: 70,
            periods: 6,
            ratings: 466,
            user_features: 22,
            item_features: 18,
            groups: 4,
            period_length: 30 * 24 * 3600,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RatingData {
    pub log: Vec<Rating>,
    /// Row `k` describes user id `k + 1`.
    pub user_features: DMatrix<f64>,
    /// Row `k` describes item id `k + 1`.
    pub item_features: DMatrix<f64>,
}

/// Users and items fall into latent groups; a rating is a group-pair
/// affinity plus a slow drift over periods and noise, clipped to `[1, 5]`.
/// Features are noisy group centroids. Every user and item is rated at least
/// once and the timestamps span exactly the configured periods.
pub fn synthetic_rating_log(spec: &RatingLogSpec) -> Result<RatingData> {
    let cells = spec.users * spec.items * spec.periods;
    if spec.ratings < spec.users.max(spec.items) || spec.ratings > cells || spec.groups == 0 || spec.periods == 0 {
        return Err(Error::config("rating log spec cannot be satisfied"));
    }
    let mut rng = rng_from(spec.seed);
    let user_group: Vec<usize> = (0..spec.users).map(|_| rng.random_range(0..spec.groups)).collect();
    let item_group: Vec<usize> = (0..spec.items).map(|_| rng.random_range(0..spec.groups)).collect();
    let affinity = DMatrix::from_fn(spec.groups, spec.groups, |_, _| rng.random_range(-1.5..1.5));
    let drift: Vec<f64> = (0..spec.groups).map(|_| rng.random_range(-0.15..0.15)).collect();
    let features = |dim: usize, groups: &[usize], rng: &mut rand_chacha::ChaCha8Rng| {
        let centroids = DMatrix::from_fn(spec.groups, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        DMatrix::from_fn(groups.len(), dim, |i, j| centroids[(groups[i], j)] + 0.3 * rng.sample::<f64, _>(StandardNormal))
    };
    let user_features = features(spec.user_features, &user_group, &mut rng);
    let item_features = features(spec.item_features, &item_group, &mut rng);

    let mut chosen = std::collections::BTreeSet::new();
    for u in 0..spec.users {
        chosen.insert((u, rng.random_range(0..spec.items), rng.random_range(0..spec.periods)));
    }
    for i in 0..spec.items {
        chosen.insert((rng.random_range(0..spec.users), i, rng.random_range(0..spec.periods)));
    }
    while chosen.len() < spec.ratings {
        chosen.insert((
            rng.random_range(0..spec.users),
            rng.random_range(0..spec.items),
            rng.random_range(0..spec.periods),
        ));
    }
    let span = spec.period_length * spec.periods as i64;
    let mut log: Vec<Rating> = chosen
        .into_iter()
        .map(|(u, i, t)| {
            let value = 3.0
                + affinity[(user_group[u], item_group[i])]
                + drift[user_group[u]] * t as f64
                + 0.3 * rng.sample::<f64, _>(StandardNormal);
            let start = spec.period_length * t as i64;
            Rating {
                user: u as u64 + 1,
                item: i as u64 + 1,
                rating: value.clamp(1.0, 5.0),
                timestamp: rng.random_range(start..start + spec.period_length),
            }
        })
        .collect();
    if let Some(first) = log.iter_mut().find(|r| r.timestamp < spec.period_length) {
        first.timestamp = 0;
    }
    if let Some(last) = log.iter_mut().rev().find(|r| r.timestamp >= span - spec.period_length) {
        last.timestamp = span - 1;
    }
    Ok(RatingData {
        log,
        user_features,
        item_features,
    })
}
