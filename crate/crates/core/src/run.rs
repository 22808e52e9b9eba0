//! Experiment commands behind the `graphtc` binary.
//!
//! Every command writes `config.txt` (the fully resolved configuration),
//! `metrics.csv` and `seeds.txt` into its output directory. Grid commands
//! also give each job a subdirectory of its own with the same three files.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, GraphFormat, Source};
use crate::datagen::{derived_seed, sample_observations, synthetic_instance, ObservationModel, SampleSize, SyntheticSpec};
use crate::error::{Error, Result};
use crate::experiments::{
    alpha_static_vs_dynamic, alpha_vs_perturbation, best_ss, compare_graph_modes, cv_rank, median, repeat_seed,
    scaling_probe, spearman, synthetic_rating_log, theory_check, GraphMode, Problem, RatingLogSpec, PART_SAMPLE,
    PART_SOLVER,
};
use crate::graph::{knn_static_graph, DynamicGraph};
use crate::io::{
    ingest_ratings, ingest_traffic, parse_rating_log, read_coo, read_edge_events, read_matrix, read_static_edges,
    write_coo, write_dense_coo, write_edge_events, write_matrix, write_rating_log,
};
use crate::solver::{ObservedTensor, SolverConfig};

/// Random factorizations drawn per instance by `theory-check`.
pub const FACTORIZATIONS_PER_TRIAL: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Generate,
    Complete,
    SweepSs,
    CompareGraphModes,
    AlphaProbe,
    ScalingProbe,
    TheoryCheck,
    CvRank,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Generate,
        Command::Complete,
        Command::SweepSs,
        Command::CompareGraphModes,
        Command::AlphaProbe,
        Command::ScalingProbe,
        Command::TheoryCheck,
        Command::CvRank,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Complete => "complete",
            Command::SweepSs => "sweep-ss",
            Command::CompareGraphModes => "compare-graph-modes",
            Command::AlphaProbe => "alpha-probe",
            Command::ScalingProbe => "scaling-probe",
            Command::TheoryCheck => "theory-check",
            Command::CvRank => "cv-rank",
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown subcommand '{s}'")))
    }
}

impl Display for Command {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A CSV table whose cells are already formatted. Floats use the shortest
/// representation that reads back to the same value.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| Error::Data("empty table".into()))?
            .split(',')
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (k, line) in lines.enumerate() {
            let row: Vec<String> = line.split(',').map(str::to_string).collect();
            if row.len() != header.len() {
                return Err(Error::parse(k + 2, format!("expected {} fields, found {}", header.len(), row.len())));
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Values of a column read as numbers; cells that are not numbers give NaN.
    pub fn numbers(&self, name: &str) -> Vec<f64> {
        match self.column(name) {
            Some(c) => self.rows.iter().map(|r| r[c].parse().unwrap_or(f64::NAN)).collect(),
            None => Vec::new(),
        }
    }

    /// Largest absolute difference between numeric cells of two tables of the
    /// same shape. Non-numeric cells must match exactly.
    pub fn max_numeric_deviation(&self, other: &Table) -> Option<f64> {
        if self.header != other.header || self.rows.len() != other.rows.len() {
            return None;
        }
        let mut worst = 0.0f64;
        for (a, b) in self.rows.iter().zip(&other.rows) {
            for (x, y) in a.iter().zip(b) {
                match (x.parse::<f64>(), y.parse::<f64>()) {
                    (Ok(x), Ok(y)) if x.is_nan() && y.is_nan() => {}
                    (Ok(x), Ok(y)) => worst = worst.max((x - y).abs()),
                    _ if x == y => {}
                    _ => return None,
                }
            }
        }
        Some(worst)
    }
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn cell(x: impl Display) -> String {
    x.to_string()
}

/// Files produced by one command or job, written together at the end.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub metrics: Table,
    pub seeds: Vec<(String, u64)>,
    /// Additional files by name.
    pub files: Vec<(String, String)>,
    /// Per-job subdirectories.
    pub jobs: Vec<(String, RunOutput)>,
}

impl RunOutput {
    fn seeds_text(&self) -> String {
        self.seeds.iter().map(|(k, s)| format!("{k} {s}\n")).collect()
    }

    fn write(&self, dir: &Path, config: &str) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("config.txt"), config)?;
        fs::write(dir.join("metrics.csv"), self.metrics.to_csv())?;
        fs::write(dir.join("seeds.txt"), self.seeds_text())?;
        for (name, text) in &self.files {
            fs::write(dir.join(name), text)?;
        }
        for (name, job) in &self.jobs {
            job.write(&dir.join(name), config)?;
        }
        Ok(())
    }
}

/// Runs `command` and writes its outputs under `out`.
pub fn run(command: Command, config: &ExperimentConfig, out: &Path) -> Result<RunOutput> {
    config.validate()?;
    let output = execute(command, config)?;
    output.write(out, &config.to_text())?;
    Ok(output)
}

/// Runs `command` without touching the file system beyond reading inputs.
pub fn execute(command: Command, config: &ExperimentConfig) -> Result<RunOutput> {
    match command {
        Command::Generate => generate(config),
        Command::Complete => complete(config),
        Command::SweepSs => sweep(config),
        Command::CompareGraphModes => compare(config),
        Command::AlphaProbe => alpha(config),
        Command::ScalingProbe => scaling(config),
        Command::TheoryCheck => theory(config),
        Command::CvRank => cross_validate(config),
    }
}

fn solver_for(config: &ExperimentConfig, seed: u64) -> SolverConfig {
    SolverConfig {
        seed: derived_seed(seed, PART_SOLVER),
        ..config.solver.clone()
    }
}

fn sampling_for(config: &ExperimentConfig, seed: u64, size: Option<SampleSize>) -> ObservationModel {
    ObservationModel {
        seed: derived_seed(seed, PART_SAMPLE),
        size: size.unwrap_or(config.sampling.size),
        ..config.sampling.clone()
    }
}

fn spec_for(config: &ExperimentConfig, seed: u64, interval: Option<usize>) -> SyntheticSpec {
    SyntheticSpec {
        seed,
        interval: interval.unwrap_or(config.data.interval),
        ..config.data.clone()
    }
}

fn read_file(path: &Option<PathBuf>, what: &str) -> Result<String> {
    let p = path
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig(format!("{what} is required for this source")))?;
    fs::read_to_string(p).map_err(|e| Error::Data(format!("{}: {e}", p.display())))
}

fn graph_from_file(path: &Path, format: GraphFormat, vertices: usize, periods: usize) -> Result<DynamicGraph> {
    let text = read_file(&Some(path.to_path_buf()), "graph file")?;
    match format {
        GraphFormat::Events => read_edge_events(&text, vertices, periods),
        GraphFormat::Static => read_static_edges(&text, vertices, periods),
    }
}

/// One side's graph: from an edge file, else from a feature matrix by k-NN,
/// else none. `rows` picks the feature row of each vertex.
fn side_graph(
    config: &ExperimentConfig,
    graph_file: &Option<PathBuf>,
    features_file: &Option<PathBuf>,
    rows: &[usize],
    periods: usize,
) -> Result<Option<DynamicGraph>> {
    let input = &config.input;
    if let Some(path) = graph_file {
        return graph_from_file(path, input.graph_format, rows.len(), periods).map(Some);
    }
    let Some(_) = features_file else { return Ok(None) };
    let all = read_matrix(&read_file(features_file, "feature file")?)?;
    if let Some(&bad) = rows.iter().find(|&&r| r >= all.nrows()) {
        return Err(Error::Data(format!("feature file has {} rows, vertex needs row {}", all.nrows(), bad + 1)));
    }
    let features = DMatrix::from_fn(rows.len(), all.ncols(), |i, j| all[(rows[i], j)]);
    let k = input.knn_k.min(rows.len().saturating_sub(1));
    knn_static_graph(&features, k, input.metric, periods).map(Some)
}

/// Observed entries and graphs read from the configured files.
fn file_data(config: &ExperimentConfig) -> Result<(ObservedTensor, Option<DynamicGraph>, Option<DynamicGraph>)> {
    let input = &config.input;
    let (observed, user_rows, item_rows) = match input.source {
        Source::Synthetic => unreachable!("synthetic data has no files"),
        Source::Coo => {
            let observed = read_coo(&read_file(&input.tensor_file, "tensor_file")?)?;
            let (n1, n2, _) = observed.dims();
            (observed, (0..n1).collect(), (0..n2).collect())
        }
        Source::Ratings => {
            let log = parse_rating_log(&read_file(&input.ratings_file, "ratings_file")?)?;
            let t = ingest_ratings(&log, input.rating_periods)?;
            log::info!(
                "ingested {} ratings into {:?}, density {:.4}%, {} collapsed",
                log.len(),
                t.observed.dims(),
                100.0 * t.density(),
                t.collapsed
            );
            let rows = |ids: &[u64]| -> Result<Vec<usize>> {
                ids.iter()
                    .map(|&id| {
                        usize::try_from(id)
                            .ok()
                            .and_then(|v| v.checked_sub(1))
                            .ok_or_else(|| Error::Data(format!("id {id} has no feature row")))
                    })
                    .collect()
            };
            let (users, items) = (rows(&t.users)?, rows(&t.items)?);
            (t.observed, users, items)
        }
        Source::Traffic => {
            let matrix = read_matrix(&read_file(&input.traffic_file, "traffic_file")?)?;
            let observed = ingest_traffic(&matrix, input.segments, input.intervals_per_day, input.days, !input.zeros_are_values)?;
            let (n1, n2, _) = observed.dims();
            (observed, (0..n1).collect(), (0..n2).collect())
        }
    };
    let periods = observed.dims().2;
    let g_w = side_graph(config, &input.graph_w_file, &input.features_w_file, &user_rows, periods)?;
    let g_h = side_graph(config, &input.graph_h_file, &input.features_h_file, &item_rows, periods)?;
    Ok((observed, g_w, g_h))
}

/// The problem for repeat seed `seed`: a fresh synthetic instance and mask,
/// or a fresh hold-out split of the file data.
fn problem_for(config: &ExperimentConfig, seed: u64, size: Option<SampleSize>) -> Result<Problem> {
    match config.input.source {
        Source::Synthetic => {
            let inst = synthetic_instance(&spec_for(config, seed, None))?;
            Problem::synthetic(&inst, &sampling_for(config, seed, size))
        }
        _ => {
            let (observed, g_w, g_h) = file_data(config)?;
            Problem::holdout(&observed, g_w, g_h, config.input.test_fraction, seed)
        }
    }
}

fn repeats(config: &ExperimentConfig) -> Vec<(usize, u64)> {
    (0..config.grid.repeats).map(|k| (k, repeat_seed(config.seed, k))).collect()
}

fn generate(config: &ExperimentConfig) -> Result<RunOutput> {
    let seed = config.seed;
    let mut out = RunOutput {
        metrics: Table::new(&["quantity", "value"]),
        seeds: vec![("base".into(), seed)],
        ..Default::default()
    };
    let mut put = |k: &str, v: String| out.metrics.push(vec![k.to_string(), v]);
    match config.input.source {
        Source::Ratings => {
            let spec = RatingLogSpec {
                periods: config.input.rating_periods,
                seed,
                ..RatingLogSpec::default()
            };
            let data = synthetic_rating_log(&spec)?;
            let t = ingest_ratings(&data.log, spec.periods)?;
            let (n1, n2, n3) = t.observed.dims();
            put("users", cell(n1));
            put("items", cell(n2));
            put("periods", cell(n3));
            put("ratings", cell(data.log.len()));
            put("observed", cell(t.observed.len()));
            put("density", num(t.density()));
            out.files = vec![
                ("ratings.txt".into(), write_rating_log(&data.log)),
                ("user_features.txt".into(), write_matrix(&data.user_features)),
                ("item_features.txt".into(), write_matrix(&data.item_features)),
            ];
        }
        Source::Synthetic => {
            let inst = synthetic_instance(&spec_for(config, seed, None))?;
            let model = sampling_for(config, seed, None);
            let sample = sample_observations(&inst.x, &model)?;
            out.seeds.push(("sample".into(), model.seed));
            let (n1, n2, n3) = inst.x.dims();
            put("rows", cell(n1));
            put("cols", cell(n2));
            put("periods", cell(n3));
            put("observed", cell(sample.observed.len()));
            put("draws", cell(sample.draws));
            put("test", cell(sample.test.len()));
            put("edges_w", cell((0..n3).map(|t| inst.g_w.edge_count(t)).sum::<usize>()));
            put("edges_h", cell((0..n3).map(|t| inst.g_h.edge_count(t)).sum::<usize>()));
            put("truth_frobenius", num(inst.x.frobenius_norm()));
            out.files = vec![
                ("truth.coo".into(), write_dense_coo(&inst.x)),
                ("observed.coo".into(), write_coo(&sample.observed)),
                ("graph_w.txt".into(), write_edge_events(&inst.g_w)),
                ("graph_h.txt".into(), write_edge_events(&inst.g_h)),
            ];
        }
        other => return Err(Error::InvalidConfig(format!("generate supports the synthetic and ratings sources, not {other}"))),
    }
    Ok(out)
}

fn complete(config: &ExperimentConfig) -> Result<RunOutput> {
    let seed = config.seed;
    let problem = problem_for(config, seed, None)?;
    let solver = solver_for(config, seed);
    let (completed, diag, m) = problem.solve(&solver)?;
    if !diag.converged {
        log::warn!("stopping rule not met after {} iterations", diag.iterations());
    }
    let mut metrics = Table::new(&["re", "rmse", "test_size", "observed", "iterations", "converged", "final_residual", "beta"]);
    metrics.push(vec![
        num(m.re),
        num(m.rmse),
        cell(m.test_size),
        cell(problem.observed.len()),
        cell(diag.iterations()),
        cell(diag.converged),
        num(diag.final_residual()),
        num(diag.beta),
    ]);
    Ok(RunOutput {
        metrics,
        seeds: vec![("base".into(), seed), ("solver".into(), solver.seed)],
        files: vec![
            ("completed.coo".into(), write_dense_coo(&completed)),
            ("diagnostics.csv".into(), diag.to_csv()),
        ],
        jobs: Vec::new(),
    })
}

fn sweep(config: &ExperimentConfig) -> Result<RunOutput> {
    if config.input.source != Source::Synthetic {
        return Err(Error::InvalidConfig("sweep-ss runs on synthetic data".into()));
    }
    let jobs: Vec<(usize, usize, u64)> = config
        .grid
        .intervals
        .iter()
        .flat_map(|&iv| repeats(config).into_iter().map(move |(k, s)| (iv, k, s)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(interval, k, seed)| {
            let inst = synthetic_instance(&spec_for(config, seed, Some(interval)))?;
            let problem = Problem::synthetic(&inst, &sampling_for(config, seed, None))?;
            let rows = crate::experiments::sweep_ss(&problem, &solver_for(config, seed), &config.grid.ss_values)?;
            Ok((interval, k, seed, rows))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = RunOutput {
        metrics: Table::new(&["interval", "repeat", "seed", "ss", "re", "rmse"]),
        seeds: vec![("base".into(), config.seed)],
        ..Default::default()
    };
    for (interval, k, seed, rows) in &results {
        let mut job = Table::new(&["ss", "re", "rmse"]);
        for (ss, m) in rows {
            out.metrics.push(vec![cell(interval), cell(k), cell(seed), cell(ss), num(m.re), num(m.rmse)]);
            job.push(vec![cell(ss), num(m.re), num(m.rmse)]);
        }
        out.seeds.push((format!("interval-{interval}/repeat-{k}"), *seed));
        out.jobs.push((
            format!("interval-{interval}-repeat-{k}"),
            RunOutput {
                metrics: job,
                seeds: vec![("repeat".into(), *seed)],
                ..Default::default()
            },
        ));
    }

    let mut best = Table::new(&["interval", "best_ss"]);
    let mut pairs = Vec::new();
    for &interval in &config.grid.intervals {
        let med: Vec<(usize, f64)> = config
            .grid
            .ss_values
            .iter()
            .map(|&ss| {
                let res: Vec<f64> = results
                    .iter()
                    .filter(|r| r.0 == interval)
                    .flat_map(|r| r.3.iter().filter(|x| x.0 == ss).map(|x| x.1.re))
                    .collect();
                (ss, median(&res))
            })
            .collect();
        if let Some(b) = best_ss(&med) {
            best.push(vec![cell(interval), cell(b)]);
            pairs.push((interval as f64, b as f64));
        }
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    out.files.push(("best_ss.csv".into(), best.to_csv()));
    out.files.push(("summary.csv".into(), format!("quantity,value\nspearman,{}\n", num(spearman(&x, &y)))));
    Ok(out)
}

fn compare(config: &ExperimentConfig) -> Result<RunOutput> {
    let synthetic = config.input.source == Source::Synthetic;
    let ratios: Vec<Option<f64>> = if synthetic {
        config.grid.ratios.iter().map(|&r| Some(r)).collect()
    } else {
        vec![None]
    };
    let jobs: Vec<(Option<f64>, usize, u64)> = ratios
        .iter()
        .flat_map(|&r| repeats(config).into_iter().map(move |(k, s)| (r, k, s)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(ratio, k, seed)| {
            let problem = problem_for(config, seed, ratio.map(SampleSize::Ratio))?;
            Ok((ratio, k, seed, compare_graph_modes(&problem, &solver_for(config, seed))?))
        })
        .collect::<Result<Vec<_>>>()?;

    let show = |r: Option<f64>| r.map(num).unwrap_or_else(|| "file".into());
    let mut out = RunOutput {
        metrics: Table::new(&["ratio", "repeat", "seed", "mode", "re", "rmse", "test_size"]),
        seeds: vec![("base".into(), config.seed)],
        ..Default::default()
    };
    for (ratio, k, seed, rows) in &results {
        let mut job = Table::new(&["mode", "re", "rmse", "test_size"]);
        for (mode, m) in rows {
            let tail = vec![mode.name().to_string(), num(m.re), num(m.rmse), cell(m.test_size)];
            out.metrics.push([vec![show(*ratio), cell(k), cell(seed)], tail.clone()].concat());
            job.push(tail);
        }
        out.seeds.push((format!("ratio-{}/repeat-{k}", show(*ratio)), *seed));
        out.jobs.push((
            format!("ratio-{}-repeat-{k}", show(*ratio)),
            RunOutput {
                metrics: job,
                seeds: vec![("repeat".into(), *seed)],
                ..Default::default()
            },
        ));
    }
    let mut summary = Table::new(&["ratio", "mode", "median_re"]);
    for &ratio in &ratios {
        for mode in GraphMode::ALL {
            let res: Vec<f64> = results
                .iter()
                .filter(|r| r.0 == ratio)
                .flat_map(|r| r.3.iter().filter(|x| x.0 == mode).map(|x| x.1.re))
                .collect();
            summary.push(vec![show(ratio), mode.name().into(), num(median(&res))]);
        }
    }
    out.files.push(("summary.csv".into(), summary.to_csv()));
    Ok(out)
}

fn alpha(config: &ExperimentConfig) -> Result<RunOutput> {
    let penalty = config.solver.penalty();
    let g = &config.grid;
    let perturbed = alpha_vs_perturbation(&config.data, &g.levels, penalty, g.repeats, config.seed)?;
    let by_interval = alpha_static_vs_dynamic(&config.data, &g.intervals, penalty, g.repeats, config.seed)?;
    let mut metrics = Table::new(&["probe", "param", "seed", "numerator", "denominator", "ratio"]);
    for r in &perturbed {
        metrics.push(vec!["alpha_star_over_alpha".into(), num(r.level), cell(r.seed), num(r.alpha_star), num(r.alpha), num(r.ratio())]);
    }
    for r in &by_interval {
        metrics.push(vec![
            "static_over_dynamic".into(),
            cell(r.interval),
            cell(r.seed),
            num(r.alpha_static),
            num(r.alpha_dynamic),
            num(r.ratio()),
        ]);
    }
    let seeds = repeats(config).into_iter().map(|(k, s)| (format!("repeat-{k}"), s));
    Ok(RunOutput {
        metrics,
        seeds: std::iter::once(("base".into(), config.seed)).chain(seeds).collect(),
        ..Default::default()
    })
}

fn scaling(config: &ExperimentConfig) -> Result<RunOutput> {
    let report = scaling_probe(
        &config.data,
        &config.grid.sample_counts,
        &config.sampling,
        &config.solver,
        config.grid.repeats,
        config.seed,
    )?;
    let mut out = RunOutput {
        metrics: Table::new(&["samples", "seed", "error_sq"]),
        seeds: vec![("base".into(), config.seed)],
        ..Default::default()
    };
    for r in &report.rows {
        out.metrics.push(vec![cell(r.samples), cell(r.seed), num(r.error_sq)]);
        let mut job = Table::new(&["samples", "error_sq"]);
        job.push(vec![cell(r.samples), num(r.error_sq)]);
        out.jobs.push((
            format!("samples-{}-seed-{}", r.samples, r.seed),
            RunOutput {
                metrics: job,
                seeds: vec![("repeat".into(), r.seed)],
                ..Default::default()
            },
        ));
    }
    let mut summary = String::from("quantity,value\n");
    for (n, e) in report.medians() {
        summary.push_str(&format!("median_error_sq_{n},{}\n", num(e)));
    }
    summary.push_str(&format!("slope,{}\n", num(report.slope)));
    out.files.push(("summary.csv".into(), summary));
    Ok(out)
}

fn theory(config: &ExperimentConfig) -> Result<RunOutput> {
    let r = theory_check(config.grid.trials, FACTORIZATIONS_PER_TRIAL, config.seed)?;
    let mut metrics = Table::new(&["quantity", "value"]);
    let rows: [(&str, String); 8] = [
        ("trials", cell(r.trials)),
        ("max_regularizer_deviation", num(r.max_regularizer_deviation)),
        ("bound_violations", cell(r.bound_violations)),
        ("max_attained_gap", num(r.max_attained_gap)),
        ("max_reconstruction_error", num(r.max_reconstruction_error)),
        ("duality_violations", cell(r.duality_violations)),
        ("min_aligned_ratio", num(r.min_aligned_ratio)),
        ("passed", cell(r.passed())),
    ];
    for (k, v) in rows {
        metrics.push(vec![k.into(), v]);
    }
    Ok(RunOutput {
        metrics,
        seeds: vec![("base".into(), config.seed)],
        ..Default::default()
    })
}

fn cross_validate(config: &ExperimentConfig) -> Result<RunOutput> {
    let g = &config.grid;
    let results = repeats(config)
        .par_iter()
        .map(|&(k, seed)| {
            let problem = problem_for(config, seed, None)?;
            let solver = solver_for(config, seed);
            let cv = cv_rank(&problem.observed, problem.g_w.as_ref(), problem.g_h.as_ref(), &solver, &g.ranks, g.folds, seed)?;
            let tuned = SolverConfig { rank: cv.best_rank, ..solver };
            let with_graphs = problem.solve(&tuned)?.2;
            let agnostic = problem.without_graphs().solve(&tuned)?.2;
            Ok((k, seed, cv, with_graphs, agnostic))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = RunOutput {
        metrics: Table::new(&["split", "seed", "best_rank", "re_graph", "re_agnostic", "rmse_graph", "rmse_agnostic"]),
        seeds: vec![("base".into(), config.seed)],
        ..Default::default()
    };
    for (k, seed, cv, graph, agnostic) in &results {
        out.metrics.push(vec![
            cell(k),
            cell(seed),
            cell(cv.best_rank),
            num(graph.re),
            num(agnostic.re),
            num(graph.rmse),
            num(agnostic.rmse),
        ]);
        let mut job = Table::new(&["rank", "cv_re"]);
        for (r, e) in &cv.scores {
            job.push(vec![cell(r), num(*e)]);
        }
        out.seeds.push((format!("split-{k}"), *seed));
        out.jobs.push((
            format!("split-{k}"),
            RunOutput {
                metrics: job,
                seeds: vec![("split".into(), *seed)],
                ..Default::default()
            },
        ));
    }
    Ok(out)
}
