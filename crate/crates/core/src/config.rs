//! Experiment configuration in flat `key = value` form.
//!
//! Parsing fills a default configuration key by key and rejects unknown keys;
//! validation runs afterwards. [`ExperimentConfig::to_text`] writes every key,
//! so the written file alone reproduces a run.

use std::fmt::{Display, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use crate::datagen::{Noise, ObservationModel, SampleSize, SyntheticSpec};
use crate::error::{Error, Result};
use crate::graph::Metric;
use crate::io::parse_key_values;
use crate::linalg::SolveMethod;
use crate::solver::SolverConfig;

/// Where the tensor being completed comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Source {
    #[default]
    Synthetic,
    Coo,
    Ratings,
    Traffic,
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synthetic" => Ok(Self::Synthetic),
            "coo" => Ok(Self::Coo),
            "ratings" => Ok(Self::Ratings),
            "traffic" => Ok(Self::Traffic),
            other => Err(Error::config(format!("unknown source '{other}'"))),
        }
    }
}

impl Display for Source {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Synthetic => "synthetic",
            Self::Coo => "coo",
            Self::Ratings => "ratings",
            Self::Traffic => "traffic",
        })
    }
}

/// Layout of graph files given as input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GraphFormat {
    /// `i j t` lines.
    #[default]
    Events,
    /// `i j` lines repeated over every period.
    Static,
}

impl FromStr for GraphFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "events" => Ok(Self::Events),
            "static" => Ok(Self::Static),
            other => Err(Error::config(format!("unknown graph format '{other}'"))),
        }
    }
}

impl Display for GraphFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Events => "events",
            Self::Static => "static",
        })
    }
}

/// File inputs for non-synthetic runs.
#[derive(Debug, Clone, PartialEq)]
pub struct InputConfig {
    pub source: Source,
    pub tensor_file: Option<PathBuf>,
    pub ratings_file: Option<PathBuf>,
    pub rating_periods: usize,
    pub traffic_file: Option<PathBuf>,
    pub segments: usize,
    pub intervals_per_day: usize,
    pub days: usize,
    pub zeros_are_values: bool,
    pub graph_w_file: Option<PathBuf>,
    pub graph_h_file: Option<PathBuf>,
    pub graph_format: GraphFormat,
    pub features_w_file: Option<PathBuf>,
    pub features_h_file: Option<PathBuf>,
    pub knn_k: usize,
    pub metric: Metric,
    /// Share of the observed entries held out for testing file inputs.
    pub test_fraction: f64,
}

impl InputConfig {
    /// Makes relative input paths relative to `base` instead of the working
    /// directory, so a resolved config can be re-run from anywhere.
    pub fn resolve_paths(&mut self, base: &std::path::Path) {
        for p in [
            &mut self.tensor_file,
            &mut self.ratings_file,
            &mut self.traffic_file,
            &mut self.graph_w_file,
            &mut self.graph_h_file,
            &mut self.features_w_file,
            &mut self.features_h_file,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

impl Default for InputConfig {
    fn default() -> Self {
        Self {
            source: Source::Synthetic,
            tensor_file: None,
            ratings_file: None,
            rating_periods: 6,
            traffic_file: None,
            segments: 0,
            intervals_per_day: 0,
            days: 0,
            zeros_are_values: false,
            graph_w_file: None,
            graph_h_file: None,
            graph_format: GraphFormat::Events,
            features_w_file: None,
            features_h_file: None,
            knn_k: 10,
            metric: Metric::Euclidean,
            test_fraction: 0.2,
        }
    }
}

/// Value lists swept by the grid experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub ratios: Vec<f64>,
    pub intervals: Vec<usize>,
    pub ss_values: Vec<usize>,
    /// Number of seeds per grid point.
    pub repeats: usize,
    pub levels: Vec<f64>,
    pub sample_counts: Vec<usize>,
    pub ranks: Vec<usize>,
    pub folds: usize,
    pub trials: usize,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            ratios: vec![0.05, 0.1, 0.2],
            intervals: vec![4, 8, 16, 32, 64],
            ss_values: vec![1, 2, 4, 8, 16, 32, 64],
            repeats: 5,
            levels: vec![0.0, 0.15, 0.3, 0.45, 0.6],
            sample_counts: vec![1000, 2000, 4000, 8000],
            ranks: vec![1, 2, 3, 4, 5, 6],
            folds: 5,
            trials: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub solver: SolverConfig,
    pub data: SyntheticSpec,
    pub sampling: ObservationModel,
    pub grid: SweepGrid,
    pub input: InputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            solver: SolverConfig::default(),
            data: SyntheticSpec::default(),
            sampling: ObservationModel {
                sigma: 0.0,
                ..ObservationModel::ratio(0.1, 0.0, 0)
            },
            grid: SweepGrid::default(),
            input: InputConfig::default(),
        }
    }
}

fn value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::config(format!("`{key}`: cannot read `{raw}`")))
}

fn flag(key: &str, raw: &str) -> Result<bool> {
    match raw {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::config(format!("`{key}`: expected true or false, got `{raw}`"))),
    }
}

fn list<T: FromStr>(key: &str, raw: &str) -> Result<Vec<T>> {
    if raw.is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',').map(|v| value(key, v.trim())).collect()
}

fn path(raw: &str) -> Option<PathBuf> {
    (!raw.is_empty()).then(|| PathBuf::from(raw))
}

fn solve_method(key: &str, raw: &str) -> Result<SolveMethod> {
    match raw {
        "auto" => Ok(SolveMethod::Auto),
        "direct" => Ok(SolveMethod::Direct),
        "cg" => Ok(SolveMethod::ConjugateGradient),
        _ => Err(Error::config(format!("`{key}`: expected auto, direct or cg, got `{raw}`"))),
    }
}

fn solve_method_name(m: SolveMethod) -> &'static str {
    match m {
        SolveMethod::Auto => "auto",
        SolveMethod::Direct => "direct",
        SolveMethod::ConjugateGradient => "cg",
    }
}

fn noise(key: &str, raw: &str) -> Result<Noise> {
    match raw {
        "gaussian" => Ok(Noise::Gaussian),
        "none" => Ok(Noise::None),
        _ => Err(Error::config(format!("`{key}`: expected gaussian or none, got `{raw}`"))),
    }
}

fn join<T: Display>(items: &[T]) -> String {
    items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn join_f64(items: &[f64]) -> String {
    items.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",")
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (line, key, raw) in parse_key_values(text)? {
            cfg.set(&key, &raw)
                .map_err(|e| Error::config(format!("line {line}: {}", e.to_string().trim_start_matches("invalid configuration: "))))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Assigns one key. Unknown keys are an error.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        let s = &mut self.solver;
        let d = &mut self.data;
        let o = &mut self.sampling;
        let g = &mut self.grid;
        let i = &mut self.input;
        match key {
            "seed" => self.seed = value(key, raw)?,
            "rank" => s.rank = value(key, raw)?,
            "lambda_g" => s.lambda_g = value(key, raw)?,
            "lambda_1" => s.lambda_1 = value(key, raw)?,
            "beta" => s.beta = value(key, raw)?,
            "beta_theory" => s.beta_theory = flag(key, raw)?,
            "gamma" => s.gamma = value(key, raw)?,
            "ss" => s.ss = value(key, raw)?,
            "transform" => s.transform = raw.parse()?,
            "cg_tol" => s.cg_tol = value(key, raw)?,
            "cg_max_iter" => s.cg_max_iter = value(key, raw)?,
            "inner_solver" => s.inner_solver = solve_method(key, raw)?,
            "max_iter" => s.max_iter = value(key, raw)?,
            "stop_tol" => s.stop_tol = value(key, raw)?,
            "rows" => d.rows = value(key, raw)?,
            "cols" => d.cols = value(key, raw)?,
            "periods" => d.periods = value(key, raw)?,
            "data_rank" => d.rank = value(key, raw)?,
            "communities" => d.communities = value(key, raw)?,
            "p_in" => d.p_in = value(key, raw)?,
            "p_out" => d.p_out = value(key, raw)?,
            "interval" => d.interval = value(key, raw)?,
            "sample_ratio" => o.size = SampleSize::Ratio(value(key, raw)?),
            "sample_count" => o.size = SampleSize::Count(value(key, raw)?),
            "sigma" => o.sigma = value(key, raw)?,
            "noise" => o.noise = noise(key, raw)?,
            "with_replacement" => o.with_replacement = flag(key, raw)?,
            "ratios" => g.ratios = list(key, raw)?,
            "intervals" => g.intervals = list(key, raw)?,
            "ss_values" => g.ss_values = list(key, raw)?,
            "repeats" => g.repeats = value(key, raw)?,
            "levels" => g.levels = list(key, raw)?,
            "sample_counts" => g.sample_counts = list(key, raw)?,
            "ranks" => g.ranks = list(key, raw)?,
            "folds" => g.folds = value(key, raw)?,
            "trials" => g.trials = value(key, raw)?,
            "source" => i.source = raw.parse()?,
            "tensor_file" => i.tensor_file = path(raw),
            "ratings_file" => i.ratings_file = path(raw),
            "rating_periods" => i.rating_periods = value(key, raw)?,
            "traffic_file" => i.traffic_file = path(raw),
            "segments" => i.segments = value(key, raw)?,
            "intervals_per_day" => i.intervals_per_day = value(key, raw)?,
            "days" => i.days = value(key, raw)?,
            "zeros_are_values" => i.zeros_are_values = flag(key, raw)?,
            "graph_w_file" => i.graph_w_file = path(raw),
            "graph_h_file" => i.graph_h_file = path(raw),
            "graph_format" => i.graph_format = raw.parse()?,
            "features_w_file" => i.features_w_file = path(raw),
            "features_h_file" => i.features_h_file = path(raw),
            "knn_k" => i.knn_k = value(key, raw)?,
            "metric" => i.metric = raw.parse()?,
            "test_fraction" => i.test_fraction = value(key, raw)?,
            _ => return Err(Error::config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.data;
        if d.rows == 0 || d.cols == 0 || d.periods == 0 {
            return Err(Error::config("data dimensions must be positive"));
        }
        if self.input.source == Source::Synthetic {
            self.solver.validate((d.rows, d.cols, d.periods))?;
        }
        if let SampleSize::Ratio(r) = self.sampling.size {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::config(format!("sample_ratio {r} outside (0, 1]")));
            }
        }
        if !(self.sampling.sigma >= 0.0) {
            return Err(Error::config("sigma must be non-negative"));
        }
        if self.grid.repeats == 0 {
            return Err(Error::config("repeats must be at least 1"));
        }
        if self.grid.folds < 2 {
            return Err(Error::config("folds must be at least 2"));
        }
        if self.grid.ratios.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
            return Err(Error::config("every ratio must lie in (0, 1]"));
        }
        if self.grid.levels.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return Err(Error::config("perturbation levels must lie in [0, 1]"));
        }
        if !(self.input.test_fraction > 0.0 && self.input.test_fraction < 1.0) {
            return Err(Error::config("test_fraction must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Every key with its resolved value.
    pub fn to_text(&self) -> String {
        let s = &self.solver;
        let d = &self.data;
        let o = &self.sampling;
        let g = &self.grid;
        let i = &self.input;
        let mut pairs: Vec<(&str, String)> = vec![
            ("seed", self.seed.to_string()),
            ("rank", s.rank.to_string()),
            ("lambda_g", format!("{:?}", s.lambda_g)),
            ("lambda_1", format!("{:?}", s.lambda_1)),
            ("beta", format!("{:?}", s.beta)),
            ("beta_theory", s.beta_theory.to_string()),
            ("gamma", format!("{:?}", s.gamma)),
            ("ss", s.ss.to_string()),
            ("transform", s.transform.to_string()),
            ("cg_tol", format!("{:?}", s.cg_tol)),
            ("cg_max_iter", s.cg_max_iter.to_string()),
            ("inner_solver", solve_method_name(s.inner_solver).to_string()),
            ("max_iter", s.max_iter.to_string()),
            ("stop_tol", format!("{:?}", s.stop_tol)),
            ("rows", d.rows.to_string()),
            ("cols", d.cols.to_string()),
            ("periods", d.periods.to_string()),
            ("data_rank", d.rank.to_string()),
            ("communities", d.communities.to_string()),
            ("p_in", format!("{:?}", d.p_in)),
            ("p_out", format!("{:?}", d.p_out)),
            ("interval", d.interval.to_string()),
        ];
        pairs.push(match o.size {
            SampleSize::Ratio(r) => ("sample_ratio", format!("{r:?}")),
            SampleSize::Count(n) => ("sample_count", n.to_string()),
        });
        pairs.extend([
            ("sigma", format!("{:?}", o.sigma)),
            ("noise", match o.noise {
                Noise::Gaussian => "gaussian".into(),
                Noise::None => "none".into(),
            }),
            ("with_replacement", o.with_replacement.to_string()),
            ("ratios", join_f64(&g.ratios)),
            ("intervals", join(&g.intervals)),
            ("ss_values", join(&g.ss_values)),
            ("repeats", g.repeats.to_string()),
            ("levels", join_f64(&g.levels)),
            ("sample_counts", join(&g.sample_counts)),
            ("ranks", join(&g.ranks)),
            ("folds", g.folds.to_string()),
            ("trials", g.trials.to_string()),
            ("source", i.source.to_string()),
            ("tensor_file", show_path(&i.tensor_file)),
            ("ratings_file", show_path(&i.ratings_file)),
            ("rating_periods", i.rating_periods.to_string()),
            ("traffic_file", show_path(&i.traffic_file)),
            ("segments", i.segments.to_string()),
            ("intervals_per_day", i.intervals_per_day.to_string()),
            ("days", i.days.to_string()),
            ("zeros_are_values", i.zeros_are_values.to_string()),
            ("graph_w_file", show_path(&i.graph_w_file)),
            ("graph_h_file", show_path(&i.graph_h_file)),
            ("graph_format", i.graph_format.to_string()),
            ("features_w_file", show_path(&i.features_w_file)),
            ("features_h_file", show_path(&i.features_h_file)),
            ("knn_k", i.knn_k.to_string()),
            ("metric", i.metric.to_string()),
            ("test_fraction", format!("{:?}", i.test_fraction)),
        ]);
        let mut out = String::new();
        for (k, v) in pairs {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn custom_values_round_trip() {
        let text = "seed = 9\nrank = 3\nlambda_g = 0.25\ntransform = dct\nsample_count = 700\n\
                    ratios = 0.1,0.3\ninner_solver = cg\nsource = coo\ntensor_file = /tmp/x.coo\n\
                    metric = cosine\nwith_replacement = true\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.solver.rank, 3);
        assert_eq!(cfg.sampling.size, SampleSize::Count(700));
        assert_eq!(cfg.grid.ratios, vec![0.1, 0.3]);
        assert_eq!(cfg.input.tensor_file, Some(PathBuf::from("/tmp/x.coo")));
        assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        let err = ExperimentConfig::parse("rank = 2\nlamda_g = 1\n").unwrap_err();
        assert!(err.to_string().contains("line 2") && err.to_string().contains("lamda_g"), "{err}");
        assert_eq!(err.exit_code(), 2);
        assert!(ExperimentConfig::parse("ss = 3\n").is_err());
        assert!(ExperimentConfig::parse("beta_theory = maybe\n").is_err());
        assert!(ExperimentConfig::parse("sample_ratio = 0\n").is_err());
    }
}
