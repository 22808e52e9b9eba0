//! Text formats and dataset ingestion.
//!
//! Every reader reports the 1-based line number of the first malformed line.
//! Blank lines and `#` comments are skipped everywhere.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::DynamicGraph;
use crate::solver::ObservedTensor;
use crate::tensor::RealTensor;

/// Non-empty, non-comment lines with their 1-based numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(k, line)| {
        let line = line.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((k + 1, line))
    })
}

fn field<T: FromStr>(line: usize, token: Option<&str>, what: &str) -> Result<T> {
    let token = token.ok_or_else(|| Error::parse(line, format!("missing {what}")))?;
    token
        .parse()
        .map_err(|_| Error::parse(line, format!("cannot read {what} from `{token}`")))
}

fn no_trailing<'a>(line: usize, mut rest: impl Iterator<Item = &'a str>) -> Result<()> {
    match rest.next() {
        Some(extra) => Err(Error::parse(line, format!("unexpected trailing field `{extra}`"))),
        None => Ok(()),
    }
}

fn finite(line: usize, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::parse(line, format!("value {v} is not finite")))
    }
}

fn one_based(line: usize, v: usize, bound: usize, what: &str) -> Result<usize> {
    if v == 0 || v > bound {
        return Err(Error::parse(line, format!("{what} {v} outside 1..={bound}")));
    }
    Ok(v - 1)
}

/// Reads a COO tensor file: a `n1 n2 n3` header, then `i j k value` lines
/// with 1-based indices and at most one line per position.
pub fn read_coo(text: &str) -> Result<ObservedTensor> {
    let mut lines = content_lines(text);
    let (hline, header) = lines.next().ok_or_else(|| Error::Data("empty tensor file".into()))?;
    let mut tokens = header.split_whitespace();
    let dims: (usize, usize, usize) = (
        field(hline, tokens.next(), "n1")?,
        field(hline, tokens.next(), "n2")?,
        field(hline, tokens.next(), "n3")?,
    );
    no_trailing(hline, tokens)?;
    if dims.0 == 0 || dims.1 == 0 || dims.2 == 0 {
        return Err(Error::parse(hline, "tensor dimensions must be positive"));
    }
    let mut seen = std::collections::HashSet::new();
    let mut entries = Vec::new();
    for (n, line) in lines {
        let mut t = line.split_whitespace();
        let i = one_based(n, field(n, t.next(), "i1")?, dims.0, "i1")?;
        let j = one_based(n, field(n, t.next(), "i2")?, dims.1, "i2")?;
        let k = one_based(n, field(n, t.next(), "i3")?, dims.2, "i3")?;
        let v = finite(n, field(n, t.next(), "value")?)?;
        no_trailing(n, t)?;
        if !seen.insert((i, j, k)) {
            return Err(Error::parse(n, format!("position ({}, {}, {}) appears twice", i + 1, j + 1, k + 1)));
        }
        entries.push((i, j, k, v));
    }
    ObservedTensor::new(dims, &entries)
}

/// Writes observed entries in COO form, in storage order. Values use the
/// shortest representation that reads back to the same `f64`.
pub fn write_coo(observed: &ObservedTensor) -> String {
    let (n1, n2, n3) = observed.dims();
    let mut out = format!("{n1} {n2} {n3}\n");
    for (i, j, k, v) in observed.entries() {
        let _ = writeln!(out, "{} {} {} {:?}", i + 1, j + 1, k + 1, v);
    }
    out
}

/// Every entry of a dense tensor in COO form.
pub fn write_dense_coo(x: &RealTensor) -> String {
    let all: Vec<usize> = (0..x.len()).collect();
    write_coo(&ObservedTensor::from_offsets(x, &all).expect("dense offsets are valid"))
}

/// Reads `i j t` edge events (1-based) into a dynamic graph.
pub fn read_edge_events(text: &str, vertices: usize, periods: usize) -> Result<DynamicGraph> {
    let mut events = Vec::new();
    for (n, line) in content_lines(text) {
        let mut t = line.split_whitespace();
        let ev = (
            field(n, t.next(), "i")?,
            field(n, t.next(), "j")?,
            field(n, t.next(), "t")?,
        );
        no_trailing(n, t)?;
        one_based(n, ev.0, vertices, "vertex")?;
        one_based(n, ev.1, vertices, "vertex")?;
        one_based(n, ev.2, periods, "period")?;
        events.push(ev);
    }
    DynamicGraph::from_edge_events(&events, vertices, periods)
}

/// Reads `i j` edges (1-based) and repeats them over every period.
pub fn read_static_edges(text: &str, vertices: usize, periods: usize) -> Result<DynamicGraph> {
    let mut edges = Vec::new();
    for (n, line) in content_lines(text) {
        let mut t = line.split_whitespace();
        let e = (field(n, t.next(), "i")?, field(n, t.next(), "j")?);
        no_trailing(n, t)?;
        one_based(n, e.0, vertices, "vertex")?;
        one_based(n, e.1, vertices, "vertex")?;
        edges.push(e);
    }
    DynamicGraph::from_static_edges(&edges, vertices, periods)
}

pub fn write_edge_events(g: &DynamicGraph) -> String {
    g.to_edge_events()
        .iter()
        .fold(String::new(), |mut out, (i, j, t)| {
            let _ = writeln!(out, "{i} {j} {t}");
            out
        })
}

/// Reads a whitespace-separated numeric matrix, one row per line.
pub fn read_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (n, line) in content_lines(text) {
        let row = line
            .split_whitespace()
            .map(|tok| field::<f64>(n, Some(tok), "number").and_then(|v| finite(n, v)))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::parse(n, format!("row has {} columns, expected {}", row.len(), first.len())));
            }
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn write_matrix(a: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in a.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// One line of a rating log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating {
    pub user: u64,
    pub item: u64,
    pub rating: f64,
    pub timestamp: i64,
}

pub fn parse_rating_log(text: &str) -> Result<Vec<Rating>> {
    content_lines(text)
        .map(|(n, line)| {
            let mut t = line.split_whitespace();
            let r = Rating {
                user: field(n, t.next(), "user")?,
                item: field(n, t.next(), "item")?,
                rating: finite(n, field(n, t.next(), "rating")?)?,
                timestamp: field(n, t.next(), "timestamp")?,
            };
            no_trailing(n, t)?;
            Ok(r)
        })
        .collect()
}

pub fn write_rating_log(ratings: &[Rating]) -> String {
    ratings.iter().fold(String::new(), |mut out, r| {
        let _ = writeln!(out, "{} {} {:?} {}", r.user, r.item, r.rating, r.timestamp);
        out
    })
}

/// A user × item × period tensor built from a rating log.
#[derive(Debug, Clone)]
pub struct RatingTensor {
    pub observed: ObservedTensor,
    /// Original user id of each row.
    pub users: Vec<u64>,
    /// Original item id of each column.
    pub items: Vec<u64>,
    /// Lines merged into an existing (user, item, period) cell.
    pub collapsed: usize,
}

impl RatingTensor {
    /// Fraction of cells holding an observation.
    pub fn density(&self) -> f64 {
        let (a, b, c) = self.observed.dims();
        self.observed.len() as f64 / (a * b * c) as f64
    }
}

/// Period of `ts` among `periods` equal-width buckets over `[lo, hi]`; the
/// maximum timestamp falls into the last bucket.
pub fn bucket(ts: i64, lo: i64, hi: i64, periods: usize) -> usize {
    if hi <= lo {
        return 0;
    }
    let frac = (ts - lo) as f64 / (hi - lo) as f64;
    ((frac * periods as f64).floor() as usize).min(periods - 1)
}

/// Remaps ids densely in ascending id order, buckets timestamps, and
/// averages repeated (user, item, period) ratings.
pub fn ingest_ratings(ratings: &[Rating], periods: usize) -> Result<RatingTensor> {
    if periods == 0 {
        return Err(Error::config("the number of periods must be positive"));
    }
    if ratings.is_empty() {
        return Err(Error::Data("rating log is empty".into()));
    }
    let index = |ids: &mut dyn Iterator<Item = u64>| -> BTreeMap<u64, usize> {
        let mut map: BTreeMap<u64, usize> = ids.map(|id| (id, 0)).collect();
        for (k, v) in map.values_mut().enumerate() {
            *v = k;
        }
        map
    };
    let users = index(&mut ratings.iter().map(|r| r.user));
    let items = index(&mut ratings.iter().map(|r| r.item));
    let lo = ratings.iter().map(|r| r.timestamp).min().expect("non-empty");
    let hi = ratings.iter().map(|r| r.timestamp).max().expect("non-empty");
    let mut cells: BTreeMap<(usize, usize, usize), (f64, usize)> = BTreeMap::new();
    for r in ratings {
        let key = (users[&r.user], items[&r.item], bucket(r.timestamp, lo, hi, periods));
        let cell = cells.entry(key).or_insert((0.0, 0));
        cell.0 += r.rating;
        cell.1 += 1;
    }
    let entries: Vec<_> = cells
        .iter()
        .map(|(&(i, j, t), &(sum, count))| (i, j, t, sum / count as f64))
        .collect();
    let observed = ObservedTensor::new((users.len(), items.len(), periods), &entries)?;
    Ok(RatingTensor {
        observed,
        users: users.keys().copied().collect(),
        items: items.keys().copied().collect(),
        collapsed: ratings.len() - entries.len(),
    })
}

/// Reshapes a `segments × (intervals·days)` matrix into a
/// `segments × intervals × days` tensor; column `d·intervals + k` is interval
/// `k` of day `d`. With `zeros_missing`, zero readings are left unobserved.
pub fn ingest_traffic(
    matrix: &DMatrix<f64>,
    segments: usize,
    intervals: usize,
    days: usize,
    zeros_missing: bool,
) -> Result<ObservedTensor> {
    if matrix.nrows() != segments || matrix.ncols() != intervals * days {
        return Err(Error::dims(format!(
            "traffic matrix is {}×{}, expected {segments}×{}",
            matrix.nrows(),
            matrix.ncols(),
            intervals * days
        )));
    }
    let mut entries = Vec::new();
    for d in 0..days {
        for k in 0..intervals {
            for s in 0..segments {
                let v = matrix[(s, d * intervals + k)];
                if !v.is_finite() {
                    return Err(Error::Data(format!("non-finite reading at segment {}, column {}", s + 1, d * intervals + k + 1)));
                }
                if zeros_missing && v == 0.0 {
                    continue;
                }
                entries.push((s, k, d, v));
            }
        }
    }
    ObservedTensor::new((segments, intervals, days), &entries)
}

/// Inverse of [`ingest_traffic`]; unobserved cells become zero.
pub fn export_traffic(observed: &ObservedTensor) -> DMatrix<f64> {
    let (segments, intervals, days) = observed.dims();
    let mut out = DMatrix::zeros(segments, intervals * days);
    for (s, k, d, v) in observed.entries() {
        out[(s, d * intervals + k)] = v;
    }
    out
}

/// Flat `key = value` text with `#` comments. Keys must be unique.
pub fn parse_key_values(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut seen = HashMap::new();
    let mut out = Vec::new();
    for (n, line) in content_lines(text) {
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {n}: expected `key = value`")))?;
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(Error::config(format!("line {n}: empty key")));
        }
        if let Some(first) = seen.insert(key.clone(), n) {
            return Err(Error::config(format!("line {n}: `{key}` already set on line {first}")));
        }
        out.push((n, key, value.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coo_round_trip_is_lossless() {
        let entries = [(0, 1, 2, 0.1 + 0.2), (2, 0, 0, -1e-300), (1, 1, 1, 12345.678901234567)];
        let obs = ObservedTensor::new((3, 2, 3), &entries).unwrap();
        let text = write_coo(&obs);
        let back = read_coo(&text).unwrap();
        assert_eq!(back.dims(), obs.dims());
        assert_eq!(back.entries(), obs.entries());
    }

    #[test]
    fn coo_errors_carry_line_numbers() {
        let err = read_coo("2 2 2\n1 1 1 0.5\n# note\n3 1 1 1.0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");
        let err = read_coo("2 2 2\n1 1 1 0.5\n1 1 1 0.7\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        assert!(read_coo("2 2 2\n1 1 1 nan\n").is_err());
        assert!(read_coo("2 2 2\n1 1 1 0.5 9\n").is_err());
    }

    #[test]
    fn edge_files() {
        let g = read_edge_events("# events\n1 2 1\n2 3 2\n", 3, 2).unwrap();
        assert!(g.has_edge(0, 1, 0) && g.has_edge(1, 0, 0) && !g.has_edge(0, 1, 1));
        let back = read_edge_events(&write_edge_events(&g), 3, 2).unwrap();
        assert_eq!(back.adjacency(), g.adjacency());
        let s = read_static_edges("1 3\n", 3, 4).unwrap();
        assert!((0..4).all(|t| s.has_edge(0, 2, t)));
        assert!(matches!(read_edge_events("1 4 1\n", 3, 2), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn single_rating_and_collapse() {
        let one = ingest_ratings(&parse_rating_log("7 9 4 100\n").unwrap(), 6).unwrap();
        assert_eq!(one.observed.dims(), (1, 1, 6));
        assert_eq!(one.observed.len(), 1);

        let log = "1 5 4 0\n1 5 2 10\n2 6 5 1000\n";
        let t = ingest_ratings(&parse_rating_log(log).unwrap(), 2).unwrap();
        assert_eq!(t.collapsed, 1);
        assert_eq!(t.observed.entries()[0], (0, 0, 0, 3.0));
        assert_eq!(t.users, vec![1, 2]);
        assert!(matches!(parse_rating_log("1 2 x 3\n"), Err(Error::Parse { line: 1, .. })));
        assert!(ingest_ratings(&[], 3).is_err());
    }

    #[test]
    fn buckets_cover_range() {
        assert_eq!(bucket(0, 0, 60, 6), 0);
        assert_eq!(bucket(59, 0, 60, 6), 5);
        assert_eq!(bucket(60, 0, 60, 6), 5);
        assert_eq!(bucket(10, 0, 60, 6), 1);
        assert_eq!(bucket(5, 5, 5, 3), 0);
    }

    #[test]
    fn traffic_reshape_and_round_trip() {
        let m = DMatrix::from_fn(3, 4 * 2, |s, c| (s * 10 + c) as f64 + 1.0);
        let obs = ingest_traffic(&m, 3, 4, 2, true).unwrap();
        assert_eq!(obs.dims(), (3, 4, 2));
        assert_eq!(obs.values().get(2, 1, 1), m[(2, 5)]);
        assert_eq!(export_traffic(&obs), m);
        assert!(ingest_traffic(&DMatrix::zeros(3, 8), 3, 4, 2, true).unwrap().is_empty());
        assert_eq!(ingest_traffic(&DMatrix::zeros(3, 8), 3, 4, 2, false).unwrap().len(), 24);
        assert!(ingest_traffic(&m, 3, 3, 2, true).is_err());
    }

    #[test]
    fn matrix_text_round_trip() {
        let m = DMatrix::from_fn(2, 3, |i, j| (i as f64 + 0.1) * (j as f64 - 1.3));
        assert_eq!(read_matrix(&write_matrix(&m)).unwrap(), m);
        assert!(read_matrix("1 2\n3\n").is_err());
    }

    #[test]
    fn key_values() {
        let kv = parse_key_values("a = 1\n# c\nb=two # trailing\n").unwrap();
        assert_eq!(kv[1], (3, "b".to_string(), "two".to_string()));
        assert!(parse_key_values("a = 1\na = 2\n").is_err());
        assert!(parse_key_values("novalue\n").is_err());
    }
}
