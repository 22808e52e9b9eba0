//! Synthetic data: community dynamic graphs, low-tubal-rank tensors with
//! graph structure embedded by a spectral low-pass filter, graph
//! perturbation and observation sampling.

use nalgebra::DMatrix;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::algebra::{conj_transpose, t_product};
use crate::error::{Error, Result};
use crate::graph::{laplacian_tensor, DynamicGraph};
use crate::solver::ObservedTensor;
use crate::tensor::RealTensor;
use crate::transform::Transform;

/// Eigenvalues at or below this fraction of the largest are treated as zero
/// by the spectral filter.
pub const FILTER_ZERO_TOL: f64 = 1e-10;

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommunityGraphSpec {
    pub vertices: usize,
    pub communities: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub periods: usize,
    /// Number of consecutive periods sharing one graph draw.
    pub interval: usize,
    pub seed: u64,
}

impl CommunityGraphSpec {
    pub fn new(vertices: usize, communities: usize, periods: usize, interval: usize, seed: u64) -> Self {
        Self {
            vertices,
            communities,
            p_in: 0.7,
            p_out: 0.02,
            periods,
            interval,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.communities == 0 || !self.vertices.is_multiple_of(self.communities) {
            return Err(Error::config(format!(
                "{} communities do not split {} vertices evenly",
                self.communities, self.vertices
            )));
        }
        if !(0.0 <= self.p_out && self.p_out < self.p_in && self.p_in <= 1.0) {
            return Err(Error::config(format!(
                "edge probabilities need 0 <= p_out < p_in <= 1, got p_out = {}, p_in = {}",
                self.p_out, self.p_in
            )));
        }
        if self.interval == 0 || !self.periods.is_multiple_of(self.interval) {
            return Err(Error::config(format!(
                "interval {} does not divide {} periods",
                self.interval, self.periods
            )));
        }
        Ok(())
    }

    pub fn community_of(&self, v: usize) -> usize {
        v / (self.vertices / self.communities)
    }
}

/// Draws one community graph per interval and repeats it across the
/// interval's periods.
pub fn community_dynamic_graph(spec: &CommunityGraphSpec) -> Result<DynamicGraph> {
    spec.validate()?;
    let m = spec.vertices;
    let mut rng = rng_from(spec.seed);
    let mut g = DynamicGraph::edgeless(m, spec.periods);
    for block in 0..spec.periods / spec.interval {
        for j in 0..m {
            for i in 0..j {
                let p = if spec.community_of(i) == spec.community_of(j) {
                    spec.p_in
                } else {
                    spec.p_out
                };
                if rng.random::<f64>() < p {
                    for t in block * spec.interval..(block + 1) * spec.interval {
                        g.set_edge(i, j, t, true);
                    }
                }
            }
        }
    }
    Ok(g)
}

pub fn randn_tensor(n1: usize, n2: usize, n3: usize, rng: &mut impl Rng) -> RealTensor {
    RealTensor::from_fn(n1, n2, n3, |_, _, _| StandardNormal.sample(rng))
}

/// `P *_M Qᵀ` with standard normal `P` (`m × r × T`) and `Q` (`n × r × T`).
pub fn lowrank_tensor(m: usize, n: usize, periods: usize, r: usize, transform: &Transform, seed: u64) -> Result<RealTensor> {
    if r == 0 || r > m.min(n) {
        return Err(Error::config(format!("rank {r} must lie in 1..={}", m.min(n))));
    }
    let mut rng = rng_from(seed);
    let p = randn_tensor(m, r, periods, &mut rng);
    let q = randn_tensor(n, r, periods, &mut rng);
    t_product(&p, &conj_transpose(&q, transform)?, transform)
}

/// Per-period filtered eigenbasis `U·g(S)` of the graph Laplacian with
/// `g(s) = s⁻²` for `s > 0` and `g(0) = 0`. An edgeless period yields the
/// identity.
pub fn filtered_basis(g: &DynamicGraph) -> Result<Vec<DMatrix<f64>>> {
    let l = laplacian_tensor(g, 1)?;
    let m = g.vertex_count();
    Ok((0..g.period_count())
        .map(|t| {
            let slice = l.slice(t);
            if slice.iter().all(|&v| v == 0.0) {
                return DMatrix::identity(m, m);
            }
            let (values, vectors) = sorted_eigen(slice);
            let top = values.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            let filtered: Vec<f64> = values
                .iter()
                .map(|&s| if s > FILTER_ZERO_TOL * top { s.powi(-2) } else { 0.0 })
                .collect();
            let mut basis = vectors;
            for (c, &f) in filtered.iter().enumerate() {
                basis.column_mut(c).scale_mut(f);
            }
            basis
        })
        .collect())
}

/// Ascending eigenpairs of a symmetric matrix; each eigenvector's
/// largest-magnitude entry (first on ties) is made positive.
pub fn sorted_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = a.clone().symmetric_eigen();
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let mut vectors = DMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (c, &k) in order.iter().enumerate() {
        values.push(eig.eigenvalues[k]);
        let mut v = eig.eigenvectors.column(k).into_owned();
        let pivot = v.iter().enumerate().fold(0, |best, (i, x)| {
            if x.abs() > v[best].abs() + 1e-12 {
                i
            } else {
                best
            }
        });
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        vectors.set_column(c, &v);
    }
    (values, vectors)
}

/// `X = A ⋆ Z ⋆ Bᵀ` with the filtered bases of `g_w` and `g_h`, applied
/// slice by slice in the original domain. A missing graph means the identity.
pub fn embed_graph_similarity(z: &RealTensor, g_w: Option<&DynamicGraph>, g_h: Option<&DynamicGraph>) -> Result<RealTensor> {
    let (n1, n2, n3) = z.dims();
    let basis = |g: Option<&DynamicGraph>, n: usize| -> Result<Vec<DMatrix<f64>>> {
        match g {
            Some(g) if g.vertex_count() == n && g.period_count() == n3 => filtered_basis(g),
            Some(g) => Err(Error::dims(format!(
                "graph on {} vertices over {} periods cannot filter dimension {n} over {n3}",
                g.vertex_count(),
                g.period_count()
            ))),
            None => Ok(vec![DMatrix::identity(n, n); n3]),
        }
    };
    let a = basis(g_w, n1)?;
    let b = basis(g_h, n2)?;
    let slices: Vec<_> = (0..n3)
        .map(|t| &a[t] * z.slice_view(t) * b[t].transpose())
        .collect();
    RealTensor::from_slices(&slices)
}

/// Moves `round(level·|E_t|)` random edges of every period to random
/// non-edges of that period. With a fixed seed the moved sets are nested
/// across levels, so a higher level perturbs a superset of the edges.
pub fn perturb_graph(g: &DynamicGraph, level: f64, seed: u64) -> Result<DynamicGraph> {
    if !(0.0..=1.0).contains(&level) {
        return Err(Error::config(format!("perturbation level {level} outside [0, 1]")));
    }
    let m = g.vertex_count();
    let mut rng = rng_from(seed);
    let mut out = g.clone();
    for t in 0..g.period_count() {
        let edges = g.edges(t);
        let mut non_edges = Vec::new();
        for j in 0..m {
            for i in 0..j {
                if !g.has_edge(i, j, t) {
                    non_edges.push((i, j));
                }
            }
        }
        let moves = ((level * edges.len() as f64).round() as usize).min(non_edges.len());
        for &k in &index::sample(&mut rng, edges.len(), edges.len()).into_vec()[..moves] {
            let (i, j) = edges[k];
            out.set_edge(i, j, t, false);
        }
        for &k in &index::sample(&mut rng, non_edges.len(), non_edges.len()).into_vec()[..moves] {
            let (i, j) = non_edges[k];
            out.set_edge(i, j, t, true);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleSize {
    Ratio(f64),
    Count(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Noise {
    #[default]
    Gaussian,
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationModel {
    pub size: SampleSize,
    pub sigma: f64,
    pub noise: Noise,
    /// Draw `N` i.i.d. positions; repeated positions are averaged.
    pub with_replacement: bool,
    pub seed: u64,
}

impl ObservationModel {
    pub fn ratio(ratio: f64, sigma: f64, seed: u64) -> Self {
        Self {
            size: SampleSize::Ratio(ratio),
            sigma,
            noise: Noise::Gaussian,
            with_replacement: false,
            seed,
        }
    }

    /// Number of draws for a tensor with `total` entries.
    pub fn draws(&self, total: usize) -> Result<usize> {
        let n = match self.size {
            SampleSize::Ratio(r) => {
                if !(r > 0.0 && r <= 1.0) {
                    return Err(Error::config(format!("sample ratio {r} outside (0, 1]")));
                }
                (r * total as f64).floor() as usize
            }
            SampleSize::Count(n) => n,
        };
        if n == 0 {
            return Err(Error::config("sampling yields no observations"));
        }
        if !self.with_replacement && n > total {
            return Err(Error::config(format!(
                "cannot draw {n} distinct entries from {total}"
            )));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::config(format!("noise scale {} is negative", self.sigma)));
        }
        Ok(n)
    }
}

/// Training observations and the held-out test offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub observed: ObservedTensor,
    pub test: Vec<usize>,
    /// Number of draws, counting repeats.
    pub draws: usize,
}

pub fn sample_observations(x: &RealTensor, model: &ObservationModel) -> Result<Sample> {
    let total = x.len();
    let n = model.draws(total)?;
    let mut rng = rng_from(model.seed);
    let noise = |rng: &mut ChaCha8Rng| match model.noise {
        Noise::Gaussian if model.sigma > 0.0 => {
            let xi: f64 = StandardNormal.sample(rng);
            model.sigma * xi
        }
        _ => 0.0,
    };
    let (n1, n2, _) = x.dims();
    let decode = |o: usize| (o % n1, (o / n1) % n2, o / (n1 * n2));
    let entries: Vec<(usize, usize, usize, f64)> = if model.with_replacement {
        let mut sums = std::collections::BTreeMap::<usize, (f64, usize)>::new();
        for _ in 0..n {
            let o = rng.random_range(0..total);
            let y = x.as_slice()[o] + noise(&mut rng);
            let e = sums.entry(o).or_insert((0.0, 0));
            e.0 += y;
            e.1 += 1;
        }
        sums.into_iter()
            .map(|(o, (s, c))| {
                let (i, j, t) = decode(o);
                (i, j, t, s / c as f64)
            })
            .collect()
    } else {
        let mut picked = index::sample(&mut rng, total, n).into_vec();
        picked.sort_unstable();
        picked
            .into_iter()
            .map(|o| {
                let (i, j, t) = decode(o);
                (i, j, t, x.as_slice()[o] + noise(&mut rng))
            })
            .collect()
    };
    let observed = ObservedTensor::new(x.dims(), &entries)?;
    let test = observed.complement();
    Ok(Sample {
        observed,
        test,
        draws: n,
    })
}

/// Parameters of the standard synthetic instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub rows: usize,
    pub cols: usize,
    pub periods: usize,
    pub rank: usize,
    pub communities: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub interval: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            rows: 50,
            cols: 50,
            periods: 64,
            rank: 5,
            communities: 5,
            p_in: 0.7,
            p_out: 0.02,
            interval: 4,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    fn graph_spec(&self, vertices: usize, seed: u64) -> CommunityGraphSpec {
        CommunityGraphSpec {
            vertices,
            communities: self.communities,
            p_in: self.p_in,
            p_out: self.p_out,
            periods: self.periods,
            interval: self.interval,
            seed,
        }
    }
}

/// Graphs for both modes, the plain low-rank tensor and the filtered truth,
/// rescaled so its entries have unit root mean square.
#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub g_w: DynamicGraph,
    pub g_h: DynamicGraph,
    pub z: RealTensor,
    pub x: RealTensor,
}

/// Seeds for the independent parts of an instance, derived from one base seed.
pub fn derived_seed(base: u64, part: u64) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(part)
}

pub fn synthetic_instance(spec: &SyntheticSpec) -> Result<SyntheticInstance> {
    let g_w = community_dynamic_graph(&spec.graph_spec(spec.rows, derived_seed(spec.seed, 1)))?;
    let g_h = community_dynamic_graph(&spec.graph_spec(spec.cols, derived_seed(spec.seed, 2)))?;
    let m = Transform::dft(spec.periods);
    let z = lowrank_tensor(spec.rows, spec.cols, spec.periods, spec.rank, &m, derived_seed(spec.seed, 3))?;
    let x = embed_graph_similarity(&z, Some(&g_w), Some(&g_h))?;
    let rms = x.frobenius_norm() / (x.len() as f64).sqrt();
    let x = if rms > 0.0 { x.scale(1.0 / rms) } else { x };
    Ok(SyntheticInstance { g_w, g_h, z, x })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::tubal_rank;

    #[test]
    fn static_when_interval_spans_everything() {
        let g = community_dynamic_graph(&CommunityGraphSpec::new(12, 3, 6, 6, 1)).unwrap();
        for t in 1..6 {
            assert_eq!(g.adjacency().slice(t), g.adjacency().slice(0));
        }
        let dynamic = community_dynamic_graph(&CommunityGraphSpec::new(12, 3, 6, 2, 1)).unwrap();
        assert_eq!(dynamic.adjacency().slice(0), dynamic.adjacency().slice(1));
        assert_ne!(dynamic.adjacency().slice(1), dynamic.adjacency().slice(2));
    }

    #[test]
    fn certain_probabilities_give_cliques() {
        let spec = CommunityGraphSpec { p_in: 1.0, p_out: 0.0, ..CommunityGraphSpec::new(9, 3, 2, 1, 4) };
        let g = community_dynamic_graph(&spec).unwrap();
        for t in 0..2 {
            for j in 0..9 {
                for i in 0..9 {
                    let same = i / 3 == j / 3;
                    assert_eq!(g.has_edge(i, j, t), same && i != j);
                }
            }
        }
        assert!(community_dynamic_graph(&CommunityGraphSpec { p_out: 1.0, ..spec.clone() }).is_err());
        assert!(community_dynamic_graph(&CommunityGraphSpec { communities: 2, ..spec }).is_err());
    }

    #[test]
    fn lowrank_has_requested_tubal_rank() {
        let m = Transform::dft(6);
        let z = lowrank_tensor(10, 9, 6, 3, &m, 5).unwrap();
        assert_eq!(tubal_rank(&z, &m, 1e-8).unwrap(), 3);
        assert_eq!(z, lowrank_tensor(10, 9, 6, 3, &m, 5).unwrap());
        let full = lowrank_tensor(4, 5, 6, 4, &m, 5).unwrap();
        assert_eq!(tubal_rank(&full, &m, 1e-8).unwrap(), 4);
    }

    #[test]
    fn no_graphs_leave_z_unchanged() {
        let z = lowrank_tensor(5, 4, 3, 2, &Transform::dft(3), 1).unwrap();
        assert_eq!(embed_graph_similarity(&z, None, None).unwrap(), z);
        let edgeless = DynamicGraph::edgeless(5, 3);
        assert_eq!(embed_graph_similarity(&z, Some(&edgeless), None).unwrap(), z);
    }

    #[test]
    fn perturbation_preserves_edge_counts() {
        let g = community_dynamic_graph(&CommunityGraphSpec::new(20, 4, 3, 1, 2)).unwrap();
        assert_eq!(perturb_graph(&g, 0.0, 1).unwrap(), g);
        let p = perturb_graph(&g, 0.5, 1).unwrap();
        for t in 0..3 {
            assert_eq!(p.edge_count(t), g.edge_count(t));
            let kept = g.edges(t).iter().filter(|&&(i, j)| p.has_edge(i, j, t)).count();
            let moved = (0.5 * g.edge_count(t) as f64).round() as usize;
            assert_eq!(kept, g.edge_count(t) - moved);
        }
        assert!(DynamicGraph::from_adjacency(p.adjacency().clone()).is_ok());
    }

    #[test]
    fn sampling_sizes_and_noise() {
        let x = RealTensor::from_fn(10, 10, 10, |i, j, k| (i + j + k) as f64);
        let s = sample_observations(&x, &ObservationModel::ratio(0.05, 0.0, 3)).unwrap();
        assert_eq!(s.observed.len(), 50);
        assert_eq!(s.test.len(), 950);
        for (i, j, t, v) in s.observed.entries() {
            assert_eq!(v, x[(i, j, t)]);
        }
        let all = sample_observations(&x, &ObservationModel::ratio(1.0, 0.0, 3)).unwrap();
        assert_eq!(all.observed.values(), &x);
        assert!(sample_observations(&x, &ObservationModel::ratio(0.0005, 0.0, 3)).is_err());
        let rep = ObservationModel { with_replacement: true, size: SampleSize::Count(3000), ..ObservationModel::ratio(1.0, 0.0, 3) };
        let s = sample_observations(&x, &rep).unwrap();
        assert_eq!(s.draws, 3000);
        assert!(s.observed.len() < 1000);
    }

    #[test]
    fn eigenvectors_are_sign_normalized() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let (vals, vecs) = sorted_eigen(&a);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        for c in 0..3 {
            let col = vecs.column(c);
            let pivot = col.iter().cloned().fold(0.0f64, |a, b| if b.abs() > a.abs() + 1e-12 { b } else { a });
            assert!(pivot > 0.0);
        }
        let recon = &vecs * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vals)) * vecs.transpose();
        assert!((recon - a).norm() < 1e-12);
    }
}
