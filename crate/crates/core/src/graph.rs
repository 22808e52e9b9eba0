//! Dynamic graphs over a fixed vertex set, their window aggregation into a
//! hierarchical multigraph, Laplacian tensors and the smoothness penalty.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::tensor::RealTensor;
use crate::transform::Transform;

/// Binary, symmetric, loop-free adjacency tensor `m × m × T`.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicGraph {
    adjacency: RealTensor,
}

impl DynamicGraph {
    /// Graph without edges.
    pub fn edgeless(m: usize, periods: usize) -> Self {
        Self {
            adjacency: RealTensor::zeros(m, m, periods),
        }
    }

    /// Builds a graph from 1-based `(i, j, t)` events. Duplicates collapse.
    pub fn from_edge_events(events: &[(usize, usize, usize)], m: usize, periods: usize) -> Result<Self> {
        let mut g = Self::edgeless(m, periods);
        for &(i, j, t) in events {
            if i == 0 || j == 0 || i > m || j > m {
                return Err(Error::InvalidGraph(format!(
                    "edge ({i}, {j}) outside vertex range 1..={m}"
                )));
            }
            if t == 0 || t > periods {
                return Err(Error::InvalidGraph(format!(
                    "period {t} outside 1..={periods}"
                )));
            }
            if i == j {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {i}")));
            }
            g.set_edge(i - 1, j - 1, t - 1, true);
        }
        Ok(g)
    }

    /// Applies the same 1-based `(i, j)` edge list to every period.
    pub fn from_static_edges(edges: &[(usize, usize)], m: usize, periods: usize) -> Result<Self> {
        let events: Vec<_> = (1..=periods)
            .flat_map(|t| edges.iter().map(move |&(i, j)| (i, j, t)))
            .collect();
        Self::from_edge_events(&events, m, periods)
    }

    /// Validates an existing adjacency tensor.
    pub fn from_adjacency(adjacency: RealTensor) -> Result<Self> {
        let (m, m2, periods) = adjacency.dims();
        if m != m2 {
            return Err(Error::InvalidGraph(format!(
                "adjacency slices must be square, got {m}×{m2}"
            )));
        }
        for t in 0..periods {
            for j in 0..m {
                for i in 0..m {
                    let v = adjacency[(i, j, t)];
                    if v != 0.0 && v != 1.0 {
                        return Err(Error::InvalidGraph(format!(
                            "entry ({i}, {j}, {t}) = {v} is not binary"
                        )));
                    }
                    if v != adjacency[(j, i, t)] {
                        return Err(Error::InvalidGraph(format!("slice {t} is not symmetric")));
                    }
                    if i == j && v != 0.0 {
                        return Err(Error::InvalidGraph(format!("self-loop at vertex {i}")));
                    }
                }
            }
        }
        Ok(Self { adjacency })
    }

    /// Same slice repeated for every period.
    pub fn from_static_slice(slice: &DMatrix<f64>, periods: usize) -> Result<Self> {
        let slices = vec![slice.clone(); periods];
        Self::from_adjacency(RealTensor::from_slices(&slices)?)
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.dims().0
    }

    pub fn period_count(&self) -> usize {
        self.adjacency.dims().2
    }

    pub fn adjacency(&self) -> &RealTensor {
        &self.adjacency
    }

    /// 0-based edge lookup.
    pub fn has_edge(&self, i: usize, j: usize, t: usize) -> bool {
        self.adjacency[(i, j, t)] != 0.0
    }

    /// 0-based edge toggle; keeps the slice symmetric. Loops are ignored.
    pub fn set_edge(&mut self, i: usize, j: usize, t: usize, present: bool) {
        if i == j {
            return;
        }
        let v = if present { 1.0 } else { 0.0 };
        self.adjacency[(i, j, t)] = v;
        self.adjacency[(j, i, t)] = v;
    }

    /// Undirected edges `(i, j)` with `i < j` in period `t` (0-based).
    pub fn edges(&self, t: usize) -> Vec<(usize, usize)> {
        let m = self.vertex_count();
        let mut out = Vec::new();
        for j in 0..m {
            for i in 0..j {
                if self.has_edge(i, j, t) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn edge_count(&self, t: usize) -> usize {
        self.edges(t).len()
    }

    /// Static graph equal to the first period, repeated over all periods.
    pub fn first_period_static(&self) -> Self {
        let first = self.adjacency.slice(0);
        Self::from_static_slice(&first, self.period_count()).expect("slice is already valid")
    }

    /// Every period as 1-based `(i, j, t)` events with `i < j`.
    pub fn to_edge_events(&self) -> Vec<(usize, usize, usize)> {
        (0..self.period_count())
            .flat_map(|t| {
                self.edges(t)
                    .into_iter()
                    .map(move |(i, j)| (i + 1, j + 1, t + 1))
            })
            .collect()
    }
}

/// Window sums of a dynamic graph: layer `k` counts how many periods of
/// window `k` contain each edge.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalMultigraph {
    window: usize,
    agg_adjacency: RealTensor,
}

impl HierarchicalMultigraph {
    pub fn window(&self) -> usize {
        self.window
    }

    pub fn layer_count(&self) -> usize {
        self.agg_adjacency.dims().2
    }

    pub fn vertex_count(&self) -> usize {
        self.agg_adjacency.dims().0
    }

    pub fn period_count(&self) -> usize {
        self.window * self.layer_count()
    }

    pub fn agg_adjacency(&self) -> &RealTensor {
        &self.agg_adjacency
    }

    /// The elongated adjacency tensor: layer `k` copied into each of its `window` periods.
    pub fn elongated(&self) -> RealTensor {
        let slices: Vec<_> = (0..self.period_count())
            .map(|t| self.agg_adjacency.slice(t / self.window))
            .collect();
        RealTensor::from_slices(&slices).expect("layers share a shape")
    }
}

fn check_window(periods: usize, ss: usize) -> Result<()> {
    if ss == 0 || !periods.is_multiple_of(ss) {
        return Err(Error::InvalidGraph(format!(
            "similarity scale {ss} does not divide the period count {periods}"
        )));
    }
    Ok(())
}

/// Sums the adjacency over consecutive windows of `ss` periods.
pub fn aggregate(g: &DynamicGraph, ss: usize) -> Result<HierarchicalMultigraph> {
    let (m, _, periods) = g.adjacency.dims();
    check_window(periods, ss)?;
    let layers = periods / ss;
    let mut agg = RealTensor::zeros(m, m, layers);
    for t in 0..periods {
        let k = t / ss;
        let src = g.adjacency.slice_data(t);
        for (dst, &v) in agg.slice_data_mut(k).iter_mut().zip(src) {
            *dst += v;
        }
    }
    Ok(HierarchicalMultigraph {
        window: ss,
        agg_adjacency: agg,
    })
}

/// Graph weights `λ_G` and `λ_1` of the combined penalty `λ_G·LAP + λ_1·I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphPenalty {
    pub lambda_g: f64,
    pub lambda_1: f64,
}

impl GraphPenalty {
    pub fn new(lambda_g: f64, lambda_1: f64) -> Self {
        Self { lambda_g, lambda_1 }
    }
}

/// Laplacian tensor of a windowed dynamic graph. Only the `K` distinct
/// layers are stored; period `t` uses layer `t / window`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianTensor {
    layers: Vec<DMatrix<f64>>,
    window: usize,
}

/// Builds the Laplacian tensor `D - A` of the elongated aggregate.
pub fn laplacian_tensor(g: &DynamicGraph, ss: usize) -> Result<LaplacianTensor> {
    Ok(LaplacianTensor::from_multigraph(&aggregate(g, ss)?))
}

impl LaplacianTensor {
    pub fn from_multigraph(h: &HierarchicalMultigraph) -> Self {
        let layers = (0..h.layer_count())
            .map(|k| {
                let a = h.agg_adjacency.slice(k);
                let degrees = a.column_sum();
                DMatrix::from_diagonal(&degrees) - a
            })
            .collect();
        Self {
            layers,
            window: h.window,
        }
    }

    /// The zero Laplacian used when no graph is supplied.
    pub fn zero(m: usize, periods: usize) -> Self {
        Self {
            layers: vec![DMatrix::zeros(m, m)],
            window: periods,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.layers[0].nrows()
    }

    pub fn period_count(&self) -> usize {
        self.window * self.layers.len()
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn layers(&self) -> &[DMatrix<f64>] {
        &self.layers
    }

    /// Layer index used by period `t`.
    pub fn layer_of(&self, t: usize) -> usize {
        t / self.window
    }

    pub fn slice(&self, t: usize) -> &DMatrix<f64> {
        &self.layers[self.layer_of(t)]
    }

    pub fn is_zero(&self) -> bool {
        self.layers.iter().all(|l| l.iter().all(|&v| v == 0.0))
    }

    /// The full `m × m × T` tensor.
    pub fn to_tensor(&self) -> RealTensor {
        let slices: Vec<_> = (0..self.period_count()).map(|t| self.slice(t).clone()).collect();
        RealTensor::from_slices(&slices).expect("layers share a shape")
    }

    /// Sum of the traces of all `T` slices.
    pub fn total_trace(&self) -> f64 {
        self.layers.iter().map(|l| l.trace()).sum::<f64>() * self.window as f64
    }

    /// Transform-domain slice of the combined tensor: `λ_G·LAP^(t) + λ_1·I`.
    pub fn combined_slice(&self, t: usize, penalty: GraphPenalty) -> DMatrix<f64> {
        let l = self.slice(t);
        let n = l.nrows();
        l * penalty.lambda_g + DMatrix::identity(n, n) * penalty.lambda_1
    }

    /// Original-domain combined tensor `λ_G·(LAP ×₃ M⁻¹) + λ_1·I`.
    pub fn combined_tensor(&self, penalty: GraphPenalty, m: &Transform) -> Result<crate::ComplexTensor> {
        let slices: Vec<_> = (0..self.period_count())
            .map(|t| self.combined_slice(t, penalty))
            .collect();
        m.inverse(&RealTensor::from_slices(&slices)?)
    }

    /// `Σ_t tr(W^(t)ᵀ LAP^(t) W^(t))`, evaluated slice by slice in the
    /// original domain.
    pub fn smoothness(&self, w: &RealTensor) -> Result<f64> {
        self.check_factor(w)?;
        let mut total = 0.0;
        for t in 0..w.dims().2 {
            let l = self.slice(t);
            let wt = w.slice_view(t);
            total += (l * wt).component_mul(&wt).sum();
        }
        Ok(total)
    }

    fn check_factor(&self, w: &RealTensor) -> Result<()> {
        let (n1, _, n3) = w.dims();
        if n1 != self.vertex_count() || n3 != self.period_count() {
            return Err(Error::dims(format!(
                "factor {:?} does not fit a Laplacian on {} vertices over {} periods",
                w.dims(),
                self.vertex_count(),
                self.period_count()
            )));
        }
        Ok(())
    }
}

/// `⟨LAP̃, W *_M Wᵀ⟩` evaluated in the transform domain as
/// `(1/C) Σ_t ⟨LAP^(t), Ŵ^(t) Ŵ^(t)ᴴ⟩`.
///
/// The transform's diagonal blocks must fit inside the Laplacian's windows.
pub fn smoothness_analytic(l: &LaplacianTensor, w: &RealTensor, m: &Transform) -> Result<f64> {
    l.check_factor(w)?;
    if m.size() != l.period_count() || !m.is_aligned_with(l.window()) {
        return Err(Error::InvalidTransform(format!(
            "transform {} with block size {} is not aligned with window {}",
            m.kind(),
            m.block_size(),
            l.window()
        )));
    }
    let hat = m.forward(w)?;
    let mut total = 0.0;
    for t in 0..l.period_count() {
        let wt = hat.slice(t);
        let lw = l.slice(t).map(|v| num_complex::Complex64::new(v, 0.0)) * &wt;
        total += wt.zip_fold(&lw, 0.0, |acc, a, b| acc + (a.conj() * b).re);
    }
    Ok(total / m.scale_c())
}

/// `(1/2) Σ_{i,j,k} Ă_ijk ‖W_{i:[k]} − W_{j:[k]}‖²` by direct summation.
pub fn smoothness_combinatorial(g_agg: &HierarchicalMultigraph, w: &RealTensor) -> Result<f64> {
    let (n1, _, n3) = w.dims();
    if n1 != g_agg.vertex_count() || n3 != g_agg.period_count() {
        return Err(Error::dims(format!(
            "factor {:?} does not fit the multigraph ({} vertices, {} periods)",
            w.dims(),
            g_agg.vertex_count(),
            g_agg.period_count()
        )));
    }
    let ss = g_agg.window();
    let mut total = 0.0;
    for k in 0..g_agg.layer_count() {
        let window = k * ss..(k + 1) * ss;
        let segments: Vec<Vec<f64>> = (0..n1)
            .map(|i| w.horizontal_segment(i, window.clone()))
            .collect();
        for j in 0..n1 {
            for i in 0..n1 {
                let weight = g_agg.agg_adjacency[(i, j, k)];
                if weight == 0.0 {
                    continue;
                }
                let dist: f64 = segments[i]
                    .iter()
                    .zip(&segments[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                total += weight * dist;
            }
        }
    }
    Ok(0.5 * total)
}

/// Distance used to rank neighbours in [`knn_similarity_graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Metric {
    #[default]
    Euclidean,
    Cosine,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "cosine" => Ok(Metric::Cosine),
            other => Err(Error::config(format!("unknown metric '{other}'"))),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::Euclidean => "euclidean",
            Metric::Cosine => "cosine",
        })
    }
}

fn distance(a: &[f64], b: &[f64], metric: Metric) -> f64 {
    match metric {
        Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
        Metric::Cosine => {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            if na == 0.0 || nb == 0.0 {
                1.0
            } else {
                1.0 - dot / (na * nb)
            }
        }
    }
}

/// k-nearest-neighbour graph per period. `features[t]` holds one row per
/// vertex. Each vertex links to its `k` closest vertices (ties go to the
/// lower index) and the result is symmetrized by union. A period whose
/// feature rows are all identical becomes a complete graph.
pub fn knn_similarity_graph(features: &[DMatrix<f64>], k: usize, metric: Metric) -> Result<DynamicGraph> {
    let periods = features.len();
    if periods == 0 {
        return Err(Error::InvalidGraph("no feature periods supplied".into()));
    }
    let m = features[0].nrows();
    if features.iter().any(|f| f.nrows() != m) {
        return Err(Error::InvalidGraph(
            "feature matrices disagree on the vertex count".into(),
        ));
    }
    if k == 0 || k >= m {
        return Err(Error::InvalidGraph(format!(
            "neighbour count {k} must lie in 1..{m}"
        )));
    }
    let mut g = DynamicGraph::edgeless(m, periods);
    for (t, f) in features.iter().enumerate() {
        let rows: Vec<Vec<f64>> = (0..m).map(|i| f.row(i).iter().copied().collect()).collect();
        if rows.iter().all(|r| r == &rows[0]) {
            log::warn!("period {t}: all feature rows are identical, using the complete graph");
            for j in 0..m {
                for i in 0..j {
                    g.set_edge(i, j, t, true);
                }
            }
            continue;
        }
        for i in 0..m {
            let mut order: Vec<(f64, usize)> = (0..m)
                .filter(|&j| j != i)
                .map(|j| (distance(&rows[i], &rows[j], metric), j))
                .collect();
            order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for &(_, j) in order.iter().take(k) {
                g.set_edge(i, j, t, true);
            }
        }
    }
    Ok(g)
}

/// Static features: the same k-NN graph in each of `periods` periods.
pub fn knn_static_graph(features: &DMatrix<f64>, k: usize, metric: Metric, periods: usize) -> Result<DynamicGraph> {
    let once = knn_similarity_graph(std::slice::from_ref(features), k, metric)?;
    DynamicGraph::from_static_slice(&once.adjacency.slice(0), periods)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_graph(rng: &mut ChaCha8Rng, m: usize, periods: usize, p: f64) -> DynamicGraph {
        let mut g = DynamicGraph::edgeless(m, periods);
        for t in 0..periods {
            for j in 0..m {
                for i in 0..j {
                    if rng.random::<f64>() < p {
                        g.set_edge(i, j, t, true);
                    }
                }
            }
        }
        g
    }

    fn random_tensor(rng: &mut ChaCha8Rng, n1: usize, n2: usize, n3: usize) -> RealTensor {
        RealTensor::from_fn(n1, n2, n3, |_, _, _| rng.random::<f64>() * 2.0 - 1.0)
    }

    #[test]
    fn events_build_symmetric_slices() {
        let g = DynamicGraph::from_edge_events(&[(1, 2, 1)], 3, 2).unwrap();
        let nz = g.adjacency().as_slice().iter().filter(|&&v| v != 0.0).count();
        assert_eq!(nz, 2);
        assert!(g.has_edge(0, 1, 0) && g.has_edge(1, 0, 0));
        let twice = DynamicGraph::from_edge_events(&[(1, 2, 1), (2, 1, 1)], 3, 2).unwrap();
        assert_eq!(g, twice);
        assert!(DynamicGraph::from_edge_events(&[(1, 1, 1)], 3, 2).is_err());
        assert!(DynamicGraph::from_edge_events(&[(1, 4, 1)], 3, 2).is_err());
        assert!(DynamicGraph::from_edge_events(&[(1, 2, 3)], 3, 2).is_err());
    }

    #[test]
    fn window_sums() {
        let g = DynamicGraph::from_edge_events(&[(1, 2, 1), (1, 2, 2), (1, 2, 3)], 2, 4).unwrap();
        let h = aggregate(&g, 2).unwrap();
        assert_eq!(h.agg_adjacency()[(0, 1, 0)], 2.0);
        assert_eq!(h.agg_adjacency()[(0, 1, 1)], 1.0);
        assert_eq!(aggregate(&g, 1).unwrap().agg_adjacency(), g.adjacency());
        assert_eq!(aggregate(&g, 4).unwrap().agg_adjacency()[(1, 0, 0)], 3.0);
        assert!(aggregate(&g, 3).is_err());
        let e = h.elongated();
        assert_eq!(e.dims(), (2, 2, 4));
        assert_eq!(e[(0, 1, 1)], 2.0);
        assert_eq!(e[(0, 1, 3)], 1.0);
    }

    #[test]
    fn complete_static_laplacian() {
        let periods = 5;
        let g = DynamicGraph::from_static_edges(&[(1, 2), (1, 3), (2, 3)], 3, periods).unwrap();
        let l = laplacian_tensor(&g, periods).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, -1.0, -1.0, 2.0, -1.0, -1.0, -1.0, 2.0])
            * periods as f64;
        for t in 0..periods {
            assert_eq!(l.slice(t), &expected);
        }
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = random_graph(&mut rng, 9, 8, 0.4);
        for ss in [1, 2, 4, 8] {
            let l = laplacian_tensor(&g, ss).unwrap();
            for layer in l.layers() {
                assert!(layer.column_sum().amax() < 1e-12);
                assert_eq!(layer, &layer.transpose());
                let min_eig = layer.clone().symmetric_eigen().eigenvalues.min();
                assert!(min_eig > -1e-10);
            }
        }
        assert!(laplacian_tensor(&DynamicGraph::edgeless(4, 2), 1).unwrap().is_zero());
    }

    #[test]
    fn analytic_matches_combinatorial_under_aligned_transforms() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let periods = 8;
        for trial in 0..20 {
            let g = random_graph(&mut rng, 7, periods, 0.3);
            let w = random_tensor(&mut rng, 7, 3, periods);
            for ss in [1, 2, 4, 8] {
                let h = aggregate(&g, ss).unwrap();
                let l = LaplacianTensor::from_multigraph(&h);
                let comb = smoothness_combinatorial(&h, &w).unwrap();
                let transforms = [
                    Transform::block_dft(periods, ss).unwrap(),
                    Transform::identity(periods),
                    Transform::block_orthogonal(periods, &crate::transform::dct_matrix(ss)).unwrap(),
                ];
                for m in &transforms {
                    let an = smoothness_analytic(&l, &w, m).unwrap();
                    assert!((an - comb).abs() <= 1e-8 * (1.0 + comb.abs()), "trial {trial} ss {ss} {}", m.kind());
                }
                let direct = l.smoothness(&w).unwrap();
                assert!((direct - comb).abs() <= 1e-9 * (1.0 + comb));
            }
        }
    }

    #[test]
    fn misaligned_transform_is_rejected() {
        let g = DynamicGraph::edgeless(3, 4);
        let l = laplacian_tensor(&g, 2).unwrap();
        let w = RealTensor::zeros(3, 1, 4);
        assert!(smoothness_analytic(&l, &w, &Transform::dft(4)).is_err());
    }

    #[test]
    fn matrix_case_is_trace_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = random_graph(&mut rng, 6, 1, 0.5);
        let w = random_tensor(&mut rng, 6, 2, 1);
        let h = aggregate(&g, 1).unwrap();
        let l = LaplacianTensor::from_multigraph(&h);
        let wm = w.slice(0);
        let trace = (wm.transpose() * l.slice(0) * &wm).trace();
        let comb = smoothness_combinatorial(&h, &w).unwrap();
        assert!((trace - comb).abs() <= 1e-10 * (1.0 + trace));
    }

    #[test]
    fn path_graph_hand_value() {
        // 1 - 2 - 3 over two periods with the second edge only in period 2.
        let g = DynamicGraph::from_edge_events(&[(1, 2, 1), (1, 2, 2), (2, 3, 2)], 3, 2).unwrap();
        let w = RealTensor::from_fn(3, 1, 2, |i, _, t| (i * 2 + t) as f64);
        // ss = 2: layer weights (1,2) = 2, (2,3) = 1.
        // segments: v1 = (0,1), v2 = (2,3), v3 = (4,5)
        // 2·|v1-v2|² + 1·|v2-v3|² = 2·8 + 8 = 24
        let h = aggregate(&g, 2).unwrap();
        assert!((smoothness_combinatorial(&h, &w).unwrap() - 24.0).abs() < 1e-12);
        let same = RealTensor::from_fn(2, 2, 1, |_, j, _| j as f64 + 1.0);
        let h2 = aggregate(&DynamicGraph::from_edge_events(&[(1, 2, 1)], 2, 1).unwrap(), 1).unwrap();
        assert_eq!(smoothness_combinatorial(&h2, &same).unwrap(), 0.0);
    }

    #[test]
    fn identity_penalty_gives_frobenius_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = random_graph(&mut rng, 5, 4, 0.5);
        let l = laplacian_tensor(&g, 2).unwrap();
        let w = random_tensor(&mut rng, 5, 2, 4);
        let m = Transform::dft(4);
        let combined = l.combined_tensor(GraphPenalty::new(0.0, 1.0), &m).unwrap();
        let wwt = crate::algebra::t_product(&w, &crate::algebra::conj_transpose(&w, &m).unwrap(), &m).unwrap();
        let value = combined.inner(&wwt.to_complex()).unwrap();
        assert!((value - w.frobenius_norm_sq()).abs() < 1e-9 * (1.0 + value));
    }

    #[test]
    fn adding_edges_never_decreases_penalty() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut g = random_graph(&mut rng, 6, 4, 0.2);
        let w = random_tensor(&mut rng, 6, 2, 4);
        let mut prev = smoothness_combinatorial(&aggregate(&g, 2).unwrap(), &w).unwrap();
        for _ in 0..15 {
            let (i, j, t) = (rng.random_range(0..6), rng.random_range(0..6), rng.random_range(0..4));
            g.set_edge(i, j, t, true);
            let next = smoothness_combinatorial(&aggregate(&g, 2).unwrap(), &w).unwrap();
            assert!(next >= prev - 1e-12);
            prev = next;
        }
    }

    #[test]
    fn knn_conventions() {
        let f = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 10.0]);
        let g = knn_similarity_graph(std::slice::from_ref(&f), 1, Metric::Euclidean).unwrap();
        assert_eq!(g.edges(0), vec![(0, 1), (1, 2)]);
        let full = knn_similarity_graph(std::slice::from_ref(&f), 2, Metric::Euclidean).unwrap();
        assert_eq!(full.edge_count(0), 3);
        let flat = DMatrix::from_element(4, 2, 1.0);
        let varied = DMatrix::from_column_slice(4, 1, &[0.0, 1.0, 5.0, 6.0]);
        let dynamic = knn_similarity_graph(&[flat, varied], 1, Metric::Euclidean).unwrap();
        assert_eq!(dynamic.edge_count(0), 6);
        assert_eq!(dynamic.edges(1), vec![(0, 1), (2, 3)]);
        assert!(knn_similarity_graph(&[f], 3, Metric::Euclidean).is_err());
        let s = knn_static_graph(&DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 1.0, 0.0, 1.0, 0.1]), 1, Metric::Cosine, 3).unwrap();
        assert_eq!(s.period_count(), 3);
        assert!(s.has_edge(0, 2, 2));
    }
}
