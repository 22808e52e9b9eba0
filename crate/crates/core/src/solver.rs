//! ADMM solver for graph-regularized low-tubal-rank completion.
//!
//! The model factors the target as `W *_M Hᵀ`, splits the factors into
//! `W = A`, `H = B` and introduces `E` with `P_Ω(E) = P_Ω(X)`. Each sweep
//! updates `W`, `H`, then `A` and `B`, then `E`, then the multipliers.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::algebra::{map_slices, SliceStrategy};
use crate::error::{Error, Result};
use crate::graph::{laplacian_tensor, DynamicGraph, GraphPenalty, LaplacianTensor};
use crate::linalg::{CgOptions, SolveMethod, SpdSolver};
use crate::tensor::{ComplexTensor, RealTensor};
use crate::transform::Transform;

/// Largest admissible multiplier step factor, the golden ratio.
pub const MAX_GAMMA: f64 = 1.618_033_988_749_895;

/// Sparse observations `(i, j, t, value)` with 0-based indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedTensor {
    dims: (usize, usize, usize),
    offsets: Vec<usize>,
    mask: Vec<bool>,
    values: RealTensor,
}

impl ObservedTensor {
    pub fn new(dims: (usize, usize, usize), entries: &[(usize, usize, usize, f64)]) -> Result<Self> {
        let (n1, n2, n3) = dims;
        let mut values = RealTensor::zeros(n1, n2, n3);
        let mut mask = vec![false; n1 * n2 * n3];
        let mut offsets = Vec::with_capacity(entries.len());
        for &(i, j, t, v) in entries {
            if i >= n1 || j >= n2 || t >= n3 {
                return Err(Error::Data(format!(
                    "observation ({i}, {j}, {t}) outside {n1}×{n2}×{n3}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::Data(format!("observation ({i}, {j}, {t}) is not finite")));
            }
            let o = values.offset(i, j, t);
            if mask[o] {
                return Err(Error::Data(format!("duplicate observation at ({i}, {j}, {t})")));
            }
            mask[o] = true;
            values.as_mut_slice()[o] = v;
            offsets.push(o);
        }
        offsets.sort_unstable();
        Ok(Self {
            dims,
            offsets,
            mask,
            values,
        })
    }

    /// Observes `x` at the given linear offsets.
    pub fn from_offsets(x: &RealTensor, offsets: &[usize]) -> Result<Self> {
        let (n1, n2, _) = x.dims();
        let entries: Vec<_> = offsets
            .iter()
            .map(|&o| {
                let i = o % n1;
                let j = (o / n1) % n2;
                let t = o / (n1 * n2);
                (i, j, t, x.as_slice()[o])
            })
            .collect();
        Self::new(x.dims(), &entries)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Sorted linear offsets of the observed entries.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn contains(&self, offset: usize) -> bool {
        self.mask[offset]
    }

    /// Observed entries as 0-based `(i, j, t, value)`.
    pub fn entries(&self) -> Vec<(usize, usize, usize, f64)> {
        let (n1, n2, _) = self.dims;
        self.offsets
            .iter()
            .map(|&o| (o % n1, (o / n1) % n2, o / (n1 * n2), self.values.as_slice()[o]))
            .collect()
    }

    /// `P_Ω(X)`: observed values with zeros elsewhere.
    pub fn values(&self) -> &RealTensor {
        &self.values
    }

    /// `P_Ω(y)`.
    pub fn project(&self, y: &RealTensor) -> RealTensor {
        let mut out = RealTensor::zeros(self.dims.0, self.dims.1, self.dims.2);
        for &o in &self.offsets {
            out.as_mut_slice()[o] = y.as_slice()[o];
        }
        out
    }

    /// `‖P_Ω(y)‖_F`.
    pub fn projected_norm(&self, y: &RealTensor) -> f64 {
        self.offsets
            .iter()
            .map(|&o| y.as_slice()[o].powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Offsets not in the mask, ascending.
    pub fn complement(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&o| !self.mask[o]).collect()
    }

    /// Keeps only the given offsets, which must be observed.
    pub fn restrict(&self, keep: &[usize]) -> Result<Self> {
        let set: HashSet<usize> = keep.iter().copied().collect();
        if let Some(&o) = set.iter().find(|&&o| o >= self.mask.len() || !self.mask[o]) {
            return Err(Error::Data(format!("offset {o} is not observed")));
        }
        let mut sorted: Vec<usize> = set.into_iter().collect();
        sorted.sort_unstable();
        Self::from_offsets(&self.values, &sorted)
    }
}

/// Transform used by the solver along the third mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TransformChoice {
    #[default]
    Dft,
    /// DFT blocks of width `ss`.
    BlockDft,
    Dct,
    Identity,
}

impl TransformChoice {
    pub fn build(self, n3: usize, ss: usize) -> Result<Transform> {
        match self {
            TransformChoice::Dft => Ok(Transform::dft(n3)),
            TransformChoice::BlockDft => Transform::block_dft(n3, ss),
            TransformChoice::Dct => Ok(Transform::dct(n3)),
            TransformChoice::Identity => Ok(Transform::identity(n3)),
        }
    }
}

impl fmt::Display for TransformChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransformChoice::Dft => "dft",
            TransformChoice::BlockDft => "block_dft",
            TransformChoice::Dct => "dct",
            TransformChoice::Identity => "identity",
        })
    }
}

impl FromStr for TransformChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dft" => Ok(Self::Dft),
            "block_dft" => Ok(Self::BlockDft),
            "dct" => Ok(Self::Dct),
            "identity" => Ok(Self::Identity),
            other => Err(Error::config(format!("unknown transform '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub rank: usize,
    pub lambda_g: f64,
    pub lambda_1: f64,
    pub beta: f64,
    /// Replace `beta` by the conservative sufficient bound for convergence.
    pub beta_theory: bool,
    pub gamma: f64,
    pub ss: usize,
    pub transform: TransformChoice,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub inner_solver: SolveMethod,
    pub max_iter: usize,
    pub stop_tol: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rank: 5,
            lambda_g: 0.001,
            lambda_1: 0.001,
            beta: 1.0,
            beta_theory: false,
            gamma: 1.0,
            ss: 1,
            transform: TransformChoice::Dft,
            cg_tol: 1e-10,
            cg_max_iter: 1000,
            inner_solver: SolveMethod::Auto,
            max_iter: 500,
            stop_tol: 1e-6,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn penalty(&self) -> GraphPenalty {
        GraphPenalty::new(self.lambda_g, self.lambda_1)
    }

    pub fn validate(&self, dims: (usize, usize, usize)) -> Result<()> {
        let fail = |msg: String| Err(Error::config(msg));
        if self.rank == 0 {
            return fail("rank must be at least 1".into());
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return fail(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.gamma > 0.0 && self.gamma <= MAX_GAMMA) {
            return fail(format!("gamma must lie in (0, {MAX_GAMMA:.4}], got {}", self.gamma));
        }
        if !(self.lambda_g >= 0.0 && self.lambda_1 >= 0.0) {
            return fail("graph weights must be non-negative".into());
        }
        if !(self.cg_tol > 0.0 && self.stop_tol > 0.0) {
            return fail("tolerances must be positive".into());
        }
        if self.cg_max_iter == 0 || self.max_iter == 0 {
            return fail("iteration limits must be positive".into());
        }
        if self.ss == 0 || !dims.2.is_multiple_of(self.ss) {
            return fail(format!(
                "similarity scale {} does not divide the period count {}",
                self.ss, dims.2
            ));
        }
        Ok(())
    }

    fn cg_options(&self) -> CgOptions {
        CgOptions {
            tol: self.cg_tol,
            max_iter: self.cg_max_iter,
        }
    }
}

/// All ADMM iterates.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub w: RealTensor,
    pub h: RealTensor,
    pub a: RealTensor,
    pub b: RealTensor,
    pub e: RealTensor,
    pub mult_w: RealTensor,
    pub mult_h: RealTensor,
    pub mult_e: RealTensor,
    pub iter: usize,
}

impl SolverState {
    /// Standard normal factors from `seed`, `A = W`, `B = H`, `E = P_Ω(X)`,
    /// zero multipliers.
    pub fn initial(observed: &ObservedTensor, rank: usize, seed: u64) -> Self {
        let (n1, n2, n3) = observed.dims();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut randn = |rows: usize| {
            RealTensor::from_fn(rows, rank, n3, |_, _, _| StandardNormal.sample(&mut rng))
        };
        let w = randn(n1);
        let h = randn(n2);
        Self {
            a: w.clone(),
            b: h.clone(),
            mult_w: RealTensor::zeros(n1, rank, n3),
            mult_h: RealTensor::zeros(n2, rank, n3),
            mult_e: RealTensor::zeros(n1, n2, n3),
            e: observed.values().clone(),
            w,
            h,
            iter: 0,
        }
    }
}

/// Per-iteration convergence record.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub objective: Vec<f64>,
    pub lagrangian: Vec<f64>,
    pub res_w: Vec<f64>,
    pub res_h: Vec<f64>,
    pub res_e: Vec<f64>,
    /// Running minimum of the squared successive-iterate gap.
    pub u: Vec<f64>,
    /// `‖P_Ω(X)‖_F`, the scale of the stopping rule.
    pub scale: f64,
    pub converged: bool,
    pub beta: f64,
}

impl Diagnostics {
    pub fn iterations(&self) -> usize {
        self.objective.len()
    }

    /// Largest primal residual at the last iterate.
    pub fn final_residual(&self) -> f64 {
        match self.iterations() {
            0 => f64::INFINITY,
            n => self.res_w[n - 1].max(self.res_h[n - 1]).max(self.res_e[n - 1]),
        }
    }

    /// `iter,F,res_w,res_h,res_e,u_k` with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,F,res_w,res_h,res_e,u_k\n");
        for k in 0..self.iterations() {
            out.push_str(&format!(
                "{},{:e},{:e},{:e},{:e},{:e}\n",
                k + 1,
                self.objective[k],
                self.res_w[k],
                self.res_h[k],
                self.res_e[k],
                self.u[k]
            ));
        }
        out
    }
}

/// A fully specified completion problem with cached factorizations for the
/// graph-regularized `A` and `B` updates.
pub struct CompletionModel<'a> {
    observed: &'a ObservedTensor,
    l_w: LaplacianTensor,
    l_h: LaplacianTensor,
    config: SolverConfig,
    beta: f64,
    transform: Transform,
    solvers_w: Vec<SpdSolver<f64>>,
    solvers_h: Vec<SpdSolver<f64>>,
}

/// Sufficient step for convergence, `β > r²(n1+n2)n3(Tr L̄^W + Tr L̄^H)` taken with equality.
pub fn theoretical_beta(config: &SolverConfig, dims: (usize, usize, usize), l_w: &LaplacianTensor, l_h: &LaplacianTensor) -> f64 {
    let (n1, n2, n3) = dims;
    let trace = |l: &LaplacianTensor| {
        config.lambda_g * l.total_trace() + config.lambda_1 * (l.vertex_count() * n3) as f64
    };
    (config.rank * config.rank * (n1 + n2) * n3) as f64 * (trace(l_w) + trace(l_h))
}

fn layer_solvers(l: &LaplacianTensor, config: &SolverConfig, beta: f64) -> Result<Vec<SpdSolver<f64>>> {
    let shifted = GraphPenalty::new(config.lambda_g, config.lambda_1 + beta);
    (0..l.layers().len())
        .map(|k| {
            let t = k * l.window();
            SpdSolver::new(l.combined_slice(t, shifted), config.inner_solver, config.cg_options())
        })
        .collect()
}

/// Runs `f` and, on CG non-convergence, once more with a doubled budget.
fn with_retry<T>(max_iter: usize, mut f: impl FnMut(usize) -> Result<T>) -> Result<T> {
    match f(max_iter) {
        Err(Error::CgNotConverged { iterations, residual }) => {
            log::warn!(
                "inner CG stopped after {iterations} iterations (residual {residual:.2e}); retrying with {} iterations",
                2 * max_iter
            );
            f(2 * max_iter)
        }
        other => other,
    }
}

fn hermitian_solve(
    gram: DMatrix<Complex64>,
    rhs_adj: &DMatrix<Complex64>,
    warm: Option<&DMatrix<Complex64>>,
    config: &SolverConfig,
    max_iter: usize,
) -> Result<DMatrix<Complex64>> {
    let opts = CgOptions {
        tol: config.cg_tol,
        max_iter,
    };
    SpdSolver::new(gram, config.inner_solver, opts)?.solve(rhs_adj, warm)
}

impl<'a> CompletionModel<'a> {
    pub fn new(
        observed: &'a ObservedTensor,
        l_w: LaplacianTensor,
        l_h: LaplacianTensor,
        config: SolverConfig,
    ) -> Result<Self> {
        let dims = observed.dims();
        config.validate(dims)?;
        if l_w.vertex_count() != dims.0 || l_h.vertex_count() != dims.1 {
            return Err(Error::dims(format!(
                "graphs on {} and {} vertices do not fit a {}×{} tensor",
                l_w.vertex_count(),
                l_h.vertex_count(),
                dims.0,
                dims.1
            )));
        }
        if l_w.period_count() != dims.2 || l_h.period_count() != dims.2 {
            return Err(Error::dims("graph period count differs from the tensor depth"));
        }
        let transform = config.transform.build(dims.2, config.ss)?;
        let beta = if config.beta_theory {
            theoretical_beta(&config, dims, &l_w, &l_h)
        } else {
            config.beta
        };
        let solvers_w = layer_solvers(&l_w, &config, beta)?;
        let solvers_h = layer_solvers(&l_h, &config, beta)?;
        Ok(Self {
            observed,
            l_w,
            l_h,
            config,
            beta,
            transform,
            solvers_w,
            solvers_h,
        })
    }

    /// Builds the model from optional graphs; a missing graph contributes a zero Laplacian.
    pub fn from_graphs(
        observed: &'a ObservedTensor,
        g_w: Option<&DynamicGraph>,
        g_h: Option<&DynamicGraph>,
        config: SolverConfig,
    ) -> Result<Self> {
        let (n1, n2, n3) = observed.dims();
        config.validate(observed.dims())?;
        let lap = |g: Option<&DynamicGraph>, n: usize| match g {
            Some(g) => {
                if g.vertex_count() != n || g.period_count() != n3 {
                    return Err(Error::dims(format!(
                        "graph with {} vertices over {} periods does not fit dimension {n} over {n3} periods",
                        g.vertex_count(),
                        g.period_count()
                    )));
                }
                laplacian_tensor(g, config.ss)
            }
            None => Ok(LaplacianTensor::zero(n, n3)),
        };
        let l_w = lap(g_w, n1)?;
        let l_h = lap(g_h, n2)?;
        Self::new(observed, l_w, l_h, config)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn initial_state(&self) -> SolverState {
        SolverState::initial(self.observed, self.config.rank, self.config.seed)
    }

    /// `W *_M Hᵀ`.
    pub fn reconstruct(&self, w: &RealTensor, h: &RealTensor) -> Result<RealTensor> {
        let w_hat = self.transform.forward_real(w)?;
        let h_hat = self.transform.forward_real(h)?;
        self.product_from_hats(&w_hat, &h_hat)
    }

    fn product_from_hats(&self, w_hat: &ComplexTensor, h_hat: &ComplexTensor) -> Result<RealTensor> {
        let slices = map_slices(&self.transform, true, SliceStrategy::Mirror, |t, _| {
            Ok(w_hat.slice_view(t) * h_hat.slice_view(t).adjoint())
        })?;
        self.transform.inverse_real(&ComplexTensor::from_slices(&slices)?)
    }

    /// Solves `F̂ (ÔᴴÔ + βI) = β·Âux − λ̂ + Ê' Ô` per transform slice, where
    /// `Ê'` is `Ê` or its slice adjoint.
    fn factor_update(
        &self,
        e_hat: &ComplexTensor,
        other: &RealTensor,
        aux: &RealTensor,
        mult: &RealTensor,
        current: &RealTensor,
        adjoint_e: bool,
    ) -> Result<RealTensor> {
        let m = &self.transform;
        let beta = self.beta;
        let other_hat = m.forward_real(other)?;
        let mut shifted = aux.scale(beta);
        shifted.axpy(-1.0, mult)?;
        let shifted_hat = m.forward_real(&shifted)?;
        let r = other.dims().1;
        let direct = match self.config.inner_solver {
            SolveMethod::Direct => true,
            SolveMethod::ConjugateGradient => false,
            SolveMethod::Auto => r <= crate::linalg::DIRECT_SOLVE_MAX,
        };
        let current_hat = if direct { None } else { Some(m.forward_real(current)?) };
        let slices = with_retry(self.config.cg_max_iter, |max_iter| {
            map_slices(m, true, SliceStrategy::Mirror, |t, self_conj| {
                let o = other_hat.slice(t);
                let gram = o.adjoint() * &o + DMatrix::<Complex64>::identity(r, r) * Complex64::from(beta);
                let e_t = e_hat.slice_view(t);
                let coupling = if adjoint_e { e_t.adjoint() * &o } else { e_t * &o };
                let rhs = shifted_hat.slice(t) + coupling;
                let warm = current_hat.as_ref().map(|c| c.slice(t).adjoint());
                let sol = hermitian_solve(gram, &rhs.adjoint(), warm.as_ref(), &self.config, max_iter)?;
                let mut sol = sol.adjoint();
                if self_conj {
                    sol.iter_mut().for_each(|z| z.im = 0.0);
                }
                Ok(sol)
            })
        })?;
        m.inverse_real(&ComplexTensor::from_slices(&slices)?)
    }

    /// New `W` from the current `H`, `A`, `E` and `λ^W`.
    pub fn update_w(&self, s: &SolverState) -> Result<RealTensor> {
        let e_hat = self.transform.forward_real(&s.e)?;
        self.factor_update(&e_hat, &s.h, &s.a, &s.mult_w, &s.w, false)
    }

    /// New `H` from the current `W`, `B`, `E` and `λ^H`.
    pub fn update_h(&self, s: &SolverState) -> Result<RealTensor> {
        let e_hat = self.transform.forward_real(&s.e)?;
        self.factor_update(&e_hat, &s.w, &s.b, &s.mult_h, &s.h, true)
    }

    fn graph_update(
        &self,
        l: &LaplacianTensor,
        solvers: &[SpdSolver<f64>],
        factor: &RealTensor,
        mult: &RealTensor,
        current: &RealTensor,
    ) -> Result<RealTensor> {
        let (n, r, n3) = factor.dims();
        let beta = self.beta;
        let mut out = RealTensor::zeros(n, r, n3);
        for t in 0..n3 {
            let rhs = factor.slice(t) * beta + mult.slice_view(t);
            let warm = current.slice(t);
            let solver = &solvers[l.layer_of(t)];
            let sol = match solver.solve(&rhs, Some(&warm)) {
                Err(Error::CgNotConverged { iterations, residual }) => {
                    log::warn!(
                        "graph CG stopped after {iterations} iterations (residual {residual:.2e}); retrying"
                    );
                    let shifted = GraphPenalty::new(self.config.lambda_g, self.config.lambda_1 + beta);
                    let opts = CgOptions {
                        tol: self.config.cg_tol,
                        max_iter: 2 * self.config.cg_max_iter,
                    };
                    SpdSolver::new(l.combined_slice(t, shifted), SolveMethod::ConjugateGradient, opts)?
                        .solve(&rhs, Some(&warm))?
                }
                other => other?,
            };
            out.set_slice(t, &sol)?;
        }
        Ok(out)
    }

    /// Solves `(λ_G·LAP^(t) + (λ_1 + β)I)·A^(t) = β·W^(t) + λ^W(t)` per period.
    pub fn update_a(&self, s: &SolverState) -> Result<RealTensor> {
        self.graph_update(&self.l_w, &self.solvers_w, &s.w, &s.mult_w, &s.a)
    }

    pub fn update_b(&self, s: &SolverState) -> Result<RealTensor> {
        self.graph_update(&self.l_h, &self.solvers_h, &s.h, &s.mult_h, &s.b)
    }

    fn e_from_product(&self, product: &RealTensor, mult_e: &RealTensor) -> RealTensor {
        let mut e = product.clone();
        let x = self.observed.values();
        let beta = self.beta;
        for &o in self.observed.offsets() {
            e.as_mut_slice()[o] =
                (beta * x.as_slice()[o] + mult_e.as_slice()[o] + product.as_slice()[o]) / (1.0 + beta);
        }
        e
    }

    /// On Ω: `(βX + λ^E + W *_M Hᵀ)/(1 + β)`; elsewhere `W *_M Hᵀ`.
    pub fn update_e(&self, s: &SolverState) -> Result<RealTensor> {
        let product = self.reconstruct(&s.w, &s.h)?;
        Ok(self.e_from_product(&product, &s.mult_e))
    }

    /// Dual ascent on the three constraints.
    pub fn update_multipliers(&self, s: &SolverState) -> (RealTensor, RealTensor, RealTensor) {
        let step = self.config.gamma * self.beta;
        let mut mult_w = s.mult_w.clone();
        let mut mult_h = s.mult_h.clone();
        let mut mult_e = s.mult_e.clone();
        mult_w.axpy(-step, &(&s.a - &s.w)).expect("state shapes agree");
        mult_h.axpy(-step, &(&s.b - &s.h)).expect("state shapes agree");
        let x = self.observed.values();
        for &o in self.observed.offsets() {
            mult_e.as_mut_slice()[o] -= step * (s.e.as_slice()[o] - x.as_slice()[o]);
        }
        (mult_w, mult_h, mult_e)
    }

    fn penalty_terms(&self, a: &RealTensor, b: &RealTensor) -> Result<f64> {
        let c = &self.config;
        let graph_w = if c.lambda_g == 0.0 { 0.0 } else { c.lambda_g * self.l_w.smoothness(a)? };
        let graph_h = if c.lambda_g == 0.0 { 0.0 } else { c.lambda_g * self.l_h.smoothness(b)? };
        Ok(graph_w + graph_h + c.lambda_1 * (a.frobenius_norm_sq() + b.frobenius_norm_sq()))
    }

    fn objective_with_product(&self, s: &SolverState, product: &RealTensor) -> Result<f64> {
        let fit = (&s.e - product).frobenius_norm_sq();
        Ok(0.5 * fit + 0.5 * self.penalty_terms(&s.a, &s.b)?)
    }

    /// `½‖E − W *_M Hᵀ‖² + ½(⟨L^W, A *_M Aᵀ⟩ + ⟨L^H, B *_M Bᵀ⟩)`.
    pub fn objective(&self, s: &SolverState) -> Result<f64> {
        let product = self.reconstruct(&s.w, &s.h)?;
        self.objective_with_product(s, &product)
    }

    fn lagrangian_with_product(&self, s: &SolverState, product: &RealTensor) -> Result<f64> {
        let beta = self.beta;
        let shifted = |x: &RealTensor, y: &RealTensor, mult: &RealTensor| {
            let mut d = x - y;
            d.axpy(-1.0 / beta, mult).expect("state shapes agree");
            d.frobenius_norm_sq()
        };
        let x = self.observed.values();
        let e_term: f64 = self
            .observed
            .offsets()
            .iter()
            .map(|&o| (s.e.as_slice()[o] - x.as_slice()[o] - s.mult_e.as_slice()[o] / beta).powi(2))
            .sum();
        Ok(self.objective_with_product(s, product)?
            + 0.5 * beta * (shifted(&s.a, &s.w, &s.mult_w) + shifted(&s.b, &s.h, &s.mult_h) + e_term))
    }

    /// Augmented Lagrangian in the scaled-multiplier form.
    pub fn augmented_lagrangian(&self, s: &SolverState) -> Result<f64> {
        let product = self.reconstruct(&s.w, &s.h)?;
        self.lagrangian_with_product(s, &product)
    }

    fn residuals(&self, s: &SolverState) -> (f64, f64, f64) {
        let res_w = (&s.a - &s.w).frobenius_norm();
        let res_h = (&s.b - &s.h).frobenius_norm();
        let x = self.observed.values();
        let res_e = self
            .observed
            .offsets()
            .iter()
            .map(|&o| (s.e.as_slice()[o] - x.as_slice()[o]).powi(2))
            .sum::<f64>()
            .sqrt();
        (res_w, res_h, res_e)
    }

    fn gap(&self, prev: &SolverState, next: &SolverState) -> f64 {
        let d = |x: &RealTensor, y: &RealTensor| (x - y).frobenius_norm_sq();
        let de = self.observed.projected_norm(&(&next.e - &prev.e)).powi(2);
        d(&next.a, &prev.a) + d(&next.b, &prev.b) + d(&next.w, &prev.w) + d(&next.h, &prev.h) + de
    }

    /// One full sweep `W → H → (A, B) → E → multipliers`. Returns the new
    /// state and the product `W *_M Hᵀ` it used.
    pub fn step(&self, s: &SolverState) -> Result<(SolverState, RealTensor)> {
        let m = &self.transform;
        let e_hat = m.forward_real(&s.e)?;
        let w = self.factor_update(&e_hat, &s.h, &s.a, &s.mult_w, &s.w, false)?;
        let h = self.factor_update(&e_hat, &w, &s.b, &s.mult_h, &s.h, true)?;
        let a = self.graph_update(&self.l_w, &self.solvers_w, &w, &s.mult_w, &s.a)?;
        let b = self.graph_update(&self.l_h, &self.solvers_h, &h, &s.mult_h, &s.b)?;
        let product = self.reconstruct(&w, &h)?;
        let e = self.e_from_product(&product, &s.mult_e);
        let mut next = SolverState {
            w,
            h,
            a,
            b,
            e,
            mult_w: s.mult_w.clone(),
            mult_h: s.mult_h.clone(),
            mult_e: s.mult_e.clone(),
            iter: s.iter + 1,
        };
        let (mw, mh, me) = self.update_multipliers(&next);
        next.mult_w = mw;
        next.mult_h = mh;
        next.mult_e = me;
        Ok((next, product))
    }

    /// Iterates from `state` until the residuals fall below
    /// `stop_tol·‖P_Ω(X)‖_F` or `max_iter` sweeps have run.
    pub fn run(&self, mut state: SolverState) -> Result<(SolverState, Diagnostics)> {
        if self.observed.is_empty() {
            return Err(Error::NoObservations);
        }
        let scale = self.observed.values().frobenius_norm();
        let threshold = self.config.stop_tol * scale.max(f64::MIN_POSITIVE);
        let mut diag = Diagnostics {
            scale,
            beta: self.beta,
            ..Diagnostics::default()
        };
        let mut best_gap = f64::INFINITY;
        for _ in 0..self.config.max_iter {
            let (next, product) = self.step(&state)?;
            let f = self.objective_with_product(&next, &product)?;
            if !f.is_finite() {
                return Err(Error::SolverNonConvergence(format!(
                    "objective became {f} at iteration {}",
                    next.iter
                )));
            }
            let (rw, rh, re) = self.residuals(&next);
            best_gap = best_gap.min(self.gap(&state, &next));
            diag.objective.push(f);
            diag.lagrangian.push(self.lagrangian_with_product(&next, &product)?);
            diag.res_w.push(rw);
            diag.res_h.push(rh);
            diag.res_e.push(re);
            diag.u.push(best_gap);
            state = next;
            if rw <= threshold && rh <= threshold && re <= threshold {
                diag.converged = true;
                break;
            }
        }
        if !diag.converged {
            log::info!(
                "stopped at max_iter = {} with residual {:.3e} (target {:.3e})",
                self.config.max_iter,
                diag.final_residual(),
                threshold
            );
        }
        Ok((state, diag))
    }
}

/// Completes `observed` and returns `W *_M Hᵀ` with the diagnostics.
pub fn solve(
    observed: &ObservedTensor,
    g_w: Option<&DynamicGraph>,
    g_h: Option<&DynamicGraph>,
    config: &SolverConfig,
) -> Result<(RealTensor, Diagnostics)> {
    if observed.is_empty() {
        return Err(Error::NoObservations);
    }
    let model = CompletionModel::from_graphs(observed, g_w, g_h, config.clone())?;
    let (state, diag) = model.run(model.initial_state())?;
    Ok((model.reconstruct(&state.w, &state.h)?, diag))
}
