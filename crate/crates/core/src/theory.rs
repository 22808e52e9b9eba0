//! Numerical probes of the weighted-norm view of the graph regularizer.
//!
//! A combined Laplacian tensor `ℒ = λ_G·LAP̃ + λ_1·ℐ` has Hermitian positive
//! definite transform-domain slices `L̂ = U S Uᴴ`. The graph weight is
//! `Â = U S^{-1/2}`, so that `‖Â⁻¹ Ŵ‖² = ⟨L̂, Ŵ Ŵᴴ⟩` slice by slice. The
//! probes below compare quantities built in the transform domain against the
//! same quantities assembled in the original domain, which keeps the checks
//! honest about the scaling constant of the transform.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::algebra::{conj_transpose, t_product_complex, tensor_nuclear_norm, tensor_spectral_norm};
use crate::datagen::rng_from;
use crate::error::{Error, Result};
use crate::graph::{GraphPenalty, LaplacianTensor};
use crate::linalg::jacobi_svd;
use crate::tensor::{ComplexTensor, RealTensor, Scalar, Tensor3};
use crate::transform::Transform;

/// Relative eigenvalue floor applied before `S^{-1/2}`.
pub const DEFAULT_EIGEN_FLOOR: f64 = 1e-12;

/// Relative tolerance for the Hermitian check on transform-domain slices.
const HERMITIAN_TOL: f64 = 1e-10;

/// One graph weight tensor, held as its transform-domain slices and their inverses.
#[derive(Debug, Clone)]
pub struct GraphWeight {
    hat: Vec<DMatrix<Complex64>>,
    hat_inv: Vec<DMatrix<Complex64>>,
}

impl GraphWeight {
    pub fn identity(n: usize, periods: usize) -> Self {
        let eye = DMatrix::<Complex64>::identity(n, n);
        Self {
            hat: vec![eye.clone(); periods],
            hat_inv: vec![eye; periods],
        }
    }

    /// Builds `U S^{-1/2}` from Hermitian positive semidefinite slices.
    /// Eigenvalues below `floor · max eigenvalue` are raised to that level.
    pub fn from_hat_slices(slices: &[DMatrix<Complex64>], floor: f64) -> Result<Self> {
        let mut hat = Vec::with_capacity(slices.len());
        let mut hat_inv = Vec::with_capacity(slices.len());
        for (t, l) in slices.iter().enumerate() {
            if !l.is_square() {
                return Err(Error::dims(format!("slice {t} of the Laplacian is not square")));
            }
            let asym = (l - l.adjoint()).norm();
            if asym > HERMITIAN_TOL * l.norm().max(1.0) {
                return Err(Error::Numerical(format!(
                    "Laplacian slice {t} is not Hermitian (asymmetry {asym:.3e})"
                )));
            }
            let sym = (l + l.adjoint()).scale(0.5);
            let eig = sym.symmetric_eigen();
            let top = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
            if top <= 0.0 {
                return Err(Error::Numerical(format!("Laplacian slice {t} has no positive eigenvalue")));
            }
            let lo = floor * top;
            let n = l.nrows();
            let mut a = eig.eigenvectors.clone();
            let mut a_inv = eig.eigenvectors.adjoint();
            for k in 0..n {
                let s = eig.eigenvalues[k].max(lo);
                a.column_mut(k).scale_mut(s.powf(-0.5));
                a_inv.row_mut(k).scale_mut(s.sqrt());
            }
            hat.push(a);
            hat_inv.push(a_inv);
        }
        Ok(Self { hat, hat_inv })
    }

    /// Weight for an original-domain combined Laplacian tensor.
    pub fn from_combined_tensor(l: &ComplexTensor, m: &Transform, floor: f64) -> Result<Self> {
        let hat = m.forward(l)?;
        Self::from_hat_slices(&hat.slices(), floor)
    }

    /// Weight for `λ_G·LAP̃ + λ_1·ℐ`. A zero Laplacian gives the identity.
    pub fn from_laplacian(l: &LaplacianTensor, penalty: GraphPenalty, m: &Transform, floor: f64) -> Result<Self> {
        if m.size() != l.period_count() {
            return Err(Error::dims(format!(
                "transform of size {} for a Laplacian over {} periods",
                m.size(),
                l.period_count()
            )));
        }
        if l.is_zero() {
            return Ok(Self::identity(l.vertex_count(), l.period_count()));
        }
        if !(penalty.lambda_1 > 0.0) {
            return Err(Error::config("graph weights need lambda_1 > 0"));
        }
        let combined = l.combined_tensor(penalty, m)?;
        Self::from_combined_tensor(&combined, m, floor)
    }

    pub fn dim(&self) -> usize {
        self.hat.first().map_or(0, |a| a.nrows())
    }

    pub fn period_count(&self) -> usize {
        self.hat.len()
    }

    pub fn hat_slice(&self, t: usize) -> &DMatrix<Complex64> {
        &self.hat[t]
    }

    pub fn hat_inverse_slice(&self, t: usize) -> &DMatrix<Complex64> {
        &self.hat_inv[t]
    }

    /// The weight tensor in the original domain.
    pub fn tensor(&self, m: &Transform) -> Result<ComplexTensor> {
        m.inverse(&ComplexTensor::from_slices(&self.hat)?)
    }

    pub fn inverse_tensor(&self, m: &Transform) -> Result<ComplexTensor> {
        m.inverse(&ComplexTensor::from_slices(&self.hat_inv)?)
    }
}

/// Row and column weights `(𝒜, ℬ)`.
#[derive(Debug, Clone)]
pub struct WeightPair {
    pub a: GraphWeight,
    pub b: GraphWeight,
}

impl WeightPair {
    pub fn identity(n1: usize, n2: usize, periods: usize) -> Self {
        Self {
            a: GraphWeight::identity(n1, periods),
            b: GraphWeight::identity(n2, periods),
        }
    }

    fn check(&self, dims: (usize, usize, usize)) -> Result<()> {
        let (n1, n2, n3) = dims;
        if self.a.dim() != n1 || self.b.dim() != n2 || self.a.period_count() != n3 || self.b.period_count() != n3 {
            return Err(Error::dims(format!(
                "weights of sizes {}×{} over {} periods for a {n1}×{n2}×{n3} tensor",
                self.a.dim(),
                self.b.dim(),
                self.a.period_count()
            )));
        }
        Ok(())
    }
}

pub fn weight_pair_from_laplacians(
    l_w: &LaplacianTensor,
    l_h: &LaplacianTensor,
    penalty: GraphPenalty,
    m: &Transform,
    floor: f64,
) -> Result<WeightPair> {
    Ok(WeightPair {
        a: GraphWeight::from_laplacian(l_w, penalty, m, floor)?,
        b: GraphWeight::from_laplacian(l_h, penalty, m, floor)?,
    })
}

fn weighted_hat<S: Scalar>(x: &Tensor3<S>, pair: &WeightPair, m: &Transform) -> Result<Vec<DMatrix<Complex64>>> {
    pair.check(x.dims())?;
    let x_hat = m.forward(x)?;
    Ok((0..x.dims().2)
        .map(|t| pair.a.hat_inverse_slice(t) * x_hat.slice_view(t) * pair.b.hat_inverse_slice(t).adjoint())
        .collect())
}

/// `𝒜⁻¹ *_M 𝒳 *_M ℬ⁻ᵀ` in the original domain.
pub fn weighted_tensor<S: Scalar>(x: &Tensor3<S>, pair: &WeightPair, m: &Transform) -> Result<ComplexTensor> {
    m.inverse(&ComplexTensor::from_slices(&weighted_hat(x, pair, m)?)?)
}

pub fn weighted_nuclear_norm<S: Scalar>(x: &Tensor3<S>, pair: &WeightPair, m: &Transform) -> Result<f64> {
    tensor_nuclear_norm(&weighted_tensor(x, pair, m)?, m)
}

/// Both sides of `⟨ℒ, 𝒲 *_M 𝒲ᵀ⟩ = ‖𝒜⁻¹ *_M 𝒲‖_F²`.
#[derive(Debug, Clone, Copy)]
pub struct RegularizerCheck {
    pub regularizer: f64,
    pub weighted_frobenius: f64,
}

impl RegularizerCheck {
    pub fn deviation(&self) -> f64 {
        (self.regularizer - self.weighted_frobenius).abs()
    }

    pub fn relative_deviation(&self) -> f64 {
        self.deviation() / (1.0 + self.regularizer.abs())
    }
}

/// Evaluates the regularizer through the original-domain combined tensor and
/// the weighted norm through the weight slices. `weight` must come from the
/// same Laplacian and penalty.
pub fn regularizer_weighted_frobenius_check(
    w: &RealTensor,
    l_w: &LaplacianTensor,
    penalty: GraphPenalty,
    weight: &GraphWeight,
    m: &Transform,
) -> Result<RegularizerCheck> {
    let (n, _, n3) = w.dims();
    if weight.dim() != n || weight.period_count() != n3 {
        return Err(Error::dims("weight does not match the factor"));
    }
    let wc = w.to_complex();
    let gram = t_product_complex(&wc, &conj_transpose(&wc, m)?, m)?;
    let combined = l_w.combined_tensor(penalty, m)?;
    let regularizer: f64 = combined
        .as_slice()
        .iter()
        .zip(gram.as_slice())
        .map(|(l, g)| (l.conj() * g).re)
        .sum();
    let w_hat = m.forward(w)?;
    let slices: Vec<_> = (0..n3).map(|t| weight.hat_inverse_slice(t) * w_hat.slice_view(t)).collect();
    let weighted = m.inverse(&ComplexTensor::from_slices(&slices)?)?;
    Ok(RegularizerCheck {
        regularizer,
        weighted_frobenius: weighted.frobenius_norm_sq(),
    })
}

/// Outcome of comparing factorization costs against the weighted nuclear norm.
#[derive(Debug, Clone, Copy)]
pub struct FactorizationReport {
    pub weighted_nuclear: f64,
    pub trials: usize,
    /// Trials whose cost fell below the norm by more than the tolerance.
    pub violations: usize,
    /// Smallest `cost − norm` over the random factorizations.
    pub worst_margin: f64,
    /// Cost of the balanced factorization from the weighted t-SVD.
    pub balanced_cost: f64,
    /// Largest original-domain reconstruction error of any factorization used.
    pub reconstruction_error: f64,
}

impl FactorizationReport {
    pub const LOWER_TOL: f64 = 1e-6;
    pub const ATTAIN_TOL: f64 = 1e-6;

    pub fn attained_gap(&self) -> f64 {
        (self.balanced_cost - self.weighted_nuclear).abs() / self.weighted_nuclear.max(f64::MIN_POSITIVE)
    }

    pub fn passed(&self) -> bool {
        self.violations == 0 && (self.weighted_nuclear == 0.0 || self.attained_gap() <= Self::ATTAIN_TOL)
    }
}

fn complex_normal(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Weighted cost `½(‖𝒜⁻¹ *_M 𝒲‖² + ‖ℬ⁻¹ *_M ℋ‖²)` from transform-domain factors.
fn factor_cost(w_hat: &[DMatrix<Complex64>], h_hat: &[DMatrix<Complex64>], pair: &WeightPair, c: f64) -> f64 {
    let total: f64 = w_hat
        .iter()
        .zip(h_hat)
        .enumerate()
        .map(|(t, (w, h))| {
            (pair.a.hat_inverse_slice(t) * w).norm_squared() + (pair.b.hat_inverse_slice(t) * h).norm_squared()
        })
        .sum();
    0.5 * total / c
}

fn reconstruction_error(
    x: &ComplexTensor,
    w_hat: Vec<DMatrix<Complex64>>,
    h_hat: Vec<DMatrix<Complex64>>,
    m: &Transform,
) -> Result<f64> {
    let w = m.inverse(&ComplexTensor::from_slices(&w_hat)?)?;
    let h = m.inverse(&ComplexTensor::from_slices(&h_hat)?)?;
    let product = t_product_complex(&w, &conj_transpose(&h, m)?, m)?;
    Ok(product.relative_error(x))
}

/// Checks that every factorization `𝒳 = 𝒲 *_M ℋᵀ` costs at least the
/// weighted nuclear norm and that the balanced factorization attains it.
///
/// Random factorizations take the plain transform-domain SVD `X̂ = U Σ Vᴴ`
/// and insert a random invertible `G`: `Ŵ = U Σ^{1/2} G`, `Ĥ = V Σ^{1/2} G^{-ᴴ}`.
pub fn factorization_bound_check(
    x: &RealTensor,
    pair: &WeightPair,
    m: &Transform,
    trials: usize,
    seed: u64,
) -> Result<FactorizationReport> {
    let (n1, n2, n3) = x.dims();
    pair.check(x.dims())?;
    let k = n1.min(n2);
    let c = m.scale_c();
    let xc = x.to_complex();
    let x_hat = m.forward(x)?;
    let nuclear = weighted_nuclear_norm(x, pair, m)?;
    let tol = FactorizationReport::LOWER_TOL * nuclear.max(1.0);

    let svds: Vec<_> = (0..n3).map(|t| jacobi_svd(&x_hat.slice(t))).collect();
    let half = |s: &[f64]| DMatrix::from_fn(s.len(), s.len(), |i, j| if i == j { Complex64::from(s[i].sqrt()) } else { Complex64::from(0.0) });

    let mut rng = rng_from(seed);
    let mut violations = 0;
    let mut worst_margin = f64::INFINITY;
    let mut worst_reconstruction = 0.0f64;
    for trial in 0..trials {
        let mut w_hat = Vec::with_capacity(n3);
        let mut h_hat = Vec::with_capacity(n3);
        for svd in &svds {
            let root = half(&svd.sigma);
            let (g, g_inv) = loop {
                let g = complex_normal(k, k, &mut rng);
                if let Some(inv) = g.clone().try_inverse() {
                    break (g, inv);
                }
            };
            w_hat.push(&svd.u * &root * &g);
            h_hat.push(&svd.v * &root * g_inv.adjoint());
        }
        let margin = factor_cost(&w_hat, &h_hat, pair, c) - nuclear;
        worst_margin = worst_margin.min(margin);
        if margin < -tol {
            violations += 1;
        }
        if trial == 0 {
            worst_reconstruction = worst_reconstruction.max(reconstruction_error(&xc, w_hat, h_hat, m)?);
        }
    }

    let y_hat = weighted_hat(x, pair, m)?;
    let mut w_hat = Vec::with_capacity(n3);
    let mut h_hat = Vec::with_capacity(n3);
    for (t, y) in y_hat.iter().enumerate() {
        let svd = jacobi_svd(y);
        let root = half(&svd.sigma);
        w_hat.push(pair.a.hat_slice(t) * &svd.u * &root);
        h_hat.push(pair.b.hat_slice(t) * &svd.v * &root);
    }
    let balanced_cost = factor_cost(&w_hat, &h_hat, pair, c);
    worst_reconstruction = worst_reconstruction.max(reconstruction_error(&xc, w_hat, h_hat, m)?);

    Ok(FactorizationReport {
        weighted_nuclear: nuclear,
        trials,
        violations,
        worst_margin: if trials == 0 { 0.0 } else { worst_margin },
        balanced_cost,
        reconstruction_error: worst_reconstruction,
    })
}

/// `⟨x, y⟩` against the bound `‖𝒜⁻¹ x ℬ⁻ᵀ‖_* · ‖𝒜ᵀ y ℬ‖`.
#[derive(Debug, Clone, Copy)]
pub struct DualityReport {
    pub inner: f64,
    pub bound: f64,
}

impl DualityReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.inner <= self.bound + tol
    }

    pub fn ratio(&self) -> f64 {
        self.inner / self.bound
    }
}

pub fn duality_probe<S: Scalar>(x: &Tensor3<S>, y: &ComplexTensor, pair: &WeightPair, m: &Transform) -> Result<DualityReport> {
    pair.check(y.dims())?;
    let inner = x.to_complex().inner(y)?;
    let y_hat = m.forward(y)?;
    let dual_slices: Vec<_> = (0..y.dims().2)
        .map(|t| pair.a.hat_slice(t).adjoint() * y_hat.slice_view(t) * pair.b.hat_slice(t))
        .collect();
    let dual = m.inverse(&ComplexTensor::from_slices(&dual_slices)?)?;
    Ok(DualityReport {
        inner,
        bound: weighted_nuclear_norm(x, pair, m)? * tensor_spectral_norm(&dual, m)?,
    })
}

/// The dual certificate `y` with `𝒜ᵀ y ℬ = 𝒰 *_M 𝒱ᵀ` from the weighted t-SVD
/// of `x`, for which the duality bound is tight.
pub fn aligned_dual<S: Scalar>(x: &Tensor3<S>, pair: &WeightPair, m: &Transform) -> Result<ComplexTensor> {
    let y_hat = weighted_hat(x, pair, m)?;
    let slices: Vec<_> = y_hat
        .iter()
        .enumerate()
        .map(|(t, y)| {
            let svd = jacobi_svd(y);
            let a_inv_h = pair.a.hat_inverse_slice(t).adjoint();
            &a_inv_h * svd.u * svd.v.adjoint() * pair.b.hat_inverse_slice(t)
        })
        .collect();
    m.inverse(&ComplexTensor::from_slices(&slices)?)
}

/// `(α, α*)`: infinity norms of the weighted truth and of the truth itself.
pub fn alpha_measure(x_true: &RealTensor, pair: &WeightPair, m: &Transform) -> Result<(f64, f64)> {
    Ok((weighted_tensor(x_true, pair, m)?.infinity_norm(), x_true.infinity_norm()))
}
