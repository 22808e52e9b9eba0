//! t-product algebra under an invertible transform: products, conjugate
//! transpose, transformed t-SVD, tubal rank and the derived norms.
//!
//! Everything is computed one transform-domain frontal slice at a time; the
//! block-diagonal matrix of all slices is never formed.

use nalgebra::{DMatrix, DMatrixView};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tensor::{ComplexTensor, Scalar, Tensor3};
use crate::transform::{to_scalar, Transform};

/// Default relative threshold for counting a tube of singular values as nonzero.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// `x ×₃ a`: multiplies the mode-3 unfolding by `a` from the left.
pub fn mode3_product<S: Scalar>(x: &Tensor3<S>, a: &DMatrix<S>) -> Result<Tensor3<S>> {
    let (n1, n2, n3) = x.dims();
    if a.ncols() != n3 {
        return Err(Error::dims(format!(
            "mode-3 product needs {n3} columns, matrix has {}",
            a.ncols()
        )));
    }
    let unfolded_t = DMatrixView::from_slice(x.as_slice(), n1 * n2, n3);
    let out = unfolded_t * a.transpose();
    Tensor3::from_vec(n1, n2, a.nrows(), out.as_slice().to_vec())
}

/// How slice work is scheduled for real inputs under a complex transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceStrategy {
    /// Compute one slice of each conjugate pair and mirror the other.
    Mirror,
    /// Compute every slice independently.
    Full,
}

/// Evaluates `f` on every transform-domain slice index. The flag passed to
/// `f` marks slices that are their own conjugate partner (real-valued for
/// real inputs).
pub(crate) fn map_slices<F>(
    m: &Transform,
    real_input: bool,
    strategy: SliceStrategy,
    mut f: F,
) -> Result<Vec<DMatrix<Complex64>>>
where
    F: FnMut(usize, bool) -> Result<DMatrix<Complex64>>,
{
    let n = m.size();
    let mirror = real_input && strategy == SliceStrategy::Mirror && m.partner(0).is_some();
    if !mirror {
        return (0..n).map(|t| f(t, false)).collect();
    }
    let mut out: Vec<Option<DMatrix<Complex64>>> = vec![None; n];
    for t in 0..n {
        let p = m.partner(t).expect("checked above");
        if p < t {
            continue;
        }
        let s = f(t, p == t)?;
        if p != t {
            out[p] = Some(s.map(|z| z.conj()));
        }
        out[t] = Some(s);
    }
    Ok(out.into_iter().map(|s| s.expect("every slice assigned")).collect())
}

pub(crate) fn fold(slices: &[DMatrix<Complex64>]) -> Result<ComplexTensor> {
    Tensor3::from_slices(slices)
}

/// A tensor together with its transform-domain image `x ×₃ M`.
#[derive(Debug, Clone)]
pub struct TransformedView<S: Scalar = f64> {
    pub origin: Tensor3<S>,
    pub hat: ComplexTensor,
    pub transform: Transform,
}

impl<S: Scalar> TransformedView<S> {
    pub fn new(origin: Tensor3<S>, transform: &Transform) -> Result<Self> {
        let hat = transform.forward(&origin)?;
        Ok(Self {
            origin,
            hat,
            transform: transform.clone(),
        })
    }

    pub fn hat_slice(&self, t: usize) -> DMatrix<Complex64> {
        self.hat.slice(t)
    }

    /// Maps `hat` back to the original domain.
    pub fn reconstruct(&self) -> Result<Tensor3<S>> {
        self.transform.inverse_to(&self.hat)
    }
}

fn check_product_dims(ad: (usize, usize, usize), bd: (usize, usize, usize), m: &Transform) -> Result<()> {
    if ad.1 != bd.0 || ad.2 != bd.2 {
        return Err(Error::dims(format!(
            "cannot multiply {ad:?} by {bd:?}: inner or third dimension differs"
        )));
    }
    if ad.2 != m.size() {
        return Err(Error::dims(format!(
            "tensors have {} slices, transform has size {}",
            ad.2,
            m.size()
        )));
    }
    Ok(())
}

/// `a *_M b`.
pub fn t_product<S: Scalar>(a: &Tensor3<S>, b: &Tensor3<S>, m: &Transform) -> Result<Tensor3<S>> {
    t_product_with(a, b, m, SliceStrategy::Mirror)
}

pub fn t_product_with<S: Scalar>(
    a: &Tensor3<S>,
    b: &Tensor3<S>,
    m: &Transform,
    strategy: SliceStrategy,
) -> Result<Tensor3<S>> {
    check_product_dims(a.dims(), b.dims(), m)?;
    let ah = m.forward(a)?;
    let bh = m.forward(b)?;
    let slices = map_slices(m, S::is_real_type(), strategy, |t, _| {
        Ok(ah.slice_view(t) * bh.slice_view(t))
    })?;
    to_scalar(m.inverse(&fold(&slices)?)?)
}

/// Complex-valued t-product, no realness check on the result.
pub fn t_product_complex(a: &ComplexTensor, b: &ComplexTensor, m: &Transform) -> Result<ComplexTensor> {
    t_product_with(a, b, m, SliceStrategy::Full)
}

/// Slice-wise product in the original domain: `c^(t) = a^(t) b^(t)`.
pub fn star_product<S: Scalar>(a: &Tensor3<S>, b: &Tensor3<S>) -> Result<Tensor3<S>> {
    let (ad, bd) = (a.dims(), b.dims());
    if ad.1 != bd.0 || ad.2 != bd.2 {
        return Err(Error::dims(format!(
            "cannot star-multiply {ad:?} by {bd:?}"
        )));
    }
    let slices: Vec<DMatrix<S>> = (0..ad.2)
        .map(|t| a.slice_view(t) * b.slice_view(t))
        .collect();
    Tensor3::from_slices(&slices)
}

/// Conjugate transpose under `*_M`: every transform-domain slice is replaced
/// by its adjoint.
pub fn conj_transpose<S: Scalar>(a: &Tensor3<S>, m: &Transform) -> Result<Tensor3<S>> {
    let ah = m.forward(a)?;
    let slices = map_slices(m, S::is_real_type(), SliceStrategy::Mirror, |t, _| {
        Ok(ah.slice_view(t).adjoint())
    })?;
    to_scalar(m.inverse(&fold(&slices)?)?)
}

/// Transformed t-SVD `a = u *_M s *_M v^T` in economy form: with
/// `k = min(n1, n2)` (or the truncation rank), `u` is `n1 x k x n3`, `s` is
/// `k x k x n3` and `v` is `n2 x k x n3`.
#[derive(Debug, Clone)]
pub struct TSvdFactors<S: Scalar = f64> {
    pub u: Tensor3<S>,
    pub s: Tensor3<S>,
    pub v: Tensor3<S>,
    /// Singular values of every transform-domain slice, non-increasing.
    pub sigma: Vec<Vec<f64>>,
    pub transform: Transform,
}

impl<S: Scalar> TSvdFactors<S> {
    pub fn rank(&self) -> usize {
        self.u.dims().1
    }

    pub fn reconstruct(&self) -> Result<Tensor3<S>> {
        let us = t_product(&self.u, &self.s, &self.transform)?;
        t_product(&us, &conj_transpose(&self.v, &self.transform)?, &self.transform)
    }
}

/// Rotates each left singular vector so its largest entry is real and
/// positive, and applies the same phase to the matching right vector.
fn normalize_phases(u: &mut DMatrix<Complex64>, v: &mut DMatrix<Complex64>) {
    for j in 0..u.ncols() {
        let mut best = 0;
        let mut best_abs = -1.0;
        for i in 0..u.nrows() {
            let a = u[(i, j)].norm();
            // Ties resolve to the lower index; small slack keeps this stable under rounding.
            if a > best_abs * (1.0 + 1e-9) {
                best = i;
                best_abs = a;
            }
        }
        if best_abs <= 0.0 {
            continue;
        }
        let phase = u[(best, j)] / best_abs;
        let c = phase.conj();
        for i in 0..u.nrows() {
            u[(i, j)] *= c;
        }
        for i in 0..v.nrows() {
            v[(i, j)] *= c;
        }
    }
}

pub(crate) struct SliceSvd {
    pub u: DMatrix<Complex64>,
    pub sigma: Vec<f64>,
    pub v: DMatrix<Complex64>,
}

pub(crate) fn slice_svd(x: &DMatrix<Complex64>, real: bool, keep: usize) -> Result<SliceSvd> {
    let fail = || Error::Numerical("SVD did not converge".into());
    let (mut u, sigma, mut v) = if real {
        let xr = x.map(|z| z.re);
        let svd = xr.try_svd(true, true, f64::EPSILON, 0).ok_or_else(fail)?;
        let to_c = |m: DMatrix<f64>| m.map(|v| Complex64::new(v, 0.0));
        (
            to_c(svd.u.ok_or_else(fail)?),
            svd.singular_values.iter().copied().collect::<Vec<_>>(),
            to_c(svd.v_t.ok_or_else(fail)?.transpose()),
        )
    } else {
        let svd = x.clone().try_svd(true, true, f64::EPSILON, 0).ok_or_else(fail)?;
        (
            svd.u.ok_or_else(fail)?,
            svd.singular_values.iter().copied().collect::<Vec<_>>(),
            svd.v_t.ok_or_else(fail)?.adjoint(),
        )
    };
    let k = keep.min(sigma.len());
    u = u.columns(0, k).into_owned();
    v = v.columns(0, k).into_owned();
    normalize_phases(&mut u, &mut v);
    Ok(SliceSvd {
        u,
        sigma: sigma[..k].to_vec(),
        v,
    })
}

pub fn t_svd<S: Scalar>(a: &Tensor3<S>, m: &Transform, truncate: Option<usize>) -> Result<TSvdFactors<S>> {
    let (n1, n2, n3) = a.dims();
    let k = truncate.unwrap_or(usize::MAX).min(n1.min(n2));
    let ah = m.forward(a)?;
    let mut parts: Vec<Option<SliceSvd>> = (0..n3).map(|_| None).collect();
    // The mirrored slices must reuse the conjugated factors of their partner,
    // otherwise independent phase choices leave the factors complex.
    map_slices(m, S::is_real_type(), SliceStrategy::Mirror, |t, self_conj| {
        parts[t] = Some(slice_svd(&ah.slice(t), self_conj, k)?);
        Ok(DMatrix::zeros(0, 0))
    })?;
    let real_input = S::is_real_type() && m.partner(0).is_some();
    for t in 0..n3 {
        if parts[t].is_none() {
            let p = m.partner(t).filter(|_| real_input).expect("mirrored slice has a partner");
            let src = parts[p].as_ref().expect("partner computed");
            parts[t] = Some(SliceSvd {
                u: src.u.map(|z| z.conj()),
                sigma: src.sigma.clone(),
                v: src.v.map(|z| z.conj()),
            });
        }
    }
    let parts: Vec<SliceSvd> = parts.into_iter().map(|p| p.expect("filled")).collect();
    let u_hat = fold(&parts.iter().map(|p| p.u.clone()).collect::<Vec<_>>())?;
    let v_hat = fold(&parts.iter().map(|p| p.v.clone()).collect::<Vec<_>>())?;
    let s_hat = fold(
        &parts
            .iter()
            .map(|p| {
                DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                    k,
                    p.sigma.iter().map(|&s| Complex64::new(s, 0.0)),
                ))
            })
            .collect::<Vec<_>>(),
    )?;
    Ok(TSvdFactors {
        u: to_scalar(m.inverse(&u_hat)?)?,
        s: to_scalar(m.inverse(&s_hat)?)?,
        v: to_scalar(m.inverse(&v_hat)?)?,
        sigma: parts.into_iter().map(|p| p.sigma).collect(),
        transform: m.clone(),
    })
}

/// Singular values of every transform-domain slice.
pub fn transform_singular_values<S: Scalar>(a: &Tensor3<S>, m: &Transform) -> Result<Vec<Vec<f64>>> {
    let ah = m.forward(a)?;
    let n3 = a.dims().2;
    let mut out: Vec<Option<Vec<f64>>> = vec![None; n3];
    map_slices(m, S::is_real_type(), SliceStrategy::Mirror, |t, _| {
        out[t] = Some(ah.slice(t).singular_values().iter().copied().collect());
        Ok(DMatrix::zeros(0, 0))
    })?;
    for t in 0..n3 {
        if out[t].is_none() {
            let p = m.partner(t).expect("mirrored slice has a partner");
            out[t] = out[p].clone();
        }
    }
    Ok(out.into_iter().map(|s| s.expect("filled")).collect())
}

/// Number of tubes `i` with `max_t ŝ_{iit} > tol * max(ŝ)`.
pub fn tubal_rank<S: Scalar>(a: &Tensor3<S>, m: &Transform, tol: f64) -> Result<usize> {
    if !(tol > 0.0) {
        return Err(Error::config("tubal rank tolerance must be positive"));
    }
    let sv = transform_singular_values(a, m)?;
    let k = sv.first().map_or(0, Vec::len);
    let top = sv.iter().flatten().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return Ok(0);
    }
    Ok((0..k)
        .filter(|&i| sv.iter().map(|s| s[i]).fold(0.0, f64::max) > tol * top)
        .count())
}

/// Largest singular value over all transform-domain slices.
pub fn tensor_spectral_norm<S: Scalar>(a: &Tensor3<S>, m: &Transform) -> Result<f64> {
    Ok(transform_singular_values(a, m)?
        .iter()
        .flatten()
        .copied()
        .fold(0.0, f64::max))
}

/// `(1/C) * sum_t ||â^(t)||_*`
pub fn tensor_nuclear_norm<S: Scalar>(a: &Tensor3<S>, m: &Transform) -> Result<f64> {
    let total: f64 = transform_singular_values(a, m)?.iter().flatten().sum();
    Ok(total / m.scale_c())
}
