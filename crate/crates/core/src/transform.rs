//! Invertible mode-3 transforms `M` with `M M^H = M^H M = C I`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::tensor::{ComplexTensor, RealTensor, Scalar, Tensor3};

/// Relative tolerance on `||M M^H - C I||_F / C` accepted at construction.
pub const UNITARITY_TOL: f64 = 1e-10;

/// Relative imaginary residue tolerated when mapping back to real tensors.
pub const REAL_RESIDUE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformKind {
    Dft,
    BlockOrthogonal { block_size: usize },
    Identity,
    Custom,
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransformKind::Dft => write!(f, "dft"),
            TransformKind::BlockOrthogonal { block_size } => {
                write!(f, "block_orthogonal({block_size})")
            }
            TransformKind::Identity => write!(f, "identity"),
            TransformKind::Custom => write!(f, "custom"),
        }
    }
}

struct FftPlan {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
}

struct Inner {
    kind: TransformKind,
    matrix: DMatrix<Complex64>,
    inverse: DMatrix<Complex64>,
    scale_c: f64,
    real: bool,
    /// `partner[t] = p` when row `p` of `M` is the conjugate of row `t`, so the
    /// transform of a real tensor satisfies `hat^(p) = conj(hat^(t))`.
    partner: Option<Vec<usize>>,
    fft: Option<FftPlan>,
}

/// An invertible linear transform along mode 3. Cloning is cheap.
#[derive(Clone)]
pub struct Transform(Arc<Inner>);

impl fmt::Debug for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Transform")
            .field("kind", &self.0.kind)
            .field("size", &self.size())
            .field("scale_c", &self.0.scale_c)
            .finish()
    }
}

fn dft_matrix(n: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(n, n, |k, t| {
        let theta = -2.0 * std::f64::consts::PI * ((k * t) % n) as f64 / n as f64;
        Complex64::new(theta.cos(), theta.sin())
    })
}

/// Orthonormal DCT-II matrix (real, `C = 1`).
pub fn dct_matrix(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |k, t| {
        let w = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        w * (std::f64::consts::PI * (t as f64 + 0.5) * k as f64 / n as f64).cos()
    })
}

fn scale_constant(m: &DMatrix<Complex64>) -> Result<f64> {
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return Err(Error::InvalidTransform(format!(
            "transform must be a non-empty square matrix, got {:?}",
            m.shape()
        )));
    }
    let mmh = m * m.adjoint();
    let c = (0..n).map(|i| mmh[(i, i)].re).sum::<f64>() / n as f64;
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidTransform("transform is singular".into()));
    }
    let eye = DMatrix::<Complex64>::identity(n, n).scale(c);
    let dev_left = (&mmh - &eye).norm() / c;
    let dev_right = (m.adjoint() * m - eye).norm() / c;
    if dev_left.max(dev_right) > UNITARITY_TOL {
        return Err(Error::InvalidTransform(format!(
            "M M^H is not a multiple of the identity (relative deviation {:.3e})",
            dev_left.max(dev_right)
        )));
    }
    Ok(c)
}

fn detect_partners(m: &DMatrix<Complex64>) -> Option<Vec<usize>> {
    let n = m.nrows();
    let tol = 1e-12 * m.norm().max(1.0);
    let mut partner = vec![usize::MAX; n];
    for t in 0..n {
        if partner[t] != usize::MAX {
            continue;
        }
        let found = (t..n).find(|&p| {
            partner[p] == usize::MAX
                && (0..n).all(|j| (m[(p, j)] - m[(t, j)].conj()).norm() <= tol)
        })?;
        partner[t] = found;
        partner[found] = t;
    }
    Some(partner)
}

impl Transform {
    fn build(kind: TransformKind, matrix: DMatrix<Complex64>, fft_len: Option<usize>) -> Result<Self> {
        let scale_c = scale_constant(&matrix)?;
        let inverse = matrix.adjoint().unscale(scale_c);
        let real = matrix.iter().all(|z| z.im == 0.0);
        let partner = if real {
            Some((0..matrix.nrows()).collect())
        } else {
            detect_partners(&matrix)
        };
        let fft = fft_len.map(|len| {
            let mut planner = FftPlanner::new();
            let mut real_planner = RealFftPlanner::new();
            FftPlan {
                len,
                forward: planner.plan_fft_forward(len),
                inverse: planner.plan_fft_inverse(len),
                r2c: real_planner.plan_fft_forward(len),
                c2r: real_planner.plan_fft_inverse(len),
            }
        });
        Ok(Transform(Arc::new(Inner {
            kind,
            matrix,
            inverse,
            scale_c,
            real,
            partner,
            fft,
        })))
    }

    /// Unnormalized DFT along mode 3 (`C = n`), evaluated with an FFT.
    pub fn dft(n: usize) -> Self {
        Self::build(TransformKind::Dft, dft_matrix(n), Some(n)).expect("DFT matrix is scaled unitary")
    }

    pub fn identity(n: usize) -> Self {
        Self::build(TransformKind::Identity, DMatrix::identity(n, n), None)
            .expect("identity is unitary")
    }

    /// Block-diagonal transform repeating `block` along the diagonal.
    pub fn block_diagonal(n: usize, block: DMatrix<Complex64>) -> Result<Self> {
        Self::block_with_plan(n, block, false)
    }

    pub fn block_orthogonal(n: usize, block: &DMatrix<f64>) -> Result<Self> {
        Self::block_with_plan(n, block.map(|v| Complex64::new(v, 0.0)), false)
    }

    /// Block-diagonal transform made of `n / ss` unnormalized DFT blocks of
    /// size `ss`; `ss = n` is the plain DFT.
    pub fn block_dft(n: usize, ss: usize) -> Result<Self> {
        if ss == n {
            return Ok(Self::dft(n));
        }
        Self::block_with_plan(n, dft_matrix(ss), true)
    }

    fn block_with_plan(n: usize, block: DMatrix<Complex64>, is_dft: bool) -> Result<Self> {
        let ss = block.nrows();
        if ss == 0 || block.ncols() != ss {
            return Err(Error::InvalidTransform("block must be square and non-empty".into()));
        }
        if !n.is_multiple_of(ss) {
            return Err(Error::InvalidTransform(format!(
                "block size {ss} does not divide transform size {n}"
            )));
        }
        scale_constant(&block)?;
        let mut matrix = DMatrix::zeros(n, n);
        for b in 0..n / ss {
            matrix.view_mut((b * ss, b * ss), (ss, ss)).copy_from(&block);
        }
        Self::build(
            TransformKind::BlockOrthogonal { block_size: ss },
            matrix,
            is_dft.then_some(ss),
        )
    }

    /// Any scaled-unitary matrix; anything else is rejected.
    pub fn custom(matrix: DMatrix<Complex64>) -> Result<Self> {
        Self::build(TransformKind::Custom, matrix, None)
    }

    pub fn dct(n: usize) -> Self {
        Self::custom(dct_matrix(n).map(|v| Complex64::new(v, 0.0))).expect("DCT-II is orthonormal")
    }

    pub fn kind(&self) -> TransformKind {
        self.0.kind
    }

    pub fn size(&self) -> usize {
        self.0.matrix.nrows()
    }

    pub fn scale_c(&self) -> f64 {
        self.0.scale_c
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0.matrix
    }

    pub fn inverse_matrix(&self) -> &DMatrix<Complex64> {
        &self.0.inverse
    }

    /// True when `M` has no imaginary part, so real tensors stay real.
    pub fn is_real(&self) -> bool {
        self.0.real
    }

    /// Conjugate partner of transform slice `t` for real inputs, if known.
    pub fn partner(&self, t: usize) -> Option<usize> {
        self.0.partner.as_ref().map(|p| p[t])
    }

    /// Size of the diagonal blocks, `1` for the identity and `n` for a dense transform.
    pub fn block_size(&self) -> usize {
        match self.0.kind {
            TransformKind::Identity => 1,
            TransformKind::BlockOrthogonal { block_size } => block_size,
            TransformKind::Dft | TransformKind::Custom => self.size(),
        }
    }

    /// True when every diagonal block lies inside one window of width `ss`.
    pub fn is_aligned_with(&self, ss: usize) -> bool {
        ss > 0 && self.size().is_multiple_of(ss) && ss.is_multiple_of(self.block_size())
    }

    fn check_len(&self, n3: usize) -> Result<()> {
        if n3 != self.size() {
            return Err(Error::dims(format!(
                "tensor has {n3} frontal slices but the transform has size {}",
                self.size()
            )));
        }
        Ok(())
    }

    /// `x ×₃ M`
    pub fn forward<S: Scalar>(&self, x: &Tensor3<S>) -> Result<ComplexTensor> {
        self.check_len(x.dims().2)?;
        Ok(match &self.0.fft {
            Some(plan) => fft_mode3(&x.to_complex(), plan.forward.as_ref(), plan.len, 1.0),
            None => dense_mode3(&x.to_complex(), &self.0.matrix),
        })
    }

    /// `x ×₃ M⁻¹`
    pub fn inverse<S: Scalar>(&self, x: &Tensor3<S>) -> Result<ComplexTensor> {
        self.check_len(x.dims().2)?;
        Ok(match &self.0.fft {
            Some(plan) => fft_mode3(
                &x.to_complex(),
                plan.inverse.as_ref(),
                plan.len,
                1.0 / plan.len as f64,
            ),
            None => dense_mode3(&x.to_complex(), &self.0.inverse),
        })
    }

    /// `x ×₃ M` for a real tensor, using a real-input FFT when available.
    pub fn forward_real(&self, x: &RealTensor) -> Result<ComplexTensor> {
        self.check_len(x.dims().2)?;
        Ok(match &self.0.fft {
            Some(plan) => real_fft_mode3(x, plan),
            None => dense_mode3(&x.to_complex(), &self.0.matrix),
        })
    }

    /// `x ×₃ M⁻¹` for a transform-domain tensor that is the image of a real
    /// tensor. Under an FFT only the lower half of each spectrum is read.
    pub fn inverse_real(&self, x: &ComplexTensor) -> Result<RealTensor> {
        self.check_len(x.dims().2)?;
        match &self.0.fft {
            Some(plan) => Ok(real_ifft_mode3(x, plan)),
            None => self.inverse_to(x),
        }
    }

    /// `x ×₃ M⁻¹`, converted to the scalar type `S` (checked for real `S`).
    pub fn inverse_to<S: Scalar>(&self, x: &ComplexTensor) -> Result<Tensor3<S>> {
        to_scalar(self.inverse(x)?)
    }

    /// Identity tensor `I = Î ×₃ M⁻¹` with every transform slice equal to `I_n`.
    pub fn identity_tensor(&self, n: usize) -> ComplexTensor {
        self.inverse(&ComplexTensor::eye_slices(n, self.size()))
            .expect("sizes agree by construction")
    }

    /// Identity tensor for transforms that keep real tensors real.
    pub fn identity_tensor_real(&self, n: usize) -> Result<RealTensor> {
        to_scalar(self.identity_tensor(n))
    }
}

/// Converts a complex tensor to `S`, checking the imaginary residue for real `S`.
pub fn to_scalar<S: Scalar>(x: ComplexTensor) -> Result<Tensor3<S>> {
    if S::is_real_type() {
        let residue = x.imaginary_residue();
        if residue > REAL_RESIDUE_TOL {
            return Err(Error::ImaginaryResidue {
                residue,
                tolerance: REAL_RESIDUE_TOL,
            });
        }
    }
    Ok(x.map(S::from_complex))
}

fn dense_mode3(x: &ComplexTensor, m: &DMatrix<Complex64>) -> ComplexTensor {
    let (n1, n2, n3) = x.dims();
    // The buffer is the (n1 n2) x n3 transpose of the mode-3 unfolding.
    let unfolded_t = nalgebra::DMatrixView::from_slice(x.as_slice(), n1 * n2, n3);
    let out = unfolded_t * m.transpose();
    Tensor3::from_vec(n1, n2, m.nrows(), out.as_slice().to_vec())
        .expect("product has matching length")
}

fn fft_mode3(x: &ComplexTensor, fft: &dyn Fft<f64>, len: usize, scale: f64) -> ComplexTensor {
    let (n1, n2, n3) = x.dims();
    let stride = n1 * n2;
    let src = x.as_slice();
    debug_assert_eq!(n3 % len, 0);
    // Gather tubes into contiguous rows so one call transforms all of them;
    // rustfft treats the buffer as consecutive chunks of `len`.
    let mut tubes = vec![Complex64::new(0.0, 0.0); src.len()];
    for t in 0..n3 {
        let frontal = &src[t * stride..(t + 1) * stride];
        for (p, &v) in frontal.iter().enumerate() {
            tubes[p * n3 + t] = v;
        }
    }
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    fft.process_with_scratch(&mut tubes, &mut scratch);
    let mut out = vec![Complex64::new(0.0, 0.0); src.len()];
    for t in 0..n3 {
        let frontal = &mut out[t * stride..(t + 1) * stride];
        for (p, v) in frontal.iter_mut().enumerate() {
            *v = tubes[p * n3 + t] * scale;
        }
    }
    Tensor3::from_vec(n1, n2, n3, out).expect("same length as input")
}

fn real_fft_mode3(x: &RealTensor, plan: &FftPlan) -> ComplexTensor {
    let (n1, n2, n3) = x.dims();
    let stride = n1 * n2;
    let len = plan.len;
    let half = len / 2 + 1;
    let src = x.as_slice();
    let mut input = vec![0.0; len];
    let mut spectrum = vec![Complex64::new(0.0, 0.0); half];
    let mut scratch = vec![Complex64::new(0.0, 0.0); plan.r2c.get_scratch_len()];
    let mut out = vec![Complex64::new(0.0, 0.0); src.len()];
    for p in 0..stride {
        for chunk in 0..n3 / len {
            let base = chunk * len;
            for (k, v) in input.iter_mut().enumerate() {
                *v = src[p + (base + k) * stride];
            }
            plan.r2c
                .process_with_scratch(&mut input, &mut spectrum, &mut scratch)
                .expect("buffer lengths come from the plan");
            for (k, &z) in spectrum.iter().enumerate() {
                out[p + (base + k) * stride] = z;
                if k > 0 && k < len - k {
                    out[p + (base + len - k) * stride] = z.conj();
                }
            }
        }
    }
    Tensor3::from_vec(n1, n2, n3, out).expect("same length as input")
}

fn real_ifft_mode3(x: &ComplexTensor, plan: &FftPlan) -> RealTensor {
    let (n1, n2, n3) = x.dims();
    let stride = n1 * n2;
    let len = plan.len;
    let half = len / 2 + 1;
    let scale = 1.0 / len as f64;
    let src = x.as_slice();
    let mut spectrum = vec![Complex64::new(0.0, 0.0); half];
    let mut output = vec![0.0; len];
    let mut scratch = vec![Complex64::new(0.0, 0.0); plan.c2r.get_scratch_len()];
    let mut out = vec![0.0; src.len()];
    for p in 0..stride {
        for chunk in 0..n3 / len {
            let base = chunk * len;
            for (k, v) in spectrum.iter_mut().enumerate() {
                *v = src[p + (base + k) * stride];
            }
            spectrum[0].im = 0.0;
            if len.is_multiple_of(2) {
                spectrum[half - 1].im = 0.0;
            }
            plan.c2r
                .process_with_scratch(&mut spectrum, &mut output, &mut scratch)
                .expect("buffer lengths come from the plan");
            for (k, &v) in output.iter().enumerate() {
                out[p + (base + k) * stride] = v * scale;
            }
        }
    }
    Tensor3::from_vec(n1, n2, n3, out).expect("same length as input")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n1: usize, n2: usize, n3: usize) -> RealTensor {
        RealTensor::from_fn(n1, n2, n3, |i, j, k| ((i * 7 + j * 3 + k * 5) % 11) as f64 - 4.7)
    }

    #[test]
    fn real_paths_match_complex_paths() {
        for m in [Transform::dft(8), Transform::dft(7), Transform::block_dft(12, 4).unwrap(), Transform::dct(5)] {
            let x = sample(3, 4, m.size());
            let full = m.forward(&x).unwrap();
            let fast = m.forward_real(&x).unwrap();
            assert!(fast.max_abs_diff(&full) < 1e-12, "{}", m.kind());
            let back = m.inverse_real(&fast).unwrap();
            assert!(back.relative_error(&x) < 1e-13, "{}", m.kind());
        }
    }

    #[test]
    fn dft_fft_matches_dense_matrix() {
        let x = sample(3, 2, 8);
        let m = Transform::dft(8);
        let fast = m.forward(&x).unwrap();
        let dense = dense_mode3(&x.to_complex(), m.matrix());
        assert!(fast.max_abs_diff(&dense) < 1e-10);
        let back = m.inverse(&fast).unwrap();
        assert!(back.real_part().relative_error(&x) < 1e-14);
    }

    #[test]
    fn block_dft_fft_matches_dense_matrix() {
        let x = sample(2, 3, 12);
        let m = Transform::block_dft(12, 4).unwrap();
        let dense = dense_mode3(&x.to_complex(), m.matrix());
        assert!(m.forward(&x).unwrap().max_abs_diff(&dense) < 1e-10);
        assert_eq!(m.scale_c(), 4.0);
        assert_eq!(m.partner(5), Some(7));
        assert_eq!(m.partner(4), Some(4));
    }

    #[test]
    fn scale_constants() {
        assert_eq!(Transform::dft(6).scale_c(), 6.0);
        assert_eq!(Transform::identity(6).scale_c(), 1.0);
        assert!((Transform::dct(6).scale_c() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dft_partners_mirror_frequencies() {
        let m = Transform::dft(5);
        let partners: Vec<_> = (0..5).map(|t| m.partner(t).unwrap()).collect();
        assert_eq!(partners, vec![0, 4, 3, 2, 1]);
    }

    #[test]
    fn rejects_non_scaled_unitary() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]).map(|v| Complex64::new(v, 0.0));
        assert!(matches!(Transform::custom(m), Err(Error::InvalidTransform(_))));
        assert!(Transform::block_dft(10, 4).is_err());
    }

    #[test]
    fn dft_identity_tensor_is_first_slice_identity() {
        let m = Transform::dft(4);
        let id = m.identity_tensor_real(3).unwrap();
        assert_eq!(id.slice(0), DMatrix::identity(3, 3));
        assert!(id.slice(2).norm() < 1e-15);
    }

    #[test]
    fn alignment() {
        assert!(Transform::identity(8).is_aligned_with(2));
        assert!(Transform::block_dft(8, 2).unwrap().is_aligned_with(4));
        assert!(!Transform::block_dft(8, 4).unwrap().is_aligned_with(2));
        assert!(!Transform::dft(8).is_aligned_with(4));
        assert!(Transform::dft(8).is_aligned_with(8));
    }
}
