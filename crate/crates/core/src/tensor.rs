//! Dense third-order tensors.
//!
//! Storage is column-major per frontal slice with `i1` fastest, then `i2`,
//! then `i3`. Frontal slice `t` therefore occupies one contiguous block of
//! `n1 * n2` scalars laid out exactly like an nalgebra `DMatrix`, and the
//! mode-3 unfolding uses the `(i1, i2)` column order with `i1` fastest.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use nalgebra::{ComplexField, DMatrix, DMatrixView};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Scalars a [`Tensor3`] can hold: `f64` and `Complex64`.
pub trait Scalar:
    ComplexField<RealField = f64> + Copy + Default + fmt::Debug + Send + Sync + 'static
{
    fn to_complex(self) -> Complex64;

    /// Real scalars drop the imaginary part; callers check the residue first.
    fn from_complex(z: Complex64) -> Self;

    fn is_real_type() -> bool;
}

impl Scalar for f64 {
    #[inline]
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }

    #[inline]
    fn from_complex(z: Complex64) -> Self {
        z.re
    }

    fn is_real_type() -> bool {
        true
    }
}

impl Scalar for Complex64 {
    #[inline]
    fn to_complex(self) -> Complex64 {
        self
    }

    #[inline]
    fn from_complex(z: Complex64) -> Self {
        z
    }

    fn is_real_type() -> bool {
        false
    }
}

#[derive(Clone, PartialEq)]
pub struct Tensor3<S = f64> {
    dims: (usize, usize, usize),
    data: Vec<S>,
}

pub type RealTensor = Tensor3<f64>;
pub type ComplexTensor = Tensor3<Complex64>;

impl<S: Scalar> fmt::Debug for Tensor3<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (n1, n2, n3) = self.dims;
        write!(f, "Tensor3({n1}x{n2}x{n3})")?;
        if self.data.len() <= 64 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}

impl<S: Scalar> Tensor3<S> {
    pub fn zeros(n1: usize, n2: usize, n3: usize) -> Self {
        Self {
            dims: (n1, n2, n3),
            data: vec![S::zero(); n1 * n2 * n3],
        }
    }

    pub fn from_vec(n1: usize, n2: usize, n3: usize, data: Vec<S>) -> Result<Self> {
        if data.len() != n1 * n2 * n3 {
            return Err(Error::dims(format!(
                "buffer of length {} cannot hold a {n1}x{n2}x{n3} tensor",
                data.len()
            )));
        }
        Ok(Self {
            dims: (n1, n2, n3),
            data,
        })
    }

    pub fn from_fn(
        n1: usize,
        n2: usize,
        n3: usize,
        mut f: impl FnMut(usize, usize, usize) -> S,
    ) -> Self {
        let mut data = Vec::with_capacity(n1 * n2 * n3);
        for k in 0..n3 {
            for j in 0..n2 {
                for i in 0..n1 {
                    data.push(f(i, j, k));
                }
            }
        }
        Self {
            dims: (n1, n2, n3),
            data,
        }
    }

    /// Builds a tensor whose frontal slices are the given matrices.
    pub fn from_slices(slices: &[DMatrix<S>]) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| Error::dims("cannot build a tensor from zero slices"))?;
        let (n1, n2) = first.shape();
        let mut data = Vec::with_capacity(n1 * n2 * slices.len());
        for (t, s) in slices.iter().enumerate() {
            if s.shape() != (n1, n2) {
                return Err(Error::dims(format!(
                    "slice {t} has shape {:?}, expected {:?}",
                    s.shape(),
                    (n1, n2)
                )));
            }
            data.extend_from_slice(s.as_slice());
        }
        Ok(Self {
            dims: (n1, n2, slices.len()),
            data,
        })
    }

    /// Slice-wise identity: every frontal slice is `I_n`.
    pub fn eye_slices(n: usize, n3: usize) -> Self {
        Self::from_fn(n, n, n3, |i, j, _| if i == j { S::one() } else { S::zero() })
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<S> {
        self.data
    }

    #[inline]
    pub fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        let (n1, n2, _) = self.dims;
        i + n1 * (j + n2 * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> S {
        self.data[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: S) {
        let o = self.offset(i, j, k);
        self.data[o] = v;
    }

    pub fn slice_data(&self, t: usize) -> &[S] {
        let n = self.dims.0 * self.dims.1;
        &self.data[t * n..(t + 1) * n]
    }

    pub fn slice_data_mut(&mut self, t: usize) -> &mut [S] {
        let n = self.dims.0 * self.dims.1;
        &mut self.data[t * n..(t + 1) * n]
    }

    pub fn slice_view(&self, t: usize) -> DMatrixView<'_, S> {
        DMatrixView::from_slice(self.slice_data(t), self.dims.0, self.dims.1)
    }

    /// Frontal slice `t` as an owned matrix.
    pub fn slice(&self, t: usize) -> DMatrix<S> {
        DMatrix::from_column_slice(self.dims.0, self.dims.1, self.slice_data(t))
    }

    pub fn set_slice(&mut self, t: usize, m: &DMatrix<S>) -> Result<()> {
        if m.shape() != (self.dims.0, self.dims.1) {
            return Err(Error::dims(format!(
                "slice of shape {:?} does not fit a {:?} tensor",
                m.shape(),
                self.dims
            )));
        }
        self.slice_data_mut(t).copy_from_slice(m.as_slice());
        Ok(())
    }

    pub fn slices(&self) -> Vec<DMatrix<S>> {
        (0..self.dims.2).map(|t| self.slice(t)).collect()
    }

    /// Tube fiber `X_{ij:}`.
    pub fn tube(&self, i: usize, j: usize) -> Vec<S> {
        (0..self.dims.2).map(|k| self.get(i, j, k)).collect()
    }

    /// Horizontal-slice segment `X_{i:[k]}` for periods `periods`, as an
    /// `n2 x len` row-major list.
    pub fn horizontal_segment(&self, i: usize, periods: std::ops::Range<usize>) -> Vec<S> {
        let mut out = Vec::with_capacity(self.dims.1 * periods.len());
        for j in 0..self.dims.1 {
            for t in periods.clone() {
                out.push(self.get(i, j, t));
            }
        }
        out
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(S) -> T) -> Tensor3<T> {
        Tensor3 {
            dims: self.dims,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(S, S) -> S) -> Result<Self> {
        self.check_same_dims(other)?;
        Ok(Self {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn check_same_dims(&self, other: &Self) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::dims(format!(
                "shapes {:?} and {:?} differ",
                self.dims, other.dims
            )));
        }
        Ok(())
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v.modulus_squared()).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }

    pub fn infinity_norm(&self) -> f64 {
        self.data
            .iter()
            .map(|v| v.modulus_squared())
            .fold(0.0, f64::max)
            .sqrt()
    }

    /// Real inner product `Re sum conj(x) y`; the plain sum for real tensors.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_same_dims(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.conjugate() * *b).real())
            .sum())
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| v.scale(c))
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &Self) -> Result<()> {
        self.check_same_dims(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b.scale(alpha);
        }
        Ok(())
    }

    pub fn to_complex(&self) -> ComplexTensor {
        Tensor3 {
            dims: self.dims,
            data: self.data.iter().map(|v| v.to_complex()).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dims, other.dims, "max_abs_diff on mismatched shapes");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a - *b).modulus())
            .fold(0.0, f64::max)
    }

    /// `||self - other||_F / max(||other||_F, tiny)`
    pub fn relative_error(&self, reference: &Self) -> f64 {
        assert_eq!(self.dims, reference.dims, "relative_error on mismatched shapes");
        let num: f64 = self
            .data
            .iter()
            .zip(&reference.data)
            .map(|(a, b)| (*a - *b).modulus_squared())
            .sum::<f64>()
            .sqrt();
        num / reference.frobenius_norm().max(f64::MIN_POSITIVE)
    }

    /// Swaps the first two modes slice by slice (plain transpose, no conjugation).
    pub fn slice_transpose(&self) -> Self {
        let (n1, n2, n3) = self.dims;
        Self::from_fn(n2, n1, n3, |i, j, k| self.get(j, i, k))
    }

    /// Applies a permutation to mode 1: `out[perm[i], :, :] = self[i, :, :]`.
    pub fn permute_mode1(&self, perm: &[usize]) -> Result<Self> {
        let (n1, n2, n3) = self.dims;
        if perm.len() != n1 {
            return Err(Error::dims("permutation length differs from mode-1 size"));
        }
        let mut out = Self::zeros(n1, n2, n3);
        for k in 0..n3 {
            for j in 0..n2 {
                for (i, &p) in perm.iter().enumerate() {
                    out.set(p, j, k, self.get(i, j, k));
                }
            }
        }
        Ok(out)
    }
}

impl ComplexTensor {
    pub fn real_part(&self) -> RealTensor {
        self.map(|z| z.re)
    }

    /// Largest `|imag|` relative to the largest modulus (0 for a zero tensor).
    pub fn imaginary_residue(&self) -> f64 {
        let scale = self.infinity_norm();
        if scale == 0.0 {
            return 0.0;
        }
        self.data.iter().fold(0.0, |m: f64, z| m.max(z.im.abs())) / scale
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }
}

impl<S: Scalar> Index<(usize, usize, usize)> for Tensor3<S> {
    type Output = S;

    fn index(&self, (i, j, k): (usize, usize, usize)) -> &S {
        &self.data[self.offset(i, j, k)]
    }
}

impl<S: Scalar> IndexMut<(usize, usize, usize)> for Tensor3<S> {
    fn index_mut(&mut self, (i, j, k): (usize, usize, usize)) -> &mut S {
        let o = self.offset(i, j, k);
        &mut self.data[o]
    }
}

// Arithmetic on references panics on shape mismatch, like nalgebra's operators.
impl<S: Scalar> Add for &Tensor3<S> {
    type Output = Tensor3<S>;

    fn add(self, rhs: Self) -> Tensor3<S> {
        self.zip_map(rhs, |a, b| a + b).expect("tensor add: shape mismatch")
    }
}

impl<S: Scalar> Sub for &Tensor3<S> {
    type Output = Tensor3<S>;

    fn sub(self, rhs: Self) -> Tensor3<S> {
        self.zip_map(rhs, |a, b| a - b).expect("tensor sub: shape mismatch")
    }
}

impl<S: Scalar> Neg for &Tensor3<S> {
    type Output = Tensor3<S>;

    fn neg(self) -> Tensor3<S> {
        self.map(|v| -v)
    }
}

impl<S: Scalar> Mul<f64> for &Tensor3<S> {
    type Output = Tensor3<S>;

    fn mul(self, rhs: f64) -> Tensor3<S> {
        self.scale(rhs)
    }
}

impl<S: Scalar> AddAssign<&Tensor3<S>> for Tensor3<S> {
    fn add_assign(&mut self, rhs: &Tensor3<S>) {
        self.axpy(1.0, rhs).expect("tensor add_assign: shape mismatch");
    }
}

impl<S: Scalar> SubAssign<&Tensor3<S>> for Tensor3<S> {
    fn sub_assign(&mut self, rhs: &Tensor3<S>) {
        self.axpy(-1.0, rhs).expect("tensor sub_assign: shape mismatch");
    }
}
