//! Hermitian positive definite solves: conjugate gradient, with a direct
//! Cholesky path for small systems.

use nalgebra::{Cholesky, DMatrix, Dyn};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tensor::Scalar;

/// Systems up to this size are factored directly instead of iterated.
pub const DIRECT_SOLVE_MAX: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    /// Relative residual target `||b - A x|| <= tol * ||b||`, per column.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Auto,
    Direct,
    ConjugateGradient,
}

/// Conjugate gradient on every column of `b`. Returns the solution and the
/// largest iteration count used by any column.
pub fn conjugate_gradient<S: Scalar>(
    a: &DMatrix<S>,
    b: &DMatrix<S>,
    x0: Option<&DMatrix<S>>,
    opts: CgOptions,
) -> Result<(DMatrix<S>, usize)> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(Error::dims(format!(
            "CG system {:?} with right-hand side {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let mut x = match x0 {
        Some(x0) if x0.shape() == b.shape() => x0.clone(),
        _ => DMatrix::zeros(n, b.ncols()),
    };
    let mut worst_iters = 0;
    for c in 0..b.ncols() {
        let rhs = b.column(c);
        let bnorm = rhs.norm();
        if bnorm == 0.0 {
            x.column_mut(c).fill(S::zero());
            continue;
        }
        let mut xc = x.column(c).into_owned();
        let mut r = rhs - a * &xc;
        let mut p = r.clone();
        let mut rr = r.norm_squared();
        let mut iters = 0;
        while rr.sqrt() > opts.tol * bnorm {
            if iters == opts.max_iter {
                return Err(Error::CgNotConverged {
                    iterations: iters,
                    residual: rr.sqrt() / bnorm,
                });
            }
            let ap = a * &p;
            let pap = p.dotc(&ap).real();
            if !(pap > 0.0) {
                return Err(Error::Numerical(
                    "CG met a non-positive curvature direction".into(),
                ));
            }
            let alpha = S::from_real(rr / pap);
            xc.axpy(alpha, &p, S::one());
            r.axpy(-alpha, &ap, S::one());
            let rr_new = r.norm_squared();
            let beta = S::from_real(rr_new / rr);
            p = &r + p * beta;
            rr = rr_new;
            iters += 1;
        }
        worst_iters = worst_iters.max(iters);
        x.set_column(c, &xc);
    }
    Ok((x, worst_iters))
}

/// A prepared solver for a fixed Hermitian positive definite matrix.
pub enum SpdSolver<S: Scalar> {
    Direct(Cholesky<S, Dyn>),
    Iterative { matrix: DMatrix<S>, opts: CgOptions },
}

impl<S: Scalar> SpdSolver<S> {
    pub fn new(matrix: DMatrix<S>, method: SolveMethod, opts: CgOptions) -> Result<Self> {
        let direct = match method {
            SolveMethod::Auto => matrix.nrows() <= DIRECT_SOLVE_MAX,
            SolveMethod::Direct => true,
            SolveMethod::ConjugateGradient => false,
        };
        if direct {
            let chol = matrix
                .cholesky()
                .ok_or_else(|| Error::Numerical("matrix is not positive definite".into()))?;
            Ok(SpdSolver::Direct(chol))
        } else {
            Ok(SpdSolver::Iterative { matrix, opts })
        }
    }

    pub fn is_direct(&self) -> bool {
        matches!(self, SpdSolver::Direct(_))
    }

    /// Solves `A X = b`; `warm` seeds the iterative path.
    pub fn solve(&self, b: &DMatrix<S>, warm: Option<&DMatrix<S>>) -> Result<DMatrix<S>> {
        match self {
            SpdSolver::Direct(chol) => Ok(chol.solve(b)),
            SpdSolver::Iterative { matrix, opts } => {
                conjugate_gradient(matrix, b, warm, *opts).map(|(x, _)| x)
            }
        }
    }

    pub fn with_max_iter(self, max_iter: usize) -> Self {
        match self {
            SpdSolver::Iterative { matrix, opts } => SpdSolver::Iterative {
                matrix,
                opts: CgOptions { max_iter, ..opts },
            },
            direct => direct,
        }
    }
}

/// Thin SVD `A = U diag(σ) Vᴴ` of a complex matrix.
#[derive(Debug, Clone)]
pub struct ComplexSvd {
    pub u: DMatrix<Complex64>,
    /// Descending.
    pub sigma: Vec<f64>,
    pub v: DMatrix<Complex64>,
}

impl ComplexSvd {
    pub fn recompose(&self) -> DMatrix<Complex64> {
        let mut us = self.u.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.adjoint()
    }
}

/// One-sided Jacobi SVD. Slower than bidiagonalization but accurate to
/// working precision on rank-deficient input. Singular vectors on the short
/// side that belong to zero singular values are left as zero columns.
pub fn jacobi_svd(a: &DMatrix<Complex64>) -> ComplexSvd {
    if a.nrows() < a.ncols() {
        let t = jacobi_svd(&a.adjoint());
        return ComplexSvd { u: t.v, sigma: t.sigma, v: t.u };
    }
    let n = a.ncols();
    let mut w = a.clone();
    let mut v = DMatrix::<Complex64>::identity(n, n);
    let eps = f64::EPSILON;
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dotc(&w.column(q));
                let g = gamma.norm();
                if g == 0.0 || g <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = (gamma / g).conj();
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut w, &mut v] {
                    for i in 0..mat.nrows() {
                        let xp = mat[(i, p)];
                        let xq = mat[(i, q)] * phase;
                        mat[(i, p)] = xp * c - xq * s;
                        mat[(i, q)] = xp * s + xq * c;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let floor = norms.iter().cloned().fold(0.0, f64::max) * eps * (a.nrows() as f64);
    let mut u = DMatrix::zeros(a.nrows(), n);
    let mut vs = DMatrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    for (k, &j) in order.iter().enumerate() {
        sigma.push(norms[j]);
        if norms[j] > floor {
            u.set_column(k, &(w.column(j) / Complex64::from(norms[j])));
        }
        vs.set_column(k, &v.column(j));
    }
    ComplexSvd { u, sigma, v: vs }
}
