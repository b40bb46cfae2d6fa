//! Eigensolvers, matrix square roots and the Sylvester solve used by the
//! dilation.
//!
//! The 2×2 routines are closed form and keep *relative* accuracy on the small
//! eigenvalue (it is recovered from the determinant instead of by
//! subtraction), which matters once metric operators become ill-conditioned.
//! The 4×4 Hermitian solver delegates to nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;

use super::cmat::{CMat, CMat2, CVec, CVec2, ONE, ZERO};
use crate::error::{Error, Result};

/// Discriminant magnitude below which a 2×2 eigenproblem is treated as
/// degenerate (relative to `max(1, max|m|)`).
pub const DEFECT_TOL: f64 = 1e-12;
/// Relative Hermiticity defect tolerated on inputs to the Hermitian routines.
pub const HERMITIAN_TOL: f64 = 1e-9;
/// Negative eigenvalues above `-PSD_CLAMP` are clamped to zero.
pub const PSD_CLAMP: f64 = 1e-10;
/// Eigenvalues below `-PSD_REJECT` make a matrix "not PSD".
pub const PSD_REJECT: f64 = 1e-8;
/// Smallest eigenvalue of eta accepted by [`sylvester_solve`].
pub const ETA_MIN: f64 = 1e-6;
/// Relative determinant threshold of [`inv2`].
pub const SINGULAR_DET: f64 = 1e-14;

/// Spectrum of a general (non-normal) 2×2 matrix.
#[derive(Clone, Copy, Debug)]
pub struct GeneralEigen {
    pub values: [C64; 2],
    pub vectors: [CVec2; 2],
    /// Set when the discriminant vanishes. At a defective point both slots
    /// hold the same coalesced eigenvector.
    pub degenerate: bool,
}

/// Real spectrum (ascending) and orthonormal eigenvectors (columns).
#[derive(Clone, Copy, Debug)]
pub struct HermEigen<const N: usize> {
    pub values: [f64; N],
    pub vectors: CMat<N>,
}

impl<const N: usize> HermEigen<N> {
    /// `V · diag(f(λ)) · V†`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> CMat<N> {
        let d = CMat::<N>::diag_real(self.values.map(f));
        self.vectors * d * self.vectors.adjoint()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }
}

fn scale_of<const N: usize>(m: &CMat<N>) -> f64 {
    m.max_abs().max(1.0)
}

/// Eigenvector of a 2×2 matrix for eigenvalue `lambda`, picked from the two
/// rows of `m - lambda I` so that the larger candidate is used.
fn eigvec2(m: &CMat2, lambda: C64) -> CVec2 {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let u = CVec2::new([b, lambda - a]);
    let w = CVec2::new([lambda - d, c]);
    let v = if u.norm_sqr() >= w.norm_sqr() { u } else { w };
    if v.norm_sqr() == 0.0 {
        CVec2::basis(0)
    } else {
        v.normalized()
    }
}

/// Eigen-decomposition of an arbitrary complex 2×2 matrix.
pub fn eig_general(m: &CMat2) -> GeneralEigen {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let half_tr = (a + d) * 0.5;
    let half_diff = (a - d) * 0.5;
    let s = (half_diff * half_diff + b * c).sqrt();
    let tol = DEFECT_TOL * scale_of(m);

    if s.norm() < tol {
        let lambda = half_tr;
        let shifted = *m - CMat2::scalar(lambda);
        let vectors = if shifted.max_abs() < tol {
            [CVec2::basis(0), CVec2::basis(1)]
        } else {
            let v = eigvec2(m, lambda);
            [v, v]
        };
        return GeneralEigen { values: [lambda, lambda], vectors, degenerate: true };
    }

    let (mut hi, mut lo) = (half_tr + s, half_tr - s);
    let det = m.det();
    if hi.norm() >= lo.norm() {
        if hi.norm() > 0.0 {
            lo = det / hi;
        }
    } else {
        hi = det / lo;
    }
    GeneralEigen {
        values: [hi, lo],
        vectors: [eigvec2(m, hi), eigvec2(m, lo)],
        degenerate: false,
    }
}

fn herm_eig2(m: &CMat2) -> HermEigen<2> {
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let c = (m[(0, 1)] + m[(1, 0)].conj()) * 0.5;
    if c == ZERO {
        return if a <= d {
            HermEigen { values: [a, d], vectors: CMat2::identity() }
        } else {
            HermEigen {
                values: [d, a],
                vectors: CMat2::from_columns([CVec2::basis(1), CVec2::basis(0)]),
            }
        };
    }
    let mean = 0.5 * (a + d);
    let r = (0.5 * (a - d)).hypot(c.norm());
    let det = a * d - c.norm_sqr();
    let (hi, lo) = if mean >= 0.0 {
        let hi = mean + r;
        (hi, det / hi)
    } else {
        let lo = mean - r;
        (det / lo, lo)
    };
    // Eigenvector of the better-separated (larger magnitude) eigenvalue,
    // the other one by orthogonality.
    let (anchor, anchor_is_hi) = if hi.abs() >= lo.abs() { (hi, true) } else { (lo, false) };
    let u = CVec2::new([c, C64::new(anchor - a, 0.0)]);
    let w = CVec2::new([C64::new(anchor - d, 0.0), c.conj()]);
    let v = if u.norm_sqr() >= w.norm_sqr() { u } else { w }.normalized();
    let perp = CVec2::new([-v[1].conj(), v[0].conj()]);
    let (v_lo, v_hi) = if anchor_is_hi { (perp, v) } else { (v, perp) };
    HermEigen { values: [lo, hi], vectors: CMat2::from_columns([v_lo, v_hi]) }
}

fn herm_eig_dense<const N: usize>(m: &CMat<N>) -> HermEigen<N> {
    let dm = DMatrix::<C64>::from_fn(N, N, |i, j| m[(i, j)]);
    let eig = SymmetricEigen::new(dm);
    let mut order: Vec<usize> = (0..N).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let mut values = [0.0; N];
    let mut vectors = CMat::<N>::zeros();
    for (k, &src) in order.iter().enumerate() {
        values[k] = eig.eigenvalues[src];
        for i in 0..N {
            vectors[(i, k)] = eig.eigenvectors[(i, src)];
        }
    }
    HermEigen { values, vectors }
}

/// Spectral decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn herm_eig<const N: usize>(m: &CMat<N>) -> Result<HermEigen<N>> {
    let defect = m.hermiticity_defect();
    if defect > HERMITIAN_TOL * scale_of(m) {
        return Err(Error::NonHermitianInput { defect });
    }
    let h = m.hermitian_part();
    Ok(if N == 2 {
        let mut h2 = CMat2::zeros();
        for i in 0..2 {
            for j in 0..2 {
                h2[(i, j)] = h[(i, j)];
            }
        }
        let e = herm_eig2(&h2);
        let mut values = [0.0; N];
        let mut vectors = CMat::<N>::zeros();
        for i in 0..2 {
            values[i] = e.values[i];
            for j in 0..2 {
                vectors[(i, j)] = e.vectors[(i, j)];
            }
        }
        HermEigen { values, vectors }
    } else {
        herm_eig_dense(&h)
    })
}

/// Principal square root of a Hermitian positive semidefinite matrix.
///
/// Eigenvalues in `[-PSD_CLAMP, 0)` are clamped to zero.
pub fn psd_sqrt<const N: usize>(m: &CMat<N>) -> Result<CMat<N>> {
    let eig = herm_eig(m)?;
    let floor = eig.min();
    if floor < -PSD_REJECT * scale_of(m) {
        return Err(Error::NotPsd { min_eigenvalue: floor });
    }
    Ok(eig.apply(|x| x.max(0.0).sqrt()).hermitian_part())
}

/// Solves `eta·X + X·eta = rhs` for Hermitian positive definite `eta`.
///
/// Works in the eigenbasis of eta where the solution is elementwise,
/// `X̃ᵢⱼ = r̃ᵢⱼ / (λᵢ + λⱼ)`.
pub fn sylvester_solve<const N: usize>(eta: &CMat<N>, rhs: &CMat<N>) -> Result<CMat<N>> {
    let eig = herm_eig(eta)?;
    if eig.min() < ETA_MIN {
        return Err(Error::SingularEta { min_eigenvalue: eig.min() });
    }
    let v = eig.vectors;
    let mut r = v.adjoint() * *rhs * v;
    for i in 0..N {
        for j in 0..N {
            r[(i, j)] /= eig.values[i] + eig.values[j];
        }
    }
    Ok(v * r * v.adjoint())
}

/// Inverse of a 2×2 matrix via the adjugate.
pub fn inv2(m: &CMat2) -> Result<CMat2> {
    let det = m.det();
    let scale = m.max_abs();
    if det.norm() < SINGULAR_DET * scale * scale || det.norm() == 0.0 {
        return Err(Error::SingularMatrix { det: det.norm() });
    }
    let adj = CMat2::from_rows([[m[(1, 1)], -m[(0, 1)]], [-m[(1, 0)], m[(0, 0)]]]);
    Ok(adj.scale(ONE / det))
}

/// Spectrum of the Gram matrix `X†X` computed without forming its small
/// eigenvalue by cancellation: `λ_small = |det X|² / λ_big`.
///
/// This keeps full relative precision when `X†X` has a condition number far
/// beyond what an entrywise eigensolver could resolve.
pub fn gram_eig2(x: &CMat2) -> HermEigen<2> {
    let p = x.adjoint() * *x;
    let a = p[(0, 0)].re;
    let d = p[(1, 1)].re;
    let c = p[(0, 1)];
    let det = x.det().norm_sqr();
    let r = (0.5 * (a - d)).hypot(c.norm());
    let big = 0.5 * (a + d) + r;
    let small = if big > 0.0 { det / big } else { 0.0 };
    let v = if c == ZERO {
        if a >= d {
            CVec2::basis(0)
        } else {
            CVec2::basis(1)
        }
    } else {
        let u = CVec2::new([c, C64::new(big - a, 0.0)]);
        let w = CVec2::new([C64::new(big - d, 0.0), c.conj()]);
        if u.norm_sqr() >= w.norm_sqr() { u } else { w }.normalized()
    };
    let perp = CVec2::new([-v[1].conj(), v[0].conj()]);
    HermEigen { values: [small, big], vectors: CMat2::from_columns([perp, v]) }
}

/// Residual `‖m v − λ v‖` for an eigenpair.
pub fn eig_residual<const N: usize>(m: &CMat<N>, lambda: C64, v: &CVec<N>) -> f64 {
    (*m * *v - v.scale(lambda)).norm()
}
