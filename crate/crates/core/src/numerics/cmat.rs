use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64 as C64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Dense square complex matrix stored row-major on the stack.
///
/// Only `N = 2` (a single qubit) and `N = 4` (system ⊗ ancilla) are used in
/// this crate; see [`CMat2`] and [`CMat4`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CMat<const N: usize> {
    data: [[C64; N]; N],
}

/// Complex column vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CVec<const N: usize> {
    data: [C64; N],
}

pub type CMat2 = CMat<2>;
pub type CMat4 = CMat<4>;
pub type CVec2 = CVec<2>;
pub type CVec4 = CVec<4>;

impl<const N: usize> CMat<N> {
    pub const DIM: usize = N;

    pub fn zeros() -> Self {
        Self { data: [[ZERO; N]; N] }
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            m.data[i][i] = ONE;
        }
        m
    }

    pub fn from_rows(data: [[C64; N]; N]) -> Self {
        Self { data }
    }

    pub fn from_real_rows(rows: [[f64; N]; N]) -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            for j in 0..N {
                m.data[i][j] = C64::new(rows[i][j], 0.0);
            }
        }
        m
    }

    pub fn diag(d: [C64; N]) -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            m.data[i][i] = d[i];
        }
        m
    }

    pub fn diag_real(d: [f64; N]) -> Self {
        Self::diag(d.map(|x| C64::new(x, 0.0)))
    }

    pub fn scalar(s: C64) -> Self {
        Self::diag([s; N])
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(cols: [CVec<N>; N]) -> Self {
        let mut m = Self::zeros();
        for (j, c) in cols.iter().enumerate() {
            for i in 0..N {
                m.data[i][j] = c[i];
            }
        }
        m
    }

    pub fn column(&self, j: usize) -> CVec<N> {
        let mut v = CVec::zeros();
        for i in 0..N {
            v[i] = self.data[i][j];
        }
        v
    }

    pub fn rows(&self) -> &[[C64; N]; N] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            for j in 0..N {
                m.data[j][i] = self.data[i][j].conj();
            }
        }
        m
    }

    pub fn trace(&self) -> C64 {
        (0..N).map(|i| self.data[i][i]).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut m = *self;
        m.data.iter_mut().flatten().for_each(|x| *x *= s);
        m
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().flatten().map(|x| x.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().flatten().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `max |M - M†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..N {
            for j in i..N {
                worst = worst.max((self.data[i][j] - self.data[j][i].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        self.hermiticity_defect() <= rel_tol * self.max_abs().max(f64::MIN_POSITIVE)
    }

    /// `(M + M†)/2`.
    pub fn hermitian_part(&self) -> Self {
        (*self + self.adjoint()).scale_re(0.5)
    }

    pub fn commutator(&self, rhs: &Self) -> Self {
        *self * *rhs - *rhs * *self
    }

    pub fn to_flat(&self) -> Vec<C64> {
        self.data.iter().flatten().copied().collect()
    }

    pub fn from_flat(flat: &[C64]) -> Self {
        assert_eq!(flat.len(), N * N, "flat matrix length mismatch");
        let mut m = Self::zeros();
        for i in 0..N {
            for j in 0..N {
                m.data[i][j] = flat[i * N + j];
            }
        }
        m
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        let mut m = *self;
        m.data.iter_mut().flatten().for_each(|x| *x = f(*x));
        m
    }
}

impl CMat2 {
    pub fn det(&self) -> C64 {
        self.data[0][0] * self.data[1][1] - self.data[0][1] * self.data[1][0]
    }

    /// Kronecker product `self ⊗ rhs` with `self` as the left (system) factor.
    pub fn kron(&self, rhs: &CMat2) -> CMat4 {
        let mut out = CMat4::zeros();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        out[(2 * i + k, 2 * j + l)] = self.data[i][j] * rhs.data[k][l];
                    }
                }
            }
        }
        out
    }
}

impl<const N: usize> Default for CMat<N> {
    fn default() -> Self {
        Self::zeros()
    }
}

impl<const N: usize> Index<(usize, usize)> for CMat<N> {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i][j]
    }
}

impl<const N: usize> IndexMut<(usize, usize)> for CMat<N> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i][j]
    }
}

impl<const N: usize> Add for CMat<N> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for i in 0..N {
            for j in 0..N {
                self.data[i][j] += rhs.data[i][j];
            }
        }
        self
    }
}

impl<const N: usize> AddAssign for CMat<N> {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<const N: usize> Sub for CMat<N> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for i in 0..N {
            for j in 0..N {
                self.data[i][j] -= rhs.data[i][j];
            }
        }
        self
    }
}

impl<const N: usize> Neg for CMat<N> {
    type Output = Self;
    fn neg(self) -> Self {
        self.map(|x| -x)
    }
}

impl<const N: usize> Mul for CMat<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::zeros();
        for i in 0..N {
            for k in 0..N {
                let a = self.data[i][k];
                if a == ZERO {
                    continue;
                }
                for j in 0..N {
                    out.data[i][j] += a * rhs.data[k][j];
                }
            }
        }
        out
    }
}

impl<const N: usize> Mul<CVec<N>> for CMat<N> {
    type Output = CVec<N>;
    fn mul(self, v: CVec<N>) -> CVec<N> {
        let mut out = CVec::zeros();
        for i in 0..N {
            out[i] = (0..N).map(|j| self.data[i][j] * v[j]).sum();
        }
        out
    }
}

impl<const N: usize> Mul<C64> for CMat<N> {
    type Output = Self;
    fn mul(self, s: C64) -> Self {
        self.scale(s)
    }
}

impl<const N: usize> Mul<f64> for CMat<N> {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        self.scale_re(s)
    }
}

impl<const N: usize> CVec<N> {
    pub fn zeros() -> Self {
        Self { data: [ZERO; N] }
    }

    pub fn new(data: [C64; N]) -> Self {
        Self { data }
    }

    pub fn basis(k: usize) -> Self {
        let mut v = Self::zeros();
        v.data[k] = ONE;
        v
    }

    pub fn as_array(&self) -> &[C64; N] {
        &self.data
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn from_slice(s: &[C64]) -> Self {
        let mut v = Self::zeros();
        v.data.copy_from_slice(&s[..N]);
        v
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Unit-norm copy; a zero vector is returned unchanged.
    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            *self
        } else {
            self.scale_re(1.0 / n)
        }
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }

    /// `⟨self|other⟩`, antilinear in `self`.
    pub fn inner(&self, other: &Self) -> C64 {
        self.data.iter().zip(other.data.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { data: self.data.map(|x| x * s) }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn conj(&self) -> Self {
        Self { data: self.data.map(|x| x.conj()) }
    }

    /// `|self⟩⟨other|`.
    pub fn outer(&self, other: &Self) -> CMat<N> {
        let mut m = CMat::zeros();
        for i in 0..N {
            for j in 0..N {
                m[(i, j)] = self.data[i] * other.data[j].conj();
            }
        }
        m
    }

    /// `|⟨a|b⟩|²` for normalized inputs; invariant under global phase.
    pub fn fidelity(&self, other: &Self) -> f64 {
        let n = self.norm_sqr() * other.norm_sqr();
        if n == 0.0 {
            0.0
        } else {
            self.inner(other).norm_sqr() / n
        }
    }
}

impl CVec2 {
    pub fn kron(&self, rhs: &CVec2) -> CVec4 {
        let mut out = CVec4::zeros();
        for i in 0..2 {
            for k in 0..2 {
                out[2 * i + k] = self.data[i] * rhs.data[k];
            }
        }
        out
    }
}

impl<const N: usize> Default for CVec<N> {
    fn default() -> Self {
        Self::zeros()
    }
}

impl<const N: usize> Index<usize> for CVec<N> {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.data[i]
    }
}

impl<const N: usize> IndexMut<usize> for CVec<N> {
    fn index_mut(&mut self, i: usize) -> &mut C64 {
        &mut self.data[i]
    }
}

impl<const N: usize> Add for CVec<N> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for i in 0..N {
            self.data[i] += rhs.data[i];
        }
        self
    }
}

impl<const N: usize> Sub for CVec<N> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for i in 0..N {
            self.data[i] -= rhs.data[i];
        }
        self
    }
}

/// Pauli operators `σ0 = I, σx, σy, σz`.
pub fn pauli(i: usize) -> CMat2 {
    match i {
        0 => CMat2::identity(),
        1 => CMat2::from_rows([[ZERO, ONE], [ONE, ZERO]]),
        2 => CMat2::from_rows([[ZERO, -I], [I, ZERO]]),
        3 => CMat2::from_rows([[ONE, ZERO], [ZERO, -ONE]]),
        _ => panic!("pauli index {i} out of range"),
    }
}
