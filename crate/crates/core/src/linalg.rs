//! Small dense linear algebra: 2-vectors, 2×2 matrices, complex matrices,
//! a Hermitian Jacobi eigensolver and a radix-2 FFT.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2<S> {
    pub x: S,
    pub y: S,
}

impl<S: Scalar> Vec2<S> {
    pub fn new(x: S, y: S) -> Self {
        Self { x, y }
    }

    pub fn zero() -> Self {
        Self::new(S::zero(), S::zero())
    }

    pub fn dot(self, other: Self) -> S {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> S {
        self.x.hypot(self.y)
    }

    pub fn scale(self, k: S) -> Self {
        Self::new(self.x * k, self.y * k)
    }

    /// Counter-clockwise rotation by `angle` radians.
    pub fn rotate(self, angle: S) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn cast<T: Scalar>(self) -> Vec2<T> {
        Vec2::new(T::of(self.x.f64()), T::of(self.y.f64()))
    }
}

impl<S: Scalar> Add for Vec2<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<S: Scalar> Sub for Vec2<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<S: Scalar> Neg for Vec2<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// Row-major 2×2 matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Mat2<S> {
    pub m: [[S; 2]; 2],
}

impl<S: Scalar> Mat2<S> {
    pub fn new(a: S, b: S, c: S, d: S) -> Self {
        Self {
            m: [[a, b], [c, d]],
        }
    }

    pub fn diag(a: S, d: S) -> Self {
        Self::new(a, S::zero(), S::zero(), d)
    }

    pub fn identity() -> Self {
        Self::diag(S::one(), S::one())
    }

    pub fn zero() -> Self {
        Self::diag(S::zero(), S::zero())
    }

    pub fn from_rows(r0: Vec2<S>, r1: Vec2<S>) -> Self {
        Self::new(r0.x, r0.y, r1.x, r1.y)
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.m[0][0], self.m[1][0], self.m[0][1], self.m[1][1])
    }

    pub fn det(&self) -> S {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn trace(&self) -> S {
        self.m[0][0] + self.m[1][1]
    }

    pub fn scale(&self, k: S) -> Self {
        Self::new(
            self.m[0][0] * k,
            self.m[0][1] * k,
            self.m[1][0] * k,
            self.m[1][1] * k,
        )
    }

    /// Inverse via the adjugate; `None` when the determinant is zero or not finite.
    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det == S::zero() || !det.is_finite() {
            return None;
        }
        let inv =
            Self::new(self.m[1][1], -self.m[0][1], -self.m[1][0], self.m[0][0]).scale(det.recip());
        inv.is_finite().then_some(inv)
    }

    /// Least-squares operator `(BᵀB)⁻¹Bᵀ`. For a square full-rank `B` this is
    /// exactly `B⁻¹`, which is what gets evaluated: forming `BᵀB` would square
    /// the condition number of systems that mix seconds and radians.
    pub fn least_squares_operator(&self) -> Option<Self> {
        self.inverse()
    }

    pub fn mul_vec(&self, v: Vec2<S>) -> Vec2<S> {
        Vec2::new(
            self.m[0][0] * v.x + self.m[0][1] * v.y,
            self.m[1][0] * v.x + self.m[1][1] * v.y,
        )
    }

    /// `self · other · selfᵀ`.
    pub fn sandwich(&self, other: &Self) -> Self {
        (*self * *other * self.transpose()).symmetrize()
    }

    pub fn symmetrize(&self) -> Self {
        let off = (self.m[0][1] + self.m[1][0]) * S::half();
        Self::new(self.m[0][0], off, off, self.m[1][1])
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|v| v.is_finite())
    }

    /// Symmetric positive definite test via the 2×2 Cholesky pivots.
    pub fn is_spd(&self) -> bool {
        let a = self.m[0][0];
        if !(a > S::zero()) || !self.is_finite() {
            return false;
        }
        let l10 = self.m[1][0] / a.sqrt();
        self.m[1][1] - l10 * l10 > S::zero()
            && (self.m[0][1] - self.m[1][0]).abs() <= S::of(1e-9) * (a + self.m[1][1]).abs()
    }

    pub fn cast<T: Scalar>(&self) -> Mat2<T> {
        Mat2::new(
            T::of(self.m[0][0].f64()),
            T::of(self.m[0][1].f64()),
            T::of(self.m[1][0].f64()),
            T::of(self.m[1][1].f64()),
        )
    }
}

impl<S: Scalar> Add for Mat2<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(
            self.m[0][0] + o.m[0][0],
            self.m[0][1] + o.m[0][1],
            self.m[1][0] + o.m[1][0],
            self.m[1][1] + o.m[1][1],
        )
    }
}

impl<S: Scalar> Sub for Mat2<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + o.scale(-S::one())
    }
}

impl<S: Scalar> Mul for Mat2<S> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let a = &self.m;
        let b = &o.m;
        Self::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

/// Log of the bivariate normal density `N(x | mean, cov)`; `None` if `cov`
/// is not invertible with a positive determinant.
pub fn gaussian_log_density<S: Scalar>(x: Vec2<S>, mean: Vec2<S>, cov: &Mat2<S>) -> Option<S> {
    let det = cov.det();
    if !(det > S::zero()) {
        return None;
    }
    let inv = cov.inverse()?;
    let d = x - mean;
    let maha = d.dot(inv.mul_vec(d));
    Some(-S::half() * maha - (S::TAU() * det.sqrt()).ln())
}

/// Product of two Gaussians `N(μa, Σa)·N(μb, Σb)` up to normalization.
///
/// Evaluated as `μ = Σb (Σa+Σb)⁻¹ μa + Σa (Σa+Σb)⁻¹ μb` and `Σ = Σa (Σa+Σb)⁻¹ Σb`,
/// which equals `(Σa⁻¹ + Σb⁻¹)⁻¹` whenever both inverses exist but stays
/// defined when one factor is degenerate (a noiseless measurement).
pub fn fuse_gaussians<S: Scalar>(
    mean_a: Vec2<S>,
    cov_a: &Mat2<S>,
    mean_b: Vec2<S>,
    cov_b: &Mat2<S>,
) -> Option<(Vec2<S>, Mat2<S>)> {
    let sum_inv = (*cov_a + *cov_b).inverse()?;
    let mean = (*cov_b * sum_inv).mul_vec(mean_a) + (*cov_a * sum_inv).mul_vec(mean_b);
    let cov = (*cov_a * sum_inv * *cov_b).symmetrize();
    (mean.x.is_finite() && mean.y.is_finite() && cov.is_finite()).then_some((mean, cov))
}

/// Dense row-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<S>>,
}

impl<S: Scalar> CMatrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::new(S::zero(), S::zero()); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::new(S::one(), S::zero());
        }
        m
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> Complex<S>,
    ) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m[(r, c)] = f(r, c);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[Complex<S>] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<Complex<S>> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                for c in 0..other.cols {
                    out[(r, c)] = out[(r, c)] + a * other[(k, c)];
                }
            }
        }
        out
    }

    pub fn scale(&self, k: Complex<S>) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * k).collect(),
        }
    }

    pub fn trace(&self) -> Complex<S> {
        (0..self.rows.min(self.cols)).fold(Complex::new(S::zero(), S::zero()), |acc, i| {
            acc + self[(i, i)]
        })
    }

    /// Largest absolute deviation from Hermitian symmetry.
    pub fn hermitian_defect(&self) -> S {
        let mut worst = S::zero();
        for r in 0..self.rows {
            for c in 0..self.cols {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &Self) -> S {
        self.data
            .iter()
            .zip(&other.data)
            .fold(S::zero(), |acc, (a, b)| acc.max((*a - *b).norm()))
    }

    fn frobenius_sq(&self) -> S {
        self.data
            .iter()
            .fold(S::zero(), |acc, v| acc + v.norm_sqr())
    }
}

impl<S> Index<(usize, usize)> for CMatrix<S> {
    type Output = Complex<S>;
    fn index(&self, (r, c): (usize, usize)) -> &Complex<S> {
        &self.data[r * self.cols + c]
    }
}

impl<S> IndexMut<(usize, usize)> for CMatrix<S> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex<S> {
        &mut self.data[r * self.cols + c]
    }
}

/// Eigen-decomposition of a Hermitian matrix by cyclic complex Jacobi
/// rotations. Eigenvalues are returned in decreasing order; column `k` of the
/// returned matrix is the unit eigenvector for eigenvalue `k`.
pub fn hermitian_eigen<S: Scalar>(a: &CMatrix<S>) -> Result<(Vec<S>, CMatrix<S>)> {
    let n = a.rows();
    if n != a.cols() {
        return Err(Error::Numerical(
            "eigen-decomposition of a non-square matrix".into(),
        ));
    }
    let mut m = a.clone();
    let mut v = CMatrix::identity(n);
    let total = m.frobenius_sq();
    if !total.is_finite() {
        return Err(Error::Numerical(
            "non-finite matrix passed to eigensolver".into(),
        ));
    }
    let tol = S::eps() * S::eps() * total;
    let zero = Complex::new(S::zero(), S::zero());

    let mut converged = n < 2;
    for _sweep in 0..64 {
        let off: S = (0..n)
            .flat_map(|r| (0..n).filter(move |&c| c != r).map(move |c| (r, c)))
            .fold(S::zero(), |acc, (r, c)| acc + m[(r, c)].norm_sqr());
        if off <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let h = m[(p, q)];
                let r = h.norm();
                if r == S::zero() {
                    continue;
                }
                let phase = h.scale(r.recip());
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let tau = (aqq - app) / (S::two() * r);
                let t = if tau >= S::zero() {
                    (tau + (S::one() + tau * tau).sqrt()).recip()
                } else {
                    -(-tau + (S::one() + tau * tau).sqrt()).recip()
                };
                let c = (S::one() + t * t).sqrt().recip();
                let s = t * c;
                // U = D·G with D = diag(1, conj(phase)), G = [[c, s], [-s, c]]
                let u_pp = Complex::new(c, S::zero());
                let u_pq = Complex::new(s, S::zero());
                let u_qp = phase.conj().scale(-s);
                let u_qq = phase.conj().scale(c);

                // M ← M·U
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = mkp * u_pp + mkq * u_qp;
                    m[(k, q)] = mkp * u_pq + mkq * u_qq;
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * u_pp + vkq * u_qp;
                    v[(k, q)] = vkp * u_pq + vkq * u_qq;
                }
                // M ← Uᴴ·M
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = u_pp.conj() * mpk + u_qp.conj() * mqk;
                    m[(q, k)] = u_pq.conj() * mpk + u_qq.conj() * mqk;
                }
                m[(p, q)] = zero;
                m[(q, p)] = zero;
            }
        }
    }
    if !converged {
        return Err(Error::Numerical(
            "Jacobi eigensolver did not converge".into(),
        ));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[(j, j)]
            .re
            .partial_cmp(&m[(i, i)].re)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| m[(i, i)].re).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok((values, vectors))
}

/// In-place forward DFT `X[k] = Σ x[n] e^{-2πikn/N}`. Radix-2 for power-of-two
/// lengths, direct summation otherwise.
pub fn fft<S: Scalar>(x: &mut [Complex<S>]) {
    let n = x.len();
    if n <= 1 {
        return;
    }
    if !n.is_power_of_two() {
        let out = dft(x);
        x.copy_from_slice(&out);
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            x.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let ang = -S::TAU() / S::of_usize(len);
        for start in (0..n).step_by(len) {
            for k in 0..len / 2 {
                let (s, c) = (ang * S::of_usize(k)).sin_cos();
                let w = Complex::new(c, s);
                let a = x[start + k];
                let b = x[start + k + len / 2] * w;
                x[start + k] = a + b;
                x[start + k + len / 2] = a - b;
            }
        }
        len <<= 1;
    }
}

/// Direct O(N²) forward DFT.
pub fn dft<S: Scalar>(x: &[Complex<S>]) -> Vec<Complex<S>> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .fold(Complex::new(S::zero(), S::zero()), |acc, (j, &v)| {
                    let ang = -S::TAU() * S::of_usize((k * j) % n) / S::of_usize(n);
                    let (s, c) = ang.sin_cos();
                    acc + v * Complex::new(c, s)
                })
        })
        .collect()
}
