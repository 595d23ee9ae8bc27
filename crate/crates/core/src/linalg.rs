//! Dense complex matrices and the kernels built on them: operator norm,
//! Hermitian square root, Jacobi eigensolver, Cayley-based unitary
//! eigensolver and pivoted LU.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;

use crate::error::{CmvError, Result};

pub type C64 = Complex64;

/// Absolute tolerance used when a caller does not supply one.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Pivots smaller than this multiple of the matrix norm count as zero.
const PIVOT_FLOOR: f64 = 1e-13;

const JACOBI_MAX_SWEEPS: usize = 80;
const CAYLEY_ATTEMPTS: usize = 16;

pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Row-major dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for col in 0..self.cols {
                let z = self[(r, col)];
                write!(f, "{:+.6e}{:+.6e}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(CmvError::ShapeMismatch(format!(
                "{} entries for a {}x{} matrix",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::scalar(n, C64::new(1.0, 0.0))
    }

    /// `s` times the n×n identity.
    pub fn scalar(n: usize, s: C64) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = s;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for col in 0..cols {
                data.push(f(r, col));
            }
        }
        Self { rows, cols, data }
    }

    pub fn diag(entries: &[C64]) -> Self {
        let mut m = Self::zeros(entries.len(), entries.len());
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = e;
        }
        m
    }

    pub fn real_diag(entries: &[f64]) -> Self {
        let v: Vec<C64> = entries.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::diag(&v)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, col| self[(col, r)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Self {
        Self::from_fn(nr, nc, |r, col| self[(r0 + r, c0 + col)])
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &ComplexMatrix) {
        for r in 0..b.rows {
            for col in 0..b.cols {
                self[(r0 + r, c0 + col)] = b[(r, col)];
            }
        }
    }

    /// `[[a, b], [c, d]]` assembled from four equally sized blocks.
    pub fn from_blocks(a: &Self, b: &Self, c: &Self, d: &Self) -> Self {
        let (r, cl) = (a.rows, a.cols);
        let mut m = Self::zeros(2 * r, 2 * cl);
        m.set_block(0, 0, a);
        m.set_block(0, cl, b);
        m.set_block(r, 0, c);
        m.set_block(r, cl, d);
        m
    }

    pub fn hstack(a: &Self, b: &Self) -> Self {
        let mut m = Self::zeros(a.rows, a.cols + b.cols);
        m.set_block(0, 0, a);
        m.set_block(0, a.cols, b);
        m
    }

    pub fn vstack(a: &Self, b: &Self) -> Self {
        let mut m = Self::zeros(a.rows + b.rows, a.cols);
        m.set_block(0, 0, a);
        m.set_block(a.rows, 0, b);
        m
    }

    /// Frobenius distance to the Hermitian part.
    pub fn hermitian_defect(&self) -> f64 {
        (self - &self.adjoint()).frobenius_norm()
    }

    /// `(A + A*)/2`.
    pub fn hermitian_part(&self) -> Self {
        (self + &self.adjoint()).scale_re(0.5)
    }

    /// Frobenius norm of `A*A - I`.
    pub fn unitarity_defect(&self) -> f64 {
        (&(&self.adjoint() * self) - &Self::identity(self.cols)).frobenius_norm()
    }

    fn assert_same_shape(&self, other: &Self, op: &str) {
        assert!(
            self.rows == other.rows && self.cols == other.cols,
            "{op}: {}x{} vs {}x{}",
            self.rows,
            self.cols,
            other.rows,
            other.cols
        );
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Add<&ComplexMatrix> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.assert_same_shape(rhs, "add");
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect();
        ComplexMatrix { rows: self.rows, cols: self.cols, data }
    }
}

impl Sub<&ComplexMatrix> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.assert_same_shape(rhs, "sub");
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect();
        ComplexMatrix { rows: self.rows, cols: self.cols, data }
    }
}

impl Mul<&ComplexMatrix> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, rhs.rows, "mul: inner dimensions differ");
        let mut out = ComplexMatrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            let orow = &mut out.data[r * rhs.cols..(r + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let brow = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }
}

macro_rules! forward_owned {
    ($tr:ident, $f:ident) => {
        impl $tr<ComplexMatrix> for ComplexMatrix {
            type Output = ComplexMatrix;
            fn $f(self, rhs: ComplexMatrix) -> ComplexMatrix {
                (&self).$f(&rhs)
            }
        }
        impl $tr<&ComplexMatrix> for ComplexMatrix {
            type Output = ComplexMatrix;
            fn $f(self, rhs: &ComplexMatrix) -> ComplexMatrix {
                (&self).$f(rhs)
            }
        }
        impl $tr<ComplexMatrix> for &ComplexMatrix {
            type Output = ComplexMatrix;
            fn $f(self, rhs: ComplexMatrix) -> ComplexMatrix {
                self.$f(&rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        self.assert_same_shape(rhs, "add_assign");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&ComplexMatrix> for ComplexMatrix {
    fn sub_assign(&mut self, rhs: &ComplexMatrix) {
        self.assert_same_shape(rhs, "sub_assign");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale_re(-1.0)
    }
}

impl Neg for ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale_re(-1.0)
    }
}

/// Largest singular value, as the square root of the top eigenvalue of `A*A`.
pub fn op_norm(a: &ComplexMatrix) -> f64 {
    if a.rows == 1 || a.cols == 1 {
        return a.frobenius_norm();
    }
    let gram = (&a.adjoint() * a).hermitian_part();
    let scale = gram.max_abs();
    if scale == 0.0 {
        return 0.0;
    }
    let (values, _) = jacobi(&gram.scale_re(1.0 / scale), false);
    let top = values.iter().cloned().fold(0.0, f64::max);
    (top * scale).sqrt()
}

/// `‖A‖·‖A⁻¹‖`, infinite for singular input.
pub fn condition_number(a: &ComplexMatrix) -> f64 {
    match inverse(a) {
        Ok(inv) => op_norm(a) * op_norm(&inv),
        Err(_) => f64::INFINITY,
    }
}

#[derive(Clone, Debug)]
pub struct HermitianEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, matching `values`.
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let d = ComplexMatrix::real_diag(&self.values);
        &(&self.vectors * &d) * &self.vectors.adjoint()
    }
}

#[derive(Clone, Debug)]
pub struct UnitaryEigen {
    /// Unimodular, sorted by argument in (-π, π].
    pub nodes: Vec<C64>,
    pub vectors: ComplexMatrix,
}

impl UnitaryEigen {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let d = ComplexMatrix::diag(&self.nodes);
        &(&self.vectors * &d) * &self.vectors.adjoint()
    }
}

fn require_square(a: &ComplexMatrix, what: &str) -> Result<()> {
    if a.is_square() {
        Ok(())
    } else {
        Err(CmvError::ShapeMismatch(format!("{what} needs a square matrix, got {}x{}", a.rows, a.cols)))
    }
}

fn check_hermitian(a: &ComplexMatrix, tol: f64) -> Result<()> {
    let defect = a.hermitian_defect();
    if defect > tol * a.frobenius_norm().max(1.0) {
        return Err(CmvError::NotHermitian(defect));
    }
    Ok(())
}

pub fn herm_eigen(a: &ComplexMatrix) -> Result<HermitianEigen> {
    herm_eigen_tol(a, DEFAULT_TOL)
}

pub fn herm_eigen_tol(a: &ComplexMatrix, tol: f64) -> Result<HermitianEigen> {
    require_square(a, "herm_eigen")?;
    check_hermitian(a, tol)?;
    let (values, vectors) = jacobi(&a.hermitian_part(), true);
    if values.is_empty() {
        return Err(CmvError::NoConvergence(JACOBI_MAX_SWEEPS));
    }
    Ok(HermitianEigen { values, vectors })
}

fn off_diagonal_norm(m: &ComplexMatrix) -> f64 {
    let n = m.rows;
    let mut s = 0.0;
    for p in 0..n {
        for q in 0..n {
            if p != q {
                s += m[(p, q)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Cyclic complex Jacobi on a Hermitian matrix. Returns empty values on
/// non-convergence when `strict` is set.
fn jacobi(a: &ComplexMatrix, strict: bool) -> (Vec<f64>, ComplexMatrix) {
    let n = a.rows;
    let mut m = a.clone();
    let mut v = ComplexMatrix::identity(n);
    let total = m.frobenius_norm();
    let mut converged = total == 0.0;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if converged {
            break;
        }
        let off = off_diagonal_norm(&m);
        if off <= f64::EPSILON * total {
            converged = true;
            break;
        }
        let skip = f64::EPSILON * total / (n as f64);
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let r = apq.norm();
                if r <= skip {
                    continue;
                }
                let e = apq / r;
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let theta = (aqq - app) / (2.0 * r);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * cs;
                let ec = e.conj();
                for i in 0..n {
                    let x = m[(i, p)];
                    let y = m[(i, q)];
                    m[(i, p)] = x * cs - y * ec * sn;
                    m[(i, q)] = x * sn + y * ec * cs;
                }
                for j in 0..n {
                    let x = m[(p, j)];
                    let y = m[(q, j)];
                    m[(p, j)] = x * cs - y * e * sn;
                    m[(q, j)] = x * sn + y * e * cs;
                }
                m[(p, q)] = C64::new(0.0, 0.0);
                m[(q, p)] = C64::new(0.0, 0.0);
                m[(p, p)] = C64::new(app - t * r, 0.0);
                m[(q, q)] = C64::new(aqq + t * r, 0.0);
                for i in 0..n {
                    let x = v[(i, p)];
                    let y = v[(i, q)];
                    v[(i, p)] = x * cs - y * ec * sn;
                    v[(i, q)] = x * sn + y * ec * cs;
                }
            }
        }
    }
    if !converged && off_diagonal_norm(&m) > 1e-12 * total && strict {
        return (Vec::new(), v);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].re.partial_cmp(&m[(j, j)].re).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| m[(i, i)].re).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, col| v[(r, order[col])]);
    (values, vectors)
}

pub fn herm_sqrt(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    herm_sqrt_tol(a, DEFAULT_TOL)
}

/// Principal square root of a Hermitian positive semidefinite matrix.
pub fn herm_sqrt_tol(a: &ComplexMatrix, tol: f64) -> Result<ComplexMatrix> {
    let eig = herm_eigen_tol(a, tol)?;
    let scale = a.frobenius_norm().max(1.0);
    if let Some(&low) = eig.values.first() {
        if low < -tol * scale {
            return Err(CmvError::NotPsd(low));
        }
    }
    let roots: Vec<f64> = eig
        .values
        .iter()
        .map(|&x| x.max(0.0).sqrt())
        .collect();
    let d = ComplexMatrix::real_diag(&roots);
    Ok((&(&eig.vectors * &d) * &eig.vectors.adjoint()).hermitian_part())
}

/// Smallest eigenvalue of the Hermitian part.
pub fn min_herm_eigenvalue(a: &ComplexMatrix) -> f64 {
    let (values, _) = jacobi(&a.hermitian_part(), false);
    values.first().cloned().unwrap_or(0.0)
}

pub fn unitary_eigen(u: &ComplexMatrix) -> Result<UnitaryEigen> {
    unitary_eigen_tol(u, DEFAULT_TOL)
}

/// Eigendecomposition of a unitary matrix through a phase-shifted Cayley
/// transform `K = i(I + wU)(I - wU)^{-1}`, which is Hermitian.
pub fn unitary_eigen_tol(u: &ComplexMatrix, tol: f64) -> Result<UnitaryEigen> {
    require_square(u, "unitary_eigen")?;
    let n = u.rows;
    let defect = u.unitarity_defect();
    if defect > tol * (n as f64).sqrt().max(1.0) {
        return Err(CmvError::NotUnitary(defect));
    }
    let id = ComplexMatrix::identity(n);
    // Irrational starting phase; later attempts aim the Cayley pole at the widest spectral gap.
    let mut phase = 2.0 * PI * 0.381_966_011_250_105;
    let mut best: Option<(f64, UnitaryEigen)> = None;
    for attempt in 0..CAYLEY_ATTEMPTS {
        let w = C64::from_polar(1.0, phase);
        let wu = u.scale(w);
        let lhs = &id - &wu;
        let rhs = &id + &wu;
        let k = match solve(&lhs, &rhs) {
            Ok(x) => x.scale(I).hermitian_part(),
            Err(_) => {
                phase += 2.0 * PI * 0.618_033_988_749_895 + attempt as f64;
                continue;
            }
        };
        let (kappa, vectors) = jacobi(&k, true);
        if kappa.is_empty() {
            phase += 2.0 * PI * 0.618_033_988_749_895;
            continue;
        }
        let mut pole_distance = f64::INFINITY;
        let mut nodes = Vec::with_capacity(n);
        for &x in &kappa {
            let lambda = (C64::new(x, 0.0) - I) / (C64::new(x, 0.0) + I);
            pole_distance = pole_distance.min((C64::new(1.0, 0.0) - lambda).norm());
            let z = lambda * w.conj();
            nodes.push(z / z.norm());
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| nodes[i].arg().partial_cmp(&nodes[j].arg()).unwrap_or(std::cmp::Ordering::Equal));
        let eig = UnitaryEigen {
            nodes: order.iter().map(|&i| nodes[i]).collect(),
            vectors: ComplexMatrix::from_fn(n, n, |r, col| vectors[(r, order[col])]),
        };
        let residual = (&eig.reconstruct() - u).frobenius_norm();
        let gap_target = widest_gap_midpoint(&eig.nodes);
        let acceptable = residual <= 1e-11 * (n as f64).max(1.0) && pole_distance > 1e-3;
        if acceptable {
            return Ok(eig);
        }
        if best.as_ref().is_none_or(|(r, _)| residual < *r) {
            best = Some((residual, eig));
        }
        // Put the pole (wζ = 1) in the middle of the widest gap between nodes.
        phase = -gap_target;
    }
    match best {
        Some((residual, eig)) if residual <= tol * (n as f64).max(1.0) => Ok(eig),
        _ => Err(CmvError::CayleyDegenerate(CAYLEY_ATTEMPTS)),
    }
}

fn widest_gap_midpoint(nodes: &[C64]) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let mut angles: Vec<f64> = nodes.iter().map(|z| z.arg()).collect();
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut best_gap = angles[0] + 2.0 * PI - angles[angles.len() - 1];
    let mut best_mid = angles[angles.len() - 1] + 0.5 * best_gap;
    for pair in angles.windows(2) {
        let gap = pair[1] - pair[0];
        if gap > best_gap {
            best_gap = gap;
            best_mid = pair[0] + 0.5 * gap;
        }
    }
    best_mid
}

/// LU factorization with partial pivoting, reusable across right-hand sides.
#[derive(Clone, Debug)]
pub struct LuFactor {
    n: usize,
    lu: Vec<C64>,
    perm: Vec<usize>,
}

impl LuFactor {
    pub fn new(a: &ComplexMatrix) -> Result<Self> {
        require_square(a, "LU")?;
        let n = a.rows;
        let floor = PIVOT_FLOOR * a.max_abs().max(f64::MIN_POSITIVE) * (n as f64).sqrt();
        let mut lu = a.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let mut piv = col;
            let mut best = lu[col * n + col].norm();
            for r in (col + 1)..n {
                let v = lu[r * n + col].norm();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best <= floor {
                return Err(CmvError::Singular);
            }
            if piv != col {
                for j in 0..n {
                    lu.swap(col * n + j, piv * n + j);
                }
                perm.swap(col, piv);
            }
            let d = lu[col * n + col];
            for r in (col + 1)..n {
                let f = lu[r * n + col] / d;
                if f.re == 0.0 && f.im == 0.0 {
                    continue;
                }
                lu[r * n + col] = f;
                for j in (col + 1)..n {
                    let t = lu[col * n + j];
                    lu[r * n + j] -= f * t;
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    pub fn solve(&self, b: &ComplexMatrix) -> Result<ComplexMatrix> {
        let n = self.n;
        if b.rows != n {
            return Err(CmvError::ShapeMismatch(format!("rhs has {} rows, expected {n}", b.rows)));
        }
        let mut x = ComplexMatrix::from_fn(n, b.cols, |r, col| b[(self.perm[r], col)]);
        for col in 0..b.cols {
            for r in 0..n {
                let mut s = x[(r, col)];
                for k in 0..r {
                    s -= self.lu[r * n + k] * x[(k, col)];
                }
                x[(r, col)] = s;
            }
            for r in (0..n).rev() {
                let mut s = x[(r, col)];
                for k in (r + 1)..n {
                    s -= self.lu[r * n + k] * x[(k, col)];
                }
                x[(r, col)] = s / self.lu[r * n + r];
            }
        }
        Ok(x)
    }

    /// Solves `X A = B` for `X`.
    pub fn solve_right(&self, b: &ComplexMatrix) -> Result<ComplexMatrix> {
        // X A = B  <=>  A* X* = B*, but only A is factored; go through the inverse.
        let inv = self.solve(&ComplexMatrix::identity(self.n))?;
        Ok(b * &inv)
    }
}

/// `A⁻¹B`.
pub fn solve(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    LuFactor::new(a)?.solve(b)
}

/// `BA⁻¹`.
pub fn solve_right(b: &ComplexMatrix, a: &ComplexMatrix) -> Result<ComplexMatrix> {
    Ok(solve(&a.adjoint(), &b.adjoint())?.adjoint())
}

pub fn inverse(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    solve(a, &ComplexMatrix::identity(a.rows))
}
