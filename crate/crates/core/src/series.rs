//! Truncated matrix power series `Σ_{j=0}^{N} c_j z^j`.

use crate::error::{CmvError, Result};
use crate::linalg::{ComplexMatrix, LuFactor, C64};

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixPowerSeries {
    m: usize,
    coeffs: Vec<ComplexMatrix>,
}

impl MatrixPowerSeries {
    /// Coefficients `c_0 ..= c_N`; all must be m×m for a common `m`.
    pub fn new(coeffs: Vec<ComplexMatrix>) -> Result<Self> {
        let first = coeffs.first().ok_or_else(|| CmvError::ShapeMismatch("series needs at least one coefficient".into()))?;
        let m = first.rows();
        if coeffs.iter().any(|c| c.rows() != m || c.cols() != m) {
            return Err(CmvError::ShapeMismatch("series coefficients must share one square shape".into()));
        }
        Ok(Self { m, coeffs })
    }

    pub fn zero(m: usize, order: usize) -> Self {
        Self { m, coeffs: vec![ComplexMatrix::zeros(m, m); order + 1] }
    }

    pub fn constant(c: ComplexMatrix, order: usize) -> Self {
        let mut s = Self::zero(c.rows(), order);
        s.coeffs[0] = c;
        s
    }

    pub fn identity(m: usize, order: usize) -> Self {
        Self::constant(ComplexMatrix::identity(m), order)
    }

    /// `a + b z`, truncated at `order`.
    pub fn linear(a: ComplexMatrix, b: ComplexMatrix, order: usize) -> Self {
        let mut s = Self::constant(a, order);
        if order >= 1 {
            s.coeffs[1] = b;
        }
        s
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Truncation order `N`.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[ComplexMatrix] {
        &self.coeffs
    }

    pub fn coeff(&self, j: usize) -> &ComplexMatrix {
        &self.coeffs[j]
    }

    pub fn set_coeff(&mut self, j: usize, c: ComplexMatrix) {
        self.coeffs[j] = c;
    }

    pub fn truncate(&self, order: usize) -> Self {
        Self { m: self.m, coeffs: self.coeffs[..=order.min(self.order())].to_vec() }
    }

    fn check(&self, other: &Self) -> Result<usize> {
        if self.m != other.m {
            return Err(CmvError::ShapeMismatch(format!("series of order {} and {} matrices", self.m, other.m)));
        }
        Ok(self.order().min(other.order()))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let n = self.check(other)?;
        Ok(Self { m: self.m, coeffs: (0..=n).map(|j| &self.coeffs[j] + &other.coeffs[j]).collect() })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let n = self.check(other)?;
        Ok(Self { m: self.m, coeffs: (0..=n).map(|j| &self.coeffs[j] - &other.coeffs[j]).collect() })
    }

    pub fn neg(&self) -> Self {
        Self { m: self.m, coeffs: self.coeffs.iter().map(|c| -c).collect() }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { m: self.m, coeffs: self.coeffs.iter().map(|c| c.scale(s)).collect() }
    }

    pub fn add_constant(&self, c: &ComplexMatrix) -> Self {
        let mut out = self.clone();
        out.coeffs[0] += c;
        out
    }

    pub fn left_mul(&self, a: &ComplexMatrix) -> Self {
        Self { m: self.m, coeffs: self.coeffs.iter().map(|c| a * c).collect() }
    }

    pub fn right_mul(&self, a: &ComplexMatrix) -> Self {
        Self { m: self.m, coeffs: self.coeffs.iter().map(|c| c * a).collect() }
    }

    /// Cauchy product, truncated to the smaller order.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        let n = self.check(other)?;
        let coeffs = (0..=n)
            .map(|j| {
                let mut acc = ComplexMatrix::zeros(self.m, self.m);
                for i in 0..=j {
                    acc += &(&self.coeffs[i] * &other.coeffs[j - i]);
                }
                acc
            })
            .collect();
        Ok(Self { m: self.m, coeffs })
    }

    /// `z·f`, known exactly to order `N + 1`.
    pub fn mul_z(&self) -> Self {
        let mut coeffs = vec![ComplexMatrix::zeros(self.m, self.m)];
        coeffs.extend(self.coeffs.iter().cloned());
        Self { m: self.m, coeffs }
    }

    /// `f / z`, one order shorter; fails unless `c_0` vanishes to `tol`.
    pub fn div_z(&self, tol: f64) -> Result<Self> {
        if self.coeffs[0].max_abs() > tol {
            return Err(CmvError::NonInvertibleConstantTerm);
        }
        if self.order() == 0 {
            return Err(CmvError::ShapeMismatch("cannot divide an order-0 series by z".into()));
        }
        Ok(Self { m: self.m, coeffs: self.coeffs[1..].to_vec() })
    }

    /// Multiplicative inverse by forward substitution.
    pub fn invert(&self) -> Result<Self> {
        let lu = LuFactor::new(&self.coeffs[0]).map_err(|_| CmvError::NonInvertibleConstantTerm)?;
        let c0_inv = lu.solve(&ComplexMatrix::identity(self.m)).map_err(|_| CmvError::NonInvertibleConstantTerm)?;
        let mut out: Vec<ComplexMatrix> = vec![c0_inv.clone()];
        for j in 1..=self.order() {
            let mut acc = ComplexMatrix::zeros(self.m, self.m);
            for i in 1..=j {
                acc += &(&self.coeffs[i] * &out[j - i]);
            }
            out.push(-&(&c0_inv * &acc));
        }
        Ok(Self { m: self.m, coeffs: out })
    }

    /// `f · g⁻¹`.
    pub fn div_right(&self, g: &Self) -> Result<Self> {
        self.mul(&g.invert()?)
    }

    /// `g⁻¹ · f`.
    pub fn div_left(&self, g: &Self) -> Result<Self> {
        g.invert()?.mul(self)
    }

    /// `a + b·f·c` with constant matrices.
    pub fn compose_affine(&self, a: &ComplexMatrix, b: &ComplexMatrix, c: &ComplexMatrix) -> Self {
        self.left_mul(b).right_mul(c).add_constant(a)
    }

    /// `(a + b f)(c + d f)⁻¹` with constant matrices.
    pub fn linear_fractional(
        &self,
        a: &ComplexMatrix,
        b: &ComplexMatrix,
        c: &ComplexMatrix,
        d: &ComplexMatrix,
    ) -> Result<Self> {
        let num = self.left_mul(b).add_constant(a);
        let den = self.left_mul(d).add_constant(c);
        num.div_right(&den)
    }

    /// Partial sum at `z`.
    pub fn eval(&self, z: C64) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.m, self.m);
        for c in self.coeffs.iter().rev() {
            out = out.scale(z) + c;
        }
        out
    }

    /// Largest entry difference over the common orders.
    pub fn distance(&self, other: &Self) -> f64 {
        let n = self.order().min(other.order());
        (0..=n).map(|j| (&self.coeffs[j] - &other.coeffs[j]).max_abs()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.max_abs()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn mat(rows: &[[f64; 2]; 2]) -> ComplexMatrix {
        ComplexMatrix::from_fn(2, 2, |i, j| c(rows[i][j], 0.0))
    }

    #[test]
    fn geometric_inverse() {
        let a = mat(&[[0.3, 0.1], [-0.2, 0.5]]);
        let f = MatrixPowerSeries::linear(ComplexMatrix::identity(2), a.clone(), 6);
        let inv = f.invert().unwrap();
        let mut power = ComplexMatrix::identity(2);
        for j in 0..=6 {
            assert!((inv.coeff(j) - &power).max_abs() < 1e-15);
            power = &power * &(-&a);
        }
    }

    #[test]
    fn self_inverse_product() {
        let coeffs = (0..6)
            .map(|j| ComplexMatrix::from_fn(2, 2, |r, s| c((r + 2 * s + j) as f64 * 0.1 + if r == s { 1.0 } else { 0.0 }, 0.05 * j as f64)))
            .collect();
        let f = MatrixPowerSeries::new(coeffs).unwrap();
        let g = f.invert().unwrap();
        let id = MatrixPowerSeries::identity(2, 5);
        assert!(f.mul(&g).unwrap().distance(&id) < 1e-12);
        assert!(g.mul(&f).unwrap().distance(&id) < 1e-12);
    }

    #[test]
    fn product_respects_ordering() {
        let a = mat(&[[0.0, 1.0], [0.0, 0.0]]);
        let b = mat(&[[0.0, 0.0], [1.0, 0.0]]);
        let f = MatrixPowerSeries::linear(ComplexMatrix::zeros(2, 2), a, 2);
        let g = MatrixPowerSeries::linear(ComplexMatrix::zeros(2, 2), b, 2);
        let fg = f.mul(&g).unwrap();
        let gf = g.mul(&f).unwrap();
        assert!(fg.sub(&gf).unwrap().max_abs() > 0.5);
    }

    #[test]
    fn singular_constant_term() {
        let f = MatrixPowerSeries::zero(2, 3);
        assert_eq!(f.invert().unwrap_err(), CmvError::NonInvertibleConstantTerm);
    }

    #[test]
    fn mixed_orders_truncate() {
        let f = MatrixPowerSeries::identity(1, 5);
        let g = MatrixPowerSeries::identity(1, 2);
        assert_eq!(f.mul(&g).unwrap().order(), 2);
        assert_eq!(f.add(&g).unwrap().order(), 2);
    }

    #[test]
    fn shifts() {
        let f = MatrixPowerSeries::linear(ComplexMatrix::identity(1), ComplexMatrix::identity(1).scale_re(2.0), 3);
        let zf = f.mul_z();
        assert_eq!(zf.order(), 4);
        assert_eq!(zf.div_z(0.0).unwrap(), f);
        assert_eq!(f.div_z(1e-12).unwrap_err(), CmvError::NonInvertibleConstantTerm);
    }

    #[test]
    fn linear_fractional_identity_map() {
        let f = MatrixPowerSeries::linear(ComplexMatrix::identity(2).scale_re(0.5), mat(&[[0.1, 0.2], [0.3, 0.4]]), 4);
        let id = ComplexMatrix::identity(2);
        let z = ComplexMatrix::zeros(2, 2);
        assert!(f.linear_fractional(&z, &id, &id, &z).unwrap().distance(&f) < 1e-14);
        assert!(f.compose_affine(&z, &id, &id).distance(&f) == 0.0);
    }

    #[test]
    fn eval_is_partial_sum() {
        let f = MatrixPowerSeries::new(vec![ComplexMatrix::identity(1); 4]).unwrap();
        let v = f.eval(c(0.5, 0.0));
        assert!((v[(0, 0)] - c(1.875, 0.0)).norm() < 1e-15);
    }
}
