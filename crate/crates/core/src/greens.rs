//! Wronskians, Weyl solutions and the Green's matrix of a full-lattice
//! truncation, together with the Taylor data `g`, `h` at the origin.

use crate::error::{CmvError, Result};
use crate::laurent::{initial_pair, propagate_values};
use crate::linalg::{condition_number, inverse, ComplexMatrix, C64};
use crate::series::MatrixPowerSeries;
use crate::spectral::measure_from_operator;
use crate::verblunsky::{build_cmv, half_lattice, CmvOperator, Side, VerblunskyData};
use crate::weyl::{convert, m_from_measure, WeylFunction, WeylKind};

/// `W(z,k0)` is treated as singular above this condition number.
pub const WRONSKIAN_COND_MAX: f64 = 1e12;

fn parity_sign(k: i64) -> f64 {
    if k.rem_euclid(2) == 1 {
        1.0
    } else {
        -1.0
    }
}

/// `(−1)^{k+1}/2 [U₁*U₂ − V₁*V₂]`, where `u1`, `v1` are already evaluated
/// at `1/z̄` and `u2`, `v2` at `z`.
pub fn wronskian(k: i64, u1: &ComplexMatrix, v1: &ComplexMatrix, u2: &ComplexMatrix, v2: &ComplexMatrix) -> ComplexMatrix {
    (&(&u1.adjoint() * u2) - &(&v1.adjoint() * v2)).scale_re(0.5 * parity_sign(k))
}

/// `1/z̄`.
pub fn reflect(z: C64) -> Result<C64> {
    if z.norm() < 1e-300 {
        return Err(CmvError::ZeroArgument);
    }
    Ok(1.0 / z.conj())
}

/// `(U, V)` of `P₊/R₊` (`first_kind`) or `Q₊/S₊` at `z` across `lo ..= hi`.
pub fn plus_family_values(
    data: &VerblunskyData,
    k0: i64,
    first_kind: bool,
    z: C64,
    lo: i64,
    hi: i64,
) -> Result<Vec<(ComplexMatrix, ComplexMatrix)>> {
    let (u, v) = initial_pair(data.m(), k0, Side::Plus, first_kind);
    propagate_values(data, z, k0, (u.eval(z), v.eval(z)), lo, hi)
}

/// `M₊(·,k0)` and `M₋(·,k0)` of the two half-lattice truncations sharing the
/// outer boundaries of `data`.
#[derive(Clone, Debug)]
pub struct WeylPair {
    pub k0: i64,
    pub plus: WeylFunction,
    pub minus: WeylFunction,
}

pub fn weyl_pair(data: &VerblunskyData, k0: i64, order: usize) -> Result<WeylPair> {
    let mu_p = measure_from_operator(&half_lattice(data, k0, Side::Plus)?, k0)?;
    let mu_m = measure_from_operator(&half_lattice(data, k0, Side::Minus)?, k0)?;
    let plus = convert(&m_from_measure(&mu_p, Side::Plus, k0, order), WeylKind::UpperMPlus)?;
    let minus = convert(&m_from_measure(&mu_m, Side::Minus, k0, order + 1), WeylKind::UpperMMinus)?;
    Ok(WeylPair { k0, plus, minus })
}

impl WeylPair {
    /// `(M₊(z), M₋(z))`.
    pub fn values(&self, z: C64) -> Result<(ComplexMatrix, ComplexMatrix)> {
        Ok((self.plus.value(z)?, self.minus.value(z)?))
    }

    /// `W(z,k0) = M₊ − M₋`.
    pub fn wronskian_w(&self, z: C64) -> Result<ComplexMatrix> {
        let (p, m) = self.values(z)?;
        Ok(&p - &m)
    }

    pub fn wronskian_series(&self) -> Result<MatrixPowerSeries> {
        self.plus.series.sub(&self.minus.series)
    }

    /// `‖M₊W⁻¹M₋ − M₋W⁻¹M₊‖` at `z`.
    pub fn symmetry_residual(&self, z: C64) -> Result<f64> {
        let (p, m) = self.values(z)?;
        let w_inv = checked_inverse(&(&p - &m))?;
        Ok((&(&(&p * &w_inv) * &m) - &(&(&m * &w_inv) * &p)).frobenius_norm())
    }
}

fn checked_inverse(w: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !(condition_number(w) < WRONSKIAN_COND_MAX) {
        return Err(CmvError::SingularWronskian);
    }
    inverse(w).map_err(|_| CmvError::SingularWronskian)
}

/// Values of `U± = Q₊ + P₊M±` and `V± = S₊ + R₊M±` at one `z`.
#[derive(Clone, Debug)]
pub struct WeylSolutionPair {
    pub k0: i64,
    pub side: Side,
    pub z: C64,
    pub lo: i64,
    pub hi: i64,
    pub u: Vec<ComplexMatrix>,
    pub v: Vec<ComplexMatrix>,
}

impl WeylSolutionPair {
    pub fn u_at(&self, k: i64) -> Result<&ComplexMatrix> {
        self.index(k).map(|i| &self.u[i])
    }

    pub fn v_at(&self, k: i64) -> Result<&ComplexMatrix> {
        self.index(k).map(|i| &self.v[i])
    }

    fn index(&self, k: i64) -> Result<usize> {
        if k < self.lo || k > self.hi {
            return Err(CmvError::OutOfWindow(k));
        }
        Ok((k - self.lo) as usize)
    }
}

/// Propagates `Q₊ + P₊M` across `lo ..= hi`, which must lie inside the
/// sites of the full truncation of `data`.
pub fn weyl_solution(
    data: &VerblunskyData,
    k0: i64,
    side: Side,
    big_m: &ComplexMatrix,
    z: C64,
    lo: i64,
    hi: i64,
) -> Result<WeylSolutionPair> {
    if lo < data.k_min() || lo > k0 {
        return Err(CmvError::OutOfWindow(lo));
    }
    if hi >= data.k_max() || hi < k0 {
        return Err(CmvError::OutOfWindow(hi));
    }
    let (p, r) = initial_pair(data.m(), k0, Side::Plus, true);
    let (q, s) = initial_pair(data.m(), k0, Side::Plus, false);
    let init = (&q.eval(z) + &(&p.eval(z) * big_m), &s.eval(z) + &(&r.eval(z) * big_m));
    let vals = propagate_values(data, z, k0, init, lo, hi)?;
    let (u, v) = vals.into_iter().unzip();
    Ok(WeylSolutionPair { k0, side, z, lo, hi, u, v })
}

/// The resolvent `(U − z)⁻¹` of the truncation assembled from Weyl
/// solutions at `z` and `1/z̄`.
#[derive(Clone, Debug)]
pub struct ResolventKernel {
    pub z: C64,
    pub w: ComplexMatrix,
    w_inv: ComplexMatrix,
    minus_z: WeylSolutionPair,
    plus_z: WeylSolutionPair,
    minus_r: WeylSolutionPair,
    plus_r: WeylSolutionPair,
}

pub fn resolvent_kernel(data: &VerblunskyData, pair: &WeylPair, z: C64, lo: i64, hi: i64) -> Result<ResolventKernel> {
    let zr = reflect(z)?;
    let (mp, mm) = pair.values(z)?;
    let (mp_r, mm_r) = pair.values(zr)?;
    let w = &mp - &mm;
    let w_inv = checked_inverse(&w)?;
    let k0 = pair.k0;
    Ok(ResolventKernel {
        z,
        w,
        w_inv,
        minus_z: weyl_solution(data, k0, Side::Minus, &mm, z, lo, hi)?,
        plus_z: weyl_solution(data, k0, Side::Plus, &mp, z, lo, hi)?,
        minus_r: weyl_solution(data, k0, Side::Minus, &mm_r, zr, lo, hi)?,
        plus_r: weyl_solution(data, k0, Side::Plus, &mp_r, zr, lo, hi)?,
    })
}

impl ResolventKernel {
    /// `(U − z)⁻¹(k, k')`.
    pub fn entry(&self, k: i64, kp: i64) -> Result<ComplexMatrix> {
        let left_minus = k < kp || (k == kp && k.rem_euclid(2) == 1);
        let (a, b) = if left_minus {
            (self.minus_z.u_at(k)?, self.plus_r.u_at(kp)?)
        } else {
            (self.plus_z.u_at(k)?, self.minus_r.u_at(kp)?)
        };
        Ok((&(a * &self.w_inv) * &b.adjoint()).scale(1.0 / (2.0 * self.z)))
    }

    /// Residuals of the mixed identities `U₊W⁻¹U₋(1/z̄)* − U₋W⁻¹U₊(1/z̄)* = 2(−1)^{k+1}`
    /// and `V₊W⁻¹U₋(1/z̄)* − V₋W⁻¹U₊(1/z̄)* = 0` at site `k`.
    pub fn mixed_identity_residuals(&self, k: i64) -> Result<[f64; 2]> {
        let m = self.w.rows();
        let ur_m = self.minus_r.u_at(k)?.adjoint();
        let ur_p = self.plus_r.u_at(k)?.adjoint();
        let first = &(&(self.plus_z.u_at(k)? * &self.w_inv) * &ur_m) - &(&(self.minus_z.u_at(k)? * &self.w_inv) * &ur_p);
        let second = &(&(self.plus_z.v_at(k)? * &self.w_inv) * &ur_m) - &(&(self.minus_z.v_at(k)? * &self.w_inv) * &ur_p);
        let target = ComplexMatrix::identity(m).scale_re(2.0 * parity_sign(k));
        Ok([(&first - &target).frobenius_norm(), second.frobenius_norm()])
    }
}

/// `(U − z)⁻¹(k, k')` from the Weyl solutions; `z` must be nonzero and off
/// the unit circle.
pub fn resolvent_formula(data: &VerblunskyData, pair: &WeylPair, z: C64, k: i64, kp: i64) -> Result<ComplexMatrix> {
    let lo = k.min(kp).min(pair.k0);
    let hi = k.max(kp).max(pair.k0);
    resolvent_kernel(data, pair, z, lo, hi)?.entry(k, kp)
}

/// Dense `(U − z)⁻¹` of a truncation.
pub fn direct_resolvent(op: &CmvOperator, z: C64) -> Result<ComplexMatrix> {
    let n = op.u().rows();
    inverse(&(op.u() - &ComplexMatrix::scalar(n, z)))
}

/// Block `(k, k')` of a dense operator-sized matrix.
pub fn site_block(op: &CmvOperator, full: &ComplexMatrix, k: i64, kp: i64) -> Result<ComplexMatrix> {
    let m = op.m();
    Ok(full.block(op.offset(k)?, op.offset(kp)?, m, m))
}

/// Arithmetic shared by pointwise values and power series, so the block
/// formulas are written once.
trait Ring: Sized + Clone {
    fn sub(&self, o: &Self) -> Result<Self>;
    fn mul(&self, o: &Self) -> Result<Self>;
    fn inv(&self) -> Result<Self>;
    fn lmul(&self, a: &ComplexMatrix) -> Self;
    fn rmul(&self, a: &ComplexMatrix) -> Self;
    fn plus(&self, c: &ComplexMatrix) -> Self;
    fn neg(&self) -> Self;
}

impl Ring for ComplexMatrix {
    fn sub(&self, o: &Self) -> Result<Self> {
        Ok(self - o)
    }
    fn mul(&self, o: &Self) -> Result<Self> {
        Ok(self * o)
    }
    fn inv(&self) -> Result<Self> {
        inverse(self)
    }
    fn lmul(&self, a: &ComplexMatrix) -> Self {
        a * self
    }
    fn rmul(&self, a: &ComplexMatrix) -> Self {
        self * a
    }
    fn plus(&self, c: &ComplexMatrix) -> Self {
        self + c
    }
    fn neg(&self) -> Self {
        -self
    }
}

impl Ring for MatrixPowerSeries {
    fn sub(&self, o: &Self) -> Result<Self> {
        MatrixPowerSeries::sub(self, o)
    }
    fn mul(&self, o: &Self) -> Result<Self> {
        MatrixPowerSeries::mul(self, o)
    }
    fn inv(&self) -> Result<Self> {
        self.invert()
    }
    fn lmul(&self, a: &ComplexMatrix) -> Self {
        self.left_mul(a)
    }
    fn rmul(&self, a: &ComplexMatrix) -> Self {
        self.right_mul(a)
    }
    fn plus(&self, c: &ComplexMatrix) -> Self {
        self.add_constant(c)
    }
    fn neg(&self) -> Self {
        MatrixPowerSeries::neg(self)
    }
}

/// The four m×m blocks of `𝓜(·,k)` and `Φ₁₁`.
#[derive(Clone, Debug)]
pub struct MBlocks<T> {
    pub m00: T,
    pub m01: T,
    pub m10: T,
    pub m11: T,
    pub phi11: T,
}

fn blocks_from<T: Ring>(data: &VerblunskyData, k: i64, mp: &T, mm: &T) -> Result<MBlocks<T>> {
    let m = data.m();
    let id = ComplexMatrix::identity(m);
    let a = data.a(k)?;
    let b = data.b(k)?;
    let (a_s, b_s) = (a.adjoint(), b.adjoint());
    let w_inv = mp.sub(mm)?.inv().map_err(|_| CmvError::SingularWronskian)?;
    let i_plus = |f: &T| f.plus(&id);
    let i_minus = |f: &T| f.neg().plus(&id);
    // c + f·d and c + d·f for constant c, d
    let rside = |c: &ComplexMatrix, f: &T, d: &ComplexMatrix| f.rmul(d).plus(c);
    let lside = |c: &ComplexMatrix, d: &ComplexMatrix, f: &T| f.lmul(d).plus(c);
    let sandwich = |l: &T, r: &T| l.mul(&w_inv)?.mul(r);
    let (m00, m01, m10, m11);
    if k.rem_euclid(2) == 1 {
        let ri = data.rho_inv(k)?;
        m00 = sandwich(&lside(&a_s, &-&b_s, mp), &rside(&a, mm, &b))?.lmul(ri).rmul(ri).plus(&id);
        m11 = sandwich(&i_plus(mm), &i_minus(mp))?.plus(&id);
        m01 = sandwich(&lside(&a_s, &-&b_s, mm), &i_minus(mp))?.lmul(ri).neg();
        m10 = sandwich(&i_plus(mp), &rside(&a, mm, &b))?.rmul(ri).neg();
    } else {
        let rti = data.rho_tilde_inv(k)?;
        m00 = sandwich(&lside(&a, &b, mm), &rside(&a_s, mp, &-&b_s))?.lmul(rti).rmul(rti).plus(&id);
        m11 = sandwich(&i_minus(mp), &i_plus(mm))?.plus(&id);
        m01 = sandwich(&lside(&a, &b, mm), &i_plus(mp))?.lmul(rti).neg();
        m10 = sandwich(&i_minus(mp), &rside(&a_s, mm, &-&b_s))?.rmul(rti).neg();
    }
    let phi11 = m11.plus(&-&id).mul(&i_plus(&m11).inv()?)?;
    Ok(MBlocks { m00, m01, m10, m11, phi11 })
}

/// Blocks of `𝓜(z,k)` from `M±(z,k)`.
pub fn m_matrix(data: &VerblunskyData, k: i64, mp: &ComplexMatrix, mm: &ComplexMatrix) -> Result<MBlocks<ComplexMatrix>> {
    checked_inverse(&(mp - mm))?;
    blocks_from(data, k, mp, mm)
}

/// Taylor series of the blocks of `𝓜(·,k)` from the series of `M±(·,k)`.
pub fn m_matrix_series(
    data: &VerblunskyData,
    k: i64,
    mp: &MatrixPowerSeries,
    mm: &MatrixPowerSeries,
) -> Result<MBlocks<MatrixPowerSeries>> {
    blocks_from(data, k, mp, mm)
}

/// `Φ₋⁻¹Φ₊` (k odd) or `Φ₊Φ₋⁻¹` (k even) from `M±` values.
pub fn phi11_factorized(k: i64, mp: &ComplexMatrix, mm: &ComplexMatrix) -> Result<ComplexMatrix> {
    let id = ComplexMatrix::identity(mp.rows());
    let phi_p = &(mp - &id) * &inverse(&(mp + &id))?;
    let y = &(mm + &id) * &inverse(&(mm - &id))?;
    Ok(if k.rem_euclid(2) == 1 { &y * &phi_p } else { &phi_p * &y })
}

/// Closed forms of `G(k−1,k−1), G(k−1,k), G(k,k−1), G(k,k)` at `z ≠ 0`,
/// read off the blocks of `𝓜`.
pub fn closed_form_entries(
    data: &VerblunskyData,
    k: i64,
    mp: &ComplexMatrix,
    mm: &ComplexMatrix,
    z: C64,
) -> Result<[ComplexMatrix; 4]> {
    if z.norm() < 1e-300 {
        return Err(CmvError::ZeroArgument);
    }
    let blk = m_matrix(data, k, mp, mm)?;
    let id = ComplexMatrix::identity(data.m());
    let s = 1.0 / (2.0 * z);
    Ok([(&blk.m00 - &id).scale(s), blk.m01.scale(s), blk.m10.scale(s), (&blk.m11 - &id).scale(s)])
}

/// Taylor data of the diagonal and neighboring Green's-matrix entries at `k0`:
/// `g = G(k0,k0)` and `h = G(k0−1,k0)` (k0 odd) or `G(k0,k0−1)` (k0 even).
#[derive(Clone, Debug, PartialEq)]
pub struct GreensData {
    pub k0: i64,
    pub g: MatrixPowerSeries,
    pub h: MatrixPowerSeries,
}

/// Radius around `k0` required for exact coefficients through order `order`.
pub fn required_radius(order: usize) -> i64 {
    2 * (order as i64 + 2)
}

fn check_radius(data: &VerblunskyData, k0: i64, order: usize) -> Result<()> {
    let needed = required_radius(order);
    if k0 - data.k_min() < needed || data.k_max() - 1 - k0 < needed {
        return Err(CmvError::WindowTooNarrow { order, needed });
    }
    Ok(())
}

/// Columns `U^{-(j+1)} Δ_col` for `j = 0 ..= order`, restricted to `row`.
fn neumann_blocks(op: &CmvOperator, col: i64, rows: &[i64], order: usize) -> Result<Vec<Vec<ComplexMatrix>>> {
    let m = op.m();
    let n = op.u().rows();
    let u_star = op.u().adjoint();
    let mut x = ComplexMatrix::zeros(n, m);
    x.set_block(op.offset(col)?, 0, &ComplexMatrix::identity(m));
    let mut out = vec![Vec::with_capacity(order + 1); rows.len()];
    for _ in 0..=order {
        x = &u_star * &x;
        for (slot, &r) in out.iter_mut().zip(rows) {
            slot.push(x.block(op.offset(r)?, 0, m, m));
        }
    }
    Ok(out)
}

/// `g(·,k0)` and `h(·,k0)` through order `order` via
/// `(U − z)⁻¹ = Σ_j zʲ U^{−(j+1)}` on the full truncation.
pub fn greens_series(data: &VerblunskyData, k0: i64, order: usize) -> Result<GreensData> {
    check_radius(data, k0, order)?;
    let op = build_cmv(data, true, true)?;
    let odd = k0.rem_euclid(2) == 1;
    let (g, h) = if odd {
        let mut cols = neumann_blocks(&op, k0, &[k0, k0 - 1], order)?;
        let h = cols.pop().expect("two rows");
        (cols.pop().expect("two rows"), h)
    } else {
        let g = neumann_blocks(&op, k0, &[k0], order)?.pop().expect("one row");
        let h = neumann_blocks(&op, k0 - 1, &[k0], order)?.pop().expect("one row");
        (g, h)
    };
    Ok(GreensData { k0, g: MatrixPowerSeries::new(g)?, h: MatrixPowerSeries::new(h)? })
}

/// Residuals of the four polynomial identities relating `P₊, Q₊, R₊, S₊`
/// at `z` and `1/z̄` at site `k`.
pub fn polynomial_identity_residuals(data: &VerblunskyData, k0: i64, z: C64, k: i64) -> Result<[f64; 4]> {
    let zr = reflect(z)?;
    let (lo, hi) = (k.min(k0), k.max(k0));
    let i = (k - lo) as usize;
    let pr = plus_family_values(data, k0, true, z, lo, hi)?;
    let qs = plus_family_values(data, k0, false, z, lo, hi)?;
    let pr_r = plus_family_values(data, k0, true, zr, lo, hi)?;
    let qs_r = plus_family_values(data, k0, false, zr, lo, hi)?;
    let (p, r) = &pr[i];
    let (q, s) = &qs[i];
    let (p_r, r_r) = (pr_r[i].0.adjoint(), pr_r[i].1.adjoint());
    let (q_r, s_r) = (qs_r[i].0.adjoint(), qs_r[i].1.adjoint());
    let id = ComplexMatrix::identity(data.m());
    let sign = parity_sign(k);
    let e1 = &(&(p * &q_r) + &(q * &p_r)) - &id.scale_re(2.0 * sign);
    let e2 = &(&(r * &s_r) + &(s * &r_r)) + &id.scale_re(2.0 * sign);
    let e3 = &(p * &s_r) + &(q * &r_r);
    let e4 = &(r * &q_r) + &(s * &p_r);
    Ok([e1.frobenius_norm(), e2.frobenius_norm(), e3.frobenius_norm(), e4.frobenius_norm()])
}

/// `g(z)` and `h(z)` solved directly from the dense truncation, for oracles.
pub fn greens_direct(data: &VerblunskyData, k0: i64, z: C64) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let op = build_cmv(data, true, true)?;
    let full = direct_resolvent(&op, z)?;
    let g = site_block(&op, &full, k0, k0)?;
    let h = if k0.rem_euclid(2) == 1 {
        site_block(&op, &full, k0 - 1, k0)?
    } else {
        site_block(&op, &full, k0, k0 - 1)?
    };
    Ok((g, h))
}
