//! Weyl–Titchmarsh functions as Taylor series and as pointwise values,
//! the Riccati expansions of `Φ₊` and `Φ₋⁻¹`, the conversion graph between
//! them, and Carathéodory/Schur diagnostics.

use std::fmt;
use std::str::FromStr;

use crate::error::{CmvError, Result};
use crate::linalg::{inverse, op_norm, solve, solve_right, ComplexMatrix, C64};
use crate::series::MatrixPowerSeries;
use crate::spectral::{BlockSpectralMeasure, SpectralMeasure, MERGE_TOL};
use crate::verblunsky::{Side, VerblunskyData};

/// Tolerance for the vanishing constant term before division by `z`.
const DIV_Z_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WeylKind {
    /// `m₊`
    MPlus,
    /// `m₋`
    MMinus,
    /// `M₊`
    UpperMPlus,
    /// `M₋`
    UpperMMinus,
    PhiPlus,
    PhiMinusInv,
    M00,
    M01,
    M10,
    M11,
    Phi11,
}

impl WeylKind {
    pub const ALL: [WeylKind; 11] = [
        WeylKind::MPlus,
        WeylKind::MMinus,
        WeylKind::UpperMPlus,
        WeylKind::UpperMMinus,
        WeylKind::PhiPlus,
        WeylKind::PhiMinusInv,
        WeylKind::M00,
        WeylKind::M01,
        WeylKind::M10,
        WeylKind::M11,
        WeylKind::Phi11,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WeylKind::MPlus => "m_plus",
            WeylKind::MMinus => "m_minus",
            WeylKind::UpperMPlus => "M_plus",
            WeylKind::UpperMMinus => "M_minus",
            WeylKind::PhiPlus => "Phi_plus",
            WeylKind::PhiMinusInv => "Phi_minus_inv",
            WeylKind::M00 => "M_00",
            WeylKind::M01 => "M_01",
            WeylKind::M10 => "M_10",
            WeylKind::M11 => "M_11",
            WeylKind::Phi11 => "Phi_11",
        }
    }

    /// Carathéodory kinds (nonnegative real part in the disk).
    pub fn is_caratheodory(self) -> bool {
        matches!(self, WeylKind::MPlus | WeylKind::UpperMPlus | WeylKind::M00 | WeylKind::M11)
    }

    pub fn is_anti_caratheodory(self) -> bool {
        matches!(self, WeylKind::MMinus | WeylKind::UpperMMinus)
    }

    pub fn is_schur(self) -> bool {
        matches!(self, WeylKind::PhiPlus | WeylKind::PhiMinusInv | WeylKind::Phi11)
    }

    fn side(self) -> Option<Side> {
        match self {
            WeylKind::MPlus | WeylKind::UpperMPlus | WeylKind::PhiPlus => Some(Side::Plus),
            WeylKind::MMinus | WeylKind::UpperMMinus | WeylKind::PhiMinusInv => Some(Side::Minus),
            _ => None,
        }
    }
}

impl fmt::Display for WeylKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WeylKind {
    type Err = CmvError;

    fn from_str(s: &str) -> Result<Self> {
        WeylKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| CmvError::BadConfig(format!("unknown Weyl function kind `{s}`")))
    }
}

/// What a pointwise evaluation is computed from.
#[derive(Clone, Debug)]
pub enum PointwiseSource {
    /// `m±(z) = ±∮ (ζ+z)/(ζ−z) dΩ±`.
    HalfMeasure { mu: SpectralMeasure, side: Side },
    /// `M₋(z,k0)` from the measure of `m₋(·,k0−1)` and `α_{k0}`.
    ShiftedMinus { mu: SpectralMeasure, coeffs: [ComplexMatrix; 4] },
    /// `𝓜(z) = ∮ (ζ+z)/(ζ−z) dΩ` with 2m×2m weights.
    Block { mu: BlockSpectralMeasure },
}

/// A Weyl–Titchmarsh function at anchor `k0`: a Taylor series and, when
/// available, an exact pointwise evaluator.
#[derive(Clone, Debug)]
pub struct WeylFunction {
    pub kind: WeylKind,
    pub k0: i64,
    pub series: MatrixPowerSeries,
    pub source: Option<PointwiseSource>,
}

fn cayley_value(f: &ComplexMatrix) -> Result<ComplexMatrix> {
    let id = ComplexMatrix::identity(f.rows());
    solve_right(&(f - &id), &(f + &id))
}

/// `∮ (ζ+z)/(ζ−z) dΩ` for an atomic measure.
fn herglotz_sum<'a>(atoms: impl Iterator<Item = (C64, &'a ComplexMatrix)>, dim: usize, z: C64) -> Result<ComplexMatrix> {
    let mut out = ComplexMatrix::zeros(dim, dim);
    for (node, w) in atoms {
        if (node - z).norm() < MERGE_TOL {
            return Err(CmvError::NodeCollision);
        }
        out += &w.scale((node + z) / (node - z));
    }
    Ok(out)
}

/// Pointwise `m±(z,k0)` from the half-lattice measure.
pub fn m_value(mu: &SpectralMeasure, side: Side, z: C64) -> Result<ComplexMatrix> {
    let v = herglotz_sum(mu.atoms().iter().map(|a| (a.node, &a.weight)), mu.m(), z)?;
    Ok(match side {
        Side::Plus => v,
        Side::Minus => -v,
    })
}

/// `M₋` from `m₋` at the same anchor, pointwise.
pub fn upper_minus_from_lower_value(m: &ComplexMatrix, z: C64) -> Result<ComplexMatrix> {
    let id = ComplexMatrix::identity(m.rows());
    let num = id.scale(1.0 + z) + m.scale(1.0 - z);
    let den = id.scale(1.0 - z) + m.scale(1.0 + z);
    solve_right(&num, &den)
}

/// `m₋` from `M₋` at the same anchor, pointwise.
pub fn lower_minus_from_upper_value(big: &ComplexMatrix, z: C64) -> Result<ComplexMatrix> {
    let id = ComplexMatrix::identity(big.rows());
    let a = big.scale(1.0 + z) - id.scale(1.0 - z);
    solve(&a, &(id.scale(1.0 + z) - big.scale(1.0 - z)))
}

/// Coefficients `(X₁, X₂, X₃, X₄)` of the map `m₋(·,k0−1) ↦ M₋(·,k0)`.
pub fn shift_coefficients(data: &VerblunskyData, k0: i64) -> Result<[ComplexMatrix; 4]> {
    let ri = data.rho_inv(k0)?;
    let rti = data.rho_tilde_inv(k0)?;
    let a = data.a(k0)?;
    let b = data.b(k0)?;
    Ok([
        &(rti * &a) + &(ri * &a.adjoint()),
        &(rti * &b) - &(ri * &b.adjoint()),
        &(rti * &a) - &(ri * &a.adjoint()),
        &(rti * &b) + &(ri * &b.adjoint()),
    ])
}

fn upper_value_from(kind: WeylKind, base: &ComplexMatrix, z: C64) -> Result<ComplexMatrix> {
    match kind {
        WeylKind::MPlus | WeylKind::UpperMPlus | WeylKind::UpperMMinus => Ok(base.clone()),
        WeylKind::MMinus => upper_minus_from_lower_value(base, z),
        _ => Err(CmvError::BadConfig(format!("{kind} is not a half-lattice Weyl function"))),
    }
}

fn value_from_upper(kind: WeylKind, big: &ComplexMatrix, z: C64) -> Result<ComplexMatrix> {
    match kind {
        WeylKind::MPlus | WeylKind::UpperMPlus | WeylKind::UpperMMinus => Ok(big.clone()),
        WeylKind::PhiPlus => cayley_value(big),
        WeylKind::PhiMinusInv => {
            let id = ComplexMatrix::identity(big.rows());
            solve_right(&(big + &id), &(big - &id))
        }
        WeylKind::MMinus => lower_minus_from_upper_value(big, z),
        _ => Err(CmvError::BadConfig(format!("{kind} is not a half-lattice Weyl function"))),
    }
}

impl WeylFunction {
    pub fn m(&self) -> usize {
        self.series.m()
    }

    pub fn order(&self) -> usize {
        self.series.order()
    }

    /// Exact value from the attached source, else the series partial sum.
    pub fn value(&self, z: C64) -> Result<ComplexMatrix> {
        match &self.source {
            None => Ok(self.series.eval(z)),
            Some(PointwiseSource::Block { mu }) => {
                let m = mu.m();
                let full = herglotz_sum(mu.atoms().iter().map(|a| (a.node, &a.weight)), 2 * m, z)?;
                let blk = |l: usize, lp: usize| full.block(l * m, lp * m, m, m);
                match self.kind {
                    WeylKind::M00 => Ok(blk(0, 0)),
                    WeylKind::M01 => Ok(blk(0, 1)),
                    WeylKind::M10 => Ok(blk(1, 0)),
                    WeylKind::M11 => Ok(blk(1, 1)),
                    WeylKind::Phi11 => cayley_value(&blk(1, 1)),
                    k => Err(CmvError::BadConfig(format!("{k} is not a block Weyl function"))),
                }
            }
            Some(PointwiseSource::HalfMeasure { mu, side }) => {
                if z.norm() < 1e-14 && self.kind.side() == Some(Side::Minus) && self.kind != WeylKind::MMinus {
                    return Ok(self.series.coeff(0).clone());
                }
                let base_kind = if *side == Side::Plus { WeylKind::MPlus } else { WeylKind::MMinus };
                let base = m_value(mu, *side, z)?;
                value_from_upper(self.kind, &upper_value_from(base_kind, &base, z)?, z)
            }
            Some(PointwiseSource::ShiftedMinus { mu, coeffs }) => {
                if z.norm() < 1e-14 && self.kind == WeylKind::MMinus {
                    return Ok(self.series.coeff(0).clone());
                }
                let prev = m_value(mu, Side::Minus, z)?;
                let [x1, x2, x3, x4] = coeffs;
                let big = solve_right(&(x1 + &(x2 * &prev)), &(x3 + &(x4 * &prev)))?;
                value_from_upper(self.kind, &big, z)
            }
        }
    }
}

/// `±I ± 2 Σ_{k≥1} zᵏ (∮ ζᵏ dΩ)*` to order `order`.
pub fn m_series_from_measure(mu: &SpectralMeasure, side: Side, order: usize) -> MatrixPowerSeries {
    let sign = if side == Side::Plus { 1.0 } else { -1.0 };
    let m = mu.m();
    let mut coeffs = vec![ComplexMatrix::identity(m).scale_re(sign)];
    coeffs.extend((1..=order as i64).map(|k| mu.moment(k).adjoint().scale_re(2.0 * sign)));
    MatrixPowerSeries::new(coeffs).expect("nonempty, square")
}

/// `m±(·,k0)` of a half-lattice measure, as a series of order `order` with
/// the exact pointwise evaluator attached.
pub fn m_from_measure(mu: &SpectralMeasure, side: Side, k0: i64, order: usize) -> WeylFunction {
    let kind = if side == Side::Plus { WeylKind::MPlus } else { WeylKind::MMinus };
    WeylFunction {
        kind,
        k0,
        series: m_series_from_measure(mu, side, order),
        source: Some(PointwiseSource::HalfMeasure { mu: mu.clone(), side }),
    }
}

/// Block `M_{ℓℓ'}` (or `Φ₁₁`) of the full-lattice measure.
pub fn block_function(mu: &BlockSpectralMeasure, kind: WeylKind, order: usize) -> Result<WeylFunction> {
    let m = mu.m();
    let (l, lp) = match kind {
        WeylKind::M00 => (0, 0),
        WeylKind::M01 => (0, 1),
        WeylKind::M10 => (1, 0),
        WeylKind::M11 | WeylKind::Phi11 => (1, 1),
        k => return Err(CmvError::BadConfig(format!("{k} is not a block Weyl function"))),
    };
    let blk = |x: ComplexMatrix| x.block(l * m, lp * m, m, m);
    let mut coeffs = vec![blk(mu.moment(0))];
    coeffs.extend((1..=order as i64).map(|k| blk(mu.moment(-k)).scale_re(2.0)));
    let mut series = MatrixPowerSeries::new(coeffs)?;
    if kind == WeylKind::Phi11 {
        series = cayley_series(&series)?;
    }
    Ok(WeylFunction { kind, k0: mu.k0(), series, source: Some(PointwiseSource::Block { mu: mu.clone() }) })
}

/// `Φ₊(z,k) = Σ_{j≥1} φ_j(k) zʲ` from `α_{k+1} ..= α_{k+order}`.
pub fn phi_plus_series(data: &VerblunskyData, k: i64, order: usize) -> Result<MatrixPowerSeries> {
    let m = data.m();
    if order == 0 {
        return Ok(MatrixPowerSeries::zero(m, 0));
    }
    for s in [k + 1, k + order as i64] {
        if !data.contains(s) {
            return Err(CmvError::OutOfWindow(s));
        }
    }
    // Level i holds the coefficients of Φ₊(·, k + i) up to order `order - i`.
    let mut next: Vec<ComplexMatrix> = vec![ComplexMatrix::zeros(m, m)];
    for i in (0..order).rev() {
        let site = k + i as i64 + 1;
        let n = order - i;
        let alpha = data.alpha(site)?;
        let rho = data.rho(site)?;
        let rti = data.rho_tilde_inv(site)?;
        let mid = rti * alpha;
        let mut cur = vec![ComplexMatrix::zeros(m, m); n + 1];
        cur[1] = -alpha.adjoint();
        for j in 2..=n {
            let mut acc = &next[j - 1] * rti;
            for l in 1..j {
                acc += &(&(&next[j - l] * &mid) * &cur[l]);
            }
            cur[j] = rho * &acc;
        }
        next = cur;
    }
    MatrixPowerSeries::new(next)
}

/// `Φ₋(z,k)⁻¹ = Σ_{j≥0} φ_j(k) zʲ` from `α_k, α_{k-1}, …, α_{k-order}`.
pub fn phi_minus_inv_series(data: &VerblunskyData, k: i64, order: usize) -> Result<MatrixPowerSeries> {
    for s in [k, k - order as i64] {
        if !data.contains(s) {
            return Err(CmvError::OutOfWindow(s));
        }
    }
    // Level i holds the coefficients of Φ₋⁻¹(·, k - order + i) up to order i.
    let mut prev: Vec<ComplexMatrix> = vec![data.alpha(k - order as i64)?.clone()];
    for i in 1..=order {
        let site = k - order as i64 + i as i64;
        let alpha = data.alpha(site)?;
        let rho = data.rho(site)?;
        let ri = data.rho_inv(site)?;
        let rti = data.rho_tilde_inv(site)?;
        let mid = ri * &alpha.adjoint();
        let mut cur = vec![alpha.clone()];
        for j in 1..=i {
            let mut acc = rti * &prev[j - 1];
            for l in 0..j {
                acc -= &(&(&cur[l] * &mid) * &prev[j - 1 - l]);
            }
            cur.push(&acc * rho);
        }
        prev = cur;
    }
    MatrixPowerSeries::new(prev)
}

/// Residual of `Φ(k)ρ̃⁻¹αΦ(k−1) + zΦ(k)ρ̃⁻¹ − ρ⁻¹Φ(k−1) − zρ⁻¹α*` (indices at `k`).
pub fn phi_plus_riccati_residual(
    data: &VerblunskyData,
    k: i64,
    phi_k: &MatrixPowerSeries,
    phi_prev: &MatrixPowerSeries,
) -> Result<MatrixPowerSeries> {
    let alpha = data.alpha(k)?;
    let ri = data.rho_inv(k)?;
    let rti = data.rho_tilde_inv(k)?;
    let n = phi_k.order().min(phi_prev.order());
    let (a, b) = (phi_k.truncate(n), phi_prev.truncate(n));
    let quad = a.right_mul(&(rti * alpha)).mul(&b)?;
    let lin = a.right_mul(rti).mul_z().truncate(n);
    let back = b.left_mul(ri);
    let rhs = MatrixPowerSeries::linear(ComplexMatrix::zeros(a.m(), a.m()), ri * &alpha.adjoint(), n);
    quad.add(&lin)?.sub(&back)?.sub(&rhs)
}

/// Residual of `zY(k)ρ⁻¹α*Y(k−1) + Y(k)ρ⁻¹ − zρ̃⁻¹Y(k−1) − ρ̃⁻¹α` with `Y = Φ₋⁻¹`.
pub fn phi_minus_inv_riccati_residual(
    data: &VerblunskyData,
    k: i64,
    y_k: &MatrixPowerSeries,
    y_prev: &MatrixPowerSeries,
) -> Result<MatrixPowerSeries> {
    let alpha = data.alpha(k)?;
    let ri = data.rho_inv(k)?;
    let rti = data.rho_tilde_inv(k)?;
    let n = y_k.order().min(y_prev.order());
    let (a, b) = (y_k.truncate(n), y_prev.truncate(n));
    let quad = a.right_mul(&(ri * &alpha.adjoint())).mul(&b)?.mul_z().truncate(n);
    let lin = a.right_mul(ri);
    let back = b.left_mul(rti).mul_z().truncate(n);
    let rhs = MatrixPowerSeries::constant(rti * alpha, n);
    quad.add(&lin)?.sub(&back)?.sub(&rhs)
}

/// `(F − I)(F + I)⁻¹` on series.
pub fn cayley_series(f: &MatrixPowerSeries) -> Result<MatrixPowerSeries> {
    let id = ComplexMatrix::identity(f.m());
    f.add_constant(&-&id).div_right(&f.add_constant(&id))
}

/// `(I − Φ)⁻¹(I + Φ)` on series.
pub fn inverse_cayley_series(phi: &MatrixPowerSeries) -> Result<MatrixPowerSeries> {
    let id = ComplexMatrix::identity(phi.m());
    phi.add_constant(&id).div_left(&phi.neg().add_constant(&id))
}

fn upper_minus_to_y(big: &MatrixPowerSeries) -> Result<MatrixPowerSeries> {
    let id = ComplexMatrix::identity(big.m());
    big.add_constant(&id).div_right(&big.add_constant(&-&id))
}

fn y_to_upper_minus(y: &MatrixPowerSeries) -> Result<MatrixPowerSeries> {
    let id = ComplexMatrix::identity(y.m());
    y.add_constant(&id).div_left(&y.add_constant(&-&id))
}

/// `m₋ → M₋`; the result is one order shorter.
fn lower_to_upper_minus(m: &MatrixPowerSeries) -> Result<MatrixPowerSeries> {
    let id = ComplexMatrix::identity(m.m());
    let n = m.order();
    let one_plus = MatrixPowerSeries::linear(id.clone(), id.clone(), n);
    let one_minus = MatrixPowerSeries::linear(id.clone(), -&id, n);
    let num = one_plus.add(&one_minus.mul(m)?)?.div_z(DIV_Z_TOL)?;
    let den = one_minus.add(&one_plus.mul(m)?)?.div_z(DIV_Z_TOL)?;
    num.div_right(&den)
}

/// `M₋ → m₋`; the result is one order longer.
fn upper_to_lower_minus(big: &MatrixPowerSeries) -> Result<MatrixPowerSeries> {
    let id = ComplexMatrix::identity(big.m());
    let n = big.order();
    let one_plus = MatrixPowerSeries::linear(id.clone(), id.clone(), n);
    let one_minus = MatrixPowerSeries::linear(id.clone(), -&id, n);
    let a = one_plus.mul(big)?.sub(&one_minus)?;
    let tail = big.add_constant(&id).div_left(&a)?.scale(C64::new(2.0, 0.0)).mul_z();
    Ok(tail.add_constant(&-&id))
}

/// `m₋ → Φ₋⁻¹`; one order shorter.
fn lower_minus_to_y(m: &MatrixPowerSeries) -> Result<MatrixPowerSeries> {
    let id = ComplexMatrix::identity(m.m());
    let num = m.add_constant(&id).div_z(DIV_Z_TOL)?;
    let den = m.neg().add_constant(&id).truncate(num.order());
    num.div_right(&den)
}

/// `Φ₋⁻¹ → m₋`; one order longer.
fn y_to_lower_minus(y: &MatrixPowerSeries) -> Result<MatrixPowerSeries> {
    let id = ComplexMatrix::identity(y.m());
    let zy = y.mul_z();
    zy.add_constant(&-&id).div_left(&zy.add_constant(&id))
}

/// Moves along the conversion graph `m₊ ↔ M₊ ↔ Φ₊` and
/// `m₋ ↔ M₋ ↔ Φ₋⁻¹`, `m₋ ↔ Φ₋⁻¹`; the pointwise source is carried along.
pub fn convert(f: &WeylFunction, to: WeylKind) -> Result<WeylFunction> {
    use WeylKind::*;
    let s = &f.series;
    let series = match (f.kind, to) {
        (a, b) if a == b => s.clone(),
        (MPlus, UpperMPlus) | (UpperMPlus, MPlus) => s.clone(),
        (MPlus, PhiPlus) | (UpperMPlus, PhiPlus) => cayley_series(s)?,
        (PhiPlus, MPlus) | (PhiPlus, UpperMPlus) => inverse_cayley_series(s)?,
        (MMinus, UpperMMinus) => lower_to_upper_minus(s)?,
        (UpperMMinus, MMinus) => upper_to_lower_minus(s)?,
        (UpperMMinus, PhiMinusInv) => upper_minus_to_y(s)?,
        (PhiMinusInv, UpperMMinus) => y_to_upper_minus(s)?,
        (MMinus, PhiMinusInv) => lower_minus_to_y(s)?,
        (PhiMinusInv, MMinus) => y_to_lower_minus(s)?,
        (M11, Phi11) => cayley_series(s)?,
        (Phi11, M11) => inverse_cayley_series(s)?,
        (a, b) => return Err(CmvError::BadConfig(format!("no conversion from {a} to {b}"))),
    };
    Ok(WeylFunction { kind: to, k0: f.k0, series, source: f.source.clone() })
}

/// `m₋(·,k0−1) ↦ M₋(·,k0)` using `α_{k0}`.
pub fn shift_minus(f: &WeylFunction, data: Option<&VerblunskyData>) -> Result<WeylFunction> {
    if f.kind != WeylKind::MMinus {
        return Err(CmvError::BadConfig(format!("expects m_minus, got {}", f.kind)));
    }
    let data = data.ok_or(CmvError::MissingAlpha)?;
    let k0 = f.k0 + 1;
    if !data.contains(k0) {
        return Err(CmvError::MissingAlpha);
    }
    let coeffs = shift_coefficients(data, k0)?;
    let [x1, x2, x3, x4] = &coeffs;
    let series = f.series.linear_fractional(x1, x2, x3, x4)?;
    let source = match &f.source {
        Some(PointwiseSource::HalfMeasure { mu, side: Side::Minus }) => {
            Some(PointwiseSource::ShiftedMinus { mu: mu.clone(), coeffs: coeffs.clone() })
        }
        _ => None,
    };
    Ok(WeylFunction { kind: WeylKind::UpperMMinus, k0, series, source })
}

/// Cayley image `(F − I)(F + I)⁻¹` of a Carathéodory function.
pub fn schur_cayley(f: &WeylFunction) -> Result<WeylFunction> {
    match f.kind {
        WeylKind::MPlus | WeylKind::UpperMPlus => convert(f, WeylKind::PhiPlus),
        WeylKind::M11 => convert(f, WeylKind::Phi11),
        k => Ok(WeylFunction { kind: k, k0: f.k0, series: cayley_series(&f.series)?, source: None }),
    }
}

pub const GRID_RADII: [f64; 3] = [0.3, 0.6, 0.9];
pub const GRID_ANGLES: usize = 16;

pub fn sample_grid() -> Vec<C64> {
    GRID_RADII
        .iter()
        .flat_map(|&r| (0..GRID_ANGLES).map(move |j| C64::from_polar(r, std::f64::consts::TAU * j as f64 / GRID_ANGLES as f64)))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CaratheodoryDiagnostics {
    /// Smallest eigenvalue of `Re F` over the grid.
    pub min_real_part: f64,
    /// Largest operator norm over the grid.
    pub max_norm: f64,
    /// `‖F(z) − iC − Σ w_j (ζ_j+z)/(ζ_j−z)‖` maximized over the grid, `C = Im F(0)`.
    pub herglotz_residual: Option<f64>,
    /// `‖F(z) + F(1/z̄)*‖` at `z = 2, 3i`.
    pub reflection_residual: Option<f64>,
    /// Grid points where evaluation failed.
    pub failures: usize,
}

impl CaratheodoryDiagnostics {
    pub fn is_caratheodory(&self, tol: f64) -> bool {
        self.failures == 0 && self.min_real_part >= -tol
    }

    pub fn is_schur(&self, tol: f64) -> bool {
        self.failures == 0 && self.max_norm <= 1.0 + tol
    }
}

fn herglotz_reference(f: &WeylFunction, z: C64) -> Option<Result<ComplexMatrix>> {
    match (&f.source, f.kind) {
        (Some(PointwiseSource::HalfMeasure { mu, side }), WeylKind::MPlus | WeylKind::UpperMPlus)
            if *side == Side::Plus =>
        {
            Some(herglotz_sum(mu.atoms().iter().map(|a| (a.node, &a.weight)), mu.m(), z))
        }
        (Some(PointwiseSource::HalfMeasure { mu, side }), WeylKind::MMinus) if *side == Side::Minus => {
            Some(herglotz_sum(mu.atoms().iter().map(|a| (a.node, &a.weight)), mu.m(), z).map(|v| -v))
        }
        (Some(PointwiseSource::Block { mu }), WeylKind::M00 | WeylKind::M11) => {
            let m = mu.m();
            let o = if f.kind == WeylKind::M00 { 0 } else { m };
            let atoms: Vec<(C64, ComplexMatrix)> =
                mu.atoms().iter().map(|a| (a.node, a.weight.block(o, o, m, m))).collect();
            Some(herglotz_sum(atoms.iter().map(|(n, w)| (*n, w)), m, z))
        }
        _ => None,
    }
}

/// Grid diagnostics; evaluation failures are counted, never raised.
pub fn caratheodory_tools(f: &WeylFunction) -> CaratheodoryDiagnostics {
    let mut min_re = f64::INFINITY;
    let mut max_norm: f64 = 0.0;
    let mut failures = 0;
    let c_im = f.value(C64::new(0.0, 0.0)).ok().map(|v0| {
        let skew = &v0 - &v0.adjoint();
        skew.scale(C64::new(0.0, -0.5))
    });
    let mut herglotz: Option<f64> = None;
    for z in sample_grid() {
        match f.value(z) {
            Ok(v) => {
                min_re = min_re.min(crate::linalg::min_herm_eigenvalue(&v.hermitian_part()));
                max_norm = max_norm.max(op_norm(&v));
                if let (Some(Ok(reference)), Some(c)) = (herglotz_reference(f, z), &c_im) {
                    let res = (&(&v - &c.scale(C64::new(0.0, 1.0))) - &reference).frobenius_norm();
                    herglotz = Some(herglotz.unwrap_or(0.0).max(res));
                }
            }
            Err(_) => failures += 1,
        }
    }
    let reflection = if f.source.is_some() {
        let mut worst: f64 = 0.0;
        let mut ok = true;
        for z in [C64::new(2.0, 0.0), C64::new(0.0, 3.0)] {
            let w = C64::new(1.0, 0.0) / z.conj();
            match (f.value(z), f.value(w)) {
                (Ok(a), Ok(b)) => worst = worst.max((&a + &b.adjoint()).frobenius_norm()),
                _ => ok = false,
            }
        }
        ok.then_some(worst)
    } else {
        None
    };
    CaratheodoryDiagnostics {
        min_real_part: min_re,
        max_norm,
        herglotz_residual: herglotz,
        reflection_residual: if f.kind.is_caratheodory() || f.kind.is_anti_caratheodory() { reflection } else { None },
        failures,
    }
}

/// `M±(0,k0)` predicted from the coefficients: `I` and `(α+I)(α−I)⁻¹`.
pub fn upper_m_at_zero(data: &VerblunskyData, k0: i64, side: Side) -> Result<ComplexMatrix> {
    let m = data.m();
    match side {
        Side::Plus => Ok(ComplexMatrix::identity(m)),
        Side::Minus => {
            let a = data.alpha(k0)?;
            let id = ComplexMatrix::identity(m);
            Ok(&(a + &id) * &inverse(&(a - &id))?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::spectral::{block_measure, measure_from_operator};
    use crate::verblunsky::{build_cmv, half_lattice, sample_alphas};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar_const(k_min: i64, len: usize, x: f64) -> VerblunskyData {
        VerblunskyData::derive(k_min, vec![ComplexMatrix::real_diag(&[x]); len]).unwrap()
    }

    fn random_data(seed: u64, m: usize, k_min: i64, len: usize, cap: f64) -> VerblunskyData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        VerblunskyData::derive(k_min, sample_alphas(&mut rng, m, len, cap).unwrap()).unwrap()
    }

    fn half_m(d: &VerblunskyData, k0: i64, side: Side, order: usize) -> WeylFunction {
        let op = half_lattice(d, k0, side).unwrap();
        m_from_measure(&measure_from_operator(&op, k0).unwrap(), side, k0, order)
    }

    #[test]
    fn phi_plus_leading_coefficients() {
        let d = random_data(1, 2, 0, 20, 0.8);
        let s = phi_plus_series(&d, 5, 4).unwrap();
        assert!(s.coeff(0).is_zero());
        assert!((s.coeff(1) + &d.alpha(6).unwrap().adjoint()).max_abs() < 1e-15);
        let expect = -&(&(d.rho(6).unwrap() * &d.alpha(7).unwrap().adjoint()) * d.rho_tilde(6).unwrap());
        assert!((s.coeff(2) - &expect).max_abs() < 1e-14);
        let half = scalar_const(0, 10, 0.5);
        let s = phi_plus_series(&half, 2, 3).unwrap();
        assert!((s.coeff(2)[(0, 0)] - c(-0.375, 0.0)).norm() < 1e-14);
        let free = scalar_const(0, 10, 0.0);
        assert!(phi_plus_series(&free, 2, 5).unwrap().max_abs() == 0.0);
    }

    #[test]
    fn phi_minus_inv_leading_coefficients() {
        let d = random_data(2, 2, 0, 20, 0.8);
        let s = phi_minus_inv_series(&d, 12, 4).unwrap();
        assert_eq!(s.coeff(0), d.alpha(12).unwrap());
        let expect = &(d.rho_tilde(12).unwrap() * d.alpha(11).unwrap()) * d.rho(12).unwrap();
        assert!((s.coeff(1) - &expect).max_abs() < 1e-14);
        let half = scalar_const(0, 10, 0.5);
        let s = phi_minus_inv_series(&half, 8, 3).unwrap();
        assert!((s.coeff(1)[(0, 0)] - c(0.375, 0.0)).norm() < 1e-14);
        let free = scalar_const(0, 10, 0.0);
        assert!(phi_minus_inv_series(&free, 8, 5).unwrap().max_abs() == 0.0);
    }

    #[test]
    fn series_windows() {
        let d = scalar_const(0, 10, 0.2);
        assert_eq!(phi_plus_series(&d, 3, 7).unwrap_err(), CmvError::OutOfWindow(10));
        assert_eq!(phi_minus_inv_series(&d, 3, 4).unwrap_err(), CmvError::OutOfWindow(-1));
    }

    #[test]
    fn riccati_residuals_vanish() {
        for m in 1..=3 {
            let d = random_data(10 + m as u64, m, 0, 40, 0.8);
            for k in [15i64, 16] {
                let a = phi_plus_series(&d, k, 8).unwrap();
                let b = phi_plus_series(&d, k - 1, 8).unwrap();
                assert!(phi_plus_riccati_residual(&d, k, &a, &b).unwrap().max_abs() < 1e-10);
                let a = phi_minus_inv_series(&d, k, 8).unwrap();
                let b = phi_minus_inv_series(&d, k - 1, 8).unwrap();
                assert!(phi_minus_inv_riccati_residual(&d, k, &a, &b).unwrap().max_abs() < 1e-10);
            }
        }
    }

    #[test]
    fn phi_plus_locality() {
        let d = random_data(3, 2, 0, 20, 0.7);
        let k = 4;
        for j in 1..=5usize {
            let s = phi_plus_series(&d, k, j).unwrap();
            let bumped = d.with_alpha(k + j as i64 + 1, ComplexMatrix::identity(2).scale_re(0.3)).unwrap();
            let t = phi_plus_series(&bumped, k, j).unwrap();
            assert_eq!(s, t);
        }
    }

    #[test]
    fn m_series_matches_moments() {
        let d = random_data(4, 2, 0, 30, 0.7);
        let op = half_lattice(&d, 10, Side::Plus).unwrap();
        let mu = measure_from_operator(&op, 10).unwrap();
        let f = m_from_measure(&mu, Side::Plus, 10, 4);
        for k in 1..=4 {
            assert!((f.series.coeff(k) - &mu.moment(k as i64).adjoint().scale_re(2.0)).max_abs() < 1e-14);
        }
        let z = c(0.1, 0.05);
        assert!((f.value(z).unwrap() - f.series.eval(z)).max_abs() < 1e-3);
    }

    #[test]
    fn free_case_functions() {
        let d = scalar_const(0, 40, 0.0);
        let plus = half_m(&d, 20, Side::Plus, 3);
        // Exact up to the truncation's return time, roughly |z|^40 here.
        assert!((plus.value(c(0.4, 0.1)).unwrap() - ComplexMatrix::identity(1)).max_abs() < 1e-7);
        let minus = half_m(&d, 20, Side::Minus, 6);
        let big = convert(&minus, WeylKind::UpperMMinus).unwrap();
        assert!((big.series.coeff(0) + &ComplexMatrix::identity(1)).max_abs() < 1e-12);
        assert!(convert(&plus, WeylKind::PhiPlus).unwrap().series.max_abs() < 1e-12);
        assert!(convert(&minus, WeylKind::PhiMinusInv).unwrap().series.max_abs() < 1e-12);
    }

    #[test]
    fn upper_minus_at_zero() {
        let d = scalar_const(0, 40, 0.5);
        let v = upper_m_at_zero(&d, 5, Side::Minus).unwrap();
        assert!((v[(0, 0)] - c(-3.0, 0.0)).norm() < 1e-14);
        let f = convert(&half_m(&d, 20, Side::Minus, 5), WeylKind::UpperMMinus).unwrap();
        assert!((f.series.coeff(0)[(0, 0)] - c(-3.0, 0.0)).norm() < 1e-10);
        let p = convert(&half_m(&d, 20, Side::Plus, 5), WeylKind::UpperMPlus).unwrap();
        assert!((p.series.coeff(0) - &ComplexMatrix::identity(1)).max_abs() < 1e-12);
    }

    #[test]
    fn dual_route_plus() {
        let d = scalar_const(0, 65, 0.5);
        let from_measure = half_m(&d, 10, Side::Plus, 4);
        let phi = phi_plus_series(&d, 10, 4).unwrap();
        let from_phi = inverse_cayley_series(&phi).unwrap();
        assert!(from_measure.series.distance(&from_phi) < 1e-6);

        let d = random_data(5, 2, 0, 65, 0.7);
        let from_measure = half_m(&d, 10, Side::Plus, 4);
        let from_phi = inverse_cayley_series(&phi_plus_series(&d, 10, 4).unwrap()).unwrap();
        assert!(from_measure.series.distance(&from_phi) < 1e-6);
    }

    #[test]
    fn dual_route_minus() {
        let d = random_data(6, 2, 0, 65, 0.7);
        for k0 in [40i64, 41] {
            let mminus = half_m(&d, k0, Side::Minus, 6);
            let y = convert(&mminus, WeylKind::PhiMinusInv).unwrap();
            let direct = phi_minus_inv_series(&d, k0, 5).unwrap();
            assert!(y.series.distance(&direct) < 1e-8, "k0={k0}");
            let via_upper = convert(&convert(&mminus, WeylKind::UpperMMinus).unwrap(), WeylKind::PhiMinusInv).unwrap();
            assert!(via_upper.series.distance(&direct) < 1e-8);
        }
    }

    #[test]
    fn shift_minus_matches_anchor() {
        let d = random_data(7, 2, 0, 65, 0.7);
        let k0 = 41;
        let prev = half_m(&d, k0 - 1, Side::Minus, 6);
        assert_eq!(shift_minus(&prev, None).unwrap_err(), CmvError::MissingAlpha);
        let shifted = shift_minus(&prev, Some(&d)).unwrap();
        let direct = convert(&half_m(&d, k0, Side::Minus, 7), WeylKind::UpperMMinus).unwrap();
        assert!(shifted.series.distance(&direct.series) < 1e-8);
        let z = c(0.3, -0.4);
        assert!((shifted.value(z).unwrap() - direct.value(z).unwrap()).max_abs() < 1e-9);
        assert!((shifted.series.coeff(0) - &upper_m_at_zero(&d, k0, Side::Minus).unwrap()).max_abs() < 1e-10);
    }

    #[test]
    fn conversion_cycles() {
        let d = random_data(8, 2, 0, 65, 0.7);
        let plus = half_m(&d, 30, Side::Plus, 8);
        let back = convert(&convert(&plus, WeylKind::PhiPlus).unwrap(), WeylKind::MPlus).unwrap();
        assert!(back.series.distance(&plus.series) < 1e-9);
        let minus = half_m(&d, 30, Side::Minus, 8);
        let y = convert(&minus, WeylKind::PhiMinusInv).unwrap();
        let round = convert(&y, WeylKind::MMinus).unwrap();
        assert_eq!(round.order(), 8);
        assert!(round.series.distance(&minus.series) < 1e-9);
        let cycle = convert(
            &convert(&convert(&minus, WeylKind::UpperMMinus).unwrap(), WeylKind::PhiMinusInv).unwrap(),
            WeylKind::MMinus,
        )
        .unwrap();
        assert!(cycle.series.distance(&minus.series) < 1e-9);
        let up = convert(&minus, WeylKind::UpperMMinus).unwrap();
        let m_again = convert(&up, WeylKind::MMinus).unwrap();
        assert!(m_again.series.distance(&minus.series) < 1e-9);
    }

    #[test]
    fn pointwise_conversions_agree_with_series() {
        let d = random_data(9, 2, 0, 65, 0.6);
        let z = c(0.05, 0.02);
        for side in [Side::Plus, Side::Minus] {
            let base = half_m(&d, 30, side, 14);
            let kinds: &[WeylKind] = if side == Side::Plus {
                &[WeylKind::MPlus, WeylKind::UpperMPlus, WeylKind::PhiPlus]
            } else {
                &[WeylKind::MMinus, WeylKind::UpperMMinus, WeylKind::PhiMinusInv]
            };
            for &k in kinds {
                let f = convert(&base, k).unwrap();
                assert!((f.value(z).unwrap() - f.series.eval(z)).max_abs() < 1e-9, "{k}");
            }
        }
    }

    #[test]
    fn caratheodory_and_schur_grid() {
        let d = random_data(10, 2, 0, 40, 0.8);
        let plus = half_m(&d, 20, Side::Plus, 4);
        let diag = caratheodory_tools(&plus);
        assert!(diag.is_caratheodory(1e-9));
        assert!(diag.herglotz_residual.unwrap() < 1e-9);
        assert!(diag.reflection_residual.unwrap() < 1e-9);
        let minus = half_m(&d, 20, Side::Minus, 4);
        let diag = caratheodory_tools(&minus);
        assert!(diag.min_real_part.is_finite());
        assert!(caratheodory_tools(&convert(&minus, WeylKind::UpperMMinus).unwrap()).failures == 0);
        for (f, k) in [(&plus, WeylKind::PhiPlus), (&minus, WeylKind::PhiMinusInv)] {
            let phi = convert(f, k).unwrap();
            assert!(caratheodory_tools(&phi).is_schur(1e-9), "{k}");
        }
        let op = build_cmv(&d, true, true).unwrap();
        let block = block_measure(&op, 20).unwrap();
        for k in [WeylKind::M00, WeylKind::M11] {
            let f = block_function(&block, k, 3).unwrap();
            let diag = caratheodory_tools(&f);
            assert!(diag.is_caratheodory(1e-9));
            assert!(diag.herglotz_residual.unwrap() < 1e-9);
        }
        assert!(caratheodory_tools(&block_function(&block, WeylKind::Phi11, 3).unwrap()).is_schur(1e-9));
    }

    #[test]
    fn anti_caratheodory_minus_side() {
        let d = random_data(11, 2, 0, 40, 0.8);
        let minus = half_m(&d, 20, Side::Minus, 4);
        let mut max_re = f64::NEG_INFINITY;
        for z in sample_grid() {
            let v = minus.value(z).unwrap();
            let herm = v.hermitian_part();
            max_re = max_re.max(-crate::linalg::min_herm_eigenvalue(&-&herm));
        }
        assert!(max_re <= 1e-9);
    }

    #[test]
    fn cayley_of_identity_is_zero() {
        let f = WeylFunction {
            kind: WeylKind::UpperMPlus,
            k0: 0,
            series: MatrixPowerSeries::identity(2, 3),
            source: None,
        };
        assert!(schur_cayley(&f).unwrap().series.max_abs() == 0.0);
    }

    #[test]
    fn block_m11_at_zero_and_symmetry() {
        let d = random_data(12, 2, 0, 40, 0.7);
        let op = build_cmv(&d, true, true).unwrap();
        let block = block_measure(&op, 20).unwrap();
        let m11 = block_function(&block, WeylKind::M11, 2).unwrap();
        assert!((m11.series.coeff(0) - &ComplexMatrix::identity(2)).max_abs() < 1e-9);
        let m00_next = block_function(&block_measure(&op, 21).unwrap(), WeylKind::M00, 4).unwrap();
        let m11_here = block_function(&block, WeylKind::M11, 4).unwrap();
        assert!(m00_next.series.distance(&m11_here.series) < 1e-10);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in WeylKind::ALL {
            assert_eq!(k.name().parse::<WeylKind>().unwrap(), k);
        }
        assert!("nope".parse::<WeylKind>().is_err());
    }
}
