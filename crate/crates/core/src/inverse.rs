//! Reconstruction of Verblunsky coefficients from spectral data: the matrix
//! Riccati fixed point, half-lattice inversion from moments or Taylor data,
//! and full-lattice inversion from Green's data `g`, `h`.

use std::collections::BTreeMap;

use crate::error::{CmvError, Result};
use crate::greens::{greens_direct, greens_series, required_radius, GreensData};
use crate::linalg::{condition_number, herm_sqrt, inverse, op_norm, ComplexMatrix, C64};
use crate::series::MatrixPowerSeries;
use crate::spectral::{reconstruct_alpha_moments, MomentTable, SpectralMeasure};
use crate::verblunsky::{Side, VerblunskyData};
use crate::weyl::{convert, WeylFunction, WeylKind};

/// A matrix counts as invertible below this condition number.
pub const INVERTIBLE_COND_MAX: f64 = 1e8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RiccatiMode {
    /// Iterate `X ↦ −B⁻¹(XAX + XC + D)`.
    BInvertible,
    /// Iterate `X ↦ −(XAX + BX + D)C⁻¹`.
    CInvertible,
}

/// `XAX + BX + XC + D = 0`.
#[derive(Clone, Debug)]
pub struct RiccatiProblem {
    pub a: ComplexMatrix,
    pub b: ComplexMatrix,
    pub c: ComplexMatrix,
    pub d: ComplexMatrix,
    pub mode: RiccatiMode,
}

/// Operator norms entering the contraction estimates.
#[derive(Clone, Copy, Debug)]
struct Norms {
    a: f64,
    /// Norm of the inverted coefficient.
    inv: f64,
    /// Norm of the other linear coefficient.
    lin: f64,
    d: f64,
}

impl RiccatiProblem {
    fn norms(&self) -> Result<Norms> {
        let (inv_of, lin) = match self.mode {
            RiccatiMode::BInvertible => (&self.b, &self.c),
            RiccatiMode::CInvertible => (&self.c, &self.b),
        };
        let inv = inverse(inv_of).map_err(|_| CmvError::ContractionViolated(f64::INFINITY))?;
        Ok(Norms { a: op_norm(&self.a), inv: op_norm(&inv), lin: op_norm(lin), d: op_norm(&self.d) })
    }

    /// `[2√(‖A‖‖D‖) + ‖C‖]‖B⁻¹‖` (or the mirrored quantity); must be `< 1`.
    pub fn contraction_ratio(&self) -> Result<f64> {
        let n = self.norms()?;
        Ok((2.0 * (n.a * n.d).sqrt() + n.lin) * n.inv)
    }

    /// Radius of the ball in which the solution is unique.
    pub fn uniqueness_radius(&self) -> Result<f64> {
        let n = self.norms()?;
        Ok((1.0 - n.lin * n.inv) / (2.0 * n.a * n.inv))
    }

    /// A priori bound on `‖X‖`.
    pub fn norm_bound(&self) -> Result<f64> {
        let n = self.norms()?;
        let r = (1.0 - n.lin * n.inv) / (2.0 * n.a * n.inv);
        Ok(r - (r * r - n.d / n.a).max(0.0).sqrt())
    }

    pub fn residual(&self, x: &ComplexMatrix) -> ComplexMatrix {
        &(&(&(&(x * &self.a) * x) + &(&self.b * x)) + &(x * &self.c)) + &self.d
    }

    fn scale(&self) -> f64 {
        1.0 + op_norm(&self.a) + op_norm(&self.b) + op_norm(&self.c) + op_norm(&self.d)
    }
}

#[derive(Clone, Debug)]
pub struct RiccatiSolution {
    pub x: ComplexMatrix,
    pub iterations: usize,
    pub residual: f64,
    /// Largest `‖X_n‖` over the iterates.
    pub max_iterate_norm: f64,
    pub bound: f64,
}

/// Fixed-point iteration from `X₀ = 0`.
pub fn riccati_solve(p: &RiccatiProblem, tol: f64, max_iter: usize) -> Result<RiccatiSolution> {
    if p.a.is_zero() {
        return Err(CmvError::HypothesisViolated("quadratic coefficient A vanishes".into()));
    }
    let ratio = p.contraction_ratio()?;
    if !(ratio < 1.0) {
        return Err(CmvError::ContractionViolated(ratio));
    }
    let bound = p.norm_bound()?;
    let inv = match p.mode {
        RiccatiMode::BInvertible => inverse(&p.b)?,
        RiccatiMode::CInvertible => inverse(&p.c)?,
    };
    let step = |x: &ComplexMatrix| match p.mode {
        RiccatiMode::BInvertible => -&(&inv * &(&(&(&(x * &p.a) * x) + &(x * &p.c)) + &p.d)),
        RiccatiMode::CInvertible => -&(&(&(&(&(x * &p.a) * x) + &(&p.b * x)) + &p.d) * &inv),
    };
    let m = p.a.rows();
    let mut x = ComplexMatrix::zeros(m, m);
    let mut max_norm: f64 = 0.0;
    for it in 1..=max_iter {
        let next = step(&x);
        let delta = (&next - &x).frobenius_norm();
        x = next;
        max_norm = max_norm.max(op_norm(&x));
        if delta < tol {
            let residual = p.residual(&x).frobenius_norm();
            if residual > 10.0 * tol * p.scale() {
                return Err(CmvError::NoConvergence(it));
            }
            return Ok(RiccatiSolution { x, iterations: it, residual, max_iterate_norm: max_norm, bound });
        }
    }
    Err(CmvError::NoConvergence(max_iter))
}

/// `λ(a,b)` of the perturbation estimate.
pub fn perturbation_lambda(a: f64, b: f64) -> f64 {
    let q = 1.0 - a * b;
    let num = [
        a,
        2.0 * a * a * b / q,
        a * a * b + 2.0 * a.powi(3) * b * b / q + 4.0 * a.powi(5) * b * b / (q * q),
        4.0 * a.powi(3) * b * b / (q * q),
    ]
    .into_iter()
    .fold(f64::MIN, f64::max);
    num / (q - 4.0 * a.powi(3) * b / q)
}

/// `λ(a,b)·Σ‖ΔA‖+‖ΔB‖+‖ΔC‖+‖ΔD‖`, an upper bound on `‖X₁ − X₂‖`.
pub fn riccati_perturbation_bound(p1: &RiccatiProblem, p2: &RiccatiProblem, a: f64, b: f64) -> Result<f64> {
    if p1.mode != p2.mode {
        return Err(CmvError::HypothesisViolated("problems use different modes".into()));
    }
    if !(a > 0.0 && b > 0.0 && 2.0 * a * b * (1.0 + 2.0 * a * a) <= 1.0) {
        return Err(CmvError::HypothesisViolated(format!("2ab(1+2a²) ≤ 1 fails for a={a}, b={b}")));
    }
    for p in [p1, p2] {
        let n = p.norms().map_err(|_| CmvError::HypothesisViolated("linear coefficient is singular".into()))?;
        if !(n.a > 0.0 && n.a <= a && n.inv <= a && n.lin <= b && n.d <= b) {
            return Err(CmvError::HypothesisViolated(format!(
                "norms ‖A‖={:.3e}, inverse {:.3e}, linear {:.3e}, ‖D‖={:.3e} exceed a={a}, b={b}",
                n.a, n.inv, n.lin, n.d
            )));
        }
    }
    let diff = op_norm(&(&p1.a - &p2.a)) + op_norm(&(&p1.b - &p2.b)) + op_norm(&(&p1.c - &p2.c)) + op_norm(&(&p1.d - &p2.d));
    Ok(perturbation_lambda(a, b) * diff)
}

/// One-sided data accepted by [`half_lattice_invert`].
#[derive(Clone, Debug)]
pub enum HalfLatticeData {
    Measure(SpectralMeasure),
    /// `∮ ζᵏ dΩ` for `k = 0 ..= N`.
    Moments(MomentTable),
    /// `m±`, `M±`, `Φ₊` or `Φ₋⁻¹`.
    Taylor(WeylFunction),
}

/// Moments `0 ..= N` encoded by `m±(z) = ±I ± 2Σ zᵏ(∮ζᵏdΩ)*`.
pub fn moments_from_m(m: &MatrixPowerSeries, side: Side) -> Result<MomentTable> {
    let sign = if side == Side::Plus { 0.5 } else { -0.5 };
    let mut out = vec![ComplexMatrix::identity(m.m())];
    out.extend(m.coeffs()[1..].iter().map(|c| c.scale_re(sign).adjoint()));
    MomentTable::new(out)
}

/// Recovers `α_{k0+1} ..= α_{k0+N}` (plus) or `α_{k0−N+1} ..= α_{k0}` (minus).
///
/// `N` counts the coefficients recovered; Taylor data of `M₋` and `Φ₋⁻¹`
/// need order `N − 1`, all other kinds order `N`.
pub fn half_lattice_invert(payload: &HalfLatticeData, side: Side, k0: i64, n: usize) -> Result<Vec<(i64, ComplexMatrix)>> {
    let table = match payload {
        HalfLatticeData::Measure(mu) => MomentTable::from_measure(mu, n),
        HalfLatticeData::Moments(t) => t.clone(),
        HalfLatticeData::Taylor(f) => {
            let lower = match (side, f.kind) {
                (Side::Plus, WeylKind::MPlus | WeylKind::UpperMPlus | WeylKind::PhiPlus) => convert(f, WeylKind::MPlus)?,
                (Side::Minus, WeylKind::MMinus | WeylKind::UpperMMinus | WeylKind::PhiMinusInv) => {
                    convert(f, WeylKind::MMinus)?
                }
                (s, k) => return Err(CmvError::BadConfig(format!("{k} does not describe the {s:?} side"))),
            };
            moments_from_m(&lower.series, side)?
        }
    };
    if table.available() < n {
        return Err(CmvError::InsufficientMoments { needed: n, available: table.available() });
    }
    reconstruct_alpha_moments(&table, k0, side, n)
}

/// Recovered coefficients with the window in which the data pins them down.
#[derive(Clone, Debug)]
pub struct ReconstructionReport {
    pub route: String,
    pub k0: i64,
    pub order: usize,
    pub recovered: BTreeMap<i64, ComplexMatrix>,
    pub window: (i64, i64),
    pub errors: Option<BTreeMap<i64, f64>>,
    /// Named residuals of internal cross-checks.
    pub checks: Vec<(String, f64)>,
}

impl ReconstructionReport {
    /// Fills per-site errors against known coefficients.
    pub fn compare(&mut self, reference: &VerblunskyData) {
        let errs = self
            .recovered
            .iter()
            .filter_map(|(&k, a)| reference.alpha(k).ok().map(|r| (k, op_norm(&(a - r)))))
            .collect();
        self.errors = Some(errs);
    }

    /// Largest error inside the guaranteed window.
    pub fn max_window_error(&self) -> Option<f64> {
        let errs = self.errors.as_ref()?;
        Some((self.window.0..=self.window.1).filter_map(|k| errs.get(&k)).cloned().fold(0.0, f64::max))
    }

    fn insert(&mut self, list: Vec<(i64, ComplexMatrix)>) {
        self.recovered.extend(list);
    }
}

fn check_greens(g: &GreensData, h: &GreensData) -> Result<usize> {
    if g.k0 != h.k0 || g.g.m() != h.h.m() {
        return Err(CmvError::ShapeMismatch("g and h refer to different anchors or sizes".into()));
    }
    Ok(g.g.order().min(h.h.order()))
}

fn rho_from(x: &ComplexMatrix) -> Result<ComplexMatrix> {
    let id = ComplexMatrix::identity(x.rows());
    inverse(&herm_sqrt(&(&id + &(&x.adjoint() * x)).hermitian_part())?)
}

fn rho_tilde_of(alpha: &ComplexMatrix) -> Result<ComplexMatrix> {
    let id = ComplexMatrix::identity(alpha.rows());
    herm_sqrt(&(&id - &(alpha * &alpha.adjoint())).hermitian_part())
}

/// Case (i): reconstruction from `g(·,k0)`, `h(·,k0)` through order `N`.
/// Recovers `α_k` on `[k0−N, k0+N+1]`.
pub fn full_lattice_invert_gh(data: &GreensData, n: usize) -> Result<ReconstructionReport> {
    full_lattice_invert_gh_parts(data, data, n)
}

fn full_lattice_invert_gh_parts(gd: &GreensData, hd: &GreensData, n: usize) -> Result<ReconstructionReport> {
    let avail = check_greens(gd, hd)?;
    if avail < n {
        return Err(CmvError::WindowTooNarrow { order: n, needed: avail as i64 });
    }
    let k0 = gd.k0;
    let g = gd.g.truncate(n);
    let h = hd.h.truncate(n);
    let m = g.m();
    let id = ComplexMatrix::identity(m);
    let (g0, h0) = (g.coeff(0).clone(), h.coeff(0).clone());
    if !(condition_number(&h0) < INVERTIBLE_COND_MAX) {
        return Err(CmvError::HNotInvertible);
    }
    let h0_inv = inverse(&h0).map_err(|_| CmvError::HNotInvertible)?;
    let odd = k0.rem_euclid(2) == 1;
    let x = if odd { &g0 * &h0_inv } else { &h0_inv * &g0 };
    let rho = rho_from(&x)?;
    let alpha = &x * &rho;
    let b_star = (&id - &alpha).adjoint();
    let two = C64::new(2.0, 0.0);
    let (big_m_minus, big_m_plus) = if odd {
        let core = g.left_mul(&b_star).sub(&h.left_mul(&rho))?;
        let minus = g.div_right(&core)?.scale(two).add_constant(&-&id);
        let zg = g.mul_z();
        let plus = zg.add_constant(&id).div_right(&core.mul_z().add_constant(&id))?.scale(two).add_constant(&-&id);
        (minus, plus)
    } else {
        let rt = rho_tilde_of(&alpha)?;
        let core = g.right_mul(&b_star).sub(&h.right_mul(&rt))?;
        let minus = g.div_left(&core)?.scale(two).add_constant(&-&id);
        let zg = g.mul_z();
        let plus = zg.add_constant(&id).div_left(&core.mul_z().add_constant(&id))?.scale(two).add_constant(&-&id);
        (minus, plus)
    };
    let plus_fn = WeylFunction { kind: WeylKind::UpperMPlus, k0, series: big_m_plus, source: None };
    let minus_fn = WeylFunction { kind: WeylKind::UpperMMinus, k0, series: big_m_minus, source: None };
    let mut report = ReconstructionReport {
        route: "gh".into(),
        k0,
        order: n,
        recovered: BTreeMap::new(),
        window: (k0 - n as i64, k0 + n as i64 + 1),
        errors: None,
        checks: Vec::new(),
    };
    report.insert(half_lattice_invert(&HalfLatticeData::Taylor(plus_fn), Side::Plus, k0, n + 1)?);
    report.insert(half_lattice_invert(&HalfLatticeData::Taylor(minus_fn), Side::Minus, k0, n + 1)?);
    if let Some(a) = report.recovered.get(&k0) {
        report.checks.push(("anchor_closed_form".into(), op_norm(&(a - &alpha))));
    }
    Ok(report)
}

/// Solves the Riccati equation for `Φ₊` order by order: the coefficient of
/// `zʲ` is linear in `φ_j` through `B(0)` on the left (k0 odd) or the right
/// (k0 even).
fn phi_plus_from_riccati(
    odd: bool,
    alpha: &ComplexMatrix,
    a: &MatrixPowerSeries,
    b: &MatrixPowerSeries,
    zg: &MatrixPowerSeries,
) -> Result<MatrixPowerSeries> {
    let n = a.order().min(b.order()).min(zg.order());
    let m = alpha.rows();
    let b0_inv = inverse(b.coeff(0)).map_err(|_| CmvError::SeriesOrderSolveFailed(1))?;
    let alpha_s = alpha.adjoint();
    // Quadratic middle factor: Aα (odd) or αA (even).
    let mid = if odd { a.right_mul(alpha) } else { a.left_mul(alpha) };
    let mut phi = MatrixPowerSeries::zero(m, n);
    for j in 1..=n {
        let mut known = ComplexMatrix::zeros(m, m);
        for i in 1..j {
            for l in 1..=(j - i) {
                let q = j - i - l;
                known += &(&(phi.coeff(i) * mid.coeff(q)) * phi.coeff(l));
            }
            if odd {
                known += &(b.coeff(j - i) * phi.coeff(i));
                known -= &(phi.coeff(i) * zg.coeff(j - i));
            } else {
                known += &(phi.coeff(i) * b.coeff(j - i));
                known -= &(zg.coeff(j - i) * phi.coeff(i));
            }
        }
        if !odd {
            known += &(zg.coeff(j) * &alpha_s);
        } else {
            known += &(&alpha_s * zg.coeff(j));
        }
        let step = if odd { -&(&b0_inv * &known) } else { -&(&known * &b0_inv) };
        if !step.data().iter().all(|v| v.is_finite()) {
            return Err(CmvError::SeriesOrderSolveFailed(j));
        }
        phi.set_coeff(j, step);
    }
    Ok(phi)
}

/// Case (ii): reconstruction from `g(·,k0−1)`, `g(·,k0)` through order `N`
/// and `α_{k0}`. Recovers `α_k` on `[k0−N−1, k0+N+1]`.
pub fn full_lattice_invert_gg(
    g_prev: &MatrixPowerSeries,
    g: &MatrixPowerSeries,
    alpha: &ComplexMatrix,
    k0: i64,
    n: usize,
) -> Result<ReconstructionReport> {
    let (phi, y) = gg_weyl_data(g_prev, g, alpha, k0, n)?;
    let mut report = ReconstructionReport {
        route: "gg".into(),
        k0,
        order: n,
        recovered: BTreeMap::new(),
        window: (k0 - n as i64 - 1, k0 + n as i64 + 1),
        errors: None,
        checks: Vec::new(),
    };
    let plus_fn = WeylFunction { kind: WeylKind::PhiPlus, k0, series: phi, source: None };
    let minus_fn = WeylFunction { kind: WeylKind::PhiMinusInv, k0, series: y, source: None };
    report.insert(half_lattice_invert(&HalfLatticeData::Taylor(plus_fn), Side::Plus, k0, n + 1)?);
    report.insert(half_lattice_invert(&HalfLatticeData::Taylor(minus_fn), Side::Minus, k0, n + 2)?);
    Ok(report)
}

/// `Φ₊(·,k0)` and `Φ₋⁻¹(·,k0)` through order `N + 1` from `g(·,k0−1)`,
/// `g(·,k0)` through order `N` and `α_{k0}`.
pub fn gg_weyl_data(
    g_prev: &MatrixPowerSeries,
    g: &MatrixPowerSeries,
    alpha: &ComplexMatrix,
    k0: i64,
    n: usize,
) -> Result<(MatrixPowerSeries, MatrixPowerSeries)> {
    if g_prev.order() < n || g.order() < n {
        return Err(CmvError::WindowTooNarrow { order: n, needed: g_prev.order().min(g.order()) as i64 });
    }
    if !(condition_number(alpha) < INVERTIBLE_COND_MAX) {
        return Err(CmvError::AlphaNotInvertible);
    }
    let m = alpha.rows();
    let id = ComplexMatrix::identity(m);
    let odd = k0.rem_euclid(2) == 1;
    let alpha_s = alpha.adjoint();
    let zg = g.truncate(n).mul_z();
    let big_a = zg.add_constant(&id);
    Ok(if odd {
        let rho = herm_sqrt(&(&id - &(&alpha_s * alpha)).hermitian_part())?;
        let zrgr = g_prev.truncate(n).mul_z().left_mul(&rho).right_mul(&rho);
        let big_b = zrgr.sub(&big_a.left_mul(&alpha_s).right_mul(alpha))?;
        let phi = phi_plus_from_riccati(true, alpha, &big_a, &big_b, &zg)?;
        let inner = phi.neg().add_constant(&alpha_s);
        let corr = zrgr.div_left(&inner)?.div_left(&big_a)?;
        (phi, corr.neg().add_constant(alpha))
    } else {
        let rt = rho_tilde_of(alpha)?;
        let zrgr = g_prev.truncate(n).mul_z().left_mul(&rt).right_mul(&rt);
        let big_b = zrgr.sub(&big_a.left_mul(alpha).right_mul(&alpha_s))?;
        let phi = phi_plus_from_riccati(false, alpha, &big_a, &big_b, &zg)?;
        let inner = phi.neg().add_constant(&alpha_s);
        let corr = zrgr.div_right(&inner)?.div_right(&big_a)?;
        (phi, corr.neg().add_constant(alpha))
    })
}

/// The Riccati equation for `Φ₊(z)` at one point, in the form
/// `XAX + BX + XC + D = 0`.
pub fn pointwise_phi_plus_problem(
    g_prev: &ComplexMatrix,
    g: &ComplexMatrix,
    alpha: &ComplexMatrix,
    k0: i64,
    z: C64,
) -> Result<RiccatiProblem> {
    let m = alpha.rows();
    let id = ComplexMatrix::identity(m);
    let alpha_s = alpha.adjoint();
    let zg = g.scale(z);
    let big_a = &id + &zg;
    Ok(if k0.rem_euclid(2) == 1 {
        let rho = herm_sqrt(&(&id - &(&alpha_s * alpha)).hermitian_part())?;
        let big_b = &(&(&rho * g_prev) * &rho).scale(z) - &(&(&alpha_s * &big_a) * alpha);
        RiccatiProblem { a: &big_a * alpha, b: big_b, c: -&zg, d: &alpha_s * &zg, mode: RiccatiMode::BInvertible }
    } else {
        let rt = rho_tilde_of(alpha)?;
        let big_b = &(&(&rt * g_prev) * &rt).scale(z) - &(&(alpha * &big_a) * &alpha_s);
        RiccatiProblem { a: alpha * &big_a, b: -&zg, c: big_b, d: &zg * &alpha_s, mode: RiccatiMode::CInvertible }
    })
}

/// `Φ₊(z,k0)` from the pointwise Riccati equation fed with `g(z)` from the
/// dense truncation, starting at `|z| = 0.05` and halving `|z|` while the
/// contraction fails.
pub fn gg_pointwise_solution(data: &VerblunskyData, k0: i64) -> Result<(C64, RiccatiSolution)> {
    let alpha = data.alpha(k0)?;
    let mut r = 0.05;
    for _ in 0..12 {
        let z = C64::from_polar(r, 0.9);
        let (g_prev, _) = greens_direct(data, k0 - 1, z)?;
        let (g, _) = greens_direct(data, k0, z)?;
        let p = pointwise_phi_plus_problem(&g_prev, &g, alpha, k0, z)?;
        match riccati_solve(&p, 1e-15, 500) {
            Ok(sol) => return Ok((z, sol)),
            Err(CmvError::ContractionViolated(_)) => r *= 0.5,
            Err(e) => return Err(e),
        }
    }
    Err(CmvError::ContractionViolated(f64::INFINITY))
}

/// Both directions of local uniqueness for two coefficient windows.
#[derive(Clone, Debug)]
pub struct UniquenessReport {
    pub k0: i64,
    pub order: usize,
    pub window: (i64, i64),
    /// Largest `‖α¹_k − α²_k‖` on the window.
    pub alpha_difference: f64,
    /// Largest coefficient difference of `g`, `h` through the order.
    pub data_difference: f64,
    /// Largest difference of the two reconstructions on the window.
    pub reconstruction_difference: f64,
    /// Agreeing coefficients imply agreeing data.
    pub forward_holds: bool,
    /// Agreeing data imply agreeing reconstructions.
    pub backward_holds: bool,
}

pub fn local_uniqueness_check(d1: &VerblunskyData, d2: &VerblunskyData, k0: i64, n: usize) -> Result<UniquenessReport> {
    let needed = required_radius(n);
    for d in [d1, d2] {
        if k0 - d.k_min() < needed || d.k_max() - 1 - k0 < needed {
            return Err(CmvError::WindowTooNarrow { order: n, needed });
        }
    }
    let window = (k0 - n as i64, k0 + n as i64 + 1);
    let alpha_difference = (window.0..=window.1)
        .map(|k| Ok(op_norm(&(d1.alpha(k)? - d2.alpha(k)?))))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let s1 = greens_series(d1, k0, n)?;
    let s2 = greens_series(d2, k0, n)?;
    let data_difference = s1.g.distance(&s2.g).max(s1.h.distance(&s2.h));
    let r1 = full_lattice_invert_gh(&s1, n)?;
    let r2 = full_lattice_invert_gh(&s2, n)?;
    let reconstruction_difference = (window.0..=window.1)
        .filter_map(|k| Some(op_norm(&(r1.recovered.get(&k)? - r2.recovered.get(&k)?))))
        .fold(0.0, f64::max);
    Ok(UniquenessReport {
        k0,
        order: n,
        window,
        alpha_difference,
        data_difference,
        reconstruction_difference,
        forward_holds: alpha_difference > 0.0 || data_difference < 1e-12,
        backward_holds: data_difference >= 1e-10 || reconstruction_difference < 1e-6,
    })
}
