//! Matrix Laurent polynomials and the transfer-matrix recursion that
//! generates the first- and second-kind families `P±, Q±, R±, S±`.
//!
//! Everything is carried out on coefficients: multiplication by `z` shifts
//! exponents, and the `ρ⁻¹`, `ρ̃⁻¹` factors come from the cached inverses
//! in [`VerblunskyData`].

use std::collections::BTreeMap;

use crate::error::{CmvError, Result};
use crate::linalg::{op_norm, ComplexMatrix, LuFactor, C64};
use crate::verblunsky::{Side, VerblunskyData};

/// Sparse map from exponent to matrix coefficient; exact zeros are never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct LaurentPoly {
    rows: usize,
    cols: usize,
    coeffs: BTreeMap<i32, ComplexMatrix>,
}

impl LaurentPoly {
    pub fn zero(rows: usize, cols: usize) -> Self {
        Self { rows, cols, coeffs: BTreeMap::new() }
    }

    pub fn monomial(exponent: i32, coeff: ComplexMatrix) -> Self {
        let mut p = Self::zero(coeff.rows(), coeff.cols());
        p.add_term(exponent, &coeff);
        p
    }

    pub fn constant(coeff: ComplexMatrix) -> Self {
        Self::monomial(0, coeff)
    }

    /// `s·zᵉ·I`.
    pub fn scalar_monomial(m: usize, exponent: i32, s: f64) -> Self {
        Self::monomial(exponent, ComplexMatrix::identity(m).scale_re(s))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, exponent: i32) -> Option<&ComplexMatrix> {
        self.coeffs.get(&exponent)
    }

    /// Coefficient of `zᵉ`, zero if absent.
    pub fn coeff_or_zero(&self, exponent: i32) -> ComplexMatrix {
        self.coeffs.get(&exponent).cloned().unwrap_or_else(|| ComplexMatrix::zeros(self.rows, self.cols))
    }

    pub fn terms(&self) -> impl Iterator<Item = (i32, &ComplexMatrix)> {
        self.coeffs.iter().map(|(&e, c)| (e, c))
    }

    pub fn min_exponent(&self) -> Option<i32> {
        self.coeffs.keys().next().copied()
    }

    pub fn max_exponent(&self) -> Option<i32> {
        self.coeffs.keys().next_back().copied()
    }

    pub fn add_term(&mut self, exponent: i32, c: &ComplexMatrix) {
        if c.is_zero() {
            return;
        }
        let entry = self.coeffs.entry(exponent).or_insert_with(|| ComplexMatrix::zeros(c.rows(), c.cols()));
        *entry += c;
        if entry.is_zero() {
            self.coeffs.remove(&exponent);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&e, c) in &other.coeffs {
            out.add_term(e, c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = Self::zero(self.rows, self.cols);
        for (&e, c) in &self.coeffs {
            out.add_term(e, &c.scale(s));
        }
        out
    }

    /// Multiplication by `zᵈ`.
    pub fn shift(&self, d: i32) -> Self {
        Self { rows: self.rows, cols: self.cols, coeffs: self.coeffs.iter().map(|(&e, c)| (e + d, c.clone())).collect() }
    }

    pub fn left_mul(&self, a: &ComplexMatrix) -> Self {
        let mut out = Self::zero(a.rows(), self.cols);
        for (&e, c) in &self.coeffs {
            out.add_term(e, &(a * c));
        }
        out
    }

    pub fn right_mul(&self, a: &ComplexMatrix) -> Self {
        let mut out = Self::zero(self.rows, a.cols());
        for (&e, c) in &self.coeffs {
            out.add_term(e, &(c * a));
        }
        out
    }

    pub fn eval(&self, z: C64) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.rows, self.cols);
        for (&e, c) in &self.coeffs {
            out += &c.scale(z.powi(e));
        }
        out
    }

    /// Largest coefficient-wise entry difference.
    pub fn distance(&self, other: &Self) -> f64 {
        let diff = self.sub(other);
        diff.coeffs.values().map(|c| c.max_abs()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Kind {
    P,
    Q,
    R,
    S,
}

impl Kind {
    /// Whether this family is the upper component of its solution pair.
    pub fn is_upper(self) -> bool {
        matches!(self, Kind::P | Kind::Q)
    }

    fn first_kind(self) -> bool {
        matches!(self, Kind::P | Kind::R)
    }
}

/// One block of a transfer matrix: `Σ coeff·z^shift`.
type Entry = Vec<(i32, ComplexMatrix)>;

/// The four blocks of `T(z,k)` (or its inverse), split into powers of `z`.
fn transfer_terms(data: &VerblunskyData, k: i64, inverse: bool) -> Result<[[Entry; 2]; 2]> {
    let al = data.alpha(k)?;
    let ri = data.rho_inv(k)?;
    let rti = data.rho_tilde_inv(k)?;
    let ra = ri * &al.adjoint();
    let rta = rti * al;
    let odd = k.rem_euclid(2) == 1;
    let neg = |x: &ComplexMatrix| -x;
    Ok(match (odd, inverse) {
        (true, false) => [[vec![(0, rta)], vec![(1, rti.clone())]], [vec![(-1, ri.clone())], vec![(0, ra)]]],
        (false, false) => [[vec![(0, ra)], vec![(0, ri.clone())]], [vec![(0, rti.clone())], vec![(0, rta)]]],
        (true, true) => [[vec![(0, neg(&ra))], vec![(1, ri.clone())]], [vec![(-1, rti.clone())], vec![(0, neg(&rta))]]],
        (false, true) => [[vec![(0, neg(&rta))], vec![(0, rti.clone())]], [vec![(0, ri.clone())], vec![(0, neg(&ra))]]],
    })
}

fn assemble(terms: &[[Entry; 2]; 2], z: C64, m: usize) -> ComplexMatrix {
    let mut t = ComplexMatrix::zeros(2 * m, 2 * m);
    for (i, row) in terms.iter().enumerate() {
        for (j, entry) in row.iter().enumerate() {
            let mut blk = ComplexMatrix::zeros(m, m);
            for (e, c) in entry {
                blk += &c.scale(z.powi(*e));
            }
            t.set_block(i * m, j * m, &blk);
        }
    }
    t
}

/// `T(z,k)`, mapping the pair at `k - 1` to the pair at `k`.
pub fn transfer(data: &VerblunskyData, z: C64, k: i64) -> Result<ComplexMatrix> {
    if z.norm() < 1e-300 {
        return Err(CmvError::ZeroArgument);
    }
    Ok(assemble(&transfer_terms(data, k, false)?, z, data.m()))
}

/// `T(z,k)⁻¹`, mapping the pair at `k` back to `k - 1`.
pub fn transfer_inverse(data: &VerblunskyData, z: C64, k: i64) -> Result<ComplexMatrix> {
    if z.norm() < 1e-300 {
        return Err(CmvError::ZeroArgument);
    }
    Ok(assemble(&transfer_terms(data, k, true)?, z, data.m()))
}

fn apply_terms(terms: &[[Entry; 2]; 2], u: &LaurentPoly, v: &LaurentPoly) -> (LaurentPoly, LaurentPoly) {
    let inputs = [u, v];
    let mut out = [LaurentPoly::zero(u.rows(), u.cols()), LaurentPoly::zero(u.rows(), u.cols())];
    for (i, row) in terms.iter().enumerate() {
        for (j, entry) in row.iter().enumerate() {
            for (e, c) in entry {
                out[i] = out[i].add(&inputs[j].shift(*e).left_mul(c));
            }
        }
    }
    let [a, b] = out;
    (a, b)
}

/// A solution `(U(k), V(k))` of the transfer recursion on `lo ..= hi`.
#[derive(Clone, Debug)]
pub struct PairSequence {
    pub lo: i64,
    pub hi: i64,
    pub upper: Vec<LaurentPoly>,
    pub lower: Vec<LaurentPoly>,
}

impl PairSequence {
    pub fn get(&self, k: i64) -> Option<(&LaurentPoly, &LaurentPoly)> {
        if k < self.lo || k > self.hi {
            return None;
        }
        let i = (k - self.lo) as usize;
        Some((&self.upper[i], &self.lower[i]))
    }
}

/// Propagates initial data given at `anchor` across `lo ..= hi`.
pub fn propagate(
    data: &VerblunskyData,
    anchor: i64,
    init: (LaurentPoly, LaurentPoly),
    lo: i64,
    hi: i64,
) -> Result<PairSequence> {
    if lo > anchor || hi < anchor {
        return Err(CmvError::OutOfWindow(anchor));
    }
    if hi > anchor && !data.contains(hi) {
        return Err(CmvError::OutOfWindow(hi));
    }
    if lo < anchor && !data.contains(lo + 1) {
        return Err(CmvError::OutOfWindow(lo + 1));
    }
    let n = (hi - lo + 1) as usize;
    let mut upper = vec![LaurentPoly::zero(init.0.rows(), init.0.cols()); n];
    let mut lower = upper.clone();
    let a = (anchor - lo) as usize;
    upper[a] = init.0;
    lower[a] = init.1;
    for k in (anchor + 1)..=hi {
        let terms = transfer_terms(data, k, false)?;
        let i = (k - lo) as usize;
        let (u, v) = apply_terms(&terms, &upper[i - 1], &lower[i - 1]);
        upper[i] = u;
        lower[i] = v;
    }
    for k in ((lo + 1)..=anchor).rev() {
        let terms = transfer_terms(data, k, true)?;
        let i = (k - lo) as usize;
        let (u, v) = apply_terms(&terms, &upper[i], &lower[i]);
        upper[i - 1] = u;
        lower[i - 1] = v;
    }
    Ok(PairSequence { lo, hi, upper, lower })
}

/// Numeric analogue of [`propagate`] at a fixed spectral parameter.
pub fn propagate_values(
    data: &VerblunskyData,
    z: C64,
    anchor: i64,
    init: (ComplexMatrix, ComplexMatrix),
    lo: i64,
    hi: i64,
) -> Result<Vec<(ComplexMatrix, ComplexMatrix)>> {
    let m = data.m();
    let n = (hi - lo + 1) as usize;
    let mut out = vec![(ComplexMatrix::zeros(m, init.0.cols()), ComplexMatrix::zeros(m, init.0.cols())); n];
    let a = (anchor - lo) as usize;
    out[a] = init;
    let stack = |p: &(ComplexMatrix, ComplexMatrix)| ComplexMatrix::vstack(&p.0, &p.1);
    let split = |x: ComplexMatrix| {
        let c = x.cols();
        (x.block(0, 0, m, c), x.block(m, 0, m, c))
    };
    for k in (anchor + 1)..=hi {
        let i = (k - lo) as usize;
        out[i] = split(&transfer(data, z, k)? * &stack(&out[i - 1]));
    }
    for k in ((lo + 1)..=anchor).rev() {
        let i = (k - lo) as usize;
        out[i - 1] = split(&transfer_inverse(data, z, k)? * &stack(&out[i]));
    }
    Ok(out)
}

/// Values of `(U, V)` at the anchor site, by side, kind and anchor parity.
pub fn initial_pair(m: usize, k0: i64, side: Side, first_kind: bool) -> (LaurentPoly, LaurentPoly) {
    let odd = k0.rem_euclid(2) == 1;
    let mono = |e: i32, s: f64| LaurentPoly::scalar_monomial(m, e, s);
    match (side, first_kind, odd) {
        (Side::Plus, true, true) => (mono(1, 1.0), mono(0, 1.0)),
        (Side::Plus, true, false) => (mono(0, 1.0), mono(0, 1.0)),
        (Side::Plus, false, true) => (mono(1, 1.0), mono(0, -1.0)),
        (Side::Plus, false, false) => (mono(0, -1.0), mono(0, 1.0)),
        (Side::Minus, true, true) => (mono(0, 1.0), mono(0, -1.0)),
        (Side::Minus, true, false) => (mono(1, -1.0), mono(0, 1.0)),
        (Side::Minus, false, true) => (mono(0, 1.0), mono(0, 1.0)),
        (Side::Minus, false, false) => (mono(1, 1.0), mono(0, 1.0)),
    }
}

/// One family of Laurent polynomials indexed by lattice site.
#[derive(Clone, Debug)]
pub struct SolutionFamily {
    pub k0: i64,
    pub side: Side,
    pub kind: Kind,
    pub lo: i64,
    pub hi: i64,
    pub polys: Vec<LaurentPoly>,
}

impl SolutionFamily {
    pub fn get(&self, k: i64) -> Result<&LaurentPoly> {
        if k < self.lo || k > self.hi {
            return Err(CmvError::OutOfWindow(k));
        }
        Ok(&self.polys[(k - self.lo) as usize])
    }

    pub fn range(&self) -> std::ops::RangeInclusive<i64> {
        self.lo..=self.hi
    }

    /// `P̃` / `Q̃` rescaling; `R` and `S` families are returned unchanged.
    pub fn modified(&self) -> SolutionFamily {
        let mut out = self.clone();
        if self.kind.is_upper() {
            let (shift, sign) = modification(self.k0, self.side);
            out.polys = self.polys.iter().map(|p| p.shift(shift).scale(C64::new(sign, 0.0))).collect();
        }
        out
    }
}

/// Exponent shift and sign turning `P±`/`Q±` into `P̃±`/`Q̃±`.
pub fn modification(k0: i64, side: Side) -> (i32, f64) {
    let odd = k0.rem_euclid(2) == 1;
    match (side, odd) {
        (Side::Plus, true) => (-1, 1.0),
        (Side::Plus, false) => (0, 1.0),
        (Side::Minus, true) => (0, 1.0),
        (Side::Minus, false) => (-1, -1.0),
    }
}

/// Both families of a solution pair (`P` with `R`, or `Q` with `S`) on `lo ..= hi`.
pub fn generate_pair_range(
    data: &VerblunskyData,
    k0: i64,
    side: Side,
    first_kind: bool,
    lo: i64,
    hi: i64,
) -> Result<(SolutionFamily, SolutionFamily)> {
    let seq = propagate(data, k0, initial_pair(data.m(), k0, side, first_kind), lo, hi)?;
    let (ku, kl) = if first_kind { (Kind::P, Kind::R) } else { (Kind::Q, Kind::S) };
    let upper = SolutionFamily { k0, side, kind: ku, lo, hi, polys: seq.upper };
    let lower = SolutionFamily { k0, side, kind: kl, lo, hi, polys: seq.lower };
    Ok((upper, lower))
}

pub fn generate_family_range(
    data: &VerblunskyData,
    k0: i64,
    side: Side,
    kind: Kind,
    lo: i64,
    hi: i64,
) -> Result<SolutionFamily> {
    let (u, l) = generate_pair_range(data, k0, side, kind.first_kind(), lo, hi)?;
    Ok(if kind.is_upper() { u } else { l })
}

/// The family on its natural half range: `k0 ..= k0 + depth` (plus) or
/// `k0 - depth ..= k0` (minus).
pub fn generate_family(data: &VerblunskyData, k0: i64, side: Side, kind: Kind, depth: usize) -> Result<SolutionFamily> {
    let d = depth as i64;
    let (lo, hi) = match side {
        Side::Plus => (k0, k0 + d),
        Side::Minus => (k0 - d, k0),
    };
    generate_family_range(data, k0, side, kind, lo, hi)
}

/// Exponent of the leading-order term of a family member at distance `dist` from `k0`.
pub fn leading_exponent(k0: i64, side: Side, kind: Kind, dist: usize) -> i32 {
    let d = dist as i32;
    let first = if d % 2 == 1 { -(d + 1) / 2 } else { d / 2 };
    let second = if d % 2 == 1 { (d + 1) / 2 } else { -d / 2 };
    let odd = k0.rem_euclid(2) == 1;
    let upper = kind.is_upper();
    match (odd, side, upper) {
        (true, Side::Plus, true) => first + 1,
        (true, Side::Minus, false) => first,
        (true, Side::Plus, false) => second,
        (true, Side::Minus, true) => second,
        (false, Side::Plus, false) => first,
        (false, Side::Minus, true) => first + 1,
        (false, Side::Plus, true) => second,
        (false, Side::Minus, false) => second,
    }
}

#[derive(Clone, Debug)]
pub struct LeadingTerm {
    pub exponent: i32,
    pub coeff: ComplexMatrix,
    pub invertible: bool,
}

/// Leading-order term of `fam` at site `k`, checked against the prescribed exponent.
pub fn leading_term(fam: &SolutionFamily, k: i64) -> Result<LeadingTerm> {
    let p = fam.get(k)?;
    let exponent = leading_exponent(fam.k0, fam.side, fam.kind, k.abs_diff(fam.k0) as usize);
    let scale = p.terms().map(|(_, c)| c.max_abs()).fold(0.0, f64::max).max(1.0);
    let coeff = p.coeff_or_zero(exponent);
    if coeff.max_abs() <= 1e-12 * scale {
        return Err(CmvError::MissingLeadingTerm { k, exponent });
    }
    let invertible = LuFactor::new(&coeff)
        .and_then(|lu| lu.solve(&ComplexMatrix::identity(coeff.rows())))
        .map(|inv| op_norm(&inv).is_finite() && op_norm(&inv) < 1e12)
        .unwrap_or(false);
    Ok(LeadingTerm { exponent, coeff, invertible })
}

/// Minus-side families at anchors `k0` and `k0 - 1`.
#[derive(Clone, Debug)]
pub struct ConnectedFamilies {
    pub p_minus: SolutionFamily,
    pub q_minus: SolutionFamily,
    pub r_minus: SolutionFamily,
    pub s_minus: SolutionFamily,
    pub p_minus_prev: SolutionFamily,
    pub q_minus_prev: SolutionFamily,
    pub r_minus_prev: SolutionFamily,
    pub s_minus_prev: SolutionFamily,
}

/// Scalar Laurent multipliers `c(z,k0)`, `d(z,k0)` as `(coefficient of z^{-1} or z^0, of z^0 or z^1)`.
fn connection_scalars(k0: i64) -> ([(i32, f64); 2], [(i32, f64); 2]) {
    if k0.rem_euclid(2) == 1 {
        ([(-1, 0.5), (0, -0.5)], [(-1, 0.5), (0, 0.5)])
    } else {
        ([(0, 0.5), (1, -0.5)], [(0, 0.5), (1, 0.5)])
    }
}

fn times_scalar_laurent(p: &LaurentPoly, s: &[(i32, f64); 2]) -> LaurentPoly {
    s.iter().fold(LaurentPoly::zero(p.rows(), p.cols()), |acc, &(e, w)| acc.add(&p.shift(e).scale(C64::new(w, 0.0))))
}

/// Expresses the minus-side families at `k0` and `k0 - 1` through the plus
/// families at `k0`, over the common range of the four inputs.
pub fn connect_left_right(
    data: &VerblunskyData,
    k0: i64,
    p: &SolutionFamily,
    q: &SolutionFamily,
    r: &SolutionFamily,
    s: &SolutionFamily,
) -> Result<ConnectedFamilies> {
    let fams = [p, q, r, s];
    let expected = [Kind::P, Kind::Q, Kind::R, Kind::S];
    for (f, kind) in fams.iter().zip(expected) {
        if f.k0 != k0 || f.side != Side::Plus || f.kind != kind {
            return Err(CmvError::DepthMismatch);
        }
        if f.lo != p.lo || f.hi != p.hi {
            return Err(CmvError::DepthMismatch);
        }
    }
    let m = data.m();
    let ri = data.rho_inv(k0)?;
    let rti = data.rho_tilde_inv(k0)?;
    let a = data.a(k0)?;
    let b = data.b(k0)?;
    let half = |x: ComplexMatrix| x.scale_re(0.5);
    let x_pb = half(&(rti * &b) - &(ri * &b.adjoint()));
    let x_qb = half(&(rti * &b) + &(ri * &b.adjoint()));
    let x_pa = half(&(rti * &a) + &(ri * &a.adjoint()));
    let x_qa = half(&(rti * &a) - &(ri * &a.adjoint()));
    let (cc, dd) = connection_scalars(k0);
    let build = |kind: Kind, anchor: i64, side_fn: &dyn Fn(&LaurentPoly, &LaurentPoly) -> LaurentPoly, up: bool| {
        let (x, y) = if up { (p, q) } else { (r, s) };
        SolutionFamily {
            k0: anchor,
            side: Side::Minus,
            kind,
            lo: p.lo,
            hi: p.hi,
            polys: x.polys.iter().zip(&y.polys).map(|(a, b)| side_fn(a, b)).collect(),
        }
    };
    let mk_prev_first = |x: &LaurentPoly, y: &LaurentPoly| x.right_mul(&x_pb).add(&y.right_mul(&x_qb));
    let mk_prev_second = |x: &LaurentPoly, y: &LaurentPoly| x.right_mul(&x_pa).add(&y.right_mul(&x_qa));
    let mk_first = |x: &LaurentPoly, y: &LaurentPoly| times_scalar_laurent(x, &cc).add(&times_scalar_laurent(y, &dd));
    let mk_second = |x: &LaurentPoly, y: &LaurentPoly| times_scalar_laurent(x, &dd).add(&times_scalar_laurent(y, &cc));
    let _ = m;
    Ok(ConnectedFamilies {
        p_minus: build(Kind::P, k0, &mk_first, true),
        r_minus: build(Kind::R, k0, &mk_first, false),
        q_minus: build(Kind::Q, k0, &mk_second, true),
        s_minus: build(Kind::S, k0, &mk_second, false),
        p_minus_prev: build(Kind::P, k0 - 1, &mk_prev_first, true),
        r_minus_prev: build(Kind::R, k0 - 1, &mk_prev_first, false),
        q_minus_prev: build(Kind::Q, k0 - 1, &mk_prev_second, true),
        s_minus_prev: build(Kind::S, k0 - 1, &mk_prev_second, false),
    })
}

/// Rows `(P₀(z,k), P₁(z,k))` of the m×2m full-lattice basis anchored at `(k0 - 1, k0)`.
#[derive(Clone, Debug)]
pub struct FullLatticeBasis {
    pub k0: i64,
    pub lo: i64,
    pub hi: i64,
    pub polys: Vec<LaurentPoly>,
}

impl FullLatticeBasis {
    pub fn get(&self, k: i64) -> Result<&LaurentPoly> {
        if k < self.lo || k > self.hi {
            return Err(CmvError::OutOfWindow(k));
        }
        Ok(&self.polys[(k - self.lo) as usize])
    }
}

/// m×2m polynomials on `k0 - depth ..= k0 + depth` with
/// `P(k0 - 1) = (I, 0)` and `P(k0) = (0, I)`.
pub fn full_lattice_basis(data: &VerblunskyData, k0: i64, depth: usize) -> Result<FullLatticeBasis> {
    let d = depth.max(1) as i64;
    let (lo, hi) = (k0 - d, k0 + d);
    let (p, _) = generate_pair_range(data, k0, Side::Plus, true, lo, hi)?;
    let (q, _) = generate_pair_range(data, k0, Side::Plus, false, lo, hi)?;
    let rho = data.rho(k0)?;
    let rho_t = data.rho_tilde(k0)?;
    let a = data.a(k0)?;
    let b = data.b(k0)?;
    let odd = k0.rem_euclid(2) == 1;
    let polys = p
        .polys
        .iter()
        .zip(&q.polys)
        .map(|(pp, qq)| {
            let (left, right) = if odd {
                (
                    pp.sub(qq).right_mul(rho).shift(-1).scale(C64::new(0.5, 0.0)),
                    pp.right_mul(&a.adjoint()).add(&qq.right_mul(&b.adjoint())).shift(-1).scale(C64::new(0.5, 0.0)),
                )
            } else {
                (
                    pp.add(qq).right_mul(rho_t).scale(C64::new(0.5, 0.0)),
                    pp.right_mul(&a).sub(&qq.right_mul(&b)).scale(C64::new(0.5, 0.0)),
                )
            };
            hstack_poly(&left, &right)
        })
        .collect();
    Ok(FullLatticeBasis { k0, lo, hi, polys })
}

fn hstack_poly(left: &LaurentPoly, right: &LaurentPoly) -> LaurentPoly {
    let (m, cl, cr) = (left.rows(), left.cols(), right.cols());
    let mut out = LaurentPoly::zero(m, cl + cr);
    let exps: std::collections::BTreeSet<i32> = left.terms().chain(right.terms()).map(|(e, _)| e).collect();
    for e in exps {
        out.add_term(e, &ComplexMatrix::hstack(&left.coeff_or_zero(e), &right.coeff_or_zero(e)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::verblunsky::{build_cmv, sample_alphas};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar_const(k_min: i64, len: usize, x: f64) -> VerblunskyData {
        VerblunskyData::derive(k_min, vec![ComplexMatrix::real_diag(&[x]); len]).unwrap()
    }

    fn random_data(seed: u64, m: usize, k_min: i64, len: usize, cap: f64) -> VerblunskyData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        VerblunskyData::derive(k_min, sample_alphas(&mut rng, m, len, cap).unwrap()).unwrap()
    }

    #[test]
    fn free_transfer_matrices() {
        let d = VerblunskyData::derive(0, vec![ComplexMatrix::zeros(2, 2); 4]).unwrap();
        let id = ComplexMatrix::identity(2);
        let z0 = ComplexMatrix::zeros(2, 2);
        let even = transfer(&d, c(0.3, 0.2), 2).unwrap();
        assert_eq!(even, ComplexMatrix::from_blocks(&z0, &id, &id, &z0));
        let odd = transfer(&d, c(2.0, 0.0), 1).unwrap();
        assert_eq!(odd, ComplexMatrix::from_blocks(&z0, &id.scale_re(2.0), &id.scale_re(0.5), &z0));
        assert_eq!(transfer(&d, c(0.0, 0.0), 1).unwrap_err(), CmvError::ZeroArgument);
    }

    #[test]
    fn scalar_transfer_at_one() {
        let d = scalar_const(0, 3, 0.5);
        let t = transfer(&d, c(1.0, 0.0), 1).unwrap();
        let s = 1.0 / 0.75f64.sqrt();
        let expect = [[0.5 * s, s], [s, 0.5 * s]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((t[(i, j)] - c(expect[i][j], 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn inverse_transfer_inverts() {
        let d = random_data(3, 2, 0, 4, 0.9);
        let z = c(0.4, -0.7);
        for k in 1..=2 {
            let p = &transfer(&d, z, k).unwrap() * &transfer_inverse(&d, z, k).unwrap();
            assert!((p - ComplexMatrix::identity(4)).max_abs() < 1e-12);
        }
    }

    #[test]
    fn initial_values_and_first_steps() {
        let d = random_data(8, 2, 0, 10, 0.8);
        let id = ComplexMatrix::identity(2);
        // Even anchor.
        let k0 = 4;
        let p = generate_family(&d, k0, Side::Plus, Kind::P, 3).unwrap();
        let r = generate_family(&d, k0, Side::Plus, Kind::R, 3).unwrap();
        assert_eq!(p.get(k0).unwrap(), &LaurentPoly::constant(id.clone()));
        assert_eq!(r.get(k0).unwrap(), &LaurentPoly::constant(id.clone()));
        let al = d.alpha(k0 + 1).unwrap();
        let expect_p = LaurentPoly::monomial(1, id.clone()).add(&LaurentPoly::constant(al.clone()));
        let expect_p = expect_p.left_mul(d.rho_tilde_inv(k0 + 1).unwrap());
        assert!(p.get(k0 + 1).unwrap().distance(&expect_p) < 1e-14);
        let expect_r = LaurentPoly::monomial(-1, id.clone()).add(&LaurentPoly::constant(al.adjoint()));
        let expect_r = expect_r.left_mul(d.rho_inv(k0 + 1).unwrap());
        assert!(r.get(k0 + 1).unwrap().distance(&expect_r) < 1e-14);
        // Odd anchor.
        let k0 = 5;
        let p = generate_family_range(&d, k0, Side::Plus, Kind::P, k0 - 1, k0 + 1).unwrap();
        let r = generate_family(&d, k0, Side::Plus, Kind::R, 1).unwrap();
        let al = d.alpha(k0 + 1).unwrap();
        let expect_p = LaurentPoly::constant(id.clone()).add(&LaurentPoly::monomial(1, al.adjoint()));
        assert!(p.get(k0 + 1).unwrap().distance(&expect_p.left_mul(d.rho_inv(k0 + 1).unwrap())) < 1e-14);
        let expect_r = LaurentPoly::monomial(1, id.clone()).add(&LaurentPoly::constant(al.clone()));
        assert!(r.get(k0 + 1).unwrap().distance(&expect_r.left_mul(d.rho_tilde_inv(k0 + 1).unwrap())) < 1e-14);
        let a0 = d.alpha(k0).unwrap();
        let expect_back = LaurentPoly::monomial(1, &id - &a0.adjoint()).left_mul(d.rho_inv(k0).unwrap());
        assert!(p.get(k0 - 1).unwrap().distance(&expect_back) < 1e-14);
    }

    #[test]
    fn minus_first_backward_step() {
        let d = random_data(12, 2, 0, 10, 0.8);
        let k0 = 5;
        let p = generate_family(&d, k0, Side::Minus, Kind::P, 1).unwrap();
        let id = ComplexMatrix::identity(2);
        let a0 = d.alpha(k0).unwrap();
        let expect = LaurentPoly::monomial(1, id.scale_re(-1.0))
            .add(&LaurentPoly::constant(-a0.adjoint()))
            .left_mul(d.rho_inv(k0).unwrap());
        assert!(p.get(k0 - 1).unwrap().distance(&expect) < 1e-14);
    }

    #[test]
    fn free_scalar_even_anchor_powers() {
        let d = scalar_const(0, 12, 0.0);
        let p = generate_family(&d, 2, Side::Plus, Kind::P, 8).unwrap();
        for j in 0..=4 {
            let poly = p.get(2 + 2 * j).unwrap();
            assert_eq!(poly, &LaurentPoly::scalar_monomial(1, -(j as i32), 1.0));
        }
    }

    #[test]
    fn leading_exponents_follow_schedule() {
        let d = random_data(4, 2, -14, 30, 0.8);
        for k0 in [0i64, 1] {
            for side in [Side::Plus, Side::Minus] {
                for kind in [Kind::P, Kind::Q, Kind::R, Kind::S] {
                    let fam = generate_family(&d, k0, side, kind, 12).unwrap();
                    for k in fam.range() {
                        let lt = leading_term(&fam, k).unwrap();
                        assert!(lt.invertible, "{side:?} {kind:?} k0={k0} k={k}");
                        let poly = fam.get(k).unwrap();
                        // The prescribed exponent is extremal on its side of zero.
                        if lt.exponent > 0 {
                            assert_eq!(poly.max_exponent(), Some(lt.exponent));
                        } else if lt.exponent < 0 {
                            assert_eq!(poly.min_exponent(), Some(lt.exponent));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn r_plus_even_anchor_two_steps_out() {
        let d = random_data(2, 1, 0, 8, 0.7);
        let fam = generate_family(&d, 2, Side::Plus, Kind::R, 2).unwrap();
        assert_eq!(leading_term(&fam, 4).unwrap().exponent, 1);
    }

    #[test]
    fn recursion_consistency() {
        let d = random_data(6, 3, 0, 12, 0.8);
        let (p, r) = generate_pair_range(&d, 5, Side::Plus, true, 1, 11).unwrap();
        let z = c(0.3, 0.8);
        for k in 2..=11 {
            let prev = ComplexMatrix::vstack(&p.get(k - 1).unwrap().eval(z), &r.get(k - 1).unwrap().eval(z));
            let next = &transfer(&d, z, k).unwrap() * &prev;
            let now = ComplexMatrix::vstack(&p.get(k).unwrap().eval(z), &r.get(k).unwrap().eval(z));
            assert!((next - now).max_abs() < 1e-10 * (1.0 + prev.max_abs()));
        }
    }

    #[test]
    fn family_is_eigen_solution_of_difference_expression() {
        let d = random_data(10, 2, 0, 20, 0.8);
        let op = build_cmv(&d, true, true).unwrap();
        let k0 = 9;
        let (p, _) = generate_pair_range(&d, k0, Side::Plus, true, op.first_site(), op.last_site()).unwrap();
        let m = 2;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        use rand::Rng;
        for _ in 0..40 {
            let z = C64::from_polar(0.7, rng.gen_range(0.0..std::f64::consts::TAU));
            let mut col = ComplexMatrix::zeros(op.u().rows(), m);
            for k in op.first_site()..=op.last_site() {
                col.set_block(op.offset(k).unwrap(), 0, &p.get(k).unwrap().eval(z));
            }
            let uc = op.u() * &col;
            for k in (op.first_site() + 3)..=(op.last_site() - 3) {
                let o = op.offset(k).unwrap();
                let lhs = uc.block(o, 0, m, m);
                let rhs = col.block(o, 0, m, m).scale(z);
                assert!((lhs - &rhs).max_abs() < 1e-8 * (1.0 + rhs.max_abs()));
            }
        }
    }

    #[test]
    fn connection_reproduces_anchor_values() {
        let d = random_data(14, 2, 0, 16, 0.7);
        for k0 in [7i64, 8] {
            let (p, r) = generate_pair_range(&d, k0, Side::Plus, true, k0 - 4, k0 + 4).unwrap();
            let (q, s) = generate_pair_range(&d, k0, Side::Plus, false, k0 - 4, k0 + 4).unwrap();
            let con = connect_left_right(&d, k0, &p, &q, &r, &s).unwrap();
            let (pm, rm) = initial_pair(2, k0, Side::Minus, true);
            let (qm, sm) = initial_pair(2, k0, Side::Minus, false);
            assert!(con.p_minus.get(k0).unwrap().distance(&pm) < 1e-12);
            assert!(con.r_minus.get(k0).unwrap().distance(&rm) < 1e-12);
            assert!(con.q_minus.get(k0).unwrap().distance(&qm) < 1e-12);
            assert!(con.s_minus.get(k0).unwrap().distance(&sm) < 1e-12);
        }
    }

    fn connection_matches_recursion(d: &VerblunskyData, depth: i64) -> f64 {
        let mut worst: f64 = 0.0;
        for k0 in [d.k_min() + depth + 1, d.k_min() + depth + 2] {
            let (lo, hi) = (k0 - depth, k0 + depth);
            let (p, r) = generate_pair_range(d, k0, Side::Plus, true, lo, hi).unwrap();
            let (q, s) = generate_pair_range(d, k0, Side::Plus, false, lo, hi).unwrap();
            let con = connect_left_right(d, k0, &p, &q, &r, &s).unwrap();
            for (anchor, fams) in [
                (k0, [&con.p_minus, &con.r_minus, &con.q_minus, &con.s_minus]),
                (k0 - 1, [&con.p_minus_prev, &con.r_minus_prev, &con.q_minus_prev, &con.s_minus_prev]),
            ] {
                let (dp, dr) = generate_pair_range(d, anchor, Side::Minus, true, lo, hi).unwrap();
                let (dq, ds) = generate_pair_range(d, anchor, Side::Minus, false, lo, hi).unwrap();
                for (got, direct) in fams.iter().zip([&dp, &dr, &dq, &ds]) {
                    for k in lo..=hi {
                        worst = worst.max(got.get(k).unwrap().distance(direct.get(k).unwrap()));
                    }
                }
            }
        }
        worst
    }

    #[test]
    fn connection_free_case() {
        let d = VerblunskyData::derive(0, vec![ComplexMatrix::zeros(1, 1); 14]).unwrap();
        assert!(connection_matches_recursion(&d, 4) < 1e-14);
    }

    #[test]
    fn connection_scalar_half() {
        assert!(connection_matches_recursion(&scalar_const(0, 14, 0.5), 4) < 1e-10);
    }

    #[test]
    fn connection_random_matrix_depth_eight() {
        assert!(connection_matches_recursion(&random_data(15, 2, 0, 22, 0.7), 8) < 1e-10);
    }

    #[test]
    fn connection_rejects_mismatched_inputs() {
        let d = random_data(1, 1, 0, 12, 0.5);
        let (p, r) = generate_pair_range(&d, 5, Side::Plus, true, 3, 8).unwrap();
        let (q, s) = generate_pair_range(&d, 5, Side::Plus, false, 3, 9).unwrap();
        assert_eq!(connect_left_right(&d, 5, &p, &q, &r, &s).unwrap_err(), CmvError::DepthMismatch);
    }

    #[test]
    fn full_lattice_anchors() {
        let d = random_data(16, 2, 0, 14, 0.7);
        for k0 in [6i64, 7] {
            let basis = full_lattice_basis(&d, k0, 4).unwrap();
            let id = ComplexMatrix::identity(2);
            let z0 = ComplexMatrix::zeros(2, 2);
            let left = LaurentPoly::constant(ComplexMatrix::hstack(&id, &z0));
            let right = LaurentPoly::constant(ComplexMatrix::hstack(&z0, &id));
            assert!(basis.get(k0 - 1).unwrap().distance(&left) < 1e-14);
            assert!(basis.get(k0).unwrap().distance(&right) < 1e-14);
        }
    }

    #[test]
    fn full_lattice_free_scalar_monomials() {
        let d = scalar_const(0, 14, 0.0);
        let basis = full_lattice_basis(&d, 7, 5).unwrap();
        for k in basis.lo..=basis.hi {
            for (_, c) in basis.get(k).unwrap().terms() {
                assert_eq!(c.data().iter().filter(|x| x.norm() > 0.0).count(), 1);
            }
        }
    }

    #[test]
    fn eigenvectors_decompose_over_full_lattice_basis() {
        let d = random_data(18, 2, 0, 16, 0.7);
        let op = build_cmv(&d, true, true).unwrap();
        let eig = crate::linalg::unitary_eigen(op.u()).unwrap();
        let m = 2;
        for k0 in [7i64, 8] {
            let basis = full_lattice_basis(&d, k0, 6).unwrap();
            for j in (0..eig.nodes.len()).step_by(5) {
                let zeta = eig.nodes[j];
                let vec = |k: i64| eig.vectors.block(op.offset(k).unwrap(), j, m, 1);
                let anchor = ComplexMatrix::vstack(&vec(k0 - 1), &vec(k0));
                for k in (k0 - 6)..=(k0 + 6) {
                    if !op.contains_site(k) {
                        continue;
                    }
                    let got = &basis.get(k).unwrap().eval(zeta) * &anchor;
                    assert!((got - vec(k)).max_abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn modified_families_start_at_identity() {
        let d = random_data(19, 2, 0, 10, 0.7);
        for k0 in [4i64, 5] {
            for side in [Side::Plus, Side::Minus] {
                let fam = generate_family(&d, k0, side, Kind::P, 2).unwrap().modified();
                assert_eq!(fam.get(k0).unwrap(), &LaurentPoly::scalar_monomial(2, 0, 1.0));
            }
        }
    }
}
