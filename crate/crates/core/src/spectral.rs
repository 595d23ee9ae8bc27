//! Atomic matrix-valued spectral measures of CMV truncations, orthonormal
//! Laurent polynomials built from them, and recovery of the coefficients.

use crate::error::{CmvError, Result};
use crate::laurent::{
    full_lattice_basis, initial_pair, leading_exponent, modification, FullLatticeBasis, Kind, LaurentPoly,
    SolutionFamily,
};
use crate::linalg::{herm_eigen, herm_sqrt, inverse, min_herm_eigenvalue, unitary_eigen, ComplexMatrix, C64};
use crate::verblunsky::{CmvOperator, Side};

pub const MERGE_TOL: f64 = 1e-12;
pub const DROP_TOL: f64 = 1e-14;
pub const DEGENERACY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub node: C64,
    pub weight: ComplexMatrix,
}

/// A finite sum of point masses on the unit circle with PSD matrix weights.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralMeasure {
    m: usize,
    atoms: Vec<Atom>,
}

impl SpectralMeasure {
    /// Validates shapes, unimodularity and positivity (tolerance 1e-10).
    pub fn new(m: usize, atoms: Vec<Atom>) -> Result<Self> {
        for a in &atoms {
            if a.weight.rows() != m || a.weight.cols() != m {
                return Err(CmvError::ShapeMismatch(format!(
                    "weight is {}x{}, expected {m}x{m}",
                    a.weight.rows(),
                    a.weight.cols()
                )));
            }
            if (a.node.norm() - 1.0).abs() > 1e-10 {
                return Err(CmvError::BadConfig(format!("node {} is not unimodular", a.node)));
            }
            let lo = min_herm_eigenvalue(&a.weight);
            if lo < -1e-10 {
                return Err(CmvError::NotPsd(lo));
            }
        }
        Ok(Self { m, atoms })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn total_mass(&self) -> ComplexMatrix {
        self.moment(0)
    }

    /// `∮ ζⁿ dΩ` for any integer `n`.
    pub fn moment(&self, n: i64) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.m, self.m);
        for a in &self.atoms {
            out += &a.weight.scale(a.node.powi(n as i32));
        }
        out
    }

    /// `∮ F dΩ G*` for functions evaluated at the nodes.
    pub fn pairing(&self, f: impl Fn(C64) -> ComplexMatrix, g: impl Fn(C64) -> ComplexMatrix) -> ComplexMatrix {
        let mut out: Option<ComplexMatrix> = None;
        for a in &self.atoms {
            let term = &(&f(a.node) * &a.weight) * &g(a.node).adjoint();
            out = Some(match out {
                Some(acc) => acc + term,
                None => term,
            });
        }
        out.unwrap_or_else(|| ComplexMatrix::zeros(self.m, self.m))
    }

    /// Sum of numerical ranks of the weights, i.e. the dimension of `L²(dΩ)`
    /// as a space of row vectors.
    pub fn support_dimension(&self) -> usize {
        self.atoms
            .iter()
            .map(|a| {
                let vals = herm_eigen(&a.weight.hermitian_part()).map(|e| e.values).unwrap_or_default();
                let top = vals.iter().cloned().fold(0.0, f64::max);
                vals.iter().filter(|&&v| v > DEGENERACY_TOL * top.max(1.0)).count()
            })
            .sum()
    }
}

/// `∮ ζ^k dΩ` for `k = 0 ..= k_max`; negative moments are the adjoints.
pub fn moments(mu: &SpectralMeasure, k_max: usize) -> Vec<ComplexMatrix> {
    (0..=k_max as i64).map(|k| mu.moment(k)).collect()
}

/// Groups eigen-nodes within `MERGE_TOL` (cyclically) and sums the
/// corresponding weights `B Bᴴ`, where `B` holds the selected eigenvector rows.
fn atoms_from_rows(nodes: &[C64], rows: &ComplexMatrix) -> Vec<Atom> {
    let d = rows.rows();
    let mut clusters: Vec<(C64, Vec<usize>)> = Vec::new();
    for (j, &z) in nodes.iter().enumerate() {
        match clusters.last_mut() {
            Some((head, members)) if (*head - z).norm() < MERGE_TOL => members.push(j),
            _ => clusters.push((z, vec![j])),
        }
    }
    if clusters.len() > 1 && (clusters[0].0 - clusters[clusters.len() - 1].0).norm() < MERGE_TOL {
        let (_, tail) = clusters.pop().unwrap();
        clusters[0].1.extend(tail);
    }
    clusters
        .into_iter()
        .filter_map(|(_, members)| {
            let mut weight = ComplexMatrix::zeros(d, d);
            let mut node = C64::new(0.0, 0.0);
            for &j in &members {
                let b = rows.block(0, j, d, 1);
                weight += &(&b * &b.adjoint());
                node += nodes[j];
            }
            let node = node / node.norm();
            (weight.frobenius_norm() >= DROP_TOL).then(|| Atom { node, weight: weight.hermitian_part() })
        })
        .collect()
}

fn eigen_rows(op: &CmvOperator, sites: &[i64]) -> Result<(Vec<C64>, ComplexMatrix)> {
    let m = op.m();
    let eig = unitary_eigen(op.u())?;
    let n = eig.nodes.len();
    let mut rows = ComplexMatrix::zeros(m * sites.len(), n);
    for (i, &k) in sites.iter().enumerate() {
        rows.set_block(i * m, 0, &eig.vectors.block(op.offset(k)?, 0, m, n));
    }
    Ok((eig.nodes, rows))
}

/// `dΩ = d(Δ*_{k0} E Δ_{k0})` of the truncation, one atom per distinct eigenvalue.
pub fn measure_from_operator(op: &CmvOperator, k0: i64) -> Result<SpectralMeasure> {
    let (nodes, rows) = eigen_rows(op, &[k0])?;
    Ok(SpectralMeasure { m: op.m(), atoms: atoms_from_rows(&nodes, &rows) })
}

/// Moment-based inner product `⟨F, G⟩ = ∮ F dΩ G*`.
#[derive(Clone, Debug)]
pub struct MomentTable {
    m: usize,
    moments: Vec<ComplexMatrix>,
}

impl MomentTable {
    /// `moments[0]` must be present; it is not required to equal the identity.
    pub fn new(moments: Vec<ComplexMatrix>) -> Result<Self> {
        let m = moments.first().ok_or(CmvError::InsufficientMoments { needed: 0, available: 0 })?.rows();
        if moments.iter().any(|x| x.rows() != m || x.cols() != m) {
            return Err(CmvError::ShapeMismatch("moments must share one square shape".into()));
        }
        Ok(Self { m, moments })
    }

    pub fn from_measure(mu: &SpectralMeasure, k_max: usize) -> Self {
        Self { m: mu.m(), moments: moments(mu, k_max) }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn available(&self) -> usize {
        self.moments.len() - 1
    }

    pub fn moment(&self, n: i64) -> Result<ComplexMatrix> {
        let i = n.unsigned_abs() as usize;
        let mu = self
            .moments
            .get(i)
            .ok_or(CmvError::InsufficientMoments { needed: i, available: self.available() })?;
        Ok(if n >= 0 { mu.clone() } else { mu.adjoint() })
    }

    pub fn pair(&self, f: &LaurentPoly, g: &LaurentPoly) -> Result<ComplexMatrix> {
        let mut out = ComplexMatrix::zeros(f.rows(), g.rows());
        for (e, fc) in f.terms() {
            for (e2, gc) in g.terms() {
                out += &(&(fc * &self.moment(i64::from(e - e2))?) * &gc.adjoint());
            }
        }
        Ok(out)
    }
}

/// Normalization of the Gram–Schmidt step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    /// Self-adjoint positive-definite leading coefficient.
    Hermitian,
    /// Leading coefficient chosen so consecutive members satisfy the
    /// transfer recursion with positive `ρ`, `ρ̃`; reproduces the recursion families.
    Recursive,
}

/// Orthonormal P and R families on one side of `k0`, built jointly.
#[derive(Clone, Debug)]
pub struct OrthonormalPair {
    pub p: SolutionFamily,
    pub r: SolutionFamily,
}

fn sign_of_initial(p: &LaurentPoly) -> (i32, f64) {
    let (e, c) = p.terms().next().expect("initial condition is a nonzero monomial");
    (e, c[(0, 0)].re)
}

/// Site reached after `d` steps from `k0` on the given side.
fn site(k0: i64, side: Side, d: usize) -> i64 {
    match side {
        Side::Plus => k0 + d as i64,
        Side::Minus => k0 - d as i64,
    }
}

/// Lead references for step `d`: the polynomial whose leading coefficient,
/// after shifting by the returned exponent, matches that of the new P (resp. R).
fn lead_references<'a>(
    k0: i64,
    side: Side,
    d: usize,
    prev_p: &'a LaurentPoly,
    prev_r: &'a LaurentPoly,
) -> ((&'a LaurentPoly, i32), (&'a LaurentPoly, i32)) {
    let parity_site = match side {
        Side::Plus => site(k0, side, d),
        Side::Minus => site(k0, side, d - 1),
    };
    if parity_site.rem_euclid(2) == 1 {
        ((prev_r, 1), (prev_p, -1))
    } else {
        ((prev_r, 0), (prev_p, 0))
    }
}

fn orthogonalize(
    ip: &MomentTable,
    mono: LaurentPoly,
    basis: &[LaurentPoly],
) -> Result<LaurentPoly> {
    let mut g = mono;
    for _pass in 0..2 {
        for q in basis {
            let c = ip.pair(&g, q)?;
            g = g.sub(&q.left_mul(&c));
        }
    }
    Ok(g)
}

fn normalize(
    ip: &MomentTable,
    g: &LaurentPoly,
    mode: Normalization,
    reference: Option<(&LaurentPoly, i32, i32)>,
    degree: usize,
) -> Result<LaurentPoly> {
    let gram = ip.pair(g, g)?;
    let gram = gram.hermitian_part();
    if min_herm_eigenvalue(&gram) < DEGENERACY_TOL {
        return Err(CmvError::DegenerateMeasure(degree));
    }
    match (mode, reference) {
        (Normalization::Recursive, Some((refp, shift, exponent))) => {
            let lead = refp.shift(shift).coeff_or_zero(exponent);
            let n2 = (&(&lead * &gram) * &lead.adjoint()).hermitian_part();
            if min_herm_eigenvalue(&n2) < DEGENERACY_TOL {
                return Err(CmvError::DegenerateMeasure(degree));
            }
            let n = herm_sqrt(&n2)?;
            Ok(g.left_mul(&(&inverse(&n)? * &lead)))
        }
        _ => Ok(g.left_mul(&inverse(&herm_sqrt(&gram)?)?)),
    }
}

/// Gram–Schmidt over the leading-exponent schedule, producing P and R
/// members for `d = 0 ..= depth` on the given side.
pub fn gram_schmidt_pair(
    ip: &MomentTable,
    k0: i64,
    side: Side,
    depth: usize,
    mode: Normalization,
) -> Result<OrthonormalPair> {
    let m = ip.m();
    let (p0, r0) = initial_pair(m, k0, side, true);
    let mut ps: Vec<LaurentPoly> = Vec::with_capacity(depth + 1);
    let mut rs: Vec<LaurentPoly> = Vec::with_capacity(depth + 1);
    for (list, init) in [(&mut ps, &p0), (&mut rs, &r0)] {
        let g = init.clone();
        let gram = ip.pair(&g, &g)?.hermitian_part();
        if min_herm_eigenvalue(&gram) < DEGENERACY_TOL {
            return Err(CmvError::DegenerateMeasure(0));
        }
        list.push(match mode {
            Normalization::Recursive => g.left_mul(&inverse(&herm_sqrt(&gram)?)?),
            Normalization::Hermitian => {
                let (e, s) = sign_of_initial(init);
                normalize(ip, &LaurentPoly::scalar_monomial(m, e, s), mode, None, 0)?
            }
        });
    }
    for d in 1..=depth {
        let ep = leading_exponent(k0, side, Kind::P, d);
        let er = leading_exponent(k0, side, Kind::R, d);
        let gp = orthogonalize(ip, LaurentPoly::scalar_monomial(m, ep, 1.0), &ps)?;
        let gr = orthogonalize(ip, LaurentPoly::scalar_monomial(m, er, 1.0), &rs)?;
        let ((refp, sp), (refr, sr)) = lead_references(k0, side, d, &ps[d - 1], &rs[d - 1]);
        let p = normalize(ip, &gp, mode, Some((refp, sp, ep)), d)?;
        let r = normalize(ip, &gr, mode, Some((refr, sr, er)), d)?;
        ps.push(p);
        rs.push(r);
    }
    let (lo, hi) = match side {
        Side::Plus => (k0, k0 + depth as i64),
        Side::Minus => (k0 - depth as i64, k0),
    };
    if side == Side::Minus {
        ps.reverse();
        rs.reverse();
    }
    Ok(OrthonormalPair {
        p: SolutionFamily { k0, side, kind: Kind::P, lo, hi, polys: ps },
        r: SolutionFamily { k0, side, kind: Kind::R, lo, hi, polys: rs },
    })
}

/// Largest depth that stays within half of the measure's support.
pub fn max_trusted_depth(mu: &SpectralMeasure) -> usize {
    mu.support_dimension() / (2 * mu.m())
}

fn check_depth(mu: &SpectralMeasure, depth: usize) -> Result<()> {
    let cap = max_trusted_depth(mu);
    if depth > cap {
        return Err(CmvError::WindowTooSmall(format!("depth {depth} exceeds {cap}, half the measure support")));
    }
    Ok(())
}

/// Orthonormal P or R family of the measure, with self-adjoint
/// positive-definite leading coefficients.
pub fn gram_schmidt(mu: &SpectralMeasure, k0: i64, side: Side, kind: Kind, depth: usize) -> Result<SolutionFamily> {
    gram_schmidt_with(mu, k0, side, kind, depth, Normalization::Hermitian)
}

pub fn gram_schmidt_with(
    mu: &SpectralMeasure,
    k0: i64,
    side: Side,
    kind: Kind,
    depth: usize,
    mode: Normalization,
) -> Result<SolutionFamily> {
    if !matches!(kind, Kind::P | Kind::R) {
        return Err(CmvError::BadConfig("Gram–Schmidt produces P or R families only".into()));
    }
    check_depth(mu, depth)?;
    let ip = MomentTable::from_measure(mu, depth + 3);
    let pair = gram_schmidt_pair(&ip, k0, side, depth, mode)?;
    Ok(if kind == Kind::P { pair.p } else { pair.r })
}

/// Coefficients `α_k` for `k = k0 + 1 ..= k0 + depth` (plus) or
/// `k = k0 - depth + 1 ..= k0` (minus), from moments alone.
pub fn reconstruct_alpha_moments(ip: &MomentTable, k0: i64, side: Side, depth: usize) -> Result<Vec<(i64, ComplexMatrix)>> {
    if depth == 0 {
        return Ok(Vec::new());
    }
    // α_k reads P(k−1), R(k−1): one step short of `depth` on the plus side.
    let reach = if side == Side::Plus { depth - 1 } else { depth };
    let pair = gram_schmidt_pair(ip, k0, side, reach, Normalization::Recursive)?;
    let ks: Vec<i64> = match side {
        Side::Plus => ((k0 + 1)..=(k0 + depth as i64)).collect(),
        Side::Minus => ((k0 - depth as i64 + 1)..=k0).rev().collect(),
    };
    ks.into_iter()
        .map(|k| {
            let p = pair.p.get(k - 1)?;
            let r = pair.r.get(k - 1)?;
            let a = if k.rem_euclid(2) == 1 { ip.pair(&r.shift(1), p)? } else { ip.pair(p, r)? };
            Ok((k, -a))
        })
        .collect()
}

/// Coefficients recovered from the measure; see [`reconstruct_alpha_moments`].
pub fn reconstruct_alpha(mu: &SpectralMeasure, k0: i64, side: Side, depth: usize) -> Result<Vec<(i64, ComplexMatrix)>> {
    check_depth(mu, depth)?;
    reconstruct_alpha_moments(&MomentTable::from_measure(mu, depth + 3), k0, side, depth)
}

/// Max over `k, k'` in the family range of `‖∮ F(k) dΩ F(k')* − δ I‖`.
pub fn orthonormality_check(mu: &SpectralMeasure, fam: &SolutionFamily) -> f64 {
    let m = mu.m();
    let mut worst: f64 = 0.0;
    for k in fam.range() {
        for kp in fam.range() {
            let (a, b) = (&fam.polys[(k - fam.lo) as usize], &fam.polys[(kp - fam.lo) as usize]);
            let mut g = mu.pairing(|z| a.eval(z), |z| b.eval(z));
            if k == kp {
                g -= &ComplexMatrix::identity(m);
            }
            worst = worst.max(g.frobenius_norm());
        }
    }
    worst
}

/// `±∮ (ζ+z)/(ζ−z) (F(ζ) − F(z)) dΩ(ζ)` with `F = P̃` for P families and
/// `F = R` for R families; equals `Q̃` (resp. `S`) of the same anchor.
pub fn second_kind_from_measure(mu: &SpectralMeasure, fam: &SolutionFamily, z: C64, k: i64) -> Result<ComplexMatrix> {
    if z.norm() < 1e-300 {
        return Err(CmvError::ZeroArgument);
    }
    if mu.atoms().iter().any(|a| (a.node - z).norm() < MERGE_TOL) {
        return Err(CmvError::NodeCollision);
    }
    let poly = fam.get(k)?;
    let poly = if fam.kind == Kind::P {
        let (shift, sign) = modification(fam.k0, fam.side);
        poly.shift(shift).scale(C64::new(sign, 0.0))
    } else if fam.kind == Kind::R {
        poly.clone()
    } else {
        return Err(CmvError::BadConfig("expects a P or R family".into()));
    };
    let at_z = poly.eval(z);
    let mut out = ComplexMatrix::zeros(mu.m(), mu.m());
    for a in mu.atoms() {
        let kern = (a.node + z) / (a.node - z);
        out += &(&(&poly.eval(a.node) - &at_z) * &a.weight).scale(kern);
    }
    Ok(match fam.side {
        Side::Plus => out,
        Side::Minus => -out,
    })
}

/// Atomic 2m×2m measure built from the eigenvector rows at sites `k0 - 1, k0`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockSpectralMeasure {
    m: usize,
    k0: i64,
    atoms: Vec<Atom>,
}

impl BlockSpectralMeasure {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k0(&self) -> i64 {
        self.k0
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Block `(ℓ, ℓ')` of the weight at one atom, `ℓ, ℓ' ∈ {0, 1}`.
    pub fn block(&self, atom: usize, l: usize, lp: usize) -> ComplexMatrix {
        self.atoms[atom].weight.block(l * self.m, lp * self.m, self.m, self.m)
    }

    pub fn total_mass(&self) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(2 * self.m, 2 * self.m);
        for a in &self.atoms {
            out += &a.weight;
        }
        out
    }

    /// `∮ ζⁿ dΩ_{ℓℓ'}` as a 2m×2m matrix.
    pub fn moment(&self, n: i64) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(2 * self.m, 2 * self.m);
        for a in &self.atoms {
            out += &a.weight.scale(a.node.powi(n as i32));
        }
        out
    }
}

pub fn block_measure(op: &CmvOperator, k0: i64) -> Result<BlockSpectralMeasure> {
    let (nodes, rows) = eigen_rows(op, &[k0 - 1, k0])?;
    Ok(BlockSpectralMeasure { m: op.m(), k0, atoms: atoms_from_rows(&nodes, &rows) })
}

/// Max over `k, k'` in the basis range of `‖∮ P(k) dΩ P(k')* − δ I‖`.
pub fn block_orthonormality_check(mu: &BlockSpectralMeasure, basis: &FullLatticeBasis) -> f64 {
    let m = mu.m();
    let mut worst: f64 = 0.0;
    for k in basis.lo..=basis.hi {
        for kp in basis.lo..=basis.hi {
            let a = &basis.polys[(k - basis.lo) as usize];
            let b = &basis.polys[(kp - basis.lo) as usize];
            let mut g = ComplexMatrix::zeros(m, m);
            for at in mu.atoms() {
                g += &(&(&a.eval(at.node) * &at.weight) * &b.eval(at.node).adjoint());
            }
            if k == kp {
                g -= &ComplexMatrix::identity(m);
            }
            worst = worst.max(g.frobenius_norm());
        }
    }
    worst
}

/// Builds the block measure and the full-lattice basis of the underlying
/// coefficients, returning the measure and its orthonormality residual.
pub fn block_measure_checked(op: &CmvOperator, k0: i64, depth: usize) -> Result<(BlockSpectralMeasure, f64)> {
    let mu = block_measure(op, k0)?;
    let basis = full_lattice_basis(op.data(), k0, depth)?;
    let lo = basis.lo.max(op.first_site());
    let hi = basis.hi.min(op.last_site());
    let trimmed = FullLatticeBasis {
        k0,
        lo,
        hi,
        polys: basis.polys[(lo - basis.lo) as usize..=(hi - basis.lo) as usize].to_vec(),
    };
    let res = block_orthonormality_check(&mu, &trimmed);
    Ok((mu, res))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laurent::{generate_family, generate_family_range};
    use crate::linalg::c;
    use crate::verblunsky::{build_cmv, half_lattice, sample_alphas, VerblunskyData};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar_const(k_min: i64, len: usize, x: f64) -> VerblunskyData {
        VerblunskyData::derive(k_min, vec![ComplexMatrix::real_diag(&[x]); len]).unwrap()
    }

    fn random_data(seed: u64, m: usize, k_min: i64, len: usize, cap: f64) -> VerblunskyData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        VerblunskyData::derive(k_min, sample_alphas(&mut rng, m, len, cap).unwrap()).unwrap()
    }

    fn plus_measure(d: &VerblunskyData, k0: i64) -> SpectralMeasure {
        measure_from_operator(&half_lattice(d, k0, Side::Plus).unwrap(), k0).unwrap()
    }

    fn minus_measure(d: &VerblunskyData, k0: i64) -> SpectralMeasure {
        measure_from_operator(&half_lattice(d, k0, Side::Minus).unwrap(), k0).unwrap()
    }

    fn identity_error(x: &ComplexMatrix) -> f64 {
        (x - &ComplexMatrix::identity(x.rows())).max_abs()
    }

    #[test]
    fn moments_of_simple_measures() {
        let point = SpectralMeasure::new(1, vec![Atom { node: c(1.0, 0.0), weight: ComplexMatrix::identity(1) }]).unwrap();
        for mu in moments(&point, 4) {
            assert_eq!(mu, ComplexMatrix::identity(1));
        }
        let half = ComplexMatrix::real_diag(&[0.5]);
        let two = SpectralMeasure::new(
            1,
            vec![Atom { node: c(1.0, 0.0), weight: half.clone() }, Atom { node: c(-1.0, 0.0), weight: half }],
        )
        .unwrap();
        let ms = moments(&two, 2);
        assert!(ms[1].max_abs() < 1e-16);
        assert!(identity_error(&ms[2]) < 1e-16);
    }

    #[test]
    fn measure_validation() {
        let bad = ComplexMatrix::real_diag(&[-0.5]);
        assert!(matches!(
            SpectralMeasure::new(1, vec![Atom { node: c(1.0, 0.0), weight: bad }]),
            Err(CmvError::NotPsd(_))
        ));
        let ok = ComplexMatrix::identity(1);
        assert!(SpectralMeasure::new(1, vec![Atom { node: c(0.5, 0.0), weight: ok }]).is_err());
    }

    #[test]
    fn measures_have_unit_mass() {
        let d = random_data(1, 2, 0, 20, 0.8);
        for k0 in [5i64, 6] {
            assert!(identity_error(&plus_measure(&d, k0).total_mass()) < 1e-9);
            assert!(identity_error(&minus_measure(&d, k0).total_mass()) < 1e-9);
            let full = measure_from_operator(&build_cmv(&d, true, true).unwrap(), k0).unwrap();
            assert!(identity_error(&full.total_mass()) < 1e-9);
        }
    }

    #[test]
    fn free_half_lattice_low_moments_vanish() {
        let d = scalar_const(0, 17, 0.0);
        let mu = plus_measure(&d, 0);
        for k in 1..=3 {
            assert!(mu.moment(k).max_abs() < 1e-12);
        }
    }

    #[test]
    fn scalar_half_first_moment() {
        let d = scalar_const(0, 24, 0.5);
        for k0 in [4i64, 5] {
            let mu = plus_measure(&d, k0);
            assert!((mu.moment(1)[(0, 0)] - c(-0.5, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn moments_match_operator_powers() {
        let d = random_data(2, 2, 0, 14, 0.8);
        let op = half_lattice(&d, 3, Side::Plus).unwrap();
        let mu = measure_from_operator(&op, 3).unwrap();
        let mut power = ComplexMatrix::identity(op.u().rows());
        for k in 0..5 {
            let block = power.block(0, 0, 2, 2);
            assert!((mu.moment(k) - block).max_abs() < 1e-11);
            assert!((mu.moment(-k) - mu.moment(k).adjoint()).max_abs() < 1e-13);
            power = &power * op.u();
        }
    }

    #[test]
    fn degenerate_nodes_are_merged() {
        let d = scalar_const(0, 17, 0.0);
        let op = build_cmv(&d, true, true).unwrap();
        let mu = measure_from_operator(&op, 8).unwrap();
        for (i, a) in mu.atoms().iter().enumerate() {
            for b in &mu.atoms()[i + 1..] {
                assert!((a.node - b.node).norm() >= MERGE_TOL);
            }
        }
    }

    #[test]
    fn recursion_families_are_orthonormal() {
        let d = random_data(3, 2, 0, 66, 0.8);
        for k0 in [20i64, 21] {
            let mu = plus_measure(&d, k0);
            for kind in [Kind::P, Kind::R] {
                let fam = generate_family(&d, k0, Side::Plus, kind, 3).unwrap();
                assert!(orthonormality_check(&mu, &fam) < 1e-7);
            }
            let mu = minus_measure(&d, k0);
            for kind in [Kind::P, Kind::R] {
                let fam = generate_family(&d, k0, Side::Minus, kind, 3).unwrap();
                assert!(orthonormality_check(&mu, &fam) < 1e-7);
            }
        }
    }

    #[test]
    fn free_scalar_orthonormality_depth_four() {
        let d = scalar_const(0, 65, 0.0);
        let mu = plus_measure(&d, 0);
        let fam = generate_family(&d, 0, Side::Plus, Kind::P, 4).unwrap();
        assert!(orthonormality_check(&mu, &fam) < 1e-9);
        let anchor_only = generate_family(&d, 0, Side::Plus, Kind::R, 0).unwrap();
        assert!(orthonormality_check(&mu, &anchor_only) < 1e-12);
    }

    #[test]
    fn gram_schmidt_first_elements() {
        let d = random_data(4, 2, 0, 30, 0.7);
        for k0 in [10i64, 11] {
            let mu = plus_measure(&d, k0);
            let r = gram_schmidt(&mu, k0, Side::Plus, Kind::R, 2).unwrap();
            assert!(r.get(k0).unwrap().distance(&LaurentPoly::scalar_monomial(2, 0, 1.0)) < 1e-10);
            let p = gram_schmidt(&mu, k0, Side::Plus, Kind::P, 2).unwrap();
            let e = if k0 % 2 == 1 { 1 } else { 0 };
            assert!(p.get(k0).unwrap().distance(&LaurentPoly::scalar_monomial(2, e, 1.0)) < 1e-10);
        }
    }

    #[test]
    fn gram_schmidt_free_case_is_monomial_schedule() {
        let d = scalar_const(0, 65, 0.0);
        for k0 in [10i64, 11] {
            let mu = plus_measure(&d, k0);
            for kind in [Kind::P, Kind::R] {
                let fam = gram_schmidt(&mu, k0, Side::Plus, kind, 4).unwrap();
                for k in fam.range() {
                    let e = leading_exponent(k0, Side::Plus, kind, (k - k0) as usize);
                    let expect = if k == k0 {
                        initial_pair(1, k0, Side::Plus, true).0.clone()
                    } else {
                        LaurentPoly::scalar_monomial(1, e, 1.0)
                    };
                    let expect = if kind == Kind::R && k == k0 { initial_pair(1, k0, Side::Plus, true).1 } else { expect };
                    assert!(fam.get(k).unwrap().distance(&expect) < 1e-10, "{kind:?} k0={k0} k={k}");
                }
            }
        }
    }

    #[test]
    fn hermitian_leading_coefficients() {
        let d = random_data(5, 2, 0, 66, 0.7);
        let mu = plus_measure(&d, 20);
        for kind in [Kind::P, Kind::R] {
            let fam = gram_schmidt(&mu, 20, Side::Plus, kind, 4).unwrap();
            for k in 21..=24 {
                let e = leading_exponent(20, Side::Plus, kind, (k - 20) as usize);
                let lead = fam.get(k).unwrap().coeff_or_zero(e);
                assert!(lead.hermitian_defect() < 1e-9);
                assert!(min_herm_eigenvalue(&lead) > 0.0);
            }
            assert!(orthonormality_check(&mu, &fam) < 1e-7);
        }
    }

    #[test]
    fn recursive_normalization_matches_forward_recursion() {
        let d = random_data(6, 2, 0, 66, 0.7);
        for k0 in [20i64, 21] {
            for side in [Side::Plus, Side::Minus] {
                let mu = if side == Side::Plus { plus_measure(&d, k0) } else { minus_measure(&d, k0) };
                for kind in [Kind::P, Kind::R] {
                    let gs = gram_schmidt_with(&mu, k0, side, kind, 4, Normalization::Recursive).unwrap();
                    let fw = generate_family(&d, k0, side, kind, 4).unwrap();
                    for k in gs.range() {
                        assert!(gs.get(k).unwrap().distance(fw.get(k).unwrap()) < 1e-6, "{side:?} {kind:?} {k0} {k}");
                    }
                }
            }
        }
    }

    #[test]
    fn scalar_families_agree_in_both_normalizations() {
        let d = scalar_const(0, 65, 0.5);
        let mu = plus_measure(&d, 20);
        for kind in [Kind::P, Kind::R] {
            let a = gram_schmidt(&mu, 20, Side::Plus, kind, 4).unwrap();
            let fw = generate_family(&d, 20, Side::Plus, kind, 4).unwrap();
            for k in a.range() {
                assert!(a.get(k).unwrap().distance(fw.get(k).unwrap()) < 1e-6);
            }
        }
    }

    #[test]
    fn reconstruct_free_and_scalar() {
        let d = scalar_const(0, 65, 0.0);
        for (_, a) in reconstruct_alpha(&plus_measure(&d, 10), 10, Side::Plus, 4).unwrap() {
            assert!(a.max_abs() < 1e-10);
        }
        let d = scalar_const(0, 65, 0.5);
        for side in [Side::Plus, Side::Minus] {
            let mu = if side == Side::Plus { plus_measure(&d, 30) } else { minus_measure(&d, 30) };
            for (_, a) in reconstruct_alpha(&mu, 30, side, 4).unwrap() {
                assert!((a[(0, 0)] - c(0.5, 0.0)).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn reconstruct_random_matrix_round_trip() {
        let d = random_data(7, 2, 0, 65, 0.6);
        for k0 in [30i64, 31] {
            for side in [Side::Plus, Side::Minus] {
                let mu = if side == Side::Plus { plus_measure(&d, k0) } else { minus_measure(&d, k0) };
                for (k, a) in reconstruct_alpha(&mu, k0, side, 3).unwrap() {
                    assert!((a - d.alpha(k).unwrap()).max_abs() < 1e-5, "{side:?} k0={k0} k={k}");
                }
            }
        }
    }

    #[test]
    fn n_moments_fix_n_coefficients() {
        let d = random_data(41, 2, 0, 30, 0.6);
        for k0 in [14, 15] {
            for side in [Side::Plus, Side::Minus] {
                let mu = if side == Side::Plus { plus_measure(&d, k0) } else { minus_measure(&d, k0) };
                for n in 1..=5 {
                    let ip = MomentTable::from_measure(&mu, n);
                    let got = reconstruct_alpha_moments(&ip, k0, side, n).unwrap();
                    assert_eq!(got.len(), n);
                    for (k, a) in got {
                        assert!((a - d.alpha(k).unwrap()).max_abs() < 1e-8, "{side:?} k0={k0} n={n} k={k}");
                    }
                }
            }
        }
    }

    #[test]
    fn reconstruction_depth_is_guarded() {
        let d = scalar_const(0, 9, 0.3);
        let mu = plus_measure(&d, 0);
        assert!(matches!(reconstruct_alpha(&mu, 0, Side::Plus, 7), Err(CmvError::WindowTooSmall(_))));
        let ip = MomentTable::from_measure(&mu, 1);
        assert!(matches!(
            reconstruct_alpha_moments(&ip, 0, Side::Plus, 3),
            Err(CmvError::InsufficientMoments { .. })
        ));
    }

    #[test]
    fn atomic_measure_degenerates_past_its_support() {
        let d = scalar_const(0, 5, 0.3);
        let mu = plus_measure(&d, 0);
        let ip = MomentTable::from_measure(&mu, 12);
        assert!(matches!(
            gram_schmidt_pair(&ip, 0, Side::Plus, 6, Normalization::Hermitian),
            Err(CmvError::DegenerateMeasure(_))
        ));
    }

    #[test]
    fn second_kind_identity() {
        let d = scalar_const(0, 33, 0.0);
        let k0 = 10;
        let mu = plus_measure(&d, k0);
        let r = generate_family(&d, k0, Side::Plus, Kind::R, 2).unwrap();
        let s = generate_family(&d, k0, Side::Plus, Kind::S, 2).unwrap();
        let z = c(0.3, 0.0);
        assert!(second_kind_from_measure(&mu, &r, z, k0).unwrap().max_abs() < 1e-14);
        let got = second_kind_from_measure(&mu, &r, z, k0 + 1).unwrap();
        assert!((got - s.get(k0 + 1).unwrap().eval(z)).max_abs() < 1e-9);

        let d = random_data(9, 2, 0, 65, 0.7);
        let z = c(0.0, 0.5);
        for k0 in [20i64, 21] {
            for side in [Side::Plus, Side::Minus] {
                let mu = if side == Side::Plus { plus_measure(&d, k0) } else { minus_measure(&d, k0) };
                let k = if side == Side::Plus { k0 + 2 } else { k0 - 2 };
                for (first, second) in [(Kind::P, Kind::Q), (Kind::R, Kind::S)] {
                    let f = generate_family(&d, k0, side, first, 2).unwrap();
                    let g = generate_family(&d, k0, side, second, 2).unwrap().modified();
                    let got = second_kind_from_measure(&mu, &f, z, k).unwrap();
                    assert!((got - g.get(k).unwrap().eval(z)).max_abs() < 1e-7, "{side:?} {first:?} {k0}");
                }
            }
        }
    }

    #[test]
    fn second_kind_rejects_nodes() {
        let d = scalar_const(0, 9, 0.0);
        let mu = plus_measure(&d, 0);
        let r = generate_family(&d, 0, Side::Plus, Kind::R, 1).unwrap();
        let node = mu.atoms()[0].node;
        assert_eq!(second_kind_from_measure(&mu, &r, node, 1).unwrap_err(), CmvError::NodeCollision);
    }

    #[test]
    fn block_measure_mass_and_orthonormality() {
        let d = scalar_const(0, 33, 0.0);
        let op = build_cmv(&d, true, true).unwrap();
        let (mu, res) = block_measure_checked(&op, 16, 4).unwrap();
        assert!(res < 1e-8);
        let total = mu.total_mass();
        assert!(identity_error(&total.block(1, 1, 1, 1)) < 1e-9);

        let d = random_data(11, 2, 0, 40, 0.7);
        let op = build_cmv(&d, true, true).unwrap();
        for k0 in [19i64, 20] {
            let (mu, res) = block_measure_checked(&op, k0, 4).unwrap();
            assert!(res < 1e-8);
            assert!(identity_error(&mu.total_mass()) < 1e-9);
            let basis = full_lattice_basis(op.data(), k0, 0).unwrap();
            let anchor = FullLatticeBasis {
                k0,
                lo: k0,
                hi: k0,
                polys: vec![basis.get(k0).unwrap().clone()],
            };
            assert!(block_orthonormality_check(&mu, &anchor) < 1e-10);
        }
    }

    #[test]
    fn orthonormality_detects_wrong_family() {
        let d = random_data(12, 1, 0, 40, 0.7);
        let mu = plus_measure(&d, 10);
        let mut fam = generate_family_range(&d, 10, Side::Plus, Kind::P, 10, 13).unwrap();
        fam.polys[2] = fam.polys[2].scale(c(2.0, 0.0));
        assert!(orthonormality_check(&mu, &fam) > 0.5);
    }
}
