//! Verblunsky coefficient windows and finite CMV truncations.
//!
//! A window holds `α_k` for `k_min ≤ k ≤ k_max`. The truncated operator acts
//! on the sites `k_min ..= k_max - 1`: the block `Θ_k` couples sites `k - 1`
//! and `k`, so the two boundary coefficients only contribute their inner
//! corner. Setting a boundary coefficient to the identity decouples the
//! window from the outside and makes the truncation exactly unitary.

use rand::{Rng, SeedableRng};

use crate::error::{CmvError, Result};
use crate::linalg::{herm_sqrt, op_norm, ComplexMatrix, LuFactor, C64};

/// Coefficients at or above this norm are rejected at ordinary sites.
pub const NORM_CEILING: f64 = 1.0 - 1e-8;

#[derive(Clone, Debug)]
pub struct Site {
    pub alpha: ComplexMatrix,
    pub rho: ComplexMatrix,
    pub rho_tilde: ComplexMatrix,
    /// `None` at split points, where `ρ` vanishes.
    pub rho_inv: Option<ComplexMatrix>,
    pub rho_tilde_inv: Option<ComplexMatrix>,
    pub split: bool,
}

impl Site {
    fn new(alpha: ComplexMatrix, split: bool) -> Result<Self> {
        let m = alpha.rows();
        let id = ComplexMatrix::identity(m);
        if split {
            return Ok(Self {
                alpha: id,
                rho: ComplexMatrix::zeros(m, m),
                rho_tilde: ComplexMatrix::zeros(m, m),
                rho_inv: None,
                rho_tilde_inv: None,
                split,
            });
        }
        let rho = herm_sqrt(&(&id - &(&alpha.adjoint() * &alpha)))?;
        let rho_tilde = herm_sqrt(&(&id - &(&alpha * &alpha.adjoint())))?;
        let rho_inv = LuFactor::new(&rho)?.solve(&id)?;
        let rho_tilde_inv = LuFactor::new(&rho_tilde)?.solve(&id)?;
        Ok(Self { alpha, rho, rho_tilde, rho_inv: Some(rho_inv), rho_tilde_inv: Some(rho_tilde_inv), split })
    }
}

/// A window of Verblunsky coefficients with cached `ρ`, `ρ̃` and their inverses.
#[derive(Clone, Debug)]
pub struct VerblunskyData {
    m: usize,
    k_min: i64,
    sites: Vec<Site>,
}

impl VerblunskyData {
    /// Validates the coefficients and caches derived quantities.
    pub fn derive(k_min: i64, alphas: Vec<ComplexMatrix>) -> Result<Self> {
        Self::derive_with_splits(k_min, alphas, &[])
    }

    /// Like [`derive`](Self::derive), with the listed sites replaced by the identity.
    pub fn derive_with_splits(k_min: i64, alphas: Vec<ComplexMatrix>, splits: &[i64]) -> Result<Self> {
        let first = alphas.first().ok_or_else(|| CmvError::WindowTooSmall("empty window".into()))?;
        let m = first.rows();
        let mut sites = Vec::with_capacity(alphas.len());
        for (i, a) in alphas.into_iter().enumerate() {
            let k = k_min + i as i64;
            if a.rows() != m || a.cols() != m {
                return Err(CmvError::ShapeMismatch(format!(
                    "coefficient at site {k} is {}x{}, expected {m}x{m}",
                    a.rows(),
                    a.cols()
                )));
            }
            let split = splits.contains(&k);
            if !split && op_norm(&a) >= NORM_CEILING {
                return Err(CmvError::NormTooLarge(k));
            }
            sites.push(Site::new(a, split)?);
        }
        Ok(Self { m, k_min, sites })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k_min(&self) -> i64 {
        self.k_min
    }

    pub fn k_max(&self) -> i64 {
        self.k_min + self.sites.len() as i64 - 1
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn contains(&self, k: i64) -> bool {
        k >= self.k_min && k <= self.k_max()
    }

    pub fn site(&self, k: i64) -> Result<&Site> {
        if !self.contains(k) {
            return Err(CmvError::OutOfWindow(k));
        }
        Ok(&self.sites[(k - self.k_min) as usize])
    }

    pub fn alpha(&self, k: i64) -> Result<&ComplexMatrix> {
        Ok(&self.site(k)?.alpha)
    }

    pub fn rho(&self, k: i64) -> Result<&ComplexMatrix> {
        Ok(&self.site(k)?.rho)
    }

    pub fn rho_tilde(&self, k: i64) -> Result<&ComplexMatrix> {
        Ok(&self.site(k)?.rho_tilde)
    }

    pub fn rho_inv(&self, k: i64) -> Result<&ComplexMatrix> {
        self.site(k)?.rho_inv.as_ref().ok_or(CmvError::Singular)
    }

    pub fn rho_tilde_inv(&self, k: i64) -> Result<&ComplexMatrix> {
        self.site(k)?.rho_tilde_inv.as_ref().ok_or(CmvError::Singular)
    }

    /// `a_k = I + α_k`.
    pub fn a(&self, k: i64) -> Result<ComplexMatrix> {
        Ok(&ComplexMatrix::identity(self.m) + self.alpha(k)?)
    }

    /// `b_k = I - α_k`.
    pub fn b(&self, k: i64) -> Result<ComplexMatrix> {
        Ok(&ComplexMatrix::identity(self.m) - self.alpha(k)?)
    }

    /// `Θ_k = [[-α_k, ρ̃_k], [ρ_k, α_k*]]`.
    pub fn theta(&self, k: i64) -> Result<ComplexMatrix> {
        let s = self.site(k)?;
        Ok(ComplexMatrix::from_blocks(&-&s.alpha, &s.rho_tilde, &s.rho, &s.alpha.adjoint()))
    }

    pub fn alphas(&self) -> impl Iterator<Item = (i64, &ComplexMatrix)> {
        self.sites.iter().enumerate().map(move |(i, s)| (self.k_min + i as i64, &s.alpha))
    }

    /// Copy of `[lo, hi]` with optional identity overrides at either end.
    pub fn sub_window(&self, lo: i64, hi: i64, split_lo: bool, split_hi: bool) -> Result<Self> {
        if !self.contains(lo) {
            return Err(CmvError::OutOfWindow(lo));
        }
        if !self.contains(hi) {
            return Err(CmvError::OutOfWindow(hi));
        }
        if hi < lo {
            return Err(CmvError::WindowTooSmall(format!("[{lo}, {hi}]")));
        }
        let mut sites: Vec<Site> = self.sites[(lo - self.k_min) as usize..=(hi - self.k_min) as usize].to_vec();
        let m = self.m;
        if split_lo {
            sites[0] = Site::new(ComplexMatrix::identity(m), true)?;
        }
        if split_hi {
            let last = sites.len() - 1;
            sites[last] = Site::new(ComplexMatrix::identity(m), true)?;
        }
        Ok(Self { m, k_min: lo, sites })
    }

    /// Same window with `α_k` replaced.
    pub fn with_alpha(&self, k: i64, alpha: ComplexMatrix) -> Result<Self> {
        let idx = (k - self.k_min) as usize;
        if !self.contains(k) {
            return Err(CmvError::OutOfWindow(k));
        }
        if op_norm(&alpha) >= NORM_CEILING {
            return Err(CmvError::NormTooLarge(k));
        }
        let mut out = self.clone();
        out.sites[idx] = Site::new(alpha, false)?;
        Ok(out)
    }

    /// Largest defect of the `ρ`/`ρ̃` intertwining identities over the window.
    pub fn identity_defect(&self) -> f64 {
        let id = ComplexMatrix::identity(self.m);
        let two = id.scale_re(2.0);
        let mut worst: f64 = 0.0;
        for s in self.sites.iter().filter(|s| !s.split) {
            let (ri, rti) = (s.rho_inv.as_ref().unwrap(), s.rho_tilde_inv.as_ref().unwrap());
            let a = &id + &s.alpha;
            let b = &id - &s.alpha;
            let rti2 = rti * rti;
            let ri2 = ri * ri;
            let checks = [
                (&s.rho_tilde * &s.alpha - &s.alpha * &s.rho).max_abs(),
                (rti * &s.alpha - &s.alpha * ri).max_abs(),
                (&(&a.adjoint() * &rti2) * &a - &(&a * &ri2) * &a.adjoint()).max_abs(),
                (&(&(&a.adjoint() * &rti2) * &b) + &(&(&a * &ri2) * &b.adjoint()) - two.clone()).max_abs(),
            ];
            worst = checks.iter().cloned().fold(worst, f64::max);
        }
        worst
    }
}

/// Samples `len` coefficients with operator norms uniform in `(0, norm_cap]`.
pub fn sample_alphas<R: Rng>(rng: &mut R, m: usize, len: usize, norm_cap: f64) -> Result<Vec<ComplexMatrix>> {
    if !(norm_cap > 0.0 && norm_cap < 1.0) {
        return Err(CmvError::BadConfig(format!("norm cap {norm_cap} outside (0, 1)")));
    }
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        let raw = ComplexMatrix::from_fn(m, m, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let n = op_norm(&raw);
        if n < 1e-6 {
            continue;
        }
        let target = norm_cap * (1.0 - rng.gen::<f64>());
        out.push(raw.scale_re(target / n));
    }
    Ok(out)
}

/// A window of sampled coefficients, fully determined by `seed`.
pub fn sample_window(seed: u64, m: usize, k_min: i64, len: usize, norm_cap: f64) -> Result<VerblunskyData> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    VerblunskyData::derive(k_min, sample_alphas(&mut rng, m, len, norm_cap)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Plus,
    Minus,
}

/// A finite CMV truncation `U = VW` on the sites `first ..= last`.
#[derive(Clone, Debug)]
pub struct CmvOperator {
    data: VerblunskyData,
    first: i64,
    last: i64,
    u: ComplexMatrix,
    v: ComplexMatrix,
    w: ComplexMatrix,
}

impl CmvOperator {
    /// The coefficients actually used, with split overrides applied.
    pub fn data(&self) -> &VerblunskyData {
        &self.data
    }

    pub fn m(&self) -> usize {
        self.data.m
    }

    pub fn first_site(&self) -> i64 {
        self.first
    }

    pub fn last_site(&self) -> i64 {
        self.last
    }

    pub fn sites(&self) -> usize {
        (self.last - self.first + 1) as usize
    }

    pub fn contains_site(&self, k: i64) -> bool {
        k >= self.first && k <= self.last
    }

    /// Storage row of the first component of site `k`.
    pub fn offset(&self, k: i64) -> Result<usize> {
        if !self.contains_site(k) {
            return Err(CmvError::OutOfWindow(k));
        }
        Ok((k - self.first) as usize * self.data.m)
    }

    pub fn u(&self) -> &ComplexMatrix {
        &self.u
    }

    pub fn v(&self) -> &ComplexMatrix {
        &self.v
    }

    pub fn w(&self) -> &ComplexMatrix {
        &self.w
    }

    /// The m×m block `U(k, k')`.
    pub fn u_block(&self, k: i64, kp: i64) -> Result<ComplexMatrix> {
        let m = self.data.m;
        Ok(self.u.block(self.offset(k)?, self.offset(kp)?, m, m))
    }

    /// Largest entry of `U` more than two sites off the diagonal.
    pub fn band_violation(&self) -> f64 {
        let m = self.data.m;
        let n = self.u.rows();
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for col in 0..n {
                if (r / m).abs_diff(col / m) > 2 {
                    worst = worst.max(self.u[(r, col)].norm());
                }
            }
        }
        worst
    }
}

/// Truncation of the window to sites `k_min ..= k_max - 1`; each flag
/// replaces the corresponding boundary coefficient by the identity.
pub fn build_cmv(data: &VerblunskyData, split_left: bool, split_right: bool) -> Result<CmvOperator> {
    if data.len() < 2 {
        return Err(CmvError::WindowTooSmall(format!("{} coefficients, need at least 2", data.len())));
    }
    let eff = data.sub_window(data.k_min(), data.k_max(), split_left, split_right)?;
    let m = eff.m;
    let first = eff.k_min();
    let last = eff.k_max() - 1;
    let dim = (last - first + 1) as usize * m;
    let mut v = ComplexMatrix::zeros(dim, dim);
    let mut w = ComplexMatrix::zeros(dim, dim);
    for k in eff.k_min()..=eff.k_max() {
        let s = eff.site(k)?;
        let target = if k % 2 == 0 { &mut v } else { &mut w };
        let lower_inside = k > first;
        let upper_inside = k <= last;
        match (lower_inside, upper_inside) {
            (true, true) => {
                let row = (k - 1 - first) as usize * m;
                target.set_block(row, row, &eff.theta(k)?);
            }
            (false, true) => {
                let row = (k - first) as usize * m;
                target.set_block(row, row, &s.alpha.adjoint());
            }
            (true, false) => {
                let row = (k - 1 - first) as usize * m;
                target.set_block(row, row, &-&s.alpha);
            }
            (false, false) => unreachable!("window of at least two coefficients"),
        }
    }
    let u = &v * &w;
    Ok(CmvOperator { data: eff, first, last, u, v, w })
}

/// Half-lattice truncation at `k0`: `U_{+,k0}` on `k0 ..= k_max - 1`, or
/// `U_{-,k0}` on `k_min ..= k0` (split by `α_{k0+1} = I`).
pub fn half_lattice(data: &VerblunskyData, k0: i64, side: Side) -> Result<CmvOperator> {
    if !data.contains(k0) {
        return Err(CmvError::OutOfWindow(k0));
    }
    if k0 + 1 > data.k_max() {
        return Err(CmvError::OutOfWindow(k0 + 1));
    }
    let sub = match side {
        Side::Plus => data.sub_window(k0, data.k_max(), true, true)?,
        Side::Minus => data.sub_window(data.k_min(), k0 + 1, true, true)?,
    };
    build_cmv(&sub, true, true)
}
