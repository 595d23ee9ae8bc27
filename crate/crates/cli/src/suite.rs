//! The invariant suite behind `verify`.

use std::f64::consts::TAU;

use cmv_core::greens::{
    direct_resolvent, plus_family_values, polynomial_identity_residuals, reflect, resolvent_kernel, site_block, weyl_pair,
    wronskian,
};
use cmv_core::laurent::{generate_family, Kind};
use cmv_core::spectral::{block_measure_checked, measure_from_operator, orthonormality_check};
use cmv_core::verblunsky::{build_cmv, half_lattice, Side, VerblunskyData};
use cmv_core::weyl::{
    block_function, caratheodory_tools, convert, m_from_measure, phi_minus_inv_riccati_residual, phi_minus_inv_series,
    phi_plus_riccati_residual, phi_plus_series, upper_m_at_zero, WeylKind,
};
use cmv_core::{CmvError, ComplexMatrix, C64};
use serde_json::{json, Value};

/// One measured quantity compared against its tolerance.
#[derive(Clone, Debug)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub value: f64,
    pub tol: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.value.is_finite() && self.value < self.tol
    }

    pub fn to_json(&self) -> Value {
        json!({ "suite": self.suite, "name": self.name, "value": self.value, "tol": self.tol, "pass": self.passed() })
    }
}

pub type SuiteFn = fn(&VerblunskyData, i64) -> Result<Vec<Check>, CmvError>;

pub const SUITES: [(&str, SuiteFn); 8] = [
    ("unitarity", unitarity),
    ("orthonormality", orthonormality),
    ("wronskian", wronskian_suite),
    ("lemma-identities", lemma_identities),
    ("resolvent", resolvent),
    ("riccati", riccati),
    ("caratheodory", caratheodory),
    ("anchor-values", anchor_values),
];

fn check(suite: &'static str, name: impl Into<String>, value: f64, tol: f64) -> Check {
    Check { suite, name: name.into(), value, tol }
}

/// Twenty deterministic points of modulus `0.25 ..= 0.82`.
fn sample_points() -> Vec<C64> {
    (0..20).map(|j| C64::from_polar(0.25 + 0.03 * j as f64, TAU * 0.618_033_988_75 * j as f64)).collect()
}

fn unitarity(d: &VerblunskyData, _k0: i64) -> Result<Vec<Check>, CmvError> {
    let op = build_cmv(d, true, true)?;
    let n = op.u().rows();
    let defect = (&(&op.u().adjoint() * op.u()) - &ComplexMatrix::identity(n)).max_abs();
    let factor = (op.u() - &(op.v() * op.w())).max_abs();
    Ok(vec![
        check("unitarity", "U*U - I", defect, 1e-10),
        check("unitarity", "U - VW", factor, 1e-10),
        check("unitarity", "five-block band", op.band_violation(), 1e-300),
    ])
}

fn orthonormality(d: &VerblunskyData, k0: i64) -> Result<Vec<Check>, CmvError> {
    let mut out = Vec::new();
    for side in [Side::Plus, Side::Minus] {
        let mu = measure_from_operator(&half_lattice(d, k0, side)?, k0)?;
        for kind in [Kind::P, Kind::R] {
            let fam = generate_family(d, k0, side, kind, 4)?;
            out.push(check("orthonormality", format!("{side:?} {kind:?} depth 4"), orthonormality_check(&mu, &fam), 1e-7));
        }
    }
    let (_, res) = block_measure_checked(&build_cmv(d, true, true)?, k0, 4)?;
    out.push(check("orthonormality", "full-lattice block basis depth 4", res, 1e-7));
    Ok(out)
}

fn wronskian_suite(d: &VerblunskyData, k0: i64) -> Result<Vec<Check>, CmvError> {
    let (lo, hi) = (k0 - 3, k0 + 4);
    let id = ComplexMatrix::identity(d.m());
    let (mut pq, mut pp) = (0.0f64, 0.0f64);
    for z in sample_points() {
        let zr = reflect(z)?;
        let p_r = plus_family_values(d, k0, true, zr, lo, hi)?;
        let p = plus_family_values(d, k0, true, z, lo, hi)?;
        let q = plus_family_values(d, k0, false, z, lo, hi)?;
        for i in 0..p.len() {
            let k = lo + i as i64;
            pq = pq.max((&wronskian(k, &p_r[i].0, &p_r[i].1, &q[i].0, &q[i].1) - &id).max_abs());
            pp = pp.max(wronskian(k, &p_r[i].0, &p_r[i].1, &p[i].0, &p[i].1).max_abs());
        }
    }
    let pair = weyl_pair(d, k0, 4)?;
    let sym = sample_points().into_iter().map(|z| pair.symmetry_residual(z)).collect::<Result<Vec<_>, _>>()?;
    Ok(vec![
        check("wronskian", "W(P+,Q+) - I over 8 sites", pq, 1e-10),
        check("wronskian", "W(P+,P+)", pp, 1e-10),
        check("wronskian", "W(z) reflection symmetry", sym.into_iter().fold(0.0, f64::max), 1e-8),
    ])
}

fn lemma_identities(d: &VerblunskyData, k0: i64) -> Result<Vec<Check>, CmvError> {
    let pair = weyl_pair(d, k0, 4)?;
    let (mut poly, mut mixed) = (0.0f64, 0.0f64);
    for z in sample_points().into_iter().step_by(4) {
        let ker = resolvent_kernel(d, &pair, z, k0 - 4, k0 + 4)?;
        for k in k0 - 4..=k0 + 4 {
            poly = polynomial_identity_residuals(d, k0, z, k)?.into_iter().fold(poly, f64::max);
            mixed = ker.mixed_identity_residuals(k)?.into_iter().fold(mixed, f64::max);
        }
    }
    Ok(vec![
        check("lemma-identities", "polynomial identities", poly, 1e-9),
        check("lemma-identities", "Weyl solution identities", mixed, 1e-9),
    ])
}

fn resolvent(d: &VerblunskyData, k0: i64) -> Result<Vec<Check>, CmvError> {
    let op = build_cmv(d, true, true)?;
    let pair = weyl_pair(d, k0, 4)?;
    let mut worst = 0.0f64;
    for z in [C64::new(0.3, 0.0), C64::from_polar(0.3, 2.1), C64::new(0.0, 0.5), C64::from_polar(0.5, -2.5)] {
        let full = direct_resolvent(&op, z)?;
        let ker = resolvent_kernel(d, &pair, z, k0 - 2, k0 + 2)?;
        for k in k0 - 2..=k0 + 2 {
            for kp in k0 - 2..=k0 + 2 {
                worst = worst.max((&ker.entry(k, kp)? - &site_block(&op, &full, k, kp)?).max_abs());
            }
        }
    }
    Ok(vec![check("resolvent", "Weyl-solution formula vs dense solve", worst, 1e-7)])
}

fn riccati(d: &VerblunskyData, k0: i64) -> Result<Vec<Check>, CmvError> {
    let mut plus = 0.0f64;
    let mut minus = 0.0f64;
    for k in [k0, k0 + 1] {
        let (a, b) = (phi_plus_series(d, k, 8)?, phi_plus_series(d, k - 1, 8)?);
        plus = plus.max(phi_plus_riccati_residual(d, k, &a, &b)?.max_abs());
        let (a, b) = (phi_minus_inv_series(d, k, 8)?, phi_minus_inv_series(d, k - 1, 8)?);
        minus = minus.max(phi_minus_inv_riccati_residual(d, k, &a, &b)?.max_abs());
    }
    Ok(vec![
        check("riccati", "Phi+ recursion through order 8", plus, 1e-10),
        check("riccati", "Phi-^-1 recursion through order 8", minus, 1e-10),
    ])
}

fn caratheodory(d: &VerblunskyData, k0: i64) -> Result<Vec<Check>, CmvError> {
    let tol = 1e-9;
    let mut out = Vec::new();
    let mut push = |f: &cmv_core::weyl::WeylFunction| {
        let diag = caratheodory_tools(f);
        let name = f.kind.name();
        if f.kind.is_caratheodory() {
            out.push(check("caratheodory", format!("{name} min Re"), (-diag.min_real_part).max(0.0), tol));
        } else if f.kind.is_schur() {
            out.push(check("caratheodory", format!("{name} max norm - 1"), (diag.max_norm - 1.0).max(0.0), tol));
        }
        if let Some(h) = diag.herglotz_residual {
            out.push(check("caratheodory", format!("{name} Herglotz residual"), h, tol));
        }
        out.push(check("caratheodory", format!("{name} evaluation failures"), diag.failures as f64, 0.5));
    };
    let mu = measure_from_operator(&half_lattice(d, k0, Side::Plus)?, k0)?;
    let m_plus = m_from_measure(&mu, Side::Plus, k0, 8);
    push(&m_plus);
    push(&convert(&m_plus, WeylKind::UpperMPlus)?);
    push(&convert(&m_plus, WeylKind::PhiPlus)?);
    let mu = measure_from_operator(&half_lattice(d, k0, Side::Minus)?, k0)?;
    push(&convert(&m_from_measure(&mu, Side::Minus, k0, 8), WeylKind::PhiMinusInv)?);
    let (block, _) = block_measure_checked(&build_cmv(d, true, true)?, k0, 0)?;
    push(&block_function(&block, WeylKind::M11, 8)?);
    Ok(out)
}

fn anchor_values(d: &VerblunskyData, k0: i64) -> Result<Vec<Check>, CmvError> {
    let pair = weyl_pair(d, k0, 4)?;
    let plus = (pair.plus.series.coeff(0) - &upper_m_at_zero(d, k0, Side::Plus)?).max_abs();
    let minus = (pair.minus.series.coeff(0) - &upper_m_at_zero(d, k0, Side::Minus)?).max_abs();
    Ok(vec![
        check("anchor-values", "M+(0) closed form", plus, 1e-9),
        check("anchor-values", "M-(0) closed form", minus, 1e-9),
    ])
}

/// Runs every suite; failures to evaluate become failed checks.
pub fn run_all(d: &VerblunskyData, k0: i64, threads: usize) -> Vec<Check> {
    let run = |(name, f): &(&'static str, SuiteFn)| match f(d, k0) {
        Ok(c) => c,
        Err(e) => vec![Check { suite: name, name: format!("error: {e}"), value: f64::INFINITY, tol: 0.0 }],
    };
    if threads <= 1 {
        return SUITES.iter().flat_map(run).collect();
    }
    let chunk = SUITES.len().div_ceil(threads);
    std::thread::scope(|s| {
        let handles: Vec<_> =
            SUITES.chunks(chunk).map(|part| s.spawn(move || part.iter().flat_map(run).collect::<Vec<_>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("suite thread panicked")).collect()
    })
}
