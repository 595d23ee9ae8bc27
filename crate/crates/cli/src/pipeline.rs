//! Forward reports and the inversion routes that consume them.

use std::collections::BTreeMap;

use clap::ValueEnum;
use cmv_core::greens::{greens_series, GreensData};
use cmv_core::inverse::{full_lattice_invert_gg, full_lattice_invert_gh, half_lattice_invert, HalfLatticeData};
use cmv_core::linalg::op_norm;
use cmv_core::spectral::{measure_from_operator, moments, MomentTable};
use cmv_core::verblunsky::{half_lattice, Side, VerblunskyData};
use cmv_core::weyl::{convert, m_from_measure, WeylFunction, WeylKind};
use cmv_core::ComplexMatrix;
use serde_json::{json, Map, Value};

use crate::codec;
use crate::Failure;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Measures,
    Moments,
    Weyl,
    Greens,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Route {
    Gh,
    Gg,
    Moments,
    #[value(name = "taylor-m")]
    TaylorLowerM,
    #[value(name = "taylor-M")]
    TaylorUpperM,
    #[value(name = "taylor-phi")]
    TaylorPhi,
}

impl Route {
    pub fn name(self) -> &'static str {
        match self {
            Route::Gh => "gh",
            Route::Gg => "gg",
            Route::Moments => "moments",
            Route::TaylorLowerM => "taylor-m",
            Route::TaylorUpperM => "taylor-M",
            Route::TaylorPhi => "taylor-phi",
        }
    }

    fn kind(self, side: Side) -> Option<WeylKind> {
        Some(match (self, side) {
            (Route::TaylorLowerM, Side::Plus) => WeylKind::MPlus,
            (Route::TaylorLowerM, Side::Minus) => WeylKind::MMinus,
            (Route::TaylorUpperM, Side::Plus) => WeylKind::UpperMPlus,
            (Route::TaylorUpperM, Side::Minus) => WeylKind::UpperMMinus,
            (Route::TaylorPhi, Side::Plus) => WeylKind::PhiPlus,
            (Route::TaylorPhi, Side::Minus) => WeylKind::PhiMinusInv,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    Plus,
    Minus,
    Full,
}

impl SideArg {
    fn sides(self) -> &'static [Side] {
        match self {
            SideArg::Plus => &[Side::Plus],
            SideArg::Minus => &[Side::Minus],
            SideArg::Full => &[Side::Plus, Side::Minus],
        }
    }
}

fn side_key(side: Side) -> &'static str {
    match side {
        Side::Plus => "plus",
        Side::Minus => "minus",
    }
}

/// Spectral artifacts of `data` at `k0` through Taylor order `order`.
pub fn forward(data: &VerblunskyData, k0: i64, order: usize, targets: &[Target]) -> Result<Value, Failure> {
    let mut out = Map::new();
    out.insert("command".into(), json!("forward"));
    out.insert("m".into(), json!(data.m()));
    out.insert("k0".into(), json!(k0));
    out.insert("order".into(), json!(order));
    out.insert("window".into(), json!([data.k_min(), data.k_max()]));
    let wants = |t| targets.contains(&t);
    if wants(Target::Measures) || wants(Target::Moments) || wants(Target::Weyl) {
        let mut measures = Map::new();
        let mut mom = Map::new();
        let mut weyl = Map::new();
        for side in [Side::Plus, Side::Minus] {
            let mu = measure_from_operator(&half_lattice(data, k0, side)?, k0)?;
            measures.insert(side_key(side).into(), codec::measure(&mu));
            // The minus side loses one order passing from m₋ to M₋.
            let extra = usize::from(side == Side::Minus);
            mom.insert(side_key(side).into(), Value::Array(moments(&mu, order + extra).iter().map(codec::matrix).collect()));
            let lower = m_from_measure(&mu, side, k0, order + extra);
            weyl.insert(lower.kind.name().into(), codec::series(&lower.series));
            let kinds = match side {
                Side::Plus => [WeylKind::UpperMPlus, WeylKind::PhiPlus],
                Side::Minus => [WeylKind::UpperMMinus, WeylKind::PhiMinusInv],
            };
            for kind in kinds {
                weyl.insert(kind.name().into(), codec::series(&convert(&lower, kind)?.series));
            }
        }
        if wants(Target::Measures) {
            out.insert("measures".into(), Value::Object(measures));
        }
        if wants(Target::Moments) {
            out.insert("moments".into(), Value::Object(mom));
        }
        if wants(Target::Weyl) {
            out.insert("weyl".into(), Value::Object(weyl));
        }
    }
    if wants(Target::Greens) {
        let gd = greens_series(data, k0, order)?;
        let prev = greens_series(data, k0 - 1, order)?;
        out.insert(
            "greens".into(),
            json!({
                "g": codec::series(&gd.g),
                "h": codec::series(&gd.h),
                "g_prev": codec::series(&prev.g),
                "alpha_k0": codec::matrix(data.alpha(k0)?),
            }),
        );
    }
    Ok(Value::Object(out))
}

/// Recovered coefficients independent of the route taken.
#[derive(Clone, Debug)]
pub struct Inversion {
    pub route: Route,
    pub k0: i64,
    pub recovered: BTreeMap<i64, ComplexMatrix>,
    pub window: (i64, i64),
    pub checks: Vec<(String, f64)>,
}

impl Inversion {
    pub fn errors(&self, reference: &VerblunskyData) -> BTreeMap<i64, f64> {
        self.recovered
            .iter()
            .filter_map(|(&k, a)| reference.alpha(k).ok().map(|r| (k, op_norm(&(a - r)))))
            .collect()
    }

    pub fn to_json(&self, errors: Option<&BTreeMap<i64, f64>>) -> Value {
        let max_err = errors.map(|e| {
            (self.window.0..=self.window.1).filter_map(|k| e.get(&k)).cloned().fold(0.0, f64::max)
        });
        json!({
            "command": "invert",
            "route": self.route.name(),
            "k0": self.k0,
            "window": [self.window.0, self.window.1],
            "recovered": codec::site_map(&self.recovered, codec::matrix),
            "errors": errors.map(|e| codec::site_map(e, |x| json!(x))),
            "max_window_error": max_err,
            "checks": self.checks.iter().map(|(k, v)| (k.clone(), json!(v))).collect::<Map<_, _>>(),
        })
    }
}

fn section<'a>(report: &'a Value, key: &str) -> Result<&'a Value, Failure> {
    report.get(key).ok_or_else(|| Failure::Input(format!("forward report lacks `{key}`; rerun forward with that target")))
}

/// Runs `route` on a forward report; `cap` limits the number of recovered
/// coefficients per side (half-lattice) or the Taylor order (full lattice).
pub fn invert(report: &Value, route: Route, side: SideArg, cap: Option<usize>) -> Result<Inversion, Failure> {
    let k0 = codec::int(report, "k0")?;
    let m = codec::int(report, "m")? as usize;
    match route {
        Route::Gh | Route::Gg => {
            let greens = section(report, "greens")?;
            let g = codec::parse_series(codec::field(greens, "g")?)?;
            let h = codec::parse_series(codec::field(greens, "h")?)?;
            let n = cap.unwrap_or(usize::MAX).min(g.order()).min(h.order());
            let rep = if route == Route::Gh {
                full_lattice_invert_gh(&GreensData { k0, g: g.truncate(n), h: h.truncate(n) }, n)?
            } else {
                let g_prev = codec::parse_series(codec::field(greens, "g_prev")?)?;
                let alpha = codec::parse_matrix(codec::field(greens, "alpha_k0")?)?;
                full_lattice_invert_gg(&g_prev, &g, &alpha, k0, n.min(g_prev.order()))?
            };
            Ok(Inversion { route, k0, recovered: rep.recovered, window: rep.window, checks: rep.checks })
        }
        _ => {
            let mut recovered = BTreeMap::new();
            for &s in side.sides() {
                let (payload, available) = if route == Route::Moments {
                    let list = codec::parse_moments(codec::field(section(report, "moments")?, side_key(s))?)?;
                    let table = MomentTable::new(list)?;
                    let n = table.available();
                    (HalfLatticeData::Moments(table), n)
                } else {
                    let kind = route.kind(s).expect("Taylor route");
                    let series = codec::parse_series(codec::field(section(report, "weyl")?, kind.name())?)?;
                    if series.m() != m {
                        return Err(Failure::Input("series size differs from `m`".into()));
                    }
                    let f = WeylFunction { kind, k0, series, source: None };
                    let lower = if s == Side::Plus { WeylKind::MPlus } else { WeylKind::MMinus };
                    let n = convert(&f, lower)?.order();
                    (HalfLatticeData::Taylor(f), n)
                };
                let n = cap.unwrap_or(usize::MAX).min(available);
                recovered.extend(half_lattice_invert(&payload, s, k0, n)?);
            }
            let window = match (recovered.keys().next(), recovered.keys().next_back()) {
                (Some(&lo), Some(&hi)) => (lo, hi),
                _ => (k0, k0 - 1),
            };
            Ok(Inversion { route, k0, recovered, window, checks: Vec::new() })
        }
    }
}
