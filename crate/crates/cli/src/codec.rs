//! JSON encoding of matrices, series, measures and coefficient windows.
//!
//! A matrix is a list of rows, each entry a `[re, im]` pair. `serde_json`
//! writes the shortest decimal that parses back to the same `f64`.

use std::collections::BTreeMap;

use cmv_core::series::MatrixPowerSeries;
use cmv_core::spectral::SpectralMeasure;
use cmv_core::verblunsky::VerblunskyData;
use cmv_core::{ComplexMatrix, C64};
use serde_json::{json, Map, Value};

use crate::Failure;

pub const DATA_FORMAT: &str = "cmv-verblunsky";

pub fn complex(z: C64) -> Value {
    json!([z.re, z.im])
}

pub fn matrix(a: &ComplexMatrix) -> Value {
    Value::Array((0..a.rows()).map(|i| Value::Array((0..a.cols()).map(|j| complex(a[(i, j)])).collect())).collect())
}

pub fn series(s: &MatrixPowerSeries) -> Value {
    Value::Array(s.coeffs().iter().map(matrix).collect())
}

pub fn measure(mu: &SpectralMeasure) -> Value {
    Value::Array(mu.atoms().iter().map(|a| json!({ "node": complex(a.node), "weight": matrix(&a.weight) })).collect())
}

pub fn site_map<T>(map: &BTreeMap<i64, T>, f: impl Fn(&T) -> Value) -> Value {
    Value::Object(map.iter().map(|(k, v)| (k.to_string(), f(v))).collect::<Map<_, _>>())
}

pub fn data_file(d: &VerblunskyData, meta: Value) -> Value {
    json!({
        "format": DATA_FORMAT,
        "m": d.m(),
        "k_min": d.k_min(),
        "alphas": d.alphas().map(|(_, a)| matrix(a)).collect::<Vec<_>>(),
        "meta": meta,
    })
}

fn bad(what: &str) -> Failure {
    Failure::Input(format!("malformed {what}"))
}

pub fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value, Failure> {
    v.get(key).ok_or_else(|| Failure::Input(format!("missing field `{key}`")))
}

pub fn int(v: &Value, key: &str) -> Result<i64, Failure> {
    field(v, key)?.as_i64().ok_or_else(|| bad(key))
}

pub fn parse_complex(v: &Value) -> Result<C64, Failure> {
    match v.as_array().map(|a| a.as_slice()) {
        Some([re, im]) => Ok(C64::new(re.as_f64().ok_or_else(|| bad("number"))?, im.as_f64().ok_or_else(|| bad("number"))?)),
        _ => Err(bad("complex number")),
    }
}

pub fn parse_matrix(v: &Value) -> Result<ComplexMatrix, Failure> {
    let rows = v.as_array().ok_or_else(|| bad("matrix"))?;
    let n = rows.len();
    let mut out = ComplexMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_array().filter(|r| r.len() == n).ok_or_else(|| bad("matrix row"))?;
        for (j, x) in row.iter().enumerate() {
            out[(i, j)] = parse_complex(x)?;
        }
    }
    Ok(out)
}

fn parse_list(v: &Value) -> Result<Vec<ComplexMatrix>, Failure> {
    v.as_array().ok_or_else(|| bad("matrix list"))?.iter().map(parse_matrix).collect()
}

pub fn parse_series(v: &Value) -> Result<MatrixPowerSeries, Failure> {
    Ok(MatrixPowerSeries::new(parse_list(v)?)?)
}

pub fn parse_moments(v: &Value) -> Result<Vec<ComplexMatrix>, Failure> {
    parse_list(v)
}

pub fn parse_data(v: &Value) -> Result<VerblunskyData, Failure> {
    if v.get("format").and_then(Value::as_str) != Some(DATA_FORMAT) {
        return Err(Failure::Input(format!("not a `{DATA_FORMAT}` file")));
    }
    Ok(VerblunskyData::derive(int(v, "k_min")?, parse_list(field(v, "alphas")?)?)?)
}
