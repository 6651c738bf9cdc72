//! JSON wire formats. Complex numbers are `[re, im]` pairs (a bare number is
//! read as real), matrices are arrays of rows, elements are
//! `{"blocks": [matrix, ...]}` and specs are `{"block_dims": [...]}`.

use crate::algebra::{AlgebraSpec, Element};
use crate::cpmap::CpMap;
use crate::error::Error;
use crate::hmodule::{ModuleMap, ModuleRep};
use crate::ksgns::{KsgnsTriplet, Weight};
use crate::linalg::{c, Mat, C};
use crate::regular::SeedData;
use serde_json::{json, Map, Value};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum FormatError {
    #[error("JSON syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("invalid value at {path}: {message}")]
    Schema { path: String, message: String },
}

pub type FormatResult<T> = std::result::Result<T, FormatError>;

fn schema(path: &str, message: impl Into<String>) -> FormatError {
    FormatError::Schema { path: path.into(), message: message.into() }
}

fn domain(path: &str, e: Error) -> FormatError {
    schema(path, e.to_string())
}

pub fn parse_value(text: &str) -> FormatResult<Value> {
    serde_json::from_str(text).map_err(|e| FormatError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

fn field<'a>(v: &'a Value, key: &str, path: &str) -> FormatResult<&'a Value> {
    v.get(key).ok_or_else(|| schema(path, format!("missing field \"{key}\"")))
}

fn array<'a>(v: &'a Value, path: &str) -> FormatResult<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| schema(path, "expected an array"))
}

fn object<'a>(v: &'a Value, path: &str) -> FormatResult<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| schema(path, "expected an object"))
}

fn number(v: &Value, path: &str) -> FormatResult<f64> {
    v.as_f64().ok_or_else(|| schema(path, "expected a number"))
}

fn usize_of(v: &Value, path: &str) -> FormatResult<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| schema(path, "expected a nonnegative integer"))
}

pub fn complex_to_json(z: C) -> Value {
    json!([z.re, z.im])
}

pub fn complex_from_json(v: &Value, path: &str) -> FormatResult<C> {
    if let Some(x) = v.as_f64() {
        return Ok(c(x, 0.0));
    }
    let a = array(v, path)?;
    if a.len() != 2 {
        return Err(schema(path, "complex number must be [re, im]"));
    }
    Ok(c(number(&a[0], &format!("{path}[0]"))?, number(&a[1], &format!("{path}[1]"))?))
}

pub fn mat_to_json(m: &Mat) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| complex_to_json(m[(i, j)])).collect()))
            .collect(),
    )
}

/// Matrix of the given shape; an empty array is accepted for zero rows.
pub fn mat_from_json(v: &Value, rows: usize, cols: usize, path: &str) -> FormatResult<Mat> {
    let r = array(v, path)?;
    if r.len() != rows {
        return Err(schema(path, format!("expected {rows} rows, found {}", r.len())));
    }
    let mut m = Mat::zeros(rows, cols);
    for (i, row) in r.iter().enumerate() {
        let rp = format!("{path}[{i}]");
        let entries = array(row, &rp)?;
        if entries.len() != cols {
            return Err(schema(&rp, format!("expected {cols} columns, found {}", entries.len())));
        }
        for (j, z) in entries.iter().enumerate() {
            let zp = format!("{rp}[{j}]");
            let z = complex_from_json(z, &zp)?;
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(schema(&zp, "non-finite entry"));
            }
            m[(i, j)] = z;
        }
    }
    Ok(m)
}

pub fn spec_to_json(s: &AlgebraSpec) -> Value {
    json!({ "block_dims": s.block_dims })
}

pub fn spec_from_json(v: &Value, path: &str) -> FormatResult<AlgebraSpec> {
    let dims = array(field(v, "block_dims", path)?, &format!("{path}.block_dims"))?
        .iter()
        .enumerate()
        .map(|(i, d)| usize_of(d, &format!("{path}.block_dims[{i}]")))
        .collect::<FormatResult<Vec<_>>>()?;
    AlgebraSpec::new(dims).map_err(|e| domain(path, e))
}

pub fn element_to_json(x: &Element) -> Value {
    json!({ "blocks": x.blocks().iter().map(mat_to_json).collect::<Vec<_>>() })
}

pub fn element_from_json(v: &Value, spec: &AlgebraSpec, path: &str) -> FormatResult<Element> {
    let bp = format!("{path}.blocks");
    let blocks = array(field(v, "blocks", path)?, &bp)?;
    if blocks.len() != spec.num_blocks() {
        return Err(schema(&bp, format!("expected {} blocks, found {}", spec.num_blocks(), blocks.len())));
    }
    let mats = blocks
        .iter()
        .zip(&spec.block_dims)
        .enumerate()
        .map(|(k, (b, &n))| mat_from_json(b, n, n, &format!("{bp}[{k}]")))
        .collect::<FormatResult<Vec<_>>>()?;
    Element::from_blocks(spec, mats).map_err(|e| domain(path, e))
}

fn index_key(key: &str, bound: usize, path: &str) -> FormatResult<usize> {
    let i: usize = key
        .parse()
        .map_err(|_| schema(path, format!("key \"{key}\" is not a basis index")))?;
    if i >= bound {
        return Err(schema(path, format!("basis index {i} out of range (dimension {bound})")));
    }
    Ok(i)
}

/// `{"coeffs": {index: element}}`; indices absent from the table map to zero.
pub fn cpmap_to_json(m: &CpMap) -> Value {
    let coeffs: Map<String, Value> = m
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, x)| (i.to_string(), element_to_json(x)))
        .collect();
    json!({ "coeffs": coeffs })
}

pub fn cpmap_from_json(v: &Value, a: &AlgebraSpec, b: &AlgebraSpec, path: &str) -> FormatResult<CpMap> {
    let cp = format!("{path}.coeffs");
    let table = object(field(v, "coeffs", path)?, &cp)?;
    let mut coeffs = vec![Element::zero(b); a.dim()];
    for (key, x) in table {
        let i = index_key(key, a.dim(), &cp)?;
        coeffs[i] = element_from_json(x, b, &format!("{cp}.{key}"))?;
    }
    CpMap::new(a, b, &coeffs).map_err(|e| domain(path, e))
}

pub fn weight_to_json(w: &Weight) -> Value {
    let mut out = cpmap_to_json(w.map());
    let o = out.as_object_mut().expect("object");
    o.insert("A".into(), spec_to_json(w.source()));
    o.insert("B".into(), spec_to_json(w.target()));
    o.insert("p".into(), element_to_json(w.p()));
    out
}

pub fn weight_from_json(v: &Value) -> FormatResult<Weight> {
    let a = spec_from_json(field(v, "A", "$")?, "$.A")?;
    let b = spec_from_json(field(v, "B", "$")?, "$.B")?;
    let map = cpmap_from_json(v, &a, &b, "$")?;
    match v.get("p") {
        None | Some(Value::Null) => Ok(Weight::everywhere(map)),
        Some(p) => {
            let p = element_from_json(p, &a, "$.p")?;
            Weight::new(p, &map).map_err(|e| domain("$.p", e))
        }
    }
}

pub fn parse_weight(text: &str) -> FormatResult<Weight> {
    weight_from_json(&parse_value(text)?)
}

/// `{"dim", "action": {index: matrix}, "gram": [[element]]}`; omitted action
/// entries are zero.
pub fn module_to_json(e: &ModuleRep) -> Value {
    let action: Map<String, Value> = e
        .actions()
        .iter()
        .enumerate()
        .map(|(i, m)| (i.to_string(), mat_to_json(m)))
        .collect();
    let gram: Vec<Value> = e
        .gram_tensor()
        .iter()
        .map(|row| Value::Array(row.iter().map(element_to_json).collect()))
        .collect();
    json!({ "dim": e.dim(), "action": action, "gram": gram })
}

pub fn module_from_json(v: &Value, b: &AlgebraSpec, path: &str) -> FormatResult<ModuleRep> {
    let d = usize_of(field(v, "dim", path)?, &format!("{path}.dim"))?;
    let ap = format!("{path}.action");
    let table = object(field(v, "action", path)?, &ap)?;
    let mut action = vec![Mat::zeros(d, d); b.dim()];
    for (key, m) in table {
        let i = index_key(key, b.dim(), &ap)?;
        action[i] = mat_from_json(m, d, d, &format!("{ap}.{key}"))?;
    }
    let gp = format!("{path}.gram");
    let rows = array(field(v, "gram", path)?, &gp)?;
    if rows.len() != d {
        return Err(schema(&gp, format!("expected {d} rows, found {}", rows.len())));
    }
    let mut gram = Vec::with_capacity(d);
    for (i, row) in rows.iter().enumerate() {
        let rp = format!("{gp}[{i}]");
        let entries = array(row, &rp)?;
        if entries.len() != d {
            return Err(schema(&rp, format!("expected {d} entries, found {}", entries.len())));
        }
        gram.push(
            entries
                .iter()
                .enumerate()
                .map(|(j, x)| element_from_json(x, b, &format!("{rp}[{j}]")))
                .collect::<FormatResult<Vec<_>>>()?,
        );
    }
    ModuleRep::new(b.clone(), action, gram).map_err(|e| domain(path, e))
}

pub fn seed_to_json(s: &SeedData) -> Value {
    json!({
        "A": spec_to_json(&s.a),
        "B": spec_to_json(&s.b),
        "E": module_to_json(&s.e),
        "N0": s.n0.iter().map(element_to_json).collect::<Vec<_>>(),
        "Lambda0": s.lambda0.iter().map(mat_to_json).collect::<Vec<_>>(),
        "family": s.family.iter().map(|(t, rho)| json!({
            "T": mat_to_json(t.mat()),
            "rho": cpmap_to_json(rho),
        })).collect::<Vec<_>>(),
    })
}

pub fn seed_from_json(v: &Value) -> FormatResult<SeedData> {
    let a = spec_from_json(field(v, "A", "$")?, "$.A")?;
    let b = spec_from_json(field(v, "B", "$")?, "$.B")?;
    let e = Arc::new(module_from_json(field(v, "E", "$")?, &b, "$.E")?);
    let n0 = array(field(v, "N0", "$")?, "$.N0")?
        .iter()
        .enumerate()
        .map(|(i, x)| element_from_json(x, &a, &format!("$.N0[{i}]")))
        .collect::<FormatResult<Vec<_>>>()?;
    let lambda0 = array(field(v, "Lambda0", "$")?, "$.Lambda0")?
        .iter()
        .enumerate()
        .map(|(i, m)| mat_from_json(m, e.dim(), b.dim(), &format!("$.Lambda0[{i}]")))
        .collect::<FormatResult<Vec<_>>>()?;
    let mut family = Vec::new();
    for (i, entry) in array(field(v, "family", "$")?, "$.family")?.iter().enumerate() {
        let fp = format!("$.family[{i}]");
        let t = mat_from_json(field(entry, "T", &fp)?, e.dim(), e.dim(), &format!("{fp}.T"))?;
        let t = ModuleMap::new(e.clone(), e.clone(), t).map_err(|err| domain(&fp, err))?;
        let rho = cpmap_from_json(field(entry, "rho", &fp)?, &a, &b, &format!("{fp}.rho"))?;
        family.push((t, rho));
    }
    SeedData::new(e, a, n0, lambda0, family).map_err(|err| domain("$", err))
}

pub fn parse_seed(text: &str) -> FormatResult<SeedData> {
    seed_from_json(&parse_value(text)?)
}

pub fn triplet_to_json(t: &KsgnsTriplet) -> Value {
    json!({
        "A": spec_to_json(&t.source()),
        "B": spec_to_json(t.target()),
        "p": element_to_json(t.p()),
        "E": module_to_json(t.module()),
        "n_basis": t.n_basis().iter().map(element_to_json).collect::<Vec<_>>(),
        "Lambda": t.lambda().iter().map(|l| mat_to_json(l.mat())).collect::<Vec<_>>(),
        "pi": t.pi().iter().map(|p| mat_to_json(p.mat())).collect::<Vec<_>>(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ksgns::build_canonical_ksgns;
    use crate::random::{self, substream};

    #[test]
    fn weight_round_trip() {
        let mut rng = substream(1, "json");
        let a = AlgebraSpec::of(&[2, 1]);
        let b = AlgebraSpec::of(&[2]);
        let w = Weight::everywhere(CpMap::random(&mut rng, &a, &b, 2));
        let text = weight_to_json(&w).to_string();
        let back = parse_weight(&text).unwrap();
        assert!(back.map().distance(w.map()) < 1e-15);
        assert!(back.is_densely_defined());
    }

    #[test]
    fn weight_with_projection_round_trip() {
        let mut rng = substream(2, "json");
        let a = AlgebraSpec::of(&[3]);
        let p = a.basis_element(0);
        let w = Weight::new(p, &CpMap::random(&mut rng, &a, &a, 1)).unwrap();
        let back = parse_weight(&weight_to_json(&w).to_string()).unwrap();
        assert!(back.map().distance(w.map()) < 1e-15);
        assert!(back.p().distance(w.p()) < 1e-15);
    }

    #[test]
    fn sparse_coefficients_default_to_zero() {
        let text = r#"{"A": {"block_dims": [1, 1]}, "B": {"block_dims": [1]},
                       "coeffs": {"1": {"blocks": [[[2.0]]]}}}"#;
        let w = parse_weight(text).unwrap();
        assert_eq!(w.map().coeff(0).norm(), 0.0);
        assert!((w.map().coeff(1).norm() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_weight("{\n  \"A\": [1,\n}").unwrap_err();
        match err {
            FormatError::Syntax { line, column, .. } => {
                assert_eq!(line, 3);
                assert!(column >= 1);
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn schema_error_reports_path() {
        let text = r#"{"A": {"block_dims": [2]}, "B": {"block_dims": [1]},
                       "coeffs": {"0": {"blocks": [[[1.0, 2.0]]]}}}"#;
        match parse_weight(text).unwrap_err() {
            FormatError::Schema { path, .. } => assert_eq!(path, "$.coeffs.0.blocks[0][0]"),
            other => panic!("{other}"),
        }
        let text = r#"{"A": {"block_dims": [1]}, "B": {"block_dims": [1]}, "coeffs": {"7": {"blocks": [[[1]]]}}}"#;
        assert!(matches!(parse_weight(text), Err(FormatError::Schema { .. })));
    }

    #[test]
    fn seed_round_trip() {
        let mut rng = substream(3, "json");
        let a = AlgebraSpec::of(&[2]);
        let b = AlgebraSpec::of(&[1, 1]);
        let w = Weight::everywhere(CpMap::random(&mut rng, &a, &b, 2));
        let t = build_canonical_ksgns(&w).unwrap();
        let seed = SeedData::from_triplet(&w, &t, &[0.5, 1.0]).unwrap();
        let back = parse_seed(&seed_to_json(&seed).to_string()).unwrap();
        assert_eq!(back.n0.len(), seed.n0.len());
        assert_eq!(back.e.dim(), seed.e.dim());
        for (x, y) in back.lambda0.iter().zip(&seed.lambda0) {
            assert!(crate::linalg::max_abs(&(x - y)) < 1e-15);
        }
        assert_eq!(seed_to_json(&back), seed_to_json(&seed));
    }

    #[test]
    fn module_round_trip() {
        let mut rng = substream(4, "json");
        let b = random::spec(&mut rng, 2, 2);
        let e = ModuleRep::free(&b);
        let back = module_from_json(&module_to_json(&e), &b, "$").unwrap();
        assert_eq!(module_to_json(&back), module_to_json(&e));
    }

    #[test]
    fn triplet_output_has_all_fields() {
        let a = AlgebraSpec::of(&[2]);
        let t = build_canonical_ksgns(&Weight::everywhere(CpMap::identity(&a))).unwrap();
        let v = triplet_to_json(&t);
        for key in ["A", "B", "p", "E", "n_basis", "Lambda", "pi"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["pi"].as_array().unwrap().len(), 4);
    }
}
