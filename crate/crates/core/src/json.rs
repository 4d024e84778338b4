//! JSON encoding of measures, path measures, decompositions and dual
//! certificates. Rationals are written as strings (`"p/q"` or `"p"`) so no
//! precision is lost; parse errors carry a JSON pointer to the bad value.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};
use serde_json::{json, Map, Value};

use crate::coupling::PathMeasure;
use crate::decomposition::{ClosedRange, IrreducibleDomain, StepDecomposition};
use crate::error::{MotError, Result};
use crate::lpsolver::DualCertificate;
use crate::measure::DiscreteMeasure;
use crate::rational::{format_rational, parse_rational, to_f64, Rational};

pub fn rational(r: &Rational) -> Value {
    Value::String(format_rational(r))
}

/// A rational, or `{"exact", "approx"}` when a decimal rendering is requested.
pub fn with_approx(r: &Rational, approx: bool) -> Value {
    if approx {
        json!({"exact": format_rational(r), "approx": to_f64(r)})
    } else {
        rational(r)
    }
}

fn field<'a>(v: &'a Value, key: &str, pointer: &str) -> Result<&'a Value> {
    v.get(key)
        .ok_or_else(|| MotError::parse(pointer, format!("missing field {key:?}")))
}

fn array<'a>(v: &'a Value, pointer: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| MotError::parse(pointer, "expected an array"))
}

/// Reads a rational from a string, an integer, or an `{"exact": ...}` object.
pub fn parse_rational_value(v: &Value, pointer: &str) -> Result<Rational> {
    match v {
        Value::String(s) => parse_rational(s).map_err(|e| MotError::parse(pointer, e.to_string())),
        Value::Number(n) => match n.as_i64() {
            Some(i) => Ok(Rational::from_integer(i.into())),
            None => Err(MotError::parse(pointer, "non-integer numbers must be given as strings")),
        },
        Value::Object(o) if o.contains_key("exact") => parse_rational_value(&o["exact"], &format!("{pointer}/exact")),
        _ => Err(MotError::parse(pointer, "expected a rational")),
    }
}

fn parse_weight(v: &Value, pointer: &str) -> Result<Rational> {
    let w = parse_rational_value(v, pointer)?;
    if !w.is_positive() {
        return Err(MotError::parse(pointer, format!("weight must be positive, got {}", format_rational(&w))));
    }
    Ok(w)
}

fn parse_measure_at(v: &Value, pointer: &str) -> Result<DiscreteMeasure> {
    let atoms_ptr = format!("{pointer}/atoms");
    let atoms = array(field(v, "atoms", pointer)?, &atoms_ptr)?;
    let mut pairs = Vec::with_capacity(atoms.len());
    for (i, a) in atoms.iter().enumerate() {
        let p = format!("{atoms_ptr}/{i}");
        let x = parse_rational_value(field(a, "x", &p)?, &format!("{p}/x"))?;
        let w = parse_weight(field(a, "w", &p)?, &format!("{p}/w"))?;
        pairs.push((x, w));
    }
    DiscreteMeasure::new(pairs).map_err(|e| MotError::parse(pointer, e.to_string()))
}

/// Parses `{"atoms":[{"x":"p/q","w":"r/s"},...]}`; duplicate points are merged.
pub fn parse_measure(v: &Value) -> Result<DiscreteMeasure> {
    parse_measure_at(v, "")
}

pub fn measure_to_json(m: &DiscreteMeasure, approx: bool) -> Value {
    json!({
        "atoms": m
            .iter()
            .map(|(x, w)| json!({"x": with_approx(x, approx), "w": with_approx(w, approx)}))
            .collect::<Vec<_>>()
    })
}

/// Accepts `{"marginals":[...]}` or a bare array of measures.
pub fn parse_marginals(v: &Value) -> Result<Vec<DiscreteMeasure>> {
    let (list, base) = match v.get("marginals") {
        Some(list) => (list, "/marginals"),
        None => (v, ""),
    };
    array(list, base)?
        .iter()
        .enumerate()
        .map(|(t, m)| parse_measure_at(m, &format!("{base}/{t}")))
        .collect()
}

pub fn marginals_to_json(ms: &[DiscreteMeasure], approx: bool) -> Value {
    json!({"marginals": ms.iter().map(|m| measure_to_json(m, approx)).collect::<Vec<_>>()})
}

/// Parses `{"n":2,"paths":[{"x":["0","-1","-2"],"w":"1/4"},...]}`.
pub fn parse_coupling(v: &Value) -> Result<PathMeasure> {
    let n = field(v, "n", "")?
        .as_u64()
        .ok_or_else(|| MotError::parse("/n", "expected a nonnegative integer"))? as usize;
    let paths = array(field(v, "paths", "")?, "/paths")?;
    let mut out = Vec::with_capacity(paths.len());
    for (i, p) in paths.iter().enumerate() {
        let ptr = format!("/paths/{i}");
        let xs = array(field(p, "x", &ptr)?, &format!("{ptr}/x"))?;
        if xs.len() != n + 1 {
            return Err(MotError::parse(
                format!("{ptr}/x"),
                format!("expected {} coordinates, got {}", n + 1, xs.len()),
            ));
        }
        let x = xs
            .iter()
            .enumerate()
            .map(|(k, c)| parse_rational_value(c, &format!("{ptr}/x/{k}")))
            .collect::<Result<Vec<_>>>()?;
        let w = parse_weight(field(p, "w", &ptr)?, &format!("{ptr}/w"))?;
        out.push((x, w));
    }
    PathMeasure::from_paths(n, out)
}

pub fn coupling_to_json(p: &PathMeasure, approx: bool) -> Value {
    json!({
        "n": p.steps(),
        "paths": p
            .iter()
            .map(|(x, w)| json!({
                "x": x.iter().map(|c| with_approx(c, approx)).collect::<Vec<_>>(),
                "w": with_approx(w, approx),
            }))
            .collect::<Vec<_>>()
    })
}

fn end(r: &Option<Rational>, infinite: &str) -> Value {
    match r {
        Some(r) => rational(r),
        None => Value::String(infinite.into()),
    }
}

fn parse_end(v: &Value, pointer: &str, infinite: &str) -> Result<Option<Rational>> {
    if v.as_str() == Some(infinite) {
        Ok(None)
    } else {
        parse_rational_value(v, pointer).map(Some)
    }
}

pub fn decomposition_to_json(d: &StepDecomposition, approx: bool) -> Value {
    let components: Vec<Value> = d
        .components
        .iter()
        .map(|c| {
            json!({
                "index": c.index,
                "I": {"left": rational(&c.left), "right": rational(&c.right)},
                "J": {
                    "left": rational(&c.left),
                    "right": rational(&c.right),
                    "left_closed": c.left_in_j,
                    "right_closed": c.right_in_j,
                },
                "mu": measure_to_json(&c.mu, approx),
                "nu": measure_to_json(&c.nu, approx),
            })
        })
        .collect();
    json!({
        "diagonal": measure_to_json(&d.diagonal, approx),
        "diagonal_domain": d
            .diagonal_domain
            .iter()
            .map(|r| json!({"lo": end(&r.lo, "-inf"), "hi": end(&r.hi, "inf")}))
            .collect::<Vec<_>>(),
        "components": components,
    })
}

pub fn parse_decomposition(v: &Value) -> Result<StepDecomposition> {
    let diagonal = parse_measure_at(field(v, "diagonal", "")?, "/diagonal")?;
    let mut diagonal_domain = Vec::new();
    for (i, r) in array(field(v, "diagonal_domain", "")?, "/diagonal_domain")?.iter().enumerate() {
        let p = format!("/diagonal_domain/{i}");
        diagonal_domain.push(ClosedRange {
            lo: parse_end(field(r, "lo", &p)?, &format!("{p}/lo"), "-inf")?,
            hi: parse_end(field(r, "hi", &p)?, &format!("{p}/hi"), "inf")?,
        });
    }
    let mut components = Vec::new();
    for (i, c) in array(field(v, "components", "")?, "/components")?.iter().enumerate() {
        let p = format!("/components/{i}");
        let index = field(c, "index", &p)?
            .as_u64()
            .ok_or_else(|| MotError::parse(format!("{p}/index"), "expected an integer"))? as usize;
        let interval = field(c, "I", &p)?;
        let j = field(c, "J", &p)?;
        let flag = |key: &str| -> Result<bool> {
            field(j, key, &format!("{p}/J"))?
                .as_bool()
                .ok_or_else(|| MotError::parse(format!("{p}/J/{key}"), "expected a boolean"))
        };
        components.push(IrreducibleDomain {
            index,
            left: parse_rational_value(field(interval, "left", &format!("{p}/I"))?, &format!("{p}/I/left"))?,
            right: parse_rational_value(field(interval, "right", &format!("{p}/I"))?, &format!("{p}/I/right"))?,
            left_in_j: flag("left_closed")?,
            right_in_j: flag("right_closed")?,
            mu: parse_measure_at(field(c, "mu", &p)?, &format!("{p}/mu"))?,
            nu: parse_measure_at(field(c, "nu", &p)?, &format!("{p}/nu"))?,
        });
    }
    Ok(StepDecomposition {
        diagonal,
        diagonal_domain,
        components,
    })
}

/// Scalars that can be written into a certificate.
pub trait JsonScalar {
    fn to_json(&self, approx: bool) -> Value;
}

impl JsonScalar for Rational {
    fn to_json(&self, approx: bool) -> Value {
        with_approx(self, approx)
    }
}

impl JsonScalar for f64 {
    fn to_json(&self, _approx: bool) -> Value {
        json!(self)
    }
}

pub fn certificate_to_json<T: JsonScalar>(c: &DualCertificate<T>, approx: bool) -> Value {
    let phi: Vec<Value> = c
        .phi
        .iter()
        .map(|m| {
            Value::Array(
                m.iter()
                    .map(|(x, v)| json!({"x": rational(x), "value": v.to_json(approx)}))
                    .collect(),
            )
        })
        .collect();
    let h: Vec<Value> = c
        .h
        .iter()
        .map(|((t, hist), v)| {
            json!({
                "t": t,
                "history": hist.iter().map(rational).collect::<Vec<_>>(),
                "value": v.to_json(approx),
            })
        })
        .collect();
    let mut out = Map::new();
    out.insert("n".into(), json!(c.n));
    out.insert("objective".into(), c.objective.to_json(approx));
    out.insert("phi".into(), Value::Array(phi));
    out.insert("h".into(), Value::Array(h));
    Value::Object(out)
}

/// Parses an exact certificate; zero strategy entries are dropped.
pub fn parse_certificate(v: &Value) -> Result<DualCertificate<Rational>> {
    let n = field(v, "n", "")?
        .as_u64()
        .ok_or_else(|| MotError::parse("/n", "expected an integer"))? as usize;
    let objective = parse_rational_value(field(v, "objective", "")?, "/objective")?;
    let mut phi = Vec::new();
    for (t, row) in array(field(v, "phi", "")?, "/phi")?.iter().enumerate() {
        let mut map = BTreeMap::new();
        for (i, e) in array(row, &format!("/phi/{t}"))?.iter().enumerate() {
            let p = format!("/phi/{t}/{i}");
            map.insert(
                parse_rational_value(field(e, "x", &p)?, &format!("{p}/x"))?,
                parse_rational_value(field(e, "value", &p)?, &format!("{p}/value"))?,
            );
        }
        phi.push(map);
    }
    let mut h = BTreeMap::new();
    for (i, e) in array(field(v, "h", "")?, "/h")?.iter().enumerate() {
        let p = format!("/h/{i}");
        let t = field(e, "t", &p)?
            .as_u64()
            .ok_or_else(|| MotError::parse(format!("{p}/t"), "expected an integer"))? as usize;
        let history = array(field(e, "history", &p)?, &format!("{p}/history"))?
            .iter()
            .enumerate()
            .map(|(k, x)| parse_rational_value(x, &format!("{p}/history/{k}")))
            .collect::<Result<Vec<_>>>()?;
        let value = parse_rational_value(field(e, "value", &p)?, &format!("{p}/value"))?;
        if !value.is_zero() {
            h.insert((t, history), value);
        }
    }
    Ok(DualCertificate { n, phi, h, objective })
}
