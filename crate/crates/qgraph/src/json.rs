//! Canonical JSON output and path-addressed field access.
//!
//! Reals are written with 17 significant digits (`{:.16e}`), which makes
//! every `f64` round-trip bit-exactly. Object keys come out sorted.

use qgraph_core::linalg::{c64, CMat, C64};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// A real number as a JSON value that the canonical writer prints with 17
/// significant digits.
pub fn real(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn complex(z: C64) -> Value {
    Value::Array(vec![real(z.re), real(z.im)])
}

pub fn cmatrix(m: &CMat) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|r| Value::Array((0..m.ncols()).map(|c| complex(m[(r, c)])).collect()))
            .collect(),
    )
}

pub fn reals(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| real(x)).collect())
}

pub fn pairs(xs: &[(f64, f64)]) -> Value {
    Value::Array(xs.iter().map(|&(a, b)| reals(&[a, b])).collect())
}

fn fmt_real(x: f64) -> String {
    if x == 0.0 {
        // Keep the sign of negative zero.
        return if x.is_sign_negative() { "-0.0000000000000000e0".into() } else { "0.0000000000000000e0".into() };
    }
    format!("{x:.16e}")
}

fn scalar_only(items: &[Value]) -> bool {
    items.iter().all(|v| match v {
        Value::Array(a) => a.iter().all(|x| !x.is_array() && !x.is_object()),
        Value::Object(_) => false,
        _ => true,
    })
}

fn write(v: &Value, indent: usize, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => out.push_str(&u.to_string()),
            (_, Some(i)) => out.push_str(&i.to_string()),
            _ => out.push_str(&fmt_real(n.as_f64().unwrap_or(f64::NAN))),
        },
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
            } else if scalar_only(items) {
                // Short numeric rows stay on one line.
                out.push('[');
                for (i, x) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write(x, indent, out);
                }
                out.push(']');
            } else {
                out.push_str("[\n");
                for (i, x) in items.iter().enumerate() {
                    out.push_str(&"  ".repeat(indent + 1));
                    write(x, indent + 1, out);
                    out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
                }
                out.push_str(&"  ".repeat(indent));
                out.push(']');
            }
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (i, (k, x)) in map.iter().enumerate() {
                out.push_str(&"  ".repeat(indent + 1));
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                write(x, indent + 1, out);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            out.push_str(&"  ".repeat(indent));
            out.push('}');
        }
    }
}

/// Canonical text of a JSON value, newline-terminated.
pub fn to_canonical(v: &Value) -> String {
    let mut out = String::new();
    write(v, 0, &mut out);
    out.push('\n');
    out
}

pub fn parse(text: &str) -> Result<Value> {
    Ok(serde_json::from_str(text)?)
}

/// Typed access to an object, carrying the field path for error messages.
#[derive(Clone, Copy)]
pub struct Obj<'a> {
    pub map: &'a Map<String, Value>,
    pub at: &'a str,
}

pub fn obj<'a>(v: &'a Value, at: &'a str) -> Result<Obj<'a>> {
    v.as_object()
        .map(|map| Obj { map, at })
        .ok_or_else(|| Error::format(at, "expected an object"))
}

pub fn path(at: &str, key: &str) -> String {
    if at.is_empty() {
        key.to_string()
    } else {
        format!("{at}.{key}")
    }
}

impl<'a> Obj<'a> {
    pub fn get(&self, key: &str) -> Result<&'a Value> {
        self.map
            .get(key)
            .ok_or_else(|| Error::format(path(self.at, key), "missing field"))
    }

    pub fn opt(&self, key: &str) -> Option<&'a Value> {
        self.map.get(key).filter(|v| !v.is_null())
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        as_f64(self.get(key)?, &path(self.at, key))
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        self.opt(key).map(|v| as_f64(v, &path(self.at, key))).transpose()
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        as_u64(self.get(key)?, &path(self.at, key))
    }

    pub fn str(&self, key: &str) -> Result<&'a str> {
        self.get(key)?
            .as_str()
            .ok_or_else(|| Error::format(path(self.at, key), "expected a string"))
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.opt(key) {
            None => Ok(default),
            Some(v) => v
                .as_bool()
                .ok_or_else(|| Error::format(path(self.at, key), "expected true or false")),
        }
    }

    /// Rejects keys outside `allowed`, so that typos do not pass silently.
    pub fn only(&self, allowed: &[&str]) -> Result<()> {
        match self.map.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(Error::format(path(self.at, k), "unknown field")),
            None => Ok(()),
        }
    }
}

pub fn as_f64(v: &Value, at: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| Error::format(at, "expected a number"))
}

pub fn as_u64(v: &Value, at: &str) -> Result<u64> {
    v.as_u64()
        .ok_or_else(|| Error::format(at, "expected a non-negative integer"))
}

pub fn as_array<'a>(v: &'a Value, at: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| Error::format(at, "expected an array"))
}

pub fn as_reals(v: &Value, at: &str) -> Result<Vec<f64>> {
    as_array(v, at)?
        .iter()
        .enumerate()
        .map(|(i, x)| as_f64(x, &format!("{at}[{i}]")))
        .collect()
}

pub fn as_pairs(v: &Value, at: &str) -> Result<Vec<(f64, f64)>> {
    as_array(v, at)?
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let p = as_reals(x, &format!("{at}[{i}]"))?;
            match p[..] {
                [a, b] => Ok((a, b)),
                _ => Err(Error::format(format!("{at}[{i}]"), "expected a pair [x, value]")),
            }
        })
        .collect()
}

/// `[re, im]`, or a plain number for a real value.
pub fn as_complex(v: &Value, at: &str) -> Result<C64> {
    if let Some(x) = v.as_f64() {
        return Ok(c64(x, 0.0));
    }
    match as_reals(v, at)?[..] {
        [re, im] => Ok(c64(re, im)),
        _ => Err(Error::format(at, "expected a complex number [re, im]")),
    }
}

/// A rectangular matrix of complex entries (rows of `[re, im]`).
pub fn as_cmatrix(v: &Value, at: &str) -> Result<CMat> {
    let rows = as_array(v, at)?;
    let mut data: Vec<Vec<C64>> = Vec::with_capacity(rows.len());
    for (r, row) in rows.iter().enumerate() {
        let at_r = format!("{at}[{r}]");
        let entries = as_array(row, &at_r)?;
        data.push(
            entries
                .iter()
                .enumerate()
                .map(|(c, x)| as_complex(x, &format!("{at_r}[{c}]")))
                .collect::<Result<_>>()?,
        );
    }
    let ncols = data.first().map_or(0, |r| r.len());
    if let Some(r) = data.iter().position(|row| row.len() != ncols) {
        return Err(Error::format(format!("{at}[{r}]"), "rows have different lengths"));
    }
    Ok(CMat::from_fn(data.len(), ncols, |r, c| data[r][c]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip_bit_exactly() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, -0.0] {
            let text = to_canonical(&real(x));
            let back = parse(&text).unwrap().as_f64().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{text}");
        }
        assert_eq!(to_canonical(&real(1.0)), "1.0000000000000000e0\n");
    }

    #[test]
    fn layout_is_stable() {
        let v = serde_json::json!({"b": [1, 2], "a": {"x": [[1.5, 0.0]]}});
        assert_eq!(
            to_canonical(&v),
            "{\n  \"a\": {\n    \"x\": [[1.5000000000000000e0, 0.0000000000000000e0]]\n  },\n  \"b\": [1, 2]\n}\n"
        );
    }
}
