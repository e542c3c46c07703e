//! The `msrk/1` method file: a TOML document with the coefficient arrays
//! stored row-major. Numbers are written with 17 significant digits so a
//! write/read cycle reproduces every coefficient bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use toml::{Table, Value};

use crate::error::{MsrkError, Result};
use crate::method::MsrkMethod;

pub const FORMAT_TAG: &str = "msrk/1";

fn number(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

fn row(values: impl Iterator<Item = f64>) -> String {
    let items: Vec<String> = values.map(number).collect();
    format!("[{}]", items.join(", "))
}

fn matrix(m: &DMatrix<f64>) -> String {
    if m.nrows() == 0 {
        return "[]".into();
    }
    let rows: Vec<String> = (0..m.nrows())
        .map(|i| format!("  {}", row(m.row(i).iter().copied())))
        .collect();
    format!("[\n{},\n]", rows.join(",\n"))
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c if c.is_control() => {
                let _ = write!(out, "\\u{:04X}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

pub fn to_string(method: &MsrkMethod) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "format = {}", quote(FORMAT_TAG));
    let _ = writeln!(out, "name = {}", quote(&method.name));
    let _ = writeln!(out, "s = {}", method.stages());
    let _ = writeln!(out, "k = {}", method.steps());
    let _ = writeln!(out, "claimed_order = {}", method.claimed_order);
    let _ = writeln!(out, "D = {}", matrix(&method.d));
    let _ = writeln!(out, "Ahat = {}", matrix(&method.ahat));
    let _ = writeln!(out, "A = {}", matrix(&method.a));
    let _ = writeln!(out, "theta = {}", row(method.theta.iter().copied()));
    let _ = writeln!(out, "bhat = {}", row(method.bhat.iter().copied()));
    let _ = writeln!(out, "b = {}", row(method.b.iter().copied()));
    out
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn field<'a>(t: &'a Table, key: &str) -> Result<&'a Value> {
    t.get(key)
        .ok_or_else(|| MsrkError::Parse(format!("missing field `{key}`")))
}

fn uint(t: &Table, key: &str) -> Result<usize> {
    match field(t, key)? {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        other => Err(MsrkError::Parse(format!(
            "field `{key}`: expected a nonnegative integer, found {other}"
        ))),
    }
}

fn real(v: &Value, key: &str) -> Result<f64> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        other => Err(MsrkError::Parse(format!(
            "field `{key}`: expected a number, found {other}"
        ))),
    }
}

fn vector(t: &Table, key: &str, len: usize) -> Result<DVector<f64>> {
    let Value::Array(items) = field(t, key)? else {
        return Err(MsrkError::Parse(format!(
            "field `{key}`: expected an array"
        )));
    };
    if items.len() != len {
        return Err(MsrkError::Parse(format!(
            "field `{key}`: expected {len} entries, found {}",
            items.len()
        )));
    }
    let vals = items
        .iter()
        .map(|v| real(v, key))
        .collect::<Result<Vec<_>>>()?;
    Ok(DVector::from_vec(vals))
}

fn mat(t: &Table, key: &str, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    let Value::Array(items) = field(t, key)? else {
        return Err(MsrkError::Parse(format!(
            "field `{key}`: expected an array of rows"
        )));
    };
    // Zero-column matrices may be written as `[]`.
    if cols == 0 && items.is_empty() {
        return Ok(DMatrix::zeros(rows, 0));
    }
    if items.len() != rows {
        return Err(MsrkError::Parse(format!(
            "field `{key}`: expected {rows} rows, found {}",
            items.len()
        )));
    }
    let mut m = DMatrix::zeros(rows, cols);
    for (i, r) in items.iter().enumerate() {
        let Value::Array(vals) = r else {
            return Err(MsrkError::Parse(format!(
                "field `{key}` row {i}: expected an array"
            )));
        };
        if vals.len() != cols {
            return Err(MsrkError::Parse(format!(
                "field `{key}` row {i}: expected {cols} entries, found {}",
                vals.len()
            )));
        }
        for (j, v) in vals.iter().enumerate() {
            m[(i, j)] = real(v, key)?;
        }
    }
    Ok(m)
}

pub fn from_str(text: &str) -> Result<MsrkMethod> {
    let table: Table = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(0);
        MsrkError::Parse(format!("line {line}: {}", e.message()))
    })?;
    match field(&table, "format")? {
        Value::String(tag) if tag == FORMAT_TAG => {}
        other => {
            return Err(MsrkError::Parse(format!(
                "field `format`: expected \"{FORMAT_TAG}\", found {other}"
            )))
        }
    }
    let name = match field(&table, "name")? {
        Value::String(s) => s.clone(),
        other => {
            return Err(MsrkError::Parse(format!(
                "field `name`: expected a string, found {other}"
            )))
        }
    };
    let s = uint(&table, "s")?;
    let k = uint(&table, "k")?;
    if s == 0 || k == 0 {
        return Err(MsrkError::Parse(
            "fields `s` and `k` must be at least 1".into(),
        ));
    }
    let claimed_order = uint(&table, "claimed_order")?;
    Ok(MsrkMethod {
        name,
        claimed_order,
        d: mat(&table, "D", s, k)?,
        ahat: mat(&table, "Ahat", s, k - 1)?,
        a: mat(&table, "A", s, s)?,
        theta: vector(&table, "theta", k)?,
        bhat: vector(&table, "bhat", k - 1)?,
        b: vector(&table, "b", s)?,
    })
}

pub fn read(path: impl AsRef<Path>) -> Result<MsrkMethod> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| MsrkError::Parse(format!("{}: {e}", path.display())))?;
    from_str(&text).map_err(|e| match e {
        MsrkError::Parse(m) => MsrkError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn write(path: impl AsRef<Path>, method: &MsrkMethod) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_string(method))
        .map_err(|e| MsrkError::Parse(format!("{}: {e}", path.display())))
}
