//! Result records and their serialization: JSON with every float written
//! to 17 significant digits, plus plain CSV tables.

use anyhow::Result;
use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;
use sha2::{Digest, Sha256};
use std::io;
use std::path::Path;

pub const SCHEMA: &str = "cavishift.result/1";

/// Writes `f64` as `d.dddddddddddddddde[+-]x` (17 significant digits);
/// non-finite values become `null`.
#[derive(Clone, Copy, Debug, Default)]
pub struct FullPrecision;

fn write_float<W: ?Sized + io::Write>(w: &mut W, v: f64) -> io::Result<()> {
    if v.is_finite() {
        write!(w, "{v:.16e}")
    } else {
        w.write_all(b"null")
    }
}

impl Formatter for FullPrecision {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write_float(w, v)
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        write_float(w, v as f64)
    }
}

/// Compact JSON with full-precision floats.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FullPrecision);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf)?)
}

/// Pretty variant (two-space indent) used for files on disk.
pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    // re-render the compact form so floats keep the full-precision spelling
    let compact = to_json(value)?;
    let v: serde_json::Value = serde_json::from_str(&compact)?;
    let mut out = String::new();
    pretty(&v, 0, &mut out);
    out.push('\n');
    Ok(out)
}

fn pretty(v: &serde_json::Value, indent: usize, out: &mut String) {
    use serde_json::Value;
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(f) if n.is_f64() => out.push_str(&format!("{f:.16e}")),
            _ => out.push_str(&n.to_string()),
        },
        Value::Array(a) if a.is_empty() => out.push_str("[]"),
        Value::Array(a) => {
            out.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                pretty(x, indent + 1, out);
                out.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(m) if m.is_empty() => out.push_str("{}"),
        Value::Object(m) => {
            out.push_str("{\n");
            for (i, (k, x)) in m.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&serde_json::Value::String(k.clone()).to_string());
                out.push_str(": ");
                pretty(x, indent + 1, out);
                out.push_str(if i + 1 < m.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
        other => out.push_str(&other.to_string()),
    }
}

/// Schema-versioned envelope around one command's payload.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema: String,
    pub kind: String,
    pub artifact_version: String,
    /// SHA-256 of the canonical JSON of the full run configuration.
    pub input_digest: String,
    pub payload: serde_json::Value,
}

pub fn artifact_version() -> String {
    format!("cavishift {}", env!("CARGO_PKG_VERSION"))
}

pub fn digest<T: Serialize>(input: &T) -> Result<String> {
    let json = to_json(input)?;
    Ok(Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect())
}

impl ResultRecord {
    pub fn new<I: Serialize, P: Serialize>(kind: &str, input: &I, payload: &P) -> Result<Self> {
        // route the payload through the full-precision writer so that
        // parse(serialize(r)) == r holds bit for bit
        let payload: serde_json::Value = serde_json::from_str(&to_json(payload)?)?;
        Ok(ResultRecord {
            schema: SCHEMA.into(),
            kind: kind.into(),
            artifact_version: artifact_version(),
            input_digest: digest(input)?,
            payload,
        })
    }
}

/// Plain CSV table; floats in 17 significant digits.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "nan".into()
    }
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), contents)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn floats_have_seventeen_digits() {
        let s = to_json(&vec![0.1, 1.0 / 3.0, -2.5e-300]).unwrap();
        assert_eq!(s, "[1.0000000000000001e-1,3.3333333333333331e-1,-2.5000000000000000e-300]");
        let back: Vec<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, vec![0.1, 1.0 / 3.0, -2.5e-300]);
    }

    #[test]
    fn record_round_trips() {
        let payload = vec![Complex64::new(0.6884907135723931, -0.06615809613391373)];
        let r = ResultRecord::new("resonance", &"config", &payload).unwrap();
        let text = to_json(&r).unwrap();
        let back: ResultRecord = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
        let p: Vec<Complex64> = serde_json::from_value(back.payload).unwrap();
        assert_eq!(p, payload);
        let pretty_back: ResultRecord = serde_json::from_str(&to_json_pretty(&r).unwrap()).unwrap();
        assert_eq!(pretty_back, r);
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn any_finite_float_round_trips(v in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 0..16)) {
            let r = ResultRecord::new("shift", &"input", &v).unwrap();
            let back: ResultRecord = serde_json::from_str(&to_json(&r).unwrap()).unwrap();
            let w: Vec<f64> = serde_json::from_value(back.payload.clone()).unwrap();
            prop_assert_eq!(w.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), v.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
            prop_assert_eq!(back, r);
        }
    }
}
