//! Output encoding: JSON or CSV, floats always with 17 significant digits.

use std::io::{self, Write};

use num_complex::Complex64;
use serde_json::ser::Formatter;
use serde_json::Value;

/// Fixed 17-significant-digit rendering, positional for moderate exponents.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0.0000000000000000".into();
    }
    let sci = format!("{x:.16e}");
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..].parse().expect("integer exponent");
    if (-5..=16).contains(&exp) {
        format!("{x:.prec$}", prec = (16 - exp) as usize)
    } else {
        sci
    }
}

struct SeventeenDigits;

impl Formatter for SeventeenDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }
}

pub fn to_json_string(value: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SeventeenDigits);
    serde::Serialize::serialize(value, &mut ser).expect("in-memory JSON serialization");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

pub fn complex(z: Complex64) -> Value {
    Value::from(vec![z.re, z.im])
}

#[derive(Clone, Debug)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Bool(bool),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(x) => fmt_f64(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}
impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as i64)
    }
}
impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}
impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(&self.header).expect("in-memory CSV");
        for row in &self.rows {
            writer.write_record(row.iter().map(Cell::render)).expect("in-memory CSV");
        }
        String::from_utf8(writer.into_inner().expect("flush CSV")).expect("CSV is UTF-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt_f64(1.0), "1.0000000000000000");
        assert_eq!(fmt_f64(-std::f64::consts::FRAC_PI_2), "-1.5707963267948966");
        assert_eq!(fmt_f64(1e-3), "0.0010000000000000000");
        assert_eq!(fmt_f64(2.5e-7), "2.4999999999999999e-7");
        assert_eq!(fmt_f64(1e20), "1.0000000000000000e20");
        assert_eq!(fmt_f64(-0.0), "0.0000000000000000");
    }

    #[test]
    fn rendering_round_trips() {
        for x in [0.1, 1.0 / 3.0, 123456.789, -9.999999999999999e-6, 6.02214076e23, 5e-324] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn json_uses_fixed_digits() {
        let v = serde_json::json!({"a": 0.5, "b": [1, 2.0]});
        assert_eq!(to_json_string(&v), r#"{"a":0.50000000000000000,"b":[1,2.0000000000000000]}"#);
    }
}
