//! Text formats: JSON documents with 17 significant digit floats and the
//! `kind,abscissa,value,sigma` scan CSV.

use std::io;

use nalgebra::{Matrix4, Vector4};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::detection::{ScanCurve, ScanKind};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::state::{Basis, TwoModeState};

pub const SCAN_CSV_HEADER: [&str; 4] = ["kind", "abscissa", "value", "sigma"];

/// Pretty JSON formatter that writes every float in scientific notation with
/// 17 significant digits (9 for `f32`).
struct FixedDigits<'a> {
    inner: PrettyFormatter<'a>,
}

fn check_finite(ok: bool) -> io::Result<()> {
    if ok {
        Ok(())
    } else {
        Err(io::Error::new(io::ErrorKind::InvalidData, "non-finite float"))
    }
}

impl Formatter for FixedDigits<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        check_finite(value.is_finite())?;
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        check_finite(value.is_finite())?;
        write!(w, "{value:.8e}")
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

/// Serializes any document with the crate's float format. Output ends with a newline.
pub fn to_json_string<S: Serialize + ?Sized>(value: &S) -> Result<String> {
    let mut buf = Vec::new();
    let fmt = FixedDigits {
        inner: PrettyFormatter::with_indent(b"  "),
    };
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Format(format!("cannot serialize: {e}")))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
}

/// Parses a JSON document; errors carry line and column.
pub fn from_json_str<D: DeserializeOwned>(text: &str) -> Result<D> {
    serde_json::from_str(text).map_err(|e| Error::Format(format!("line {}, column {}: {e}", e.line(), e.column())))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateDoc<T> {
    mean: [T; 4],
    cov: [[T; 4]; 4],
    basis: Basis,
}

impl<T: Real + Serialize> Serialize for TwoModeState<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let m = self.mean();
        let c = self.cov();
        StateDoc {
            mean: [m[0], m[1], m[2], m[3]],
            cov: std::array::from_fn(|i| std::array::from_fn(|j| c[(i, j)])),
            basis: self.basis(),
        }
        .serialize(serializer)
    }
}

impl<'de, T: Real + Deserialize<'de>> Deserialize<'de> for TwoModeState<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let doc = StateDoc::<T>::deserialize(deserializer)?;
        let mean = Vector4::from(doc.mean);
        let cov = Matrix4::from_fn(|i, j| doc.cov[i][j]);
        TwoModeState::new(mean, cov, doc.basis).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScanRow {
    kind: String,
    abscissa: f64,
    value: f64,
    sigma: f64,
}

fn rows_of<T: Real>(curve: &ScanCurve<T>) -> Vec<ScanRow> {
    (0..curve.len())
        .map(|i| ScanRow {
            kind: curve.kind.as_str().to_string(),
            abscissa: curve.abscissa[i].to_f64_lossy(),
            value: curve.values[i].to_f64_lossy(),
            sigma: curve.sigma[i].to_f64_lossy(),
        })
        .collect()
}

fn curve_from_rows<T: Real>(rows: Vec<(usize, ScanRow)>) -> Result<ScanCurve<T>> {
    let mut kind = None;
    let (mut x, mut y, mut s) = (Vec::new(), Vec::new(), Vec::new());
    for (line, row) in rows {
        let k = ScanKind::parse(&row.kind)
            .ok_or_else(|| Error::Format(format!("line {line}: unknown scan kind {:?}", row.kind)))?;
        if *kind.get_or_insert(k) != k {
            return Err(Error::Format(format!("line {line}: scan kind changes within the file")));
        }
        x.push(T::lit(row.abscissa));
        y.push(T::lit(row.value));
        s.push(T::lit(row.sigma));
    }
    let kind = kind.ok_or_else(|| Error::Format("scan has no points".into()))?;
    ScanCurve::new(kind, x, y, s)
}

/// CSV with header `kind,abscissa,value,sigma`; floats use the shortest
/// representation that round-trips.
pub fn scan_to_csv<T: Real>(curve: &ScanCurve<T>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SCAN_CSV_HEADER).map_err(csv_err)?;
    for row in rows_of(curve) {
        w.write_record([
            row.kind,
            row.abscissa.to_string(),
            row.value.to_string(),
            row.sigma.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    match e.position() {
        Some(p) => Error::Format(format!("line {}: {e}", p.line())),
        None => Error::Format(e.to_string()),
    }
}

pub fn scan_from_csv<T: Real>(text: &str) -> Result<ScanCurve<T>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = r.headers().map_err(csv_err)?;
    if header.iter().ne(SCAN_CSV_HEADER) {
        return Err(Error::Format(format!(
            "line 1: expected header {}, got {}",
            SCAN_CSV_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for rec in r.deserialize::<ScanRow>() {
        let row = rec.map_err(csv_err)?;
        rows.push((rows.len() + 2, row));
    }
    curve_from_rows(rows)
}

/// JSON array of `{kind, abscissa, value, sigma}` objects.
pub fn scan_to_json<T: Real>(curve: &ScanCurve<T>) -> Result<String> {
    to_json_string(&rows_of(curve))
}

pub fn scan_from_json<T: Real>(text: &str) -> Result<ScanCurve<T>> {
    let rows: Vec<ScanRow> = from_json_str(text)?;
    curve_from_rows(rows.into_iter().enumerate().map(|(i, r)| (i + 1, r)).collect())
}
