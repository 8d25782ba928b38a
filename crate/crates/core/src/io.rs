//! CSV and JSON artifacts. Numbers are written with 17 significant digits so
//! doubles round-trip exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{CMat, C64};
use crate::model::Spin;

pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV text with a header row; every row must have the header's width.
pub fn csv_string<R, I>(header: &[&str], rows: I) -> Result<String>
where
    R: AsRef<[f64]>,
    I: IntoIterator<Item = R>,
{
    let mut out = header.join(",");
    out.push('\n');
    for (i, row) in rows.into_iter().enumerate() {
        let row = row.as_ref();
        if row.len() != header.len() {
            return Err(Error::Format(format!("row {i} has {} fields, header has {}", row.len(), header.len())));
        }
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{}", format_f64(*v)).expect("writing to a String");
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_csv<R, I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    R: AsRef<[f64]>,
    I: IntoIterator<Item = R>,
{
    fs::write(path, csv_string(header, rows)?)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

pub fn parse_csv(text: &str) -> Result<Table> {
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().ok_or_else(|| Error::Format("empty CSV".into()))?.split(',').map(str::to_owned).collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>().map_err(|e| Error::Format(format!("line {}: {e}", i + 2))))
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != header.len() {
            return Err(Error::Format(format!("line {} has {} fields", i + 2, row.len())));
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

pub fn read_csv(path: &Path) -> Result<Table> {
    parse_csv(&fs::read_to_string(path)?)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub const MATRIX_FORMAT: &str = "bjj-matrix";

/// Basis convention recorded in every container.
pub const BASIS_ORDERING: &str = "m descending per spin; two-spin index k1*(2S+1)+k2 (species 1 major); row-major data";

/// Self-describing dense complex matrix (operators, states as `n x 1`,
/// density matrices).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixContainer {
    pub format: String,
    pub version: u32,
    #[serde(rename = "S")]
    pub spin: Spin,
    pub ordering: String,
    pub shape: [usize; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl MatrixContainer {
    pub fn from_matrix(m: &CMat, spin: Spin, time: Option<f64>) -> Self {
        Self {
            format: MATRIX_FORMAT.into(),
            version: 1,
            spin,
            ordering: BASIS_ORDERING.into(),
            shape: [m.nrows(), m.ncols()],
            time,
            re: m.iter().map(|v| v.re).collect(),
            im: m.iter().map(|v| v.im).collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<CMat> {
        if self.format != MATRIX_FORMAT || self.version != 1 {
            return Err(Error::Format(format!("unsupported container {} v{}", self.format, self.version)));
        }
        let [r, c] = self.shape;
        if self.re.len() != r * c || self.im.len() != r * c {
            return Err(Error::Format(format!("data length does not match shape {r}x{c}")));
        }
        let data = self.re.iter().zip(&self.im).map(|(a, b)| C64::new(*a, *b)).collect();
        CMat::from_shape_vec((r, c), data).map_err(|e| Error::Format(e.to_string()))
    }
}
