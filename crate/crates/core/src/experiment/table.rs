//! Result rows and their CSV form.
//!
//! Floats are written with 9 significant digits in scientific notation;
//! missing values are empty fields. The column order is part of the format.

use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::coverage::{Quantity, RegionTerms};
use crate::error::{Error, Result};
use crate::model::MobilityScheme;

pub const COLUMNS: [&str; 22] = [
    "index",
    "scheme",
    "v",
    "t",
    "t_over_tbar",
    "h_r",
    "lambda_r",
    "lambda_t",
    "beta_db",
    "quantity",
    "analytic",
    "mc",
    "mc_half_width",
    "mc_drops",
    "seed",
    "sd_a",
    "sd_b",
    "srd_a",
    "srd_b",
    "same_tbs_model",
    "same_tbs_mc",
    "error",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub index: usize,
    pub scheme: MobilityScheme,
    pub v: f64,
    pub t: f64,
    pub t_over_tbar: Option<f64>,
    pub h_r: f64,
    pub lambda_r: f64,
    pub lambda_t: f64,
    /// Empty for the threshold-free association rows.
    pub beta_db: Option<f64>,
    pub quantity: Quantity,
    pub analytic: Option<f64>,
    pub mc: Option<f64>,
    pub mc_half_width: Option<f64>,
    pub mc_drops: Option<usize>,
    pub seed: Option<u64>,
    /// Region terms of the total coverage, on analytic `total` rows.
    pub regions: Option<RegionTerms>,
    /// Mean same-TBS probability over the relay region (closed form).
    pub same_tbs_model: Option<f64>,
    /// Same-TBS rate among relay-served drops.
    pub same_tbs_mc: Option<f64>,
    pub error: Option<String>,
}

impl ResultRow {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }

    /// The value to plot: analytic when present, otherwise MC.
    pub fn value(&self) -> Option<f64> {
        self.analytic.or(self.mc)
    }

    fn record(&self) -> Vec<String> {
        let r = self.regions;
        vec![
            self.index.to_string(),
            self.scheme.as_str().to_string(),
            fmt_f64(self.v),
            fmt_f64(self.t),
            fmt_opt(self.t_over_tbar),
            fmt_f64(self.h_r),
            fmt_f64(self.lambda_r),
            fmt_f64(self.lambda_t),
            fmt_opt(self.beta_db),
            self.quantity.as_str().to_string(),
            fmt_opt(self.analytic),
            fmt_opt(self.mc),
            fmt_opt(self.mc_half_width),
            self.mc_drops.map(|n| n.to_string()).unwrap_or_default(),
            self.seed.map(|n| n.to_string()).unwrap_or_default(),
            fmt_opt(r.map(|r| r.sd_a)),
            fmt_opt(r.map(|r| r.sd_b)),
            fmt_opt(r.map(|r| r.srd_a)),
            fmt_opt(r.map(|r| r.srd_b)),
            fmt_opt(self.same_tbs_model),
            fmt_opt(self.same_tbs_mc),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

/// Scientific notation with 9 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.8e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn write_rows<W: Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(COLUMNS)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_rows(std::io::BufWriter::new(file), rows)
}

pub fn read_rows<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let mut position = [0usize; COLUMNS.len()];
    for (slot, name) in position.iter_mut().zip(COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("missing column `{name}`")))?;
    }
    let mut rows = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let field = |i: usize| record.get(position[i]).unwrap_or("");
        let ctx = |name: &str| format!("row {}: column `{name}`", line + 1);
        let req = |i: usize| -> Result<f64> {
            parse_f64(field(i), &ctx(COLUMNS[i]))?
                .ok_or_else(|| Error::Format(format!("{} is empty", ctx(COLUMNS[i]))))
        };
        let opt = |i: usize| parse_f64(field(i), &ctx(COLUMNS[i]));
        let int = |i: usize| -> Result<Option<u64>> {
            let s = field(i);
            if s.is_empty() {
                return Ok(None);
            }
            s.parse::<u64>()
                .map(Some)
                .map_err(|_| Error::Format(format!("{}: `{s}` is not an integer", ctx(COLUMNS[i]))))
        };
        let regions = match (opt(15)?, opt(16)?, opt(17)?, opt(18)?) {
            (Some(sd_a), Some(sd_b), Some(srd_a), Some(srd_b)) => Some(RegionTerms {
                sd_a,
                sd_b,
                srd_a,
                srd_b,
            }),
            _ => None,
        };
        let error = field(21);
        rows.push(ResultRow {
            index: int(0)?.ok_or_else(|| Error::Format(format!("{} is empty", ctx("index"))))?
                as usize,
            scheme: MobilityScheme::from_str(field(1))
                .map_err(|e| Error::Format(format!("{}: {e}", ctx("scheme"))))?,
            v: req(2)?,
            t: req(3)?,
            t_over_tbar: opt(4)?,
            h_r: req(5)?,
            lambda_r: req(6)?,
            lambda_t: req(7)?,
            beta_db: opt(8)?,
            quantity: Quantity::from_str(field(9))
                .map_err(|e| Error::Format(format!("{}: {e}", ctx("quantity"))))?,
            analytic: opt(10)?,
            mc: opt(11)?,
            mc_half_width: opt(12)?,
            mc_drops: int(13)?.map(|n| n as usize),
            seed: int(14)?,
            regions,
            same_tbs_model: opt(19)?,
            same_tbs_mc: opt(20)?,
            error: (!error.is_empty()).then(|| error.to_string()),
        });
    }
    Ok(rows)
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let file = std::fs::File::open(path)?;
    read_rows(std::io::BufReader::new(file))
}

fn parse_f64(s: &str, ctx: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Format(format!("{ctx}: `{s}` is not a number")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> ResultRow {
        ResultRow {
            index: 3,
            scheme: MobilityScheme::TowardUser,
            v: 40.0,
            t: 1.0 / 3.0,
            t_over_tbar: Some(0.5),
            h_r: 1000.0,
            lambda_r: 1e-7,
            lambda_t: 5e-8,
            beta_db: Some(-10.0),
            quantity: Quantity::Total,
            analytic: Some(0.123456789123),
            mc: Some(0.12),
            mc_half_width: Some(0.003),
            mc_drops: Some(50_000),
            seed: Some(9),
            regions: Some(RegionTerms {
                sd_a: 0.1,
                sd_b: 0.2,
                srd_a: 0.0,
                srd_b: 0.3,
            }),
            same_tbs_model: Some(0.5),
            same_tbs_mc: None,
            error: Some("analytic: quadrature failed, \"x\"".into()),
        }
    }

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_f64(0.123456789123), "1.23456789e-1");
        assert_eq!(fmt_f64(1000.0), "1.00000000e3");
        assert_eq!(fmt_f64(0.0), "0.00000000e0");
    }

    #[test]
    fn round_trip() {
        let mut buf = Vec::new();
        write_rows(&mut buf, &[row()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&COLUMNS.join(",")));
        assert!(!text.contains('\r'));
        let back = read_rows(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 1);
        let b = &back[0];
        assert_eq!(b.analytic, Some(0.123456789));
        assert_eq!(b.error, row().error);
        assert_eq!(b.same_tbs_mc, None);
        let mut again = Vec::new();
        write_rows(&mut again, &back).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn missing_column_is_a_format_error() {
        let text = "index,scheme\n0,hover\n";
        match read_rows(text.as_bytes()) {
            Err(Error::Format(msg)) => assert!(msg.contains("v"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }
}
