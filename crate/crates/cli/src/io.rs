//! Fixed CSV schemas for records and snapshots.

use std::path::Path;

use ahflow_core::diagnostics::DiagnosticsRecord;
use ahflow_core::geometry::kappa_from_lambda;
use ahflow_core::FlowState;

pub const RECORD_COLUMNS: [&str; 10] = [
    "t",
    "sup_rm_plus_k",
    "min_lambda",
    "max_lambda",
    "min_kappa",
    "max_kappa",
    "sup_r2_lambda",
    "sup_kml_abs",
    "bianchi_res",
    "dt",
];

pub const SNAPSHOT_COLUMNS: [&str; 6] = ["t", "x", "r", "lambda", "kappa", "f"];

/// Shortest round-trip text for a float.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

pub fn write_records(path: &Path, records: &[DiagnosticsRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RECORD_COLUMNS)?;
    for r in records {
        w.write_record(
            [
                r.t,
                r.sup_rm_plus_k,
                r.min_lambda,
                r.max_lambda,
                r.min_kappa,
                r.max_kappa,
                r.sup_r2_lambda,
                r.sup_kappa_minus_lambda_abs,
                r.bianchi_residual_max,
                r.dt,
            ]
            .map(num),
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_snapshots(path: &Path, snapshots: &[FlowState]) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SNAPSHOT_COLUMNS)?;
    for s in snapshots {
        let p = &s.profile;
        let kappa = kappa_from_lambda(p);
        let grid = p.grid();
        for (i, &k) in kappa.iter().enumerate() {
            let (x, r, l) = (grid.x()[i], grid.r()[i], p.lambda()[i]);
            let margin = if r.is_finite() {
                1.0 - r * r * l
            } else {
                f64::INFINITY
            };
            let f = if margin > 0.0 {
                margin.sqrt().recip()
            } else {
                f64::NAN
            };
            w.write_record([s.t, x, r, l, k, f].map(num))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Columns of a CSV file by header name.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self, csv::Error> {
        let mut r = csv::Reader::from_path(path)?;
        let headers = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            rows.push(
                rec.iter()
                    .map(|v| v.trim().parse().unwrap_or(f64::NAN))
                    .collect(),
            );
        }
        Ok(Self { headers, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.headers.iter().position(|h| h == name)?;
        Some(
            self.rows
                .iter()
                .map(|row| row.get(k).copied().unwrap_or(f64::NAN))
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.csv");
        let rec = DiagnosticsRecord {
            t: 0.1,
            sup_rm_plus_k: 1.0 / 3.0,
            min_lambda: -1.5,
            max_lambda: -1.0,
            min_kappa: -2.0,
            max_kappa: f64::INFINITY,
            sup_r2_lambda: 0.0,
            sup_kappa_minus_lambda_abs: 1e-300,
            bianchi_residual_max: 2e-5,
            dt: 1e-6,
        };
        write_records(&path, &[rec, rec]).unwrap();
        let t = Table::read(&path).unwrap();
        assert_eq!(t.headers, RECORD_COLUMNS);
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.column("sup_rm_plus_k").unwrap()[0], 1.0 / 3.0);
        assert_eq!(t.column("max_kappa").unwrap()[1], f64::INFINITY);
        assert_eq!(t.column("sup_kml_abs").unwrap()[0], 1e-300);
        assert!(t.column("nope").is_none());
    }
}
