//! CSV input and output for the command-line tool.
//!
//! Three fixed schemas, all UTF-8 with LF line endings and floats printed
//! in Rust's shortest round-trip form:
//!
//! * sample files — header `x1,...,xd`, one observation per row (discrete
//!   families store the 1-based symbol in `x1`);
//! * report files — `family,d,n,m,method,kind,value,stderr,formula,seed,
//!   error`, one row per computed quantity, `kind` naming what the value
//!   is (`bound`, `exact`, `mc_estimate`, or `certificate_gap`), `stderr`
//!   empty for exact values, and `error` empty on success;
//! * verifier files — `test,family,d,n,m,method,level,rejection,tv_lower,
//!   stderr,seed`, one row per detector.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use amp_core::families::{Dataset, FamilySpec};
use amp_core::nalgebra::DMatrix;
use amp_core::{AmpError, Result};

/// Column order of report CSV files.
pub const REPORT_HEADER: [&str; 11] = [
    "family", "d", "n", "m", "method", "kind", "value", "stderr", "formula", "seed", "error",
];

/// Column order of verifier CSV files.
pub const VERIFIER_HEADER: [&str; 11] = [
    "test", "family", "d", "n", "m", "method", "level", "rejection", "tv_lower", "stderr", "seed",
];

/// One row of a report CSV file.
#[derive(Debug, Clone)]
pub struct ReportRow {
    pub family: String,
    pub d: usize,
    pub n: usize,
    pub m: usize,
    pub method: String,
    /// `bound`, `exact`, `mc_estimate`, or `certificate_gap`; empty when
    /// the row records a failure.
    pub kind: String,
    pub value: Option<f64>,
    pub stderr: Option<f64>,
    pub formula: String,
    pub seed: u64,
    /// Empty on success; the failure message otherwise.
    pub error: String,
}

/// One row of a verifier CSV file.
#[derive(Debug, Clone)]
pub struct VerifierRow {
    pub test: String,
    pub family: String,
    pub d: usize,
    pub n: usize,
    pub m: usize,
    pub method: String,
    pub level: f64,
    pub rejection: f64,
    pub tv_lower: f64,
    pub stderr: f64,
    pub seed: u64,
}

fn io_err(context: &str, err: impl std::fmt::Display) -> AmpError {
    AmpError::validation(format!("{context}: {err}"))
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// A writer for `path`, or stdout when `path` is `None`.
pub fn out_writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| io_err(&format!("cannot create {}", p.display()), e))?;
            Ok(Box::new(file))
        }
        None => Ok(Box::new(std::io::stdout())),
    }
}

/// Write report rows (header always, even with zero rows).
pub fn write_report_csv<W: Write>(writer: W, rows: &[ReportRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(REPORT_HEADER)
        .map_err(|e| io_err("cannot write report header", e))?;
    for r in rows {
        w.write_record([
            r.family.as_str(),
            &r.d.to_string(),
            &r.n.to_string(),
            &r.m.to_string(),
            &r.method,
            &r.kind,
            &opt_f64(r.value),
            &opt_f64(r.stderr),
            &r.formula,
            &r.seed.to_string(),
            &r.error,
        ])
        .map_err(|e| io_err("cannot write report row", e))?;
    }
    w.flush().map_err(|e| io_err("cannot flush report", e))?;
    Ok(())
}

/// Write verifier rows (header always).
pub fn write_verifier_csv<W: Write>(writer: W, rows: &[VerifierRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(VERIFIER_HEADER)
        .map_err(|e| io_err("cannot write verifier header", e))?;
    for r in rows {
        w.write_record([
            r.test.as_str(),
            &r.family,
            &r.d.to_string(),
            &r.n.to_string(),
            &r.m.to_string(),
            &r.method,
            &r.level.to_string(),
            &r.rejection.to_string(),
            &r.tv_lower.to_string(),
            &r.stderr.to_string(),
            &r.seed.to_string(),
        ])
        .map_err(|e| io_err("cannot write verifier row", e))?;
    }
    w.flush().map_err(|e| io_err("cannot flush verifier report", e))?;
    Ok(())
}

/// Write a sample file: header `x1..xd`, one row per observation.
pub fn write_dataset_csv<W: Write>(writer: W, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let d = data.rows.ncols();
    let header: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
    w.write_record(&header)
        .map_err(|e| io_err("cannot write sample header", e))?;
    for i in 0..data.rows.nrows() {
        let record: Vec<String> = (0..d).map(|j| data.rows[(i, j)].to_string()).collect();
        w.write_record(&record)
            .map_err(|e| io_err("cannot write sample row", e))?;
    }
    w.flush().map_err(|e| io_err("cannot flush samples", e))?;
    Ok(())
}

/// Read a sample file produced by [`write_dataset_csv`] (or any CSV with
/// the same shape) into a dataset with the given spec. The column count
/// must match the spec's data dimension; every cell must parse as `f64`.
pub fn read_dataset_csv(path: &Path, spec: &FamilySpec) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| io_err(&format!("cannot read {}", path.display()), e))?;
    let d = reader
        .headers()
        .map_err(|e| io_err(&format!("cannot read header of {}", path.display()), e))?
        .len();
    let want = spec.dim;
    if d != want {
        return Err(AmpError::validation(format!(
            "{} has {d} columns but the {:?} family expects {want}",
            path.display(),
            spec.kind
        )));
    }
    let mut values: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| io_err(&format!("row {} of {}", i + 2, path.display()), e))?;
        if record.len() != d {
            return Err(AmpError::validation(format!(
                "row {} of {} has {} fields, expected {d}",
                i + 2,
                path.display(),
                record.len()
            )));
        }
        for field in record.iter() {
            let v: f64 = field.trim().parse().map_err(|_| {
                AmpError::validation(format!(
                    "row {} of {}: '{field}' is not a number",
                    i + 2,
                    path.display()
                ))
            })?;
            values.push(v);
        }
        n += 1;
    }
    if n == 0 {
        return Err(AmpError::validation(format!(
            "{} contains no data rows",
            path.display()
        )));
    }
    let rows = DMatrix::from_row_slice(n, d, &values);
    Ok(Dataset {
        spec: spec.clone(),
        rows,
        origin: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use amp_core::families::Family;
    use amp_core::numerics::RngState;
    use amp_core::nalgebra::DVector;

    #[test]
    fn report_csv_has_lf_endings_and_roundtrip_floats() {
        let rows = vec![ReportRow {
            family: "gaussian_mean".into(),
            d: 3,
            n: 100,
            m: 10,
            method: "sufficiency".into(),
            kind: "bound".into(),
            value: Some(0.1 + 0.2),
            stderr: None,
            formula: "sqrt(kl/2)".into(),
            seed: 42,
            error: String::new(),
        }];
        let mut buf = Vec::new();
        write_report_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(!text.contains('\r'));
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), REPORT_HEADER.join(","));
        let row = lines.next().unwrap();
        let printed: f64 = row.split(',').nth(6).unwrap().parse().unwrap();
        assert_eq!(printed, 0.1 + 0.2);
        // stderr and error columns are empty.
        assert!(row.ends_with("sqrt(kl/2),42,"));
    }

    #[test]
    fn empty_report_is_header_only() {
        let mut buf = Vec::new();
        write_report_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{}\n", REPORT_HEADER.join(",")));
    }

    #[test]
    fn dataset_csv_roundtrips_exactly() {
        let family = Family::gaussian_mean(
            DVector::zeros(2),
            amp_core::nalgebra::DMatrix::identity(2, 2),
        )
        .unwrap();
        let mut rng = RngState::new(9, 0);
        let data = family.sample(5, &mut rng).unwrap();
        let mut buf = Vec::new();
        write_dataset_csv(&mut buf, &data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sample.csv");
        std::fs::write(&path, &buf).unwrap();
        let back = read_dataset_csv(&path, &family.spec()).unwrap();
        assert_eq!(back.rows, data.rows);

        // Writing the re-read dataset reproduces the same bytes.
        let mut buf2 = Vec::new();
        write_dataset_csv(&mut buf2, &back).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn dataset_reader_rejects_bad_shapes_and_cells() {
        let family = Family::gaussian_mean(
            DVector::zeros(2),
            amp_core::nalgebra::DMatrix::identity(2, 2),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();

        let wrong_cols = dir.path().join("wrong.csv");
        std::fs::write(&wrong_cols, "x1\n1.0\n").unwrap();
        assert!(read_dataset_csv(&wrong_cols, &family.spec()).is_err());

        let bad_cell = dir.path().join("bad.csv");
        std::fs::write(&bad_cell, "x1,x2\n1.0,oops\n").unwrap();
        assert!(read_dataset_csv(&bad_cell, &family.spec()).is_err());

        let empty = dir.path().join("empty.csv");
        std::fs::write(&empty, "x1,x2\n").unwrap();
        assert!(read_dataset_csv(&empty, &family.spec()).is_err());
    }

    #[test]
    fn discrete_samples_use_one_symbol_column() {
        let family = Family::discrete(vec![0.25; 4]).unwrap();
        let mut rng = RngState::new(3, 0);
        let data = family.sample(6, &mut rng).unwrap();
        let mut buf = Vec::new();
        write_dataset_csv(&mut buf, &data).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x1\n"));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("symbols.csv");
        std::fs::write(&path, text).unwrap();
        let back = read_dataset_csv(&path, &family.spec()).unwrap();
        assert_eq!(back.rows, data.rows);
    }
}
