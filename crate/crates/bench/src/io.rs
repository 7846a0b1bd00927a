//! CSV reading and writing.
//!
//! Plain comma-separated numeric files: UTF-8, '.' decimal point, no quoting,
//! floats printed with 17 significant digits so a save/load round trip is
//! bit exact. Dataset files carry the header g1..gp,x1..xq.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ctxopt_core::kernel::Dataset;
use ndarray::Array2;

use crate::error::BenchError;

/// 17 significant digits; round-trips f64 exactly.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// One realized observation of an experiment run. Wall-clock timings are
/// reported in the run summary on stdout, not here, so that result files stay
/// byte-identical across runs.
#[derive(Debug, Clone)]
pub struct ResultRow {
    pub method: String,
    pub trial: usize,
    /// Probe index, decision-day index, or Monte-Carlo index.
    pub index: usize,
    pub value: f64,
}

pub fn save_result_rows(rows: &[ResultRow], path: &Path) -> Result<(), BenchError> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "method,trial,index,value")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{}",
            row.method,
            row.trial,
            row.index,
            format_float(row.value)
        )?;
    }
    Ok(())
}

/// Generic numeric table with a caller-supplied header.
pub fn save_table(header: &[&str], rows: &[Vec<String>], path: &Path) -> Result<(), BenchError> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<(), BenchError> {
    let mut out = BufWriter::new(File::create(path)?);
    let p = dataset.covariate_dim();
    let q = dataset.outcome_dim();
    let mut header = Vec::with_capacity(p + q);
    for j in 1..=p {
        header.push(format!("g{j}"));
    }
    for j in 1..=q {
        header.push(format!("x{j}"));
    }
    writeln!(out, "{}", header.join(","))?;
    for i in 0..dataset.n() {
        let mut fields = Vec::with_capacity(p + q);
        for j in 0..p {
            fields.push(format_float(dataset.covariates()[[i, j]]));
        }
        for j in 0..q {
            fields.push(format_float(dataset.outcomes()[[i, j]]));
        }
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset, BenchError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| BenchError::Config(format!("{}: empty file", path.display())))??;
    let names: Vec<&str> = header.trim().split(',').collect();

    // The header must be exactly g1..gp followed by x1..xq.
    let p = names.iter().take_while(|n| n.starts_with('g')).count();
    let q = names.len() - p;
    if p == 0 {
        return Err(BenchError::Config(format!(
            "{}: missing column g1",
            path.display()
        )));
    }
    if q == 0 {
        return Err(BenchError::Config(format!(
            "{}: missing column x1",
            path.display()
        )));
    }
    for (j, expected) in (1..=p).map(|j| format!("g{j}")).enumerate() {
        if names[j] != expected {
            return Err(BenchError::Config(format!(
                "{}: missing column {expected}",
                path.display()
            )));
        }
    }
    for (j, expected) in (1..=q).map(|j| format!("x{j}")).enumerate() {
        if names[p + j] != expected {
            return Err(BenchError::Config(format!(
                "{}: missing column {expected}",
                path.display()
            )));
        }
    }

    let mut values: Vec<f64> = Vec::new();
    let mut rows = 0usize;
    for (line_no, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != p + q {
            return Err(BenchError::Config(format!(
                "{}:{}: expected {} fields, found {}",
                path.display(),
                line_no + 2,
                p + q,
                fields.len()
            )));
        }
        for field in fields {
            let v: f64 = field.parse().map_err(|_| {
                BenchError::Config(format!(
                    "{}:{}: unparsable number {field:?}",
                    path.display(),
                    line_no + 2
                ))
            })?;
            values.push(v);
        }
        rows += 1;
    }
    let mut covariates = Array2::zeros((rows, p));
    let mut outcomes = Array2::zeros((rows, q));
    for i in 0..rows {
        for j in 0..p {
            covariates[[i, j]] = values[i * (p + q) + j];
        }
        for j in 0..q {
            outcomes[[i, j]] = values[i * (p + q) + p + j];
        }
    }
    Ok(Dataset::new(covariates, outcomes)?)
}
