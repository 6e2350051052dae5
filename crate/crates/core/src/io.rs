//! Flat CSV interchange for datasets and dense matrices.
//!
//! Datasets: header `x0,...,x{d-1}` plus an optional trailing `y` column, one
//! row per sample. Matrices: row-major, no header.

use std::fs::File;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, MomError, Result};
use crate::mom_core::Dataset;

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| MomError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|source| MomError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse(field: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| MomError::InvalidArgument(format!("not a number: {field:?}")))
}

pub fn write_dataset_csv(data: &Dataset, path: &Path) -> Result<()> {
    data.validate()?;
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header: Vec<String> = (0..data.dim()).map(|j| format!("x{j}")).collect();
    if data.responses.is_some() {
        header.push("y".into());
    }
    w.write_record(&header)?;
    for (i, p) in data.points.iter().enumerate() {
        let mut row: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        if let Some(r) = &data.responses {
            row.push(r[i].to_string());
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|source| MomError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a dataset; ground truth is not part of the format.
pub fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    let mut r = csv::Reader::from_reader(open(path)?);
    let header = r.headers()?.clone();
    let has_y = header.iter().last() == Some("y");
    let d = header.len() - usize::from(has_y);
    let mut points = Vec::new();
    let mut ys = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let vals = rec.iter().map(parse).collect::<Result<Vec<_>>>()?;
        if vals.len() != header.len() {
            return invalid("ragged dataset row");
        }
        points.push(DVector::from_column_slice(&vals[..d]));
        if has_y {
            ys.push(vals[d]);
        }
    }
    Dataset::new(points, has_y.then_some(ys))
}

pub fn write_matrix_csv(m: &DMatrix<f64>, path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(create(path)?);
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush().map_err(|source| MomError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(open(path)?);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in r.records() {
        rows.push(rec?.iter().map(parse).collect::<Result<_>>()?);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return invalid("ragged matrix row");
    }
    Ok(DMatrix::from_row_iterator(rows.len(), ncols, rows.into_iter().flatten()))
}
