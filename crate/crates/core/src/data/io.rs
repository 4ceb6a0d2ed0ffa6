//! CSV file formats: time series (T rows × k columns, no header) and the
//! one-row connectome cache `<subject_id>.<atlas>.fc.csv`.

use std::fs;
use std::path::{Path, PathBuf};

use super::{AtlasSpec, Connectome, DataError, Result, RoiTimeSeries};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| DataError::ParseError {
                line: i + 1,
                message: format!("{}: {e}", path.display()),
            })?;
        if row.iter().any(|v| !v.is_finite()) {
            return Err(DataError::NonFinite);
        }
        rows.push(row);
    }
    Ok(rows)
}

fn format_row(values: &[f64]) -> String {
    let mut s = values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
    s.push('\n');
    s
}

/// Reads a time-series CSV. The atlas is checked against the column count.
pub fn read_timeseries(path: &Path, subject_id: &str, atlas: &AtlasSpec) -> Result<RoiTimeSeries> {
    let rows = parse_rows(path)?;
    let mut values = Vec::with_capacity(rows.len() * atlas.k);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != atlas.k {
            return Err(DataError::ParseError {
                line: i + 1,
                message: format!(
                    "{}: expected {} columns for atlas {}, got {}",
                    path.display(),
                    atlas.k,
                    atlas.name,
                    row.len()
                ),
            });
        }
        values.extend_from_slice(row);
    }
    RoiTimeSeries::new(subject_id, atlas.clone(), rows.len(), values)
}

/// Number of columns in the first data row of a time-series CSV.
pub fn timeseries_width(path: &Path) -> Result<usize> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .find(|l| !l.trim().is_empty())
        .map(|l| l.split(',').count())
        .ok_or(DataError::EmptyInput)
}

pub fn write_timeseries(path: &Path, ts: &RoiTimeSeries) -> Result<()> {
    let mut out = String::new();
    for row in ts.values.chunks(ts.atlas.k) {
        out.push_str(&format_row(row));
    }
    fs::write(path, out).map_err(io_err(path))
}

pub fn cache_file_name(subject_id: &str, atlas: &AtlasSpec) -> String {
    format!("{subject_id}.{}.fc.csv", atlas.name.to_lowercase())
}

pub fn write_connectome(dir: &Path, c: &Connectome) -> Result<PathBuf> {
    let path = dir.join(cache_file_name(&c.subject_id, &c.atlas));
    fs::write(&path, format_row(&c.features)).map_err(io_err(&path))?;
    Ok(path)
}

pub fn read_connectome(dir: &Path, subject_id: &str, atlas: &AtlasSpec) -> Result<Connectome> {
    let path = dir.join(cache_file_name(subject_id, atlas));
    let rows = parse_rows(&path)?;
    let [row] = rows.as_slice() else {
        return Err(DataError::ParseError {
            line: rows.len(),
            message: format!("{}: expected exactly one row", path.display()),
        });
    };
    Connectome::new(subject_id, atlas.clone(), row.clone())
}
