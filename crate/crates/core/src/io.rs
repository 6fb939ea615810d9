//! CSV reading and writing.
//!
//! Dialect: comma separated, `.` as decimal point, `inf`, `-inf` and `nan`
//! for non-finite values. Matrices (distances, feature matrices) have no
//! header; data tables have a header row and mark missing cells by leaving
//! them empty (`nan` is read as missing too). Finite numbers are written in
//! the shortest form that parses back to the same bits.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::likelihood::DataMatrix;

pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:?}")
    }
}

pub fn parse_float(token: &str) -> Option<f64> {
    let t = token.trim();
    match t.to_ascii_lowercase().as_str() {
        "inf" | "+inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        "nan" => Some(f64::NAN),
        _ => t.parse().ok(),
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

/// Header-less numeric matrix.
pub fn parse_matrix(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (line, l) in content_lines(text) {
        let row = l
            .split(',')
            .map(|tok| {
                parse_float(tok).ok_or_else(|| Error::Parse {
                    line,
                    reason: format!("`{}` is not a number", tok.trim()),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first().map(Vec::len) {
            if row.len() != first {
                return Err(Error::Parse {
                    line,
                    reason: format!("expected {first} fields, found {}", row.len()),
                });
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_matrix(path: &Path) -> Result<Vec<Vec<f64>>> {
    parse_matrix(&fs::read_to_string(path)?)
}

pub fn write_matrix(out: &mut dyn Write, rows: &[Vec<f64>]) -> Result<()> {
    for row in rows {
        let line: Vec<String> = row.iter().map(|&v| format_float(v)).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

/// Feature matrix as rows of `0`/`1`; a matrix without columns gives one
/// empty line per row.
pub fn write_features(out: &mut dyn Write, z: &FeatureMatrix) -> Result<()> {
    for row in z.rows() {
        let line: Vec<&str> = row.iter().map(|&b| if b { "1" } else { "0" }).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn parse_features(text: &str) -> Result<FeatureMatrix> {
    let rows = parse_matrix(text)?;
    let mut out = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        out.push(
            row.iter()
                .map(|&v| match v {
                    0.0 => Ok(false),
                    1.0 => Ok(true),
                    _ => Err(Error::Parse {
                        line: i + 1,
                        reason: format!("feature entries must be 0 or 1, found {v}"),
                    }),
                })
                .collect::<Result<Vec<bool>>>()?,
        );
    }
    Ok(FeatureMatrix::from_rows(&out))
}

/// Table with a header row; returns the column names and the data with
/// its missing-cell mask.
pub fn parse_data_table(text: &str) -> Result<(Vec<String>, DataMatrix)> {
    let mut lines = content_lines(text);
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        reason: "data table is empty".into(),
    })?;
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (line, l) in lines {
        let fields: Vec<&str> = l.split(',').collect();
        if fields.len() != names.len() {
            return Err(Error::Parse {
                line,
                reason: format!("expected {} fields, found {}", names.len(), fields.len()),
            });
        }
        let row = fields
            .iter()
            .map(|tok| {
                if tok.trim().is_empty() {
                    return Ok(None);
                }
                match parse_float(tok) {
                    Some(v) if v.is_nan() => Ok(None),
                    Some(v) if v.is_finite() => Ok(Some(v)),
                    _ => Err(Error::Parse {
                        line,
                        reason: format!("`{}` is not a finite number", tok.trim()),
                    }),
                }
            })
            .collect::<Result<Vec<Option<f64>>>>()?;
        rows.push(row);
    }
    let data = if rows.is_empty() {
        DataMatrix::new(DMatrix::zeros(0, names.len()))?
    } else {
        DataMatrix::from_rows(&rows)?
    };
    Ok((names, data))
}

pub fn read_data_table(path: &Path) -> Result<(Vec<String>, DataMatrix)> {
    parse_data_table(&fs::read_to_string(path)?)
}

/// One column of a data table, by name; every cell must be present.
pub fn read_covariate(path: &Path, column: &str) -> Result<Vec<f64>> {
    let (names, data) = read_data_table(path)?;
    let j = names
        .iter()
        .position(|n| n == column)
        .ok_or_else(|| Error::Config {
            key: "distances.column".into(),
            reason: format!("no column `{column}` in {}", path.display()),
        })?;
    (0..data.n())
        .map(|i| {
            if data.is_missing(i, j) {
                Err(Error::Parse {
                    line: i + 2,
                    reason: format!("covariate `{column}` is missing"),
                })
            } else {
                Ok(data.values()[(i, j)])
            }
        })
        .collect()
}

/// Writes a data table; cells masked in `data` are left empty unless
/// `fill_missing` is set.
pub fn write_data_table(out: &mut dyn Write, names: &[String], data: &DataMatrix, fill_missing: bool) -> Result<()> {
    writeln!(out, "{}", names.join(","))?;
    for i in 0..data.n() {
        let line: Vec<String> = (0..data.m())
            .map(|j| {
                if data.is_missing(i, j) && !fill_missing {
                    String::new()
                } else {
                    format_float(data.values()[(i, j)])
                }
            })
            .collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}
