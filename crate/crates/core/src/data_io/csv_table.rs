//! Rectangular numeric CSV tables.

use std::path::Path;

use ndarray::{Array1, Array2};

use crate::dataset::Dataset;
use crate::error::{Result, SrcekError};

#[derive(Debug, Clone, PartialEq)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub header: bool,
    /// Header name or 1-based column number of the response; last column
    /// when unset.
    pub response_column: Option<String>,
    /// Header name or 1-based column number of optional response weights.
    pub weight_column: Option<String>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            delimiter: b',',
            header: true,
            response_column: None,
            weight_column: None,
        }
    }
}

fn resolve_column(
    spec: &str,
    header: Option<&[String]>,
    width: usize,
    path: &str,
) -> Result<usize> {
    if let Some(names) = header {
        if let Some(i) = names.iter().position(|h| h == spec) {
            return Ok(i);
        }
    }
    match spec.parse::<usize>() {
        Ok(i) if i >= 1 && i <= width => Ok(i - 1),
        _ => Err(SrcekError::Format {
            path: path.to_string(),
            message: format!("column `{spec}` not found"),
        }),
    }
}

/// Loads `X` (every non-response, non-weight column in file order) and `y`.
/// Blank lines are ignored; errors carry 1-based file row and column.
pub fn load_dataset_csv(path: &Path, opts: &CsvOptions) -> Result<Dataset> {
    let name = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(&name, e))?;

    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<(usize, csv::StringRecord)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(&name, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if opts.header && header.is_none() {
            header = Some(rec.iter().map(str::to_string).collect());
        } else {
            rows.push((line, rec));
        }
    }
    let width = header
        .as_ref()
        .map(Vec::len)
        .or_else(|| rows.first().map(|(_, r)| r.len()))
        .ok_or_else(|| SrcekError::Format {
            path: name.clone(),
            message: "file contains no data".into(),
        })?;
    let response = match &opts.response_column {
        Some(s) => resolve_column(s, header.as_deref(), width, &name)?,
        None => width - 1,
    };
    let weight = opts
        .weight_column
        .as_ref()
        .map(|s| resolve_column(s, header.as_deref(), width, &name))
        .transpose()?;
    if weight == Some(response) {
        return Err(SrcekError::Format {
            path: name,
            message: "response and weight columns coincide".into(),
        });
    }
    let predictors: Vec<usize> = (0..width)
        .filter(|&c| c != response && Some(c) != weight)
        .collect();
    if predictors.is_empty() {
        return Err(SrcekError::Format {
            path: name,
            message: "no predictor columns".into(),
        });
    }

    let m = rows.len();
    let mut x = Array2::<f64>::zeros((m, predictors.len()));
    let mut y = Array1::<f64>::zeros(m);
    let mut gamma = Array1::<f64>::ones(m);
    for (i, (line, rec)) in rows.iter().enumerate() {
        if rec.len() != width {
            return Err(SrcekError::Parse {
                path: name,
                row: i + 1,
                column: rec.len().min(width) + 1,
                message: format!("expected {width} fields, found {} (file line {line})", rec.len()),
            });
        }
        let cell = |c: usize| -> Result<f64> {
            let s = &rec[c];
            s.parse::<f64>().map_err(|_| SrcekError::Parse {
                path: name.clone(),
                row: i + 1,
                column: c + 1,
                message: format!("`{s}` is not a number (file line {line})"),
            })
        };
        for (j, &c) in predictors.iter().enumerate() {
            x[[i, j]] = cell(c)?;
        }
        y[i] = cell(response)?;
        if let Some(c) = weight {
            gamma[i] = cell(c)?;
        }
    }
    let data = Dataset::with_gamma(x, y, gamma).map_err(|e| SrcekError::Format {
        path: name.clone(),
        message: e.to_string(),
    })?;
    match header {
        Some(h) => data.with_channel_labels(predictors.iter().map(|&c| h[c].clone()).collect()),
        None => Ok(data),
    }
}

fn csv_error(path: &str, e: csv::Error) -> SrcekError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => SrcekError::io(path, io),
        other => SrcekError::Format {
            path: path.to_string(),
            message: format!("{other:?}"),
        },
    }
}

/// Writes the predictors followed by a `y` column, plus a `gamma` column
/// when any response weight differs from one.
pub fn write_dataset_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(&path.display().to_string(), e))?;
    let with_gamma = data.gamma.iter().any(|&g| g != 1.0);
    let mut head: Vec<String> = match &data.channel_labels {
        Some(l) => l.clone(),
        None => (1..=data.n_channels()).map(|j| format!("x{j}")).collect(),
    };
    head.push("y".into());
    if with_gamma {
        head.push("gamma".into());
    }
    let werr = |e: csv::Error| csv_error(&path.display().to_string(), e);
    w.write_record(&head).map_err(werr)?;
    for i in 0..data.n_objects() {
        let mut row: Vec<String> = data.x.row(i).iter().map(|v| v.to_string()).collect();
        row.push(data.y[i].to_string());
        if with_gamma {
            row.push(data.gamma[i].to_string());
        }
        w.write_record(&row).map_err(werr)?;
    }
    w.flush().map_err(|e| SrcekError::io(path, e))
}
