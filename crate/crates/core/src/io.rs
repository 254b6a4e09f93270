//! CSV datasets (`time,status,x1,...,xp`), JSON reports and key-value config files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::data::SurvivalDataset;
use crate::error::{Error, Result};

/// A dataset as read from disk, before standardization.
#[derive(Debug, Clone)]
pub struct CsvDataset {
    pub dataset: SurvivalDataset,
    pub covariate_names: Vec<String>,
}

fn parse_err(path: &Path, row: usize, column: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        row,
        column: column.to_string(),
        message: message.into(),
    }
}

/// Reads a CSV dataset without touching covariate scales. Rows are numbered
/// from 1 after the header.
pub fn read_dataset_csv(path: impl AsRef<Path>) -> Result<CsvDataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.len() < 3
        || !header[0].eq_ignore_ascii_case("time")
        || !header[1].eq_ignore_ascii_case("status")
    {
        return Err(parse_err(
            path,
            0,
            "header",
            "expected a header row `time,status,x1,...,xp`",
        ));
    }
    let p = header.len() - 2;
    let mut times = Vec::new();
    let mut status = Vec::new();
    let mut values = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let row = k + 1;
        let record = record.map_err(|e| parse_err(path, row, "", e.to_string()))?;
        if record.len() != header.len() {
            return Err(parse_err(
                path,
                row,
                "",
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        let number = |c: usize| -> Result<f64> {
            let cell = &record[c];
            cell.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(path, row, &header[c], format!("{cell:?} is not a finite number")))
        };
        let t = number(0)?;
        if t <= 0.0 {
            return Err(parse_err(path, row, &header[0], format!("time {t} must be positive")));
        }
        let s = match record[1].parse::<f64>() {
            Ok(v) if v == 0.0 => 0u8,
            Ok(v) if v == 1.0 => 1u8,
            _ => {
                return Err(parse_err(
                    path,
                    row,
                    &header[1],
                    format!("status {:?} must be 0 or 1", &record[1]),
                ))
            }
        };
        times.push(t);
        status.push(s);
        for c in 2..header.len() {
            values.push(number(c)?);
        }
    }
    if times.is_empty() {
        return Err(parse_err(path, 1, "", "no data rows"));
    }
    let n = times.len();
    let design = DMatrix::from_row_slice(n, p, &values);
    let dataset = SurvivalDataset::new(design, times, status)
        .map_err(|e| parse_err(path, 0, "", e.to_string()))?;
    log::info!("read {}: n = {n}, p = {p}", path.display());
    Ok(CsvDataset {
        dataset,
        covariate_names: header[2..].to_vec(),
    })
}

/// Reads a CSV dataset and standardizes every covariate.
pub fn load_dataset_csv(path: impl AsRef<Path>) -> Result<SurvivalDataset> {
    Ok(read_dataset_csv(path)?.dataset.standardized().0)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => parse_err(path, 0, "", format!("{other:?}")),
    }
}

/// Writes `time,status,x1,...,xp` with shortest round-trip float formatting.
pub fn write_dataset_csv(data: &SurvivalDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header = vec!["time".to_string(), "status".to_string()];
    header.extend((1..=data.p()).map(|j| format!("x{j}")));
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    let status = data.status();
    let design = data.design();
    for i in 0..data.n() {
        let mut rec = Vec::with_capacity(data.p() + 2);
        rec.push(data.times()[i].to_string());
        rec.push(status[i].to_string());
        rec.extend((0..data.p()).map(|j| design[(i, j)].to_string()));
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Canonical JSON text of a report (pretty-printed, trailing newline).
pub fn report_json<T: Serialize>(report: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

/// Writes [`report_json`] to `path`.
pub fn emit_report_json<T: Serialize>(report: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, report_json(report)?).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses `key = value` lines; `#` starts a comment. Keys are lower-cased and
/// dashes become underscores.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", k + 1)))?;
        let key = key.trim().to_ascii_lowercase().replace('-', "_");
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", k + 1)));
        }
        out.insert(key, value.trim().to_string());
    }
    Ok(out)
}

pub fn read_config_file(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_text(&text)
}
