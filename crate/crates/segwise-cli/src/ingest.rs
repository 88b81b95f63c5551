//! CSV ingestion with index- or name-based column selection.

use crate::{CliError, CliResult};
use segwise::TimeSeries;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnSelection {
    All,
    Indices(Vec<usize>),
    Names(Vec<String>),
}

impl ColumnSelection {
    /// Parses a `--columns` value: comma-separated indices or names.
    pub fn parse(spec: Option<&str>) -> CliResult<Self> {
        let Some(spec) = spec else { return Ok(ColumnSelection::All) };
        let tokens: Vec<&str> = spec.split(',').map(str::trim).filter(|t| !t.is_empty()).collect();
        if tokens.is_empty() {
            return Err(CliError::Config("empty column selection".into()));
        }
        if tokens.iter().all(|t| t.parse::<usize>().is_ok()) {
            Ok(ColumnSelection::Indices(tokens.iter().map(|t| t.parse().unwrap()).collect()))
        } else {
            Ok(ColumnSelection::Names(tokens.iter().map(|t| t.to_string()).collect()))
        }
    }
}

/// Reads a CSV file into a series, selecting columns by index or name.
///
/// `header` forces the first row to be treated as a header (or not); when
/// `None` the row is sniffed: name-based selection implies a header, and
/// otherwise a first row whose selected cells are all numeric counts as
/// data.
pub fn ingest_csv(
    path: &Path,
    columns: &ColumnSelection,
    header: Option<bool>,
) -> CliResult<TimeSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;

    let mut records = reader.records();
    let first = match records.next() {
        Some(r) => r.map_err(|e| CliError::Data(format!("csv parse failure: {e}")))?,
        None => return Err(CliError::Data(format!("{} is empty", path.display()))),
    };

    let indices: Vec<usize>;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut line = 1usize;

    match columns {
        ColumnSelection::Names(names) => {
            if header == Some(false) {
                return Err(CliError::Config(
                    "column names need a header row, but --columns was numeric-free and \
                     header handling was disabled"
                        .into(),
                ));
            }
            let header_cells: Vec<&str> = first.iter().map(str::trim).collect();
            indices = names
                .iter()
                .map(|n| {
                    header_cells.iter().position(|c| c == n).ok_or_else(|| {
                        CliError::Config(format!("column '{n}' not found in header"))
                    })
                })
                .collect::<CliResult<_>>()?;
        }
        _ => {
            indices = match columns {
                ColumnSelection::All => (0..first.len()).collect(),
                ColumnSelection::Indices(idx) => idx.clone(),
                ColumnSelection::Names(_) => unreachable!(),
            };
            for &i in &indices {
                if i >= first.len() {
                    return Err(CliError::Config(format!(
                        "column index {i} out of range: file has {} columns",
                        first.len()
                    )));
                }
            }
            let treat_as_header = match header {
                Some(h) => h,
                None => !indices
                    .iter()
                    .all(|&i| first.get(i).is_some_and(|c| c.trim().parse::<f64>().is_ok())),
            };
            if !treat_as_header {
                rows.push(parse_row(&first, &indices, line)?);
            }
        }
    }

    for record in records {
        line += 1;
        let record = record
            .map_err(|e| CliError::Data(format!("csv parse failure at line {line}: {e}")))?;
        rows.push(parse_row(&record, &indices, line)?);
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!("{} has no data rows", path.display())));
    }
    TimeSeries::from_rows(&rows).map_err(CliError::from)
}

fn parse_row(record: &csv::StringRecord, indices: &[usize], line: usize) -> CliResult<Vec<f64>> {
    let mut row = Vec::with_capacity(indices.len());
    for &i in indices {
        let cell = record.get(i).ok_or_else(|| {
            CliError::Data(format!("line {line}: missing column {i}"))
        })?;
        let value: f64 = cell.trim().parse().map_err(|_| {
            CliError::Data(format!("line {line}: non-numeric cell '{}'", cell.trim()))
        })?;
        if !value.is_finite() {
            return Err(CliError::Data(format!(
                "line {line}: non-finite value '{}'",
                cell.trim()
            )));
        }
        row.push(value);
    }
    Ok(row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> std::path::PathBuf {
        let mut path = std::env::temp_dir();
        path.push(format!("segwise-ingest-{}-{}.csv", std::process::id(), content.len()));
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    #[test]
    fn plain_single_column() {
        let path = write_tmp("1\n2\n3\n");
        let series = ingest_csv(&path, &ColumnSelection::All, None).unwrap();
        assert_eq!(series.values(), &[1.0, 2.0, 3.0]);
        assert_eq!(series.dim(), 1);
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn named_column_skips_header() {
        let path = write_tmp("time,temp\n0,10.5\n1,11.25\n");
        let sel = ColumnSelection::parse(Some("temp")).unwrap();
        let series = ingest_csv(&path, &sel, None).unwrap();
        assert_eq!(series.values(), &[10.5, 11.25]);
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn sniffed_header_with_index_selection() {
        let path = write_tmp("a,b\n1,2\n3,4\n");
        let sel = ColumnSelection::parse(Some("1")).unwrap();
        let series = ingest_csv(&path, &sel, None).unwrap();
        assert_eq!(series.values(), &[2.0, 4.0]);
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn nan_cell_rejected_with_line_number() {
        let path = write_tmp("1\nNaN\n3\n");
        let err = ingest_csv(&path, &ColumnSelection::All, None).unwrap_err();
        match err {
            CliError::Data(msg) => assert!(msg.contains("line 2"), "{msg}"),
            other => panic!("expected data error, got {other:?}"),
        }
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn non_numeric_cell_rejected() {
        let path = write_tmp("x\n1\noops\n");
        let err = ingest_csv(&path, &ColumnSelection::All, None).unwrap_err();
        match err {
            CliError::Data(msg) => assert!(msg.contains("line 3"), "{msg}"),
            other => panic!("expected data error, got {other:?}"),
        }
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn missing_file_is_data_error() {
        let err = ingest_csv(
            std::path::Path::new("/nonexistent/never.csv"),
            &ColumnSelection::All,
            None,
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn unknown_named_column_is_config_error() {
        let path = write_tmp("a,b\n1,2\n");
        let sel = ColumnSelection::parse(Some("zzz")).unwrap();
        let err = ingest_csv(&path, &sel, None).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        std::fs::remove_file(path).ok();
    }
}
