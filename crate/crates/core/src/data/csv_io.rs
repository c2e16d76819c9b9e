use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;

use super::{Channel, MultiChannelSeries, NUM_CHANNELS};
use crate::error::{Error, Result};

/// A row skipped during ingestion.
#[derive(Debug, Clone, PartialEq)]
pub struct DroppedRow {
    /// 1-based line number in the source file.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestReport {
    pub rows_read: usize,
    pub dropped: Vec<DroppedRow>,
}

fn file_err(path: &Path, message: impl Into<String>) -> Error {
    Error::File {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Reads a `date,open,close,high,low,nav` file. Header names are matched
/// case-insensitively and extra columns are ignored. Rows with a missing or
/// unparseable field, or a repeated date, are dropped and reported.
pub fn load_stock_csv(path: impl AsRef<Path>) -> Result<(MultiChannelSeries, IngestReport)> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| file_err(path, e.to_string()))?;

    let headers = reader
        .headers()
        .map_err(|e| file_err(path, e.to_string()))?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim_start_matches('\u{feff}').eq_ignore_ascii_case(name))
            .ok_or_else(|| file_err(path, format!("missing column '{name}'")))
    };
    let date_col = find("date")?;
    let mut value_cols = [0usize; NUM_CHANNELS];
    for c in Channel::ALL {
        value_cols[c.index()] = find(c.name())?;
    }

    let mut report = IngestReport::default();
    let mut rows: BTreeMap<NaiveDate, [f64; NUM_CHANNELS]> = BTreeMap::new();
    for record in reader.records() {
        report.rows_read += 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                report.dropped.push(DroppedRow {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let line = record.position().map_or(0, |p| p.line());
        match parse_row(&record, date_col, &value_cols) {
            Ok((date, values)) => {
                if rows.contains_key(&date) {
                    report.dropped.push(DroppedRow {
                        line,
                        reason: format!("duplicate date {date}"),
                    });
                } else {
                    rows.insert(date, values);
                }
            }
            Err(reason) => report.dropped.push(DroppedRow { line, reason }),
        }
    }

    if rows.len() < 2 {
        return Err(Error::Data(format!(
            "{}: only {} usable rows, need at least 2",
            path.display(),
            rows.len()
        )));
    }

    let symbol = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut series = MultiChannelSeries {
        symbol,
        dates: Vec::with_capacity(rows.len()),
        channels: Default::default(),
    };
    for (date, values) in rows {
        series.dates.push(date);
        for (ch, v) in series.channels.iter_mut().zip(values) {
            ch.push(v);
        }
    }
    Ok((series, report))
}

fn parse_row(
    record: &csv::StringRecord,
    date_col: usize,
    value_cols: &[usize; NUM_CHANNELS],
) -> std::result::Result<(NaiveDate, [f64; NUM_CHANNELS]), String> {
    let field = |i: usize| -> std::result::Result<&str, String> {
        match record.get(i) {
            Some(s) if !s.is_empty() => Ok(s),
            _ => Err(format!("missing field in column {}", i + 1)),
        }
    };
    let raw_date = field(date_col)?;
    let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d")
        .map_err(|e| format!("bad date '{raw_date}': {e}"))?;
    let mut values = [0.0; NUM_CHANNELS];
    for (c, &col) in value_cols.iter().enumerate() {
        let raw = field(col)?;
        let v: f64 = raw
            .parse()
            .map_err(|_| format!("bad {} value '{raw}'", Channel::ALL[c].name()))?;
        if !v.is_finite() {
            return Err(format!("non-finite {} value '{raw}'", Channel::ALL[c].name()));
        }
        values[c] = v;
    }
    Ok((date, values))
}

/// Writes a series in the same format [`load_stock_csv`] reads. Values use
/// shortest round-trip formatting so a reload is exact.
pub fn write_stock_csv(path: impl AsRef<Path>, series: &MultiChannelSeries) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| file_err(path, e.to_string()))?;
    let csv_err = |e: csv::Error| file_err(path, e.to_string());
    w.write_record(["date", "open", "close", "high", "low", "nav"])
        .map_err(csv_err)?;
    for t in 0..series.len() {
        let mut rec = vec![series.dates[t].format("%Y-%m-%d").to_string()];
        rec.extend(series.day(t).iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
