//! Delimited angle tables: one column per torus dimension, one row per
//! observation.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::AngleVector;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleUnit {
    #[default]
    Radians,
    Degrees,
}

impl AngleUnit {
    fn to_radians(self, x: f64) -> f64 {
        match self {
            Self::Radians => x,
            Self::Degrees => x.to_radians(),
        }
    }
}

/// Angles in radians, wrapped to `[0, 2π)`, with their column names.
#[derive(Clone, Debug, PartialEq)]
pub struct AngleTable {
    columns: Vec<String>,
    rows: Vec<AngleVector>,
}

fn sniff_delimiter(first_line: &str) -> u8 {
    if first_line.contains('\t') && !first_line.contains(',') {
        b'\t'
    } else {
        b','
    }
}

fn parse_error(line: u64, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

impl AngleTable {
    pub fn new(columns: Vec<String>, rows: Vec<AngleVector>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::InvalidArgument("table needs at least one column".into()));
        }
        if let Some(bad) = rows.iter().find(|r| r.dim() != columns.len()) {
            return Err(Error::DimensionMismatch { expected: columns.len(), found: bad.dim() });
        }
        Ok(Self { columns, rows })
    }

    /// Reads a table from a file. See [`AngleTable::from_reader`].
    pub fn from_path(path: impl AsRef<Path>, unit: AngleUnit, select: Option<&[String]>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_reader(file, unit, select)
    }

    /// Parses comma- or tab-separated text with a header row. `select` picks
    /// columns by name; all columns are used otherwise.
    pub fn from_reader(reader: impl Read, unit: AngleUnit, select: Option<&[String]>) -> Result<Self> {
        let mut reader = BufReader::new(reader);
        let mut first = String::new();
        reader.read_line(&mut first).map_err(|e| Error::Io(e.to_string()))?;
        if first.trim().is_empty() {
            return Err(parse_error(1, "empty file or missing header"));
        }
        let delimiter = sniff_delimiter(&first);
        let mut csv = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(std::io::Cursor::new(first).chain(reader));

        let header: Vec<String> =
            csv.headers().map_err(|e| parse_error(1, e.to_string()))?.iter().map(str::to_owned).collect();
        let picks: Vec<usize> = match select {
            None => (0..header.len()).collect(),
            Some(names) => names
                .iter()
                .map(|name| {
                    header
                        .iter()
                        .position(|h| h == name)
                        .ok_or_else(|| Error::InvalidArgument(format!("no column named {name:?}")))
                })
                .collect::<Result<_>>()?,
        };
        if picks.is_empty() {
            return Err(Error::InvalidArgument("no columns selected".into()));
        }

        let mut rows = Vec::new();
        for record in csv.records() {
            let record = record.map_err(|e| {
                parse_error(e.position().map_or(0, |p| p.line()), e.to_string())
            })?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != header.len() {
                return Err(parse_error(
                    line,
                    format!("expected {} fields, found {}", header.len(), record.len()),
                ));
            }
            let values = picks
                .iter()
                .map(|&k| {
                    let cell = &record[k];
                    match cell.parse::<f64>() {
                        Ok(v) if v.is_finite() => Ok(unit.to_radians(v)),
                        _ => Err(parse_error(line, format!("column {:?}: not a finite number: {cell:?}", header[k]))),
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(AngleVector::new(values).map_err(|e| parse_error(line, e.to_string()))?);
        }
        if rows.is_empty() {
            return Err(parse_error(2, "no data rows"));
        }
        Ok(Self { columns: picks.iter().map(|&k| header[k].clone()).collect(), rows })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[AngleVector] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<AngleVector> {
        self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    /// Writes the table as comma-separated radians. `signed` maps values to
    /// `[-π, π)`; re-ingesting either form restores the same wrapped angles.
    pub fn write_csv(&self, writer: impl Write, signed: bool) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Io(e.to_string());
        out.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            let values = if signed { row.to_signed() } else { row.as_slice().to_vec() };
            out.write_record(values.iter().map(|v| v.to_string())).map_err(io)?;
        }
        out.flush().map_err(|e| Error::Io(e.to_string()))
    }
}

/// Reads a table from `path` in the given unit, using every column.
pub fn ingest(path: impl AsRef<Path>, unit: AngleUnit) -> Result<AngleTable> {
    AngleTable::from_path(path, unit, None)
}
