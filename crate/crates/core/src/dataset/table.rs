use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Categorical,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Categorical(Vec<Option<String>>),
    Continuous(Vec<Option<f64>>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Categorical(v) => v.len(),
            ColumnData::Continuous(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> ColumnKind {
        match self {
            ColumnData::Categorical(_) => ColumnKind::Categorical,
            ColumnData::Continuous(_) => ColumnKind::Continuous,
        }
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            ColumnData::Categorical(v) => v[row].is_none(),
            ColumnData::Continuous(v) => v[row].is_none(),
        }
    }

    fn select(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Categorical(v) => {
                ColumnData::Categorical(rows.iter().map(|&i| v[i].clone()).collect())
            }
            ColumnData::Continuous(v) => {
                ColumnData::Continuous(rows.iter().map(|&i| v[i]).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
}

impl Column {
    pub fn categorical(name: impl Into<String>, values: Vec<Option<String>>) -> Self {
        Column {
            name: name.into(),
            data: ColumnData::Categorical(values),
        }
    }

    pub fn continuous(name: impl Into<String>, values: Vec<Option<f64>>) -> Self {
        Column {
            name: name.into(),
            data: ColumnData::Continuous(values),
        }
    }

    pub fn kind(&self) -> ColumnKind {
        self.data.kind()
    }
}

/// Column-major table of raw values. Missing cells are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    columns: Vec<Column>,
    n_rows: usize,
}

impl RawTable {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        let n_rows = columns.first().map_or(0, |c| c.data.len());
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Config(format!("duplicate column name '{}'", c.name)));
            }
            if c.data.len() != n_rows {
                return Err(Error::Argument(format!(
                    "column '{}' has {} rows, expected {n_rows}",
                    c.name,
                    c.data.len()
                )));
            }
        }
        Ok(RawTable { columns, n_rows })
    }

    /// A table with the given columns and no rows.
    pub fn empty(specs: &[ColumnSpec]) -> Result<Self> {
        RawTable::new(
            specs
                .iter()
                .map(|s| match s.kind {
                    ColumnKind::Categorical => Column::categorical(&s.name, Vec::new()),
                    ColumnKind::Continuous => Column::continuous(&s.name, Vec::new()),
                })
                .collect(),
        )
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub(crate) fn columns_mut(&mut self) -> &mut Vec<Column> {
        &mut self.columns
    }

    /// Keeps only the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> RawTable {
        RawTable {
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    data: c.data.select(rows),
                })
                .collect(),
            n_rows: rows.len(),
        }
    }

    pub fn has_missing(&self) -> bool {
        (0..self.n_rows).any(|r| self.columns.iter().any(|c| c.data.is_missing(r)))
    }

    /// Appends the rows of `other`, which must have identical column names and kinds.
    pub fn append(&mut self, other: RawTable) -> Result<()> {
        if self.column_names() != other.column_names() {
            return Err(Error::Argument("cannot append tables with different columns".into()));
        }
        for (mine, theirs) in self.columns.iter_mut().zip(other.columns) {
            match (&mut mine.data, theirs.data) {
                (ColumnData::Categorical(a), ColumnData::Categorical(b)) => a.extend(b),
                (ColumnData::Continuous(a), ColumnData::Continuous(b)) => a.extend(b),
                _ => {
                    return Err(Error::Argument(format!(
                        "column '{}' changes kind between tables",
                        mine.name
                    )))
                }
            }
        }
        self.n_rows += other.n_rows;
        Ok(())
    }
}

fn default_true() -> bool {
    true
}

fn default_delimiter() -> char {
    ','
}

fn default_missing() -> Vec<String> {
    vec!["?".to_string(), String::new()]
}

/// How to read a delimited file into a [`RawTable`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub columns: Vec<ColumnSpec>,
    /// When false, `columns` are taken positionally.
    #[serde(default = "default_true")]
    pub has_header: bool,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    /// Lines starting with this character are skipped.
    #[serde(default)]
    pub comment_prefix: Option<char>,
    #[serde(default = "default_missing")]
    pub missing_markers: Vec<String>,
    #[serde(default = "default_true")]
    pub trim: bool,
    /// With a header, file columns absent from `columns` are skipped instead of rejected.
    #[serde(default)]
    pub ignore_extra_columns: bool,
}

impl CsvSchema {
    pub fn new(columns: Vec<ColumnSpec>) -> Self {
        CsvSchema {
            columns,
            has_header: true,
            delimiter: ',',
            comment_prefix: None,
            missing_markers: default_missing(),
            trim: true,
            ignore_extra_columns: false,
        }
    }

    fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Config(format!("column '{}' declared twice", c.name)));
            }
        }
        if !self.delimiter.is_ascii() {
            return Err(Error::Config("delimiter must be an ASCII character".into()));
        }
        if self.comment_prefix.is_some_and(|c| !c.is_ascii()) {
            return Err(Error::Config("comment prefix must be an ASCII character".into()));
        }
        Ok(())
    }
}

enum Builder {
    Categorical(Vec<Option<String>>),
    Continuous(Vec<Option<f64>>),
}

/// Reads one delimited file according to `schema`.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<RawTable> {
    schema.validate()?;
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::open(path).map_err(io_err)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(schema.delimiter as u8)
        .comment(schema.comment_prefix.map(|c| c as u8))
        .trim(if schema.trim {
            csv::Trim::All
        } else {
            csv::Trim::None
        })
        .from_reader(std::io::BufReader::new(file));

    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut records = reader.records();
    // position in the file row of each schema column
    let (source_index, expected_width): (Vec<usize>, Option<usize>) = if schema.has_header {
        let header = match records.next() {
            Some(r) => r.map_err(|e| csv_error(path, e))?,
            None => return Err(parse_err(1, "missing header row".into())),
        };
        let names: Vec<&str> = header.iter().collect();
        let mut index = Vec::with_capacity(schema.columns.len());
        for spec in &schema.columns {
            // duplicated header names resolve to their first occurrence
            match names.iter().position(|n| *n == spec.name) {
                Some(i) => index.push(i),
                None => {
                    return Err(Error::Config(format!(
                        "schema column '{}' not found in header of {}",
                        spec.name,
                        path.display()
                    )))
                }
            }
        }
        if !schema.ignore_extra_columns {
            if let Some(extra) = names
                .iter()
                .find(|n| !schema.columns.iter().any(|c| c.name == **n))
            {
                return Err(Error::Config(format!(
                    "column '{extra}' in {} is not declared in the schema",
                    path.display()
                )));
            }
        }
        (index, Some(names.len()))
    } else {
        ((0..schema.columns.len()).collect(), Some(schema.columns.len()))
    };

    let mut builders: Vec<Builder> = schema
        .columns
        .iter()
        .map(|c| match c.kind {
            ColumnKind::Categorical => Builder::Categorical(Vec::new()),
            ColumnKind::Continuous => Builder::Continuous(Vec::new()),
        })
        .collect();

    for record in records {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        // blank lines come through as a single empty field
        if record.len() == 1 && record.get(0).is_some_and(str::is_empty) {
            continue;
        }
        if let Some(width) = expected_width {
            if record.len() != width {
                return Err(parse_err(
                    line,
                    format!("expected {width} fields, found {}", record.len()),
                ));
            }
        }
        for ((builder, &src), spec) in builders.iter_mut().zip(&source_index).zip(&schema.columns)
        {
            let raw = &record[src];
            let missing = schema.missing_markers.iter().any(|m| m == raw);
            match builder {
                Builder::Categorical(v) => v.push((!missing).then(|| raw.to_string())),
                Builder::Continuous(v) => {
                    if missing {
                        v.push(None);
                    } else {
                        let x: f64 = raw.parse().map_err(|_| {
                            parse_err(
                                line,
                                format!("column '{}': '{raw}' is not a number", spec.name),
                            )
                        })?;
                        v.push(Some(x));
                    }
                }
            }
        }
    }

    RawTable::new(
        builders
            .into_iter()
            .zip(&schema.columns)
            .map(|(b, spec)| Column {
                name: spec.name.clone(),
                data: match b {
                    Builder::Categorical(v) => ColumnData::Categorical(v),
                    Builder::Continuous(v) => ColumnData::Continuous(v),
                },
            })
            .collect(),
    )
}

/// Reads several files with the same schema and concatenates their rows.
pub fn load_csv_files(paths: &[PathBuf], schema: &CsvSchema) -> Result<RawTable> {
    let mut table = RawTable::empty(&schema.columns)?;
    for p in paths {
        table.append(load_csv(p, schema)?)?;
    }
    Ok(table)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}
