//! Typed columnar tables with a lossless CSV form.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableKind {
    Vertex,
    Edge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Float,
    Int,
    Str,
}

/// One column; `None` is a missing value, serialized as an empty field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "values", rename_all = "lowercase")]
pub enum Column {
    Float(Vec<Option<f64>>),
    Int(Vec<Option<i64>>),
    Str(Vec<Option<String>>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Float(v) => v.len(),
            Column::Int(v) => v.len(),
            Column::Str(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> ColumnKind {
        match self {
            Column::Float(_) => ColumnKind::Float,
            Column::Int(_) => ColumnKind::Int,
            Column::Str(_) => ColumnKind::Str,
        }
    }

    fn empty(kind: ColumnKind) -> Column {
        match kind {
            ColumnKind::Float => Column::Float(Vec::new()),
            ColumnKind::Int => Column::Int(Vec::new()),
            ColumnKind::Str => Column::Str(Vec::new()),
        }
    }

    /// CSV text of row `i`; floats use the shortest round-trip form.
    pub fn field(&self, i: usize) -> String {
        match self {
            Column::Float(v) => v[i].map(|x| format!("{x:?}")).unwrap_or_default(),
            Column::Int(v) => v[i].map(|x| x.to_string()).unwrap_or_default(),
            Column::Str(v) => v[i].clone().unwrap_or_default(),
        }
    }

    fn push_field(&mut self, text: &str) -> Result<()> {
        let missing = text.is_empty();
        match self {
            Column::Float(v) => v.push(if missing {
                None
            } else {
                Some(text.parse().map_err(|_| Error::Table(format!("not a float: {text:?}")))?)
            }),
            Column::Int(v) => v.push(if missing {
                None
            } else {
                Some(text.parse().map_err(|_| Error::Table(format!("not an integer: {text:?}")))?)
            }),
            Column::Str(v) => v.push((!missing).then(|| text.to_string())),
        }
        Ok(())
    }

    fn select(&self, rows: &[usize]) -> Column {
        match self {
            Column::Float(v) => Column::Float(rows.iter().map(|&r| v[r]).collect()),
            Column::Int(v) => Column::Int(rows.iter().map(|&r| v[r]).collect()),
            Column::Str(v) => Column::Str(rows.iter().map(|&r| v[r].clone()).collect()),
        }
    }
}

/// Named columns of equal length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    pub kind: TableKind,
    names: Vec<String>,
    columns: Vec<Column>,
}

impl FeatureTable {
    pub fn new(kind: TableKind) -> Self {
        Self {
            kind,
            names: Vec::new(),
            columns: Vec::new(),
        }
    }

    /// Appends a column; its length must match the existing rows.
    pub fn push(&mut self, name: impl Into<String>, column: Column) -> Result<()> {
        let name = name.into();
        if self.names.contains(&name) {
            return Err(Error::Table(format!("duplicate column {name:?}")));
        }
        if let Some(first) = self.columns.first() {
            if first.len() != column.len() {
                return Err(Error::Table(format!(
                    "column {name:?} has {} rows, table has {}",
                    column.len(),
                    first.len()
                )));
            }
        }
        self.names.push(name);
        self.columns.push(column);
        Ok(())
    }

    pub fn row_count(&self) -> usize {
        self.columns.first().map_or(0, Column::len)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn columns(&self) -> impl Iterator<Item = (&str, &Column)> {
        self.names.iter().map(String::as_str).zip(&self.columns)
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.names.iter().position(|n| n == name).map(|i| &self.columns[i])
    }

    pub fn floats(&self, name: &str) -> Option<&[Option<f64>]> {
        match self.column(name)? {
            Column::Float(v) => Some(v),
            _ => None,
        }
    }

    pub fn ints(&self, name: &str) -> Option<&[Option<i64>]> {
        match self.column(name)? {
            Column::Int(v) => Some(v),
            _ => None,
        }
    }

    pub fn strings(&self, name: &str) -> Option<&[Option<String>]> {
        match self.column(name)? {
            Column::Str(v) => Some(v),
            _ => None,
        }
    }

    /// The rows at `rows`, in that order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureTable {
        FeatureTable {
            kind: self.kind,
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        w.write_record(&self.names)?;
        for i in 0..self.row_count() {
            w.write_record(self.columns.iter().map(|c| c.field(i)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("utf-8 fields")
    }

    /// Parses a CSV table. Column types come from `schema` when given, else
    /// from the standard feature columns of `kind`, else are inferred: integer if every field parses as an integer, float if
    /// every field parses as a float, string otherwise.
    pub fn read_csv<R: Read>(kind: TableKind, reader: R, schema: Option<&[ColumnKind]>) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let names: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut raw: Vec<Vec<String>> = vec![Vec::new(); names.len()];
        for record in r.records() {
            let record = record?;
            if record.len() != names.len() {
                return Err(Error::Table(format!(
                    "row has {} fields, header has {}",
                    record.len(),
                    names.len()
                )));
            }
            for (col, field) in raw.iter_mut().zip(record.iter()) {
                col.push(field.to_string());
            }
        }
        if let Some(s) = schema {
            if s.len() != names.len() {
                return Err(Error::Table(format!(
                    "schema has {} columns, file has {}",
                    s.len(),
                    names.len()
                )));
            }
        }
        let mut table = FeatureTable::new(kind);
        for (i, (name, fields)) in names.into_iter().zip(raw).enumerate() {
            let column_kind = match schema {
                Some(s) => s[i],
                None => super::standard_column_kind(kind, &name).unwrap_or_else(|| infer_kind(&fields)),
            };
            let mut column = Column::empty(column_kind);
            for f in &fields {
                column.push_field(f)?;
            }
            table.push(name, column)?;
        }
        Ok(table)
    }
}

fn infer_kind(fields: &[String]) -> ColumnKind {
    let present = || fields.iter().filter(|f| !f.is_empty());
    if present().all(|f| f.parse::<i64>().is_ok()) && present().next().is_some() {
        ColumnKind::Int
    } else if present().all(|f| f.parse::<f64>().is_ok()) {
        ColumnKind::Float
    } else {
        ColumnKind::Str
    }
}
