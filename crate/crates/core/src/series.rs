//! Numeric tables, time-indexed diagnostic series and their CSV form.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Column set shared by kinetic-versus-hydro series.
pub const LIMIT_COLUMNS: [&str; 15] = [
    "t", "E_kin", "D1", "D2", "E_mac", "D_mac", "Delta", "G_norm", "eta", "eta_K", "W1_rho",
    "W1_phase", "S", "V", "lip_u",
];

/// Numeric table with named columns; every value finite.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

/// 17 significant digits, round-trips bit for bit.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Self { columns: columns.iter().map(|c| c.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Parse(format!(
                "row has {} values, table has {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        if let Some((i, v)) = row.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Parse(format!("non-finite value {v} in column `{}`", self.columns[i])));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.index_of(name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn last(&self, name: &str) -> Option<f64> {
        let k = self.index_of(name)?;
        self.rows.last().map(|r| r[k])
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|x| fmt_f64(*x)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut s = Self::new(&header);
        for rec in r.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|f| f.trim().parse::<f64>().map_err(|e| Error::Parse(format!("`{f}`: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            s.push(row)?;
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// A [`Table`] whose first column `t` increases strictly.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticSeries {
    table: Table,
}

impl DiagnosticSeries {
    /// The first column is always `t`.
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        let table = Table::new(columns);
        assert!(table.columns.first().map(String::as_str) == Some("t"), "first column must be t");
        Self { table }
    }

    pub fn columns(&self) -> &[String] {
        self.table.columns()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        self.table.rows()
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if let (Some(last), Some(t)) = (self.table.rows.last(), row.first()) {
            if *t <= last[0] {
                return Err(Error::Parse(format!("time must increase strictly: {} after {}", t, last[0])));
            }
        }
        self.table.push(row)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.table.index_of(name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        self.table.column(name)
    }

    pub fn last(&self, name: &str) -> Option<f64> {
        self.table.last(name)
    }

    pub fn as_table(&self) -> &Table {
        &self.table
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        self.table.write_csv(out)
    }

    pub fn to_csv_string(&self) -> String {
        self.table.to_csv_string()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.table.save(path)
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let table = Table::read_csv(input)?;
        if table.columns.first().map(String::as_str) != Some("t") {
            return Err(Error::Parse("series CSV must start with a `t` column".into()));
        }
        let mut s = Self::new(&table.columns);
        for row in table.rows {
            s.push(row)?;
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}
