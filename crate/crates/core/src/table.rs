//! Named-column sample tables and their CSV form.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Column-major table of draws with unique column names.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleTable {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl SampleTable {
    pub fn new(names: Vec<String>) -> Result<Self> {
        for (k, n) in names.iter().enumerate() {
            if names[..k].contains(n) {
                return Err(Error::InvalidArgument(format!("duplicate column '{n}'")));
            }
        }
        let columns = vec![Vec::new(); names.len()];
        Ok(SampleTable { names, columns })
    }

    pub fn from_columns(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        let mut t = Self::new(names)?;
        if columns.len() != t.names.len() {
            return Err(Error::InvalidArgument("column count mismatch".into()));
        }
        if columns.windows(2).any(|w| w[0].len() != w[1].len()) {
            return Err(Error::InvalidArgument("ragged columns".into()));
        }
        t.columns = columns;
        Ok(t)
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.columns.len());
        for (c, &v) in self.columns.iter_mut().zip(row) {
            c.push(v);
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|k| self.columns[k].as_slice())
    }

    pub fn require(&self, name: &str) -> Result<&[f64]> {
        self.column(name)
            .ok_or_else(|| Error::InvalidArgument(format!("missing column '{name}'")))
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// Row-major view of the named columns.
    pub fn rows_of(&self, names: &[String]) -> Result<Vec<Vec<f64>>> {
        let cols = names
            .iter()
            .map(|n| self.require(n))
            .collect::<Result<Vec<_>>>()?;
        Ok((0..self.n_rows())
            .map(|r| cols.iter().map(|c| c[r]).collect())
            .collect())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.names)?;
        let mut buf = Vec::with_capacity(self.names.len());
        for r in 0..self.n_rows() {
            buf.clear();
            buf.extend(self.columns.iter().map(|c| c[r].to_string()));
            out.write_record(&buf)?;
        }
        out.flush().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut t = Self::new(names)?;
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    s.parse::<f64>().map_err(|_| {
                        Error::Csv(format!("row {}, column '{}': cannot parse '{s}'", line + 1, t.names[k]))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            t.push_row(&row);
        }
        Ok(t)
    }

    pub fn read_csv_file(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}
