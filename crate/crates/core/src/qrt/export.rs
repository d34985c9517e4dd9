use std::io::Write;

use super::runtime::TraceRecord;
use crate::error::{Error, Result};
use crate::ratmath::rational::to_f64;
use crate::ratmath::{format_rational, Rational};

/// Column-oriented CSV table for traces; callers may append extra columns.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

fn push_exact(
    header: &mut Vec<String>,
    row: &mut Vec<String>,
    name: String,
    v: &Rational,
    first: bool,
) {
    if first {
        header.push(name.clone());
        header.push(format!("{name}_f"));
    }
    row.push(format_rational(v));
    row.push(to_f64(v).to_string());
}

impl TraceTable {
    pub fn from_records(records: &[TraceRecord]) -> Self {
        let mut header = Vec::new();
        let mut rows = Vec::with_capacity(records.len());
        for (idx, rec) in records.iter().enumerate() {
            let first = idx == 0;
            if first {
                header.push("t".to_string());
            }
            let mut row = vec![rec.t.to_string()];
            for (name, vals) in [
                ("y", &rec.y),
                ("u_exact", &rec.u_exact),
                ("u_hat", &rec.u_hat),
            ] {
                for (i, v) in vals.iter().enumerate() {
                    push_exact(&mut header, &mut row, format!("{name}[{i}]"), v, first);
                }
            }
            push_exact(
                &mut header,
                &mut row,
                "residual".into(),
                &rec.residual_norm,
                first,
            );
            if first {
                header.push("zbar_min".into());
                header.push("zbar_max".into());
            }
            row.push(rec.z_bar_range.0.to_string());
            row.push(rec.z_bar_range.1.to_string());
            rows.push(row);
        }
        Self { header, rows }
    }

    /// Appends a column; `values` must have one entry per row.
    pub fn push_column(&mut self, name: &str, values: Vec<String>) -> Result<()> {
        if values.len() != self.rows.len() {
            return crate::error::dim_err(format!(
                "column {name} has {} values for {} rows",
                values.len(),
                self.rows.len()
            ));
        }
        self.header.push(name.to_string());
        for (row, v) in self.rows.iter_mut().zip(values) {
            row.push(v);
        }
        Ok(())
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Parse(format!("csv: {e}"));
        out.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            out.write_record(row).map_err(io)?;
        }
        out.flush().map_err(|e| Error::Parse(format!("csv: {e}")))?;
        Ok(())
    }
}

pub fn write_trace_csv<W: Write>(w: W, records: &[TraceRecord]) -> Result<()> {
    TraceTable::from_records(records).write(w)
}
