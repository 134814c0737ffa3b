//! Minimal RFC-4180 CSV writer with deterministic float formatting.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use thinshell::Result;

pub struct CsvWriter {
    out: BufWriter<File>,
}

fn quote(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Shortest-roundtrip float formatting keeps identical configs producing
/// byte-identical files.
fn fmt(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        let mut buf = ryu_like(v);
        if !buf.contains('.') && !buf.contains('e') && !buf.contains("inf") && !buf.contains("nan")
        {
            buf.push_str(".0");
        }
        buf
    }
}

fn ryu_like(v: f64) -> String {
    // `{:?}` on f64 is the shortest representation that round-trips
    format!("{v:?}")
}

impl CsvWriter {
    pub fn new(path: &Path) -> Result<Self> {
        Ok(CsvWriter {
            out: BufWriter::new(File::create(path)?),
        })
    }

    pub fn header(&mut self, names: &[&str]) -> Result<()> {
        let line: Vec<String> = names.iter().map(|n| quote(n)).collect();
        writeln!(self.out, "{}", line.join(","))?;
        Ok(())
    }

    pub fn row(&mut self, values: &[f64]) -> Result<()> {
        let line: Vec<String> = values.iter().map(|v| fmt(*v)).collect();
        writeln!(self.out, "{}", line.join(","))?;
        Ok(())
    }

    pub fn row_mixed(&mut self, strings: &[String], values: &[f64]) -> Result<()> {
        let mut line: Vec<String> = strings.iter().map(|s| quote(s)).collect();
        line.extend(values.iter().map(|v| fmt(*v)));
        writeln!(self.out, "{}", line.join(","))?;
        Ok(())
    }
}
