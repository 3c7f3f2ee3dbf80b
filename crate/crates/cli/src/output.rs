//! CSV and JSON rendering. Floats in CSV carry 17 significant digits.

use std::io::Write;

use serde_json::Value;

use crate::{Failure, Format, OutputArgs};

pub const SCHEMA: u32 = 1;

pub enum Cell {
    F(f64),
    U(u64),
    B(bool),
    S(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(v) => format!("{v:.16e}"),
            Cell::U(v) => v.to_string(),
            Cell::B(v) => v.to_string(),
            Cell::S(v) => v.clone(),
        }
    }
}

pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn to_csv(&self) -> Result<Vec<u8>, Failure> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        let fail = |e: csv::Error| Failure::Failed(e.to_string());
        w.write_record(&self.header).map_err(fail)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(fail)?;
        }
        w.into_inner().map_err(|e| Failure::Failed(e.to_string()))
    }
}

pub fn json_bytes(v: &Value) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("serializable");
    out.push(b'\n');
    out
}

pub fn write_to(path: Option<&std::path::Path>, bytes: &[u8]) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, bytes)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
        }
    }
    Ok(())
}

/// Writes `json` or `table` according to `--format`.
pub fn emit(args: &OutputArgs, json: &Value, table: &Table) -> Result<(), Failure> {
    let bytes = match args.format {
        Format::Json => json_bytes(json),
        Format::Csv => table.to_csv()?,
    };
    write_to(args.out.as_deref(), &bytes)
}
