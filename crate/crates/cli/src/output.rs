use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::ValueEnum;
use serde::Serialize;

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// A CSV record type with its documented column list.
pub trait Row: Serialize {
    const HEADER: &'static [&'static str];
}

#[derive(Debug, Clone)]
pub struct Sink {
    pub path: Option<PathBuf>,
    pub format: Format,
}

impl Sink {
    pub fn emit<R: Row>(&self, rows: &[R]) -> Result<(), Failure> {
        let io_err = |e: io::Error| Failure::Usage(format!("cannot write output: {e}"));
        let out: Box<dyn Write> = match &self.path {
            Some(p) => Box::new(File::create(p).map_err(io_err)?),
            None => Box::new(io::stdout().lock()),
        };
        match self.format {
            Format::Csv => {
                let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
                let csv_err = |e: csv::Error| Failure::Usage(format!("cannot write CSV: {e}"));
                w.write_record(R::HEADER).map_err(csv_err)?;
                for r in rows {
                    w.serialize(r).map_err(csv_err)?;
                }
                w.flush().map_err(io_err)
            }
            Format::Json => {
                let mut out = out;
                serde_json::to_writer_pretty(&mut out, rows)
                    .map_err(|e| Failure::Usage(format!("cannot write JSON: {e}")))?;
                writeln!(out).map_err(io_err)
            }
        }
    }
}

/// One line per experiment on stderr; returns whether it passed.
pub fn summary(experiment: &str, passed: bool, detail: &str) -> bool {
    eprintln!("{experiment}: {} {detail}", if passed { "PASS" } else { "FAIL" });
    passed
}
