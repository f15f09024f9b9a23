//! JSON and CSV writers. Both carry the tool version, the full run
//! configuration, the seed and a provenance label for every quantity.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};

use serde::Serialize;
use serde_json::Value;

use crate::config::{Format, RunConfig};
use crate::Failure;

pub const TOOL: &str = "mnac";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const SCHEMA_VERSION: u32 = 1;

/// Rows for CSV output. Floats are written with `Display`, which is
/// locale-independent and round-trips.
#[derive(Debug, Default)]
pub struct Table {
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug)]
pub struct Report {
    pub result: Value,
    pub table: Table,
    pub provenance: BTreeMap<String, String>,
    /// Set when the command ran but a check failed.
    pub failure: Option<String>,
}

#[derive(Serialize)]
struct Envelope<'a> {
    tool: &'static str,
    version: &'static str,
    schema_version: u32,
    config: &'a RunConfig,
    seed: u64,
    provenance: &'a BTreeMap<String, String>,
    result: &'a Value,
}

pub fn emit(cfg: &RunConfig, report: &Report) -> Result<(), Failure> {
    let out: Box<dyn Write> = match &cfg.output_path {
        Some(p) => Box::new(File::create(p).map_err(|e| {
            Failure::Runtime(anyhow::anyhow!("cannot create {}: {e}", p.display()))
        })?),
        None => Box::new(io::stdout().lock()),
    };
    let mut out = BufWriter::new(out);
    match cfg.output_format {
        Format::Json => {
            let env = Envelope {
                tool: TOOL,
                version: VERSION,
                schema_version: SCHEMA_VERSION,
                config: cfg,
                seed: cfg.seed,
                provenance: &report.provenance,
                result: &report.result,
            };
            serde_json::to_writer_pretty(&mut out, &env).map_err(|e| Failure::Runtime(e.into()))?;
            writeln!(out)?;
        }
        Format::Csv => {
            let config = serde_json::to_string(cfg).map_err(|e| Failure::Runtime(e.into()))?;
            writeln!(out, "# tool {TOOL} {VERSION}")?;
            writeln!(out, "# schema_version {SCHEMA_VERSION}")?;
            writeln!(out, "# config {config}")?;
            writeln!(out, "# seed {}", cfg.seed)?;
            for (k, v) in &report.provenance {
                writeln!(out, "# provenance {k}={v}")?;
            }
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&report.table.headers).map_err(|e| Failure::Runtime(e.into()))?;
            for row in &report.table.rows {
                w.write_record(row).map_err(|e| Failure::Runtime(e.into()))?;
            }
            w.flush()?;
        }
    }
    out.flush()?;
    Ok(())
}
