use std::io::Write;
use std::path::Path;

use clap::ValueEnum;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Dot,
}

#[derive(Debug, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// What a command produced. JSON is always available; the other renderings
/// only for commands where they make sense. `failures` names the checks that
/// did not hold.
#[derive(Debug)]
pub struct Report {
    pub json: Value,
    pub table: Option<Table>,
    pub dot: Option<String>,
    pub failures: Vec<String>,
}

impl Report {
    pub fn render(&self, format: Format) -> Result<Vec<u8>, CliError> {
        let unavailable = || CliError::Input(format!("format {format:?} is not available for this command").to_lowercase());
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.json).expect("JSON values serialize");
                s.push('\n');
                Ok(s.into_bytes())
            }
            Format::Csv => {
                let table = self.table.as_ref().ok_or_else(unavailable)?;
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&table.header).map_err(|e| CliError::Input(e.to_string()))?;
                for row in &table.rows {
                    w.write_record(row).map_err(|e| CliError::Input(e.to_string()))?;
                }
                w.into_inner().map_err(|e| CliError::Input(e.to_string()))
            }
            Format::Dot => self.dot.clone().map(String::into_bytes).ok_or_else(unavailable),
        }
    }
}

/// Writes to `path` through a temporary file in the same directory, so readers
/// never see a partial file; `None` means stdout.
pub fn emit(bytes: &[u8], path: Option<&Path>) -> Result<(), CliError> {
    match path {
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(d) if !d.as_os_str().is_empty() => d,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            tmp.write_all(bytes)?;
            tmp.as_file().sync_all()?;
            tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
        }
    }
    Ok(())
}

/// Short stable label for a canonical vertex key.
pub fn key_hash(key: &str) -> String {
    let digest = Sha256::digest(key.as_bytes());
    digest[..4].iter().map(|b| format!("{b:02x}")).collect()
}

/// Undirected graph in DOT; `labels[i]` becomes the node label and `parity[i]`,
/// when given, picks one of two fill colors.
pub fn dot_graph(name: &str, labels: &[String], parity: Option<&[u8]>, adjacency: &[Vec<usize>]) -> String {
    const COLORS: [&str; 2] = ["lightblue", "orange"];
    let mut s = format!("graph {name} {{\n  node [style=filled];\n");
    for (i, l) in labels.iter().enumerate() {
        let color = parity.map_or("white", |p| COLORS[p[i] as usize & 1]);
        s.push_str(&format!("  v{i} [label=\"{l}\", fillcolor={color}];\n"));
    }
    for (i, nbrs) in adjacency.iter().enumerate() {
        for &j in nbrs.iter().filter(|&&j| j > i) {
            s.push_str(&format!("  v{i} -- v{j};\n"));
        }
    }
    s.push_str("}\n");
    s
}
