use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use mot_core::MotError;
use serde_json::{json, Value};

use crate::Global;

#[derive(Debug)]
pub enum CliError {
    /// Unreadable or malformed input.
    Input(String),
    /// A mathematical precondition failed.
    Math(MotError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Math(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "{m}"),
            CliError::Math(e) => write!(f, "{e}"),
        }
    }
}

impl From<MotError> for CliError {
    fn from(e: MotError) -> Self {
        match e {
            MotError::Parse { .. } => CliError::Input(e.to_string()),
            other => CliError::Math(other),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// What a command produced: a JSON document, a CSV table and an exit status.
pub struct Report {
    pub json: Value,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// 0 when every check passed, 2 otherwise.
    pub status: u8,
}

impl Report {
    pub fn new(json: Value) -> Self {
        Self {
            json,
            header: Vec::new(),
            rows: Vec::new(),
            status: 0,
        }
    }

    pub fn table<S: Into<String>>(mut self, header: impl IntoIterator<Item = S>, rows: Vec<Vec<String>>) -> Self {
        self.header = header.into_iter().map(Into::into).collect();
        self.rows = rows;
        self
    }

    pub fn failed_if(mut self, failed: bool) -> Self {
        if failed {
            self.status = 2;
        }
        self
    }
}

pub fn read_json(path: &Path) -> CliResult<Value> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Adds the file name to parse errors so pointers can be traced back.
pub fn in_file<T>(path: &Path, r: mot_core::Result<T>) -> CliResult<T> {
    r.map_err(|e| match e {
        MotError::Parse { pointer, message } => CliError::Input(format!(
            "{}: invalid value at {}: {message}",
            path.display(),
            if pointer.is_empty() { "/" } else { &pointer }
        )),
        other => CliError::Math(other),
    })
}

fn render(global: &Global, report: &Report) -> CliResult<Vec<u8>> {
    if global.csv {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io_err = |e: csv::Error| CliError::Input(e.to_string());
        w.write_record(&report.header).map_err(io_err)?;
        for row in &report.rows {
            w.write_record(row).map_err(io_err)?;
        }
        w.into_inner().map_err(|e| CliError::Input(e.to_string()))
    } else {
        let mut out = serde_json::to_vec_pretty(&report.json).map_err(|e| CliError::Input(e.to_string()))?;
        out.push(b'\n');
        Ok(out)
    }
}

pub fn emit(global: &Global, command: &str, inputs: &[PathBuf], seed: Option<u64>, report: &Report) -> CliResult<()> {
    let bytes = render(global, report)?;
    match &global.output {
        Some(path) => fs::write(path, &bytes).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?,
        None => io::stdout()
            .write_all(&bytes)
            .map_err(|e| CliError::Input(format!("stdout: {e}")))?,
    }
    if let Some(path) = &global.manifest {
        let manifest = json!({
            "command": command,
            "inputs": inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "seed": seed,
            "outputs": global.output.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "flags": {"csv": global.csv, "approx": global.approx},
            "status": report.status,
        });
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Input(e.to_string()))?;
        fs::write(path, text + "\n").map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}
