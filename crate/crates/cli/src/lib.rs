//! Experiment runner for delayed adaptive phase measurements: delay sweeps,
//! the mark I slope check, theory tables and single-trajectory dumps, each
//! written as CSV plus SVG figures rendered from that CSV.

pub mod commands;
pub mod config;
pub mod plot;
pub mod table;

use std::fs;
use std::path::{Path, PathBuf};

pub use commands::{cmd_markone_check, cmd_sweep, cmd_theory, cmd_traj};
pub use config::ExperimentConfig;
pub use table::{Cell, CsvData, Table};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
    /// A check command ran to completion but its criterion failed.
    #[error("check failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) | CliError::CheckFailed(_) => 3,
        }
    }
}

impl From<phasedelay::Error> for CliError {
    fn from(e: phasedelay::Error) -> Self {
        use phasedelay::Error as E;
        match e {
            E::InvalidConfig(_) | E::InvalidGrid(_) | E::InsufficientRange { .. } => {
                CliError::Config(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(format!("csv: {e}"))
    }
}

/// Everything a command produces, held in memory until the command has
/// finished so a failure never leaves partial results on disk.
#[derive(Debug, Clone, Default)]
pub struct Outputs {
    pub files: Vec<(String, Vec<u8>)>,
    /// Human-readable summary for stdout.
    pub report: String,
    /// `Some(false)` when a check command's criterion failed.
    pub passed: Option<bool>,
}

impl Outputs {
    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, b)| b.as_slice())
    }

    /// Write every file under `dir`. Files are staged under temporary names
    /// and renamed only once all of them were written.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        let io = |what: &str, p: &Path, e: std::io::Error| {
            CliError::Runtime(format!("cannot {what} {}: {e}", p.display()))
        };
        fs::create_dir_all(dir).map_err(|e| io("create", dir, e))?;
        let mut staged = Vec::new();
        for (name, bytes) in &self.files {
            let tmp = dir.join(format!(".{name}.partial"));
            if let Err(e) = fs::write(&tmp, bytes) {
                for (t, _) in &staged {
                    let _ = fs::remove_file(t);
                }
                return Err(io("write", &tmp, e));
            }
            staged.push((tmp, dir.join(name)));
        }
        let mut written = Vec::new();
        for (tmp, dest) in staged {
            fs::rename(&tmp, &dest).map_err(|e| io("rename into", &dest, e))?;
            written.push(dest);
        }
        Ok(written)
    }
}
