//! Config loading, subcommand orchestration and result bundles.

pub mod config;
mod run;
pub mod table;

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

pub use config::RunConfig;
pub use run::{qubit_operating_point, with_ratio};
pub use table::{Column, Table};

use crate::error::{Error, Result};

pub const THREADS_ENV: &str = "SPINBUS_THREADS";
pub const METADATA_FILE: &str = "metadata.json";
pub const FAILED_FILE: &str = "FAILED.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    Spectrum,
    CouplerCharacter,
    FluxPropagation,
    Susceptibility,
    JeffCompare,
    Noise,
    HierarchyBench,
}

impl Subcommand {
    pub const ALL: [Subcommand; 7] = [
        Subcommand::Spectrum,
        Subcommand::CouplerCharacter,
        Subcommand::FluxPropagation,
        Subcommand::Susceptibility,
        Subcommand::JeffCompare,
        Subcommand::Noise,
        Subcommand::HierarchyBench,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Spectrum => "spectrum",
            Subcommand::CouplerCharacter => "coupler-character",
            Subcommand::FluxPropagation => "flux-propagation",
            Subcommand::Susceptibility => "susceptibility",
            Subcommand::JeffCompare => "jeff-compare",
            Subcommand::Noise => "noise",
            Subcommand::HierarchyBench => "hierarchy-bench",
        }
    }

    /// Whether results depend on the seed.
    pub fn is_stochastic(self) -> bool {
        matches!(self, Subcommand::Susceptibility | Subcommand::Noise)
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Subcommand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| Error::Config(format!("unknown subcommand '{s}'")))
    }
}

/// Resolves the worker count (flag, then SPINBUS_THREADS, then all cores)
/// and installs the global pool. Returns the count in effect.
pub fn configure_threads(flag: Option<usize>) -> Result<usize> {
    let requested = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| Error::Config(format!("{THREADS_ENV}='{v}' is not a thread count")))?),
            Err(_) => None,
        },
    };
    if requested == Some(0) {
        return Err(Error::Config("thread count must be >= 1".into()));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = requested {
        builder = builder.num_threads(n);
    }
    // a pool installed earlier in the process stays in effect
    let _ = builder.build_global();
    Ok(rayon::current_num_threads())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub file: String,
    pub rows: usize,
    pub columns: Vec<Column>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub schema_version: u32,
    pub subcommand: Subcommand,
    pub config_hash: String,
    pub seed: u64,
    pub stochastic: bool,
    pub threads: usize,
    pub unix_time: u64,
    pub tables: Vec<TableMeta>,
}

#[derive(Debug, Clone)]
pub struct ResultBundle {
    pub tables: Vec<Table>,
    pub metadata: Metadata,
}

impl ResultBundle {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

/// Runs one subcommand. `seed` overrides the config seed when given.
pub fn run(cmd: Subcommand, cfg: &RunConfig, seed: Option<u64>) -> Result<ResultBundle> {
    let seed = seed.unwrap_or(cfg.seed);
    let tables = run::dispatch(cmd, cfg, seed)?;
    let metadata = Metadata {
        tool: "spinbus".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        schema_version: cfg.schema_version,
        subcommand: cmd,
        config_hash: cfg.hash(),
        seed,
        stochastic: cmd.is_stochastic(),
        threads: rayon::current_num_threads(),
        unix_time: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        tables: tables.iter().map(|t| TableMeta { file: t.file_name(), rows: t.rows.len(), columns: t.columns.clone() }).collect(),
    };
    Ok(ResultBundle { tables, metadata })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.display().to_string(), source }
}

pub fn write_bundle(bundle: &ResultBundle, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    for t in &bundle.tables {
        t.write(out)?;
    }
    let meta = out.join(METADATA_FILE);
    let text = serde_json::to_string_pretty(&bundle.metadata).expect("metadata serializes");
    std::fs::write(&meta, text + "\n").map_err(io_err(&meta))?;
    let failed = out.join(FAILED_FILE);
    if failed.exists() {
        std::fs::remove_file(&failed).map_err(io_err(&failed))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureMarker {
    pub subcommand: Option<String>,
    pub error: String,
    pub exit_code: i32,
}

/// Best-effort failure marker so a partial directory is never mistaken for a result.
pub fn write_failure(out: &Path, subcommand: Option<Subcommand>, err: &Error) {
    let marker = FailureMarker { subcommand: subcommand.map(|s| s.name().to_string()), error: err.to_string(), exit_code: err.exit_code() };
    if std::fs::create_dir_all(out).is_ok() {
        let _ = std::fs::remove_file(out.join(METADATA_FILE));
        let _ = std::fs::write(out.join(FAILED_FILE), serde_json::to_string_pretty(&marker).expect("marker serializes") + "\n");
    }
}
