//! Output plumbing: failures with exit codes, the reproducibility header and
//! file writing.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use feemarket_core::Error;
use serde::Serialize;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Internal(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Data(_) => 3,
            Failure::Internal(_) => 4,
        }
    }

    /// Core errors raised while validating flags or running a simulation.
    pub fn from_sim(e: Error) -> Self {
        match e {
            Error::Parameter(_)
            | Error::Domain(_)
            | Error::Fit(_)
            | Error::InsufficientBids { .. }
            | Error::BidBelowMinimum { .. } => Failure::Usage(e.to_string()),
            Error::Overflow => Failure::Internal(e.to_string()),
            Error::Parse { .. } | Error::DuplicateTx { .. } | Error::Io(_) | Error::Csv(_) => {
                Failure::Data(e.to_string())
            }
        }
    }

    /// Core errors raised while reading or aggregating input data.
    pub fn from_data(e: Error) -> Self {
        match e {
            Error::Overflow => Failure::Data(format!("{e} (totals exceed 64 bits)")),
            Error::Parameter(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage: {m}"),
            Failure::Data(m) => write!(f, "data: {m}"),
            Failure::Internal(m) => write!(f, "internal: {m}"),
        }
    }
}

/// `# feemarket <version> seed=<seed> config=<json>`. The thread count and
/// output directory are deliberately absent so outputs compare byte for byte.
pub fn header<C: Serialize>(seed: Option<u64>, config: &C) -> Result<String, Failure> {
    let json = serde_json::to_string(config).map_err(|e| Failure::Internal(e.to_string()))?;
    let seed = seed.map_or_else(|| "none".to_string(), |s| s.to_string());
    Ok(format!("# feemarket {VERSION} seed={seed} config={json}"))
}

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(root)
            .map_err(|e| Failure::Internal(format!("cannot create {}: {e}", root.display())))?;
        Ok(OutDir {
            root: root.to_path_buf(),
        })
    }

    pub fn write(&self, name: &str, contents: &[u8]) -> Result<PathBuf, Failure> {
        let path = self.root.join(name);
        fs::write(&path, contents)
            .map_err(|e| Failure::Internal(format!("cannot write {}: {e}", path.display())))?;
        println!("wrote {}", path.display());
        Ok(path)
    }
}
