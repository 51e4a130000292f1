//! Locating and loading the shipped case files.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::case_io::{parse_case, CaseError, Network};

pub const SHIPPED_CASES: [&str; 5] = ["case2bus", "case3bus", "ieee14", "ieee30", "ieee118"];

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("cannot read case {path}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("case {path}")]
    Case { path: PathBuf, source: CaseError },
}

/// Root of the shipped data; `GRIDCASCADE_DATA` overrides the source-tree default.
pub fn data_dir() -> PathBuf {
    std::env::var_os("GRIDCASCADE_DATA")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

/// Resolve a case reference: an existing path, or the name of a shipped case.
pub fn resolve_case(reference: &str) -> PathBuf {
    let direct = PathBuf::from(reference);
    if direct.is_file() {
        return direct;
    }
    let stem = reference.strip_suffix(".m").unwrap_or(reference);
    let shipped = data_dir().join("cases").join(format!("{stem}.m"));
    if shipped.is_file() {
        shipped
    } else {
        direct
    }
}

pub fn load_case(reference: &str) -> Result<Network, FixtureError> {
    let path = resolve_case(reference);
    let text = fs::read_to_string(&path).map_err(|source| FixtureError::Io {
        path: path.clone(),
        source,
    })?;
    parse_case(&text).map_err(|source| FixtureError::Case { path, source })
}
