//! Electrodermal activity analysis: ingest, filtering, cvxEDA decomposition,
//! sympathetic indices, random forests with exact Shapley values, rank
//! statistics, synthetic sessions and the `dermalab` command line.

pub mod cli;
pub mod cvxeda;
pub mod dsp;
pub mod features;
pub mod forest;
pub mod ingest;
pub mod stats;
pub mod synth;

use std::io;
use std::path::Path;

/// Write `bytes` to a hidden temporary sibling of `path`, then rename it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })
}
