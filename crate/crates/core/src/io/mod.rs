//! Files, configuration, synthetic datasets and the command workflows behind
//! the `emx` binary.

pub mod commands;
pub mod config;
pub mod design;
pub mod synth;
pub mod tracefile;

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub use config::ExperimentConfig;
pub use tracefile::TraceFile;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "EMX_OUT_DIR";

/// Write `contents` to a sibling temporary file, then rename it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = dir.join(tmp_name);
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
