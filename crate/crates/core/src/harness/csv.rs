use std::fmt::Write as _;
use std::path::Path;

use super::{HarnessError, RunMatrix};

/// Renders `episode,mean_return,smoothed_return,run_0,..` with one row per
/// episode. Numbers use Rust's shortest round-trip formatting, so every
/// value parses back to the identical `f64`.
pub fn to_csv_string(matrix: &RunMatrix) -> String {
    let mut out = String::from("episode,mean_return,smoothed_return");
    for r in 0..matrix.runs() {
        write!(out, ",run_{r}").unwrap();
    }
    out.push('\n');
    for e in 0..matrix.episodes() {
        write!(out, "{e},{},{}", matrix.mean_curve()[e], matrix.smoothed_curve()[e]).unwrap();
        for run in matrix.returns() {
            write!(out, ",{}", run[e]).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_csv(matrix: &RunMatrix, path: &Path) -> Result<(), HarnessError> {
    std::fs::write(path, to_csv_string(matrix)).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}
