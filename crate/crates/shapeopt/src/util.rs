//! Shared formatting and file helpers.

use crate::error::Result;
use std::io::Write;
use std::path::Path;

/// Formats like C's `%.9e`: nine fractional digits, sign on the exponent,
/// exponent padded to at least two digits. Output files pin this format so
/// artifacts are byte-comparable between runs.
pub fn fmt_e9(x: f64) -> String {
    debug_assert!(x.is_finite(), "non-finite value in output: {x}");
    let s = format!("{:.9e}", x);
    let (mant, exp) = s.split_once('e').expect("exponential format");
    let e: i32 = exp.parse().expect("exponent");
    if e < 0 {
        format!("{}e-{:02}", mant, -e)
    } else {
        format!("{}e+{:02}", mant, e)
    }
}

/// Writes a file atomically: contents go to a sibling temp file which is
/// renamed into place, so readers never observe a truncated file.
pub fn write_atomic(path: &Path, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let tmp = path.with_extension({
        let mut ext = path
            .extension()
            .map(|e| e.to_string_lossy().into_owned())
            .unwrap_or_default();
        ext.push_str(".tmp");
        ext
    });
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let file = std::fs::File::create(&tmp)?;
    let mut buf = std::io::BufWriter::new(file);
    f(&mut buf)?;
    buf.flush()?;
    drop(buf);
    std::fs::rename(&tmp, path)?;
    Ok(())
}
