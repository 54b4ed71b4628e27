use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};

/// Prefixes TSV reports with a `# generated ...` line unless suppressed.
#[derive(Debug, Clone, Copy)]
pub struct Stamp {
    enabled: bool,
}

impl Stamp {
    pub fn new(enabled: bool) -> Self {
        Self { enabled }
    }

    fn header(&self) -> Option<String> {
        self.enabled.then(|| {
            let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
            format!("# generated by maskvec {} at unix time {secs}\n", env!("CARGO_PKG_VERSION"))
        })
    }

    /// Writes a report to `path`, or to stdout when `path` is `None`.
    pub fn write(&self, path: Option<&Path>, body: &str) -> Result<()> {
        let mut text = self.header().unwrap_or_default();
        text.push_str(body);
        match path {
            Some(p) => write_file(p, text.as_bytes()),
            None => {
                io::stdout().lock().write_all(text.as_bytes())?;
                Ok(())
            }
        }
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut out = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    out.write_all(bytes)?;
    out.flush()?;
    Ok(())
}
