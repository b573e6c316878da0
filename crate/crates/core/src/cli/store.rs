//! Append-only record store: `records.jsonl` plus a journal of finished task
//! keys. Both files start with a header line carrying the format version.

use std::collections::HashSet;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vqe_engine::{RecordKey, RunRecord};

pub const FORMAT_VERSION: &str = "1.0";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const JOURNAL_FILE: &str = "journal.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format: String,
    pub version: String,
}

impl Header {
    fn new(format: &str) -> Self {
        Self { format: format.into(), version: FORMAT_VERSION.into() }
    }

    /// Accept any minor version of the supported major.
    pub fn check(&self, format: &str, path: &Path) -> Result<()> {
        if self.format != format {
            return Err(Error::Store(format!("{}: expected a `{format}` file, found `{}`", path.display(), self.format)));
        }
        let major = |v: &str| v.split('.').next().unwrap_or("").to_string();
        if major(&self.version) != major(FORMAT_VERSION) {
            return Err(Error::Store(format!(
                "{}: unsupported format version {} (this build reads {}.x)",
                path.display(),
                self.version,
                major(FORMAT_VERSION)
            )));
        }
        Ok(())
    }
}

/// Parse a JSON Lines file with a header. A truncated last line (from an
/// interrupted write) is skipped with a warning; any other bad line is an error.
fn read_lines<T: for<'de> Deserialize<'de>>(path: &Path, format: &str) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::Store(format!("{}: {e}", path.display())))?;
    let lines: Vec<String> = BufReader::new(file).lines().collect::<std::io::Result<_>>()?;
    let Some(first) = lines.first() else {
        return Err(Error::Store(format!("{}: empty file without header", path.display())));
    };
    let header: Header = serde_json::from_str(first).map_err(|e| Error::Store(format!("{}: bad header: {e}", path.display())))?;
    header.check(format, path)?;
    let mut out = Vec::new();
    let n = lines.len();
    for (i, line) in lines.iter().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(v) => out.push(v),
            Err(e) if i == n - 1 => log::warn!("{}: ignoring truncated last line ({e})", path.display()),
            Err(e) => return Err(Error::Store(format!("{}:{}: {e}", path.display(), i + 1))),
        }
    }
    Ok(out)
}

fn write_header(w: &mut impl Write, format: &str) -> Result<()> {
    serde_json::to_writer(&mut *w, &Header::new(format))?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Read every journaled record of a store directory.
pub fn load_records(dir: &Path) -> Result<Vec<RunRecord>> {
    let records: Vec<RunRecord> = read_lines(&dir.join(RECORDS_FILE), "phasesketch-records")?;
    let journal = dir.join(JOURNAL_FILE);
    if !journal.exists() {
        return Ok(records);
    }
    let keys: HashSet<RecordKey> = read_lines::<RecordKey>(&journal, "phasesketch-journal")?.into_iter().collect();
    let before = records.len();
    let kept: Vec<RunRecord> = records.into_iter().filter(|r| keys.contains(&r.key())).collect();
    if kept.len() != before {
        log::warn!("{}: dropped {} records missing from the journal", dir.display(), before - kept.len());
    }
    Ok(kept)
}

/// Atomically replace the store contents with `records`.
pub fn rewrite(dir: &Path, records: &[RunRecord]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let write = |name: &str, format: &str, body: &dyn Fn(&mut BufWriter<File>) -> Result<()>| -> Result<()> {
        let tmp = dir.join(format!(".{name}.tmp"));
        let mut w = BufWriter::new(File::create(&tmp)?);
        write_header(&mut w, format)?;
        body(&mut w)?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, dir.join(name))?;
        Ok(())
    };
    write(RECORDS_FILE, "phasesketch-records", &|w| {
        for r in records {
            serde_json::to_writer(&mut *w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })?;
    write(JOURNAL_FILE, "phasesketch-journal", &|w| {
        for r in records {
            serde_json::to_writer(&mut *w, &r.key())?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

/// Writer that appends one record, then its journal key, flushing both.
pub struct Store {
    dir: PathBuf,
    records: File,
    journal: File,
}

impl Store {
    /// Open a store for a run. Without `resume`, an existing non-empty store
    /// is an error. Returns the store and the records already finished.
    pub fn open(dir: &Path, resume: bool) -> Result<(Self, Vec<RunRecord>)> {
        fs::create_dir_all(dir)?;
        let existing = if dir.join(RECORDS_FILE).exists() {
            let recs = load_records(dir)?;
            if !resume && !recs.is_empty() {
                return Err(Error::Store(format!("{} already holds {} records; pass --resume to continue", dir.display(), recs.len())));
            }
            recs
        } else {
            Vec::new()
        };
        // Compact away partial lines and unjournaled records before appending.
        rewrite(dir, &existing)?;
        let open = |name: &str| OpenOptions::new().append(true).open(dir.join(name));
        Ok((Self { dir: dir.to_path_buf(), records: open(RECORDS_FILE)?, journal: open(JOURNAL_FILE)? }, existing))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn append(&mut self, record: &RunRecord) -> Result<()> {
        let mut line = serde_json::to_vec(record)?;
        line.push(b'\n');
        self.records.write_all(&line)?;
        self.records.flush()?;
        let mut key = serde_json::to_vec(&record.key())?;
        key.push(b'\n');
        self.journal.write_all(&key)?;
        self.journal.flush()?;
        Ok(())
    }
}
