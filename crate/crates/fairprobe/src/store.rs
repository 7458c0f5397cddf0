//! Append-only newline-delimited catalogue, one file per
//! (stage, repository) under `{run}/catalogue/`.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    Raw,
    Parsed,
    Assessed,
    /// Probe timings, kept apart so `Assessed` stays byte-stable.
    Timings,
}

impl Stage {
    pub fn dir(self) -> &'static str {
        match self {
            Stage::Raw => "raw",
            Stage::Parsed => "parsed",
            Stage::Assessed => "assessed",
            Stage::Timings => "timings",
        }
    }
}

/// File-system safe form of a repository id.
pub fn partition_name(repo: &str) -> String {
    repo.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

#[derive(Debug, Clone)]
pub struct CatalogueStore {
    root: PathBuf,
}

/// Serialized appends to one partition. Each record is written with a
/// single `write_all` of its full line.
pub struct Appender {
    file: Mutex<File>,
}

impl Appender {
    pub fn append<T: Serialize>(&self, value: &T) -> io::Result<()> {
        let mut line = serde_json::to_vec(value).map_err(io::Error::other)?;
        line.push(b'\n');
        let mut f = self.file.lock().unwrap_or_else(|p| p.into_inner());
        f.write_all(&line)
    }

    pub fn sync(&self) -> io::Result<()> {
        self.file.lock().unwrap_or_else(|p| p.into_inner()).sync_data()
    }
}

impl CatalogueStore {
    pub fn new(run_dir: &Path) -> CatalogueStore {
        CatalogueStore { root: run_dir.join("catalogue") }
    }

    pub fn path(&self, stage: Stage, repo: &str) -> PathBuf {
        self.root.join(stage.dir()).join(format!("{}.ndjson", partition_name(repo)))
    }

    /// Empties the partition and opens it for appending.
    pub fn create(&self, stage: Stage, repo: &str) -> io::Result<Appender> {
        let p = self.path(stage, repo);
        fs::create_dir_all(p.parent().expect("partition has a parent"))?;
        let file = File::create(&p)?;
        Ok(Appender { file: Mutex::new(file) })
    }

    /// Drops a truncated final line, then opens for appending.
    pub fn reopen(&self, stage: Stage, repo: &str) -> io::Result<Appender> {
        let p = self.path(stage, repo);
        fs::create_dir_all(p.parent().expect("partition has a parent"))?;
        if p.exists() {
            repair(&p)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(&p)?;
        Ok(Appender { file: Mutex::new(file) })
    }

    pub fn exists(&self, stage: Stage, repo: &str) -> bool {
        self.path(stage, repo).exists()
    }

    /// All complete records of a partition; a missing partition is empty.
    /// A final line without its newline is ignored.
    pub fn read<T: DeserializeOwned>(&self, stage: Stage, repo: &str) -> io::Result<Vec<T>> {
        let mut out = Vec::new();
        self.for_each(stage, repo, |v| {
            out.push(v);
            Ok(())
        })?;
        Ok(out)
    }

    pub fn for_each<T, F>(&self, stage: Stage, repo: &str, mut f: F) -> io::Result<()>
    where
        T: DeserializeOwned,
        F: FnMut(T) -> io::Result<()>,
    {
        let p = self.path(stage, repo);
        let file = match File::open(&p) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(()),
            Err(e) => return Err(e),
        };
        let mut reader = BufReader::new(file);
        let mut line = Vec::new();
        let mut n = 0usize;
        loop {
            line.clear();
            if reader.read_until(b'\n', &mut line)? == 0 {
                break;
            }
            n += 1;
            if line.last() != Some(&b'\n') {
                log::warn!("{}: dropping truncated final line", p.display());
                break;
            }
            let v: T = serde_json::from_slice(&line).map_err(|e| {
                io::Error::new(io::ErrorKind::InvalidData, format!("{}:{n}: {e}", p.display()))
            })?;
            f(v)?;
        }
        Ok(())
    }
}

/// Truncates `path` after its last newline.
fn repair(path: &Path) -> io::Result<()> {
    let data = fs::read(path)?;
    let keep = data.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    if keep < data.len() {
        log::warn!("{}: dropping {} bytes of a truncated line", path.display(), data.len() - keep);
        let f = OpenOptions::new().write(true).open(path)?;
        f.set_len(keep as u64)?;
    }
    Ok(())
}
