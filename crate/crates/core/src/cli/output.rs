//! Result persistence: hash-stamped CSV tables and collision-checked writes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::{Error, Result};

/// A CSV file whose first line is `# manifest=<hash>`.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub hash: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(hash: &str, header: &[&str]) -> Self {
        Self {
            hash: hash.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# manifest={}\n{}\n", self.hash, self.header.join(","));
        for r in &self.rows {
            writeln!(out, "{}", r.join(",")).expect("writing to a String");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let hash = lines
            .next()
            .and_then(|l| l.strip_prefix("# manifest="))
            .ok_or_else(|| Error::Format {
                offset: 0,
                message: "missing '# manifest=' line".into(),
            })?
            .to_string();
        let header_line = lines.next().ok_or_else(|| Error::Format {
            offset: hash.len() + 12,
            message: "missing header row".into(),
        })?;
        let header: Vec<String> = header_line.split(',').map(str::to_string).collect();
        let mut offset = hash.len() + 12 + header_line.len() + 1;
        let mut rows = Vec::new();
        for line in lines {
            let row: Vec<String> = line.split(',').map(str::to_string).collect();
            if row.len() != header.len() {
                return Err(Error::Format {
                    offset,
                    message: format!("expected {} columns, got {}", header.len(), row.len()),
                });
            }
            rows.push(row);
            offset += line.len() + 1;
        }
        Ok(Self { hash, header, rows })
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format {
                offset: 0,
                message: format!("no column {name:?}"),
            })
    }

    /// Values of a numeric column; empty cells are `None`.
    pub fn floats(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let j = self.column(name)?;
        self.rows
            .iter()
            .map(|r| {
                if r[j].is_empty() {
                    Ok(None)
                } else {
                    r[j].parse().map(Some).map_err(|_| Error::Format {
                        offset: 0,
                        message: format!("column {name}: {:?} is not a number", r[j]),
                    })
                }
            })
            .collect()
    }

    pub fn strings(&self, name: &str) -> Result<Vec<String>> {
        let j = self.column(name)?;
        Ok(self.rows.iter().map(|r| r[j].clone()).collect())
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Manifest hash stamped into an existing output file, if recognizable.
fn stamped_hash(text: &str) -> Option<String> {
    if let Some(h) = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("# manifest="))
    {
        return Some(h.to_string());
    }
    if let Some(i) = text.find("manifest=") {
        let rest = &text[i + 9..];
        let end = rest
            .find(|c: char| !c.is_ascii_hexdigit())
            .unwrap_or(rest.len());
        return Some(rest[..end].to_string());
    }
    serde_json::from_str::<serde_json::Value>(text)
        .ok()?
        .get("manifest_hash")?
        .as_str()
        .map(str::to_string)
}

/// Output directory owned by a single writer.
#[derive(Clone, Debug)]
pub struct OutputDir {
    pub root: PathBuf,
    pub force: bool,
}

impl OutputDir {
    pub fn new(root: impl Into<PathBuf>, force: bool) -> Self {
        Self {
            root: root.into(),
            force,
        }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Fails if `rel` exists and was produced by a different manifest.
    pub fn check_manifest(&self, rel: &str, hash: &str) -> Result<()> {
        let path = self.path(rel);
        if self.force || !path.exists() {
            return Ok(());
        }
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        match stamped_hash(&text) {
            Some(h) if h == hash => Ok(()),
            other => Err(Error::Collision {
                path,
                existing: other.unwrap_or_else(|| "unknown".into()),
            }),
        }
    }

    /// Writes `content`, refusing to replace a file with different content
    /// unless forced. Rewriting identical bytes is a no-op.
    pub fn write(&self, rel: &str, content: &str) -> Result<PathBuf> {
        let path = self.path(rel);
        if path.exists() {
            let existing = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            if existing == content {
                return Ok(path);
            }
            if !self.force {
                return Err(Error::Collision {
                    existing: stamped_hash(&existing).unwrap_or_else(|| "unknown".into()),
                    path,
                });
            }
        }
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn read(&self, rel: &str) -> Result<String> {
        read_text(&self.path(rel))
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
