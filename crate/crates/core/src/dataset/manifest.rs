use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::model::{Difficulty, LayoutGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Val,
    Test,
}

impl SplitName {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Val => "val",
            SplitName::Test => "test",
        }
    }
}

/// One manifest line. `path` is relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub path: String,
    pub split: Option<SplitName>,
    pub n: usize,
    pub difficulty: Difficulty,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, DatasetError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line).map_err(|e| DatasetError::Manifest {
            path: path.to_path_buf(),
            line: k + 1,
            message: e.to_string(),
        })?;
        out.push(entry);
    }
    Ok(out)
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<(), DatasetError> {
    let mut file = fs::File::create(path).map_err(io_err(path))?;
    for e in entries {
        let line = serde_json::to_string(e).expect("manifest entries serialize");
        writeln!(file, "{line}").map_err(io_err(path))?;
    }
    Ok(())
}

/// A manifest plus the directory its layout paths are relative to.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Corpus {
    pub fn open(manifest: &Path) -> Result<Self, DatasetError> {
        Ok(Corpus {
            root: manifest.parent().unwrap_or(Path::new(".")).to_path_buf(),
            entries: read_manifest(manifest)?,
        })
    }

    pub fn find(&self, id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn load(&self, entry: &ManifestEntry) -> Result<LayoutGraph, DatasetError> {
        let path = self.root.join(&entry.path);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&text).map_err(|e| DatasetError::Manifest {
            path,
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn in_split(&self, split: SplitName) -> Vec<&ManifestEntry> {
        self.entries.iter().filter(|e| e.split == Some(split)).collect()
    }
}

/// Writes one layout as JSON next to the manifest and returns its entry.
pub fn store_layout(dir: &Path, id: &str, graph: &LayoutGraph) -> Result<ManifestEntry, DatasetError> {
    let rel = format!("layouts/{id}.json");
    let path = dir.join(&rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let text = serde_json::to_string(graph).expect("graphs serialize");
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(ManifestEntry {
        id: id.to_string(),
        path: rel,
        split: None,
        n: graph.len(),
        difficulty: graph.difficulty(),
    })
}
