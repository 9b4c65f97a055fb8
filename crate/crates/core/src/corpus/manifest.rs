//! The corpus manifest: a JSONL file, header record first.
//!
//! JSONL keeps the manifest streamable (records are processed one line at a
//! time, bounded memory) and diffable (byte-stable field order).

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::provenance::{Provenance, FORMAT_VERSION};

use super::vocab::Vocabulary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Eval,
}

/// First line of every manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub version: u32,
    pub vocabulary: Vocabulary,
    pub cell_height: usize,
    pub cell_width: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    /// Echo of the curation plan that produced a derived corpus, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<serde_json::Value>,
}

impl ManifestHeader {
    pub fn new(vocabulary: Vocabulary, cell_height: usize, cell_width: usize, seed: u64) -> Self {
        ManifestHeader {
            version: FORMAT_VERSION,
            vocabulary,
            cell_height,
            cell_width,
            seed,
            provenance: None,
            plan: None,
        }
    }
}

/// One sample, as stored in the manifest. `image_path` is relative to the
/// manifest's directory when written by this crate; absolute paths are
/// accepted (in-memory merges across corpora produce them).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub image_path: String,
    pub label: String,
    pub style_id: u32,
    pub noise_sigma: f64,
    pub corrupted: bool,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusManifest {
    pub header: ManifestHeader,
    pub records: Vec<SampleRecord>,
    /// Directory relative image paths resolve against (the manifest's home).
    pub dir: PathBuf,
}

impl CorpusManifest {
    pub fn new(header: ManifestHeader, records: Vec<SampleRecord>, dir: PathBuf) -> Self {
        CorpusManifest {
            header,
            records,
            dir,
        }
    }

    pub fn resolve_image_path(&self, record: &SampleRecord) -> PathBuf {
        let p = Path::new(&record.image_path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.dir.join(p)
        }
    }

    /// Rewrites every image path to its absolute form, so records survive
    /// being merged into a manifest rooted elsewhere.
    pub fn resolved(mut self) -> Self {
        for i in 0..self.records.len() {
            let abs = self.resolve_image_path(&self.records[i]);
            self.records[i].image_path = abs.to_string_lossy().into_owned();
        }
        self
    }

    /// Keeps only records whose id is in `ids`, preserving manifest order.
    pub fn subset(&self, ids: &BTreeSet<String>) -> CorpusManifest {
        CorpusManifest {
            header: self.header.clone(),
            records: self
                .records
                .iter()
                .filter(|r| ids.contains(&r.id))
                .cloned()
                .collect(),
            dir: self.dir.clone(),
        }
    }

    pub fn split_records(&self, split: Split) -> impl Iterator<Item = &SampleRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    /// Validation pass: every image path must point at a readable file.
    pub fn validate_images(&self) -> Result<()> {
        for r in &self.records {
            let p = self.resolve_image_path(r);
            if !p.is_file() {
                return Err(Error::data(format!(
                    "record {}: image {} missing or unreadable",
                    r.id,
                    p.display()
                )));
            }
        }
        Ok(())
    }
}

/// Streaming manifest reader; yields records one line at a time.
pub struct ManifestReader {
    pub header: ManifestHeader,
    pub dir: PathBuf,
    path: PathBuf,
    lines: std::io::Lines<BufReader<std::fs::File>>,
    line_no: usize,
    seen_ids: BTreeSet<String>,
}

impl ManifestReader {
    fn manifest_err(&self, msg: impl Into<String>) -> Error {
        Error::Manifest {
            path: self.path.clone(),
            line: self.line_no,
            msg: msg.into(),
        }
    }
}

impl Iterator for ManifestReader {
    type Item = Result<SampleRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.line_no += 1;
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(Error::io(&self.path, e))),
            };
            if line.trim().is_empty() {
                continue;
            }
            let record: SampleRecord = match serde_json::from_str(&line) {
                Ok(r) => r,
                Err(e) => return Some(Err(self.manifest_err(e.to_string()))),
            };
            if let Some(c) = record.confidence {
                if !(0.0..=1.0).contains(&c) {
                    return Some(Err(self.manifest_err(format!(
                        "confidence {c} outside [0, 1] for id {}",
                        record.id
                    ))));
                }
            }
            if !self.seen_ids.insert(record.id.clone()) {
                return Some(Err(self.manifest_err(format!("duplicate id {}", record.id))));
            }
            return Some(Ok(record));
        }
    }
}

/// Opens a manifest for streaming; parses and checks the header eagerly.
pub fn open_manifest(path: &Path) -> Result<ManifestReader> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Manifest {
            path: path.to_path_buf(),
            line: 1,
            msg: "empty file; expected a header record".into(),
        })?
        .map_err(|e| Error::io(path, e))?;
    let header: ManifestHeader =
        serde_json::from_str(&header_line).map_err(|e| Error::Manifest {
            path: path.to_path_buf(),
            line: 1,
            msg: format!("bad header: {e}"),
        })?;
    if header.version != FORMAT_VERSION {
        return Err(Error::Version {
            path: path.to_path_buf(),
            found: header.version,
            expected: FORMAT_VERSION,
        });
    }
    // The home directory is stored absolute so that relative image paths
    // keep meaning the same files after records are resolved or re-rooted.
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let dir = std::path::absolute(parent).map_err(|e| Error::io(parent, e))?;
    Ok(ManifestReader {
        header,
        dir,
        path: path.to_path_buf(),
        lines,
        line_no: 1,
        seen_ids: BTreeSet::new(),
    })
}

/// Reads a whole manifest into memory.
pub fn read_manifest(path: &Path) -> Result<CorpusManifest> {
    let mut reader = open_manifest(path)?;
    let mut records = Vec::new();
    for record in reader.by_ref() {
        records.push(record?);
    }
    Ok(CorpusManifest {
        header: reader.header,
        records,
        dir: reader.dir,
    })
}

/// Writes the manifest as JSONL, header first. Absolute image paths under
/// the manifest's directory are relativized so the corpus stays relocatable.
pub fn write_manifest(manifest: &CorpusManifest, path: &Path) -> Result<()> {
    let parent = path.parent().unwrap_or_else(|| Path::new("."));
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);

    let mut ids = BTreeSet::new();
    for r in &manifest.records {
        if !ids.insert(r.id.as_str()) {
            return Err(Error::data(format!("duplicate id {} in manifest", r.id)));
        }
    }

    let header = serde_json::to_string(&manifest.header).expect("header serializes");
    writeln!(w, "{header}").map_err(io)?;
    for r in &manifest.records {
        let mut rec = r.clone();
        let p = Path::new(&rec.image_path);
        if let Ok(rel) = p.strip_prefix(parent) {
            if p.is_absolute() {
                rec.image_path = rel.to_string_lossy().into_owned();
            }
        }
        let line = serde_json::to_string(&rec).expect("record serializes");
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}
