//! File output: JSON, CSV with a metadata comment row, manifests.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use pelab::diagnostics::{CheckReport, Series};
use pelab::solver::content_hash;
use serde::{Deserialize, Serialize};

/// One emitted file, relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub role: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: String,
    pub status: String,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub files: Vec<FileEntry>,
    #[serde(default)]
    pub details: serde_json::Value,
}

/// Tracks files written under one directory so the manifest can list them.
pub struct Emitter {
    root: PathBuf,
    files: Vec<FileEntry>,
}

impl Emitter {
    pub fn new(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, rel: &str, role: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(FileEntry {
            path: rel.to_string(),
            role: role.to_string(),
            sha256: content_hash(bytes),
        });
        Ok(())
    }

    /// Lists a file written by someone else (e.g. a nested manifest).
    pub fn register(&mut self, rel: &str, role: &str, bytes: &[u8]) {
        self.files.push(FileEntry {
            path: rel.to_string(),
            role: role.to_string(),
            sha256: content_hash(bytes),
        });
    }

    /// A report as JSON plus one CSV per series (`<stem>.<series>.csv`).
    pub fn write_report(&mut self, stem: &str, report: &CheckReport) -> Result<()> {
        self.write(
            &format!("{stem}.json"),
            "report",
            report.to_json().as_bytes(),
        )?;
        for s in &report.series {
            let csv = series_csv(report, s)?;
            self.write(&format!("{stem}.{}.csv", s.name), "series", &csv)?;
        }
        Ok(())
    }

    /// Writes `manifest.json` listing every file emitted so far.
    pub fn finish(
        mut self,
        kind: &str,
        status: &str,
        config_hash: &str,
        seed: Option<u64>,
        details: serde_json::Value,
    ) -> Result<Manifest> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            kind: kind.to_string(),
            status: status.to_string(),
            config_hash: config_hash.to_string(),
            seed,
            files: self.files,
            details,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.root.join("manifest.json"), text)?;
        Ok(manifest)
    }
}

/// Comment row carrying the check name, config hash and tolerance.
pub fn header_comment(check: &str, config_hash: &str, tolerance: f64) -> String {
    format!("# check={check},config_hash={config_hash},tolerance={tolerance}\n")
}

pub fn series_csv(report: &CheckReport, series: &Series) -> Result<Vec<u8>> {
    let rows = series
        .rows
        .iter()
        .map(|r| r.iter().map(|v| v.to_string()).collect())
        .collect::<Vec<Vec<String>>>();
    let columns: Vec<&str> = series.columns.iter().map(String::as_str).collect();
    table_csv(
        &header_comment(&report.name, &report.config_hash, report.tolerance),
        &columns,
        &rows,
    )
}

pub fn table_csv(comment: &str, columns: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut out = comment.as_bytes().to_vec();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(columns)?;
    for r in rows {
        w.write_record(r)?;
    }
    out.extend(w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_starts_with_the_header_comment() {
        let bytes = table_csv(
            &header_comment("demo", "abc", 0.5),
            &["x", "y"],
            &[vec!["1".into(), "2".into()]],
        )
        .unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert_eq!(
            text,
            "# check=demo,config_hash=abc,tolerance=0.5\nx,y\n1,2\n"
        );
    }

    #[test]
    fn manifest_lists_written_files_sorted_with_hashes() {
        let dir = tempfile::tempdir().unwrap();
        let mut em = Emitter::new(dir.path()).unwrap();
        em.write("b.txt", "data", b"two").unwrap();
        em.write("sub/a.txt", "data", b"one").unwrap();
        let m = em
            .finish("test", "ok", "hash", Some(3), serde_json::Value::Null)
            .unwrap();
        let paths: Vec<&str> = m.files.iter().map(|f| f.path.as_str()).collect();
        assert_eq!(paths, ["b.txt", "sub/a.txt"]);
        assert_eq!(m.files[0].sha256, content_hash(b"two"));
        let on_disk: Manifest =
            serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(on_disk, m);
    }
}
