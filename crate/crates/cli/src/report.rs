//! `pelab report`: summary CSV over the manifests found under a directory.

use std::path::Path;

use anyhow::anyhow;
use walkdir::WalkDir;

use crate::output::{table_csv, Emitter, Manifest};
use crate::Failure;

pub const COLUMNS: [&str; 6] = ["manifest", "kind", "status", "config_hash", "seed", "files"];

/// Rows for every `manifest.json` under `dir`, in path order.
pub fn collect(dir: &Path) -> Result<Vec<Vec<String>>, Failure> {
    if !dir.is_dir() {
        return Err(Failure::Usage(anyhow!(
            "{} is not a directory",
            dir.display()
        )));
    }
    let mut rows = Vec::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| Failure::Usage(e.into()))?;
        if entry.file_name() != "manifest.json" {
            continue;
        }
        let text = std::fs::read_to_string(entry.path()).map_err(|e| Failure::Usage(e.into()))?;
        let m: Manifest = serde_json::from_str(&text)
            .map_err(|e| Failure::Usage(anyhow!("{}: {e}", entry.path().display())))?;
        let rel = entry
            .path()
            .strip_prefix(dir)
            .unwrap_or(entry.path())
            .display()
            .to_string();
        rows.push(vec![
            rel,
            m.kind,
            m.status,
            m.config_hash,
            m.seed.map(|s| s.to_string()).unwrap_or_default(),
            m.files.len().to_string(),
        ]);
    }
    Ok(rows)
}

pub fn cmd_report(dir: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let rows = collect(dir)?;
    let csv = table_csv(&format!("# report={}\n", dir.display()), &COLUMNS, &rows)
        .map_err(Failure::Usage)?;
    match out {
        Some(out) => {
            let mut em = Emitter::new(out).map_err(Failure::Usage)?;
            em.write("report.csv", "summary", &csv)
                .map_err(Failure::Usage)?;
            em.finish(
                "report",
                "ok",
                "",
                None,
                serde_json::json!({ "manifests": rows.len() }),
            )
            .map_err(Failure::Usage)?;
        }
        None => print!("{}", String::from_utf8_lossy(&csv)),
    }
    Ok(())
}
