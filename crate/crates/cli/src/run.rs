//! `pelab run`: one solver run to snapshot files plus a manifest.

use std::path::Path;

use anyhow::anyhow;
use pelab::snapshot;
use pelab::solver::{prepare, run_prepared, RunConfig, SolverError};
use serde_json::json;

use crate::output::Emitter;
use crate::Failure;

pub fn load_config(path: &Path, seed: Option<u64>) -> Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(anyhow!("cannot read config {}: {e}", path.display())))?;
    let mut cfg = RunConfig::from_json(&text)
        .map_err(|e| Failure::Usage(anyhow!("{}: {e}", path.display())))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

pub fn solver_failure(e: SolverError) -> Failure {
    if e.is_domain_abort() {
        Failure::Domain(e.into())
    } else {
        Failure::Usage(e.into())
    }
}

pub fn cmd_run(config: &Path, out: &Path, seed: Option<u64>) -> Result<(), Failure> {
    let cfg = load_config(config, seed)?;
    let prepared = match prepare(&cfg) {
        Ok(p) => p,
        Err(e) if e.is_domain_abort() => {
            // the initial state itself is out of range: record the abort
            let mut em = Emitter::new(out).map_err(Failure::Usage)?;
            em.write("config.json", "config", cfg.to_json().as_bytes())
                .map_err(Failure::Usage)?;
            em.finish(
                "run",
                "aborted",
                &cfg.hash(),
                Some(cfg.seed),
                json!({ "error": e.to_string() }),
            )
            .map_err(Failure::Usage)?;
            return Err(solver_failure(e));
        }
        Err(e) => return Err(solver_failure(e)),
    };
    let mut em = Emitter::new(out).map_err(Failure::Usage)?;
    em.write("config.json", "config", cfg.to_json().as_bytes())
        .map_err(Failure::Usage)?;
    let every = cfg.snapshot_every;
    let mut write_err = None;
    let result = run_prepared(&prepared, |step, state| {
        if step % every == 0 && write_err.is_none() {
            let name = format!("snapshots/step_{step:08}.bin");
            let bytes = snapshot::encode(state).map_err(anyhow::Error::from);
            if let Err(e) = bytes.and_then(|b| em.write(&name, "snapshot", &b)) {
                write_err = Some(e);
            }
        }
    });
    if let Some(e) = write_err {
        return Err(Failure::Usage(e));
    }
    let meta = prepared.meta();
    let (status, error) = match &result {
        Ok(_) => ("ok".to_string(), None),
        Err(e) => ("aborted".to_string(), Some(e.to_string())),
    };
    em.finish(
        "run",
        &status,
        &meta.config_hash,
        Some(cfg.seed),
        json!({ "meta": meta, "error": error }),
    )
    .map_err(Failure::Usage)?;
    result.map(|_| ()).map_err(solver_failure)
}
