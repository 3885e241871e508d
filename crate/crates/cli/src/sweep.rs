//! `pelab sweep`: cross product of resolutions, potentials and seeds.

use std::collections::BTreeSet;
use std::path::Path;

use anyhow::{anyhow, Result};
use pelab::diagnostics::{diffusion_residual, gradient_fields, morrey_profile, ResidualField};
use pelab::grid::{FieldState, Trajectory};
use pelab::potential::{build_entropy, PotentialSpec};
use pelab::snapshot;
use pelab::solver::{content_hash, prepare, run_prepared, ModelKind, RunConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::output::{table_csv, Emitter};
use crate::Failure;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axes {
    #[serde(default)]
    pub resolution: Vec<usize>,
    #[serde(default)]
    pub potential: Vec<String>,
    #[serde(default)]
    pub seed: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: RunConfig,
    #[serde(default)]
    pub axes: Axes,
}

pub struct Cell {
    pub label: String,
    pub config: RunConfig,
}

pub const COLUMNS: [&str; 12] = [
    "label",
    "size",
    "potential",
    "seed",
    "status",
    "t_end",
    "terminal_sup",
    "residual_max_positive",
    "residual_max_excess",
    "morrey_16h",
    "morrey_8h",
    "morrey_4h",
];

pub fn cells(spec: &SweepSpec) -> Result<Vec<Cell>> {
    let base = &spec.base;
    let sizes = if spec.axes.resolution.is_empty() {
        vec![base.grid.size]
    } else {
        spec.axes.resolution.clone()
    };
    let potentials = if spec.axes.potential.is_empty() {
        vec![None]
    } else {
        spec.axes.potential.iter().map(Some).collect()
    };
    let seeds = if spec.axes.seed.is_empty() {
        vec![base.seed]
    } else {
        spec.axes.seed.clone()
    };
    let mut out = Vec::new();
    let mut labels = BTreeSet::new();
    for &size in &sizes {
        for pot in &potentials {
            for &seed in &seeds {
                let mut cfg = base.clone();
                cfg.grid.size = size;
                cfg.seed = seed;
                if let Some(id) = pot {
                    cfg.potential = PotentialSpec::from_id(id, base.potential.r_max())?;
                }
                let pot_label = pot.map(|s| s.as_str()).unwrap_or("base");
                let label = format!("n{size}-{pot_label}-s{seed}");
                if !labels.insert(label.clone()) {
                    return Err(anyhow!("duplicate sweep cell {label}"));
                }
                cfg.validate()?;
                out.push(Cell { label, config: cfg });
            }
        }
    }
    Ok(out)
}

#[derive(Default)]
struct Residuals {
    max_positive: f64,
    max_excess: f64,
}

impl Residuals {
    fn add(&mut self, f: &ResidualField) {
        for &i in &f.points {
            let r = f.residual[i];
            self.max_positive = self.max_positive.max(r);
            self.max_excess = self.max_excess.max(r - f.floor[i]);
        }
    }
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn morrey_row(traj: &Trajectory) -> Vec<Option<f64>> {
    let grid = traj.grid();
    let h = grid.h();
    let center = grid.index(&grid.sizes().iter().map(|s| s / 2).collect::<Vec<_>>());
    let t0 = traj.snapshots.last().unwrap().t();
    let radii = [16.0 * h, 8.0 * h, 4.0 * h];
    let profile = gradient_fields(traj)
        .ok()
        .and_then(|g| morrey_profile(traj, center, t0, &radii, &g, grid.dim() as f64).ok());
    match profile {
        Some(p) => p.values.into_iter().map(Some).collect(),
        None => vec![None; 3],
    }
}

/// Runs one cell into `dir`; returns its CSV row.
fn run_cell(cell: &Cell, dir: &Path) -> Result<Vec<String>> {
    let cfg = &cell.config;
    let mut em = Emitter::new(dir)?;
    em.write("config.json", "config", cfg.to_json().as_bytes())?;
    let mut row = vec![
        cell.label.clone(),
        cfg.grid.size.to_string(),
        cfg.potential
            .build()
            .map(|p| p.id().to_string())
            .unwrap_or_default(),
        cfg.seed.to_string(),
    ];
    let prepared = match prepare(cfg) {
        Ok(p) => p,
        Err(e) => {
            row.push(format!("error: {e}"));
            row.resize(COLUMNS.len(), String::new());
            em.finish(
                "sweep-cell",
                "error",
                &cfg.hash(),
                Some(cfg.seed),
                json!({ "error": e.to_string() }),
            )?;
            return Ok(row);
        }
    };
    let entropy = match cfg.model {
        ModelKind::Diffusion => build_entropy(&prepared.potential).ok(),
        ModelKind::Coupled => None,
    };
    let lambda = prepared.window.lambda;
    let mut residuals = Residuals::default();
    let mut prev: Option<FieldState> = None;
    let mut last: Option<FieldState> = None;
    let mut residual_error = None;
    let result = run_prepared(&prepared, |_, state| {
        if let (Some(e), Some(p)) = (&entropy, &prev) {
            match diffusion_residual(p, state, &prepared.potential, e, lambda) {
                Ok(f) => residuals.add(&f),
                Err(err) => residual_error = Some(err.to_string()),
            }
        }
        prev = Some(state.clone());
        last = Some(state.clone());
    });
    let (status, details) = match &result {
        Ok(_) => ("ok".to_string(), json!({ "meta": prepared.meta() })),
        Err(e) => (
            format!("aborted: {e}"),
            json!({ "meta": prepared.meta(), "error": e.to_string() }),
        ),
    };
    if let Some(state) = &last {
        em.write("terminal.bin", "snapshot", &snapshot::encode(state)?)?;
    }
    row.push(status.clone());
    row.push(fmt(last.as_ref().map(|s| s.t())));
    row.push(fmt(last.as_ref().map(|s| s.sup_norm().0)));
    let have_residuals = entropy.is_some() && residual_error.is_none() && result.is_ok();
    row.push(fmt(
        have_residuals.then_some(residuals.max_positive.max(0.0))
    ));
    row.push(fmt(have_residuals.then_some(residuals.max_excess.max(0.0))));
    match &result {
        Ok(traj) => row.extend(morrey_row(traj).into_iter().map(fmt)),
        Err(_) => row.extend(vec![String::new(); 3]),
    }
    let manifest_status = if result.is_ok() { "ok" } else { "aborted" };
    em.finish(
        "sweep-cell",
        manifest_status,
        &cfg.hash(),
        Some(cfg.seed),
        details,
    )?;
    Ok(row)
}

pub fn cmd_sweep(path: &Path, out: &Path, seed: Option<u64>) -> Result<(), Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(anyhow!("cannot read sweep {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Failure::Usage(anyhow!("{}: {e}", path.display())))?;
    let hash = content_hash(&serde_json::to_vec(&value).expect("json value serializes"));
    let mut spec: SweepSpec = serde_json::from_value(value)
        .map_err(|e| Failure::Usage(anyhow!("{}: {e}", path.display())))?;
    if let Some(s) = seed {
        spec.base.seed = s;
        spec.axes.seed.clear();
    }
    let cells = cells(&spec).map_err(Failure::Usage)?;
    let mut em = Emitter::new(out).map_err(Failure::Usage)?;
    let rows: Vec<Vec<String>> = cells
        .par_iter()
        .map(|c| {
            run_cell(c, &out.join(&c.label)).unwrap_or_else(|e| {
                let mut row = vec![
                    c.label.clone(),
                    c.config.grid.size.to_string(),
                    String::new(),
                    c.config.seed.to_string(),
                    format!("error: {e:#}"),
                ];
                row.resize(COLUMNS.len(), String::new());
                row
            })
        })
        .collect();
    for c in &cells {
        let rel = format!("{}/manifest.json", c.label);
        let bytes = std::fs::read(out.join(&rel)).unwrap_or_default();
        if !bytes.is_empty() {
            em.register(&rel, "cell-manifest", &bytes);
        }
    }
    let csv = table_csv(&format!("# sweep,config_hash={hash}\n"), &COLUMNS, &rows)
        .map_err(Failure::Usage)?;
    em.write("sweep.csv", "summary", &csv)
        .map_err(Failure::Usage)?;
    let failed = rows.iter().filter(|r| r[4] != "ok").count();
    em.finish(
        "sweep",
        if failed == 0 { "ok" } else { "partial" },
        &hash,
        seed,
        json!({ "cells": cells.len(), "failed": failed }),
    )
    .map_err(Failure::Usage)?;
    Ok(())
}
