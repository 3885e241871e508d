//! `pelab verify`: runs a suite of checks and writes one report per check.

use std::collections::BTreeSet;
use std::path::Path;

use anyhow::anyhow;
use pelab::diagnostics::{CheckReport, Witness};
use pelab::solver::content_hash;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::checks::{execute, CheckOutcome, CheckSpec};
use crate::output::{table_csv, Emitter};
use crate::Failure;

const PAPER_CORE: &str = include_str!("../suites/paper-core.json");
const NEGATIVE_CONTROL: &str = include_str!("../suites/negative-control.json");

/// Names accepted by `verify` in place of a path.
pub const BUNDLED: [&str; 2] = ["paper-core", "negative-control"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSpec {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
}

impl SuiteSpec {
    pub fn validate(&self) -> anyhow::Result<()> {
        let mut seen = BTreeSet::new();
        for c in &self.checks {
            if c.name.is_empty() || c.name.contains(['/', '\\']) {
                return Err(anyhow!("invalid check name {:?}", c.name));
            }
            if !seen.insert(&c.name) {
                return Err(anyhow!("duplicate check name {:?}", c.name));
            }
        }
        Ok(())
    }
}

pub fn bundled_text(name: &str) -> Option<&'static str> {
    match name {
        "paper-core" => Some(PAPER_CORE),
        "negative-control" => Some(NEGATIVE_CONTROL),
        _ => None,
    }
}

/// Resolves `suite` as a file path, falling back to the bundled suites.
pub fn load_suite(suite: &str) -> Result<(SuiteSpec, String), Failure> {
    let path = Path::new(suite);
    let text = if path.exists() {
        std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(anyhow!("cannot read suite {suite}: {e}")))?
    } else if let Some(t) = bundled_text(suite) {
        t.to_string()
    } else {
        return Err(Failure::Usage(anyhow!(
            "suite {suite} is neither a file nor a bundled suite ({})",
            BUNDLED.join(", ")
        )));
    };
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Failure::Usage(anyhow!("suite {suite}: {e}")))?;
    let hash = content_hash(&serde_json::to_vec(&value).expect("json value serializes"));
    let spec: SuiteSpec =
        serde_json::from_value(value).map_err(|e| Failure::Usage(anyhow!("suite {suite}: {e}")))?;
    spec.validate().map_err(Failure::Usage)?;
    Ok((spec, hash))
}

fn crashed(name: &str, err: &anyhow::Error) -> CheckOutcome {
    let mut r = CheckReport::new(name, f64::NAN, "");
    r.fail(Witness {
        description: format!("check did not complete: {err:#}"),
        value: f64::NAN,
        bound: f64::NAN,
        ..Default::default()
    });
    CheckOutcome {
        primary: r,
        parts: Vec::new(),
    }
}

pub fn cmd_verify(suite: &str, out: &Path, seed: Option<u64>) -> Result<(), Failure> {
    let (spec, hash) = load_suite(suite)?;
    let sample_seed = seed.unwrap_or(spec.seed);
    let outcomes: Vec<CheckOutcome> = spec
        .checks
        .par_iter()
        .map(|c| execute(c, seed, sample_seed).unwrap_or_else(|e| crashed(&c.name, &e)))
        .collect();

    let mut em = Emitter::new(out).map_err(Failure::Usage)?;
    let mut rows = Vec::new();
    let mut all_pass = true;
    for (c, o) in spec.checks.iter().zip(&outcomes) {
        let passed = o.primary.passed && o.parts.iter().all(|(_, r)| r.passed);
        all_pass &= passed;
        let mut primary = o.primary.clone();
        if passed != primary.passed {
            primary.passed = false;
            primary.note("a constituent report failed");
        }
        em.write_report(&c.name, &primary).map_err(Failure::Usage)?;
        for (tag, r) in &o.parts {
            em.write_report(&format!("{}.{tag}", c.name), r)
                .map_err(Failure::Usage)?;
        }
        let witness = primary
            .witness
            .as_ref()
            .map(|w| w.description.clone())
            .unwrap_or_default();
        rows.push(vec![
            c.name.clone(),
            passed.to_string(),
            primary.tolerance.to_string(),
            primary.config_hash.clone(),
            witness,
        ]);
        eprintln!("[{}] {}", c.name, primary.summary());
    }
    let name = if spec.name.is_empty() {
        suite
    } else {
        &spec.name
    };
    let csv = table_csv(
        &format!("# suite={name},config_hash={hash}\n"),
        &["check", "passed", "tolerance", "config_hash", "witness"],
        &rows,
    )
    .map_err(Failure::Usage)?;
    em.write("summary.csv", "summary", &csv)
        .map_err(Failure::Usage)?;
    let status = if all_pass { "pass" } else { "fail" };
    em.finish(
        "verify",
        status,
        &hash,
        Some(sample_seed),
        json!({ "suite": name, "checks": spec.checks.len() }),
    )
    .map_err(Failure::Usage)?;
    if all_pass {
        Ok(())
    } else {
        let failed: Vec<&str> = spec
            .checks
            .iter()
            .zip(&rows)
            .filter(|(_, r)| r[1] == "false")
            .map(|(c, _)| c.name.as_str())
            .collect();
        Err(Failure::Checks(format!(
            "failed checks: {}",
            failed.join(", ")
        )))
    }
}
