//! `pelab entropy`: certified window, γ table and the coupled decomposition
//! of one potential.

use std::path::Path;

use anyhow::anyhow;
use pelab::potential::{build_entropy, certify_window, coupled_decomposition, PotentialSpec};
use serde_json::json;

use crate::output::{table_csv, Emitter};
use crate::Failure;

/// Rows of the exported tables.
pub const TABLE_ROWS: usize = 1000;

/// `id` is a built-in id or a path to a JSON potential description.
pub fn resolve(id: &str, r_max: f64) -> Result<PotentialSpec, Failure> {
    let path = Path::new(id);
    if path.exists() {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(anyhow!("cannot read {id}: {e}")))?;
        return serde_json::from_str(&text).map_err(|e| Failure::Usage(anyhow!("{id}: {e}")));
    }
    PotentialSpec::from_id(id, r_max).map_err(|e| Failure::Usage(e.into()))
}

fn domain<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Domain(e.into())
}

pub fn cmd_entropy(id: &str, r_max: f64, out: &Path) -> Result<(), Failure> {
    let spec = resolve(id, r_max)?;
    let p = spec.build().map_err(domain)?;
    let window = certify_window(&p).map_err(domain)?;
    let e = build_entropy(&p).map_err(domain)?;
    let cc = coupled_decomposition(&p).map_err(domain)?;
    let r_max = p.r_max();
    let hash = pelab::solver::content_hash(&serde_json::to_vec(&spec).expect("spec serializes"));
    let comment = format!("# potential={},config_hash={hash}\n", p.id());

    let mut gamma_rows = Vec::with_capacity(TABLE_ROWS + 1);
    let mut worst: f64 = 0.0;
    for k in 0..=TABLE_ROWS {
        let z = r_max * k as f64 / TABLE_ROWS as f64;
        let w = p.phi(z);
        let g = e.gamma(w).map_err(domain)?;
        let target = 0.5 * p.phi1(z).powi(2);
        let residual = (g - target).abs();
        worst = worst.max(residual);
        gamma_rows.push(
            [z, w, g, target, residual]
                .iter()
                .map(f64::to_string)
                .collect(),
        );
    }

    let mut dec_rows = Vec::with_capacity(TABLE_ROWS + 1);
    let mut violation: Option<(f64, f64)> = None;
    for k in 0..=TABLE_ROWS {
        let r = r_max * k as f64 / TABLE_ROWS as f64;
        let (radial, tangential) = if cc.is_trivial() {
            (0.0, 0.0)
        } else {
            cc.h_hess_eigen(r)
        };
        let least = radial.min(tangential);
        if least < -1e-12 && violation.is_none() {
            violation = Some((r, least));
        }
        let sign = if least > 0.0 {
            "+"
        } else if least < 0.0 {
            "-"
        } else {
            "0"
        };
        let mut row: Vec<String> = [r, cc.a_of_r(r), cc.h_of_r(r), radial, tangential]
            .iter()
            .map(f64::to_string)
            .collect();
        row.push(sign.to_string());
        dec_rows.push(row);
    }
    let convex = if cc.is_trivial() {
        "trivially".to_string()
    } else if let Some((r, v)) = violation {
        format!("no (smallest H'' eigenvalue {v:e} at r = {r})")
    } else {
        "yes".to_string()
    };

    let mut em = Emitter::new(out).map_err(Failure::Usage)?;
    let gamma = table_csv(
        &comment,
        &["z", "phi", "gamma", "half_dphi_sq", "identity_residual"],
        &gamma_rows,
    )
    .map_err(Failure::Usage)?;
    em.write("gamma.csv", "table", &gamma)
        .map_err(Failure::Usage)?;
    let dec = table_csv(
        &comment,
        &["r", "a", "H", "H_radial", "H_tangential", "H_second_sign"],
        &dec_rows,
    )
    .map_err(Failure::Usage)?;
    em.write("decomposition.csv", "table", &dec)
        .map_err(Failure::Usage)?;
    let details = json!({
        "potential": p.id(),
        "r_max": r_max,
        "lambda": window.lambda,
        "Lambda": window.big_lambda,
        "identity_tol": e.tol,
        "identity_max_table": worst,
        "H_trivial": cc.is_trivial(),
        "H_convex": convex,
        "effective_lambda": cc.bounds.effective_lambda,
    });
    em.finish("entropy", "ok", &hash, None, details)
        .map_err(Failure::Usage)?;

    println!("potential: {} (r_max = {r_max})", p.id());
    println!(
        "window: lambda = {}, Lambda = {}",
        window.lambda, window.big_lambda
    );
    println!(
        "identity residual: {:e} (certification), {worst:e} (table)",
        e.tol
    );
    println!("H trivial: {}", cc.is_trivial());
    println!("H convex: {convex}");
    Ok(())
}
