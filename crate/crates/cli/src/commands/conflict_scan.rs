//! `conflict-scan`: Monte-Carlo tables of the directional conflict (mean
//! zeta vs modality count) and pull cancellation (mean chi vs its lower
//! bound). Rows are independent and run on up to UNIALIGN_THREADS workers;
//! per-row generator streams make the output identical at any thread count.

use crate::commands::{parallel_map_indexed, Ctx, OutputFormat};
use crate::error::CliError;
use crate::manifest::{unix_now, RunManifest};
use unialign_core::diagnostics::{
    simulate_conflict_accumulation, verify_pull_cancellation, ConflictCoefficient,
    SystematicConflictModel,
};

pub const CSV_HEADER: &str = "modalities,zeta_mean,chi_mean,chi_bound,zeta_se,chi_se,empirical_mu";

struct Row {
    modalities: usize,
    zeta_mean: f64,
    zeta_se: f64,
    chi_mean: f64,
    chi_se: f64,
    bound: f64,
    empirical_mu: f64,
}

pub fn run(ctx: &Ctx) -> Result<(), CliError> {
    let started = unix_now();
    let cfg = &ctx.config;
    let model = SystematicConflictModel {
        dim: cfg.conflict_dim,
        c0: cfg.conflict_c0,
        coefficient: ConflictCoefficient::Constant,
        residual_std: cfg.conflict_sigma,
        seed: ctx.seed,
    };

    let m_list = cfg.conflict_m_list.clone();
    let rows: Vec<Result<Row, CliError>> = parallel_map_indexed(m_list.len(), ctx.threads, |i| {
        let m = m_list[i];
        let zeta = simulate_conflict_accumulation(&model, &[m], cfg.conflict_trials)?;
        let chi = verify_pull_cancellation(
            cfg.cancellation_dim,
            &[m],
            cfg.conflict_mu_bar,
            cfg.cancellation_trials,
            ctx.seed,
        )?;
        Ok(Row {
            modalities: m,
            zeta_mean: zeta[0].mean_zeta,
            zeta_se: zeta[0].std_error,
            chi_mean: chi[0].mean_chi,
            chi_se: chi[0].std_error,
            bound: chi[0].bound,
            empirical_mu: chi[0].empirical_mu,
        })
    });

    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    let mut json_rows = Vec::new();
    for row in rows {
        let r = row?;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.modalities, r.zeta_mean, r.chi_mean, r.bound, r.zeta_se, r.chi_se, r.empirical_mu
        ));
        json_rows.push(serde_json::json!({
            "modalities": r.modalities,
            "zeta_mean": r.zeta_mean,
            "chi_mean": r.chi_mean,
            "chi_bound": r.bound,
            "zeta_se": r.zeta_se,
            "chi_se": r.chi_se,
            "empirical_mu": r.empirical_mu,
        }));
    }

    match ctx.format {
        OutputFormat::Csv => print!("{csv}"),
        OutputFormat::Json => {
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({ "rows": json_rows })).unwrap()
            );
        }
    }

    if ctx.out_dir.is_some() {
        let dir = ctx.ensure_out_dir()?;
        let csv_path = dir.join("conflict_scan.csv");
        std::fs::write(&csv_path, &csv)
            .map_err(|e| CliError::Parse(format!("cannot write {}: {e}", csv_path.display())))?;
        let mut manifest = RunManifest::new(&cfg.canonical_string(ctx.seed), ctx.seed, started);
        manifest.outputs.push(csv_path.display().to_string());
        manifest.write(&dir.join("manifest.json"))?;
    }
    Ok(())
}
