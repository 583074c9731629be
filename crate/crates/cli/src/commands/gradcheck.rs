//! `gradcheck`: finite-difference verification of every analytic gradient.
//! Exit 0 iff every loss stays under the 1e-4 gate.

use crate::commands::{Ctx, OutputFormat};
use crate::error::CliError;
use unialign_core::geometry::{l2_normalize, ModalityBatch, MultimodalBatch};
use unialign_core::linalg::Mat;
use unialign_core::rng::Rng;
use unialign_core::trainer;

const GATE: f64 = 1e-4;

fn random_batch(ctx: &Ctx) -> Result<MultimodalBatch, CliError> {
    let cfg = &ctx.config;
    let mods: Vec<ModalityBatch> = (0..cfg.gradcheck_modalities)
        .map(|m| {
            let mut rng = Rng::stream(ctx.seed, m as u64);
            let rows: Vec<Vec<f64>> = (0..cfg.gradcheck_batch)
                .map(|_| rng.unit_vector(cfg.gradcheck_dim))
                .collect();
            l2_normalize(Mat::from_rows(&rows), m as u32)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MultimodalBatch::new(mods, 0)?)
}

pub fn run(ctx: &Ctx, h_sweep: bool, corrupt_gradient: bool) -> Result<(), CliError> {
    let batch = random_batch(ctx)?;
    let loss_cfg = ctx.config.loss_config();

    if h_sweep {
        println!("h sweep (max relative error across losses):");
        for h in [1e-3, 1e-4, 1e-5] {
            let errs = trainer::gradcheck(&batch, &loss_cfg, h)?;
            let max = errs.values().cloned().fold(0.0f64, f64::max);
            println!("h={h:.0e} max_error={max:.3e}");
        }
    }

    let mut errs = trainer::gradcheck(&batch, &loss_cfg, ctx.config.gradcheck_h)?;
    if corrupt_gradient {
        // negative-control hook: report one gradient as deliberately wrong
        if let Some(e) = errs.get_mut("alignment") {
            *e += 1.0;
        }
        println!("note: alignment gradient deliberately corrupted (test hook)");
    }

    let mut failures = Vec::new();
    match ctx.format {
        OutputFormat::Json => {
            let json = serde_json::json!({ "h": ctx.config.gradcheck_h, "max_rel_error": errs });
            println!("{}", serde_json::to_string_pretty(&json).unwrap());
            for (name, err) in &errs {
                if *err >= GATE {
                    failures.push(name.clone());
                }
            }
        }
        OutputFormat::Csv => {
            println!("{:<22} {:>13}  status", "loss", "max_rel_error");
            for (name, err) in &errs {
                let ok = *err < GATE;
                println!("{name:<22} {err:>13.3e}  {}", if ok { "pass" } else { "FAIL" });
                if !ok {
                    failures.push(name.clone());
                }
            }
        }
    }

    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "gradient check failed for: {}",
            failures.join(", ")
        )))
    }
}
