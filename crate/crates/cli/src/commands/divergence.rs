//! `divergence`: kernel plug-in divergence across two or more embedding
//! files (one modality per file).

use std::path::PathBuf;

use crate::commands::{Ctx, OutputFormat};
use crate::error::CliError;
use crate::formats;
use unialign_core::divergence::{holder_kde_anchored, holder_kde_symmetrized};

#[allow(clippy::too_many_arguments)]
pub fn run(
    ctx: &Ctx,
    files: Vec<PathBuf>,
    tau: Option<f64>,
    normalized: bool,
    symmetrize: bool,
    anchor: Option<usize>,
) -> Result<(), CliError> {
    if files.len() < 2 {
        return Err(CliError::Shape(format!(
            "need at least 2 embedding files, got {}",
            files.len()
        )));
    }
    let tau = tau.unwrap_or(ctx.config.divergence_tau);
    if tau <= 0.0 {
        return Err(CliError::Shape(format!("bandwidth must be positive, got {tau}")));
    }
    let normalized = normalized || ctx.config.divergence_normalized;
    let batches = formats::read_modalities(&files)?;

    let est = if symmetrize {
        holder_kde_symmetrized(&batches, tau, normalized)?
    } else {
        holder_kde_anchored(&batches, tau, normalized, anchor.unwrap_or(0))?
    };

    match ctx.format {
        OutputFormat::Json => {
            let json = serde_json::json!({
                "holder_divergence": est.value,
                "uniformity_term": est.uniformity_term,
                "alignment_term": est.alignment_term,
                "tau": est.tau,
                "normalized_kernel": est.normalized_kernel,
                "symmetrized": symmetrize,
                "modalities": batches.len(),
            });
            println!("{}", serde_json::to_string_pretty(&json).unwrap());
        }
        OutputFormat::Csv => {
            println!("holder_divergence = {}", est.value);
            println!("uniformity_term = {}", est.uniformity_term);
            println!("alignment_term = {}", est.alignment_term);
            println!("tau = {}", est.tau);
            println!("normalized_kernel = {}", est.normalized_kernel);
        }
    }
    Ok(())
}
