//! `eval-loss`: evaluate the decoupled objective on embeddings from a file
//! and print the per-term breakdown.

use std::path::PathBuf;

use crate::commands::{Ctx, OutputFormat};
use crate::error::CliError;
use crate::formats;
use unialign_core::geometry::{l2_normalize, MultimodalBatch};
use unialign_core::losses;

pub fn run(ctx: &Ctx, input: Option<PathBuf>, text: Vec<PathBuf>, anchor: Option<usize>) -> Result<(), CliError> {
    let raw = match (&input, text.is_empty()) {
        (Some(path), true) => formats::read_embeddings(path)?,
        (None, false) => formats::read_modalities(&text)?,
        (Some(_), false) => {
            return Err(CliError::Shape(
                "pass either --input or --text files, not both".into(),
            ))
        }
        (None, true) => {
            return Err(CliError::Shape(
                "no embeddings given: pass --input FILE.uaeb or --text FILE per modality".into(),
            ))
        }
    };
    if raw.len() < 2 {
        return Err(CliError::Shape(format!(
            "need at least 2 modalities, got {}",
            raw.len()
        )));
    }

    let modalities = raw
        .into_iter()
        .map(|b| {
            let id = b.modality_id;
            l2_normalize(b.into_mat(), id)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let anchor = anchor.unwrap_or(ctx.config.anchor);
    let batch = MultimodalBatch::new(modalities, anchor)?;

    let cfg = ctx.config.loss_config();
    let (value, _) = losses::total_loss(&batch, &cfg)?;

    match ctx.format {
        OutputFormat::Json => {
            let json = serde_json::json!({
                "total": value.total,
                "terms": value.terms,
            });
            println!("{}", serde_json::to_string_pretty(&json).unwrap());
        }
        OutputFormat::Csv => {
            for (name, v) in &value.terms {
                println!("term {name} = {v}");
            }
            println!("total = {}", value.total);
        }
    }
    Ok(())
}
