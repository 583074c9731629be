//! `train`: run a full synthetic-data experiment and write the trajectory
//! CSV, a summary JSON, an optional SVG divergence plot, and the run
//! manifest.
//!
//! Output bytes are deterministic under a fixed seed: the `seconds` column
//! is written as `0.000` unless `--timing` is passed (wall-clock timing is
//! the one nondeterministic quantity, and timestamps belong to the
//! manifest).

use crate::commands::{Ctx, OutputFormat};
use crate::error::CliError;
use crate::formats;
use crate::manifest::{unix_now, RunManifest};
use crate::plot;
use unialign_core::trainer::{self, TrajectoryRecord};

pub const CSV_HEADER: &str = "epoch,loss_total,loss_uniformity,loss_align,loss_tuple_uniformity,\
loss_volume,zeta_mean,chi_mean,holder_div,seconds";

fn csv_row(r: &TrajectoryRecord, timing: bool) -> String {
    let seconds = if timing {
        format!("{:.3}", r.seconds)
    } else {
        "0.000".to_string()
    };
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        r.epoch,
        r.loss_total,
        r.loss_uniformity,
        r.loss_align,
        r.loss_tuple_uniformity,
        r.loss_volume,
        r.zeta_mean,
        r.chi_mean,
        r.holder_div,
        seconds
    )
}

pub fn run(ctx: &Ctx, timing: bool, save_embeddings: bool) -> Result<(), CliError> {
    let started = unix_now();
    let spec = ctx.config.synthetic_spec(ctx.seed);
    let opt = ctx.config.optimizer_spec();

    let (records, final_state) = trainer::run_with_state(&spec, &opt)?;

    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for r in &records {
        csv.push_str(&csv_row(r, timing));
        csv.push('\n');
    }

    let initial = records.first().map(|r| r.holder_div).unwrap_or(0.0);
    let fin = records.last().map(|r| r.holder_div).unwrap_or(0.0);
    let ratio = if initial != 0.0 { Some(fin / initial) } else { None };
    let objective = match opt.objective {
        trainer::Objective::InfoNce => "infonce",
        trainer::Objective::UniAlign => "unialign",
        trainer::Objective::UniAlignPlus => "unialign_plus",
    };
    let summary = serde_json::json!({
        "objective": objective,
        "seed": ctx.seed,
        "epochs": opt.epochs,
        "initial_holder_div": initial,
        "final_holder_div": fin,
        "divergence_ratio": ratio,
    });
    let summary_text = serde_json::to_string_pretty(&summary).unwrap() + "\n";

    let dir = ctx.ensure_out_dir()?;
    let mut manifest = RunManifest::new(&ctx.config.canonical_string(ctx.seed), ctx.seed, started);

    let csv_path = dir.join("trajectory.csv");
    std::fs::write(&csv_path, &csv)
        .map_err(|e| CliError::Parse(format!("cannot write {}: {e}", csv_path.display())))?;
    manifest.outputs.push(csv_path.display().to_string());

    let summary_path = dir.join("summary.json");
    std::fs::write(&summary_path, &summary_text)
        .map_err(|e| CliError::Parse(format!("cannot write {}: {e}", summary_path.display())))?;
    manifest.outputs.push(summary_path.display().to_string());

    if ctx.plot {
        let points: Vec<(f64, f64)> = records
            .iter()
            .map(|r| (r.epoch as f64, r.holder_div))
            .collect();
        let svg = plot::line_chart(&points, "holder divergence", "epoch", "holder_div");
        let svg_path = dir.join("plot.svg");
        std::fs::write(&svg_path, svg)
            .map_err(|e| CliError::Parse(format!("cannot write {}: {e}", svg_path.display())))?;
        manifest.outputs.push(svg_path.display().to_string());
    }

    if save_embeddings {
        let emb_path = dir.join("embeddings.uaeb");
        formats::write_embeddings(&emb_path, final_state.modalities())?;
        manifest.outputs.push(emb_path.display().to_string());
    }

    manifest.write(&dir.join("manifest.json"))?;

    match ctx.format {
        OutputFormat::Json => print!("{summary_text}"),
        OutputFormat::Csv => {
            println!("wrote {}", csv_path.display());
            println!("initial_holder_div = {initial}");
            println!("final_holder_div = {fin}");
            match ratio {
                Some(r) => println!("divergence_ratio = {r}"),
                None => println!("divergence_ratio = undefined (initial divergence is 0)"),
            }
        }
    }
    Ok(())
}
