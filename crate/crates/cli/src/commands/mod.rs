pub mod conflict_scan;
pub mod divergence;
pub mod eval_loss;
pub mod gradcheck;
pub mod train;

use std::path::PathBuf;

use crate::config::Config;
use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Resolved global options shared by every subcommand.
pub struct Ctx {
    pub seed: u64,
    pub config: Config,
    pub out_dir: Option<PathBuf>,
    pub plot: bool,
    pub format: OutputFormat,
    pub threads: usize,
}

impl Ctx {
    pub fn ensure_out_dir(&self) -> Result<PathBuf, CliError> {
        let dir = self
            .out_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("unialign-out"));
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::Parse(format!("cannot create {}: {e}", dir.display())))?;
        Ok(dir)
    }
}

/// Runs `f` over `0..n` on up to `threads` workers (round-robin assignment)
/// and returns results in index order, so the output is independent of
/// scheduling.
pub fn parallel_map_indexed<R, F>(n: usize, threads: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync,
{
    let workers = threads.max(1).min(n.max(1));
    if workers <= 1 {
        return (0..n).map(f).collect();
    }
    let mut chunks: Vec<Vec<(usize, R)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let f = &f;
                scope.spawn(move || {
                    (w..n)
                        .step_by(workers)
                        .map(|i| (i, f(i)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut out: Vec<Option<R>> = (0..n).map(|_| None).collect();
    for chunk in chunks.drain(..) {
        for (i, r) in chunk {
            out[i] = Some(r);
        }
    }
    out.into_iter().map(|r| r.unwrap()).collect()
}
