//! Conflict analysis of the contrastive gradient.
//!
//! The InfoNCE gradient on an anchor embedding splits into an attraction
//! force `V_a` (sum of matched positives) and a repulsion force `Phi_a`
//! (softmax-weighted mixture over the batch). Two scalar metrics quantify
//! how those forces fight each other:
//!
//! - `zeta`: cosine between attraction and repulsion — near 1 means the
//!   repulsion cancels the attraction and the anchor barely moves;
//! - `chi`: fraction of the attraction magnitude lost to non-collinear
//!   positive pulls — 0 when all positives agree, approaching 1 as they
//!   cancel.
//!
//! Monte-Carlo simulations validate how both metrics scale with the number
//! of modalities under a systematic-conflict model and a shared-latent
//! sampler with calibrated pairwise alignment.

use crate::geometry::MultimodalBatch;
use crate::linalg;
use crate::losses::{LossConfig, LossError};
use crate::rng::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("cosine undefined: norms {v_norm:.3e} and {phi_norm:.3e}")]
    UndefinedCosine { v_norm: f64, phi_norm: f64 },
    #[error("invalid weights: {reason}")]
    InvalidWeights { reason: String },
    #[error("sampler calibration failed: target mean alignment {target}, achieved {achieved}")]
    CalibrationFailure { target: f64, achieved: f64 },
    #[error("domain error: {reason}")]
    DomainError { reason: String },
    #[error(transparent)]
    Loss(#[from] LossError),
}

/// Attraction/repulsion split of the InfoNCE gradient on anchor sample `i`:
///
/// `V_a = sum_{n != a} (w_an / tau) z_i^(n)` and
/// `Phi_a = sum_{n != a} (w_an / tau) sum_k p_ik^(an) z_k^(n)`.
///
/// `-V_a + Phi_a` equals the analytic InfoNCE gradient restricted to the
/// anchor's outgoing pairs (before batch averaging).
pub fn decompose_gradient(
    batch: &MultimodalBatch,
    cfg: &LossConfig,
    sample: usize,
) -> Result<(Vec<f64>, Vec<f64>), DiagnosticsError> {
    let m_count = batch.num_modalities();
    let b = batch.batch_size();
    let d = batch.dim();
    let a = batch.anchor();
    let (w, _) = cfg.resolve_infonce_weights(m_count)?;
    let tau = cfg.kernel.tau;

    let anchor_row = batch.modality(a).row(sample);
    let mut attraction = vec![0.0f64; d];
    let mut repulsion = vec![0.0f64; d];
    let mut logits = vec![0.0f64; b];
    for n in 0..m_count {
        if n == a {
            continue;
        }
        let wn = w.get(a, n);
        if wn == 0.0 {
            continue;
        }
        let zn = batch.modality(n);
        linalg::axpy(&mut attraction, wn / tau, zn.row(sample));

        // softmax over the batch of modality n, stabilized by max subtraction
        let mut max = f64::NEG_INFINITY;
        for (k, l) in logits.iter_mut().enumerate() {
            *l = linalg::dot(anchor_row, zn.row(k)) / tau;
            max = max.max(*l);
        }
        let mut z = 0.0;
        for l in logits.iter_mut() {
            *l = (*l - max).exp();
            z += *l;
        }
        for (k, l) in logits.iter().enumerate() {
            linalg::axpy(&mut repulsion, wn / tau * (l / z), zn.row(k));
        }
    }
    Ok((attraction, repulsion))
}

/// Cosine between the attraction and repulsion forces, in [-1, 1].
pub fn zeta(attraction: &[f64], repulsion: &[f64]) -> Result<f64, DiagnosticsError> {
    let nv = linalg::norm(attraction);
    let np = linalg::norm(repulsion);
    if nv <= 1e-12 || np <= 1e-12 {
        return Err(DiagnosticsError::UndefinedCosine {
            v_norm: nv,
            phi_norm: np,
        });
    }
    Ok((linalg::dot(attraction, repulsion) / (nv * np)).clamp(-1.0, 1.0))
}

/// Fractional shrinkage of the attraction force caused by non-collinear
/// positive pulls: `1 - ||V_a|| / sum_{n != a} (w_an / tau)`. In [0, 1] for
/// unit-norm embeddings; 0 iff all positives share one direction.
pub fn chi(
    batch: &MultimodalBatch,
    cfg: &LossConfig,
    sample: usize,
) -> Result<f64, DiagnosticsError> {
    let m_count = batch.num_modalities();
    let a = batch.anchor();
    let (w, _) = cfg.resolve_infonce_weights(m_count)?;
    let tau = cfg.kernel.tau;
    let denom: f64 = (0..m_count)
        .filter(|n| *n != a)
        .map(|n| w.get(a, n) / tau)
        .sum();
    if denom <= 0.0 {
        return Err(DiagnosticsError::InvalidWeights {
            reason: "anchor has zero total pair weight".to_string(),
        });
    }
    let (attraction, _) = decompose_gradient(batch, cfg, sample)?;
    Ok(1.0 - linalg::norm(&attraction) / denom)
}

/// Per-sample conflict forces and metrics for one batch.
#[derive(Clone, Debug)]
pub struct ConflictSample {
    pub attraction: Vec<f64>,
    pub repulsion: Vec<f64>,
    /// None when either force has norm below 1e-12.
    pub zeta: Option<f64>,
    pub chi: f64,
}

/// Batch-level conflict report. Means are taken over the samples where the
/// metric is defined; a batch with no defined cosine reports 0.
#[derive(Clone, Debug)]
pub struct ConflictReport {
    pub samples: Vec<ConflictSample>,
    pub zeta_mean: f64,
    pub chi_mean: f64,
}

impl ConflictReport {
    pub fn compute(batch: &MultimodalBatch, cfg: &LossConfig) -> Result<Self, DiagnosticsError> {
        let b = batch.batch_size();
        let mut samples = Vec::with_capacity(b);
        let mut zeta_sum = 0.0;
        let mut zeta_count = 0usize;
        let mut chi_sum = 0.0;
        for i in 0..b {
            let (attraction, repulsion) = decompose_gradient(batch, cfg, i)?;
            let z = zeta(&attraction, &repulsion).ok();
            if let Some(v) = z {
                zeta_sum += v;
                zeta_count += 1;
            }
            let c = chi(batch, cfg, i)?;
            chi_sum += c;
            samples.push(ConflictSample {
                attraction,
                repulsion,
                zeta: z,
                chi: c,
            });
        }
        Ok(ConflictReport {
            samples,
            zeta_mean: if zeta_count > 0 {
                zeta_sum / zeta_count as f64
            } else {
                0.0
            },
            chi_mean: chi_sum / b as f64,
        })
    }
}

/// How each per-modality repulsion component's systematic coefficient is
/// drawn. Every rule keeps `c_n >= c0`.
#[derive(Clone, Copy, Debug)]
pub enum ConflictCoefficient {
    /// `c_n = c0` for every modality.
    Constant,
    /// `c_n = c0 + width * U[0, 1)`.
    UniformExcess { width: f64 },
}

/// Generative model for the directional-conflict simulation: each repulsion
/// component is a systematic multiple of the attraction direction plus an
/// isotropic Gaussian residual.
#[derive(Clone, Debug)]
pub struct SystematicConflictModel {
    pub dim: usize,
    /// Minimum systematic conflict per modality; must be positive.
    pub c0: f64,
    pub coefficient: ConflictCoefficient,
    /// Residual standard deviation per coordinate; nonnegative.
    pub residual_std: f64,
    pub seed: u64,
}

impl SystematicConflictModel {
    pub fn validate(&self) -> Result<(), DiagnosticsError> {
        if self.c0 <= 0.0 {
            return Err(DiagnosticsError::DomainError {
                reason: "c0 must be positive".to_string(),
            });
        }
        if self.residual_std < 0.0 {
            return Err(DiagnosticsError::DomainError {
                reason: "residual std must be nonnegative".to_string(),
            });
        }
        if self.dim < 2 {
            return Err(DiagnosticsError::DomainError {
                reason: "dim must be at least 2".to_string(),
            });
        }
        Ok(())
    }
}

/// One row of a conflict-accumulation scan.
#[derive(Clone, Copy, Debug)]
pub struct ZetaTrendRow {
    pub modalities: usize,
    pub mean_zeta: f64,
    pub std_error: f64,
}

/// Monte-Carlo estimate of the mean directional conflict `zeta` as the
/// modality count grows.
///
/// For each M, every trial draws a unit attraction direction, M-1 repulsion
/// components `c_n v + eps_n` with isotropic Gaussian residuals, and
/// measures the cosine between the attraction and the summed repulsion.
/// Each trial uses its own stream of the seeded generator, so results are
/// independent of evaluation order.
pub fn simulate_conflict_accumulation(
    model: &SystematicConflictModel,
    m_list: &[usize],
    trials: usize,
) -> Result<Vec<ZetaTrendRow>, DiagnosticsError> {
    model.validate()?;
    if trials == 0 {
        return Err(DiagnosticsError::DomainError {
            reason: "need at least one trial".to_string(),
        });
    }
    let mut rows = Vec::with_capacity(m_list.len());
    for &m in m_list {
        if m < 2 {
            return Err(DiagnosticsError::DomainError {
                reason: format!("modality count {m} must be at least 2"),
            });
        }
        let n = m - 1;
        let mut sum = 0.0f64;
        let mut sum_sq = 0.0f64;
        for trial in 0..trials {
            // streams keyed by (seed, M, trial): rows are reproducible no
            // matter how the scan is split up or scheduled
            let mut rng = Rng::stream(model.seed, ((m as u64) << 40) ^ trial as u64);
            let direction = rng.unit_vector(model.dim);
            let mut systematic = 0.0f64;
            let mut residual = vec![0.0f64; model.dim];
            for _ in 0..n {
                let c = match model.coefficient {
                    ConflictCoefficient::Constant => model.c0,
                    ConflictCoefficient::UniformExcess { width } => {
                        model.c0 + width * rng.uniform()
                    }
                };
                systematic += c;
                if model.residual_std > 0.0 {
                    for r in residual.iter_mut() {
                        *r += model.residual_std * rng.normal();
                    }
                }
            }
            let mut repulsion = residual;
            linalg::axpy(&mut repulsion, systematic, &direction);
            let z = zeta(&direction, &repulsion)?;
            sum += z;
            sum_sq += z * z;
        }
        let mean = sum / trials as f64;
        let var = (sum_sq / trials as f64 - mean * mean).max(0.0);
        rows.push(ZetaTrendRow {
            modalities: m,
            mean_zeta: mean,
            std_error: (var / trials as f64).sqrt(),
        });
    }
    Ok(rows)
}

/// Lower bound on the expected pull-cancellation `chi` for M modalities
/// with mean pairwise alignment `mu_bar`:
/// `1 - sqrt((1 + (M-2) mu_bar) / (M-1))`.
pub fn chi_lower_bound(m: usize, mu_bar: f64) -> Result<f64, DiagnosticsError> {
    if m < 2 {
        return Err(DiagnosticsError::DomainError {
            reason: format!("modality count {m} must be at least 2"),
        });
    }
    if !(0.0..=1.0).contains(&mu_bar) {
        return Err(DiagnosticsError::DomainError {
            reason: format!("mean alignment {mu_bar} outside [0, 1]"),
        });
    }
    Ok(1.0 - ((1.0 + (m - 2) as f64 * mu_bar) / (m - 1) as f64).sqrt())
}

/// Large-M limit of [`chi_lower_bound`]: `1 - sqrt(mu_bar)`.
pub fn chi_bound_asymptote(mu_bar: f64) -> f64 {
    1.0 - mu_bar.sqrt()
}

/// One row of a pull-cancellation scan.
#[derive(Clone, Copy, Debug)]
pub struct ChiScanRow {
    pub modalities: usize,
    pub mean_chi: f64,
    pub std_error: f64,
    /// Bound evaluated at the alignment actually measured in the trials.
    pub bound: f64,
    /// Mean pairwise inner product observed across the trials.
    pub empirical_mu: f64,
}

const CALIBRATION_PAIRS: usize = 4000;
const CALIBRATION_TOL: f64 = 0.01;
const CALIBRATION_ITERS: usize = 20;

fn shared_latent_vector(rng: &mut Rng, dim: usize, rho: f64, latent: &[f64]) -> Vec<f64> {
    let mut v = rng.normal_vec(dim, (1.0 / dim as f64).sqrt());
    linalg::scale(&mut v, (1.0 - rho).sqrt());
    linalg::axpy(&mut v, rho.sqrt(), latent);
    let n = linalg::norm(&v);
    v.iter().map(|x| x / n).collect()
}

fn empirical_pair_alignment(dim: usize, rho: f64, seed: u64) -> f64 {
    let mut sum = 0.0;
    for pair in 0..CALIBRATION_PAIRS {
        let mut rng = Rng::stream(seed, 0xCAFE_0000 ^ pair as u64);
        let latent = rng.unit_vector(dim);
        let a = shared_latent_vector(&mut rng, dim, rho, &latent);
        let b = shared_latent_vector(&mut rng, dim, rho, &latent);
        sum += linalg::dot(&a, &b);
    }
    sum / CALIBRATION_PAIRS as f64
}

/// Bisects the latent coupling of the shared-latent sampler until the
/// empirical mean pairwise inner product matches `target_mu` within 0.01.
pub fn calibrate_latent_coupling(
    dim: usize,
    target_mu: f64,
    seed: u64,
) -> Result<f64, DiagnosticsError> {
    if !(0.0..=1.0).contains(&target_mu) {
        return Err(DiagnosticsError::DomainError {
            reason: format!("target alignment {target_mu} outside [0, 1]"),
        });
    }
    let mut best = (0.0f64, f64::INFINITY);
    let consider = |rho: f64, best: &mut (f64, f64)| {
        let mu = empirical_pair_alignment(dim, rho, seed);
        let err = (mu - target_mu).abs();
        if err < best.1 {
            *best = (rho, err);
        }
        mu
    };
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let mu_lo = consider(lo, &mut best);
    let mu_hi = consider(hi, &mut best);
    if target_mu <= mu_lo {
        lo = 0.0;
        hi = 0.0;
    } else if target_mu >= mu_hi {
        lo = 1.0;
        hi = 1.0;
    }
    for _ in 0..CALIBRATION_ITERS {
        if hi - lo < 1e-12 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let mu = consider(mid, &mut best);
        if mu < target_mu {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if best.1 > CALIBRATION_TOL {
        return Err(DiagnosticsError::CalibrationFailure {
            target: target_mu,
            achieved: target_mu + best.1,
        });
    }
    Ok(best.0)
}

/// Monte-Carlo scan of the pull-cancellation metric against its lower bound.
///
/// Draws, for each M, `trials` tuples of M-1 unit vectors from the
/// shared-latent sampler calibrated to `mu_bar`, computes
/// `chi = 1 - ||sum z^(n)|| / (M-1)` per tuple (uniform unit weights), and
/// reports the mean, its standard error, and the bound evaluated at the
/// alignment the trials actually realized.
pub fn verify_pull_cancellation(
    dim: usize,
    m_list: &[usize],
    mu_bar: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<ChiScanRow>, DiagnosticsError> {
    if trials == 0 {
        return Err(DiagnosticsError::DomainError {
            reason: "need at least one trial".to_string(),
        });
    }
    let rho = calibrate_latent_coupling(dim, mu_bar, seed)?;
    let mut rows = Vec::with_capacity(m_list.len());
    for &m in m_list {
        if m < 2 {
            return Err(DiagnosticsError::DomainError {
                reason: format!("modality count {m} must be at least 2"),
            });
        }
        let n = m - 1;
        let mut sum = 0.0f64;
        let mut sum_sq = 0.0f64;
        let mut dot_sum = 0.0f64;
        let mut dot_count = 0usize;
        for trial in 0..trials {
            let mut rng = Rng::stream(seed, 0xBEEF_0000 ^ ((m as u64) << 40) ^ trial as u64);
            let latent = rng.unit_vector(dim);
            let pulls: Vec<Vec<f64>> = (0..n)
                .map(|_| shared_latent_vector(&mut rng, dim, rho, &latent))
                .collect();
            let mut total = vec![0.0f64; dim];
            for p in &pulls {
                linalg::axpy(&mut total, 1.0, p);
            }
            for i in 0..n {
                for j in (i + 1)..n {
                    dot_sum += linalg::dot(&pulls[i], &pulls[j]);
                    dot_count += 1;
                }
            }
            let c = 1.0 - linalg::norm(&total) / n as f64;
            sum += c;
            sum_sq += c * c;
        }
        let mean = sum / trials as f64;
        let var = (sum_sq / trials as f64 - mean * mean).max(0.0);
        let empirical_mu = if dot_count > 0 {
            (dot_sum / dot_count as f64).clamp(0.0, 1.0)
        } else {
            mu_bar
        };
        rows.push(ChiScanRow {
            modalities: m,
            mean_chi: mean,
            std_error: (var / trials as f64).sqrt(),
            bound: chi_lower_bound(m, empirical_mu)?,
            empirical_mu,
        });
    }
    Ok(rows)
}
