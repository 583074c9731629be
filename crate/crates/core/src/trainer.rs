//! Synthetic-data experiment engine: generates correlated multimodal
//! tuples, runs projected gradient descent on the unit sphere, and records
//! conflict and divergence trajectories. Also hosts the finite-difference
//! gradient checker used to verify every analytic gradient.

use std::collections::BTreeMap;
use std::time::Instant;

use crate::diagnostics::{ConflictReport, DiagnosticsError};
use crate::divergence::{self, DivergenceError};
use crate::geometry::{self, Geometry, GeometryError, KernelSpec, MultimodalBatch};
use crate::linalg::{self, Mat};
use crate::losses::{self, LossConfig, LossError, LossGradient, LossValue};
use crate::rng::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainerError {
    #[error("update for row {row} collapsed to norm {norm:.3e} before retraction")]
    StepBlowup { row: usize, norm: f64 },
    #[error("epoch {epoch} failed: {source}")]
    EpochFailed {
        epoch: usize,
        #[source]
        source: Box<TrainerError>,
    },
    #[error("non-finite {field} at epoch {epoch}")]
    NonFinite { epoch: usize, field: &'static str },
    #[error("invalid argument: {reason}")]
    InvalidArgument { reason: String },
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    Divergence(#[from] DivergenceError),
}

impl TrainerError {
    /// The epoch at which a run aborted, when known.
    pub fn failing_epoch(&self) -> Option<usize> {
        match self {
            TrainerError::EpochFailed { epoch, .. } | TrainerError::NonFinite { epoch, .. } => {
                Some(*epoch)
            }
            _ => None,
        }
    }
}

/// Parameters of the synthetic multimodal generator.
///
/// Each tuple draws one shared latent direction; each modality sees the
/// latent mixed with private Gaussian noise (`latent_coupling` controls the
/// mix) plus a fixed per-modality offset of magnitude `init_gap` that models
/// the initial separation between modality distributions.
#[derive(Clone, Debug)]
pub struct SyntheticSpec {
    pub batch: usize,
    pub dim: usize,
    pub modalities: usize,
    /// rho in [0, 1]: 1 = identical modalities, 0 = independent.
    pub latent_coupling: f64,
    pub init_gap: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    fn validate(&self) -> Result<(), TrainerError> {
        if self.batch == 0 || self.dim < 2 || self.modalities < 2 {
            return Err(TrainerError::InvalidArgument {
                reason: format!(
                    "need B >= 1, d >= 2, M >= 2; got B={}, d={}, M={}",
                    self.batch, self.dim, self.modalities
                ),
            });
        }
        if !(0.0..=1.0).contains(&self.latent_coupling) {
            return Err(TrainerError::InvalidArgument {
                reason: format!("latent coupling {} outside [0, 1]", self.latent_coupling),
            });
        }
        if self.init_gap < 0.0 {
            return Err(TrainerError::InvalidArgument {
                reason: "init_gap must be nonnegative".to_string(),
            });
        }
        Ok(())
    }
}

/// Which objective the optimizer descends.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    /// Generalized multimodal InfoNCE.
    InfoNce,
    /// Per-modality uniformity plus anchored alignment, with the tuple-level
    /// extensions taken from the loss config flags.
    UniAlign,
    /// UniAlign with both tuple-level extensions forced on.
    UniAlignPlus,
}

#[derive(Clone, Debug)]
pub struct OptimizerSpec {
    pub objective: Objective,
    pub step_size: f64,
    pub epochs: usize,
    pub loss_cfg: LossConfig,
    pub record_every: usize,
    pub divergence_tau: f64,
}

impl OptimizerSpec {
    pub fn new(objective: Objective, step_size: f64, epochs: usize) -> Self {
        OptimizerSpec {
            objective,
            step_size,
            epochs,
            loss_cfg: LossConfig::default(),
            record_every: 5,
            divergence_tau: 0.3,
        }
    }

    fn validate(&self) -> Result<(), TrainerError> {
        if self.step_size <= 0.0 {
            return Err(TrainerError::InvalidArgument {
                reason: "step size must be positive".to_string(),
            });
        }
        if self.record_every == 0 {
            return Err(TrainerError::InvalidArgument {
                reason: "record_every must be at least 1".to_string(),
            });
        }
        if self.divergence_tau <= 0.0 {
            return Err(TrainerError::InvalidArgument {
                reason: "divergence bandwidth must be positive".to_string(),
            });
        }
        Ok(())
    }

    fn effective_cfg(&self) -> LossConfig {
        match self.objective {
            Objective::UniAlignPlus => LossConfig {
                enable_tuple_uniformity: true,
                enable_volume: true,
                ..self.loss_cfg.clone()
            },
            _ => self.loss_cfg.clone(),
        }
    }
}

/// One recorded point of a training trajectory. Uniformity and alignment
/// columns are evaluated on the current embeddings whatever the objective;
/// tuple columns are zero unless the corresponding term is enabled.
#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub epoch: usize,
    pub loss_total: f64,
    pub loss_uniformity: f64,
    pub loss_align: f64,
    pub loss_tuple_uniformity: f64,
    pub loss_volume: f64,
    pub zeta_mean: f64,
    pub chi_mean: f64,
    pub holder_div: f64,
    /// Wall-clock seconds since the start of the run. Timing only; every
    /// other field is deterministic for a fixed seed.
    pub seconds: f64,
}

/// Draws a synthetic multimodal batch; bitwise deterministic given the seed.
pub fn generate(spec: &SyntheticSpec) -> Result<MultimodalBatch, TrainerError> {
    spec.validate()?;
    let d = spec.dim;
    let rho = spec.latent_coupling;

    let mut offset_rng = Rng::stream(spec.seed, 1);
    let offsets: Vec<Vec<f64>> = (0..spec.modalities)
        .map(|_| offset_rng.unit_vector(d))
        .collect();

    let mut latent_rng = Rng::stream(spec.seed, 2);
    let mut noise_rng = Rng::stream(spec.seed, 3);
    let noise_std = (1.0 / d as f64).sqrt();

    let mut mats: Vec<Mat> = (0..spec.modalities)
        .map(|_| Mat::zeros(spec.batch, d))
        .collect();
    for i in 0..spec.batch {
        let latent = latent_rng.unit_vector(d);
        for (m, mat) in mats.iter_mut().enumerate() {
            let mut row = noise_rng.normal_vec(d, noise_std);
            linalg::scale(&mut row, (1.0 - rho).sqrt());
            linalg::axpy(&mut row, rho.sqrt(), &latent);
            linalg::axpy(&mut row, spec.init_gap, &offsets[m]);
            mat.row_mut(i).copy_from_slice(&row);
        }
    }
    let modalities = mats
        .into_iter()
        .enumerate()
        .map(|(m, mat)| geometry::l2_normalize(mat, m as u32))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MultimodalBatch::new(modalities, 0)?)
}

/// Value and ambient gradient of the configured objective.
pub fn objective_eval(
    batch: &MultimodalBatch,
    opt: &OptimizerSpec,
) -> Result<(LossValue, LossGradient), TrainerError> {
    let cfg = opt.effective_cfg();
    let out = match opt.objective {
        Objective::InfoNce => losses::infonce(batch, &cfg)?,
        Objective::UniAlign | Objective::UniAlignPlus => losses::total_loss(batch, &cfg)?,
    };
    Ok(out)
}

/// One projected-gradient step with retraction: project the ambient
/// gradient onto the tangent space of each row, move by `eta`, renormalize.
/// Rows with an exactly zero tangent gradient are left untouched, so a zero
/// gradient is a true fixed point.
pub fn step_with_gradient(
    batch: &MultimodalBatch,
    grad: &LossGradient,
    eta: f64,
) -> Result<MultimodalBatch, TrainerError> {
    let b = batch.batch_size();
    let d = batch.dim();
    let mut mats: Vec<Mat> = Vec::with_capacity(batch.num_modalities());
    for m in 0..batch.num_modalities() {
        let z = batch.modality(m);
        let g = grad.modality(m);
        let mut out = z.mat().clone();
        for i in 0..b {
            let zi = z.row(i);
            let gi = g.row(i);
            let radial = linalg::dot(gi, zi);
            let mut tangent = vec![0.0f64; d];
            for k in 0..d {
                tangent[k] = gi[k] - radial * zi[k];
            }
            if linalg::norm(&tangent) == 0.0 {
                continue;
            }
            let row = out.row_mut(i);
            for k in 0..d {
                row[k] = zi[k] - eta * tangent[k];
            }
            let n = linalg::norm(row);
            if n < 1e-12 {
                return Err(TrainerError::StepBlowup { row: i, norm: n });
            }
            for x in row.iter_mut() {
                *x /= n;
            }
        }
        mats.push(out);
    }
    Ok(batch.with_data(mats)?)
}

/// Full-batch step under the configured objective.
pub fn step(batch: &MultimodalBatch, opt: &OptimizerSpec) -> Result<MultimodalBatch, TrainerError> {
    opt.validate()?;
    let (_, grad) = objective_eval(batch, opt)?;
    step_with_gradient(batch, &grad, opt.step_size)
}

fn snapshot(
    epoch: usize,
    batch: &MultimodalBatch,
    value: &LossValue,
    opt: &OptimizerSpec,
    started: Instant,
) -> Result<TrajectoryRecord, TrainerError> {
    let cfg = opt.effective_cfg();

    // uniformity/alignment are always reported; reuse the objective's terms
    // when it already computed them
    let (loss_uniformity, loss_align) = if value.terms.contains_key("alignment") {
        (value.uniformity_sum(), value.term("alignment").unwrap())
    } else {
        let mut u = 0.0;
        for m in 0..batch.num_modalities() {
            u += losses::uniformity(batch.modality(m), &cfg.kernel)?.0;
        }
        (u, losses::alignment(batch).0)
    };
    let report = ConflictReport::compute(batch, &cfg)?;
    let div = divergence::holder_kde(batch.modalities(), opt.divergence_tau, false)?;

    let record = TrajectoryRecord {
        epoch,
        loss_total: value.total,
        loss_uniformity,
        loss_align,
        loss_tuple_uniformity: value.term("tuple_uniformity").unwrap_or(0.0),
        loss_volume: value.term("volume").unwrap_or(0.0),
        zeta_mean: report.zeta_mean,
        chi_mean: report.chi_mean,
        holder_div: div.value,
        seconds: started.elapsed().as_secs_f64(),
    };
    for (field, v) in [
        ("loss_total", record.loss_total),
        ("loss_uniformity", record.loss_uniformity),
        ("loss_align", record.loss_align),
        ("loss_tuple_uniformity", record.loss_tuple_uniformity),
        ("loss_volume", record.loss_volume),
        ("zeta_mean", record.zeta_mean),
        ("chi_mean", record.chi_mean),
        ("holder_div", record.holder_div),
    ] {
        if !v.is_finite() {
            return Err(TrainerError::NonFinite { epoch, field });
        }
    }
    Ok(record)
}

/// Runs full-batch descent for `opt.epochs` epochs; returns the recorded
/// trajectory (the initial state, every `record_every`-th epoch, and the
/// final epoch) together with the final embedding state.
///
/// Step-size guard: if an epoch increases the objective, the epoch is
/// retried once from the same state at half the step size (whatever the
/// outcome), and the full step size is restored afterwards.
pub fn run_with_state(
    spec: &SyntheticSpec,
    opt: &OptimizerSpec,
) -> Result<(Vec<TrajectoryRecord>, MultimodalBatch), TrainerError> {
    spec.validate()?;
    opt.validate()?;
    let started = Instant::now();
    let mut state = generate(spec)?;
    let (mut value, mut grad) = objective_eval(&state, opt)?;

    let mut records = Vec::new();
    records.push(snapshot(0, &state, &value, opt, started)?);

    for epoch in 1..=opt.epochs {
        let fail = |e: TrainerError| TrainerError::EpochFailed {
            epoch,
            source: Box::new(e),
        };
        let candidate = step_with_gradient(&state, &grad, opt.step_size).map_err(fail)?;
        let (cand_value, cand_grad) = objective_eval(&candidate, opt).map_err(fail)?;
        if cand_value.total > value.total {
            let retry = step_with_gradient(&state, &grad, opt.step_size / 2.0).map_err(fail)?;
            let (retry_value, retry_grad) = objective_eval(&retry, opt).map_err(fail)?;
            state = retry;
            value = retry_value;
            grad = retry_grad;
        } else {
            state = candidate;
            value = cand_value;
            grad = cand_grad;
        }
        if epoch % opt.record_every == 0 || epoch == opt.epochs {
            records.push(snapshot(epoch, &state, &value, opt, started)?);
        }
    }
    Ok((records, state))
}

/// Recorded trajectory of a run; see [`run_with_state`].
pub fn run(spec: &SyntheticSpec, opt: &OptimizerSpec) -> Result<Vec<TrajectoryRecord>, TrainerError> {
    Ok(run_with_state(spec, opt)?.0)
}

type ValueFn<'a> = Box<dyn Fn(&MultimodalBatch) -> Result<f64, TrainerError> + 'a>;

/// Central-difference check of every analytic gradient against its loss
/// value, over every coordinate of every modality. Returns the maximum
/// relative error per loss, with denominator
/// `max(|analytic|, |numeric|, 1e-12)` per coordinate.
pub fn gradcheck(
    batch: &MultimodalBatch,
    cfg: &LossConfig,
    h: f64,
) -> Result<BTreeMap<String, f64>, TrainerError> {
    if !(1e-7..=1e-3).contains(&h) {
        return Err(TrainerError::InvalidArgument {
            reason: format!("step {h} outside [1e-7, 1e-3]"),
        });
    }

    let uniformity_sum = |batch: &MultimodalBatch, geometry: Geometry| {
        let spec = KernelSpec {
            geometry,
            tau: cfg.kernel.tau,
        };
        let mut total = 0.0;
        let mut grads = Vec::new();
        for m in 0..batch.num_modalities() {
            let (v, g) = losses::uniformity(batch.modality(m), &spec)?;
            total += v;
            grads.push(g);
        }
        Ok::<(f64, LossGradient), TrainerError>((total, LossGradient::from_mats(grads)))
    };

    let mut checks: Vec<(&str, ValueFn, LossGradient)> = Vec::new();

    let (_, g) = losses::infonce(batch, cfg)?;
    checks.push((
        "infonce",
        Box::new(|b| Ok(losses::infonce(b, cfg)?.0.total)),
        g,
    ));

    let (_, g) = uniformity_sum(batch, Geometry::Euclidean)?;
    checks.push((
        "uniformity_euclidean",
        Box::new(move |b| Ok(uniformity_sum(b, Geometry::Euclidean)?.0)),
        g,
    ));
    let (_, g) = uniformity_sum(batch, Geometry::Geodesic)?;
    checks.push((
        "uniformity_geodesic",
        Box::new(move |b| Ok(uniformity_sum(b, Geometry::Geodesic)?.0)),
        g,
    ));

    let (_, g) = losses::alignment(batch);
    checks.push((
        "alignment",
        Box::new(|b| Ok(losses::alignment(b).0)),
        LossGradient::from_mats(g),
    ));

    let (_, g) = losses::tuple_uniformity(batch, cfg)?;
    checks.push((
        "tuple_uniformity",
        Box::new(|b| Ok(losses::tuple_uniformity(b, cfg)?.0)),
        LossGradient::from_mats(g),
    ));

    let (_, g) = losses::volume_loss(batch);
    checks.push((
        "volume",
        Box::new(|b| Ok(losses::volume_loss(b).0)),
        LossGradient::from_mats(g),
    ));

    let mut out = BTreeMap::new();
    for (name, value_fn, analytic) in checks {
        let err = max_relative_error(batch, h, &value_fn, &analytic)?;
        out.insert(name.to_string(), err);
    }
    Ok(out)
}

fn max_relative_error(
    batch: &MultimodalBatch,
    h: f64,
    value_fn: &ValueFn,
    analytic: &LossGradient,
) -> Result<f64, TrainerError> {
    let base: Vec<Mat> = batch
        .modalities()
        .iter()
        .map(|m| m.mat().clone())
        .collect();
    let mut worst = 0.0f64;
    for m in 0..batch.num_modalities() {
        for i in 0..batch.batch_size() {
            for k in 0..batch.dim() {
                let original = base[m].get(i, k);
                let eval = |x: f64| -> Result<f64, TrainerError> {
                    let mut mats = base.clone();
                    mats[m].set(i, k, x);
                    value_fn(&batch.with_data(mats)?)
                };
                let plus = eval(original + h)?;
                let minus = eval(original - h)?;
                let numeric = (plus - minus) / (2.0 * h);
                let exact = analytic.modality(m).get(i, k);
                let denom = exact.abs().max(numeric.abs()).max(1e-12);
                worst = worst.max((exact - numeric).abs() / denom);
            }
        }
    }
    Ok(worst)
}
