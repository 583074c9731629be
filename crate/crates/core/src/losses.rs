//! Training objectives with values and analytic gradients.
//!
//! Every operation returns the *full* ambient-space derivative with respect
//! to every embedding it touches (softmax cross-terms included); constraint
//! handling (tangent projection, retraction) is the trainer's job. Gradients
//! here are the quantities a central finite difference verifies.
//!
//! The uniformity gradient in particular differentiates the whole objective:
//! each row appears both in its own log term and inside the kernel sums of
//! every other row, and both contributions are included.

use std::collections::BTreeMap;

use crate::geometry::{
    self, pairwise_sq_dist, Geometry, GeometryError, KernelSpec, ModalityBatch, MultimodalBatch,
};
use crate::linalg::{self, Mat};
use thiserror::Error;

/// Gradient regularization threshold for near-singular Gram matrices.
const VOLUME_DET_EPS: f64 = 1e-12;
/// Ridge added to the Gram matrix when the determinant is below the threshold.
const VOLUME_RIDGE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("batch of {batch} rows is too small (need at least 2)")]
    BatchTooSmall { batch: usize },
    #[error("invalid weights: {reason}")]
    InvalidWeights { reason: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Configuration shared by all objectives.
///
/// `kernel.tau` doubles as the InfoNCE softmax temperature and the
/// uniformity kernel bandwidth (both default to 0.07); `tau_ctr` is the
/// separate bandwidth for tuple-level uniformity.
#[derive(Clone, Debug)]
pub struct LossConfig {
    pub kernel: KernelSpec,
    pub lambda_align: f64,
    /// M x M nonnegative weights with zero diagonal; `None` means uniform
    /// weight 1 on every ordered pair m != n.
    pub infonce_weights: Option<Mat>,
    /// Length-M simplex weights for the tuple centroid; `None` means 1/M.
    pub tuple_weights: Option<Vec<f64>>,
    pub tau_ctr: f64,
    pub enable_tuple_uniformity: bool,
    pub enable_volume: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            kernel: KernelSpec::default(),
            lambda_align: 1.0,
            infonce_weights: None,
            tuple_weights: None,
            tau_ctr: 0.07,
            enable_tuple_uniformity: false,
            enable_volume: false,
        }
    }
}

impl LossConfig {
    /// Resolved InfoNCE pair weights and their off-diagonal sum.
    pub fn resolve_infonce_weights(&self, m: usize) -> Result<(Mat, f64), LossError> {
        let w = match &self.infonce_weights {
            None => {
                let mut w = Mat::zeros(m, m);
                for i in 0..m {
                    for j in 0..m {
                        if i != j {
                            w.set(i, j, 1.0);
                        }
                    }
                }
                w
            }
            Some(w) => {
                if w.rows() != m || w.cols() != m {
                    return Err(LossError::InvalidWeights {
                        reason: format!(
                            "weight matrix is {}x{}, batch has M = {m}",
                            w.rows(),
                            w.cols()
                        ),
                    });
                }
                if w.data().iter().any(|x| *x < 0.0) {
                    return Err(LossError::InvalidWeights {
                        reason: "negative pair weight".to_string(),
                    });
                }
                for i in 0..m {
                    if w.get(i, i) != 0.0 {
                        return Err(LossError::InvalidWeights {
                            reason: format!("diagonal weight w[{i}][{i}] must be 0"),
                        });
                    }
                }
                w.clone()
            }
        };
        let total: f64 = w.data().iter().sum();
        if total <= 0.0 {
            return Err(LossError::InvalidWeights {
                reason: "all pair weights are zero".to_string(),
            });
        }
        Ok((w, total))
    }

    /// Resolved tuple centroid weights (simplex of length M).
    pub fn resolve_tuple_weights(&self, m: usize) -> Result<Vec<f64>, LossError> {
        match &self.tuple_weights {
            None => Ok(vec![1.0 / m as f64; m]),
            Some(w) => {
                if w.len() != m {
                    return Err(LossError::InvalidWeights {
                        reason: format!("{} tuple weights for M = {m}", w.len()),
                    });
                }
                if w.iter().any(|x| *x < 0.0) {
                    return Err(LossError::InvalidWeights {
                        reason: "negative tuple weight".to_string(),
                    });
                }
                let s: f64 = w.iter().sum();
                if (s - 1.0).abs() > 1e-9 {
                    return Err(LossError::InvalidWeights {
                        reason: format!("tuple weights sum to {s}, expected 1"),
                    });
                }
                Ok(w.clone())
            }
        }
    }
}

/// A loss value with its per-term breakdown.
///
/// `total` is the configured weighted sum of the terms: uniformity terms and
/// tuple terms enter with weight 1, `alignment` with `lambda_align`.
#[derive(Clone, Debug)]
pub struct LossValue {
    pub total: f64,
    pub terms: BTreeMap<String, f64>,
}

impl LossValue {
    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.get(name).copied()
    }

    /// Sum of the per-modality uniformity terms, when present.
    pub fn uniformity_sum(&self) -> f64 {
        self.terms
            .iter()
            .filter(|(k, _)| k.starts_with("uniformity_"))
            .map(|(_, v)| v)
            .sum()
    }
}

/// Ambient gradients, one B x d matrix per modality.
#[derive(Clone, Debug)]
pub struct LossGradient {
    per_modality: Vec<Mat>,
}

impl LossGradient {
    pub fn zeros(batch: &MultimodalBatch) -> Self {
        LossGradient {
            per_modality: (0..batch.num_modalities())
                .map(|_| Mat::zeros(batch.batch_size(), batch.dim()))
                .collect(),
        }
    }

    pub fn from_mats(per_modality: Vec<Mat>) -> Self {
        LossGradient { per_modality }
    }

    #[inline]
    pub fn modality(&self, m: usize) -> &Mat {
        &self.per_modality[m]
    }

    pub fn modalities(&self) -> &[Mat] {
        &self.per_modality
    }

    pub fn num_modalities(&self) -> usize {
        self.per_modality.len()
    }

    /// self += scale * other
    pub fn accumulate(&mut self, other: &LossGradient, scale: f64) {
        assert_eq!(self.per_modality.len(), other.per_modality.len());
        for (a, b) in self.per_modality.iter_mut().zip(&other.per_modality) {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += scale * y;
            }
        }
    }
}

/// Generalized multimodal InfoNCE over all weighted ordered pairs, averaged
/// over the batch:
///
/// `L = -(1 / (B sum w)) sum_i sum_{m != n} w_mn log p_ii^(mn)`
///
/// where `p^(mn)` is the row softmax of cross-modal similarities at
/// temperature `kernel.tau`. The gradient includes all softmax cross-terms,
/// for both the row modality and the column modality of every pair.
pub fn infonce(
    batch: &MultimodalBatch,
    cfg: &LossConfig,
) -> Result<(LossValue, LossGradient), LossError> {
    let m_count = batch.num_modalities();
    let b = batch.batch_size();
    let (w, wsum) = cfg.resolve_infonce_weights(m_count)?;
    let tau = cfg.kernel.tau;

    let mut grad = LossGradient::zeros(batch);
    let mut loss = 0.0f64;
    let mut logits = vec![0.0f64; b];
    let mut probs = vec![0.0f64; b];

    for ma in 0..m_count {
        for mb in 0..m_count {
            if ma == mb {
                continue;
            }
            let wmn = w.get(ma, mb);
            if wmn == 0.0 {
                continue;
            }
            let za = batch.modality(ma);
            let zb = batch.modality(mb);
            let coef = wmn / (b as f64 * wsum);
            for i in 0..b {
                let ra = za.row(i);
                let mut max = f64::NEG_INFINITY;
                for (k, l) in logits.iter_mut().enumerate() {
                    *l = linalg::dot(ra, zb.row(k)) / tau;
                    max = max.max(*l);
                }
                let mut z = 0.0;
                for (p, l) in probs.iter_mut().zip(&logits) {
                    *p = (*l - max).exp();
                    z += *p;
                }
                let lse = max + z.ln();
                loss += wmn * (lse - logits[i]);
                for p in probs.iter_mut() {
                    *p /= z;
                }
                // d/d z_i^(ma): (w / tau) (-z_i^(mb) + sum_k p_ik z_k^(mb))
                {
                    let gi = grad.per_modality[ma].row_mut(i);
                    linalg::axpy(gi, -coef / tau, zb.row(i));
                    for k in 0..b {
                        linalg::axpy(gi, coef / tau * probs[k], zb.row(k));
                    }
                }
                // d/d z_k^(mb): (w / tau) (p_ik - [i == k]) z_i^(ma)
                for k in 0..b {
                    let delta = if i == k { 1.0 } else { 0.0 };
                    let gk = grad.per_modality[mb].row_mut(k);
                    linalg::axpy(gk, coef / tau * (probs[k] - delta), ra);
                }
            }
        }
    }
    loss /= b as f64 * wsum;

    let mut terms = BTreeMap::new();
    terms.insert("infonce".to_string(), loss);
    Ok((LossValue { total: loss, terms }, grad))
}

/// Intra-modality uniformity:
///
/// `U(Z) = (1/B) sum_i log( (1/(B-1)) sum_{j != i} kappa(z_i, z_j) )`.
///
/// Computed in log space (row-wise log-sum-exp), so far-apart batches at
/// small bandwidth never collapse to `log 0`. Returns the value and the full
/// B x d gradient. Always <= 0, with equality iff all rows coincide.
pub fn uniformity(z: &ModalityBatch, kernel: &KernelSpec) -> Result<(f64, Mat), LossError> {
    let b = z.len();
    if b < 2 {
        return Err(LossError::BatchTooSmall { batch: b });
    }
    let d = pairwise_sq_dist(z, z, kernel.geometry)?;
    let inv_2t2 = 1.0 / (2.0 * kernel.tau * kernel.tau);

    // exponents e_ij = -d_ij / (2 tau^2), j != i
    let mut value = 0.0f64;
    let mut softmax = Mat::zeros(b, b);
    for i in 0..b {
        let mut max = f64::NEG_INFINITY;
        for j in 0..b {
            if j != i {
                max = max.max(-d.get(i, j) * inv_2t2);
            }
        }
        let mut zsum = 0.0;
        for j in 0..b {
            if j == i {
                continue;
            }
            let e = (-d.get(i, j) * inv_2t2 - max).exp();
            softmax.set(i, j, e);
            zsum += e;
        }
        let lse = max + zsum.ln();
        value += lse - ((b - 1) as f64).ln();
        for j in 0..b {
            if j != i {
                softmax.set(i, j, softmax.get(i, j) / zsum);
            }
        }
    }
    value /= b as f64;

    // dU/dz_q = -(1 / (2 B tau^2)) sum_{j != q} (p_qj + p_jq) dD_qj/dz_q
    let mut grad = Mat::zeros(b, z.dim());
    let scale = -inv_2t2 / b as f64;
    for q in 0..b {
        for j in 0..b {
            if j == q {
                continue;
            }
            let weight = softmax.get(q, j) + softmax.get(j, q);
            if weight == 0.0 {
                continue;
            }
            match kernel.geometry {
                Geometry::Euclidean => {
                    // dD/dz_q = 2 (z_q - z_j)
                    let zq = z.row(q);
                    let zj = z.row(j);
                    let gq = grad.row_mut(q);
                    for k in 0..zq.len() {
                        gq[k] += scale * weight * 2.0 * (zq[k] - zj[k]);
                    }
                }
                Geometry::Geodesic => {
                    // dD/dz_q = (dD/du) z_j with u = <z_q, z_j>
                    let u = linalg::dot(z.row(q), z.row(j));
                    let du = geometry::geodesic_sq_dist_du(u);
                    let zj = z.row(j);
                    let gq = grad.row_mut(q);
                    for k in 0..zj.len() {
                        gq[k] += scale * weight * du * zj[k];
                    }
                }
            }
        }
    }
    Ok((value, grad))
}

/// Anchored alignment: mean squared distance from each non-anchor modality
/// to the anchor, `(1 / (B (M-1))) sum_i sum_{n != a} ||z_i^a - z_i^n||^2`.
pub fn alignment(batch: &MultimodalBatch) -> (f64, Vec<Mat>) {
    let m_count = batch.num_modalities();
    let b = batch.batch_size();
    let d = batch.dim();
    let a = batch.anchor();
    let scale = 1.0 / (b as f64 * (m_count - 1) as f64);

    let mut value = 0.0;
    let mut grads: Vec<Mat> = (0..m_count).map(|_| Mat::zeros(b, d)).collect();
    for i in 0..b {
        let za = batch.modality(a).row(i);
        for n in 0..m_count {
            if n == a {
                continue;
            }
            let zn = batch.modality(n).row(i);
            let mut sq = 0.0;
            for k in 0..d {
                let diff = za[k] - zn[k];
                sq += diff * diff;
                grads[a].row_mut(i)[k] += 2.0 * scale * diff;
                grads[n].row_mut(i)[k] -= 2.0 * scale * diff;
            }
            value += scale * sq;
        }
    }
    (value, grads)
}

/// Tuple-level uniformity: the uniformity objective applied to the batch of
/// weighted normalized tuple centroids, at bandwidth `tau_ctr`.
///
/// The gradient backpropagates through the centroid normalization with the
/// projection Jacobian `(I - c c^T) / ||sum_m w_m z^(m)||`.
pub fn tuple_uniformity(
    batch: &MultimodalBatch,
    cfg: &LossConfig,
) -> Result<(f64, Vec<Mat>), LossError> {
    let m_count = batch.num_modalities();
    let b = batch.batch_size();
    let d = batch.dim();
    let weights = cfg.resolve_tuple_weights(m_count)?;

    let mut centroids = Mat::zeros(b, d);
    let mut sum_norms = vec![0.0f64; b];
    for i in 0..b {
        let tuple = batch.tuple(i);
        let (sum, n) = geometry::weighted_sum(&tuple, &weights)?;
        if n <= geometry::CENTROID_EPS {
            return Err(GeometryError::DegenerateCentroid {
                norm: n,
                eps: geometry::CENTROID_EPS,
            }
            .into());
        }
        sum_norms[i] = n;
        for k in 0..d {
            centroids.set(i, k, sum[k] / n);
        }
    }
    let centroid_batch = ModalityBatch::from_raw(centroids, u32::MAX)?;
    let spec = KernelSpec {
        geometry: cfg.kernel.geometry,
        tau: cfg.tau_ctr,
    };
    let (value, cgrad) = uniformity(&centroid_batch, &spec)?;

    let mut grads: Vec<Mat> = (0..m_count).map(|_| Mat::zeros(b, d)).collect();
    for i in 0..b {
        let c = centroid_batch.row(i);
        let g = cgrad.row(i);
        let radial = linalg::dot(c, g);
        for (m, grad_m) in grads.iter_mut().enumerate() {
            let f = weights[m] / sum_norms[i];
            let row = grad_m.row_mut(i);
            for k in 0..d {
                row[k] = f * (g[k] - radial * c[k]);
            }
        }
    }
    Ok((value, grads))
}

/// Gram-determinant volume: `(1/B) sum_i sqrt(det G_i)` with
/// `[G_i]_{mn} = <z_i^(m), z_i^(n)>`. Zero iff every tuple is collinear; at
/// most 1 for unit-norm rows. Near-singular Gram matrices get a small ridge
/// before inversion in the gradient.
pub fn volume_loss(batch: &MultimodalBatch) -> (f64, Vec<Mat>) {
    let m_count = batch.num_modalities();
    let b = batch.batch_size();
    let d = batch.dim();
    let inv_b = 1.0 / b as f64;

    let mut value = 0.0;
    let mut grads: Vec<Mat> = (0..m_count).map(|_| Mat::zeros(b, d)).collect();
    for i in 0..b {
        let tuple = batch.tuple(i);
        let gram = geometry::gram_matrix(&tuple).expect("batch invariant guarantees shapes");
        let det = linalg::det(&gram);
        value += inv_b * det.max(0.0).sqrt();

        let reg = if det < VOLUME_DET_EPS {
            let mut g = gram.clone();
            for q in 0..m_count {
                g.add_to(q, q, VOLUME_RIDGE);
            }
            g
        } else {
            gram
        };
        let det_reg = linalg::det(&reg).max(0.0);
        let inv = linalg::inverse(&reg).expect("ridged Gram matrix is invertible");
        // d sqrt(det G)/d z_q = sqrt(det G) sum_n [G^-1]_{qn} z^(n)
        let factor = inv_b * det_reg.sqrt();
        for (q, grad_q) in grads.iter_mut().enumerate() {
            let row = grad_q.row_mut(i);
            for n in 0..m_count {
                let c = factor * inv.get(q, n);
                linalg::axpy(row, c, tuple[n]);
            }
        }
    }
    (value, grads)
}

/// The decoupled objective: per-modality uniformity plus `lambda_align`
/// times anchored alignment, with optional tuple-uniformity and volume
/// terms. With both extensions disabled this is exactly the two-term
/// decoupled loss.
pub fn total_loss(
    batch: &MultimodalBatch,
    cfg: &LossConfig,
) -> Result<(LossValue, LossGradient), LossError> {
    let mut terms = BTreeMap::new();
    let mut grad = LossGradient::zeros(batch);
    let mut total = 0.0f64;

    for m in 0..batch.num_modalities() {
        let (u, g) = uniformity(batch.modality(m), &cfg.kernel)?;
        terms.insert(format!("uniformity_{m}"), u);
        total += u;
        for (x, y) in grad.per_modality[m].data_mut().iter_mut().zip(g.data()) {
            *x += y;
        }
    }

    let (av, ag) = alignment(batch);
    terms.insert("alignment".to_string(), av);
    total += cfg.lambda_align * av;
    grad.accumulate(&LossGradient::from_mats(ag), cfg.lambda_align);

    if cfg.enable_tuple_uniformity {
        let (tv, tg) = tuple_uniformity(batch, cfg)?;
        terms.insert("tuple_uniformity".to_string(), tv);
        total += tv;
        grad.accumulate(&LossGradient::from_mats(tg), 1.0);
    }

    if cfg.enable_volume {
        let (vv, vg) = volume_loss(batch);
        terms.insert("volume".to_string(), vv);
        total += vv;
        grad.accumulate(&LossGradient::from_mats(vg), 1.0);
    }

    Ok((LossValue { total, terms }, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::l2_normalize;

    fn modality(rows: &[Vec<f64>], id: u32) -> ModalityBatch {
        l2_normalize(Mat::from_rows(rows), id).unwrap()
    }

    fn two_by_two() -> MultimodalBatch {
        let m0 = modality(&[vec![1.0, 0.0], vec![0.0, 1.0]], 0);
        let m1 = modality(&[vec![1.0, 0.0], vec![0.0, 1.0]], 1);
        MultimodalBatch::new(vec![m0, m1], 0).unwrap()
    }

    fn cfg_tau(tau: f64) -> LossConfig {
        LossConfig {
            kernel: KernelSpec::euclidean(tau),
            ..LossConfig::default()
        }
    }

    #[test]
    fn infonce_single_sample_is_zero() {
        for m_count in [2usize, 3, 4] {
            let mods: Vec<ModalityBatch> = (0..m_count)
                .map(|m| modality(&[vec![1.0, 0.0, 0.0]], m as u32))
                .collect();
            let batch = MultimodalBatch::new(mods, 0).unwrap();
            for tau in [0.07, 1.0] {
                let (v, g) = infonce(&batch, &cfg_tau(tau)).unwrap();
                assert!(v.total.abs() < 1e-15);
                for m in 0..m_count {
                    assert!(g.modality(m).data().iter().all(|x| x.abs() < 1e-15));
                }
            }
        }
    }

    #[test]
    fn infonce_two_by_two_symmetric_case() {
        // 2x2 logit matrix [[1,0],[0,1]] at tau = 1: every positive has
        // softmax probability e/(e+1), so the batch-mean loss is
        // ln(1 + e^{-1}).
        let (v, _) = infonce(&two_by_two(), &cfg_tau(1.0)).unwrap();
        let expected = (1.0 + (-1.0f64).exp()).ln();
        assert!((v.total - expected).abs() < 1e-12, "got {}", v.total);
        assert!((v.total - 0.313262).abs() < 1e-6);
    }

    #[test]
    fn infonce_rejects_zero_weights() {
        let batch = two_by_two();
        let cfg = LossConfig {
            infonce_weights: Some(Mat::zeros(2, 2)),
            ..LossConfig::default()
        };
        assert!(matches!(
            infonce(&batch, &cfg),
            Err(LossError::InvalidWeights { .. })
        ));
    }

    #[test]
    fn uniformity_collapse_is_zero() {
        let z = modality(&[vec![1.0, 0.0], vec![1.0, 0.0]], 0);
        for tau in [0.07, 1.0] {
            let (v, _) = uniformity(&z, &KernelSpec::euclidean(tau)).unwrap();
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn uniformity_orthogonal_pair() {
        let z = modality(&[vec![1.0, 0.0], vec![0.0, 1.0]], 0);
        let (v, _) = uniformity(&z, &KernelSpec::euclidean(1.0)).unwrap();
        assert!((v - (-1.0)).abs() < 1e-12);
    }

    #[test]
    fn uniformity_three_point_kernel_sum_oracle() {
        // rows e1, e2, -e1 at tau = 1, Euclidean: squared distances are
        // 2, 4, 2, so the kernel sums per row are {e^-1 + e^-2, 2 e^-1,
        // e^-1 + e^-2}. Oracle below sums those by hand.
        let z = modality(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0]], 0);
        let (v, _) = uniformity(&z, &KernelSpec::euclidean(1.0)).unwrap();
        let s_outer = ((-1.0f64).exp() + (-2.0f64).exp()) / 2.0;
        let expected = (2.0 * s_outer.ln() + (-1.0f64)) / 3.0;
        assert!((v - expected).abs() < 1e-12, "got {v}, oracle {expected}");
    }

    #[test]
    fn uniformity_rejects_single_row() {
        let z = modality(&[vec![1.0, 0.0]], 0);
        assert!(matches!(
            uniformity(&z, &KernelSpec::default()),
            Err(LossError::BatchTooSmall { batch: 1 })
        ));
    }

    #[test]
    fn alignment_examples() {
        // identical modalities
        let m0 = modality(&[vec![1.0, 0.0]], 0);
        let batch = MultimodalBatch::new(vec![m0.clone(), m0.clone()], 0).unwrap();
        assert_eq!(alignment(&batch).0, 0.0);

        // orthogonal pair
        let m1 = modality(&[vec![0.0, 1.0]], 1);
        let batch = MultimodalBatch::new(vec![m0.clone(), m1.clone()], 0).unwrap();
        assert!((alignment(&batch).0 - 2.0).abs() < 1e-12);

        // anchor e1, others {e1, e2}: (0 + 2) / 2
        let batch = MultimodalBatch::new(vec![m0.clone(), m0, m1], 0).unwrap();
        assert!((alignment(&batch).0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn alignment_gradient_matches_closed_form() {
        let m0 = modality(&[vec![1.0, 0.0]], 0);
        let m1 = modality(&[vec![0.0, 1.0]], 1);
        let batch = MultimodalBatch::new(vec![m0, m1], 0).unwrap();
        let (_, g) = alignment(&batch);
        // (2 / (B (M-1))) (z^a - z^n) with B = M-1 = 1
        assert!((g[0].get(0, 0) - 2.0).abs() < 1e-12);
        assert!((g[0].get(0, 1) + 2.0).abs() < 1e-12);
        assert!((g[1].get(0, 0) + 2.0).abs() < 1e-12);
        assert!((g[1].get(0, 1) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn volume_examples() {
        // orthonormal triple in d = 3
        let mods: Vec<ModalityBatch> = (0..3)
            .map(|m| {
                let mut row = vec![0.0; 3];
                row[m] = 1.0;
                modality(&[row], m as u32)
            })
            .collect();
        let batch = MultimodalBatch::new(mods, 0).unwrap();
        assert!((volume_loss(&batch).0 - 1.0).abs() < 1e-12);

        // identical vectors are collinear
        let m0 = modality(&[vec![1.0, 0.0]], 0);
        let batch = MultimodalBatch::new(vec![m0.clone(), m0.clone(), m0], 0).unwrap();
        assert!(volume_loss(&batch).0.abs() < 1e-7);

        // pair at 60 degrees: sqrt(1 - cos^2 60) = sin 60
        let a = modality(&[vec![1.0, 0.0]], 0);
        let b = modality(&[vec![0.5, 3.0f64.sqrt() / 2.0]], 1);
        let batch = MultimodalBatch::new(vec![a, b], 0).unwrap();
        assert!((volume_loss(&batch).0 - 0.75f64.sqrt()).abs() < 1e-9);
        assert!((volume_loss(&batch).0 - 0.866025).abs() < 1e-6);
    }

    #[test]
    fn tuple_uniformity_single_modality_equivalent() {
        // with weight (1,) on a single "modality"... M >= 2 is required, so
        // emulate by duplicating the modality and weighting one side fully:
        // the centroid is then exactly that modality's row.
        let z = modality(&[vec![1.0, 0.0], vec![0.0, 1.0]], 0);
        let other = modality(&[vec![0.6, 0.8], vec![0.8, -0.6]], 1);
        let batch = MultimodalBatch::new(vec![z.clone(), other], 0).unwrap();
        let cfg = LossConfig {
            tuple_weights: Some(vec![1.0, 0.0]),
            tau_ctr: 0.5,
            ..LossConfig::default()
        };
        let (v, _) = tuple_uniformity(&batch, &cfg).unwrap();
        let (direct, _) = uniformity(&z, &KernelSpec::euclidean(0.5)).unwrap();
        assert!((v - direct).abs() < 1e-12);
    }

    #[test]
    fn tuple_uniformity_coinciding_centroids() {
        // two tuples whose centroids coincide -> uniformity of identical
        // rows -> 0
        let m0 = modality(&[vec![1.0, 0.0], vec![1.0, 0.0]], 0);
        let m1 = modality(&[vec![0.0, 1.0], vec![0.0, 1.0]], 1);
        let batch = MultimodalBatch::new(vec![m0, m1], 0).unwrap();
        let (v, _) = tuple_uniformity(&batch, &LossConfig::default()).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn tuple_uniformity_degenerate_centroid() {
        let m0 = modality(&[vec![1.0, 0.0], vec![1.0, 0.0]], 0);
        let m1 = modality(&[vec![-1.0, 0.0], vec![0.0, 1.0]], 1);
        let batch = MultimodalBatch::new(vec![m0, m1], 0).unwrap();
        let err = tuple_uniformity(&batch, &LossConfig::default()).unwrap_err();
        assert!(matches!(
            err,
            LossError::Geometry(GeometryError::DegenerateCentroid { .. })
        ));
    }

    #[test]
    fn total_loss_collapse_is_zero() {
        let m0 = modality(&[vec![1.0, 0.0], vec![1.0, 0.0]], 0);
        let batch = MultimodalBatch::new(vec![m0.clone(), m0], 0).unwrap();
        let (v, _) = total_loss(&batch, &cfg_tau(1.0)).unwrap();
        assert_eq!(v.total, 0.0);
    }

    #[test]
    fn total_loss_worked_example() {
        // both modalities {e1, e2}, tau = 1: two uniformity terms of -1,
        // alignment 0
        let (v, _) = total_loss(&two_by_two(), &cfg_tau(1.0)).unwrap();
        assert!((v.total - (-2.0)).abs() < 1e-12);
        assert!((v.uniformity_sum() - (-2.0)).abs() < 1e-12);
        assert_eq!(v.term("alignment"), Some(0.0));
    }

    #[test]
    fn total_is_weighted_sum_of_terms() {
        let m0 = modality(&[vec![1.0, 0.2, 0.0], vec![0.0, 1.0, -0.3]], 0);
        let m1 = modality(&[vec![0.9, -0.1, 0.1], vec![0.1, 0.8, 0.5]], 1);
        let batch = MultimodalBatch::new(vec![m0, m1], 0).unwrap();
        let cfg = LossConfig {
            kernel: KernelSpec::euclidean(0.5),
            lambda_align: 2.5,
            enable_tuple_uniformity: true,
            enable_volume: true,
            tau_ctr: 0.4,
            ..LossConfig::default()
        };
        let (v, _) = total_loss(&batch, &cfg).unwrap();
        let recon = v.uniformity_sum()
            + 2.5 * v.term("alignment").unwrap()
            + v.term("tuple_uniformity").unwrap()
            + v.term("volume").unwrap();
        assert!((v.total - recon).abs() < 1e-10);
    }
}
