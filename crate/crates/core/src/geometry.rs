//! Normalized-embedding primitives shared by every loss and estimator:
//! batches of embedding rows, squared distances in Euclidean or geodesic
//! geometry, Gaussian kernels, weighted normalized centroids, and Gram
//! matrices.
//!
//! All operations are pure functions of their inputs and safe to share
//! across threads.

use crate::linalg::{self, Mat};
use thiserror::Error;

/// Unit-norm check tolerance for constructed batches.
pub const UNIT_NORM_TOL: f64 = 1e-9;
/// Rows with norm at or below this cannot be normalized.
pub const ZERO_VECTOR_TOL: f64 = 1e-12;
/// Weighted sums with norm at or below this have no well-defined centroid.
pub const CENTROID_EPS: f64 = 1e-8;

/// Which squared distance feeds the Gaussian kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Geometry {
    /// Squared chord length `||a - b||^2`.
    Euclidean,
    /// Squared arc length `arccos(<a, b>)^2` on the unit sphere.
    Geodesic,
}

/// Kernel geometry plus bandwidth/temperature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSpec {
    pub geometry: Geometry,
    pub tau: f64,
}

impl KernelSpec {
    pub fn new(geometry: Geometry, tau: f64) -> Self {
        assert!(tau > 0.0, "kernel bandwidth must be positive");
        KernelSpec { geometry, tau }
    }

    pub fn euclidean(tau: f64) -> Self {
        Self::new(Geometry::Euclidean, tau)
    }

    pub fn geodesic(tau: f64) -> Self {
        Self::new(Geometry::Geodesic, tau)
    }
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec {
            geometry: Geometry::Euclidean,
            tau: 0.07,
        }
    }
}

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("row {row} has norm {norm:.3e}, too small to normalize")]
    ZeroVector { row: usize, norm: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("degenerate centroid: weighted sum norm {norm:.3e} <= {eps:.0e}")]
    DegenerateCentroid { norm: f64, eps: f64 },
    #[error("invalid batch shape: {reason}")]
    BadShape { reason: String },
    #[error("invalid weights: {reason}")]
    BadWeights { reason: String },
}

/// B unit-norm embedding rows of dimension d for one modality.
///
/// The normalizing constructor [`l2_normalize`] guarantees unit rows; the
/// raw constructor [`ModalityBatch::from_raw`] skips normalization so that
/// arbitrary point clouds (density estimation inputs, finite-difference
/// perturbations) can reuse the same plumbing.
#[derive(Clone, Debug, PartialEq)]
pub struct ModalityBatch {
    data: Mat,
    pub modality_id: u32,
}

impl ModalityBatch {
    /// Wraps rows without normalizing. Requires B >= 1, d >= 1, finite
    /// entries. Sphere-based operations expect unit rows; callers taking
    /// this entry point own that contract.
    pub fn from_raw(data: Mat, modality_id: u32) -> Result<Self, GeometryError> {
        if data.rows() == 0 || data.cols() == 0 {
            return Err(GeometryError::BadShape {
                reason: format!("need B >= 1 and d >= 1, got {}x{}", data.rows(), data.cols()),
            });
        }
        if data.data().iter().any(|x| !x.is_finite()) {
            return Err(GeometryError::BadShape {
                reason: "non-finite entry".to_string(),
            });
        }
        Ok(ModalityBatch { data, modality_id })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.rows() == 0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.data.cols()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        self.data.row(i)
    }

    pub fn mat(&self) -> &Mat {
        &self.data
    }

    pub fn into_mat(self) -> Mat {
        self.data
    }

    /// Largest deviation of any row norm from 1.
    pub fn max_norm_error(&self) -> f64 {
        (0..self.len())
            .map(|i| (linalg::norm(self.row(i)) - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Projects every row onto the unit sphere. Fails with `ZeroVector` if any
/// row norm is at or below `1e-12`; requires d >= 2.
pub fn l2_normalize(rows: Mat, modality_id: u32) -> Result<ModalityBatch, GeometryError> {
    if rows.cols() < 2 {
        return Err(GeometryError::BadShape {
            reason: format!("unit-sphere batches need d >= 2, got d = {}", rows.cols()),
        });
    }
    let mut out = rows;
    for i in 0..out.rows() {
        let n = linalg::norm(out.row(i));
        if n <= ZERO_VECTOR_TOL {
            return Err(GeometryError::ZeroVector { row: i, norm: n });
        }
        for x in out.row_mut(i) {
            *x /= n;
        }
    }
    let batch = ModalityBatch::from_raw(out, modality_id)?;
    debug_assert!(batch.max_norm_error() <= UNIT_NORM_TOL);
    Ok(batch)
}

/// M aligned modality batches sharing B and d; tuple i is the cross-modal
/// positive group. `anchor` selects the modality the others align to.
#[derive(Clone, Debug, PartialEq)]
pub struct MultimodalBatch {
    modalities: Vec<ModalityBatch>,
    anchor: usize,
}

impl MultimodalBatch {
    pub fn new(modalities: Vec<ModalityBatch>, anchor: usize) -> Result<Self, GeometryError> {
        if modalities.len() < 2 {
            return Err(GeometryError::BadShape {
                reason: format!("need M >= 2 modalities, got {}", modalities.len()),
            });
        }
        let b = modalities[0].len();
        let d = modalities[0].dim();
        for m in &modalities {
            if m.len() != b || m.dim() != d {
                return Err(GeometryError::BadShape {
                    reason: format!(
                        "modalities disagree on shape: {}x{} vs {}x{}",
                        b,
                        d,
                        m.len(),
                        m.dim()
                    ),
                });
            }
        }
        if anchor >= modalities.len() {
            return Err(GeometryError::BadShape {
                reason: format!("anchor {} out of range for M = {}", anchor, modalities.len()),
            });
        }
        Ok(MultimodalBatch { modalities, anchor })
    }

    #[inline]
    pub fn num_modalities(&self) -> usize {
        self.modalities.len()
    }

    #[inline]
    pub fn batch_size(&self) -> usize {
        self.modalities[0].len()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.modalities[0].dim()
    }

    #[inline]
    pub fn anchor(&self) -> usize {
        self.anchor
    }

    #[inline]
    pub fn modality(&self, m: usize) -> &ModalityBatch {
        &self.modalities[m]
    }

    pub fn modalities(&self) -> &[ModalityBatch] {
        &self.modalities
    }

    /// The M rows forming tuple i, one per modality.
    pub fn tuple(&self, i: usize) -> Vec<&[f64]> {
        self.modalities.iter().map(|m| m.row(i)).collect()
    }

    /// Rebuilds the batch with new row data, keeping ids and anchor.
    pub fn with_data(&self, data: Vec<Mat>) -> Result<Self, GeometryError> {
        assert_eq!(data.len(), self.modalities.len());
        let mods = data
            .into_iter()
            .zip(&self.modalities)
            .map(|(mat, old)| ModalityBatch::from_raw(mat, old.modality_id))
            .collect::<Result<Vec<_>, _>>()?;
        MultimodalBatch::new(mods, self.anchor)
    }
}

/// Squared-distance factor used by geodesic gradients:
/// d/du [arccos(u)^2] = -2 arccos(u) / sqrt(1 - u^2), with its limit -2 as
/// u -> 1. Inputs are clamped into [-1, 1] first.
pub(crate) fn geodesic_sq_dist_du(u: f64) -> f64 {
    let u = u.clamp(-1.0, 1.0);
    if u > 1.0 - 1e-9 {
        return -2.0;
    }
    let u_safe = u.max(-1.0 + 1e-12);
    -2.0 * u_safe.acos() / (1.0 - u_safe * u_safe).sqrt()
}

/// Pairwise squared distances between the rows of two batches.
///
/// Euclidean entries are `||a_i - b_j||^2`; geodesic entries are
/// `arccos(clamp(<a_i, b_j>, -1, 1))^2`. When `a` and `b` are the same
/// object the diagonal is set to exactly 0.
pub fn pairwise_sq_dist(
    a: &ModalityBatch,
    b: &ModalityBatch,
    geometry: Geometry,
) -> Result<Mat, GeometryError> {
    if a.dim() != b.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let self_pair = std::ptr::eq(a, b);
    let mut out = Mat::zeros(a.len(), b.len());
    for i in 0..a.len() {
        let ra = a.row(i);
        for j in 0..b.len() {
            if self_pair && i == j {
                continue; // exact zero on the self-distance diagonal
            }
            let rb = b.row(j);
            let d = match geometry {
                Geometry::Euclidean => {
                    let mut s = 0.0;
                    for k in 0..ra.len() {
                        let diff = ra[k] - rb[k];
                        s += diff * diff;
                    }
                    s
                }
                Geometry::Geodesic => {
                    let u = linalg::dot(ra, rb).clamp(-1.0, 1.0);
                    let theta = u.acos();
                    theta * theta
                }
            };
            out.set(i, j, d);
        }
    }
    Ok(out)
}

/// Entrywise Gaussian kernel `exp(-sq_dist / (2 tau^2))`.
///
/// Entries that underflow flush to 0; far pairs legitimately contribute
/// nothing.
pub fn gaussian_kernel(sq_dist: &Mat, spec: &KernelSpec) -> Mat {
    let inv = 1.0 / (2.0 * spec.tau * spec.tau);
    let mut out = sq_dist.clone();
    for x in out.data_mut() {
        debug_assert!(*x >= 0.0);
        *x = (-*x * inv).exp();
    }
    out
}

/// Weighted, normalized centroid of a tuple of unit vectors:
/// `sum_m w_m z_m / ||sum_m w_m z_m||`.
pub fn centroid(tuple: &[&[f64]], weights: &[f64]) -> Result<Vec<f64>, GeometryError> {
    let (sum, n) = weighted_sum(tuple, weights)?;
    if n <= CENTROID_EPS {
        return Err(GeometryError::DegenerateCentroid {
            norm: n,
            eps: CENTROID_EPS,
        });
    }
    Ok(sum.into_iter().map(|x| x / n).collect())
}

/// Weighted sum and its norm, shared by `centroid` and the chain rule that
/// backpropagates through it.
pub(crate) fn weighted_sum(
    tuple: &[&[f64]],
    weights: &[f64],
) -> Result<(Vec<f64>, f64), GeometryError> {
    if tuple.is_empty() {
        return Err(GeometryError::BadShape {
            reason: "empty tuple".to_string(),
        });
    }
    if weights.len() != tuple.len() {
        return Err(GeometryError::BadWeights {
            reason: format!("{} weights for {} vectors", weights.len(), tuple.len()),
        });
    }
    if weights.iter().any(|w| *w < 0.0) {
        return Err(GeometryError::BadWeights {
            reason: "negative weight".to_string(),
        });
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(GeometryError::BadWeights {
            reason: format!("weights sum to {total}, expected 1"),
        });
    }
    let d = tuple[0].len();
    let mut sum = vec![0.0f64; d];
    for (v, w) in tuple.iter().zip(weights) {
        if v.len() != d {
            return Err(GeometryError::DimensionMismatch {
                expected: d,
                found: v.len(),
            });
        }
        linalg::axpy(&mut sum, *w, v);
    }
    let n = linalg::norm(&sum);
    Ok((sum, n))
}

/// M x M matrix of pairwise inner products within a tuple.
pub fn gram_matrix(tuple: &[&[f64]]) -> Result<Mat, GeometryError> {
    if tuple.is_empty() {
        return Err(GeometryError::BadShape {
            reason: "empty tuple".to_string(),
        });
    }
    let d = tuple[0].len();
    for v in tuple {
        if v.len() != d {
            return Err(GeometryError::DimensionMismatch {
                expected: d,
                found: v.len(),
            });
        }
    }
    let m = tuple.len();
    let mut g = Mat::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = linalg::dot(tuple[i], tuple[j]);
            g.set(i, j, v);
            g.set(j, i, v);
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(rows: &[Vec<f64>]) -> ModalityBatch {
        l2_normalize(Mat::from_rows(rows), 0).unwrap()
    }

    #[test]
    fn normalize_three_four_five() {
        let b = batch(&[vec![3.0, 4.0]]);
        assert!((b.row(0)[0] - 0.6).abs() < 1e-12);
        assert!((b.row(0)[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn normalize_axis_vectors() {
        let b = batch(&[vec![1.0, 0.0], vec![0.0, -2.0]]);
        assert_eq!(b.row(0), &[1.0, 0.0]);
        assert_eq!(b.row(1), &[0.0, -1.0]);
    }

    #[test]
    fn normalize_rejects_zero_row() {
        let err = l2_normalize(Mat::from_rows(&[vec![0.0, 0.0]]), 0).unwrap_err();
        assert!(matches!(err, GeometryError::ZeroVector { row: 0, .. }));
    }

    #[test]
    fn sq_dist_orthogonal_unit_vectors() {
        let a = batch(&[vec![1.0, 0.0]]);
        let b = batch(&[vec![0.0, 1.0]]);
        let de = pairwise_sq_dist(&a, &b, Geometry::Euclidean).unwrap();
        assert!((de.get(0, 0) - 2.0).abs() < 1e-12);
        let dg = pairwise_sq_dist(&a, &b, Geometry::Geodesic).unwrap();
        let quarter = std::f64::consts::FRAC_PI_2;
        assert!((dg.get(0, 0) - quarter * quarter).abs() < 1e-12);
    }

    #[test]
    fn sq_dist_identity_is_zero() {
        let a = batch(&[vec![1.0, 0.0]]);
        for g in [Geometry::Euclidean, Geometry::Geodesic] {
            let d = pairwise_sq_dist(&a, &a, g).unwrap();
            assert_eq!(d.get(0, 0), 0.0);
        }
    }

    #[test]
    fn sq_dist_dimension_mismatch() {
        let a = batch(&[vec![1.0, 0.0]]);
        let b = batch(&[vec![1.0, 0.0, 0.0]]);
        assert!(matches!(
            pairwise_sq_dist(&a, &b, Geometry::Euclidean),
            Err(GeometryError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn kernel_at_zero_distance_is_one() {
        let sq = Mat::from_rows(&[vec![0.0]]);
        for tau in [0.07, 0.3, 1.0, 5.0] {
            let k = gaussian_kernel(&sq, &KernelSpec::euclidean(tau));
            assert_eq!(k.get(0, 0), 1.0);
        }
    }

    #[test]
    fn kernel_direct_evaluation() {
        let sq = Mat::from_rows(&[vec![2.0]]);
        let k = gaussian_kernel(&sq, &KernelSpec::euclidean(1.0));
        assert!((k.get(0, 0) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn kernel_far_pair_underflows_but_stays_nonnegative() {
        // ln-domain oracle: exponent is -2 / (2 * 0.07^2) = -204.0816...
        let sq = Mat::from_rows(&[vec![2.0]]);
        let k = gaussian_kernel(&sq, &KernelSpec::euclidean(0.07));
        let v = k.get(0, 0);
        assert!(v > 0.0 && v < 1e-88);
        let expected_ln = -2.0 / (2.0 * 0.07 * 0.07);
        assert!((v.ln() - expected_ln).abs() < 1e-9 * expected_ln.abs());
    }

    #[test]
    fn centroid_of_identical_inputs() {
        let v = vec![1.0, 0.0];
        let c = centroid(&[&v, &v], &[0.5, 0.5]).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-12 && c[1].abs() < 1e-12);
    }

    #[test]
    fn centroid_symmetry() {
        let a = vec![1.0, 0.0];
        let b = vec![0.0, 1.0];
        let c = centroid(&[&a, &b], &[0.5, 0.5]).unwrap();
        let inv_sqrt2 = 1.0 / 2.0f64.sqrt();
        assert!((c[0] - inv_sqrt2).abs() < 1e-12);
        assert!((c[1] - inv_sqrt2).abs() < 1e-12);
    }

    #[test]
    fn centroid_antipodal_cancellation() {
        let a = vec![1.0, 0.0];
        let b = vec![-1.0, 0.0];
        assert!(matches!(
            centroid(&[&a, &b], &[0.5, 0.5]),
            Err(GeometryError::DegenerateCentroid { .. })
        ));
    }

    #[test]
    fn gram_orthonormal_identical_and_sixty_degrees() {
        let e1 = [1.0, 0.0];
        let e2 = [0.0, 1.0];
        let g = gram_matrix(&[&e1[..], &e2[..]]).unwrap();
        assert_eq!(
            (g.get(0, 0), g.get(0, 1), g.get(1, 0), g.get(1, 1)),
            (1.0, 0.0, 0.0, 1.0)
        );

        let g = gram_matrix(&[&e1[..], &e1[..]]).unwrap();
        assert_eq!(
            (g.get(0, 0), g.get(0, 1), g.get(1, 0), g.get(1, 1)),
            (1.0, 1.0, 1.0, 1.0)
        );

        let sixty = [0.5, 3.0f64.sqrt() / 2.0];
        let g = gram_matrix(&[&e1[..], &sixty[..]]).unwrap();
        assert!((g.get(0, 1) - 0.5).abs() < 1e-12);
        assert!((g.get(1, 0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn normalization_is_idempotent() {
        let rows = vec![vec![0.3, -1.7, 2.2], vec![5.0, 0.01, -0.4]];
        let once = batch(&rows);
        let twice = l2_normalize(once.mat().clone(), 0).unwrap();
        for i in 0..once.len() {
            for k in 0..once.dim() {
                assert!((once.row(i)[k] - twice.row(i)[k]).abs() <= 1e-12);
            }
        }
    }
}
