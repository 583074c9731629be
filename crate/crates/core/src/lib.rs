//! Numerical laboratory for multimodal embedding objectives on the unit
//! hypersphere.
//!
//! Instead of training encoders, every experiment here optimizes *free
//! embedding points* directly. The crate provides:
//!
//! - [`geometry`] — normalized-embedding primitives: batches, distances,
//!   Gaussian kernels (Euclidean and geodesic), centroids, Gram matrices;
//! - [`losses`] — contrastive and decoupled objectives (InfoNCE,
//!   intra-modality uniformity, anchored alignment, tuple-level extensions),
//!   each with value and hand-derived analytic gradient;
//! - [`diagnostics`] — push–pull gradient decomposition and the conflict
//!   metrics `zeta` / `chi`, plus Monte-Carlo studies of how both scale with
//!   the number of modalities;
//! - [`divergence`] — a global Hölder divergence across M distributions:
//!   KDE plug-in estimator and a deterministic quadrature oracle;
//! - [`trainer`] — synthetic data generation, projected gradient descent on
//!   the sphere, trajectory recording, and a finite-difference gradient
//!   checker.
//!
//! All arithmetic is `f64`; all randomness flows through the explicit,
//! documented generator in [`rng`], so runs are reproducible from a seed.

// indexed loops over parallel row buffers read better here than zipped
// iterator chains
#![allow(clippy::needless_range_loop)]

pub mod diagnostics;
pub mod divergence;
pub mod geometry;
pub mod linalg;
pub mod losses;
pub mod quadrature;
pub mod rng;
pub mod trainer;

pub use geometry::{Geometry, KernelSpec, ModalityBatch, MultimodalBatch};
pub use losses::{LossConfig, LossGradient, LossValue};
