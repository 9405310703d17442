//! Affect-modeling pipeline built around privileged information.
//!
//! The crate provides, bottom to top:
//!
//! - [`tensor`] / [`nn`]: a deterministic, double-precision tensor and
//!   neural-network engine (dense, conv2d, max-pool, dropout, two-stream
//!   junction, softmax) with analytic gradients, Adam, and a finite-difference
//!   gradient checker.
//! - [`corpus`]: session ingestion and the window/label pipeline (sliding
//!   windows, per-session trace normalization, epsilon-band labeling,
//!   telemetry/physiology feature extraction, frame-tensor assembly).
//! - [`synthgen`]: a seeded synthetic corpus generator with a planted latent
//!   arousal process driving all four modalities.
//! - [`models`]: the four network topologies (teacher, student, pixel-only,
//!   fusion) and the two training procedures (cross-entropy and
//!   teacher-student distillation) with early stopping.
//! - [`eval`]: player-grouped k-fold cross-validation, majority baseline,
//!   alpha sweep, and report aggregation.
//! - [`report`]: CSV and plain-text rendering of run reports.

pub mod corpus;
pub mod eval;
pub mod models;
pub mod nn;
pub mod report;
pub mod rng;
pub mod synthgen;
pub mod tensor;

pub use tensor::Tensor;
