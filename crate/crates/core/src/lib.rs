//! Crisp edge detection toolkit.
//!
//! A self-contained stack for training and evaluating crisp (one-pixel wide)
//! edge detectors at desk scale:
//!
//! - [`tensor`]: a rank-4 `f64` tensor engine with reverse-mode gradients for
//!   every operator the network needs.
//! - [`net`]: the detector itself — a small multi-resolution encoder,
//!   second-order derivative context modules on the skip connections, and a
//!   densely connected refinement decoder built on conditionally
//!   parameterized convolutions.
//! - [`loss`]: focal loss, (focal) Tversky loss, the hybrid objective, and
//!   the weighted cross-entropy baseline.
//! - [`classic`]: Roberts/Sobel/Scharr gradients, Laplacian zero crossings,
//!   and Canny.
//! - [`eval`]: thresholding, oriented non-maximum suppression, Zhang-Suen
//!   thinning, tolerance-based boundary matching, and ODS/OIS/AP summaries
//!   under both the post-processed and raw-prediction protocols.
//! - [`data`]: synthetic shape datasets with exact one-pixel ground truth,
//!   on-disk ingestion, and rotation/crop/flip augmentation.

pub mod classic;
pub mod config;
pub mod data;
pub mod eval;
pub mod loss;
pub mod net;
pub mod optim;
pub mod params;
pub mod tensor;
pub mod train;

pub use tensor::{Tensor, TensorError};
