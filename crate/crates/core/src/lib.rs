//! Grayscale image representation by compressive sampling (ISTA and
//! equality-constrained total variation) and by anisotropic mesh
//! adaptation, with PSNR/SSIM benchmarking.

// `!(x > 0.0)` is used on purpose so NaN parameters are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ama;
pub mod bench;
pub mod cs;
pub mod error;
pub mod imgio;
pub mod mesh;
pub mod metrics;

pub use error::{Error, Result};
pub use imgio::GrayImage;
pub use mesh::{BarycentricCoords, Point, TriMesh};
pub use metrics::{Psnr, SsimParams, SsimResult};
