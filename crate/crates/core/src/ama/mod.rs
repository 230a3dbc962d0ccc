//! Anisotropic mesh adaptation for image representation: a density-driven
//! initial mesh, a Hessian-based metric tensor, metric-guided relocation
//! with edge flips, and the final piecewise-linear reconstruction.

mod adapt;
mod metric;

use serde::{Deserialize, Serialize};

pub use adapt::{adapt_mesh, initial_mesh, min_angle, vertex_budget};
pub use metric::{compute_metric, principal_angle, MetricField, Sym2, REGULARIZATION_FLOOR};

use crate::error::{Error, Result};
use crate::imgio::GrayImage;
use crate::mesh::{assign_values, TriMesh};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmaConfig {
    /// Vertex count as a fraction of the pixel count.
    pub sample_density: f64,
    /// Repetitions of metric computation followed by adaptation.
    pub outer_iterations: usize,
    pub smoothing_passes: usize,
    /// Added to `|H|`; when absent, 1% of the mean absolute entry of `|H|`.
    pub hessian_regularization: Option<f64>,
    /// Largest allowed eigenvalue ratio of a metric tensor.
    pub anisotropy_cap: f64,
    pub seed: u64,
}

impl Default for AmaConfig {
    fn default() -> Self {
        Self {
            sample_density: 0.03,
            outer_iterations: 5,
            smoothing_passes: 20,
            hessian_regularization: None,
            anisotropy_cap: 1e4,
            seed: 0,
        }
    }
}

impl AmaConfig {
    pub fn with_density(sample_density: f64, seed: u64) -> Self {
        Self {
            sample_density,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(format!("mesh adaptation {what}")));
        if !(self.sample_density > 0.0 && self.sample_density <= 1.0) {
            return bad("sample_density must lie in (0, 1]");
        }
        if self.outer_iterations < 1 {
            return bad("outer_iterations must be at least 1");
        }
        if let Some(e) = self.hessian_regularization {
            if !(e > 0.0 && e.is_finite()) {
                return bad("hessian_regularization must be positive");
            }
        }
        if !(self.anisotropy_cap >= 1.0 && self.anisotropy_cap.is_finite()) {
            return bad("anisotropy_cap must be at least 1");
        }
        Ok(())
    }
}

/// Result of the representation pipeline.
#[derive(Debug, Clone)]
pub struct AmaResult {
    /// Final mesh with grey values at its vertices.
    pub mesh: TriMesh,
    /// Rasterization of the mesh interpolant at image resolution.
    pub image: GrayImage,
    /// Metric of the last outer iteration.
    pub metric: MetricField,
}

/// Initial mesh, then `outer_iterations` rounds of value assignment,
/// metric computation and adaptation, then a final value assignment and
/// rasterization.
pub fn ama_represent(img: &GrayImage, cfg: &AmaConfig) -> Result<AmaResult> {
    cfg.validate()?;
    let mut mesh = initial_mesh(img, cfg.sample_density, cfg.seed)?;
    let mut metric = None;
    for _ in 0..cfg.outer_iterations {
        let valued = assign_values(&mesh, img)?;
        let m = compute_metric(&valued, img, cfg)?;
        mesh = adapt_mesh(&valued, &m, cfg)?;
        metric = Some(m);
    }
    let mesh = assign_values(&mesh, img)?;
    let image = mesh.rasterize(img.width(), img.height())?;
    Ok(AmaResult {
        mesh,
        image,
        metric: metric.expect("at least one outer iteration"),
    })
}
