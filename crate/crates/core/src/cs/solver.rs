use serde::{Deserialize, Serialize};

use super::measurement::Measurements;
use super::transform::Haar;
use crate::error::{Error, Result};
use crate::imgio::{peak_value, GrayImage};

/// Iteration controls shared by the two reconstruction algorithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Stop once `||x_k - x_{k-1}|| / ||x_k||` drops below this.
    pub tolerance: f64,
    /// Gradient step on the data term (ISTA).
    pub step_size: f64,
    /// Fixed shrinkage threshold. When absent, the threshold starts at
    /// `threshold_fraction` of the largest detail coefficient of the
    /// zero-filled estimate.
    pub threshold: Option<f64>,
    pub threshold_fraction: f64,
    /// Multiply the threshold by `continuation_factor` every this many
    /// iterations.
    pub continuation_interval: Option<usize>,
    pub continuation_factor: f64,
    /// Primal step of the TV primal-dual iteration; the dual step is
    /// `0.99 / (8 tv_primal_step)`.
    pub tv_primal_step: f64,
    pub precision_bits: u32,
}

impl SolverConfig {
    pub fn ista() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-4,
            step_size: 1.0,
            threshold: None,
            threshold_fraction: 0.02,
            continuation_interval: Some(50),
            continuation_factor: 0.5,
            tv_primal_step: 30.0,
            precision_bits: 8,
        }
    }

    pub fn tveq() -> Self {
        Self {
            max_iterations: 300,
            tolerance: 1e-6,
            ..Self::ista()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(format!("solver {what}")));
        if self.max_iterations < 1 {
            return bad("max_iterations must be at least 1");
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return bad("tolerance must be positive");
        }
        if !(self.step_size > 0.0 && self.step_size <= 1.0) {
            return bad("step_size must lie in (0, 1]");
        }
        if let Some(t) = self.threshold {
            if !(t >= 0.0 && t.is_finite()) {
                return bad("threshold must be non-negative");
            }
        }
        if !(self.threshold_fraction > 0.0 && self.threshold_fraction.is_finite()) {
            return bad("threshold_fraction must be positive");
        }
        if self.continuation_interval == Some(0) {
            return bad("continuation_interval must be positive");
        }
        if !(self.continuation_factor > 0.0 && self.continuation_factor <= 1.0) {
            return bad("continuation_factor must lie in (0, 1]");
        }
        if !(self.tv_primal_step > 0.0 && self.tv_primal_step.is_finite()) {
            return bad("tv_primal_step must be positive");
        }
        if !(1..=16).contains(&self.precision_bits) {
            return bad("precision_bits must lie in 1..=16");
        }
        Ok(())
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::ista()
    }
}

/// Output of a reconstruction run.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    /// Final iterate clamped into the intensity range.
    pub image: GrayImage,
    /// Final iterate before clamping.
    pub raw: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// ISTA: objective after each iteration, at that iteration's threshold.
    pub objective: Vec<f64>,
    /// TV: constraint residual `||A x_k - y||` after each projection.
    pub residuals: Vec<f64>,
}

/// `sign(v) max(|v| - lambda, 0)` per entry.
pub fn soft_threshold(v: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold {lambda} is negative"
        )));
    }
    Ok(v.iter().map(|&x| shrink(x, lambda)).collect())
}

fn shrink(x: f64, lambda: f64) -> f64 {
    let m = x.abs() - lambda;
    if m > 0.0 {
        m.copysign(x)
    } else {
        0.0
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn relative_change(new: &[f64], old: &[f64]) -> f64 {
    let diff = new
        .iter()
        .zip(old)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    diff / norm(new).max(f64::MIN_POSITIVE)
}

fn finish(
    meas: &Measurements,
    cfg: &SolverConfig,
    raw: Vec<f64>,
    iterations: usize,
    converged: bool,
    objective: Vec<f64>,
    residuals: Vec<f64>,
) -> Result<Reconstruction> {
    let (w, h) = meas.op().dims();
    let peak = peak_value(cfg.precision_bits);
    let clamped = raw
        .iter()
        .map(|&v| {
            if v.is_finite() {
                v.clamp(0.0, peak)
            } else {
                0.0
            }
        })
        .collect();
    Ok(Reconstruction {
        image: GrayImage::with_precision(w, h, cfg.precision_bits, clamped)?,
        raw,
        iterations,
        converged,
        objective,
        residuals,
    })
}

/// Iterative soft thresholding for
/// `min 1/2 ||A x - y||^2 + lambda ||detail(W x)||_1` with `W` the
/// orthonormal Haar transform. The coarsest approximation coefficients
/// are left unpenalized.
///
/// The threshold is reduced every `continuation_interval` iterations, or
/// as soon as the iterate stalls at the current threshold, until the
/// schedule's last stage; only a stall in that stage counts as
/// convergence.
pub fn reconstruct_ista(meas: &Measurements, cfg: &SolverConfig) -> Result<Reconstruction> {
    cfg.validate()?;
    let op = meas.op();
    let (w, h) = op.dims();
    let transform = op.transform()?;
    let haar = Haar::new(w, h);
    let kept = op.kept_indices();
    let y = meas.values();
    let detail: Vec<bool> = (0..w * h).map(|k| haar.is_detail(k)).collect();

    let mut x = transform.inverse(&op.zero_fill(y)?)?;
    let mut lambda = match cfg.threshold {
        Some(t) => t,
        None => {
            let s = haar.forward(&x);
            let max = s
                .iter()
                .zip(&detail)
                .filter(|(_, &d)| d)
                .fold(0.0f64, |m, (v, _)| m.max(v.abs()));
            cfg.threshold_fraction * max
        }
    };

    let t = cfg.step_size;
    let mut coeffs = transform.forward(&x)?;
    let stages = cfg
        .continuation_interval
        .map_or(1, |every| cfg.max_iterations.div_ceil(every));
    let mut stage = 0;
    let mut stage_iterations = 0;
    let mut objective = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for k in 1..=cfg.max_iterations {
        if Some(stage_iterations) == cfg.continuation_interval && stage + 1 < stages {
            stage += 1;
            stage_iterations = 0;
            lambda *= cfg.continuation_factor;
        }
        stage_iterations += 1;
        for (&i, &yi) in kept.iter().zip(y) {
            coeffs[i] -= t * (coeffs[i] - yi);
        }
        let z = transform.inverse(&coeffs)?;
        let mut s = haar.forward(&z);
        let mut penalty = 0.0;
        for (v, &d) in s.iter_mut().zip(&detail) {
            if d {
                *v = shrink(*v, t * lambda);
                penalty += v.abs();
            }
        }
        let next = haar.inverse(&s);
        coeffs = transform.forward(&next)?;
        let data: f64 = kept
            .iter()
            .zip(y)
            .map(|(&i, &yi)| (coeffs[i] - yi) * (coeffs[i] - yi))
            .sum();
        objective.push(0.5 * data + lambda * penalty);

        let change = relative_change(&next, &x);
        x = next;
        iterations = k;
        if change < cfg.tolerance {
            if stage + 1 < stages {
                stage_iterations = cfg.continuation_interval.unwrap_or(0);
            } else {
                converged = true;
                break;
            }
        }
    }
    finish(meas, cfg, x, iterations, converged, objective, Vec::new())
}

/// Forward differences with a zero last row/column.
pub fn gradient(x: &[f64], width: usize, height: usize) -> (Vec<f64>, Vec<f64>) {
    let mut dx = vec![0.0; x.len()];
    let mut dy = vec![0.0; x.len()];
    for r in 0..height {
        for c in 0..width {
            let i = r * width + c;
            if c + 1 < width {
                dx[i] = x[i + 1] - x[i];
            }
            if r + 1 < height {
                dy[i] = x[i + width] - x[i];
            }
        }
    }
    (dx, dy)
}

/// Negative adjoint of [`gradient`].
pub fn divergence(px: &[f64], py: &[f64], width: usize, height: usize) -> Vec<f64> {
    let mut d = vec![0.0; px.len()];
    for r in 0..height {
        for c in 0..width {
            let i = r * width + c;
            if c + 1 < width {
                d[i] += px[i];
                d[i + 1] -= px[i];
            }
            if r + 1 < height {
                d[i] += py[i];
                d[i + width] -= py[i];
            }
        }
    }
    d
}

pub fn tv_gradient_pair(img: &GrayImage) -> (Vec<f64>, Vec<f64>) {
    gradient(img.data(), img.width(), img.height())
}

/// Isotropic total variation of a raw grid.
pub fn total_variation(x: &[f64], width: usize, height: usize) -> f64 {
    let (dx, dy) = gradient(x, width, height);
    dx.iter().zip(&dy).map(|(a, b)| a.hypot(*b)).sum()
}

pub fn tv_value(img: &GrayImage) -> f64 {
    total_variation(img.data(), img.width(), img.height())
}

/// Minimizes isotropic TV subject to `A x = y` with a primal-dual
/// iteration whose primal step ends in the exact projection onto the
/// measurement-consistent set.
pub fn reconstruct_tveq(meas: &Measurements, cfg: &SolverConfig) -> Result<Reconstruction> {
    cfg.validate()?;
    let op = meas.op();
    let (w, h) = op.dims();
    let transform = op.transform()?;
    let kept = op.kept_indices();
    let y = meas.values();
    let project = |v: &[f64]| -> Result<Vec<f64>> {
        let mut c = transform.forward(v)?;
        for (&i, &yi) in kept.iter().zip(y) {
            c[i] = yi;
        }
        transform.inverse(&c)
    };
    let residual = |v: &[f64]| -> Result<f64> {
        let c = transform.forward(v)?;
        Ok(kept
            .iter()
            .zip(y)
            .map(|(&i, &yi)| (c[i] - yi) * (c[i] - yi))
            .sum::<f64>()
            .sqrt())
    };

    let tau = cfg.tv_primal_step;
    let sigma = 0.99 / (8.0 * tau);
    let mut x = transform.inverse(&op.zero_fill(y)?)?;
    let mut bar = x.clone();
    let mut px = vec![0.0; w * h];
    let mut py = vec![0.0; w * h];
    let mut prev_px = px.clone();
    let mut prev_py = py.clone();
    let mut residuals = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for k in 1..=cfg.max_iterations {
        let (gx, gy) = gradient(&bar, w, h);
        for i in 0..w * h {
            let (a, b) = (px[i] + sigma * gx[i], py[i] + sigma * gy[i]);
            let n = a.hypot(b).max(1.0);
            px[i] = a / n;
            py[i] = b / n;
        }
        let dual_change = relative_change(&px, &prev_px).max(relative_change(&py, &prev_py));
        prev_px.copy_from_slice(&px);
        prev_py.copy_from_slice(&py);
        let div = divergence(&px, &py, w, h);
        let step: Vec<f64> = x.iter().zip(&div).map(|(a, d)| a + tau * d).collect();
        let next = project(&step)?;
        residuals.push(residual(&next)?);
        for i in 0..w * h {
            bar[i] = 2.0 * next[i] - x[i];
        }
        let change = relative_change(&next, &x).max(dual_change);
        x = next;
        iterations = k;
        if change < cfg.tolerance {
            converged = true;
            break;
        }
    }
    finish(meas, cfg, x, iterations, converged, Vec::new(), residuals)
}
