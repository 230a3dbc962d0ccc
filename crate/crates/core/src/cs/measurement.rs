use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::transform::{conjugate_index, SensingDomain, Transform2d};
use crate::error::{Error, Result};
use crate::imgio::GrayImage;

/// How the random coefficient indices are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplingPattern {
    /// Every coefficient equally likely.
    #[default]
    Uniform,
    /// Draw probability proportional to `(rho + 1/max(w,h))^-decay`, where
    /// `rho` is the normalized frequency radius.
    VariableDensity { decay: f64 },
}

/// Selection of `m` orthonormal transform coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementOp {
    domain: SensingDomain,
    width: usize,
    height: usize,
    kept: Vec<usize>,
}

impl MeasurementOp {
    /// Builds an operator from an explicit index set.
    pub fn from_indices(
        width: usize,
        height: usize,
        domain: SensingDomain,
        mut kept: Vec<usize>,
    ) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::InvalidDimensions { width, height });
        }
        let n = width * height;
        kept.sort_unstable();
        if kept.is_empty() {
            return Err(Error::InvalidParameter(
                "operator keeps no coefficients".into(),
            ));
        }
        if kept.windows(2).any(|p| p[0] == p[1]) {
            return Err(Error::InvalidParameter(
                "duplicate coefficient index".into(),
            ));
        }
        if *kept.last().unwrap() >= n {
            return Err(Error::InvalidParameter(format!(
                "coefficient index out of range 0..{n}"
            )));
        }
        Ok(Self {
            domain,
            width,
            height,
            kept,
        })
    }

    pub fn domain(&self) -> SensingDomain {
        self.domain
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn kept_indices(&self) -> &[usize] {
        &self.kept
    }

    pub fn m(&self) -> usize {
        self.kept.len()
    }

    pub fn n(&self) -> usize {
        self.width * self.height
    }

    pub fn density(&self) -> f64 {
        self.m() as f64 / self.n() as f64
    }

    /// Boolean mask over all `N` coefficients.
    pub fn mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.n()];
        for &k in &self.kept {
            mask[k] = true;
        }
        mask
    }

    pub fn transform(&self) -> Result<Transform2d> {
        Transform2d::new(self.width, self.height, self.domain)
    }

    /// `A x` for a raw pixel vector.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let coeffs = self.transform()?.forward(x)?;
        Ok(self.select(&coeffs))
    }

    /// `A^T y`: zero-filled coefficients mapped back to pixels.
    pub fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        let coeffs = self.zero_fill(y)?;
        self.transform()?.inverse(&coeffs)
    }

    pub(crate) fn select(&self, coeffs: &[f64]) -> Vec<f64> {
        self.kept.iter().map(|&k| coeffs[k]).collect()
    }

    pub(crate) fn zero_fill(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.m() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for an operator with m = {}",
                y.len(),
                self.m()
            )));
        }
        let mut coeffs = vec![0.0; self.n()];
        for (&k, &v) in self.kept.iter().zip(y) {
            coeffs[k] = v;
        }
        Ok(coeffs)
    }
}

/// Builds a uniformly random measurement operator.
pub fn build_measurement_op(
    width: usize,
    height: usize,
    density: f64,
    domain: SensingDomain,
    seed: u64,
) -> Result<MeasurementOp> {
    build_measurement_op_with(
        width,
        height,
        density,
        domain,
        SamplingPattern::Uniform,
        seed,
    )
}

pub fn build_measurement_op_with(
    width: usize,
    height: usize,
    density: f64,
    domain: SensingDomain,
    pattern: SamplingPattern,
    seed: u64,
) -> Result<MeasurementOp> {
    if width < 2 || height < 2 {
        return Err(Error::InvalidDimensions { width, height });
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "density {density} outside (0, 1]"
        )));
    }
    let n = width * height;
    let m = (density * n as f64).round() as usize;
    if m < 1 {
        return Err(Error::InvalidParameter(format!(
            "density {density} keeps no coefficients of {n}"
        )));
    }
    let order = candidate_order(width, height, domain, pattern, seed)?;

    let mut chosen = vec![false; n];
    chosen[0] = true;
    let mut count = 1;
    let mut pending_pair = None;
    for k in order {
        if count == m {
            break;
        }
        if chosen[k] {
            continue;
        }
        let partner = match domain {
            SensingDomain::Fourier => conjugate_index(k, width, height),
            SensingDomain::Dct => k,
        };
        if partner == k {
            chosen[k] = true;
            count += 1;
        } else if count + 2 <= m {
            chosen[k] = true;
            chosen[partner] = true;
            count += 2;
        } else if pending_pair.is_none() {
            pending_pair = Some(k.min(partner));
        }
    }
    if count < m {
        // one slot left and no self-conjugate frequency remained: keep the
        // cosine half of the first pair that did not fit
        if let Some(k) = pending_pair {
            chosen[k] = true;
        }
    }
    let kept = (0..n).filter(|&k| chosen[k]).collect();
    MeasurementOp::from_indices(width, height, domain, kept)
}

fn candidate_order(
    width: usize,
    height: usize,
    domain: SensingDomain,
    pattern: SamplingPattern,
    seed: u64,
) -> Result<Vec<usize>> {
    let n = width * height;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match pattern {
        SamplingPattern::Uniform => {
            let mut order: Vec<usize> = (1..n).collect();
            order.shuffle(&mut rng);
            Ok(order)
        }
        SamplingPattern::VariableDensity { decay } => {
            if !(decay.is_finite() && decay >= 0.0) {
                return Err(Error::InvalidParameter(format!("sampling decay {decay}")));
            }
            let floor = 1.0 / width.max(height) as f64;
            let mut keyed: Vec<(f64, usize)> = (1..n)
                .map(|k| {
                    let rho = frequency_radius(k, width, height, domain);
                    let weight = (rho + floor).powf(-decay);
                    let u: f64 = 1.0 - rng.random::<f64>();
                    (-u.ln() / weight, k)
                })
                .collect();
            keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            Ok(keyed.into_iter().map(|(_, k)| k).collect())
        }
    }
}

/// Normalized radial frequency in `[0, ~0.71]`.
fn frequency_radius(k: usize, width: usize, height: usize, domain: SensingDomain) -> f64 {
    let (r, c) = (k / width, k % width);
    let (fy, fx) = match domain {
        SensingDomain::Fourier => (
            r.min(height - r) as f64 / height as f64,
            c.min(width - c) as f64 / width as f64,
        ),
        SensingDomain::Dct => (
            r as f64 / (2 * height) as f64,
            c as f64 / (2 * width) as f64,
        ),
    };
    fx.hypot(fy)
}

/// Measured coefficients together with the operator that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurements {
    op: MeasurementOp,
    values: Vec<f64>,
    seed: u64,
}

impl Measurements {
    pub fn new(op: MeasurementOp, values: Vec<f64>, seed: u64) -> Result<Self> {
        if values.len() != op.m() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for an operator with m = {}",
                values.len(),
                op.m()
            )));
        }
        Ok(Self { op, values, seed })
    }

    pub fn op(&self) -> &MeasurementOp {
        &self.op
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Minimum-norm image consistent with the data, `A^T y`.
    pub fn zero_filled(&self) -> Result<Vec<f64>> {
        self.op.adjoint(&self.values)
    }

    /// Flat little-endian record: domain tag, width, height, m and seed as
    /// `u64`, then `m` indices as `u64`, then `m` values as `f64`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(40 + 16 * self.op.m());
        for v in [
            self.op.domain.tag(),
            self.op.width as u64,
            self.op.height as u64,
            self.op.m() as u64,
            self.seed,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for &k in &self.op.kept {
            out.extend_from_slice(&(k as u64).to_le_bytes());
        }
        for &v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let word = |i: usize| -> Result<[u8; 8]> {
            bytes
                .get(8 * i..8 * i + 8)
                .map(|s| s.try_into().unwrap())
                .ok_or_else(|| Error::MalformedRecord("truncated measurement record".into()))
        };
        let domain = SensingDomain::from_tag(u64::from_le_bytes(word(0)?))?;
        let width = u64::from_le_bytes(word(1)?) as usize;
        let height = u64::from_le_bytes(word(2)?) as usize;
        let m = u64::from_le_bytes(word(3)?) as usize;
        let seed = u64::from_le_bytes(word(4)?);
        let expected = m
            .checked_mul(16)
            .and_then(|b| b.checked_add(40))
            .ok_or_else(|| Error::MalformedRecord("measurement count overflows".into()))?;
        if bytes.len() != expected {
            return Err(Error::MalformedRecord(format!(
                "record holds {} bytes, header implies {expected}",
                bytes.len()
            )));
        }
        let indices = (0..m)
            .map(|i| word(5 + i).map(|b| u64::from_le_bytes(b) as usize))
            .collect::<Result<Vec<_>>>()?;
        let values = (0..m)
            .map(|i| word(5 + m + i).map(f64::from_le_bytes))
            .collect::<Result<Vec<_>>>()?;
        if indices.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::MalformedRecord(
                "indices not strictly increasing".into(),
            ));
        }
        let op = MeasurementOp::from_indices(width, height, domain, indices)?;
        Measurements::new(op, values, seed)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Simulates acquisition: the selected coefficients of the image.
pub fn measure(img: &GrayImage, op: &MeasurementOp) -> Result<Measurements> {
    measure_seeded(img, op, 0)
}

/// As [`measure`], recording the seed that generated `op`.
pub fn measure_seeded(img: &GrayImage, op: &MeasurementOp, seed: u64) -> Result<Measurements> {
    if img.dims() != op.dims() {
        return Err(Error::DimensionMismatch(format!(
            "image is {}x{}, operator expects {}x{}",
            img.width(),
            img.height(),
            op.width,
            op.height
        )));
    }
    let values = op.apply(img.data())?;
    Measurements::new(op.clone(), values, seed)
}
