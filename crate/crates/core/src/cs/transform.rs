//! Orthonormal 2D transforms on row-major real grids: the real Fourier
//! basis and DCT-II used for sensing, and the Haar wavelet used as the
//! sparsity prior.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rustdct::{Dct2, Dct3, DctPlanner};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgio::GrayImage;

/// Coefficient domain in which measurements are taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensingDomain {
    Fourier,
    Dct,
}

impl SensingDomain {
    pub fn tag(self) -> u64 {
        match self {
            SensingDomain::Fourier => 0,
            SensingDomain::Dct => 1,
        }
    }

    pub fn from_tag(tag: u64) -> Result<Self> {
        match tag {
            0 => Ok(SensingDomain::Fourier),
            1 => Ok(SensingDomain::Dct),
            t => Err(Error::InvalidParameter(format!(
                "unknown sensing domain tag {t}"
            ))),
        }
    }
}

impl fmt::Display for SensingDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SensingDomain::Fourier => "fourier",
            SensingDomain::Dct => "dct",
        })
    }
}

impl FromStr for SensingDomain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fourier" => Ok(SensingDomain::Fourier),
            "dct" => Ok(SensingDomain::Dct),
            other => Err(Error::InvalidParameter(format!(
                "unsupported domain {other:?}"
            ))),
        }
    }
}

/// Index of the conjugate frequency of coefficient `k` on an `w x h` grid.
pub fn conjugate_index(k: usize, width: usize, height: usize) -> usize {
    let (r, c) = (k / width, k % width);
    ((height - r) % height) * width + (width - c) % width
}

enum Plan {
    Fourier {
        row: Arc<dyn Fft<f64>>,
        row_inv: Arc<dyn Fft<f64>>,
        col: Arc<dyn Fft<f64>>,
        col_inv: Arc<dyn Fft<f64>>,
    },
    Dct {
        row2: Arc<dyn Dct2<f64>>,
        row3: Arc<dyn Dct3<f64>>,
        col2: Arc<dyn Dct2<f64>>,
        col3: Arc<dyn Dct3<f64>>,
    },
}

/// Planned orthonormal 2D transform for a fixed grid size.
///
/// For the Fourier domain the complex spectrum is stored as real
/// coefficients: self-conjugate frequencies keep their real part, and for
/// each conjugate pair `k < k'` slot `k` holds `sqrt(2) Re F_k` and slot
/// `k'` holds `sqrt(2) Im F_k`. This keeps the transform real and
/// orthonormal.
pub struct Transform2d {
    width: usize,
    height: usize,
    domain: SensingDomain,
    plan: Plan,
}

impl Transform2d {
    pub fn new(width: usize, height: usize, domain: SensingDomain) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::InvalidDimensions { width, height });
        }
        let plan = match domain {
            SensingDomain::Fourier => {
                let mut p = FftPlanner::new();
                Plan::Fourier {
                    row: p.plan_fft_forward(width),
                    row_inv: p.plan_fft_inverse(width),
                    col: p.plan_fft_forward(height),
                    col_inv: p.plan_fft_inverse(height),
                }
            }
            SensingDomain::Dct => {
                let mut p = DctPlanner::new();
                Plan::Dct {
                    row2: p.plan_dct2(width),
                    row3: p.plan_dct3(width),
                    col2: p.plan_dct2(height),
                    col3: p.plan_dct3(height),
                }
            }
        };
        Ok(Self {
            width,
            height,
            domain,
            plan,
        })
    }

    pub fn domain(&self) -> SensingDomain {
        self.domain
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.width * self.height {
            return Err(Error::DimensionMismatch(format!(
                "{len} values for a {}x{} transform",
                self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        Ok(match &self.plan {
            Plan::Fourier { row, col, .. } => {
                let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                self.fft2(&mut buf, row, col);
                self.pack_real(&buf)
            }
            Plan::Dct { row2, col2, .. } => {
                let mut buf = x.to_vec();
                self.separable(&mut buf, |line, n| {
                    if n == self.width {
                        row2.process_dct2(line)
                    } else {
                        col2.process_dct2(line)
                    }
                    let s0 = (1.0 / n as f64).sqrt();
                    let s = (2.0 / n as f64).sqrt();
                    line[0] *= s0;
                    line[1..].iter_mut().for_each(|v| *v *= s);
                });
                buf
            }
        })
    }

    pub fn inverse(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        self.check_len(coeffs.len())?;
        Ok(match &self.plan {
            Plan::Fourier {
                row_inv, col_inv, ..
            } => {
                let mut buf = self.unpack_real(coeffs);
                self.fft2(&mut buf, row_inv, col_inv);
                buf.into_iter().map(|c| c.re).collect()
            }
            Plan::Dct { row3, col3, .. } => {
                let mut buf = coeffs.to_vec();
                self.separable(&mut buf, |line, n| {
                    let s0 = 2.0 * (1.0 / n as f64).sqrt();
                    let s = (2.0 / n as f64).sqrt();
                    line[0] *= s0;
                    line[1..].iter_mut().for_each(|v| *v *= s);
                    if n == self.width {
                        row3.process_dct3(line)
                    } else {
                        col3.process_dct3(line)
                    }
                });
                buf
            }
        })
    }

    /// Applies `f(line, len)` to every row, then to every column.
    fn separable(&self, buf: &mut [f64], mut f: impl FnMut(&mut [f64], usize)) {
        let (w, h) = (self.width, self.height);
        for row in buf.chunks_exact_mut(w) {
            f(row, w);
        }
        let mut col = vec![0.0; h];
        for c in 0..w {
            for r in 0..h {
                col[r] = buf[r * w + c];
            }
            f(&mut col, h);
            for r in 0..h {
                buf[r * w + c] = col[r];
            }
        }
    }

    fn fft2(&self, buf: &mut [Complex64], row: &Arc<dyn Fft<f64>>, col: &Arc<dyn Fft<f64>>) {
        let (w, h) = (self.width, self.height);
        row.process(buf);
        let mut column = vec![Complex64::new(0.0, 0.0); h];
        for c in 0..w {
            for r in 0..h {
                column[r] = buf[r * w + c];
            }
            col.process(&mut column);
            for r in 0..h {
                buf[r * w + c] = column[r];
            }
        }
        let scale = 1.0 / ((w * h) as f64).sqrt();
        buf.iter_mut().for_each(|v| *v *= scale);
    }

    fn pack_real(&self, spec: &[Complex64]) -> Vec<f64> {
        let (w, h) = (self.width, self.height);
        let mut out = vec![0.0; w * h];
        for k in 0..w * h {
            let kc = conjugate_index(k, w, h);
            match k.cmp(&kc) {
                std::cmp::Ordering::Equal => out[k] = spec[k].re,
                std::cmp::Ordering::Less => {
                    out[k] = std::f64::consts::SQRT_2 * spec[k].re;
                    out[kc] = std::f64::consts::SQRT_2 * spec[k].im;
                }
                std::cmp::Ordering::Greater => {}
            }
        }
        out
    }

    fn unpack_real(&self, coeffs: &[f64]) -> Vec<Complex64> {
        let (w, h) = (self.width, self.height);
        let mut spec = vec![Complex64::new(0.0, 0.0); w * h];
        let inv = std::f64::consts::FRAC_1_SQRT_2;
        for k in 0..w * h {
            let kc = conjugate_index(k, w, h);
            match k.cmp(&kc) {
                std::cmp::Ordering::Equal => spec[k] = Complex64::new(coeffs[k], 0.0),
                std::cmp::Ordering::Less => {
                    let z = Complex64::new(coeffs[k] * inv, coeffs[kc] * inv);
                    spec[k] = z;
                    spec[kc] = z.conj();
                }
                std::cmp::Ordering::Greater => {}
            }
        }
        spec
    }
}

/// Forward orthonormal transform of an image.
pub fn transform_forward(img: &GrayImage, domain: SensingDomain) -> Result<Vec<f64>> {
    Transform2d::new(img.width(), img.height(), domain)?.forward(img.data())
}

/// Inverse orthonormal transform; intensities are clamped into the 8-bit
/// range when forming the image.
pub fn transform_inverse(
    coeffs: &[f64],
    width: usize,
    height: usize,
    domain: SensingDomain,
) -> Result<GrayImage> {
    let x = Transform2d::new(width, height, domain)?.inverse(coeffs)?;
    GrayImage::from_clamped(width, height, x)
}

/// Multi-level orthonormal 2D Haar transform in the usual Mallat layout.
/// A level is applied while both sides of the remaining approximation
/// block are even.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Haar {
    width: usize,
    height: usize,
    levels: usize,
}

impl Haar {
    pub fn new(width: usize, height: usize) -> Self {
        let (mut w, mut h, mut levels) = (width, height, 0);
        while w >= 2 && h >= 2 && w % 2 == 0 && h % 2 == 0 {
            w /= 2;
            h /= 2;
            levels += 1;
        }
        Self {
            width,
            height,
            levels,
        }
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Size of the coarsest approximation block.
    pub fn approx_dims(&self) -> (usize, usize) {
        (self.width >> self.levels, self.height >> self.levels)
    }

    /// Whether coefficient `k` is a detail (wavelet) coefficient rather
    /// than part of the coarsest approximation.
    pub fn is_detail(&self, k: usize) -> bool {
        let (aw, ah) = self.approx_dims();
        let (r, c) = (k / self.width, k % self.width);
        r >= ah || c >= aw
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.width * self.height);
        let mut buf = x.to_vec();
        let mut tmp = vec![0.0; self.width.max(self.height)];
        let (mut w, mut h) = (self.width, self.height);
        for _ in 0..self.levels {
            for r in 0..h {
                let row = &mut buf[r * self.width..r * self.width + w];
                split(row, &mut tmp[..w]);
            }
            let mut col = vec![0.0; h];
            for c in 0..w {
                for r in 0..h {
                    col[r] = buf[r * self.width + c];
                }
                split(&mut col, &mut tmp[..h]);
                for r in 0..h {
                    buf[r * self.width + c] = col[r];
                }
            }
            w /= 2;
            h /= 2;
        }
        buf
    }

    pub fn inverse(&self, coeffs: &[f64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.width * self.height);
        let mut buf = coeffs.to_vec();
        let mut tmp = vec![0.0; self.width.max(self.height)];
        for level in (0..self.levels).rev() {
            let (w, h) = (self.width >> level, self.height >> level);
            let mut col = vec![0.0; h];
            for c in 0..w {
                for r in 0..h {
                    col[r] = buf[r * self.width + c];
                }
                merge(&mut col, &mut tmp[..h]);
                for r in 0..h {
                    buf[r * self.width + c] = col[r];
                }
            }
            for r in 0..h {
                let row = &mut buf[r * self.width..r * self.width + w];
                merge(row, &mut tmp[..w]);
            }
        }
        buf
    }
}

/// One 1D Haar step: `[x0 x1 x2 x3 ..] -> [a0 a1 .. | d0 d1 ..]`.
fn split(line: &mut [f64], tmp: &mut [f64]) {
    let half = line.len() / 2;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..half {
        let (a, b) = (line[2 * i], line[2 * i + 1]);
        tmp[i] = (a + b) * s;
        tmp[half + i] = (a - b) * s;
    }
    line.copy_from_slice(tmp);
}

fn merge(line: &mut [f64], tmp: &mut [f64]) {
    let half = line.len() / 2;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..half {
        let (a, d) = (line[i], line[half + i]);
        tmp[2 * i] = (a + d) * s;
        tmp[2 * i + 1] = (a - d) * s;
    }
    line.copy_from_slice(tmp);
}
