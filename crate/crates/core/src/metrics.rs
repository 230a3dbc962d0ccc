//! PSNR and SSIM between a reconstruction and its ground truth.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imgio::GrayImage;

/// Peak signal-to-noise ratio in dB; identical images give `Infinite`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Finite(f64),
    Infinite,
}

impl Psnr {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Psnr::Infinite)
    }

    /// Value in dB, `f64::INFINITY` for the sentinel.
    pub fn db(&self) -> f64 {
        match self {
            Psnr::Finite(v) => *v,
            Psnr::Infinite => f64::INFINITY,
        }
    }
}

impl PartialOrd for Psnr {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        self.db().partial_cmp(&other.db())
    }
}

impl fmt::Display for Psnr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Psnr::Finite(v) => write!(f, "{v}"),
            Psnr::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Psnr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" => Ok(Psnr::Infinite),
            t => t
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Psnr::Finite)
                .ok_or_else(|| Error::InvalidParameter(format!("bad PSNR value {s:?}"))),
        }
    }
}

fn check_same_dims(a: &GrayImage, b: &GrayImage) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// Mean squared error over all pixels.
pub fn mse(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    check_same_dims(a, b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / a.len() as f64)
}

/// `20 log10((2^p - 1) / sqrt(MSE))`.
pub fn psnr(a: &GrayImage, b: &GrayImage) -> Result<Psnr> {
    if a.precision_bits() != b.precision_bits() {
        return Err(Error::DimensionMismatch(format!(
            "precision {} vs {} bits",
            a.precision_bits(),
            b.precision_bits()
        )));
    }
    let err = mse(a, b)?;
    Ok(psnr_from_mse(err, a.peak()))
}

pub fn psnr_from_mse(mse: f64, peak: f64) -> Psnr {
    if mse == 0.0 {
        Psnr::Infinite
    } else {
        Psnr::Finite(20.0 * (peak / mse.sqrt()).log10())
    }
}

/// SSIM window and stabilizing constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    /// Dynamic range `L`, normally `2^p - 1`.
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 255.0,
        }
    }
}

impl SsimParams {
    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "SSIM window {} must be odd and >= 3",
                self.window
            )));
        }
        if !(self.sigma > 0.0) || !(self.k1 > 0.0) || !(self.k2 > 0.0) {
            return Err(Error::InvalidParameter(
                "SSIM sigma, k1 and k2 must be positive".into(),
            ));
        }
        if !(self.dynamic_range > 0.0) {
            return Err(Error::InvalidParameter(
                "SSIM dynamic range must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Normalized separable 1D Gaussian weights.
    fn kernel(&self) -> Vec<f64> {
        let r = (self.window / 2) as f64;
        let w: Vec<f64> = (0..self.window)
            .map(|i| {
                let d = i as f64 - r;
                (-d * d / (2.0 * self.sigma * self.sigma)).exp()
            })
            .collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    }
}

/// Mean SSIM together with the per-pixel SSIM map.
#[derive(Debug, Clone, PartialEq)]
pub struct SsimResult {
    pub mean_ssim: f64,
    pub width: usize,
    pub height: usize,
    /// Row-major local SSIM values, each in `[-1, 1]`.
    pub map: Vec<f64>,
}

/// Affine map used when exporting an SSIM map as an 8-bit image:
/// `pixel = (s + 1) * 127.5`.
pub const SSIM_MAP_SCALE: f64 = 127.5;
pub const SSIM_MAP_OFFSET: f64 = 1.0;

impl SsimResult {
    /// Rescales `[-1, 1]` to `[0, 255]`.
    pub fn map_image(&self) -> GrayImage {
        let data = self
            .map
            .iter()
            .map(|s| (s + SSIM_MAP_OFFSET) * SSIM_MAP_SCALE)
            .collect();
        GrayImage::from_clamped(self.width, self.height, data).expect("map has image dimensions")
    }
}

/// Index into `[0, n)` with symmetric reflection (`c b a | a b c | c b a`).
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut k = i.rem_euclid(period);
    if k >= n {
        k = period - 1 - k;
    }
    k as usize
}

/// Structural similarity with a Gaussian window and symmetric padding.
pub fn ssim(a: &GrayImage, b: &GrayImage, params: &SsimParams) -> Result<SsimResult> {
    check_same_dims(a, b)?;
    params.validate()?;
    let (w, h) = a.dims();
    if w.min(h) < params.window {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            window: params.window,
        });
    }
    let kernel = params.kernel();
    let r = (params.window / 2) as isize;
    let mut weights = Vec::with_capacity(params.window * params.window);
    for ky in &kernel {
        for kx in &kernel {
            weights.push(ky * kx);
        }
    }
    let (c1, c2) = (params.c1(), params.c2());
    let (xs, ys) = (a.data(), b.data());

    let map: Vec<f64> = (0..h)
        .into_par_iter()
        .flat_map_iter(|row| {
            let weights = &weights;
            (0..w).map(move |col| {
                let mut idx = Vec::with_capacity(weights.len());
                for dy in -r..=r {
                    let rr = reflect(row as isize + dy, h);
                    for dx in -r..=r {
                        idx.push(rr * w + reflect(col as isize + dx, w));
                    }
                }
                let (mut mx, mut my) = (0.0, 0.0);
                for (k, &i) in idx.iter().enumerate() {
                    mx += weights[k] * xs[i];
                    my += weights[k] * ys[i];
                }
                let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
                for (k, &i) in idx.iter().enumerate() {
                    let dx = xs[i] - mx;
                    let dy = ys[i] - my;
                    vx += weights[k] * dx * dx;
                    vy += weights[k] * dy * dy;
                    cxy += weights[k] * dx * dy;
                }
                let num = (2.0 * mx * my + c1) * (2.0 * cxy + c2);
                let den = (mx * mx + my * my + c1) * (vx + vy + c2);
                (num / den).clamp(-1.0, 1.0)
            })
        })
        .collect();
    let mean_ssim = map.iter().sum::<f64>() / map.len() as f64;
    Ok(SsimResult {
        mean_ssim,
        width: w,
        height: h,
        map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(w: usize, h: usize, f: impl FnMut(usize, usize) -> f64) -> GrayImage {
        GrayImage::from_fn(w, h, f).unwrap()
    }

    #[test]
    fn mse_hand_values() {
        let a = GrayImage::new(2, 2, vec![0.0; 4]).unwrap();
        let b = GrayImage::new(2, 2, vec![3.0, 4.0, 3.0, 4.0]).unwrap();
        assert_eq!(mse(&a, &b).unwrap(), 12.5);
        assert_eq!(mse(&b, &a).unwrap(), 12.5);
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn mse_dimension_mismatch() {
        let a = GrayImage::constant(2, 2, 0.0).unwrap();
        let b = GrayImage::constant(3, 2, 0.0).unwrap();
        assert!(matches!(mse(&a, &b), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn psnr_reference_points() {
        let a = GrayImage::constant(4, 4, 10.0).unwrap();
        assert_eq!(psnr(&a, &a).unwrap(), Psnr::Infinite);
        let b = GrayImage::constant(4, 4, 11.0).unwrap();
        let p = psnr(&a, &b).unwrap().db();
        assert!((p - 48.1308).abs() < 1e-3, "{p}");
        let black = GrayImage::constant(4, 4, 0.0).unwrap();
        let white = GrayImage::constant(4, 4, 255.0).unwrap();
        assert_eq!(psnr(&black, &white).unwrap(), Psnr::Finite(0.0));
    }

    #[test]
    fn psnr_token_round_trip() {
        assert_eq!(Psnr::Infinite.to_string(), "inf");
        assert_eq!("inf".parse::<Psnr>().unwrap(), Psnr::Infinite);
        let p = Psnr::Finite(31.234567890123);
        assert_eq!(p.to_string().parse::<Psnr>().unwrap(), p);
        assert!("nan".parse::<Psnr>().is_err());
    }

    #[test]
    fn ssim_identity() {
        let a = img(16, 16, |r, c| ((r * 7 + c * 13) % 256) as f64);
        let res = ssim(&a, &a, &SsimParams::default()).unwrap();
        assert_eq!(res.mean_ssim, 1.0);
        assert!(res.map.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn ssim_black_vs_white() {
        let a = GrayImage::constant(12, 12, 0.0).unwrap();
        let b = GrayImage::constant(12, 12, 255.0).unwrap();
        let res = ssim(&a, &b, &SsimParams::default()).unwrap();
        let expected = 6.5025 / 65031.5025;
        for v in &res.map {
            assert!((v - expected).abs() < 1e-15);
        }
        assert!((res.mean_ssim - 1.0e-4).abs() < 1e-6);
    }

    #[test]
    fn ssim_symmetric() {
        let a = img(14, 13, |r, c| ((r * 31 + c * 17) % 200) as f64);
        let b = img(14, 13, |r, c| ((r * 11 + c * 5) % 180) as f64);
        let p = SsimParams::default();
        let ab = ssim(&a, &b, &p).unwrap().mean_ssim;
        let ba = ssim(&b, &a, &p).unwrap().mean_ssim;
        assert!((ab - ba).abs() < 1e-15);
    }

    #[test]
    fn ssim_rejects_small_images_and_bad_params() {
        let a = GrayImage::constant(10, 20, 0.0).unwrap();
        assert!(matches!(
            ssim(&a, &a, &SsimParams::default()),
            Err(Error::ImageTooSmall { .. })
        ));
        let bad = SsimParams {
            window: 4,
            ..SsimParams::default()
        };
        let b = GrayImage::constant(12, 12, 0.0).unwrap();
        assert!(ssim(&b, &b, &bad).is_err());
    }

    #[test]
    fn reflect_is_symmetric() {
        let got: Vec<usize> = (-3..7).map(|i| reflect(i, 4)).collect();
        assert_eq!(got, vec![2, 1, 0, 0, 1, 2, 3, 3, 2, 1]);
    }

    #[test]
    fn map_image_rescale() {
        let r = SsimResult {
            mean_ssim: 0.0,
            width: 2,
            height: 2,
            map: vec![-1.0, 0.0, 1.0, 0.5],
        };
        assert_eq!(r.map_image().data(), &[0.0, 127.5, 255.0, 191.25]);
    }
}
