//! Synthetic test images with integer 8-bit intensities.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::imgio::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phantom {
    /// Modified Shepp-Logan head phantom, a stand-in for medical slices.
    SheppLogan,
    /// Bright ellipse on a dark background.
    TwoRegion,
    /// Vertical step: 50 left of the centre column, 200 from it on.
    StepEdge,
    /// `col + row`; needs `width + height <= 257`.
    Ramp,
}

impl Phantom {
    pub const ALL: [Phantom; 4] = [
        Phantom::SheppLogan,
        Phantom::TwoRegion,
        Phantom::StepEdge,
        Phantom::Ramp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Phantom::SheppLogan => "shepp-logan",
            Phantom::TwoRegion => "two-region",
            Phantom::StepEdge => "step-edge",
            Phantom::Ramp => "ramp",
        }
    }

    pub fn render(self, width: usize, height: usize) -> Result<GrayImage> {
        match self {
            Phantom::SheppLogan => shepp_logan(width, height),
            Phantom::TwoRegion => two_region(width, height),
            Phantom::StepEdge => step_edge(width, height),
            Phantom::Ramp => ramp(width, height),
        }
    }
}

impl fmt::Display for Phantom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Phantom {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Phantom::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown phantom {s:?}")))
    }
}

// (intensity, semi-axis a, semi-axis b, centre x, centre y, rotation deg)
const SHEPP_LOGAN: [[f64; 6]; 10] = [
    [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
    [-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0],
    [-0.2, 0.11, 0.31, 0.22, 0.0, -18.0],
    [-0.2, 0.16, 0.41, -0.22, 0.0, 18.0],
    [0.1, 0.21, 0.25, 0.0, 0.35, 0.0],
    [0.1, 0.046, 0.046, 0.0, 0.1, 0.0],
    [0.1, 0.046, 0.046, 0.0, -0.1, 0.0],
    [0.1, 0.046, 0.023, -0.08, -0.605, 0.0],
    [0.1, 0.023, 0.023, 0.0, -0.606, 0.0],
    [0.1, 0.023, 0.046, 0.06, -0.605, 0.0],
];

pub fn shepp_logan(width: usize, height: usize) -> Result<GrayImage> {
    let sx = 2.0 / width.saturating_sub(1).max(1) as f64;
    let sy = 2.0 / height.saturating_sub(1).max(1) as f64;
    GrayImage::from_fn(width, height, |row, col| {
        let x = col as f64 * sx - 1.0;
        let y = 1.0 - row as f64 * sy;
        let v: f64 = SHEPP_LOGAN
            .iter()
            .filter(|&&[_, a, b, x0, y0, deg]| {
                let (s, c) = deg.to_radians().sin_cos();
                let (dx, dy) = (x - x0, y - y0);
                let u = dx * c + dy * s;
                let w = -dx * s + dy * c;
                (u / a).powi(2) + (w / b).powi(2) <= 1.0
            })
            .map(|e| e[0])
            .sum();
        (v.clamp(0.0, 1.0) * 255.0).round()
    })
}

pub fn two_region(width: usize, height: usize) -> Result<GrayImage> {
    let (cx, cy) = (0.53 * width as f64, 0.48 * height as f64);
    let (ax, ay) = (0.31 * width as f64, 0.23 * height as f64);
    GrayImage::from_fn(width, height, |row, col| {
        let d = ((col as f64 - cx) / ax).powi(2) + ((row as f64 - cy) / ay).powi(2);
        if d <= 1.0 {
            200.0
        } else {
            60.0
        }
    })
}

pub fn step_edge(width: usize, height: usize) -> Result<GrayImage> {
    GrayImage::from_fn(
        width,
        height,
        |_, col| if col < width / 2 { 50.0 } else { 200.0 },
    )
}

pub fn ramp(width: usize, height: usize) -> Result<GrayImage> {
    if width + height > 257 {
        return Err(Error::InvalidParameter(format!(
            "ramp {width}x{height} would exceed 255"
        )));
    }
    GrayImage::from_fn(width, height, |row, col| (row + col) as f64)
}
