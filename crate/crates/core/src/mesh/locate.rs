use std::sync::atomic::Ordering;

use super::predicates::orient2d;
use super::{Point, TriMesh};
use crate::error::{Error, Result};

/// Containing triangle and barycentric weights of a query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarycentricCoords {
    pub triangle: usize,
    /// Weights of the triangle's vertices in storage order.
    pub weights: [f64; 3],
}

impl BarycentricCoords {
    /// `sum_i weights[i] * values[tri[i]]`, evaluated relative to the
    /// heaviest vertex so constant fields and nodal values come out exact.
    pub fn apply(&self, tri: &[usize; 3], values: &[f64]) -> f64 {
        let base = (0..3)
            .max_by(|&a, &b| self.weights[a].total_cmp(&self.weights[b]))
            .unwrap_or(0);
        let v0 = values[tri[base]];
        let mut acc = v0;
        for k in 0..3 {
            if k != base && self.weights[k] != 0.0 {
                acc += self.weights[k] * (values[tri[k]] - v0);
            }
        }
        acc
    }
}

impl TriMesh {
    /// Locates `q`, walking from the last triangle found by this method.
    /// Points on shared edges or vertices resolve to the lowest-index
    /// containing triangle.
    pub fn locate(&self, q: Point) -> Result<BarycentricCoords> {
        let mut hint = self.last_found.load(Ordering::Relaxed);
        let bc = self.locate_from(q, &mut hint)?;
        self.last_found.store(hint, Ordering::Relaxed);
        Ok(bc)
    }

    /// As [`TriMesh::locate`] with a caller-owned walk start.
    pub fn locate_from(&self, q: Point, hint: &mut usize) -> Result<BarycentricCoords> {
        if !q.x.is_finite() || !q.y.is_finite() || self.triangles.is_empty() {
            return Err(Error::OutsideDomain(q.x, q.y));
        }
        let start = if *hint < self.triangles.len() {
            *hint
        } else {
            0
        };
        let t = match self.walk(q, start)? {
            Some(t) => t,
            None => self.scan(q)?,
        };
        let t = self.lowest_containing(q, t);
        *hint = t;
        Ok(self.barycentric(t, q))
    }

    /// Stochastic visibility walk; `None` if it fails to settle within a
    /// step budget (possible on non-Delaunay meshes).
    fn walk(&self, q: Point, mut t: usize) -> Result<Option<usize>> {
        let budget = 4 * self.triangles.len() + 16;
        let mut rng = (t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
        'walk: for _ in 0..budget {
            let tri = self.triangles[t];
            rng ^= rng << 13;
            rng ^= rng >> 7;
            rng ^= rng << 17;
            let first = (rng % 3) as usize;
            for s in 0..3 {
                let i = (first + s) % 3;
                let a = self.vertices[tri[(i + 1) % 3]];
                let b = self.vertices[tri[(i + 2) % 3]];
                if orient2d(a, b, q) < 0.0 {
                    match self.neighbors[t][i] {
                        Some(n) => {
                            t = n;
                            continue 'walk;
                        }
                        None => return Err(Error::OutsideDomain(q.x, q.y)),
                    }
                }
            }
            return Ok(Some(t));
        }
        Ok(None)
    }

    fn contains(&self, t: usize, q: Point) -> bool {
        let [a, b, c] = self.corners_of(t);
        orient2d(b, c, q) >= 0.0 && orient2d(c, a, q) >= 0.0 && orient2d(a, b, q) >= 0.0
    }

    fn scan(&self, q: Point) -> Result<usize> {
        (0..self.triangles.len())
            .find(|&t| self.contains(t, q))
            .ok_or(Error::OutsideDomain(q.x, q.y))
    }

    fn lowest_containing(&self, q: Point, t: usize) -> usize {
        let tri = self.triangles[t];
        let zero: Vec<usize> = (0..3)
            .filter(|&i| {
                let a = self.vertices[tri[(i + 1) % 3]];
                let b = self.vertices[tri[(i + 2) % 3]];
                orient2d(a, b, q) == 0.0
            })
            .collect();
        match zero.len() {
            0 => t,
            1 => self.neighbors[t][zero[0]].map_or(t, |n| t.min(n)),
            _ => {
                let apex = (0..3).find(|i| !zero.contains(i)).unwrap_or(0);
                self.star(tri[apex], t).into_iter().min().unwrap_or(t)
            }
        }
    }

    /// Triangles around vertex `v`, found by rotating from `t` both ways.
    fn star(&self, v: usize, t: usize) -> Vec<usize> {
        let mut out = vec![t];
        for dir in [1usize, 2] {
            let mut cur = t;
            loop {
                let pos = self.triangles[cur]
                    .iter()
                    .position(|&x| x == v)
                    .expect("star");
                // the edge opposite (pos + dir) contains v
                match self.neighbors[cur][(pos + dir) % 3] {
                    Some(n) if n != t && !out.contains(&n) => {
                        out.push(n);
                        cur = n;
                    }
                    _ => break,
                }
            }
        }
        out
    }

    fn barycentric(&self, t: usize, q: Point) -> BarycentricCoords {
        let [a, b, c] = self.corners_of(t);
        let raw = [orient2d(b, c, q), orient2d(c, a, q), orient2d(a, b, q)];
        let sum: f64 = raw.iter().sum();
        BarycentricCoords {
            triangle: t,
            weights: raw.map(|w| if w == 0.0 { 0.0 } else { w / sum }),
        }
    }
}
