use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::AmaConfig;
use crate::error::{Error, Result};
use crate::imgio::GrayImage;
use crate::mesh::{BarycentricCoords, Point, TriMesh};

/// Lower bound on the Hessian regularization, in grey levels per pixel
/// squared, so that flat images still get a well-defined metric.
pub const REGULARIZATION_FLOOR: f64 = 1e-6;

/// Symmetric 2x2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2 {
        xx: 1.0,
        xy: 0.0,
        yy: 1.0,
    };

    pub const fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Self { xx, xy, yy }
    }

    pub fn diag(a: f64, b: f64) -> Self {
        Self::new(a, 0.0, b)
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.xx * s, self.xy * s, self.yy * s)
    }

    pub fn add(&self, o: &Sym2) -> Self {
        Self::new(self.xx + o.xx, self.xy + o.xy, self.yy + o.yy)
    }

    /// `v^T M w`.
    pub fn inner(&self, v: (f64, f64), w: (f64, f64)) -> f64 {
        v.0 * (self.xx * w.0 + self.xy * w.1) + v.1 * (self.xy * w.0 + self.yy * w.1)
    }

    pub fn apply(&self, v: (f64, f64)) -> (f64, f64) {
        (self.xx * v.0 + self.xy * v.1, self.xy * v.0 + self.yy * v.1)
    }

    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d.abs() <= f64::MIN_POSITIVE {
            return None;
        }
        Some(Self::new(self.yy / d, -self.xy / d, self.xx / d))
    }

    /// Eigenvalues `l1 >= l2` and the unit eigenvector of `l1`.
    pub fn eigen(&self) -> (f64, f64, (f64, f64)) {
        let mean = 0.5 * (self.xx + self.yy);
        let half = 0.5 * (self.xx - self.yy);
        let r = half.hypot(self.xy);
        let theta = 0.5 * self.xy.atan2(half);
        (mean + r, mean - r, (theta.cos(), theta.sin()))
    }

    /// Rebuilds `l1 e e^T + l2 e' e'^T` with `e' = e` rotated by 90 degrees.
    pub fn from_eigen(l1: f64, l2: f64, e: (f64, f64)) -> Self {
        let (c, s) = e;
        Self::new(
            l1 * c * c + l2 * s * s,
            (l1 - l2) * c * s,
            l1 * s * s + l2 * c * c,
        )
    }

    /// Replaces each eigenvalue by its absolute value.
    pub fn abs(&self) -> Self {
        let (l1, l2, e) = self.eigen();
        Self::from_eigen(l1.abs(), l2.abs(), e)
    }

    /// Principal square root of a positive semidefinite matrix.
    pub fn sqrt(&self) -> Self {
        let (l1, l2, e) = self.eigen();
        Self::from_eigen(l1.max(0.0).sqrt(), l2.max(0.0).sqrt(), e)
    }

    /// Cholesky-style positive definiteness test.
    pub fn is_spd(&self) -> bool {
        self.xx > 0.0 && self.det() > 0.0
    }
}

/// One symmetric positive definite tensor per mesh vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    tensors: Vec<Sym2>,
    /// Vertices whose Hessian fit was underdetermined and fell back to a
    /// gradient outer product.
    pub fallback_count: usize,
    /// Regularization actually added to `|H|`.
    pub regularization: f64,
}

impl MetricField {
    pub fn new(tensors: Vec<Sym2>) -> Result<Self> {
        if let Some(i) = tensors.iter().position(|m| !m.is_spd()) {
            return Err(Error::InvalidParameter(format!(
                "metric at vertex {i} is not positive definite"
            )));
        }
        Ok(Self {
            tensors,
            fallback_count: 0,
            regularization: 0.0,
        })
    }

    /// The same tensor at `n` vertices.
    pub fn uniform(n: usize, m: Sym2) -> Result<Self> {
        Self::new(vec![m; n])
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn tensors(&self) -> &[Sym2] {
        &self.tensors
    }

    pub fn get(&self, v: usize) -> Sym2 {
        self.tensors[v]
    }

    pub fn all_spd(&self) -> bool {
        self.tensors.iter().all(Sym2::is_spd)
    }

    /// Largest eigenvalue ratio over all vertices.
    pub fn max_anisotropy(&self) -> f64 {
        self.tensors
            .iter()
            .map(|m| {
                let (l1, l2, _) = m.eigen();
                l1 / l2
            })
            .fold(1.0, f64::max)
    }

    /// Barycentric blend of the vertex tensors of one triangle.
    pub(crate) fn blend(&self, tri: &[usize; 3], bc: &BarycentricCoords) -> Sym2 {
        let mut m = Sym2::default();
        for (k, &v) in tri.iter().enumerate() {
            m = m.add(&self.tensors[v].scale(bc.weights[k]));
        }
        m
    }
}

enum Fit {
    Hessian(Sym2),
    Gradient(Sym2),
}

fn two_ring(adj: &[Vec<usize>], v: usize) -> Vec<usize> {
    let mut ring: Vec<usize> = adj[v].clone();
    for &u in &adj[v] {
        ring.extend(adj[u].iter().copied().filter(|&w| w != v));
    }
    ring.sort_unstable();
    ring.dedup();
    ring
}

fn least_squares(rows: &[Vec<f64>], rhs: &[f64]) -> Option<DVector<f64>> {
    let cols = rows[0].len();
    let a = DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]);
    let b = DVector::from_column_slice(rhs);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin < 1e-9 * smax {
        return None;
    }
    svd.solve(&b, 0.0).ok()
}

fn fit_vertex(mesh: &TriMesh, adj: &[Vec<usize>], values: &[f64], v: usize) -> Fit {
    let p = mesh.vertices()[v];
    let scale = {
        let d: f64 = adj[v].iter().map(|&u| p.dist(mesh.vertices()[u])).sum();
        (d / adj[v].len().max(1) as f64).max(f64::MIN_POSITIVE)
    };
    let offset = |u: usize| {
        let q = mesh.vertices()[u];
        ((q.x - p.x) / scale, (q.y - p.y) / scale)
    };
    // values relative to the centre, so a constant field fits exactly zero
    let rel = |u: usize| values[u] - values[v];
    let ring = two_ring(adj, v);
    if ring.len() >= 6 {
        let mut rows = vec![vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]];
        let mut rhs = vec![0.0];
        for &u in &ring {
            let (dx, dy) = offset(u);
            rows.push(vec![1.0, dx, dy, 0.5 * dx * dx, dx * dy, 0.5 * dy * dy]);
            rhs.push(rel(u));
        }
        if let Some(c) = least_squares(&rows, &rhs) {
            let s2 = scale * scale;
            return Fit::Hessian(Sym2::new(c[3] / s2, c[4] / s2, c[5] / s2));
        }
    }
    let mut rows = vec![vec![1.0, 0.0, 0.0]];
    let mut rhs = vec![0.0];
    for &u in &adj[v] {
        let (dx, dy) = offset(u);
        rows.push(vec![1.0, dx, dy]);
        rhs.push(rel(u));
    }
    let g = least_squares(&rows, &rhs)
        .map(|c| (c[1] / scale, c[2] / scale))
        .unwrap_or((0.0, 0.0));
    Fit::Gradient(Sym2::new(g.0 * g.0, g.0 * g.1, g.1 * g.1))
}

/// Recovers a Hessian per vertex by a quadratic least-squares fit over its
/// two-ring, and turns it into a metric: absolute eigenvalues, plus
/// `epsilon I`, anisotropy capped, then scaled globally so that
/// `sum_K |K| sqrt(det M_K)` equals the current triangle count.
pub fn compute_metric(mesh: &TriMesh, img: &GrayImage, cfg: &AmaConfig) -> Result<MetricField> {
    cfg.validate()?;
    let values = mesh.values().ok_or(Error::ValuesUnset)?;
    let rect = mesh.bounding_rect();
    if rect.xmax > (img.width() - 1) as f64 || rect.ymax > (img.height() - 1) as f64 {
        return Err(Error::DimensionMismatch(format!(
            "mesh extends past the {}x{} image",
            img.width(),
            img.height()
        )));
    }
    let adj = mesh.vertex_adjacency();
    let fits: Vec<Fit> = (0..mesh.num_vertices())
        .into_par_iter()
        .map(|v| fit_vertex(mesh, &adj, values, v))
        .collect();
    let fallback_count = fits
        .iter()
        .filter(|f| matches!(f, Fit::Gradient(_)))
        .count();
    let abs: Vec<Sym2> = fits
        .iter()
        .map(|f| match f {
            Fit::Hessian(h) | Fit::Gradient(h) => h.abs(),
        })
        .collect();

    let epsilon = cfg
        .hessian_regularization
        .unwrap_or_else(|| {
            let total: f64 = abs
                .iter()
                .map(|m| (m.xx.abs() + 2.0 * m.xy.abs() + m.yy.abs()) / 4.0)
                .sum();
            1e-2 * total / abs.len() as f64
        })
        .max(REGULARIZATION_FLOOR);

    let mut tensors: Vec<Sym2> = abs
        .iter()
        .map(|m| {
            let (l1, l2, e) = m.add(&Sym2::IDENTITY.scale(epsilon)).eigen();
            Sym2::from_eigen(l1, l2.max(l1 / cfg.anisotropy_cap), e)
        })
        .collect();

    let demand: f64 = mesh
        .triangles()
        .iter()
        .enumerate()
        .map(|(t, tri)| {
            let m = tensors[tri[0]]
                .add(&tensors[tri[1]])
                .add(&tensors[tri[2]])
                .scale(1.0 / 3.0);
            mesh.area(t) * m.det().max(0.0).sqrt()
        })
        .sum();
    let s = mesh.num_triangles() as f64 / demand;
    for m in &mut tensors {
        *m = m.scale(s);
    }
    let mut field = MetricField::new(tensors)?;
    field.fallback_count = fallback_count;
    field.regularization = epsilon * s;
    Ok(field)
}

/// Angle of the major eigenvector, in `(-pi/2, pi/2]`.
pub fn principal_angle(m: &Sym2) -> f64 {
    let (_, _, e) = m.eigen();
    e.1.atan2(e.0)
}

pub(crate) fn metric_at(
    field: &MetricField,
    background: &TriMesh,
    p: Point,
    hint: &mut usize,
) -> Sym2 {
    match background.locate_from(p, hint) {
        Ok(bc) => field.blend(&background.triangles()[bc.triangle], &bc),
        Err(_) => field.get(0),
    }
}
