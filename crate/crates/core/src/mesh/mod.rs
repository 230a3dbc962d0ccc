//! Triangular mesh kernel: Delaunay construction, point location, linear
//! (P1) finite element interpolation and rasterization.

mod delaunay;
mod locate;
pub mod predicates;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

pub use delaunay::{delaunay, DUPLICATE_TOLERANCE};
pub use locate::BarycentricCoords;

use crate::error::{Error, Result};
use crate::imgio::GrayImage;
use predicates::{incircle, orient2d};

/// Point in pixel space: `x` is the column, `y` the row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned bounding rectangle of a mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Rect {
    pub fn area(&self) -> f64 {
        (self.xmax - self.xmin) * (self.ymax - self.ymin)
    }

    pub fn contains(&self, p: Point) -> bool {
        (self.xmin..=self.xmax).contains(&p.x) && (self.ymin..=self.ymax).contains(&p.y)
    }

    pub fn corners(&self) -> [Point; 4] {
        [
            Point::new(self.xmin, self.ymin),
            Point::new(self.xmax, self.ymin),
            Point::new(self.xmin, self.ymax),
            Point::new(self.xmax, self.ymax),
        ]
    }
}

/// Counterclockwise triangle mesh with optional per-vertex grey values.
///
/// `neighbors[t][i]` is the triangle across the edge opposite vertex
/// `triangles[t][i]`, or `None` on the mesh boundary.
#[derive(Debug)]
pub struct TriMesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    neighbors: Vec<[Option<usize>; 3]>,
    values: Option<Vec<f64>>,
    boundary: Vec<bool>,
    last_found: AtomicUsize,
}

impl Clone for TriMesh {
    fn clone(&self) -> Self {
        Self {
            vertices: self.vertices.clone(),
            triangles: self.triangles.clone(),
            neighbors: self.neighbors.clone(),
            values: self.values.clone(),
            boundary: self.boundary.clone(),
            last_found: AtomicUsize::new(0),
        }
    }
}

impl PartialEq for TriMesh {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices
            && self.triangles == other.triangles
            && self.values == other.values
    }
}

/// Neighbour table for a set of consistently oriented triangles. Slots
/// holding `usize::MAX` are treated as ordinary vertex ids, which lets the
/// Delaunay builder link its ghost triangles with the same routine.
pub(crate) fn link_triangles(tris: &[[usize; 3]]) -> Vec<[Option<usize>; 3]> {
    let mut edge_owner = HashMap::with_capacity(tris.len() * 3);
    for (t, tri) in tris.iter().enumerate() {
        for i in 0..3 {
            edge_owner.insert((tri[(i + 1) % 3], tri[(i + 2) % 3]), t);
        }
    }
    tris.iter()
        .map(|tri| {
            let mut n = [None; 3];
            for (i, slot) in n.iter_mut().enumerate() {
                *slot = edge_owner
                    .get(&(tri[(i + 2) % 3], tri[(i + 1) % 3]))
                    .copied();
            }
            n
        })
        .collect()
}

impl TriMesh {
    /// Builds a mesh from raw parts, checking index ranges, orientation and
    /// edge manifoldness.
    pub fn from_parts(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let nv = vertices.len();
        let mut directed = HashMap::with_capacity(triangles.len() * 3);
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} index out of range"
                )));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidMesh(format!("triangle {t} repeats a vertex")));
            }
            if orient2d(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]) <= 0.0 {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} is not counterclockwise with positive area"
                )));
            }
            for i in 0..3 {
                if directed
                    .insert((tri[(i + 1) % 3], tri[(i + 2) % 3]), t)
                    .is_some()
                {
                    return Err(Error::InvalidMesh(format!(
                        "edge {}-{} used twice in the same direction",
                        tri[(i + 1) % 3],
                        tri[(i + 2) % 3]
                    )));
                }
            }
        }
        let mut mesh = Self {
            vertices,
            neighbors: link_triangles(&triangles),
            triangles,
            values: None,
            boundary: vec![false; nv],
            last_found: AtomicUsize::new(0),
        };
        mesh.refresh_boundary();
        Ok(mesh)
    }

    fn refresh_boundary(&mut self) {
        self.boundary.iter_mut().for_each(|b| *b = false);
        for (tri, nbr) in self.triangles.iter().zip(&self.neighbors) {
            for i in 0..3 {
                if nbr[i].is_none() {
                    self.boundary[tri[(i + 1) % 3]] = true;
                    self.boundary[tri[(i + 2) % 3]] = true;
                }
            }
        }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn neighbors(&self) -> &[[Option<usize>; 3]] {
        &self.neighbors
    }

    pub fn values(&self) -> Option<&[f64]> {
        self.values.as_deref()
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn set_values(&mut self, values: Vec<f64>) -> Result<()> {
        if values.len() != self.vertices.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} vertices",
                values.len(),
                self.vertices.len()
            )));
        }
        self.values = Some(values);
        Ok(())
    }

    pub fn clear_values(&mut self) {
        self.values = None;
    }

    pub(crate) fn set_vertex(&mut self, v: usize, p: Point) {
        self.vertices[v] = p;
    }

    pub fn corners_of(&self, t: usize) -> [Point; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    /// Signed area of triangle `t` (positive for a valid mesh).
    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners_of(t);
        0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.area(t)).sum()
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.corners_of(t);
        Point::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0)
    }

    pub fn bounding_rect(&self) -> Rect {
        let mut r = Rect {
            xmin: f64::INFINITY,
            xmax: f64::NEG_INFINITY,
            ymin: f64::INFINITY,
            ymax: f64::NEG_INFINITY,
        };
        for p in &self.vertices {
            r.xmin = r.xmin.min(p.x);
            r.xmax = r.xmax.max(p.x);
            r.ymin = r.ymin.min(p.y);
            r.ymax = r.ymax.max(p.y);
        }
        r
    }

    /// Undirected edges as sorted `(lo, hi)` pairs, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| {
                (0..3).map(move |i| {
                    let (a, b) = (t[i], t[(i + 1) % 3]);
                    (a.min(b), a.max(b))
                })
            })
            .collect();
        e.sort_unstable();
        e.dedup();
        e
    }

    /// Sorted neighbour lists for every vertex.
    pub fn vertex_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for (a, b) in self.edges() {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    /// Triangles incident to each vertex, in index order.
    pub fn vertex_triangles(&self) -> Vec<Vec<usize>> {
        let mut vt = vec![Vec::new(); self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                vt[v].push(t);
            }
        }
        vt
    }

    /// Checks orientation, adjacency symmetry and that boundary edges are
    /// each owned by one triangle.
    pub fn validate(&self) -> Result<()> {
        for (t, tri) in self.triangles.iter().enumerate() {
            if orient2d(
                self.vertices[tri[0]],
                self.vertices[tri[1]],
                self.vertices[tri[2]],
            ) <= 0.0
            {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} has non-positive area"
                )));
            }
            for i in 0..3 {
                if let Some(n) = self.neighbors[t][i] {
                    let (a, b) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
                    let back = self.neighbors[n].iter().position(|&x| x == Some(t));
                    let ok = back.is_some_and(|j| {
                        let nt = self.triangles[n];
                        nt[(j + 1) % 3] == b && nt[(j + 2) % 3] == a
                    });
                    if !ok {
                        return Err(Error::InvalidMesh(format!(
                            "adjacency between {t} and {n} is inconsistent"
                        )));
                    }
                }
            }
        }
        let fresh = link_triangles(&self.triangles);
        if fresh != self.neighbors {
            return Err(Error::InvalidMesh("stale neighbour table".into()));
        }
        Ok(())
    }

    /// Checks that the mesh tiles its bounding rectangle: valid, every
    /// boundary edge lies on the rectangle border, the corners are vertices
    /// and the areas add up.
    pub fn validate_tiling(&self) -> Result<()> {
        self.validate()?;
        let rect = self.bounding_rect();
        for c in rect.corners() {
            if !self.vertices.contains(&c) {
                return Err(Error::InvalidMesh(format!(
                    "corner ({}, {}) is not a vertex",
                    c.x, c.y
                )));
            }
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            for i in 0..3 {
                if self.neighbors[t][i].is_none() {
                    let a = self.vertices[tri[(i + 1) % 3]];
                    let b = self.vertices[tri[(i + 2) % 3]];
                    let on_side = (a.x == b.x && (a.x == rect.xmin || a.x == rect.xmax))
                        || (a.y == b.y && (a.y == rect.ymin || a.y == rect.ymax));
                    if !on_side {
                        return Err(Error::InvalidMesh(format!(
                            "boundary edge of triangle {t} is off the rectangle border"
                        )));
                    }
                }
            }
        }
        let area = self.total_area();
        if ((area - rect.area()) / rect.area()).abs() > 1e-8 {
            return Err(Error::InvalidMesh(format!(
                "triangle areas sum to {area}, rectangle is {}",
                rect.area()
            )));
        }
        Ok(())
    }

    /// For the interior edge opposite vertex `i` of triangle `t`, the
    /// neighbour triangle and the index of its vertex across the edge.
    pub(crate) fn opposite(&self, t: usize, i: usize) -> Option<(usize, usize)> {
        let u = self.neighbors[t][i]?;
        let j = self.neighbors[u]
            .iter()
            .position(|&x| x == Some(t))
            .expect("symmetric adjacency");
        Some((u, j))
    }

    /// True when replacing the edge opposite `i` in `t` by the other
    /// diagonal keeps both triangles positively oriented.
    pub(crate) fn can_flip(&self, t: usize, i: usize) -> bool {
        let Some((u, j)) = self.opposite(t, i) else {
            return false;
        };
        let tri = self.triangles[t];
        let (a, b, c) = (tri[i], tri[(i + 1) % 3], tri[(i + 2) % 3]);
        let d = self.triangles[u][j];
        let p = |v: usize| self.vertices[v];
        orient2d(p(a), p(b), p(d)) > 0.0 && orient2d(p(a), p(d), p(c)) > 0.0
    }

    /// Replaces the edge `b c` shared by `t = [a b c]` (with `a` at slot
    /// `i`) and its neighbour `[d c b]` by the edge `a d`. The caller checks
    /// [`TriMesh::can_flip`] first.
    pub(crate) fn flip(&mut self, t: usize, i: usize) {
        let (u, j) = self.opposite(t, i).expect("interior edge");
        let tri = self.triangles[t];
        let (a, b, c) = (tri[i], tri[(i + 1) % 3], tri[(i + 2) % 3]);
        let d = self.triangles[u][j];
        let n_ca = self.neighbors[t][(i + 1) % 3];
        let n_ab = self.neighbors[t][(i + 2) % 3];
        let ut = self.triangles[u];
        // u = [d, c, b] up to rotation starting at slot j
        debug_assert_eq!(ut[(j + 1) % 3], c);
        let n_bd = self.neighbors[u][(j + 1) % 3];
        let n_dc = self.neighbors[u][(j + 2) % 3];

        self.triangles[t] = [a, b, d];
        self.neighbors[t] = [n_bd, Some(u), n_ab];
        self.triangles[u] = [a, d, c];
        self.neighbors[u] = [n_dc, n_ca, Some(t)];
        let relink =
            |nbrs: &mut Vec<[Option<usize>; 3]>, n: Option<usize>, old: usize, new: usize| {
                if let Some(n) = n {
                    for slot in nbrs[n].iter_mut() {
                        if *slot == Some(old) {
                            *slot = Some(new);
                        }
                    }
                }
            };
        relink(&mut self.neighbors, n_bd, u, t);
        relink(&mut self.neighbors, n_ca, t, u);
    }

    /// Resolves cocircular quadrilaterals toward the diagonal with the
    /// smallest `(index sum, min index)`. Every flip strictly lowers one edge
    /// key, so the loop terminates.
    fn canonicalize_cocircular(&mut self) {
        let key = |a: usize, b: usize| (a + b, a.min(b));
        loop {
            let mut flipped = false;
            for t in 0..self.triangles.len() {
                for i in 0..3 {
                    let Some((u, j)) = self.opposite(t, i) else {
                        continue;
                    };
                    let tri = self.triangles[t];
                    let (a, b, c) = (tri[i], tri[(i + 1) % 3], tri[(i + 2) % 3]);
                    let d = self.triangles[u][j];
                    let p = |v: usize| self.vertices[v];
                    if incircle(p(a), p(b), p(c), p(d)) == 0.0
                        && key(a, d) < key(b, c)
                        && self.can_flip(t, i)
                    {
                        self.flip(t, i);
                        flipped = true;
                    }
                }
            }
            if !flipped {
                break;
            }
        }
    }

    /// Value of the P1 interpolant at `q`.
    pub fn interpolate(&self, q: Point) -> Result<f64> {
        let values = self.values.as_ref().ok_or(Error::ValuesUnset)?;
        let bc = self.locate(q)?;
        Ok(bc.apply(&self.triangles[bc.triangle], values))
    }

    /// Evaluates the interpolant at every pixel center and clamps to
    /// `[0, 255]`.
    pub fn rasterize(&self, width: usize, height: usize) -> Result<GrayImage> {
        let values = self.values.as_ref().ok_or(Error::ValuesUnset)?;
        let rows: Result<Vec<Vec<f64>>> = (0..height)
            .into_par_iter()
            .map(|row| {
                let mut hint = self.last_found.load(Ordering::Relaxed);
                (0..width)
                    .map(|col| {
                        let q = Point::new(col as f64, row as f64);
                        let bc = self.locate_from(q, &mut hint)?;
                        Ok(bc.apply(&self.triangles[bc.triangle], values))
                    })
                    .collect()
            })
            .collect();
        let data: Vec<f64> = rows?.into_iter().flatten().collect();
        GrayImage::from_clamped(width, height, data)
    }

    /// Writes the plain-text mesh format: a `nv nt` header, `x y value`
    /// vertex lines, then `i j k` triangle lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{} {}", self.vertices.len(), self.triangles.len()).unwrap();
        for (k, p) in self.vertices.iter().enumerate() {
            let v = self.values.as_ref().map_or(0.0, |v| v[k]);
            writeln!(s, "{} {} {}", p.x, p.y, v).unwrap();
        }
        for t in &self.triangles {
            writeln!(s, "{} {} {}", t[0], t[1], t[2]).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::InvalidMesh(format!("mesh text: {m}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| bad("empty"))?;
        let header = header.trim().trim_start_matches("OFF-like:");
        let counts: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad("header")))
            .collect::<Result<_>>()?;
        let [nv, nt] = counts[..] else {
            return Err(bad("header needs two counts"));
        };
        let mut vertices = Vec::with_capacity(nv);
        let mut values = Vec::with_capacity(nv);
        for _ in 0..nv {
            let f: Vec<f64> = lines
                .next()
                .ok_or_else(|| bad("missing vertex line"))?
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad("vertex number")))
                .collect::<Result<_>>()?;
            let [x, y, v] = f[..] else {
                return Err(bad("vertex line needs 3 numbers"));
            };
            vertices.push(Point::new(x, y));
            values.push(v);
        }
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let f: Vec<usize> = lines
                .next()
                .ok_or_else(|| bad("missing triangle line"))?
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad("triangle index")))
                .collect::<Result<_>>()?;
            let [i, j, k] = f[..] else {
                return Err(bad("triangle line needs 3 indices"));
            };
            triangles.push([i, j, k]);
        }
        let mut mesh = Self::from_parts(vertices, triangles)?;
        mesh.values = Some(values);
        Ok(mesh)
    }

    pub fn save_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load_text(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

/// Samples the image bilinearly at every vertex.
pub fn assign_values(mesh: &TriMesh, img: &GrayImage) -> Result<TriMesh> {
    let values = mesh
        .vertices
        .iter()
        .map(|p| img.sample_bilinear(p.x, p.y))
        .collect::<Result<Vec<f64>>>()?;
    let mut out = mesh.clone();
    out.values = Some(values);
    Ok(out)
}

/// The two-triangle mesh on the corners of a `width x height` pixel grid.
pub fn corner_mesh(width: usize, height: usize) -> Result<TriMesh> {
    let (w, h) = ((width - 1) as f64, (height - 1) as f64);
    delaunay(&[
        Point::new(0.0, 0.0),
        Point::new(w, 0.0),
        Point::new(0.0, h),
        Point::new(w, h),
    ])
}
