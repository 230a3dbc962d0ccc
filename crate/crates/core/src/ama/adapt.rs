use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::metric::{metric_at, MetricField, Sym2};
use super::AmaConfig;
use crate::error::{Error, Result};
use crate::imgio::GrayImage;
use crate::mesh::delaunay;
use crate::mesh::predicates::orient2d;
use crate::mesh::{Point, TriMesh};

/// Fraction of each jitter cell kept clear on every side.
const JITTER_MARGIN: f64 = 0.1;
/// Fraction of the way each vertex moves toward its weighted average.
const RELAXATION: f64 = 0.5;
/// Upper bound on flip sweeps after one smoothing pass.
const MAX_FLIP_SWEEPS: usize = 50;
/// A flip must raise the smaller minimum metric angle by more than this.
const FLIP_GAIN: f64 = 1e-12;

/// Number of vertices for a sample density on a `width x height` image.
pub fn vertex_budget(width: usize, height: usize, density: f64) -> usize {
    (density * (width * height) as f64).round() as usize
}

/// Splits `total` among parts proportionally to `weights` by largest
/// remainder; ties go to the earlier part.
fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut out: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let missing = total - out.iter().sum::<usize>();
    for &i in order.iter().take(missing) {
        out[i] += 1;
    }
    out
}

/// Initial vertex set: the four corners, evenly spaced points on each side
/// (sides share the boundary budget by length), and a seeded jittered grid
/// inside, Delaunay-triangulated.
pub fn initial_mesh(img: &GrayImage, density: f64, seed: u64) -> Result<TriMesh> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "density {density} outside (0, 1]"
        )));
    }
    let n = vertex_budget(img.width(), img.height(), density);
    if n < 4 {
        return Err(Error::InvalidParameter(format!(
            "density {density} yields {n} vertices, fewer than the 4 corners"
        )));
    }
    let (lx, ly) = ((img.width() - 1) as f64, (img.height() - 1) as f64);

    // spacing u^-1 of a lattice with (lx u + 1)(ly u + 1) = n points
    let (a, b, c) = (lx * ly, lx + ly, 1.0 - n as f64);
    let u = (-b + (b * b - 4.0 * a * c).sqrt()) / (2.0 * a);
    let boundary = (((2.0 * (lx + ly) * u).round() as usize).saturating_sub(4)).min(n - 4);
    let interior = n - 4 - boundary;
    let sides = apportion(boundary, &[lx, ly, lx, ly]);

    let mut points = vec![
        Point::new(0.0, 0.0),
        Point::new(lx, 0.0),
        Point::new(lx, ly),
        Point::new(0.0, ly),
    ];
    for (side, &count) in sides.iter().enumerate() {
        for k in 1..=count {
            let t = k as f64 / (count + 1) as f64;
            points.push(match side {
                0 => Point::new(t * lx, 0.0),
                1 => Point::new(lx, t * ly),
                2 => Point::new((1.0 - t) * lx, ly),
                _ => Point::new(0.0, (1.0 - t) * ly),
            });
        }
    }

    if interior > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gx = ((interior as f64 * lx / ly).sqrt().round() as usize).clamp(1, interior);
        let gy = interior.div_ceil(gx);
        let mut cells: Vec<usize> = (0..gx * gy).collect();
        cells.shuffle(&mut rng);
        cells.truncate(interior);
        cells.sort_unstable();
        let (cw, ch) = (lx / gx as f64, ly / gy as f64);
        for cell in cells {
            let (i, j) = (cell / gx, cell % gx);
            let jx = rng.random_range(JITTER_MARGIN..1.0 - JITTER_MARGIN);
            let jy = rng.random_range(JITTER_MARGIN..1.0 - JITTER_MARGIN);
            points.push(Point::new((j as f64 + jx) * cw, (i as f64 + jy) * ch));
        }
    }
    delaunay(&points)
}

/// Which part of the rectangle boundary a vertex lies on.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Slide {
    Free,
    /// Constant y; moves along x.
    Horizontal,
    /// Constant x; moves along y.
    Vertical,
    Fixed,
}

fn classify(p: Point, lx: f64, ly: f64) -> Slide {
    let on_x = p.x == 0.0 || p.x == lx;
    let on_y = p.y == 0.0 || p.y == ly;
    match (on_x, on_y) {
        (true, true) => Slide::Fixed,
        (true, false) => Slide::Vertical,
        (false, true) => Slide::Horizontal,
        (false, false) => Slide::Free,
    }
}

/// Smallest angle of triangle `p q r` measured in the metric `m`.
fn min_metric_angle(m: &Sym2, p: Point, q: Point, r: Point) -> f64 {
    let angle = |a: Point, b: Point, c: Point| {
        let u = (b.x - a.x, b.y - a.y);
        let v = (c.x - a.x, c.y - a.y);
        let cos = m.inner(u, v) / (m.inner(u, u) * m.inner(v, v)).sqrt();
        cos.clamp(-1.0, 1.0).acos()
    };
    angle(p, q, r).min(angle(q, r, p)).min(angle(r, p, q))
}

/// Euclidean minimum angle over all triangles, in radians.
pub fn min_angle(mesh: &TriMesh) -> f64 {
    (0..mesh.num_triangles())
        .map(|t| {
            let [p, q, r] = mesh.corners_of(t);
            min_metric_angle(&Sym2::IDENTITY, p, q, r)
        })
        .fold(std::f64::consts::PI, f64::min)
}

/// Minimum angle of triangle `t` in the mean metric of its corners.
fn triangle_quality(mesh: &TriMesh, metric: &[Sym2], t: usize, v: usize, p: Point) -> f64 {
    let tri = mesh.triangles()[t];
    let pt = |k: usize| {
        if tri[k] == v {
            p
        } else {
            mesh.vertices()[tri[k]]
        }
    };
    let m = metric[tri[0]]
        .add(&metric[tri[1]])
        .add(&metric[tri[2]])
        .scale(1.0 / 3.0);
    min_metric_angle(&m, pt(0), pt(1), pt(2))
}

/// Whether moving `v` to `p` keeps every triangle of its star positively
/// oriented and no worse than `floor` in metric angle.
fn star_accepts(
    mesh: &TriMesh,
    metric: &[Sym2],
    star: &[usize],
    v: usize,
    p: Point,
    floor: f64,
) -> bool {
    star.iter().all(|&t| {
        let tri = mesh.triangles()[t];
        let pt = |k: usize| {
            if tri[k] == v {
                p
            } else {
                mesh.vertices()[tri[k]]
            }
        };
        orient2d(pt(0), pt(1), pt(2)) > 0.0 && triangle_quality(mesh, metric, t, v, p) >= floor
    })
}

/// One Gauss-Seidel sweep of metric-weighted Laplacian smoothing. Each
/// neighbour pulls with the matrix weight `sqrt(M_e)`, `M_e` the metric
/// averaged over the edge, so the new position minimizes
/// `sum_j (x - x_j)^T sqrt(M_e) (x - x_j)`; the vertex moves
/// [`RELAXATION`] of the way there. Moves that would push any triangle
/// below the worst metric angle present at the start of the pass are
/// rejected, so that worst angle never drops.
fn smoothing_pass(mesh: &mut TriMesh, metric: &[Sym2], lx: f64, ly: f64) -> usize {
    let adj = mesh.vertex_adjacency();
    let stars = mesh.vertex_triangles();
    let floor = (0..mesh.num_triangles())
        .map(|t| triangle_quality(mesh, metric, t, usize::MAX, Point::new(0.0, 0.0)))
        .fold(std::f64::consts::PI, f64::min);
    let mut moved = 0;
    for v in 0..mesh.num_vertices() {
        let p = mesh.vertices()[v];
        let slide = classify(p, lx, ly);
        if slide == Slide::Fixed || adj[v].is_empty() {
            continue;
        }
        let mut wsum = Sym2::default();
        let mut rhs = (0.0, 0.0);
        for &u in &adj[v] {
            let w = metric[v].add(&metric[u]).scale(0.5).sqrt();
            let q = mesh.vertices()[u];
            let wq = w.apply((q.x, q.y));
            wsum = wsum.add(&w);
            rhs = (rhs.0 + wq.0, rhs.1 + wq.1);
        }
        let target = match slide {
            Slide::Free => match wsum.inverse() {
                Some(inv) => {
                    let x = inv.apply(rhs);
                    Point::new(x.0, x.1)
                }
                None => continue,
            },
            // minimize the same energy along the side
            Slide::Horizontal => {
                let x = (rhs.0 - wsum.xy * p.y) / wsum.xx;
                Point::new(x.clamp(0.0, lx), p.y)
            }
            Slide::Vertical => {
                let y = (rhs.1 - wsum.xy * p.x) / wsum.yy;
                Point::new(p.x, y.clamp(0.0, ly))
            }
            Slide::Fixed => unreachable!(),
        };
        if !(target.x.is_finite() && target.y.is_finite()) || target == p {
            continue;
        }
        let target = Point::new(
            p.x + RELAXATION * (target.x - p.x),
            p.y + RELAXATION * (target.y - p.y),
        );
        if star_accepts(mesh, metric, &stars[v], v, target, floor) {
            mesh.set_vertex(v, target);
            moved += 1;
        }
    }
    moved
}

/// Flips interior edges while doing so raises the smaller of the two
/// minimum metric angles. Returns the number of flips.
fn flip_pass(mesh: &mut TriMesh, metric: &[Sym2]) -> usize {
    let mut flips = 0;
    for _ in 0..MAX_FLIP_SWEEPS {
        let mut changed = false;
        for t in 0..mesh.num_triangles() {
            for i in 0..3 {
                let Some((u, j)) = mesh.opposite(t, i) else {
                    continue;
                };
                let tri = mesh.triangles()[t];
                let (a, b, c) = (tri[i], tri[(i + 1) % 3], tri[(i + 2) % 3]);
                let d = mesh.triangles()[u][j];
                if !mesh.can_flip(t, i) {
                    continue;
                }
                let m = metric[a]
                    .add(&metric[b])
                    .add(&metric[c])
                    .add(&metric[d])
                    .scale(0.25);
                let p = |v: usize| mesh.vertices()[v];
                let before = min_metric_angle(&m, p(a), p(b), p(c)).min(min_metric_angle(
                    &m,
                    p(d),
                    p(c),
                    p(b),
                ));
                let after = min_metric_angle(&m, p(a), p(b), p(d)).min(min_metric_angle(
                    &m,
                    p(a),
                    p(d),
                    p(c),
                ));
                if after > before + FLIP_GAIN {
                    mesh.flip(t, i);
                    flips += 1;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    flips
}

/// Moves vertices toward a quasi-uniform mesh in the given metric at a
/// fixed vertex count: `cfg.smoothing_passes` rounds of metric-weighted
/// Laplacian smoothing, each followed by metric-Delaunay edge flips.
/// Boundary vertices slide along their side, corners stay put, and any
/// move that would invert a triangle is skipped.
///
/// The metric is carried as a field over the input mesh and re-sampled at
/// the current vertex positions before every pass.
pub fn adapt_mesh(mesh: &TriMesh, metric: &MetricField, cfg: &AmaConfig) -> Result<TriMesh> {
    cfg.validate()?;
    if metric.len() != mesh.num_vertices() {
        return Err(Error::DimensionMismatch(format!(
            "{} metric tensors for {} vertices",
            metric.len(),
            mesh.num_vertices()
        )));
    }
    let rect = mesh.bounding_rect();
    if rect.xmin != 0.0 || rect.ymin != 0.0 {
        return Err(Error::InvalidMesh(
            "mesh does not start at the origin".into(),
        ));
    }
    let (lx, ly) = (rect.xmax, rect.ymax);
    let background = mesh;
    let mut out = mesh.clone();
    let mut hint = 0;
    for _ in 0..cfg.smoothing_passes {
        let local: Vec<Sym2> = out
            .vertices()
            .iter()
            .map(|&p| metric_at(metric, background, p, &mut hint))
            .collect();
        smoothing_pass(&mut out, &local, lx, ly);
        flip_pass(&mut out, &local);
    }
    out.clear_values();
    Ok(out)
}
