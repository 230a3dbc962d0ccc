//! Incremental Delaunay triangulation (Bowyer-Watson cavity insertion with
//! ghost triangles for the unbounded exterior) on exact predicates.

use std::collections::HashMap;

use super::predicates::{incircle, orient2d, strictly_between};
use super::{Point, TriMesh};
use crate::error::{Error, Result};

/// Minimum separation between distinct input points.
pub const DUPLICATE_TOLERANCE: f64 = 1e-9;

const GHOST: usize = usize::MAX;
const NONE: usize = usize::MAX;

struct Builder<'a> {
    pts: &'a [Point],
    tris: Vec<[usize; 3]>,
    nbr: Vec<[usize; 3]>,
    alive: Vec<bool>,
    free: Vec<usize>,
    last: usize,
    rng: u64,
}

impl<'a> Builder<'a> {
    fn ghost_pos(&self, t: usize) -> Option<usize> {
        self.tris[t].iter().position(|&v| v == GHOST)
    }

    fn conflicts(&self, t: usize, p: Point) -> bool {
        let tri = self.tris[t];
        match self.ghost_pos(t) {
            None => incircle(self.pts[tri[0]], self.pts[tri[1]], self.pts[tri[2]], p) > 0.0,
            Some(k) => {
                let u = self.pts[tri[(k + 1) % 3]];
                let v = self.pts[tri[(k + 2) % 3]];
                let o = orient2d(u, v, p);
                o > 0.0 || (o == 0.0 && strictly_between(u, v, p))
            }
        }
    }

    fn next_rand(&mut self) -> usize {
        // xorshift64; only steers the walk, never the result
        self.rng ^= self.rng << 13;
        self.rng ^= self.rng >> 7;
        self.rng ^= self.rng << 17;
        (self.rng % 3) as usize
    }

    /// Visibility walk to a triangle that conflicts with `p`.
    fn locate(&mut self, p: Point) -> usize {
        let mut t = self.last;
        if !self.alive[t] {
            t = self.alive.iter().position(|&a| a).expect("live triangle");
        }
        'walk: loop {
            if let Some(k) = self.ghost_pos(t) {
                if self.conflicts(t, p) {
                    return t;
                }
                t = self.nbr[t][k];
                continue;
            }
            let tri = self.tris[t];
            let start = self.next_rand();
            for s in 0..3 {
                let i = (start + s) % 3;
                let a = self.pts[tri[(i + 1) % 3]];
                let b = self.pts[tri[(i + 2) % 3]];
                if orient2d(a, b, p) < 0.0 {
                    t = self.nbr[t][i];
                    continue 'walk;
                }
            }
            return t;
        }
    }

    fn alloc(&mut self, tri: [usize; 3]) -> usize {
        if let Some(t) = self.free.pop() {
            self.tris[t] = tri;
            self.nbr[t] = [NONE; 3];
            self.alive[t] = true;
            t
        } else {
            self.tris.push(tri);
            self.nbr.push([NONE; 3]);
            self.alive.push(true);
            self.tris.len() - 1
        }
    }

    fn insert(&mut self, pi: usize) {
        let p = self.pts[pi];
        let seed = self.locate(p);

        let mut in_cavity = HashMap::new();
        in_cavity.insert(seed, ());
        let mut stack = vec![seed];
        let mut cavity = Vec::new();
        // (u, w, outside neighbour) with u -> w counterclockwise around the cavity
        let mut boundary = Vec::new();
        while let Some(t) = stack.pop() {
            cavity.push(t);
            for i in 0..3 {
                let n = self.nbr[t][i];
                if in_cavity.contains_key(&n) {
                    continue;
                }
                if self.conflicts(n, p) {
                    in_cavity.insert(n, ());
                    stack.push(n);
                } else {
                    let tri = self.tris[t];
                    boundary.push((tri[(i + 1) % 3], tri[(i + 2) % 3], n));
                }
            }
        }
        // Boundary edges are discovered before all cavity members are known;
        // drop the ones whose "outside" triangle later joined the cavity.
        boundary.retain(|(_, _, n)| !in_cavity.contains_key(n));

        for &t in &cavity {
            self.alive[t] = false;
            self.free.push(t);
        }

        let mut by_start = HashMap::with_capacity(boundary.len());
        let mut by_end = HashMap::with_capacity(boundary.len());
        let mut created = Vec::with_capacity(boundary.len());
        for &(u, w, n) in &boundary {
            let t = self.alloc([u, w, pi]);
            self.nbr[t][2] = n;
            // match by edge, not by id: `old` may already have been recycled
            let nt = self.tris[n];
            let j = (0..3)
                .find(|&j| nt[(j + 1) % 3] == w && nt[(j + 2) % 3] == u)
                .expect("outside neighbour shares the edge");
            self.nbr[n][j] = t;
            by_start.insert(u, t);
            by_end.insert(w, t);
            created.push(t);
        }
        for &t in &created {
            let [u, w, _] = self.tris[t];
            // opposite u: edge (w, p), shared with the triangle starting at w
            self.nbr[t][0] = by_start[&w];
            // opposite w: edge (p, u), shared with the triangle ending at u
            self.nbr[t][1] = by_end[&u];
        }
        self.last = created[0];
    }
}

fn check_duplicates(points: &[Point]) -> Result<()> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .x
            .total_cmp(&points[b].x)
            .then(points[a].y.total_cmp(&points[b].y))
    });
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if points[j].x - points[i].x >= DUPLICATE_TOLERANCE {
                break;
            }
            if points[i].dist(points[j]) < DUPLICATE_TOLERANCE {
                return Err(Error::DuplicatePoints(i.min(j), i.max(j)));
            }
        }
    }
    Ok(())
}

/// Delaunay triangulation of `points`; vertex `i` of the mesh is `points[i]`.
///
/// Cocircular configurations are resolved to the diagonal with the smallest
/// endpoint-index sum, so the output depends only on the input.
pub fn delaunay(points: &[Point]) -> Result<TriMesh> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints(points.len()));
    }
    if let Some(p) = points.iter().find(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "non-finite point ({}, {})",
            p.x, p.y
        )));
    }
    check_duplicates(points)?;

    let i0 = 0;
    let i1 = 1;
    let i2 = (2..points.len())
        .find(|&k| orient2d(points[i0], points[i1], points[k]) != 0.0)
        .ok_or(Error::CollinearPoints)?;
    let seed = if orient2d(points[i0], points[i1], points[i2]) > 0.0 {
        [i0, i1, i2]
    } else {
        [i0, i2, i1]
    };
    let [a, b, c] = seed;
    let mut builder = Builder {
        pts: points,
        tris: vec![seed, [b, a, GHOST], [c, b, GHOST], [a, c, GHOST]],
        nbr: vec![[NONE; 3]; 4],
        alive: vec![true; 4],
        free: Vec::new(),
        last: 0,
        rng: 0x9E37_79B9_7F4A_7C15,
    };
    let links = super::link_triangles(&builder.tris);
    for (t, n) in links.into_iter().enumerate() {
        builder.nbr[t] = n.map(|x| x.expect("closed seed triangulation"));
    }
    for pi in 0..points.len() {
        if pi != i0 && pi != i1 && pi != i2 {
            builder.insert(pi);
        }
    }

    let triangles: Vec<[usize; 3]> = builder
        .tris
        .iter()
        .zip(&builder.alive)
        .filter(|(t, &alive)| alive && !t.contains(&GHOST))
        .map(|(t, _)| *t)
        .collect();
    let mut mesh = TriMesh::from_parts(points.to_vec(), triangles)?;
    mesh.canonicalize_cocircular();
    Ok(mesh)
}
