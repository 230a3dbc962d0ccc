use meshcs::mesh::{assign_values, delaunay, Point, TriMesh};
use meshcs::GrayImage;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Coordinates on a 1/64 lattice so the in-circle determinant can be
/// evaluated exactly in i128.
const SCALE: f64 = 64.0;

fn lattice_points(seed: u64, n: usize, w: f64, h: f64, step: f64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = vec![
        Point::new(0.0, 0.0),
        Point::new(w, 0.0),
        Point::new(0.0, h),
        Point::new(w, h),
    ];
    while pts.len() < n {
        let x = (rng.random_range(0.0..=w) / step).round() * step;
        let y = (rng.random_range(0.0..=h) / step).round() * step;
        let p = Point::new(x, y);
        if !pts.contains(&p) {
            pts.push(p);
        }
    }
    pts
}

fn exact_incircle(a: Point, b: Point, c: Point, d: Point) -> i128 {
    let q = |p: Point| ((p.x * SCALE) as i128, (p.y * SCALE) as i128);
    let (ax, ay) = q(a);
    let (bx, by) = q(b);
    let (cx, cy) = q(c);
    let (dx, dy) = q(d);
    let (adx, ady) = (ax - dx, ay - dy);
    let (bdx, bdy) = (bx - dx, by - dy);
    let (cdx, cdy) = (cx - dx, cy - dy);
    let alift = adx * adx + ady * ady;
    let blift = bdx * bdx + bdy * bdy;
    let clift = cdx * cdx + cdy * cdy;
    adx * (bdy * clift - blift * cdy) - ady * (bdx * clift - blift * cdx)
        + alift * (bdx * cdy - bdy * cdx)
}

fn brute_force_empty_circumcircles(mesh: &TriMesh) -> bool {
    let v = mesh.vertices();
    mesh.triangles().iter().all(|t| {
        v.iter()
            .enumerate()
            .filter(|(i, _)| !t.contains(i))
            .all(|(_, &p)| exact_incircle(v[t[0]], v[t[1]], v[t[2]], p) <= 0)
    })
}

#[test]
fn fifty_random_points_are_delaunay() {
    let pts = lattice_points(7, 50, 255.0, 255.0, 1.0 / SCALE);
    let mesh = delaunay(&pts).unwrap();
    mesh.validate_tiling().unwrap();
    assert!(brute_force_empty_circumcircles(&mesh));
}

#[test]
fn coarse_lattice_with_many_cocircular_quads() {
    for seed in 0..20 {
        let pts = lattice_points(seed, 60, 12.0, 9.0, 1.0);
        let mesh = delaunay(&pts).unwrap();
        mesh.validate_tiling().unwrap();
        assert!(brute_force_empty_circumcircles(&mesh), "seed {seed}");
        // order of triangles and vertices is reproducible
        assert_eq!(delaunay(&pts).unwrap().triangles(), mesh.triangles());
    }
}

#[test]
fn euler_characteristic_and_area() {
    let pts = lattice_points(3, 150, 100.0, 60.0, 1.0 / SCALE);
    let mesh = delaunay(&pts).unwrap();
    let nb = mesh.boundary_flags().iter().filter(|&&b| b).count();
    // planar triangulation of a convex hull: T = 2n - 2 - h
    assert_eq!(mesh.num_triangles(), 2 * pts.len() - 2 - nb);
    assert!((mesh.total_area() - 6000.0).abs() / 6000.0 < 1e-8);
}

#[test]
fn partition_of_unity_and_position_identity() {
    let pts = lattice_points(11, 120, 63.0, 47.0, 1.0 / SCALE);
    let mesh = delaunay(&pts).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..1000 {
        let q = Point::new(rng.random_range(0.0..=63.0), rng.random_range(0.0..=47.0));
        let bc = mesh.locate(q).unwrap();
        let s: f64 = bc.weights.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(bc.weights.iter().all(|&w| w >= -1e-12));
        let tri = mesh.triangles()[bc.triangle];
        let (mut x, mut y) = (0.0, 0.0);
        for (w, &v) in bc.weights.iter().zip(&tri) {
            x += w * mesh.vertices()[v].x;
            y += w * mesh.vertices()[v].y;
        }
        assert!((x - q.x).abs() < 1e-10 && (y - q.y).abs() < 1e-10);
    }
}

#[test]
fn nodal_and_linear_reproduction() {
    let pts = lattice_points(5, 80, 40.0, 30.0, 1.0 / SCALE);
    let mut mesh = delaunay(&pts).unwrap();
    let f = |p: Point| 1.5 * p.x - 0.75 * p.y + 20.0;
    mesh.set_values(pts.iter().map(|&p| f(p)).collect())
        .unwrap();
    for (k, &p) in pts.iter().enumerate() {
        assert_eq!(mesh.interpolate(p).unwrap(), mesh.values().unwrap()[k]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..500 {
        let q = Point::new(rng.random_range(0.0..=40.0), rng.random_range(0.0..=30.0));
        assert!((mesh.interpolate(q).unwrap() - f(q)).abs() < 1e-10);
    }
}

#[test]
fn rasterize_exact_for_piecewise_linear_truth() {
    let pts = lattice_points(21, 40, 31.0, 31.0, 1.0);
    let mut mesh = delaunay(&pts).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    mesh.set_values(
        (0..pts.len())
            .map(|_| rng.random_range(0.0..255.0))
            .collect(),
    )
    .unwrap();
    let truth = mesh.rasterize(32, 32).unwrap();
    let again = mesh.rasterize(32, 32).unwrap();
    assert_eq!(
        meshcs::metrics::psnr(&truth, &again).unwrap(),
        meshcs::Psnr::Infinite
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn affine_images_are_reproduced(seed in 0u64..1000, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let (w, h) = (24usize, 20usize);
        let c = 128.0;
        let img = GrayImage::from_fn(w, h, |r, col| a * col as f64 + b * r as f64 + c).unwrap();
        let pts = lattice_points(seed, 30, (w - 1) as f64, (h - 1) as f64, 1.0 / SCALE);
        let mesh = assign_values(&delaunay(&pts).unwrap(), &img).unwrap();
        let out = mesh.rasterize(w, h).unwrap();
        for (x, y) in out.data().iter().zip(img.data()) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn random_point_sets_triangulate(seed in 0u64..10_000, n in 5usize..80) {
        let pts = lattice_points(seed, n, 50.0, 50.0, 0.5);
        let mesh = delaunay(&pts).unwrap();
        mesh.validate_tiling().unwrap();
        prop_assert!(brute_force_empty_circumcircles(&mesh));
    }
}
