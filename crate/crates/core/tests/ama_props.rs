use std::f64::consts::FRAC_PI_2;

use meshcs::ama::*;
use meshcs::bench::{ramp, step_edge};
use meshcs::mesh::{assign_values, delaunay};
use meshcs::metrics::{psnr, Psnr};
use meshcs::{GrayImage, Point, TriMesh};
use proptest::prelude::*;

fn smooth_image(w: usize, h: usize) -> GrayImage {
    GrayImage::from_fn(w, h, |r, c| {
        let (x, y) = (c as f64, r as f64);
        120.0 + 60.0 * (0.21 * x + 0.13 * y).sin() + 30.0 * (0.07 * x * y / 10.0).cos()
    })
    .unwrap()
}

fn assert_boundary_intact(mesh: &TriMesh, w: usize, h: usize) {
    let (xmax, ymax) = ((w - 1) as f64, (h - 1) as f64);
    for corner in [(0.0, 0.0), (xmax, 0.0), (0.0, ymax), (xmax, ymax)] {
        assert!(
            mesh.vertices().iter().any(|p| (p.x, p.y) == corner),
            "corner {corner:?} lost"
        );
    }
    for (p, &b) in mesh.vertices().iter().zip(mesh.boundary_flags()) {
        if b {
            let on = p.x == 0.0 || p.y == 0.0 || p.x == xmax || p.y == ymax;
            assert!(on, "boundary vertex {p:?} left the boundary");
        }
    }
}

#[test]
fn initial_mesh_budget_on_cameraman_size() {
    let img = GrayImage::constant(256, 256, 10.0).unwrap();
    let mesh = initial_mesh(&img, 0.03, 5).unwrap();
    assert_eq!(mesh.num_vertices(), 1966);
    mesh.validate_tiling().unwrap();
    assert_boundary_intact(&mesh, 256, 256);
}

#[test]
fn initial_mesh_is_seeded() {
    let img = GrayImage::constant(64, 48, 10.0).unwrap();
    let a = initial_mesh(&img, 0.05, 11).unwrap();
    let b = initial_mesh(&img, 0.05, 11).unwrap();
    let c = initial_mesh(&img, 0.05, 12).unwrap();
    assert_eq!(a.vertices(), b.vertices());
    assert_eq!(a.triangles(), b.triangles());
    assert_ne!(a.vertices(), c.vertices());
}

#[test]
fn constant_image_gives_isotropic_metric() {
    let img = GrayImage::constant(40, 30, 77.0).unwrap();
    let mesh = assign_values(&initial_mesh(&img, 0.1, 1).unwrap(), &img).unwrap();
    let m = compute_metric(&mesh, &img, &AmaConfig::default()).unwrap();
    let first = m.get(0);
    assert!(first.xx > 0.0);
    for t in m.tensors() {
        assert!(t.xy.abs() <= 1e-12 * first.xx, "{t:?}");
        assert!((t.xx - t.yy).abs() <= 1e-12 * first.xx, "{t:?}");
        assert!((t.xx - first.xx).abs() <= 1e-12 * first.xx, "{t:?}");
    }
}

#[test]
fn quadratic_ramp_aligns_with_x() {
    let img = GrayImage::from_fn(64, 64, |_, c| 0.05 * (c * c) as f64).unwrap();
    let mesh = assign_values(&initial_mesh(&img, 0.1, 3).unwrap(), &img).unwrap();
    let m = compute_metric(&mesh, &img, &AmaConfig::default()).unwrap();
    let worst = m
        .tensors()
        .iter()
        .map(|t| principal_angle(t).abs())
        .map(|a| a.min(std::f64::consts::PI - a))
        .fold(0.0, f64::max);
    assert!(worst <= 1e-2, "worst misalignment {worst} rad");
    // the metric really is anisotropic, not isotropic with noise
    let (l1, l2, _) = m.get(m.len() / 2).eigen();
    assert!(l1 > 10.0 * l2, "{l1} vs {l2}");
}

#[test]
fn metric_rotates_with_the_image() {
    let (w, h) = (37, 29);
    let img = smooth_image(w, h);
    // (x, y) -> (h - 1 - y, x): a quarter turn into a h x w image
    let rot = GrayImage::from_fn(h, w, |r, c| img.get(h - 1 - c, r)).unwrap();
    let mesh = initial_mesh(&img, 0.15, 9).unwrap();
    let turned: Vec<Point> = mesh
        .vertices()
        .iter()
        .map(|p| Point::new((h - 1) as f64 - p.y, p.x))
        .collect();
    let mesh_r = TriMesh::from_parts(turned, mesh.triangles().to_vec()).unwrap();

    let cfg = AmaConfig::default();
    let m = compute_metric(&assign_values(&mesh, &img).unwrap(), &img, &cfg).unwrap();
    let mr = compute_metric(&assign_values(&mesh_r, &rot).unwrap(), &rot, &cfg).unwrap();
    for (a, b) in m.tensors().iter().zip(mr.tensors()) {
        let scale = a.trace();
        let expect = Sym2::new(a.yy, -a.xy, a.xx);
        for (x, y) in [(expect.xx, b.xx), (expect.xy, b.xy), (expect.yy, b.yy)] {
            assert!((x - y).abs() <= 1e-6 * scale, "{a:?} rotated vs {b:?}");
        }
    }
}

#[test]
fn metric_respects_cap_and_is_spd() {
    let img = step_edge(64, 64).unwrap();
    let cfg = AmaConfig {
        anisotropy_cap: 10.0,
        ..AmaConfig::default()
    };
    let mesh = assign_values(&initial_mesh(&img, 0.1, 2).unwrap(), &img).unwrap();
    let m = compute_metric(&mesh, &img, &cfg).unwrap();
    assert!(m.all_spd());
    assert!(m.regularization > 0.0);
    assert!(
        m.max_anisotropy() <= 10.0 * (1.0 + 1e-9),
        "{}",
        m.max_anisotropy()
    );
    for t in m.tensors() {
        // Cholesky of [[xx, xy], [xy, yy]]
        let l11 = t.xx.sqrt();
        let l21 = t.xy / l11;
        assert!(t.xx > 0.0 && t.yy - l21 * l21 > 0.0, "{t:?}");
        assert!(t.eigen().1 >= m.regularization * (1.0 - 1e-9), "{t:?}");
    }
}

#[test]
fn metric_normalization_matches_budget() {
    let img = smooth_image(48, 48);
    let mesh = assign_values(&initial_mesh(&img, 0.08, 4).unwrap(), &img).unwrap();
    let m = compute_metric(&mesh, &img, &AmaConfig::default()).unwrap();
    let total: f64 = (0..mesh.num_triangles())
        .map(|t| {
            let tri = mesh.triangles()[t];
            let avg = tri
                .iter()
                .fold(Sym2::new(0.0, 0.0, 0.0), |acc, &v| acc.add(&m.get(v)))
                .scale(1.0 / 3.0);
            mesh.area(t) * avg.det().sqrt()
        })
        .sum();
    let target = mesh.num_triangles() as f64;
    assert!(
        (total - target).abs() <= 0.05 * target,
        "metric demands {total} elements, mesh has {target}"
    );
}

#[test]
fn adaptation_keeps_vertices_and_validity() {
    let img = smooth_image(60, 44);
    let cfg = AmaConfig::with_density(0.06, 8);
    let mesh = assign_values(
        &initial_mesh(&img, cfg.sample_density, cfg.seed).unwrap(),
        &img,
    )
    .unwrap();
    let m = compute_metric(&mesh, &img, &cfg).unwrap();
    let adapted = adapt_mesh(&mesh, &m, &cfg).unwrap();
    assert_eq!(adapted.num_vertices(), mesh.num_vertices());
    adapted.validate_tiling().unwrap();
    assert_boundary_intact(&adapted, 60, 44);
    assert!((0..adapted.num_triangles()).all(|t| adapted.area(t) > 0.0));
}

#[test]
fn identity_metric_never_lowers_min_angle() {
    let img = GrayImage::constant(50, 50, 0.0).unwrap();
    let mut mesh = initial_mesh(&img, 0.08, 21).unwrap();
    let id = MetricField::uniform(mesh.num_vertices(), Sym2::IDENTITY).unwrap();
    let cfg = AmaConfig {
        smoothing_passes: 1,
        ..AmaConfig::default()
    };
    let mut prev = min_angle(&mesh);
    for _ in 0..10 {
        mesh = adapt_mesh(&mesh, &id, &cfg).unwrap();
        let now = min_angle(&mesh);
        assert!(now >= prev - 1e-12, "min angle fell from {prev} to {now}");
        prev = now;
    }
}

fn grid_mesh(n: usize, spacing: f64) -> TriMesh {
    let pts: Vec<Point> = (0..n * n)
        .map(|k| Point::new((k % n) as f64 * spacing, (k / n) as f64 * spacing))
        .collect();
    delaunay(&pts).unwrap()
}

/// Mean |dy| over mean |dx| across all edges.
fn edge_anisotropy(mesh: &TriMesh) -> f64 {
    let (mut sx, mut sy) = (0.0, 0.0);
    for (a, b) in mesh.edges() {
        let (p, q) = (mesh.vertices()[a], mesh.vertices()[b]);
        sx += (p.x - q.x).abs();
        sy += (p.y - q.y).abs();
    }
    sy / sx
}

#[test]
fn stretched_metric_stretches_edges() {
    let mesh = grid_mesh(20, 3.0);
    let m = MetricField::uniform(mesh.num_vertices(), Sym2::diag(100.0, 1.0)).unwrap();
    let before = edge_anisotropy(&mesh);
    let after = edge_anisotropy(&adapt_mesh(&mesh, &m, &AmaConfig::default()).unwrap());
    // The ideal ratio is 10. With fixed corners and the vertex count held,
    // relocation plus flips gets to about 7.
    assert!(after >= 5.0 * before, "edge anisotropy {before} -> {after}");
}

#[test]
fn affine_image_is_reproduced_exactly() {
    let img = ramp(128, 128).unwrap();
    let res = ama_represent(&img, &AmaConfig::with_density(0.01, 3)).unwrap();
    let raw_err = res
        .mesh
        .rasterize(128, 128)
        .unwrap()
        .data()
        .iter()
        .zip(img.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(raw_err <= 0.5, "max error {raw_err}");
    assert_eq!(psnr(&img, &res.image.quantized()).unwrap(), Psnr::Infinite);
}

#[test]
fn pipeline_is_deterministic_and_keeps_budget() {
    let img = smooth_image(64, 64);
    let cfg = AmaConfig {
        outer_iterations: 2,
        ..AmaConfig::with_density(0.05, 17)
    };
    let a = ama_represent(&img, &cfg).unwrap();
    let b = ama_represent(&img, &cfg).unwrap();
    assert_eq!(a.mesh.num_vertices(), vertex_budget(64, 64, 0.05));
    assert_eq!(a.mesh.vertices(), b.mesh.vertices());
    assert_eq!(a.mesh.triangles(), b.mesh.triangles());
    assert_eq!(a.image, b.image);
}

#[test]
fn elements_gather_at_a_step_edge() {
    let img = step_edge(128, 128).unwrap();
    let res = ama_represent(&img, &AmaConfig::with_density(0.03, 0)).unwrap();
    let (mut near, mut far) = ((0.0, 0), (0.0, 0));
    for t in 0..res.mesh.num_triangles() {
        let bucket = if (res.mesh.centroid(t).x - 63.5).abs() <= 3.0 {
            &mut near
        } else {
            &mut far
        };
        bucket.0 += res.mesh.area(t);
        bucket.1 += 1;
    }
    let ratio = (near.0 / near.1 as f64) / (far.0 / far.1 as f64);
    assert!(ratio <= 0.5, "near/far area ratio {ratio}");
}

#[test]
fn config_validation() {
    assert!(AmaConfig::default().validate().is_ok());
    let bad = [
        AmaConfig::with_density(0.0, 0),
        AmaConfig::with_density(1.01, 0),
        AmaConfig {
            outer_iterations: 0,
            ..Default::default()
        },
        AmaConfig {
            hessian_regularization: Some(-1.0),
            ..Default::default()
        },
        AmaConfig {
            anisotropy_cap: 0.5,
            ..Default::default()
        },
    ];
    for cfg in bad {
        assert!(cfg.validate().is_err(), "{cfg:?}");
    }
    let img = GrayImage::constant(10, 10, 0.0).unwrap();
    assert!(
        initial_mesh(&img, 0.02, 0).is_err(),
        "2 vertices cannot cover a rectangle"
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn initial_mesh_has_budget_and_tiles(
        w in 4usize..60,
        h in 4usize..60,
        density in 0.02f64..1.0,
        seed in any::<u64>(),
    ) {
        let img = GrayImage::constant(w, h, 0.0).unwrap();
        let budget = vertex_budget(w, h, density);
        prop_assume!(budget >= 4);
        let mesh = initial_mesh(&img, density, seed).unwrap();
        prop_assert_eq!(mesh.num_vertices(), budget);
        prop_assert!(mesh.validate_tiling().is_ok());
    }

    #[test]
    fn principal_angle_of_constructed_tensor(theta in -1.5f64..1.5, l2 in 0.01f64..0.9) {
        let m = Sym2::from_eigen(1.0, l2, (theta.cos(), theta.sin()));
        let got = principal_angle(&m);
        let diff = (got - theta).rem_euclid(std::f64::consts::PI);
        prop_assert!(diff.min(std::f64::consts::PI - diff) < 1e-9);
        prop_assert!(got > -FRAC_PI_2 && got <= FRAC_PI_2);
    }
}
