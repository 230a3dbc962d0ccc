use std::f64::consts::{PI, SQRT_2};

use meshcs::cs::*;
use meshcs::{metrics, GrayImage};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_image(w: usize, h: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GrayImage::from_fn(w, h, |_, _| rng.random_range(0.0..255.0)).unwrap()
}

fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Direct O(N^2) orthonormal DFT, packed as real cosine/sine pairs.
fn naive_fourier(x: &[f64], w: usize, h: usize) -> Vec<f64> {
    let n = (w * h) as f64;
    let mut out = vec![0.0; w * h];
    for u in 0..h {
        for v in 0..w {
            let (mut re, mut im) = (0.0, 0.0);
            for r in 0..h {
                for c in 0..w {
                    let phase = -2.0 * PI * ((u * r) as f64 / h as f64 + (v * c) as f64 / w as f64);
                    re += x[r * w + c] * phase.cos();
                    im += x[r * w + c] * phase.sin();
                }
            }
            let (re, im) = (re / n.sqrt(), im / n.sqrt());
            let k = u * w + v;
            let kc = ((h - u) % h) * w + (w - v) % w;
            if k == kc {
                out[k] = re;
            } else if k < kc {
                out[k] = SQRT_2 * re;
                out[kc] = SQRT_2 * im;
            }
        }
    }
    out
}

fn naive_dct(x: &[f64], w: usize, h: usize) -> Vec<f64> {
    let scale = |k: usize, n: usize| {
        if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        }
    };
    let mut out = vec![0.0; w * h];
    for u in 0..h {
        for v in 0..w {
            let mut s = 0.0;
            for r in 0..h {
                for c in 0..w {
                    s += x[r * w + c]
                        * (PI * (2 * r + 1) as f64 * u as f64 / (2 * h) as f64).cos()
                        * (PI * (2 * c + 1) as f64 * v as f64 / (2 * w) as f64).cos();
                }
            }
            out[u * w + v] = scale(u, h) * scale(v, w) * s;
        }
    }
    out
}

/// One Haar level written out per 2x2 block, recursing on the
/// approximation quadrant.
fn naive_haar(x: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut out = x.to_vec();
    let (mut cw, mut ch) = (w, h);
    while cw >= 2 && ch >= 2 && cw % 2 == 0 && ch % 2 == 0 {
        let src = out.clone();
        let (hw, hh) = (cw / 2, ch / 2);
        for i in 0..hh {
            for j in 0..hw {
                let p = |dr: usize, dc: usize| src[(2 * i + dr) * w + 2 * j + dc];
                let (a, b, c, d) = (p(0, 0), p(0, 1), p(1, 0), p(1, 1));
                out[i * w + j] = (a + b + c + d) / 2.0;
                out[i * w + hw + j] = (a - b + c - d) / 2.0;
                out[(hh + i) * w + j] = (a + b - c - d) / 2.0;
                out[(hh + i) * w + hw + j] = (a - b - c + d) / 2.0;
            }
        }
        cw = hw;
        ch = hh;
    }
    out
}

#[test]
fn transforms_match_direct_sums() {
    for (w, h) in [(6, 5), (4, 4), (7, 3)] {
        let x = random_image(w, h, 1).data().to_vec();
        let f = Transform2d::new(w, h, SensingDomain::Fourier)
            .unwrap()
            .forward(&x)
            .unwrap();
        assert!(max_err(&f, &naive_fourier(&x, w, h)) < 1e-9);
        let d = Transform2d::new(w, h, SensingDomain::Dct)
            .unwrap()
            .forward(&x)
            .unwrap();
        assert!(max_err(&d, &naive_dct(&x, w, h)) < 1e-9);
    }
}

#[test]
fn haar_matches_blockwise_formula() {
    for (w, h) in [(8, 8), (12, 8), (6, 10), (16, 4)] {
        let x = random_image(w, h, 2).data().to_vec();
        assert!(max_err(&Haar::new(w, h).forward(&x), &naive_haar(&x, w, h)) < 1e-10);
    }
}

#[test]
fn constant_image_transform_and_measurement() {
    let img = GrayImage::constant(16, 16, 77.0).unwrap();
    for domain in [SensingDomain::Fourier, SensingDomain::Dct] {
        let c = transform_forward(&img, domain).unwrap();
        assert!((c[0] - 77.0 * 16.0).abs() < 1e-10);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-10));
        let back = transform_inverse(&c, 16, 16, domain).unwrap();
        assert!(max_err(back.data(), img.data()) < 1e-10);
        let op = build_measurement_op(16, 16, 0.2, domain, 4).unwrap();
        let meas = measure(&img, &op).unwrap();
        assert!((meas.values()[0] - 77.0 * 16.0).abs() < 1e-10);
    }
}

#[test]
fn round_trip_on_random_image() {
    let img = random_image(16, 16, 3);
    for domain in [SensingDomain::Fourier, SensingDomain::Dct] {
        let c = transform_forward(&img, domain).unwrap();
        let back = transform_inverse(&c, 16, 16, domain).unwrap();
        assert!(max_err(back.data(), img.data()) < 1e-10);
        let norm_c = dot(&c, &c).sqrt();
        let norm_x = dot(img.data(), img.data()).sqrt();
        assert!((norm_c - norm_x).abs() < 1e-9);
    }
}

#[test]
fn full_density_measurement_inverts() {
    let img = random_image(20, 12, 5);
    for domain in [SensingDomain::Fourier, SensingDomain::Dct] {
        let op = build_measurement_op(20, 12, 1.0, domain, 9).unwrap();
        assert_eq!(op.m(), 240);
        let meas = measure(&img, &op).unwrap();
        assert!(max_err(&meas.zero_filled().unwrap(), img.data()) < 1e-9);
    }
}

#[test]
fn ista_full_density_without_threshold_is_exact() {
    let img = random_image(32, 24, 6);
    let op = build_measurement_op(32, 24, 1.0, SensingDomain::Fourier, 1).unwrap();
    let meas = measure(&img, &op).unwrap();
    let cfg = SolverConfig {
        threshold: Some(0.0),
        ..SolverConfig::ista()
    };
    let rec = reconstruct_ista(&meas, &cfg).unwrap();
    assert!(rec.converged);
    assert!(max_err(rec.image.data(), img.data()) <= 1e-6);
}

#[test]
fn ista_full_density_matches_closed_form_lasso() {
    let (w, h) = (16, 16);
    let img = random_image(w, h, 7);
    let lambda = 12.0;
    let haar = Haar::new(w, h);
    let expected: Vec<f64> = {
        let s: Vec<f64> = naive_haar(img.data(), w, h)
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                if haar.is_detail(k) {
                    v.signum() * (v.abs() - lambda).max(0.0)
                } else {
                    v
                }
            })
            .collect();
        haar.inverse(&s)
    };
    for domain in [SensingDomain::Fourier, SensingDomain::Dct] {
        let op = build_measurement_op(w, h, 1.0, domain, 3).unwrap();
        let meas = measure(&img, &op).unwrap();
        let cfg = SolverConfig {
            threshold: Some(lambda),
            continuation_interval: None,
            ..SolverConfig::ista()
        };
        let rec = reconstruct_ista(&meas, &cfg).unwrap();
        assert!(rec.converged);
        assert!(max_err(&rec.raw, &expected) < 1e-9);
    }
}

fn assert_monotone(objective: &[f64]) {
    for (k, pair) in objective.windows(2).enumerate() {
        assert!(
            pair[1] <= pair[0] * (1.0 + 1e-12),
            "objective rose at iteration {}: {} -> {}",
            k + 2,
            pair[0],
            pair[1]
        );
    }
}

#[test]
fn ista_objective_never_increases() {
    let img = GrayImage::from_fn(48, 40, |r, c| {
        let base = if (r / 10 + c / 12) % 2 == 0 {
            40.0
        } else {
            180.0
        };
        base + 20.0 * ((r as f64) * 0.3).sin()
    })
    .unwrap();
    for seed in 0..5 {
        for domain in [SensingDomain::Fourier, SensingDomain::Dct] {
            let op = build_measurement_op(48, 40, 0.25, domain, seed).unwrap();
            let meas = measure(&img, &op).unwrap();
            let rec = reconstruct_ista(&meas, &SolverConfig::ista()).unwrap();
            assert!(!rec.objective.is_empty());
            assert_monotone(&rec.objective);
        }
    }
}

#[test]
fn tveq_full_density_is_exact() {
    let img = random_image(64, 64, 8);
    for domain in [SensingDomain::Fourier, SensingDomain::Dct] {
        let op = build_measurement_op(64, 64, 1.0, domain, 2).unwrap();
        let meas = measure(&img, &op).unwrap();
        let rec = reconstruct_tveq(&meas, &SolverConfig::tveq()).unwrap();
        assert!(max_err(&rec.raw, img.data()) < 1e-8);
    }
}

#[test]
fn tveq_iterates_satisfy_the_constraint() {
    let img = random_image(40, 32, 9);
    for domain in [SensingDomain::Fourier, SensingDomain::Dct] {
        let op = build_measurement_op(40, 32, 0.2, domain, 4).unwrap();
        let meas = measure(&img, &op).unwrap();
        let cfg = SolverConfig {
            max_iterations: 60,
            ..SolverConfig::tveq()
        };
        let rec = reconstruct_tveq(&meas, &cfg).unwrap();
        assert_eq!(rec.residuals.len(), rec.iterations);
        assert!(
            rec.residuals.iter().all(|&r| r <= 1e-9),
            "{:?}",
            rec.residuals
        );
    }
}

fn two_region_phantom() -> GrayImage {
    GrayImage::from_fn(64, 64, |r, c| {
        let (y, x) = (r as f64 - 30.5, c as f64 - 34.0);
        if x * x / 400.0 + y * y / 225.0 < 1.0 {
            200.0
        } else {
            60.0
        }
    })
    .unwrap()
}

#[test]
fn tveq_recovers_piecewise_constant_phantom() {
    let img = two_region_phantom();
    let cfg = SolverConfig {
        max_iterations: 3000,
        tv_primal_step: 1.0,
        ..SolverConfig::tveq()
    };
    for seed in 0..3 {
        let op = build_measurement_op(64, 64, 0.3, SensingDomain::Fourier, seed).unwrap();
        let meas = measure(&img, &op).unwrap();
        let rec = reconstruct_tveq(&meas, &cfg).unwrap();
        let psnr = metrics::psnr(&img, &rec.image).unwrap();
        assert!(psnr.db() >= 40.0, "seed {seed}: {psnr}");
    }
}

#[test]
fn reconstructions_are_deterministic() {
    let img = two_region_phantom();
    let op = build_measurement_op(64, 64, 0.15, SensingDomain::Fourier, 5).unwrap();
    let meas = measure(&img, &op).unwrap();
    let cfg = SolverConfig {
        max_iterations: 40,
        ..SolverConfig::tveq()
    };
    let a = reconstruct_tveq(&meas, &cfg).unwrap();
    let b = reconstruct_tveq(&meas, &cfg).unwrap();
    assert_eq!(a.raw, b.raw);
    let a = reconstruct_ista(&meas, &cfg).unwrap();
    let b = reconstruct_ista(&meas, &cfg).unwrap();
    assert_eq!(a.raw, b.raw);
}

#[test]
fn measurements_survive_a_file_round_trip() {
    let img = random_image(24, 18, 10);
    let op = build_measurement_op_with(
        24,
        18,
        0.3,
        SensingDomain::Fourier,
        SamplingPattern::VariableDensity { decay: 2.0 },
        77,
    )
    .unwrap();
    let meas = measure_seeded(&img, &op, 77).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("meas.bin");
    meas.save(&path).unwrap();
    let back = Measurements::load(&path).unwrap();
    assert_eq!(back, meas);
    assert_eq!(back.seed(), 77);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn adjoint_dot_test(
        w in 2usize..20,
        h in 2usize..20,
        density in 0.05f64..1.0,
        dct in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let domain = if dct { SensingDomain::Dct } else { SensingDomain::Fourier };
        prop_assume!((density * (w * h) as f64).round() >= 1.0);
        let op = build_measurement_op(w, h, density, domain, seed).unwrap();
        let x = random_vec(w * h, seed ^ 1);
        let y = random_vec(op.m(), seed ^ 2);
        let lhs = dot(&op.apply(&x).unwrap(), &y);
        let rhs = dot(&x, &op.adjoint(&y).unwrap());
        prop_assert!((lhs - rhs).abs() < 1e-9);
    }

    #[test]
    fn measurement_is_linear(seed in any::<u64>(), dct in any::<bool>()) {
        let domain = if dct { SensingDomain::Dct } else { SensingDomain::Fourier };
        let a = random_image(18, 14, seed);
        let b = random_image(18, 14, seed.wrapping_add(1));
        let sum = GrayImage::with_precision(
            18, 14, 9,
            a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect(),
        ).unwrap();
        let op = build_measurement_op(18, 14, 0.4, domain, seed).unwrap();
        let ma = measure(&a, &op).unwrap();
        let mb = measure(&b, &op).unwrap();
        let ms = measure(&sum, &op).unwrap();
        for ((x, y), s) in ma.values().iter().zip(mb.values()).zip(ms.values()) {
            prop_assert!((x + y - s).abs() < 1e-9);
        }
    }

    #[test]
    fn index_sets_are_valid(
        w in 2usize..40,
        h in 2usize..40,
        density in 0.01f64..1.0,
        seed in any::<u64>(),
        decay in 0.0f64..4.0,
    ) {
        prop_assume!((density * (w * h) as f64).round() >= 1.0);
        let op = build_measurement_op_with(
            w, h, density, SensingDomain::Fourier,
            SamplingPattern::VariableDensity { decay }, seed,
        ).unwrap();
        let idx = op.kept_indices();
        prop_assert_eq!(idx.len(), (density * (w * h) as f64).round() as usize);
        prop_assert_eq!(idx[0], 0);
        prop_assert!(idx.windows(2).all(|p| p[0] < p[1]));
        prop_assert!(*idx.last().unwrap() < w * h);
    }
}
