use std::f64::consts::PI;

use kpist::cylinder::{make_grid, CylinderGrid, Field};
use kpist::heatjost::{smallness_report, BoundaryMethod, JostOptions};
use kpist::spectral::{
    decay_report, evolution_factor, evolve, forward_transform, jump_residual, r0, zeta,
    ContourGrid, SpectralData,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn reference_grid() -> CylinderGrid {
    make_grid(PI, 32, 256, 12.0).unwrap()
}

fn gaussian(grid: CylinderGrid, eps: f64) -> Field {
    Field::from_real_fn(grid, |x, y| eps * x.cos() * (-y * y).exp())
}

fn forward(u: &Field, n_max: usize) -> SpectralData {
    let cg = ContourGrid::new(*u.grid(), n_max).unwrap();
    forward_transform(u, &cg, BoundaryMethod::HalfPlane, &JostOptions::default()).unwrap()
}

#[test]
fn contour_parametrization_examples() {
    assert_eq!(r0(Complex64::new(2.0, 3.0), 1.0), (-4.0, 24.0));
    assert_eq!(r0(Complex64::new(0.0, 3.0), 1.0), (0.0, 0.0));
    assert_eq!(zeta(-4, 24.0, 1.0).unwrap(), Complex64::new(2.0, 3.0));
    assert_eq!(zeta(1, 2.0, 1.0).unwrap(), Complex64::new(-0.5, -1.0));
    assert_eq!(zeta(-1, 2.0, 1.0).unwrap(), Complex64::new(0.5, 1.0));
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..100 {
        let mut n = rng.gen_range(-6i64..=5);
        if n >= 0 {
            n += 1;
        }
        let xi = rng.gen_range(-50.0..50.0);
        let omega = rng.gen_range(0.5..3.0);
        let (m, x) = r0(zeta(n, xi, omega).unwrap(), omega);
        assert!((m - n as f64).abs() < 1e-12 && (x - xi).abs() < 1e-10 * xi.abs().max(1.0));
    }
}

#[test]
fn zero_potential_has_zero_data() {
    let g = make_grid(PI, 16, 64, 8.0).unwrap();
    let f = forward(&Field::zeros(g), 2);
    assert!(f.g.iter().all(|v| v.norm() == 0.0));
    let r = decay_report(&f);
    assert_eq!(r.forward_margin, 0.0);
    assert!(r.sup_bound.iter().chain(&r.l2_bound).all(|&v| v == 0.0));
    let jump = jump_residual(
        &Field::zeros(g),
        &[(1, 0.0)],
        BoundaryMethod::HalfPlane,
        &JostOptions::default(),
    );
    assert_eq!(jump.unwrap()[0].residual, 0.0);
}

#[test]
fn born_data_is_the_signed_fourier_transform() {
    let g = reference_grid();
    let eps = 1e-4;
    let f = forward(&gaussian(g, eps), 3);
    let cg = f.contour;
    let mut first: f64 = 0.0;
    let mut higher: f64 = 0.0;
    for i in 0..cg.len() {
        let (n, row) = cg.sample(i);
        let xi = g.xi(row);
        if n.abs() == 1 {
            let want = n as f64 * eps * 0.5 * PI.sqrt() * (-xi * xi / 4.0).exp();
            first = first.max((f.g[i] - want).norm());
        } else {
            higher = higher.max(f.g[i].norm());
        }
    }
    assert!(first <= 10.0 * eps * eps, "first-order defect {first:e}");
    assert!(higher <= 10.0 * eps * eps, "higher contours {higher:e}");
    let r = decay_report(&f);
    assert!(r.sup_bound[0] > 0.5 * eps);
    // Contours past the first only see second-order scattering.
    assert!(r.sup_bound[1] <= 100.0 * eps * r.sup_bound[0]);
    assert!(r.sup_bound[2] <= 100.0 * eps * r.sup_bound[0]);
}

#[test]
fn reference_data_is_bounded_and_contracting() {
    let u = gaussian(reference_grid(), 0.02);
    let f = forward(&u, 3);
    let s = smallness_report(&u).unwrap();
    let bound = u.grid().omega() * u.norms().l1 / (1.0 - s.ratio);
    assert!(f.max_abs() < bound, "{} >= {bound}", f.max_abs());
    let r = decay_report(&f);
    assert!(r.forward_margin < 1.0, "margin {}", r.forward_margin);
}

#[test]
fn jump_relation_holds_on_reference_potential() {
    let u = gaussian(reference_grid(), 0.02);
    let mut samples = Vec::new();
    for n in [-2i64, -1, 1, 2] {
        for xi in [-1.0, 0.0, 1.0] {
            samples.push((n, xi));
        }
    }
    for s in jump_residual(
        &u,
        &samples,
        BoundaryMethod::HalfPlane,
        &JostOptions::default(),
    )
    .unwrap()
    {
        assert!(
            s.residual <= 1e-3,
            "({}, {}) residual {:e}",
            s.n,
            s.xi,
            s.residual
        );
    }
}

#[test]
fn evolution_examples() {
    let g = make_grid(PI, 16, 64, 8.0).unwrap();
    let f = forward(&gaussian(g, 0.02), 2);
    assert_eq!(evolve(&f, 0.0).unwrap().g, f.g);
    let want = Complex64::new(1.0f64.cos(), 1.0f64.sin());
    assert!((evolution_factor(Complex64::new(-0.5, 0.0), 1.0) - want).norm() < 1e-15);
    let e = evolve(&f, 0.7).unwrap();
    let max = f.max_abs();
    for (a, b) in e.g.iter().zip(&f.g) {
        assert!((a.norm() - b.norm()).abs() <= 1e-15 * max);
    }
}
