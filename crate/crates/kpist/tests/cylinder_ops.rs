use std::f64::consts::PI;

use kpist::cylinder::{
    analyze, basic_lemma_report, convolve, lemma_constant, make_grid, pz, synthesize,
    zero_mass_project, CylinderGrid, Field, SpectralCoeffs,
};
use kpist::heatjost::smallness_report;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn reference_grid() -> CylinderGrid {
    make_grid(PI, 32, 256, 12.0).unwrap()
}

fn gaussian(grid: CylinderGrid, eps: f64) -> Field {
    Field::from_real_fn(grid, |x, y| eps * x.cos() * (-y * y).exp())
}

/// Direct double sum `dx dy / 2 ell sum u e^{-i omega m x - i xi y}`, independent of the FFT path.
fn brute_coefficient(u: &Field, m: i64, xi: f64) -> Complex64 {
    let g = *u.grid();
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..g.ny() {
        for j in 0..g.nx() {
            acc += u.at(j, k)
                * Complex64::from_polar(1.0, -(g.omega() * m as f64 * g.x(j) + xi * g.y(k)));
        }
    }
    acc * (g.dx() * g.dy() / (2.0 * g.ell()))
}

/// Smooth random field built from a few decaying modes.
fn random_smooth(grid: CylinderGrid, rng: &mut ChaCha8Rng) -> Field {
    let terms: Vec<(f64, f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.gen_range(-3..=3) as f64,
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.5..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(0.0..2.0 * PI),
            )
        })
        .collect();
    let omega = grid.omega();
    Field::from_fn(grid, move |x, y| {
        terms
            .iter()
            .map(|&(m, a, w, c, p)| {
                Complex64::from_polar(a, omega * m * x + p) * (-w * (y - c) * (y - c)).exp()
            })
            .sum()
    })
}

#[test]
fn grid_examples() {
    let g = make_grid(PI, 8, 8, 10.0).unwrap();
    assert_eq!(g.omega(), 1.0);
    assert!((g.x(0) + PI).abs() < 1e-15);
    assert!((g.dxi() - PI / 10.0).abs() < 1e-15);
    assert!((make_grid(1.0, 4, 4, 5.0).unwrap().omega() - PI).abs() < 1e-15);
    assert!(make_grid(PI, 7, 8, 10.0).is_err());
}

#[test]
fn gaussian_transform_matches_closed_form() {
    let g = reference_grid();
    let c = analyze(&gaussian(g, 1.0));
    let mut worst: f64 = 0.0;
    for q in g.modes_y() {
        let xi = q as f64 * g.dxi();
        let exact = 0.5 * PI.sqrt() * (-xi * xi / 4.0).exp();
        for m in g.modes() {
            let want = if m.abs() == 1 { exact } else { 0.0 };
            worst = worst.max((c.get(m, q) - want).norm());
        }
    }
    assert!(worst < 1e-12, "worst deviation {worst:e}");
}

#[test]
fn analyze_agrees_with_direct_sum() {
    let g = make_grid(PI, 16, 32, 6.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let u = random_smooth(g, &mut rng);
    let c = analyze(&u);
    for m in [-3, -1, 0, 2, 5] {
        for q in [-7, 0, 3, 15] {
            let want = brute_coefficient(&u, m, q as f64 * g.dxi());
            assert!((c.get(m, q) - want).norm() < 1e-12, "({m}, {q})");
        }
    }
}

#[test]
fn single_coefficient_synthesizes_plane_wave() {
    let g = make_grid(PI, 8, 16, 5.0).unwrap();
    let mut c = SpectralCoeffs::zeros(g);
    c.set(1, 0, Complex64::new(2.0 * PI / g.dxi(), 0.0));
    let u = synthesize(&c);
    for k in 0..g.ny() {
        for j in 0..g.nx() {
            let want = Complex64::from_polar(1.0, g.x(j));
            assert!((u.at(j, k) - want).norm() < 1e-13);
        }
    }
    assert!(synthesize(&SpectralCoeffs::zeros(g)).max_abs() == 0.0);
}

#[test]
fn round_trips_both_ways() {
    let g = make_grid(PI, 16, 64, 8.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let u = random_smooth(g, &mut rng);
    assert!(synthesize(&analyze(&u)).sub(&u).unwrap().max_abs() < 1e-12 * u.max_abs().max(1.0));
    let c = analyze(&u);
    let back = analyze(&synthesize(&c));
    let err = back
        .values()
        .iter()
        .zip(c.values())
        .fold(0.0, |a: f64, (p, q)| a.max((p - q).norm()));
    assert!(err < 1e-12);
}

#[test]
fn zero_mass_projection_examples() {
    let g = make_grid(PI, 16, 32, 6.0).unwrap();
    let u = gaussian(g, 1.0);
    assert!(zero_mass_project(&u).sub(&u).unwrap().max_abs() < 1e-15);
    let v = Field::from_real_fn(g, |x, _| 1.0 + x.cos());
    let want = Field::from_real_fn(g, |x, _| x.cos());
    assert!(zero_mass_project(&v).sub(&want).unwrap().max_abs() < 1e-14);
    let p = zero_mass_project(&v);
    assert!(zero_mass_project(&p).sub(&p).unwrap().max_abs() < 1e-15);
}

#[test]
fn convolution_matches_product_transform() {
    let g = make_grid(PI, 16, 64, 8.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let u = random_smooth(g, &mut rng);
        let h = random_smooth(g, &mut rng);
        let direct = analyze(&u.mul(&h).unwrap());
        let conv = convolve(&analyze(&u), &analyze(&h)).unwrap();
        let scale = direct
            .values()
            .iter()
            .fold(0.0, |a: f64, v| a.max(v.norm()));
        let err = direct
            .values()
            .iter()
            .zip(conv.values())
            .fold(0.0, |a: f64, (d, c)| a.max((d - c / (2.0 * PI)).norm()));
        assert!(err <= 1e-10 * scale, "relative error {}", err / scale);
    }
    let zero = SpectralCoeffs::zeros(g);
    let b = analyze(&gaussian(g, 1.0));
    assert!(convolve(&zero, &b)
        .unwrap()
        .values()
        .iter()
        .all(|v| v.norm() == 0.0));
    // The constant field 1 is the identity for pointwise products.
    let id = analyze(&Field::constant(g, Complex64::new(1.0 / (2.0 * PI), 0.0)));
    let same = convolve(&id, &b).unwrap();
    let err = same
        .values()
        .iter()
        .zip(b.values())
        .fold(0.0, |a: f64, (p, q)| a.max((p - q).norm()));
    assert!(err < 1e-13);
}

#[test]
fn gaussian_norms_match_closed_form() {
    let g = reference_grid();
    let n = gaussian(g, 1.0).norms();
    // |cos x| has a kink, so the Nx = 32 trapezoid sits about 0.3% under 4 sqrt(pi).
    let sx: f64 = (0..g.nx()).map(|j| g.x(j).cos().abs()).sum::<f64>() * g.dx();
    let sy: f64 = (0..g.ny()).map(|k| (-g.y(k) * g.y(k)).exp()).sum::<f64>() * g.dy();
    assert!((n.l1 - sx * sy).abs() < 1e-12, "l1 {}", n.l1);
    assert!((n.l1 / (4.0 * PI.sqrt()) - 1.0).abs() < 5e-3, "l1 {}", n.l1);
    assert!(
        (n.l2 - (PI * (PI / 2.0).sqrt()).sqrt()).abs() < 1e-10,
        "l2 {}",
        n.l2
    );
    let z = Field::zeros(g).norms();
    assert_eq!((z.l1, z.l2, z.linf, z.trinorm), (0.0, 0.0, 0.0, 0.0));
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..5 {
        assert!(random_smooth(g, &mut rng).norms().plancherel_residual < 1e-10);
    }
}

#[test]
fn pz_examples() {
    let c = |re, im| Complex64::new(re, im);
    assert_eq!(pz(1, 0.0, c(1.0, 0.0), 1.0), c(3.0, 0.0));
    assert_eq!(pz(1, 2.0, c(0.0, 1.0), 1.0), c(1.0, 4.0));
    assert_eq!(pz(2, -12.0, c(-1.0, 3.0), 1.0), c(0.0, 0.0));
}

#[test]
fn lemma_constant_and_smallness() {
    let c = lemma_constant(1.0);
    assert!((c - 16.3744).abs() < 1e-4);
    assert!((2.0 * PI / c - 0.38374).abs() < 1e-4);
    let zero = smallness_report(&Field::zeros(reference_grid())).unwrap();
    assert!(zero.ok && zero.ratio == 0.0);
    // The closed-form norms give 0.14180 and 0.3696; the trapezoid l1 on Nx = 32
    // undershoots |cos| slightly.
    let s = smallness_report(&gaussian(reference_grid(), 0.02)).unwrap();
    assert!(s.ok);
    assert!((s.trinorm - 0.14180).abs() < 1e-3, "trinorm {}", s.trinorm);
    assert!((s.ratio - 0.3696).abs() < 3e-3, "ratio {}", s.ratio);
}

#[test]
fn basic_lemma_holds_on_random_band_limited_data() {
    let g = make_grid(PI, 16, 64, 8.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let zero = basic_lemma_report(&SpectralCoeffs::zeros(g), Complex64::new(0.25, 0.3)).unwrap();
    assert!(zero.satisfied && zero.lhs == 0.0 && zero.rhs == 0.0);
    for _ in 0..100 {
        let mut f = SpectralCoeffs::zeros(g);
        for m in g.modes() {
            if m == 0 {
                continue;
            }
            for q in g.modes_y() {
                if q.abs() < 12 && m.abs() < 6 {
                    f.set(
                        m,
                        q,
                        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                    );
                }
            }
        }
        let k = rng.gen_range(-3i32..=3) as f64;
        let re = 0.5 * k + rng.gen_range(0.05..0.45);
        let z = Complex64::new(re, rng.gen_range(-5.0..5.0));
        let r = basic_lemma_report(&f, z).unwrap();
        assert!(r.satisfied, "lhs {} rhs {} at z = {z}", r.lhs, r.rhs);
    }
}
