use std::f64::consts::PI;

use kpist::config::{Document, RunConfig};
use kpist::cylinder::{
    analyze, make_grid, synthesize, zero_mass_project, CylinderGrid, Field, SpectralCoeffs,
};
use kpist::io::{decode_field, decode_spectral, encode_field, encode_spectral, Encoding};
use kpist::kpsolver::{compare, dispersion, RunManifest};
use kpist::spectral::{evolve, r0, zeta, ContourGrid, SpectralData};
use num_complex::Complex64;
use proptest::prelude::*;

fn grid() -> CylinderGrid {
    make_grid(PI, 8, 16, 5.0).unwrap()
}

fn values(len: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec(
        (-1e3..1e3f64, -1e3..1e3f64).prop_map(|(a, b)| Complex64::new(a, b)),
        len,
    )
}

fn field() -> impl Strategy<Value = Field> {
    values(grid().len()).prop_map(|v| Field::new(grid(), v).unwrap())
}

fn spectral() -> impl Strategy<Value = SpectralData> {
    let cg = ContourGrid::new(grid(), 2).unwrap();
    (values(cg.len()), 0.0..10.0f64).prop_map(move |(g, time)| SpectralData {
        g,
        time,
        ..SpectralData::zeros(cg)
    })
}

fn nonzero_n() -> impl Strategy<Value = i64> {
    prop_oneof![-8i64..=-1, 1i64..=8]
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0, |m: f64, (x, y)| m.max((x - y).norm()))
}

proptest! {
    #[test]
    fn transforms_invert_each_other(u in field()) {
        let scale = u.max_abs().max(1.0);
        prop_assert!(synthesize(&analyze(&u)).sub(&u).unwrap().max_abs() <= 1e-12 * scale);
        let c = SpectralCoeffs::new(grid(), u.values().to_vec()).unwrap();
        prop_assert!(max_diff(analyze(&synthesize(&c)).values(), c.values()) <= 1e-12 * scale);
    }

    #[test]
    fn zero_mass_projection_is_idempotent(u in field()) {
        let p = zero_mass_project(&u);
        prop_assert!(p.mass_defect() <= 1e-12 * u.max_abs().max(1.0));
        prop_assert!(zero_mass_project(&p).sub(&p).unwrap().max_abs() <= 1e-12 * u.max_abs().max(1.0));
    }

    #[test]
    fn evolution_is_an_isometric_group(f in spectral(), t1 in 0.0..3.0f64, t2 in 0.0..3.0f64) {
        let a = evolve(&evolve(&f, t1).unwrap(), t2).unwrap();
        let b = evolve(&f, t1 + t2).unwrap();
        let scale = f.max_abs().max(1.0);
        prop_assert!(max_diff(&a.g, &b.g) <= 1e-9 * scale);
        for (x, y) in evolve(&f, t1).unwrap().g.iter().zip(&f.g) {
            prop_assert!((x.norm() - y.norm()).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn contour_points_invert_and_reflect(n in nonzero_n(), xi in -100.0..100.0f64, omega in 0.2..5.0f64) {
        let z = zeta(n, xi, omega).unwrap();
        let (m, x) = r0(z, omega);
        prop_assert!((m - n as f64).abs() <= 1e-12 * n.abs() as f64);
        prop_assert!((x - xi).abs() <= 1e-10 * xi.abs().max(1.0));
        let mirrored = zeta(-n, -xi, omega).unwrap();
        prop_assert!((mirrored + z.conj()).norm() <= 1e-12 * z.norm().max(1.0));
    }

    #[test]
    fn dispersion_is_odd(m in nonzero_n(), xi in -50.0..50.0f64, omega in 0.2..5.0f64) {
        let a = dispersion(m, xi, omega).unwrap();
        let b = dispersion(-m, -xi, omega).unwrap();
        prop_assert!((a + b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn compare_is_symmetric(a in field(), b in field()) {
        let (x, y) = (compare(&a, &b).unwrap(), compare(&b, &a).unwrap());
        prop_assert_eq!(x, y);
        prop_assert!(x.l2_rel <= 2.0 && x.linf_rel <= 2.0);
    }

    #[test]
    fn field_files_round_trip(u in field(), csv in any::<bool>()) {
        let enc = if csv { Encoding::Csv } else { Encoding::Binary };
        let bytes = encode_field(&u, enc);
        let back = decode_field(&bytes).unwrap();
        prop_assert_eq!(&back, &u);
        prop_assert_eq!(encode_field(&back, enc), bytes);
    }

    #[test]
    fn spectral_files_round_trip(f in spectral()) {
        let text = encode_spectral(&f);
        let back = decode_spectral(text.as_bytes()).unwrap();
        prop_assert_eq!(&back.g, &f.g);
        prop_assert_eq!(encode_spectral(&back), text);
    }

    #[test]
    fn decoders_reject_garbage_without_panicking(bytes in prop::collection::vec(any::<u8>(), 0..512)) {
        let _ = decode_field(&bytes);
        let _ = decode_spectral(&bytes);
        if let Ok(text) = std::str::from_utf8(&bytes) {
            let _ = RunConfig::parse(text);
            let _ = RunManifest::parse(text);
        }
    }

    #[test]
    fn documents_round_trip(text in "([a-z_]{1,6}: [a-z0-9 .,-]{0,8}\n|\\[[a-z]{1,5}\\]\n|# [a-z]{0,5}\n|\n){0,12}") {
        if let Ok(doc) = Document::parse(&text) {
            prop_assert_eq!(Document::parse(&doc.to_text()).unwrap(), doc);
        }
    }

    #[test]
    fn truncated_field_files_are_rejected(u in field(), csv in any::<bool>(), frac in 0.0..1.0f64) {
        let enc = if csv { Encoding::Csv } else { Encoding::Binary };
        let bytes = encode_field(&u, enc);
        let cut = ((bytes.len() - 1) as f64 * frac) as usize;
        prop_assert!(decode_field(&bytes[..cut]).is_err());
    }
}
