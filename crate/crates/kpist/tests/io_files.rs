use std::f64::consts::PI;
use std::fs;

use kpist::cylinder::{make_grid, Field};
use kpist::heatjost::{BoundaryMethod, JostOptions};
use kpist::inverse::{solve_inverse, InverseConfig};
use kpist::io::{
    decode_field, encode_field, io_roundtrip, load_field, load_spectral, load_traces, save_field,
    save_spectral, save_traces, Encoding,
};
use kpist::spectral::{forward_transform, ContourGrid};
use kpist::Error;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_field(seed: u64) -> Field {
    let g = make_grid(PI, 8, 16, 5.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values =
        (0..g.len()).map(|_| Complex64::new(rng.gen_range(-1e3..1e3), rng.gen_range(-1e-9..1e-9)));
    Field::new(g, values.collect()).unwrap()
}

#[test]
fn binary_field_round_trip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.field");
    let u = random_field(41);
    save_field(&path, &u, Encoding::Binary).unwrap();
    let back = load_field(&path).unwrap();
    assert!(u
        .values()
        .iter()
        .zip(back.values())
        .all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()));
    assert_eq!(back.grid(), u.grid());
    io_roundtrip(&path).unwrap();
}

#[test]
fn csv_field_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.csv");
    let u = random_field(43);
    save_field(&path, &u, Encoding::Csv).unwrap();
    assert_eq!(load_field(&path).unwrap(), u);
    io_roundtrip(&path).unwrap();
}

#[test]
fn spectral_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spectral.csv");
    let g = make_grid(PI, 16, 64, 8.0).unwrap();
    let u = Field::from_real_fn(g, |x, y| 0.02 * x.cos() * (-y * y).exp());
    let cg = ContourGrid::new(g, 2).unwrap();
    let f = forward_transform(&u, &cg, BoundaryMethod::HalfPlane, &JostOptions::default()).unwrap();
    save_spectral(&path, &f).unwrap();
    assert_eq!(load_spectral(&path).unwrap(), f);
    io_roundtrip(&path).unwrap();

    let w = solve_inverse(&f, &InverseConfig::default()).unwrap();
    let tdir = dir.path().join("traces");
    let files = save_traces(&tdir, &w).unwrap();
    assert_eq!(files.len(), w.active.len());
    let back = load_traces(&tdir).unwrap();
    assert_eq!(back.active, w.active);
    assert_eq!(back.traces, w.traces);
    assert_eq!(back.contraction_ratios, w.contraction_ratios);
}

#[test]
fn truncated_files_are_format_errors() {
    let u = random_field(47);
    for enc in [Encoding::Binary, Encoding::Csv] {
        let bytes = encode_field(&u, enc);
        for cut in [bytes.len() - 1, bytes.len() / 2, 10] {
            assert!(
                matches!(decode_field(&bytes[..cut]), Err(Error::Format(_))),
                "{enc:?} cut at {cut}"
            );
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    let g = make_grid(PI, 8, 16, 5.0).unwrap();
    let f = kpist::spectral::SpectralData::zeros(ContourGrid::new(g, 1).unwrap());
    save_spectral(&path, &f).unwrap();
    let full = fs::read(&path).unwrap();
    fs::write(&path, &full[..full.len() - 20]).unwrap();
    assert!(matches!(load_spectral(&path), Err(Error::Format(_))));
    assert!(io_roundtrip(&path).is_err());
}
