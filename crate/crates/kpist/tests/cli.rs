use std::fs;
use std::path::{Path, PathBuf};

use kpist::cli::run;
use kpist::config::{Potential, RunConfig};
use kpist::io::{load_field, load_spectral};
use kpist::kpsolver::RunManifest;

fn small_config(potential: Potential) -> RunConfig {
    RunConfig {
        nx: 16,
        ny: 64,
        ly: 8.0,
        n_max: 2,
        potential,
        ..RunConfig::default()
    }
}

fn write_config(dir: &Path, cfg: &RunConfig) -> PathBuf {
    let path = dir.join("run.cfg");
    fs::write(&path, cfg.to_text()).unwrap();
    path
}

fn kpist(args: &[&str]) -> i32 {
    run(std::iter::once("kpist").chain(args.iter().copied()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn forward_of_zero_potential_writes_zero_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_config(Potential::Zero));
    let out = dir.path().join("out");
    assert_eq!(
        kpist(&["forward", "--config", s(&cfg), "--out", s(&out)]),
        0
    );
    let f = load_spectral(&out.join("spectral.csv")).unwrap();
    assert!(f.g.iter().all(|v| v.norm() == 0.0));
    let m = RunManifest::parse(&fs::read_to_string(out.join("manifest.txt")).unwrap()).unwrap();
    assert!(!m.partial);
    assert_eq!(m.command, "forward");
}

#[test]
fn bad_inputs_exit_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "[grid]\nnx: seven\n").unwrap();
    assert_eq!(
        kpist(&[
            "forward",
            "--config",
            s(&bad),
            "--out",
            s(&dir.path().join("a"))
        ]),
        2
    );
    fs::write(&bad, "[nonsense]\nkey: 1\n").unwrap();
    assert_eq!(
        kpist(&[
            "forward",
            "--config",
            s(&bad),
            "--out",
            s(&dir.path().join("b"))
        ]),
        2
    );

    let cfg = write_config(
        dir.path(),
        &small_config(Potential::CosGauss { amplitude: 0.02 }),
    );
    let out = dir.path().join("c");
    assert_eq!(
        kpist(&["forward", "--config", s(&cfg), "--out", s(&out)]),
        0
    );
    let spectral = out.join("spectral.csv");
    let bytes = fs::read(&spectral).unwrap();
    let cut = dir.path().join("cut.csv");
    fs::write(&cut, &bytes[..bytes.len() / 2]).unwrap();
    let out = dir.path().join("d");
    assert_eq!(
        kpist(&[
            "inverse",
            "--config",
            s(&cfg),
            "--input",
            s(&cut),
            "--out",
            s(&out)
        ]),
        2
    );
    let m = RunManifest::parse(&fs::read_to_string(out.join("manifest.txt")).unwrap()).unwrap();
    assert!(m.partial);
}

#[test]
fn large_potential_needs_force() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &small_config(Potential::CosGauss { amplitude: 1.0 }),
    );
    assert_eq!(
        kpist(&[
            "solve",
            "--config",
            s(&cfg),
            "--out",
            s(&dir.path().join("o"))
        ]),
        2
    );
}

#[test]
fn solve_at_time_zero_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &small_config(Potential::CosGauss { amplitude: 0.02 }),
    );
    let out = dir.path().join("o");
    let code = kpist(&[
        "solve",
        "--config",
        s(&cfg),
        "--times",
        "0",
        "--encoding",
        "csv",
        "--out",
        s(&out),
    ]);
    assert_eq!(code, 0);
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(lines.next(), Some("t,l2_rel,linf_rel"));
    let row: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(row[0], 0.0);
    assert!(row[1] <= 2e-2, "round trip {}", row[1]);
    let u = load_field(&out.join("ist_t0.field")).unwrap();
    assert_eq!(u.grid().ny(), 64);
}

#[test]
fn pipeline_stages_chain_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &small_config(Potential::CosGauss { amplitude: 0.02 }),
    );
    let fwd = dir.path().join("fwd");
    assert_eq!(
        kpist(&["forward", "--config", s(&cfg), "--out", s(&fwd)]),
        0
    );
    let evo = dir.path().join("evo");
    let spectral = fwd.join("spectral.csv");
    assert_eq!(
        kpist(&[
            "evolve",
            "--config",
            s(&cfg),
            "--input",
            s(&spectral),
            "--times",
            "0.1",
            "--out",
            s(&evo)
        ]),
        0
    );
    let inv = dir.path().join("inv");
    let evolved = evo.join("spectral_t0.1.csv");
    assert_eq!(
        kpist(&[
            "inverse",
            "--config",
            s(&cfg),
            "--input",
            s(&evolved),
            "--out",
            s(&inv)
        ]),
        0
    );
    assert!(inv.join("traces").join("manifest.txt").exists());
    let u = load_field(&inv.join("u.field")).unwrap();
    assert!(u.max_abs() > 0.0);
    let pde = dir.path().join("pde");
    assert_eq!(
        kpist(&[
            "pde",
            "--config",
            s(&cfg),
            "--times",
            "0.1",
            "--out",
            s(&pde)
        ]),
        0
    );
    let v = load_field(&pde.join("pde_t0.1.field")).unwrap();
    let d = kpist::kpsolver::compare(&u, &v).unwrap();
    assert!(d.l2_rel <= 5e-2, "ist vs pde {}", d.l2_rel);
}

#[test]
fn validate_subset_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &small_config(Potential::CosGauss { amplitude: 0.02 }),
    );
    let out = dir.path().join("o");
    assert_eq!(
        kpist(&[
            "validate",
            "--config",
            s(&cfg),
            "--criteria",
            "1,2,8",
            "--out",
            s(&out)
        ]),
        0
    );
    let table = fs::read_to_string(out.join("validation.csv")).unwrap();
    assert_eq!(table.lines().count(), 4, "{table}");
}
