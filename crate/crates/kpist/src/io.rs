//! File formats.
//!
//! Field and spectral files share a layout: a UTF-8 header of `key: value`
//! lines, a line `---`, then the payload. Floats are written with Rust's
//! shortest round-trip formatting, so text payloads load back bit-exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::config::Document;
use crate::cylinder::{make_grid, CylinderGrid, Field};
use crate::error::{Error, Result};
use crate::inverse::BoundaryTraceSet;
use crate::spectral::{ContourGrid, Provenance, SpectralData};

pub const FIELD_FORMAT: &str = "kpist-field/1";
pub const SPECTRAL_FORMAT: &str = "kpist-spectral/1";
pub const TRACES_FORMAT: &str = "kpist-traces/1";

/// Upper bound on `Nx * Ny` accepted by the loaders.
pub const MAX_POINTS: usize = 1 << 26;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Encoding {
    Csv,
    Binary,
}

impl Encoding {
    pub fn name(self) -> &'static str {
        match self {
            Encoding::Csv => "csv",
            Encoding::Binary => "binary",
        }
    }
}

fn fmt_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

/// Splits `header ---\n payload`.
fn split_header(bytes: &[u8]) -> Result<(Document, &[u8])> {
    let mut start = 0;
    loop {
        let end = bytes[start..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|p| start + p)
            .ok_or_else(|| fmt_err("header terminator `---` not found"))?;
        let line = &bytes[start..end];
        let line = line.strip_suffix(b"\r").unwrap_or(line);
        if line == b"---" {
            let head =
                std::str::from_utf8(&bytes[..start]).map_err(|_| fmt_err("header is not UTF-8"))?;
            let doc = Document::parse(head).map_err(|e| fmt_err(format!("header: {e}")))?;
            if doc.sections.iter().any(|(s, _)| !s.is_empty()) {
                return Err(fmt_err("header may not contain sections"));
            }
            return Ok((doc, &bytes[end + 1..]));
        }
        start = end + 1;
    }
}

fn req<'a>(doc: &'a Document, key: &str) -> Result<&'a str> {
    doc.get("", key)
        .ok_or_else(|| fmt_err(format!("header key `{key}` missing")))
}

fn req_parse<T: std::str::FromStr>(doc: &Document, key: &str) -> Result<T> {
    let v = req(doc, key)?;
    v.parse()
        .map_err(|_| fmt_err(format!("header `{key}`: cannot parse {v:?}")))
}

fn check_format(doc: &Document, want: &str) -> Result<()> {
    let got = req(doc, "format")?;
    if got != want {
        return Err(fmt_err(format!("expected format {want}, found {got}")));
    }
    Ok(())
}

fn grid_header(out: &mut String, g: &CylinderGrid) {
    let _ = writeln!(out, "ell: {}", g.ell());
    let _ = writeln!(out, "nx: {}", g.nx());
    let _ = writeln!(out, "ny: {}", g.ny());
    let _ = writeln!(out, "ly: {}", g.ly());
}

fn read_grid(doc: &Document) -> Result<CylinderGrid> {
    let ell: f64 = req_parse(doc, "ell")?;
    let nx: usize = req_parse(doc, "nx")?;
    let ny: usize = req_parse(doc, "ny")?;
    let ly: f64 = req_parse(doc, "ly")?;
    if nx.checked_mul(ny).is_none_or(|p| p > MAX_POINTS) {
        return Err(fmt_err(format!(
            "grid {nx} x {ny} exceeds the loader limit"
        )));
    }
    make_grid(ell, nx, ny, ly).map_err(|e| fmt_err(e.to_string()))
}

/// CSV payloads end in a newline; without it a cut inside the last number
/// would still parse.
fn csv_text(payload: &[u8]) -> Result<&str> {
    let text = std::str::from_utf8(payload).map_err(|_| fmt_err("CSV payload is not UTF-8"))?;
    if !text.ends_with('\n') {
        return Err(fmt_err("CSV payload is truncated (no final newline)"));
    }
    Ok(text)
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| fmt_err(format!("{what}: cannot parse {s:?}")))?;
    if !v.is_finite() {
        return Err(fmt_err(format!("{what}: non-finite value")));
    }
    Ok(v)
}

pub fn encode_field(field: &Field, enc: Encoding) -> Vec<u8> {
    let g = field.grid();
    let mut head = String::new();
    let _ = writeln!(head, "format: {FIELD_FORMAT}");
    grid_header(&mut head, g);
    // Exact test: a lossless format cannot drop roundoff-level imaginary parts.
    let real = field.values().iter().all(|v| v.im == 0.0);
    let _ = writeln!(head, "kind: {}", if real { "real" } else { "complex" });
    let _ = writeln!(head, "encoding: {}", enc.name());
    head.push_str("---\n");
    let mut out = head.into_bytes();
    match enc {
        Encoding::Csv => {
            let mut body = String::with_capacity(field.values().len() * 48);
            body.push_str("j,k,re,im\n");
            for k in 0..g.ny() {
                for j in 0..g.nx() {
                    let v = field.at(j, k);
                    let _ = writeln!(body, "{j},{k},{},{}", v.re, v.im);
                }
            }
            out.extend_from_slice(body.as_bytes());
        }
        Encoding::Binary => {
            out.reserve(field.values().len() * 16);
            for v in field.values() {
                out.extend_from_slice(&v.re.to_le_bytes());
                out.extend_from_slice(&v.im.to_le_bytes());
            }
        }
    }
    out
}

pub fn decode_field(bytes: &[u8]) -> Result<Field> {
    let (doc, payload) = split_header(bytes)?;
    check_format(&doc, FIELD_FORMAT)?;
    let g = read_grid(&doc)?;
    let real = match req(&doc, "kind")? {
        "real" => true,
        "complex" => false,
        k => return Err(fmt_err(format!("unknown kind {k:?}"))),
    };
    let n = g.len();
    let values = match req(&doc, "encoding")? {
        "binary" => {
            if payload.len() != 16 * n {
                return Err(fmt_err(format!(
                    "binary payload has {} bytes, expected {}",
                    payload.len(),
                    16 * n
                )));
            }
            let mut vals = Vec::with_capacity(n);
            for c in payload.chunks_exact(16) {
                let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
                let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
                if !(re.is_finite() && im.is_finite()) {
                    return Err(fmt_err("non-finite value in payload"));
                }
                vals.push(Complex64::new(re, im));
            }
            vals
        }
        "csv" => {
            let text = csv_text(payload)?;
            let mut lines = text.lines();
            if lines.next().map(str::trim) != Some("j,k,re,im") {
                return Err(fmt_err("CSV header `j,k,re,im` missing"));
            }
            let rows: Vec<&str> = lines.filter(|l| !l.trim().is_empty()).collect();
            if rows.len() != n {
                return Err(fmt_err(format!(
                    "CSV has {} rows, expected {n}",
                    rows.len()
                )));
            }
            let mut vals = vec![Complex64::new(0.0, 0.0); n];
            let mut seen = vec![false; n];
            for (no, row) in rows.iter().enumerate() {
                let cols: Vec<&str> = row.split(',').collect();
                if cols.len() != 4 {
                    return Err(fmt_err(format!("CSV row {}: expected 4 columns", no + 1)));
                }
                let j: usize = cols[0]
                    .trim()
                    .parse()
                    .map_err(|_| fmt_err(format!("CSV row {}: bad j", no + 1)))?;
                let k: usize = cols[1]
                    .trim()
                    .parse()
                    .map_err(|_| fmt_err(format!("CSV row {}: bad k", no + 1)))?;
                if j >= g.nx() || k >= g.ny() {
                    return Err(fmt_err(format!(
                        "CSV row {}: index ({j}, {k}) out of range",
                        no + 1
                    )));
                }
                let i = k * g.nx() + j;
                if std::mem::replace(&mut seen[i], true) {
                    return Err(fmt_err(format!(
                        "CSV row {}: duplicate index ({j}, {k})",
                        no + 1
                    )));
                }
                vals[i] = Complex64::new(parse_f64(cols[2], "re")?, parse_f64(cols[3], "im")?);
            }
            vals
        }
        e => return Err(fmt_err(format!("unknown encoding {e:?}"))),
    };
    if real && values.iter().any(|v| v.im != 0.0) {
        return Err(fmt_err("kind real but payload has nonzero imaginary parts"));
    }
    Field::new(g, values).map_err(|e| fmt_err(e.to_string()))
}

pub fn save_field(path: &Path, field: &Field, enc: Encoding) -> Result<()> {
    fs::write(path, encode_field(field, enc))?;
    Ok(())
}

pub fn load_field(path: &Path) -> Result<Field> {
    decode_field(&fs::read(path)?)
}

pub fn encode_spectral(f: &SpectralData) -> String {
    let cg = f.contour;
    let g = cg.grid();
    let mut out = String::new();
    let _ = writeln!(out, "format: {SPECTRAL_FORMAT}");
    grid_header(&mut out, g);
    let _ = writeln!(out, "omega: {}", g.omega());
    let _ = writeln!(out, "n_max: {}", cg.n_max());
    let _ = writeln!(out, "time: {}", f.time);
    let _ = writeln!(out, "provenance: {}", f.provenance.name());
    out.push_str("---\nn,xi,tau_im,reF,imF\n");
    for (i, v) in f.g.iter().enumerate() {
        let (n, row) = cg.sample(i);
        let _ = writeln!(
            out,
            "{n},{},{},{},{}",
            g.xi(row),
            cg.tau_im(n, row),
            v.re,
            v.im
        );
    }
    out
}

pub fn decode_spectral(bytes: &[u8]) -> Result<SpectralData> {
    let (doc, payload) = split_header(bytes)?;
    check_format(&doc, SPECTRAL_FORMAT)?;
    let g = read_grid(&doc)?;
    let omega: f64 = req_parse(&doc, "omega")?;
    if omega != g.omega() {
        return Err(fmt_err(format!(
            "omega {omega} does not match pi/ell = {}",
            g.omega()
        )));
    }
    let n_max: usize = req_parse(&doc, "n_max")?;
    let cg = ContourGrid::new(g, n_max).map_err(|e| fmt_err(e.to_string()))?;
    let time: f64 = req_parse(&doc, "time")?;
    if !(time.is_finite() && time >= 0.0) {
        return Err(fmt_err("time must be finite and nonnegative"));
    }
    let provenance = match req(&doc, "provenance")? {
        "forward" => Provenance::Forward,
        "evolved" => Provenance::Evolved,
        "loaded" => Provenance::Loaded,
        p => return Err(fmt_err(format!("unknown provenance {p:?}"))),
    };
    let text = csv_text(payload)?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("n,xi,tau_im,reF,imF") {
        return Err(fmt_err("CSV header `n,xi,tau_im,reF,imF` missing"));
    }
    let rows: Vec<&str> = lines.filter(|l| !l.trim().is_empty()).collect();
    if rows.len() != cg.len() {
        return Err(fmt_err(format!(
            "CSV has {} rows, expected {}",
            rows.len(),
            cg.len()
        )));
    }
    let mut vals = Vec::with_capacity(cg.len());
    for (i, row) in rows.iter().enumerate() {
        let cols: Vec<&str> = row.split(',').collect();
        if cols.len() != 5 {
            return Err(fmt_err(format!("CSV row {}: expected 5 columns", i + 1)));
        }
        let (n, r) = cg.sample(i);
        let got_n: i64 = cols[0]
            .trim()
            .parse()
            .map_err(|_| fmt_err(format!("CSV row {}: bad n", i + 1)))?;
        let xi = parse_f64(cols[1], "xi")?;
        let tau = parse_f64(cols[2], "tau_im")?;
        if got_n != n || xi != g.xi(r) || tau != cg.tau_im(n, r) {
            return Err(fmt_err(format!(
                "CSV row {}: sample ({got_n}, {xi}) out of contour order",
                i + 1
            )));
        }
        vals.push(Complex64::new(
            parse_f64(cols[3], "reF")?,
            parse_f64(cols[4], "imF")?,
        ));
    }
    Ok(SpectralData {
        contour: cg,
        g: vals,
        time,
        provenance,
    })
}

pub fn save_spectral(path: &Path, f: &SpectralData) -> Result<()> {
    fs::write(path, encode_spectral(f))?;
    Ok(())
}

pub fn load_spectral(path: &Path) -> Result<SpectralData> {
    decode_spectral(&fs::read(path)?)
}

fn trace_name(n: i64, q: i64) -> String {
    format!("n_{n}_k_{q}.field")
}

/// Writes `dir/manifest.txt` and one binary Field file per stored trace,
/// named `n_<n>_k_<q>.field` with `q` the signed xi index.
pub fn save_traces(dir: &Path, w: &BoundaryTraceSet) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let cg = w.contour;
    let g = *cg.grid();
    let mut files = Vec::with_capacity(w.active.len());
    for &i in &w.active {
        let (n, row) = cg.sample(i);
        let path = dir.join(trace_name(n, g.xi_index(row)));
        save_field(&path, &w.trace(n, row), Encoding::Binary)?;
        files.push(path);
    }
    let mut m = String::new();
    let _ = writeln!(m, "format: {TRACES_FORMAT}");
    grid_header(&mut m, &g);
    let _ = writeln!(m, "n_max: {}", cg.n_max());
    let _ = writeln!(m, "iterations: {}", w.iterations);
    let _ = writeln!(m, "residual: {}", w.residual);
    let _ = writeln!(m, "outside_theory: {}", w.outside_theory);
    let ratios: Vec<String> = w.contraction_ratios.iter().map(|r| r.to_string()).collect();
    let _ = writeln!(m, "contraction_ratios: {}", ratios.join(", "));
    let names: Vec<String> = w
        .active
        .iter()
        .map(|&i| {
            let (n, row) = cg.sample(i);
            trace_name(n, g.xi_index(row))
        })
        .collect();
    let _ = writeln!(m, "traces: {}", names.join(", "));
    m.push_str("---\n");
    fs::write(dir.join("manifest.txt"), m)?;
    Ok(files)
}

pub fn load_traces(dir: &Path) -> Result<BoundaryTraceSet> {
    let bytes = fs::read(dir.join("manifest.txt"))?;
    let (doc, _) = split_header(&bytes)?;
    check_format(&doc, TRACES_FORMAT)?;
    let g = read_grid(&doc)?;
    let cg = ContourGrid::new(g, req_parse(&doc, "n_max")?).map_err(|e| fmt_err(e.to_string()))?;
    let mut w = BoundaryTraceSet::ones(cg);
    w.iterations = req_parse(&doc, "iterations")?;
    w.residual = req_parse(&doc, "residual")?;
    w.outside_theory = req_parse(&doc, "outside_theory")?;
    w.contraction_ratios = req(&doc, "contraction_ratios")?
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_f64(s, "contraction ratio"))
        .collect::<Result<_>>()?;
    let mut entries = Vec::new();
    for name in req(&doc, "traces")?
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
    {
        let bad = || fmt_err(format!("bad trace name {name:?}"));
        let rest = name
            .strip_prefix("n_")
            .and_then(|s| s.strip_suffix(".field"))
            .ok_or_else(bad)?;
        let (n, q) = rest.split_once("_k_").ok_or_else(bad)?;
        let (n, q): (i64, i64) = (n.parse().map_err(|_| bad())?, q.parse().map_err(|_| bad())?);
        let row = g.xi_row(q).ok_or_else(bad)?;
        let i = cg.index(n, row).ok_or_else(bad)?;
        let field = load_field(&dir.join(name))?;
        if *field.grid() != g {
            return Err(fmt_err(format!("trace {name} is on a different grid")));
        }
        entries.push((i, field));
    }
    entries.sort_by_key(|(i, _)| *i);
    if entries.windows(2).any(|p| p[0].0 == p[1].0) {
        return Err(fmt_err("duplicate trace"));
    }
    w.active = entries.iter().map(|(i, _)| *i).collect();
    for &i in &w.active {
        let closed = cg
            .mirror(i)
            .is_some_and(|j| w.active.binary_search(&j).is_ok());
        if !closed {
            return Err(fmt_err(
                "stored traces are not closed under (n, xi) -> (-n, -xi)",
            ));
        }
    }
    w.traces = entries
        .into_iter()
        .flat_map(|(_, f)| f.into_values())
        .collect();
    Ok(w)
}

/// Decodes a Field or spectral file written by this crate, re-encodes it and
/// checks the bytes are unchanged.
pub fn io_roundtrip(path: &Path) -> Result<()> {
    let bytes = fs::read(path)?;
    let (doc, _) = split_header(&bytes)?;
    let again = match req(&doc, "format")? {
        FIELD_FORMAT => {
            let enc = match req(&doc, "encoding")? {
                "binary" => Encoding::Binary,
                _ => Encoding::Csv,
            };
            encode_field(&decode_field(&bytes)?, enc)
        }
        SPECTRAL_FORMAT => encode_spectral(&decode_spectral(&bytes)?).into_bytes(),
        f => return Err(fmt_err(format!("unknown format {f}"))),
    };
    if again != bytes {
        return Err(fmt_err(format!(
            "{} does not re-encode to identical bytes",
            path.display()
        )));
    }
    Ok(())
}

/// Metrics CSV `t,l2_rel,linf_rel`.
pub fn encode_metrics(rows: &[(f64, f64, f64)]) -> String {
    let mut out = String::from("t,l2_rel,linf_rel\n");
    for (t, l2, linf) in rows {
        let _ = writeln!(out, "{t},{l2},{linf}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn header_split() {
        let (d, rest) = split_header(b"a: 1\n---\nxyz").unwrap();
        assert_eq!(d.get("", "a"), Some("1"));
        assert_eq!(rest, b"xyz");
        assert!(split_header(b"a: 1\nxyz").is_err());
        assert!(split_header(b"[s]\n---\n").is_err());
    }

    #[test]
    fn field_rejects_wrong_format_and_kind() {
        let g = make_grid(PI, 4, 4, 2.0).unwrap();
        let f = Field::from_fn(g, Complex64::new);
        let text = String::from_utf8(encode_field(&f, Encoding::Csv)).unwrap();
        assert!(decode_field(text.replace(FIELD_FORMAT, "other/1").as_bytes()).is_err());
        assert!(decode_field(text.replace("kind: complex", "kind: real").as_bytes()).is_err());
        assert!(
            decode_field(text.replace("encoding: csv", "encoding: binary").as_bytes()).is_err()
        );
    }

    #[test]
    fn metrics_layout() {
        assert_eq!(
            encode_metrics(&[(0.2, 1e-3, 2.5e-3)]),
            "t,l2_rel,linf_rel\n0.2,0.001,0.0025\n"
        );
    }
}
