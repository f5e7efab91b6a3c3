//! Key:value text documents with `[section]` headers, and the run configuration
//! built on them.
//!
//! ```text
//! # comment
//! [grid]
//! ell: 3.141592653589793
//! nx: 32
//! ```
//!
//! Floats are written with Rust's shortest round-trip formatting, so a document
//! written by `Document::to_text` parses back to identical values.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::cylinder::{make_grid, CylinderGrid, Field};
use crate::error::{Error, Result};
use crate::heatjost::{BoundaryMethod, JostOptions, ZeroMode};
use crate::inverse::InverseConfig;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Document {
    /// Sections in file order; keys before the first header live in section `""`.
    pub sections: Vec<(String, Vec<(String, String)>)>,
}

fn valid_name(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
}

impl Document {
    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = Document::default();
        let mut current = String::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| {
                        Error::Config(format!("line {}: unterminated section header", no + 1))
                    })?
                    .trim();
                if !valid_name(name) {
                    return Err(Error::Config(format!(
                        "line {}: bad section name {name:?}",
                        no + 1
                    )));
                }
                if doc.sections.iter().any(|(s, _)| s == name) {
                    return Err(Error::Config(format!(
                        "line {}: duplicate section [{name}]",
                        no + 1
                    )));
                }
                doc.sections.push((name.to_string(), Vec::new()));
                current = name.to_string();
                continue;
            }
            let (k, v) = line
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key: value`", no + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !valid_name(k) {
                return Err(Error::Config(format!("line {}: bad key {k:?}", no + 1)));
            }
            if doc.get(&current, k).is_some() {
                return Err(Error::Config(format!(
                    "line {}: duplicate key {k:?}",
                    no + 1
                )));
            }
            doc.set(&current, k, v);
        }
        Ok(doc)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .iter()
            .find(|(s, _)| s == section)
            .and_then(|(_, kv)| kv.iter().find(|(k, _)| k == key))
            .map(|(_, v)| v.as_str())
    }

    pub fn set(&mut self, section: &str, key: &str, value: impl ToString) {
        let idx = match self.sections.iter().position(|(s, _)| s == section) {
            Some(i) => i,
            None => {
                self.sections.push((section.to_string(), Vec::new()));
                self.sections.len() - 1
            }
        };
        let kv = &mut self.sections[idx].1;
        let value = value.to_string();
        match kv.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => kv.push((key.to_string(), value)),
        }
    }

    /// Parses `section.key` if present.
    pub fn parse_opt<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("[{section}] {key}: cannot parse {v:?}"))),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, kv) in &self.sections {
            if !name.is_empty() {
                if !out.is_empty() {
                    out.push('\n');
                }
                let _ = writeln!(out, "[{name}]");
            }
            for (k, v) in kv {
                let _ = writeln!(out, "{k}: {v}");
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Potential {
    Zero,
    /// `A cos(omega x) e^{-y^2}`.
    CosGauss {
        amplitude: f64,
    },
    /// `A (cos(omega x) e^{-y^2} + 0.5 sin(2 omega x) e^{-(y - 1)^2 / 2})`.
    Mixed {
        amplitude: f64,
    },
    File {
        path: PathBuf,
    },
}

impl Potential {
    /// Samples the potential on `grid`; file potentials must already live on it.
    pub fn sample(&self, grid: CylinderGrid) -> Result<Field> {
        let omega = grid.omega();
        Ok(match self {
            Potential::Zero => Field::zeros(grid),
            Potential::CosGauss { amplitude } => {
                let a = *amplitude;
                Field::from_real_fn(grid, |x, y| a * (omega * x).cos() * (-y * y).exp())
            }
            Potential::Mixed { amplitude } => {
                let a = *amplitude;
                Field::from_real_fn(grid, |x, y| {
                    a * ((omega * x).cos() * (-y * y).exp()
                        + 0.5 * (2.0 * omega * x).sin() * (-0.5 * (y - 1.0).powi(2)).exp())
                })
            }
            Potential::File { path } => {
                let f = crate::io::load_field(path)?;
                if *f.grid() != grid {
                    return Err(Error::Config(format!(
                        "{} is not on the configured grid",
                        path.display()
                    )));
                }
                f
            }
        })
    }

    pub fn family(&self) -> &'static str {
        match self {
            Potential::Zero => "zero",
            Potential::CosGauss { .. } => "cos-gauss",
            Potential::Mixed { .. } => "mixed",
            Potential::File { .. } => "file",
        }
    }
}

pub fn parse_times(s: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let t: f64 = part
            .parse()
            .map_err(|_| Error::Config(format!("bad time {part:?}")))?;
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::Config(format!(
                "times must be finite and nonnegative, got {t}"
            )));
        }
        out.push(t);
    }
    Ok(out)
}

fn format_times(ts: &[f64]) -> String {
    ts.iter()
        .map(|t| t.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub ell: f64,
    pub nx: usize,
    pub ny: usize,
    pub ly: f64,
    pub n_max: usize,
    pub potential: Potential,
    pub times: Vec<f64>,
    pub jost: JostOptions,
    pub method: BoundaryMethod,
    pub inverse: InverseConfig,
    pub pde_dt: f64,
    pub dealias: bool,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub force: bool,
    pub oracle: bool,
}

impl Default for RunConfig {
    /// The desk-scale reference configuration.
    fn default() -> Self {
        Self {
            ell: PI,
            nx: 32,
            ny: 256,
            ly: 12.0,
            n_max: 3,
            potential: Potential::CosGauss { amplitude: 0.02 },
            times: vec![0.0],
            jost: JostOptions::default(),
            method: BoundaryMethod::HalfPlane,
            inverse: InverseConfig::default(),
            pde_dt: 1e-3,
            dealias: true,
            out: None,
            threads: None,
            force: false,
            oracle: false,
        }
    }
}

fn parse_ell(s: &str) -> Result<f64> {
    match s {
        "pi" => Ok(PI),
        _ => s
            .parse()
            .map_err(|_| Error::Config(format!("[grid] ell: cannot parse {s:?}"))),
    }
}

fn parse_bool(section: &str, key: &str, s: &str) -> Result<bool> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!(
            "[{section}] {key}: expected a boolean, got {s:?}"
        ))),
    }
}

impl RunConfig {
    /// Starts from the reference configuration and applies every key present.
    pub fn from_document(doc: &Document) -> Result<Self> {
        let known: &[(&str, &[&str])] = &[
            ("grid", &["ell", "nx", "ny", "ly"]),
            ("contour", &["n_max"]),
            ("potential", &["family", "amplitude", "path"]),
            ("run", &["times", "threads", "force", "oracle"]),
            (
                "jost",
                &[
                    "tol",
                    "max_iter",
                    "method",
                    "offset_delta",
                    "cross_tol",
                    "zero_mode",
                ],
            ),
            (
                "inverse",
                &["tol", "max_iter", "orientation", "side", "active_threshold"],
            ),
            ("pde", &["dt", "dealias"]),
            ("output", &["dir"]),
        ];
        for (s, kv) in &doc.sections {
            let keys = known
                .iter()
                .find(|(n, _)| n == s)
                .map(|(_, k)| *k)
                .ok_or_else(|| Error::Config(format!("unknown section [{s}]")))?;
            if let Some((k, _)) = kv.iter().find(|(k, _)| !keys.contains(&k.as_str())) {
                return Err(Error::Config(format!("unknown key [{s}] {k}")));
            }
        }
        let mut c = RunConfig::default();
        if let Some(v) = doc.get("grid", "ell") {
            c.ell = parse_ell(v)?;
        }
        c.nx = doc.parse_opt("grid", "nx")?.unwrap_or(c.nx);
        c.ny = doc.parse_opt("grid", "ny")?.unwrap_or(c.ny);
        c.ly = doc.parse_opt("grid", "ly")?.unwrap_or(c.ly);
        c.n_max = doc.parse_opt("contour", "n_max")?.unwrap_or(c.n_max);
        let amplitude: Option<f64> = doc.parse_opt("potential", "amplitude")?;
        if let Some(family) = doc.get("potential", "family") {
            c.potential = match family {
                "zero" => Potential::Zero,
                "cos-gauss" => Potential::CosGauss {
                    amplitude: amplitude.unwrap_or(0.02),
                },
                "mixed" => Potential::Mixed {
                    amplitude: amplitude.unwrap_or(0.02),
                },
                "file" => Potential::File {
                    path: doc
                        .get("potential", "path")
                        .ok_or_else(|| {
                            Error::Config("[potential] family file needs a path".into())
                        })?
                        .into(),
                },
                other => return Err(Error::Config(format!("unknown potential family {other:?}"))),
            };
        } else if let Some(a) = amplitude {
            c.potential = Potential::CosGauss { amplitude: a };
        }
        if let Some(v) = doc.get("run", "times") {
            c.times = parse_times(v)?;
        }
        c.threads = doc.parse_opt("run", "threads")?;
        if let Some(v) = doc.get("run", "force") {
            c.force = parse_bool("run", "force", v)?;
        }
        if let Some(v) = doc.get("run", "oracle") {
            c.oracle = parse_bool("run", "oracle", v)?;
        }
        c.jost.tol = doc.parse_opt("jost", "tol")?.unwrap_or(c.jost.tol);
        c.jost.max_iter = doc
            .parse_opt("jost", "max_iter")?
            .unwrap_or(c.jost.max_iter);
        c.jost.offset_delta = doc
            .parse_opt("jost", "offset_delta")?
            .unwrap_or(c.jost.offset_delta);
        c.jost.cross_tol = doc
            .parse_opt("jost", "cross_tol")?
            .unwrap_or(c.jost.cross_tol);
        if let Some(v) = doc.get("jost", "method") {
            c.method = BoundaryMethod::parse(v)
                .ok_or_else(|| Error::Config(format!("unknown boundary method {v:?}")))?;
        }
        if let Some(v) = doc.get("jost", "zero_mode") {
            c.jost.zero_mode = ZeroMode::parse(v)
                .ok_or_else(|| Error::Config(format!("unknown zero mode {v:?}")))?;
        }
        c.inverse.tol = doc.parse_opt("inverse", "tol")?.unwrap_or(c.inverse.tol);
        c.inverse.max_iter = doc
            .parse_opt("inverse", "max_iter")?
            .unwrap_or(c.inverse.max_iter);
        c.inverse.orientation = doc
            .parse_opt("inverse", "orientation")?
            .unwrap_or(c.inverse.orientation);
        c.inverse.active_threshold = doc
            .parse_opt("inverse", "active_threshold")?
            .unwrap_or(c.inverse.active_threshold);
        if let Some(v) = doc.get("inverse", "side") {
            c.inverse.side = crate::heatjost::Side::parse(v)
                .ok_or_else(|| Error::Config(format!("unknown side {v:?}")))?;
        }
        c.pde_dt = doc.parse_opt("pde", "dt")?.unwrap_or(c.pde_dt);
        if let Some(v) = doc.get("pde", "dealias") {
            c.dealias = parse_bool("pde", "dealias", v)?;
        }
        c.out = doc.get("output", "dir").map(PathBuf::from);
        c.validate()?;
        Ok(c)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_document(&Document::parse(text)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.ell.is_finite() && self.ell > 0.0 && self.ly.is_finite() && self.ly > 0.0) {
            return bad(format!(
                "ell and ly must be positive, got {} and {}",
                self.ell, self.ly
            ));
        }
        if self.nx < 4 || self.ny < 4 || !self.nx.is_multiple_of(2) || !self.ny.is_multiple_of(2) {
            return bad(format!(
                "nx and ny must be even and >= 4, got {} and {}",
                self.nx, self.ny
            ));
        }
        if self.n_max == 0 || self.n_max >= self.nx / 2 {
            return bad(format!(
                "n_max must satisfy 1 <= n_max < nx/2, got {}",
                self.n_max
            ));
        }
        if let Potential::CosGauss { amplitude } | Potential::Mixed { amplitude } = self.potential {
            if !amplitude.is_finite() {
                return bad("amplitude must be finite".into());
            }
        }
        if !(self.jost.tol > 0.0 && self.inverse.tol > 0.0 && self.jost.offset_delta > 0.0) {
            return bad("tolerances and offset_delta must be positive".into());
        }
        if self.jost.max_iter == 0 || self.inverse.max_iter == 0 {
            return bad("max_iter must be positive".into());
        }
        if self.inverse.orientation != 1 && self.inverse.orientation != -1 {
            return bad(format!(
                "orientation must be 1 or -1, got {}",
                self.inverse.orientation
            ));
        }
        if !(self.pde_dt.is_finite() && self.pde_dt > 0.0) {
            return bad(format!("pde dt must be positive, got {}", self.pde_dt));
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<CylinderGrid> {
        make_grid(self.ell, self.nx, self.ny, self.ly)
    }

    pub fn to_document(&self) -> Document {
        let mut d = Document::default();
        d.set("grid", "ell", self.ell);
        d.set("grid", "nx", self.nx);
        d.set("grid", "ny", self.ny);
        d.set("grid", "ly", self.ly);
        d.set("contour", "n_max", self.n_max);
        d.set("potential", "family", self.potential.family());
        match &self.potential {
            Potential::Zero => {}
            Potential::CosGauss { amplitude } | Potential::Mixed { amplitude } => {
                d.set("potential", "amplitude", amplitude)
            }
            Potential::File { path } => d.set("potential", "path", path.display()),
        }
        d.set("run", "times", format_times(&self.times));
        if let Some(t) = self.threads {
            d.set("run", "threads", t);
        }
        d.set("run", "force", self.force);
        d.set("run", "oracle", self.oracle);
        d.set("jost", "tol", self.jost.tol);
        d.set("jost", "max_iter", self.jost.max_iter);
        d.set("jost", "method", self.method.name());
        d.set("jost", "offset_delta", self.jost.offset_delta);
        d.set("jost", "cross_tol", self.jost.cross_tol);
        d.set("jost", "zero_mode", self.jost.zero_mode.name());
        d.set("inverse", "tol", self.inverse.tol);
        d.set("inverse", "max_iter", self.inverse.max_iter);
        d.set("inverse", "orientation", self.inverse.orientation);
        d.set("inverse", "side", self.inverse.side.name());
        d.set("inverse", "active_threshold", self.inverse.active_threshold);
        d.set("pde", "dt", self.pde_dt);
        d.set("pde", "dealias", self.dealias);
        if let Some(o) = &self.out {
            d.set("output", "dir", o.display());
        }
        d
    }

    pub fn to_text(&self) -> String {
        self.to_document().to_text()
    }
}
