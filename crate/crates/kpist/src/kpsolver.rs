//! The full transform pipeline and an independent split-step solver for
//! `u_t = -u_xxx - 6 u u_x - 3 d_x^{-1} u_yy` on the cylinder.

use num_complex::Complex64;

use crate::config::{Document, RunConfig};
use crate::cylinder::{analyze, pairwise_sum, Field, SpectralCoeffs, Transformer};
use crate::error::{Error, Result};
use crate::heatjost::{smallness_report, BoundaryMethod, JostOptions};
use crate::inverse::{reconstruct_u, solve_inverse, InverseConfig};
use crate::spectral::{decay_report, evolve, forward_transform, ContourGrid, SpectralData};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Linear symbol: the mode `e^{i(omega m x + xi y)}` evolves as `e^{i w t}` with
/// `w = (omega m)^3 - 3 xi^2 / (omega m)`.
pub fn dispersion(m: i64, xi: f64, omega: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::Domain(
            "dispersion is undefined on the m = 0 row".into(),
        ));
    }
    let k = omega * m as f64;
    Ok(k * k * k - 3.0 * xi * xi / k)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PdeConfig {
    pub dt: f64,
    pub t_end: f64,
    /// 2/3-rule truncation of the quadratic term.
    pub dealias: bool,
}

impl PdeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::Config(format!(
                "t_end must be nonnegative, got {}",
                self.t_end
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PdeRun {
    pub u: Field,
    pub steps: usize,
    pub dt: f64,
    /// Largest `max_xi |u^(0, xi)| / |u|_2` over every state of the trajectory.
    pub max_zero_row: f64,
}

/// Largest growth of `max|u|` tolerated before the run is declared blown up.
pub const BLOWUP_FACTOR: f64 = 100.0;

struct SplitStep {
    t: Transformer,
    phase: Vec<Complex64>,
    /// `-3 i omega m` on kept modes, zero elsewhere.
    nl: Vec<Complex64>,
    nx: usize,
    ny: usize,
}

fn natural_mode(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

impl SplitStep {
    fn new(u: &Field, dt: f64, dealias: bool) -> Self {
        let g = *u.grid();
        let (nx, ny) = (g.nx(), g.ny());
        let omega = g.omega();
        let mut phase = vec![ZERO; g.len()];
        let mut nl = vec![ZERO; g.len()];
        for r in 0..ny {
            let q = natural_mode(r, ny);
            let xi = q as f64 * g.dxi();
            for c in 0..nx {
                let m = natural_mode(c, nx);
                // the Nyquist column and row have no conjugate partner
                if m == 0 || m == -((nx / 2) as i64) || q == -((ny / 2) as i64) {
                    continue;
                }
                let w = dispersion(m, xi, omega).expect("m != 0");
                phase[r * nx + c] = Complex64::from_polar(1.0, w * dt);
                let kept = !dealias
                    || (3 * m.unsigned_abs() as usize <= nx && 3 * q.unsigned_abs() as usize <= ny);
                if kept {
                    nl[r * nx + c] = Complex64::new(0.0, -3.0 * omega * m as f64);
                }
            }
        }
        Self {
            t: Transformer::new(g),
            phase,
            nl,
            nx,
            ny,
        }
    }

    /// Spectrum of `-3 (u^2)_x` from the unnormalized spectrum `v` of `u`.
    fn nonlinear(&self, v: &[Complex64]) -> Vec<Complex64> {
        let scale = 1.0 / (self.nx * self.ny) as f64;
        let mut w: Vec<Complex64> = v.to_vec();
        self.t.ifft2(&mut w);
        for x in w.iter_mut() {
            let r = x.re * scale;
            *x = Complex64::new(r * r, 0.0);
        }
        self.t.fft2(&mut w);
        w.iter().zip(&self.nl).map(|(a, b)| a * b).collect()
    }

    /// Explicit midpoint over `h` for the nonlinear part.
    fn nonlinear_step(&self, v: &mut [Complex64], h: f64) {
        let k1 = self.nonlinear(v);
        let mid: Vec<Complex64> = v.iter().zip(&k1).map(|(a, b)| a + b * (0.5 * h)).collect();
        let k2 = self.nonlinear(&mid);
        v.iter_mut().zip(&k2).for_each(|(a, b)| *a += b * h);
    }

    fn linear_step(&self, v: &mut [Complex64]) {
        v.iter_mut().zip(&self.phase).for_each(|(a, p)| *a *= p);
    }

    fn field(&self, v: &[Complex64], g: crate::cylinder::CylinderGrid) -> Field {
        let mut w = v.to_vec();
        self.t.ifft2(&mut w);
        let scale = 1.0 / (self.nx * self.ny) as f64;
        Field::new(
            g,
            w.into_iter()
                .map(|x| Complex64::new(x.re * scale, 0.0))
                .collect(),
        )
        .expect("finite")
    }
}

/// `max_xi |c(0, xi)| / |u|_2`, zero for `u = 0`.
pub fn zero_row(c: &SpectralCoeffs, u: &Field) -> f64 {
    let g = *u.grid();
    let col = g.mode_col(0).expect("m = 0 on grid");
    let row = (0..g.ny())
        .map(|r| c.values()[r * g.nx() + col].norm())
        .fold(0.0, f64::max);
    let n = u.norms().l2;
    if n == 0.0 {
        0.0
    } else {
        row / n
    }
}

/// Strang split-step: half nonlinear, exact linear, half nonlinear. The step is
/// shortened so a whole number of steps lands on `t_end`.
pub fn pde_solve(u0: &Field, cfg: &PdeConfig) -> Result<PdeRun> {
    cfg.validate()?;
    if !u0.is_real() {
        return Err(Error::Domain("initial data must be real".into()));
    }
    let g = *u0.grid();
    let u_max0 = u0.max_abs();
    if u0.mass_defect() > 1e-12 * u_max0.max(f64::MIN_POSITIVE) {
        return Err(Error::Domain(
            "initial data must have zero x-mean on every row".into(),
        ));
    }
    let steps = (cfg.t_end / cfg.dt - 1e-9).ceil().max(0.0) as usize;
    if steps == 0 || u_max0 == 0.0 {
        return Ok(PdeRun {
            max_zero_row: zero_row(&analyze(u0), u0),
            u: u0.real_part(),
            steps,
            dt: cfg.dt,
        });
    }
    let dt = cfg.t_end / steps as f64;
    let ss = SplitStep::new(u0, dt, cfg.dealias);
    let mut v: Vec<Complex64> = u0
        .values()
        .iter()
        .map(|x| Complex64::new(x.re, 0.0))
        .collect();
    ss.t.fft2(&mut v);
    // zero the m = 0 column and the Nyquist modes once; the steps preserve it
    v.iter_mut().zip(&ss.phase).for_each(|(a, p)| {
        if *p == ZERO {
            *a = ZERO
        }
    });
    let mut max_zero: f64 = 0.0;
    for step in 0..steps {
        let u = ss.field(&v, g);
        let umax = u.max_abs();
        if !umax.is_finite() || umax > BLOWUP_FACTOR * u_max0 {
            return Err(Error::Divergence {
                stage: "pde_solve",
                detail: format!("max|u| = {umax:.3e} at step {step}"),
            });
        }
        if dt * umax >= 0.5 {
            return Err(Error::Domain(format!(
                "dt * max|u| = {:.3e} >= 0.5 at step {step}",
                dt * umax
            )));
        }
        max_zero = max_zero.max(zero_row(&ss.t.analyze(&u)?, &u));
        ss.nonlinear_step(&mut v, 0.5 * dt);
        ss.linear_step(&mut v);
        ss.nonlinear_step(&mut v, 0.5 * dt);
    }
    let u = ss.field(&v, g);
    max_zero = max_zero.max(zero_row(&ss.t.analyze(&u)?, &u));
    Ok(PdeRun {
        u,
        steps,
        dt,
        max_zero_row: max_zero,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct IstOptions {
    pub n_max: usize,
    pub method: BoundaryMethod,
    pub jost: JostOptions,
    pub inverse: InverseConfig,
    /// Run even when the smallness hypotheses fail.
    pub force: bool,
}

impl Default for IstOptions {
    fn default() -> Self {
        Self {
            n_max: 3,
            method: BoundaryMethod::HalfPlane,
            jost: JostOptions::default(),
            inverse: InverseConfig::default(),
            force: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IstFrame {
    pub t: f64,
    pub data: SpectralData,
    pub u: Field,
    pub imag_ratio: f64,
    pub iterations: usize,
    pub residual: f64,
    pub contraction_ratios: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IstRun {
    pub initial: SpectralData,
    pub frames: Vec<IstFrame>,
}

/// Forward transform once, then evolve, invert and reconstruct at each time.
pub fn ist_solve(u0: &Field, times: &[f64], opts: &IstOptions) -> Result<IstRun> {
    let cg = ContourGrid::new(*u0.grid(), opts.n_max)?;
    if !opts.force {
        let s = smallness_report(u0)?;
        if !s.ok {
            return Err(Error::Domain(format!(
                "smallness ratio {:.4} >= 1; rerun with force",
                s.ratio
            )));
        }
    }
    let initial = forward_transform(u0, &cg, opts.method, &opts.jost)?;
    if !opts.force && decay_report(&initial).forward_margin >= 1.0 {
        return Err(Error::Domain(
            "spectral data outside the contraction region; rerun with force".into(),
        ));
    }
    let mut frames = Vec::with_capacity(times.len());
    for &t in times {
        let data = evolve(&initial, t)?;
        let w = solve_inverse(&data, &opts.inverse)?;
        let r = reconstruct_u(&data, &w, &opts.inverse)?;
        frames.push(IstFrame {
            t,
            u: r.u,
            imag_ratio: r.imag_ratio,
            iterations: w.iterations,
            residual: w.residual,
            contraction_ratios: w.contraction_ratios,
            data,
        });
    }
    Ok(IstRun { initial, frames })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Comparison {
    pub l2_rel: f64,
    pub linf_rel: f64,
    pub spectral_l2_rel: f64,
}

/// Relative discrepancies, each normalized by the larger of the two norms.
pub fn compare(a: &Field, b: &Field) -> Result<Comparison> {
    let d = a.sub(b)?;
    let rel = |num: f64, x: f64, y: f64| {
        let den = x.max(y);
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    };
    let spec_l2 = |f: &Field| {
        let c = analyze(f);
        let sq: Vec<f64> = c.values().iter().map(|v| v.norm_sqr()).collect();
        pairwise_sum(&sq).sqrt()
    };
    let (na, nb, nd) = (a.norms(), b.norms(), d.norms());
    Ok(Comparison {
        l2_rel: rel(nd.l2, na.l2, nb.l2),
        linf_rel: rel(nd.linf, na.linf, nb.linf),
        spectral_l2_rel: rel(spec_l2(&d), spec_l2(a), spec_l2(b)),
    })
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunManifest {
    pub config: RunConfig,
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    /// Set when a stage failed and only some artifacts were written.
    pub partial: bool,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: RunConfig) -> Self {
        Self {
            config,
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: None,
            partial: false,
            outputs: Vec::new(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut d = Document::default();
        d.set("manifest", "command", &self.command);
        d.set("manifest", "version", &self.version);
        d.set("manifest", "orientation", self.config.inverse.orientation);
        if let Some(s) = self.seed {
            d.set("manifest", "seed", s);
        }
        d.set("manifest", "partial", self.partial);
        d.set("manifest", "outputs", self.outputs.join(", "));
        d.sections.extend(self.config.to_document().sections);
        d.to_text()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut d = Document::parse(text)?;
        let idx = d
            .sections
            .iter()
            .position(|(s, _)| s == "manifest")
            .ok_or_else(|| Error::Config("manifest section missing".into()))?;
        let m = Document {
            sections: vec![d.sections.remove(idx)],
        };
        let config = RunConfig::from_document(&d)?;
        let req = |k: &str| {
            m.get("manifest", k)
                .ok_or_else(|| Error::Config(format!("[manifest] {k} missing")))
        };
        let orientation: i8 = req("orientation")?
            .parse()
            .map_err(|_| Error::Config("[manifest] orientation: not an integer".into()))?;
        if orientation != config.inverse.orientation {
            return Err(Error::Config(
                "[manifest] orientation disagrees with [inverse] orientation".into(),
            ));
        }
        let partial = match req("partial")? {
            "true" => true,
            "false" => false,
            v => {
                return Err(Error::Config(format!(
                    "[manifest] partial: expected a boolean, got {v:?}"
                )))
            }
        };
        let outputs = m
            .get("manifest", "outputs")
            .unwrap_or("")
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect();
        Ok(Self {
            config,
            command: req("command")?.to_string(),
            version: req("version")?.to_string(),
            seed: m.parse_opt("manifest", "seed")?,
            partial,
            outputs,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cylinder::make_grid;
    use std::f64::consts::PI;

    #[test]
    fn dispersion_examples() {
        assert_eq!(dispersion(1, 0.0, 1.0).unwrap(), 1.0);
        assert_eq!(dispersion(1, 1.0, 1.0).unwrap(), -2.0);
        assert_eq!(dispersion(-2, 2.0, 1.0).unwrap(), -2.0);
        assert!(dispersion(0, 1.0, 1.0).is_err());
    }

    #[test]
    fn zero_stays_zero() {
        let g = make_grid(PI, 16, 32, 8.0).unwrap();
        let r = pde_solve(
            &Field::zeros(g),
            &PdeConfig {
                dt: 0.01,
                t_end: 0.1,
                dealias: true,
            },
        )
        .unwrap();
        assert!(r.u.values().iter().all(|v| *v == ZERO));
    }

    #[test]
    fn compare_examples() {
        let g = make_grid(PI, 16, 32, 8.0).unwrap();
        let u = Field::from_real_fn(g, |x, y| x.cos() * (-y * y).exp());
        let c = compare(&u, &u).unwrap();
        assert_eq!((c.l2_rel, c.linf_rel, c.spectral_l2_rel), (0.0, 0.0, 0.0));
        let c = compare(&u, &Field::zeros(g)).unwrap();
        assert!((c.l2_rel - 1.0).abs() < 1e-15 && (c.linf_rel - 1.0).abs() < 1e-15);
        assert!((c.spectral_l2_rel - 1.0).abs() < 1e-15);
        let v = u.map(|a| a * (1.0 + 1e-6));
        assert!((compare(&u, &v).unwrap().l2_rel - 1e-6 / (1.0 + 1e-6)).abs() < 1e-12);
    }

    #[test]
    fn manifest_round_trip() {
        let mut m = RunManifest::new("solve", RunConfig::default());
        m.seed = Some(7);
        m.outputs = vec!["u_t0.field".into(), "metrics.csv".into()];
        assert_eq!(RunManifest::parse(&m.to_text()).unwrap(), m);
        assert!(RunManifest::parse("[grid]\nnx: 32").is_err());
    }
}
