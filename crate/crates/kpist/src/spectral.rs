//! Forward transform: spectral data `F` sampled on the contours
//! `L_n = {Re z = -(omega/2) n}`, the jump relation, decay diagnostics and the
//! linear time evolution of `F`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::cylinder::{
    analyze, fourier_coefficient_at, lemma_constant, pairwise_sum, CylinderGrid, Field,
};
use crate::error::{Error, Result};
use crate::heatjost::{jost_boundary, BoundaryMethod, JostOptions, Side};

/// `r0(z) = (-2 Re z / omega, 4 Re z Im z)`, the nontrivial root of `P_z`.
pub fn r0(z: Complex64, omega: f64) -> (f64, f64) {
    (-2.0 * z.re / omega, 4.0 * z.re * z.im)
}

/// `zeta(n, xi) = -(omega/2) n - i xi / (2 omega n)`.
pub fn zeta(n: i64, xi: f64, omega: f64) -> Result<Complex64> {
    if n == 0 {
        return Err(Error::Domain("zeta is undefined for n = 0".into()));
    }
    let nf = n as f64;
    Ok(Complex64::new(-0.5 * omega * nf, -xi / (2.0 * omega * nf)))
}

fn sgn(n: i64) -> f64 {
    if n > 0 {
        1.0
    } else {
        -1.0
    }
}

/// Contours `n = -n_max..=-1, 1..=n_max`, each sampled at the xi grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContourGrid {
    grid: CylinderGrid,
    n_max: usize,
}

impl ContourGrid {
    pub fn new(grid: CylinderGrid, n_max: usize) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::Grid("n_max must be at least 1".into()));
        }
        if n_max >= grid.nx() / 2 {
            return Err(Error::Grid(format!(
                "n_max = {n_max} exceeds the x-mode range of Nx = {}",
                grid.nx()
            )));
        }
        Ok(Self { grid, n_max })
    }

    pub fn grid(&self) -> &CylinderGrid {
        &self.grid
    }
    pub fn n_max(&self) -> usize {
        self.n_max
    }
    pub fn ny(&self) -> usize {
        self.grid.ny()
    }

    pub fn contours(&self) -> Vec<i64> {
        let m = self.n_max as i64;
        (-m..=-1).chain(1..=m).collect()
    }

    pub fn contour_index(&self, n: i64) -> Option<usize> {
        let m = self.n_max as i64;
        match n {
            _ if n < -m || n > m || n == 0 => None,
            _ if n < 0 => Some((n + m) as usize),
            _ => Some((n + m - 1) as usize),
        }
    }

    pub fn len(&self) -> usize {
        2 * self.n_max * self.grid.ny()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat sample index for contour `n` and xi row `row`.
    pub fn index(&self, n: i64, row: usize) -> Option<usize> {
        Some(self.contour_index(n)? * self.grid.ny() + row)
    }

    /// `(n, row)` of flat sample index `i`.
    pub fn sample(&self, i: usize) -> (i64, usize) {
        (self.contours()[i / self.grid.ny()], i % self.grid.ny())
    }

    /// Index of the sample `(-n, -xi)`, the image under `z -> -conj(z)`.
    /// The most negative xi row has no mirror on the grid.
    pub fn mirror(&self, i: usize) -> Option<usize> {
        let (n, row) = self.sample(i);
        let q = self.grid.xi_index(row);
        let r = self.grid.xi_row(-q)?;
        self.index(-n, r)
    }

    pub fn tau_im(&self, n: i64, row: usize) -> f64 {
        -self.grid.xi(row) / (2.0 * self.grid.omega() * n as f64)
    }

    pub fn point(&self, n: i64, row: usize) -> Complex64 {
        zeta(n, self.grid.xi(row), self.grid.omega()).expect("contours exclude n = 0")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Forward,
    Evolved,
    Loaded,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::Forward => "forward",
            Provenance::Evolved => "evolved",
            Provenance::Loaded => "loaded",
        }
    }
}

/// `G[n, xi_k] = F(zeta(n, xi_k))` at time `time`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralData {
    pub contour: ContourGrid,
    pub g: Vec<Complex64>,
    pub time: f64,
    pub provenance: Provenance,
}

impl SpectralData {
    pub fn zeros(contour: ContourGrid) -> Self {
        Self {
            contour,
            g: vec![Complex64::new(0.0, 0.0); contour.len()],
            time: 0.0,
            provenance: Provenance::Forward,
        }
    }

    pub fn get(&self, n: i64, row: usize) -> Complex64 {
        self.g[self.contour.index(n, row).expect("sample on grid")]
    }

    pub fn max_abs(&self) -> f64 {
        self.g.iter().fold(0.0, |a, v| a.max(v.norm()))
    }
}

/// Forward transform: `G[n, xi] = sgn(n) [u mu^+]^(n, xi)` at `z = zeta(n, xi)`.
pub fn forward_transform(
    u: &Field,
    cg: &ContourGrid,
    method: BoundaryMethod,
    opts: &JostOptions,
) -> Result<SpectralData> {
    cg.grid.check_same(u.grid())?;
    let g: Vec<Result<Complex64>> = (0..cg.len())
        .into_par_iter()
        .map(|i| {
            let (n, row) = cg.sample(i);
            forward_sample(u, n, cg.grid.xi(row), method, opts)
        })
        .collect();
    let mut out = Vec::with_capacity(g.len());
    let mut failed = 0;
    let mut first_err = None;
    for r in g {
        match r {
            Ok(v) => out.push(v),
            Err(e) => {
                failed += 1;
                first_err.get_or_insert(e);
                out.push(Complex64::new(f64::NAN, f64::NAN));
            }
        }
    }
    if let Some(e) = first_err {
        return Err(Error::Divergence {
            stage: "forward_transform",
            detail: format!("{failed} of {} samples failed; first: {e}", out.len()),
        });
    }
    Ok(SpectralData {
        contour: *cg,
        g: out,
        time: 0.0,
        provenance: Provenance::Forward,
    })
}

/// `F(zeta(n, xi))` for any real `xi`, by a boundary solve and direct quadrature.
pub fn forward_sample(
    u: &Field,
    n: i64,
    xi: f64,
    method: BoundaryMethod,
    opts: &JostOptions,
) -> Result<Complex64> {
    let omega = u.grid().omega();
    let tau = -xi / (2.0 * omega * n as f64);
    let plus = jost_boundary(u, n, Side::Plus, tau, method, opts)?;
    Ok(sgn(n) * fourier_coefficient_at(&u.mul(&plus.mu)?, n, xi))
}

/// First-order data `sgn(n) u^(n, xi)`, exact in the limit of small `u`.
pub fn born_data(u: &Field, cg: &ContourGrid) -> Result<SpectralData> {
    cg.grid.check_same(u.grid())?;
    let c = analyze(u);
    let mut data = SpectralData::zeros(*cg);
    for i in 0..cg.len() {
        let (n, row) = cg.sample(i);
        data.g[i] = sgn(n) * c.get(n, cg.grid.xi_index(row));
    }
    Ok(data)
}

#[derive(Clone, Debug, PartialEq)]
pub struct JumpSample {
    pub n: i64,
    pub xi: f64,
    pub f: Complex64,
    pub jump_norm: f64,
    pub residual: f64,
}

/// Checks `mu^+ - mu^- = F e^{i omega n x + i xi y} mu^-(-conj z)` at each
/// `(n, xi)`; `F` is evaluated directly so off-grid xi are allowed.
pub fn jump_residual(
    u: &Field,
    samples: &[(i64, f64)],
    method: BoundaryMethod,
    opts: &JostOptions,
) -> Result<Vec<JumpSample>> {
    let g = *u.grid();
    let omega = g.omega();
    samples
        .iter()
        .map(|&(n, xi)| {
            let tau = -xi / (2.0 * omega * n as f64);
            let plus = jost_boundary(u, n, Side::Plus, tau, method, opts)?;
            let minus = jost_boundary(u, n, Side::Minus, tau, method, opts)?;
            // -conj(zeta(n, xi)) = zeta(-n, -xi) sits on contour -n at the same Im z.
            let shifted = jost_boundary(u, -n, Side::Minus, tau, method, opts)?;
            let f = sgn(n) * fourier_coefficient_at(&u.mul(&plus.mu)?, n, xi);
            let mut jump_norm: f64 = 0.0;
            let mut defect: f64 = 0.0;
            for k in 0..g.ny() {
                for j in 0..g.nx() {
                    let phase = Complex64::from_polar(1.0, omega * n as f64 * g.x(j) + xi * g.y(k));
                    let jump = plus.mu.at(j, k) - minus.mu.at(j, k);
                    jump_norm = jump_norm.max(jump.norm());
                    defect = defect.max((jump - f * phase * shifted.mu.at(j, k)).norm());
                }
            }
            let residual = if defect == 0.0 {
                0.0
            } else {
                defect / (jump_norm + 1e-300)
            };
            Ok(JumpSample {
                n,
                xi,
                f,
                jump_norm,
                residual,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayReport {
    /// `n^2 sup_xi |G[n, .]|`, indexed by `n = 1..=n_max` (both signs merged).
    pub sup_bound: Vec<f64>,
    /// `n^4 sum_k dxi |G[n, xi_k]|^2`, both signs merged.
    pub l2_bound: Vec<f64>,
    pub lambda_norm: f64,
    pub gamma_c: f64,
    pub forward_margin: f64,
    pub wzeta2: f64,
    /// Contribution of contours beyond `n_max` implied by the `n^-2` sup bound.
    pub tail_estimate: f64,
}

pub fn decay_report(f: &SpectralData) -> DecayReport {
    let cg = f.contour;
    let g = cg.grid;
    let omega = g.omega();
    let ny = g.ny();
    let mut sup_bound = vec![0.0; cg.n_max];
    let mut l2_bound = vec![0.0; cg.n_max];
    let mut weighted = Vec::with_capacity(f.g.len());
    let mut linf: f64 = 0.0;
    let mut wzeta2: f64 = 0.0;
    for (ci, &n) in cg.contours().iter().enumerate() {
        let vals = &f.g[ci * ny..(ci + 1) * ny];
        let a = n.unsigned_abs() as usize;
        let nf = n as f64;
        let sup = vals.iter().fold(0.0, |s: f64, v| s.max(v.norm()));
        sup_bound[a - 1] = f64::max(sup_bound[a - 1], nf * nf * sup);
        let sq: Vec<f64> = vals.iter().map(|v| v.norm_sqr()).collect();
        l2_bound[a - 1] += nf.powi(4) * g.dxi() * pairwise_sum(&sq);
        // |F|^2 |Re z| dIm z with dIm z = dxi / (2 omega |n|)
        let re = 0.5 * omega * nf.abs();
        let dim = g.dxi() / (2.0 * omega * nf.abs());
        weighted.extend(sq.iter().map(|s| s * re * dim));
        linf = linf.max(sup);
        for (row, v) in vals.iter().enumerate() {
            let xi = g.xi(row);
            let q2 = 1.0 + nf * nf + xi * xi;
            wzeta2 = wzeta2.max(v.norm() * q2.max(1.0));
        }
    }
    let l2_re = pairwise_sum(&weighted).sqrt();
    let c = lemma_constant(omega);
    let lambda_norm = c * (2.0 * l2_re).max(linf);
    let cmax = sup_bound.iter().cloned().fold(0.0, f64::max);
    let n_max = cg.n_max as f64;
    DecayReport {
        sup_bound,
        l2_bound,
        lambda_norm,
        gamma_c: cmax * PI * PI / 3.0,
        forward_margin: lambda_norm / (2.0 * PI),
        wzeta2,
        // sum_{|n| > n_max} c / n^2 ~ 2 c / n_max
        tail_estimate: 2.0 * cmax / n_max,
    }
}

/// Linear evolution `G -> G exp(-8 i (sigma^3 - 3 sigma tau^2) t)`, `zeta = sigma + i tau`.
pub fn evolve(f: &SpectralData, t: f64) -> Result<SpectralData> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Domain(format!(
            "evolution time must be finite and nonnegative, got {t}"
        )));
    }
    let cg = f.contour;
    let g =
        f.g.iter()
            .enumerate()
            .map(|(i, v)| {
                let (n, row) = cg.sample(i);
                v * evolution_factor(cg.point(n, row), t)
            })
            .collect();
    Ok(SpectralData {
        contour: cg,
        g,
        time: f.time + t,
        provenance: Provenance::Evolved,
    })
}

pub fn evolution_factor(z: Complex64, t: f64) -> Complex64 {
    let (s, tau) = (z.re, z.im);
    // z^3 + conj(z)^3 = 2 (sigma^3 - 3 sigma tau^2), kept real to avoid cancellation
    let w = 2.0 * (s * s * s - 3.0 * s * tau * tau);
    Complex64::from_polar(1.0, -4.0 * w * t)
}
