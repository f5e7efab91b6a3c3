//! Grids on the cylinder `[-ell, ell) x [-Ly, Ly)`, the Fourier transform onto
//! `Z x R`, norms, convolution and the Basic Lemma bound.
//!
//! Storage is row-major with `k` (y index) outer and `j` (x index) inner, for
//! both fields and coefficient arrays. Coefficients are stored in centered
//! order: column `m + Nx/2`, row `q + Ny/2` where `xi = q * dxi`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CylinderGrid {
    ell: f64,
    nx: usize,
    ny: usize,
    ly: f64,
}

impl CylinderGrid {
    pub fn new(ell: f64, nx: usize, ny: usize, ly: f64) -> Result<Self> {
        if !(ell.is_finite() && ell > 0.0) {
            return Err(Error::Grid(format!("ell must be positive, got {ell}")));
        }
        if !(ly.is_finite() && ly > 0.0) {
            return Err(Error::Grid(format!("Ly must be positive, got {ly}")));
        }
        for (name, n) in [("Nx", nx), ("Ny", ny)] {
            if n < 4 || n % 2 != 0 {
                return Err(Error::Grid(format!(
                    "{name} must be even and >= 4, got {n}"
                )));
            }
        }
        Ok(Self { ell, nx, ny, ly })
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }
    pub fn omega(&self) -> f64 {
        PI / self.ell
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn dx(&self) -> f64 {
        2.0 * self.ell / self.nx as f64
    }
    pub fn dy(&self) -> f64 {
        2.0 * self.ly / self.ny as f64
    }
    /// Spacing of the dual grid in xi.
    pub fn dxi(&self) -> f64 {
        PI / self.ly
    }
    pub fn x(&self, j: usize) -> f64 {
        -self.ell + j as f64 * self.dx()
    }
    pub fn y(&self, k: usize) -> f64 {
        -self.ly + k as f64 * self.dy()
    }
    /// x-mode number of centered column `col`.
    pub fn mode(&self, col: usize) -> i64 {
        col as i64 - (self.nx / 2) as i64
    }
    /// Signed xi index of centered row `row`.
    pub fn xi_index(&self, row: usize) -> i64 {
        row as i64 - (self.ny / 2) as i64
    }
    pub fn xi(&self, row: usize) -> f64 {
        self.xi_index(row) as f64 * self.dxi()
    }
    pub fn mode_col(&self, m: i64) -> Option<usize> {
        let c = m + (self.nx / 2) as i64;
        (0..self.nx as i64).contains(&c).then_some(c as usize)
    }
    pub fn xi_row(&self, q: i64) -> Option<usize> {
        let r = q + (self.ny / 2) as i64;
        (0..self.ny as i64).contains(&r).then_some(r as usize)
    }
    pub fn modes(&self) -> impl Iterator<Item = i64> {
        let h = (self.nx / 2) as i64;
        -h..h
    }
    /// Signed xi indices `-Ny/2 .. Ny/2`.
    pub fn modes_y(&self) -> impl Iterator<Item = i64> {
        let h = (self.ny / 2) as i64;
        -h..h
    }

    pub(crate) fn check_same(&self, other: &CylinderGrid) -> Result<()> {
        if self != other {
            return Err(Error::Grid(format!("grid mismatch: {self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// Sampled complex function on the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: CylinderGrid,
    values: Vec<Complex64>,
}

impl Field {
    pub fn new(grid: CylinderGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Grid(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values
            .iter()
            .any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(Error::Domain("field contains non-finite values".into()));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_vec_unchecked(grid: CylinderGrid, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: CylinderGrid) -> Self {
        Self {
            grid,
            values: vec![ZERO; grid.len()],
        }
    }

    pub fn constant(grid: CylinderGrid, c: Complex64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn from_fn(grid: CylinderGrid, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for k in 0..grid.ny {
            let y = grid.y(k);
            for j in 0..grid.nx {
                values.push(f(grid.x(j), y));
            }
        }
        Self { grid, values }
    }

    pub fn from_real_fn(grid: CylinderGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        Self::from_fn(grid, |x, y| Complex64::new(f(x, y), 0.0))
    }

    pub fn grid(&self) -> &CylinderGrid {
        &self.grid
    }
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }
    pub fn at(&self, j: usize, k: usize) -> Complex64 {
        self.values[k * self.grid.nx + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.norm()))
    }

    /// True when imaginary parts are below `1e-12 * max|values|`.
    pub fn is_real(&self) -> bool {
        let bound = 1e-12 * self.max_abs();
        self.values.iter().all(|v| v.im.abs() <= bound)
    }

    /// Largest magnitude on the two outermost y rows (k = 0 and the last row).
    pub fn boundary_residual(&self) -> f64 {
        let nx = self.grid.nx;
        let first = &self.values[..nx];
        let last = &self.values[self.values.len() - nx..];
        first.iter().chain(last).fold(0.0, |a, v| a.max(v.norm()))
    }

    /// Largest |row mean| over y rows, i.e. the size of the m = 0 content.
    pub fn mass_defect(&self) -> f64 {
        self.values
            .chunks(self.grid.nx)
            .map(|row| mean(row).norm())
            .fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(
        &self,
        other: &Field,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Field> {
        self.grid.check_same(&other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Field {
            grid: self.grid,
            values,
        })
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, c: Complex64) -> Field {
        self.map(|v| v * c)
    }

    pub fn real_part(&self) -> Field {
        self.map(|v| Complex64::new(v.re, 0.0))
    }

    pub fn norms(&self) -> NormReport {
        field_norms(self)
    }
}

/// Fourier coefficients on `Z x (dxi Z)`, truncated to the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralCoeffs {
    grid: CylinderGrid,
    values: Vec<Complex64>,
}

impl SpectralCoeffs {
    pub fn new(grid: CylinderGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Grid(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: CylinderGrid) -> Self {
        Self {
            grid,
            values: vec![ZERO; grid.len()],
        }
    }

    pub fn grid(&self) -> &CylinderGrid {
        &self.grid
    }
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    /// Coefficient at mode `m` and xi index `q` (xi = q * dxi); zero off-grid.
    pub fn get(&self, m: i64, q: i64) -> Complex64 {
        match (self.grid.mode_col(m), self.grid.xi_row(q)) {
            (Some(c), Some(r)) => self.values[r * self.grid.nx + c],
            _ => ZERO,
        }
    }

    pub fn set(&mut self, m: i64, q: i64, v: Complex64) {
        let c = self.grid.mode_col(m).expect("mode outside grid");
        let r = self.grid.xi_row(q).expect("xi index outside grid");
        self.values[r * self.grid.nx + c] = v;
    }

    pub fn norms(&self) -> NormReport {
        coeff_norms(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormReport {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    pub trinorm: f64,
    pub plancherel_residual: f64,
}

/// Sum with a fixed pairwise order so results do not depend on threading.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

pub fn pairwise_sum_c(xs: &[Complex64]) -> Complex64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum_c(a) + pairwise_sum_c(b)
}

fn mean(xs: &[Complex64]) -> Complex64 {
    pairwise_sum_c(xs) / xs.len() as f64
}

/// FFT plans for one grid. Cheap to clone; plans are shared.
#[derive(Clone)]
pub struct Transformer {
    grid: CylinderGrid,
    x_fwd: Arc<dyn Fft<f64>>,
    x_inv: Arc<dyn Fft<f64>>,
    y_fwd: Arc<dyn Fft<f64>>,
    y_inv: Arc<dyn Fft<f64>>,
}

impl Transformer {
    pub fn new(grid: CylinderGrid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            x_fwd: planner.plan_fft_forward(grid.nx),
            x_inv: planner.plan_fft_inverse(grid.nx),
            y_fwd: planner.plan_fft_forward(grid.ny),
            y_inv: planner.plan_fft_inverse(grid.ny),
        }
    }

    pub fn grid(&self) -> &CylinderGrid {
        &self.grid
    }

    /// Unnormalized forward DFT along x of every row, in place.
    pub fn fft_rows(&self, data: &mut [Complex64]) {
        self.x_fwd.process(data);
    }

    pub fn ifft_rows(&self, data: &mut [Complex64]) {
        self.x_inv.process(data);
    }

    /// Unnormalized DFT of a single y column held contiguously.
    pub fn fft_y(&self, col: &mut [Complex64]) {
        self.y_fwd.process(col);
    }

    pub fn ifft_y(&self, col: &mut [Complex64]) {
        self.y_inv.process(col);
    }

    /// Unnormalized 2D DFT in storage order, in place.
    pub fn fft2(&self, data: &mut [Complex64]) {
        self.fft_rows(data);
        self.fft_cols(data, false);
    }

    pub fn ifft2(&self, data: &mut [Complex64]) {
        self.fft_cols(data, true);
        self.ifft_rows(data);
    }

    fn fft_cols(&self, data: &mut [Complex64], inverse: bool) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let mut t = transpose(data, ny, nx);
        if inverse {
            self.y_inv.process(&mut t);
        } else {
            self.y_fwd.process(&mut t);
        }
        let back = transpose(&t, nx, ny);
        data.copy_from_slice(&back);
    }

    pub fn analyze(&self, field: &Field) -> Result<SpectralCoeffs> {
        self.grid.check_same(&field.grid)?;
        let g = self.grid;
        let mut data = field.values.clone();
        self.fft_rows(&mut data);
        self.fft_cols(&mut data, false);
        // x_j = -ell + j dx contributes (-1)^m, y_k = -Ly + k dy contributes (-1)^q.
        let w = g.dx() * g.dy() / (2.0 * g.ell);
        let mut out = vec![ZERO; g.len()];
        for row in 0..g.ny {
            let q = g.xi_index(row);
            let src_r = q.rem_euclid(g.ny as i64) as usize;
            for col in 0..g.nx {
                let m = g.mode(col);
                let src_c = m.rem_euclid(g.nx as i64) as usize;
                let sign = if (m + q) % 2 == 0 { w } else { -w };
                out[row * g.nx + col] = data[src_r * g.nx + src_c] * sign;
            }
        }
        Ok(SpectralCoeffs {
            grid: g,
            values: out,
        })
    }

    pub fn synthesize(&self, coeffs: &SpectralCoeffs) -> Result<Field> {
        self.grid.check_same(&coeffs.grid)?;
        let g = self.grid;
        let w = g.dxi() / (2.0 * PI);
        let mut data = vec![ZERO; g.len()];
        for row in 0..g.ny {
            let q = g.xi_index(row);
            let dst_r = q.rem_euclid(g.ny as i64) as usize;
            for col in 0..g.nx {
                let m = g.mode(col);
                let dst_c = m.rem_euclid(g.nx as i64) as usize;
                let sign = if (m + q) % 2 == 0 { w } else { -w };
                data[dst_r * g.nx + dst_c] = coeffs.values[row * g.nx + col] * sign;
            }
        }
        self.fft_cols(&mut data, true);
        self.ifft_rows(&mut data);
        Ok(Field {
            grid: g,
            values: data,
        })
    }

    /// Spectral x-derivative. The Nyquist mode is dropped so real input stays real.
    pub fn dx(&self, field: &Field) -> Result<Field> {
        self.grid.check_same(&field.grid)?;
        let g = self.grid;
        let mut data = field.values.clone();
        self.fft_rows(&mut data);
        let omega = g.omega();
        let inv_n = 1.0 / g.nx as f64;
        for row in data.chunks_mut(g.nx) {
            for (c, v) in row.iter_mut().enumerate() {
                let m = if c < g.nx / 2 {
                    c as i64
                } else {
                    c as i64 - g.nx as i64
                };
                *v = if m == -((g.nx / 2) as i64) {
                    ZERO
                } else {
                    *v * Complex64::new(0.0, omega * m as f64 * inv_n)
                };
            }
        }
        self.ifft_rows(&mut data);
        Ok(Field {
            grid: g,
            values: data,
        })
    }
}

pub(crate) fn transpose(data: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut out = vec![ZERO; data.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = data[r * cols + c];
        }
    }
    out
}

pub fn make_grid(ell: f64, nx: usize, ny: usize, ly: f64) -> Result<CylinderGrid> {
    CylinderGrid::new(ell, nx, ny, ly)
}

pub fn analyze(field: &Field) -> SpectralCoeffs {
    Transformer::new(field.grid)
        .analyze(field)
        .expect("same grid")
}

pub fn synthesize(coeffs: &SpectralCoeffs) -> Field {
    Transformer::new(coeffs.grid)
        .synthesize(coeffs)
        .expect("same grid")
}

/// Coefficient `u^(m, xi)` at an arbitrary real `xi`, by direct quadrature.
pub fn fourier_coefficient_at(field: &Field, m: i64, xi: f64) -> Complex64 {
    let g = field.grid;
    let omega = g.omega();
    let ex: Vec<Complex64> = (0..g.nx)
        .map(|j| Complex64::from_polar(1.0, -omega * m as f64 * g.x(j)))
        .collect();
    let rows: Vec<Complex64> = field
        .values
        .chunks(g.nx)
        .enumerate()
        .map(|(k, row)| {
            let terms: Vec<Complex64> = row.iter().zip(&ex).map(|(a, b)| a * b).collect();
            pairwise_sum_c(&terms) * Complex64::from_polar(1.0, -xi * g.y(k))
        })
        .collect();
    pairwise_sum_c(&rows) * (g.dx() * g.dy() / (2.0 * g.ell))
}

/// Removes the m = 0 content of every y row.
pub fn zero_mass_project(field: &Field) -> Field {
    let nx = field.grid.nx;
    let mut values = field.values.clone();
    for row in values.chunks_mut(nx) {
        let mu = mean(row);
        row.iter_mut().for_each(|v| *v -= mu);
    }
    Field {
        grid: field.grid,
        values,
    }
}

/// Convolution on `Z x R`, normalized so `analyze(u h) = convolve(u^, h^) / 2pi`.
pub fn convolve(a: &SpectralCoeffs, b: &SpectralCoeffs) -> Result<SpectralCoeffs> {
    a.grid.check_same(&b.grid)?;
    let t = Transformer::new(a.grid);
    let prod = t.synthesize(a)?.mul(&t.synthesize(b)?)?;
    let mut out = t.analyze(&prod)?;
    out.values.iter_mut().for_each(|v| *v *= 2.0 * PI);
    Ok(out)
}

fn field_norms(field: &Field) -> NormReport {
    let g = field.grid;
    let area = g.dx() * g.dy();
    let abs: Vec<f64> = field.values.iter().map(|v| v.norm()).collect();
    let sq: Vec<f64> = field.values.iter().map(|v| v.norm_sqr()).collect();
    let l1 = area * pairwise_sum(&abs);
    let l2 = (area * pairwise_sum(&sq)).sqrt();
    let linf = abs.iter().fold(0.0, |a: f64, &b| a.max(b));
    let omega = g.omega();
    let coeff_l2 = coeff_l2(&analyze(field));
    NormReport {
        l1,
        l2,
        linf,
        trinorm: (omega * l1).max(omega.sqrt() * l2),
        plancherel_residual: plancherel(coeff_l2, omega.sqrt() * l2),
    }
}

fn coeff_l2(c: &SpectralCoeffs) -> f64 {
    let sq: Vec<f64> = c.values.iter().map(|v| v.norm_sqr()).collect();
    (c.grid.dxi() * pairwise_sum(&sq)).sqrt()
}

fn plancherel(coeff_l2: f64, scaled_field_l2: f64) -> f64 {
    if coeff_l2 == 0.0 {
        return if scaled_field_l2 == 0.0 { 0.0 } else { 1.0 };
    }
    (coeff_l2 - scaled_field_l2).abs() / coeff_l2
}

fn coeff_norms(c: &SpectralCoeffs) -> NormReport {
    let g = c.grid;
    let abs: Vec<f64> = c.values.iter().map(|v| v.norm()).collect();
    let l1 = g.dxi() * pairwise_sum(&abs);
    let l2 = coeff_l2(c);
    let linf = abs.iter().fold(0.0, |a: f64, &b| a.max(b));
    let omega = g.omega();
    let field_l2 = synthesize(c).norms_l2();
    NormReport {
        l1,
        l2,
        linf,
        trinorm: (omega * l1).max(omega.sqrt() * l2),
        plancherel_residual: plancherel(l2, omega.sqrt() * field_l2),
    }
}

impl Field {
    fn norms_l2(&self) -> f64 {
        let sq: Vec<f64> = self.values.iter().map(|v| v.norm_sqr()).collect();
        (self.grid.dx() * self.grid.dy() * pairwise_sum(&sq)).sqrt()
    }
}

/// `P_z(m, xi) = (omega m)^2 + 2 omega m z + i xi`.
pub fn pz(m: i64, xi: f64, z: Complex64, omega: f64) -> Complex64 {
    let wm = omega * m as f64;
    Complex64::new(wm * wm, xi) + 2.0 * wm * z
}

/// The Basic Lemma constant `C(omega)`.
pub fn lemma_constant(omega: f64) -> f64 {
    4.0 * PI * PI / (3.0 * omega * omega) + (PI / omega) * (PI / 3.0).sqrt()
}

/// Distance from `Re z` to the nearest forbidden line `Re z = (omega/2) k`, `k != 0`.
pub fn forbidden_margin(z: Complex64, omega: f64) -> f64 {
    let s = 2.0 * z.re / omega;
    let mut k = s.round();
    if k == 0.0 {
        k = if s >= 0.0 { 1.0 } else { -1.0 };
    }
    (s - k).abs() * omega / 2.0
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasicLemmaReport {
    pub lhs: f64,
    pub rhs: f64,
    pub c: f64,
    /// Relative slack allowed for the truncated tails of the lemma's series.
    pub tail_slack: f64,
    /// Remainder `sum_{|m| > Nx/2} 1/m^2` of the series the proof bounds by.
    pub series_remainder: f64,
    pub satisfied: bool,
}

pub const DEFAULT_TAIL_SLACK: f64 = 0.05;

pub fn basic_lemma_report(f: &SpectralCoeffs, z: Complex64) -> Result<BasicLemmaReport> {
    let g = f.grid;
    let omega = g.omega();
    if forbidden_margin(z, omega) < 1e-12 * omega {
        return Err(Error::Domain(format!("z = {z} lies on a forbidden line")));
    }
    let fmax = f.values.iter().fold(0.0, |a: f64, v| a.max(v.norm()));
    let col0 = g.mode_col(0).expect("m = 0 is always on the grid");
    let row0 = (0..g.ny)
        .map(|r| f.values[r * g.nx + col0].norm())
        .fold(0.0, f64::max);
    if row0 > 1e-14 * fmax {
        return Err(Error::Domain(format!(
            "m = 0 row is nonzero (max {row0:.3e})"
        )));
    }
    let mut terms = Vec::with_capacity(g.len());
    for r in 0..g.ny {
        let xi = g.xi(r);
        for c in 0..g.nx {
            let m = g.mode(c);
            if m != 0 {
                terms.push(f.values[r * g.nx + c].norm() / pz(m, xi, z, omega).norm());
            }
        }
    }
    let lhs = g.dxi() * pairwise_sum(&terms);
    let c = lemma_constant(omega);
    let rhs = c * coeff_l2(f).max(fmax);
    let half = (g.nx / 2) as f64;
    // sum_{m > M} 1/m^2 ~ 1/M, counted for both signs of m
    let series_remainder = 2.0 / half;
    Ok(BasicLemmaReport {
        lhs,
        rhs,
        c,
        tail_slack: DEFAULT_TAIL_SLACK,
        series_remainder,
        satisfied: lhs <= rhs * (1.0 + DEFAULT_TAIL_SLACK),
    })
}
