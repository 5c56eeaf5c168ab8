//! Discrete torus geometry, spectral transforms and Fourier multipliers.
//!
//! The torus `[0, side)^d` is sampled on `M^d` sites in lexicographic order
//! (last axis fastest). Spectral coefficients are taken against the
//! orthonormal basis `e_k(x) = side^{-d/2} exp(i 2π k·x / side)`, so that
//! `<f, f> = Σ_k |ĉ_k|²` with `<·,·>` the Riemann-sum inner product, and
//! `-Δ` acts on `e_k` with eigenvalue `(2π/side)² |k|²` (just `|k|²` for the
//! default period `2π`).

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Integer frequency vector; unused trailing axes are zero.
pub type Freq = [i64; 3];

pub struct Grid {
    dim: usize,
    points: usize,
    side: f64,
    mass_default: f64,
    n_sites: usize,
    freqs: Vec<Freq>,
    k2: Vec<f64>,
    partner: Vec<usize>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("d", &self.dim)
            .field("M", &self.points)
            .field("side", &self.side)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.points == other.points && self.side == other.side
    }
}

/// Build a grid. `M` must be a power of two, at least 4; `d ∈ {1,2,3}`.
pub fn create_grid(d: usize, m: usize, side: f64) -> Result<Arc<Grid>> {
    Grid::new(d, m, side).map(Arc::new)
}

impl Grid {
    pub fn new(d: usize, m: usize, side: f64) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidGrid(format!(
                "dimension d = {d} outside {{1,2,3}}"
            )));
        }
        if m < 4 || !m.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "M = {m} must be a power of two and at least 4"
            )));
        }
        if !(side.is_finite() && side > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "side = {side} must be positive"
            )));
        }
        let n_sites = m.pow(d as u32);
        let scale = 2.0 * PI / side;
        let mut freqs = Vec::with_capacity(n_sites);
        let mut k2 = Vec::with_capacity(n_sites);
        let mut partner = Vec::with_capacity(n_sites);
        for idx in 0..n_sites {
            let k = Self::unflatten(idx, d, m).map(|n| fft_freq(n, m));
            let mut s = 0.0;
            for kk in k.iter().take(d) {
                s += (*kk as f64 * scale).powi(2);
            }
            freqs.push(k);
            k2.push(s);
            // -k modulo M along each axis
            let neg = Self::unflatten(idx, d, m).map(|n| (m - n) % m);
            partner.push(Self::flatten(&neg, d, m));
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        Ok(Grid {
            dim: d,
            points: m,
            side,
            mass_default: 1.0,
            n_sites,
            freqs,
            k2,
            partner,
            forward,
            inverse,
        })
    }

    pub fn with_default_mass(mut self, m: f64) -> Self {
        self.mass_default = m;
        self
    }

    fn unflatten(mut idx: usize, d: usize, m: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        for axis in (0..d).rev() {
            out[axis] = idx % m;
            idx /= m;
        }
        out
    }

    fn flatten(coords: &[usize; 3], d: usize, m: usize) -> usize {
        coords.iter().take(d).fold(0, |acc, &c| acc * m + c)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn mass_default(&self) -> f64 {
        self.mass_default
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Lattice spacing `side / M`.
    pub fn spacing(&self) -> f64 {
        self.side / self.points as f64
    }

    /// Volume element `(side/M)^d` of one site.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.dim as i32)
    }

    /// Frequencies in storage (FFT) order; each entry in `{-M/2, …, M/2-1}`.
    pub fn freqs(&self) -> &[Freq] {
        &self.freqs
    }

    /// Eigenvalues of `-Δ` in storage order.
    pub fn k2(&self) -> &[f64] {
        &self.k2
    }

    /// Storage index of `-k` (Nyquist components map to themselves).
    pub fn partner(&self) -> &[usize] {
        &self.partner
    }

    pub fn k_max2(&self) -> f64 {
        self.k2.iter().cloned().fold(0.0, f64::max)
    }

    /// Site coordinates of flat index `idx`.
    pub fn site_coords(&self, idx: usize) -> [f64; 3] {
        let c = Self::unflatten(idx, self.dim, self.points);
        let h = self.spacing();
        [c[0] as f64 * h, c[1] as f64 * h, c[2] as f64 * h]
    }

    /// Flat index of the site shifted by an integer lattice vector.
    pub fn shifted_index(&self, idx: usize, shift: [i64; 3]) -> usize {
        let m = self.points as i64;
        let mut c = Self::unflatten(idx, self.dim, self.points);
        for axis in 0..self.dim {
            c[axis] = (c[axis] as i64 + shift[axis]).rem_euclid(m) as usize;
        }
        Self::flatten(&c, self.dim, self.points)
    }

    fn fft_nd(&self, data: &mut [Complex64], inverse: bool) {
        let m = self.points;
        let plan = if inverse {
            &self.inverse
        } else {
            &self.forward
        };
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        // last axis is contiguous
        for row in data.chunks_exact_mut(m) {
            plan.process_with_scratch(row, &mut scratch);
        }
        if self.dim == 1 {
            return;
        }
        let mut line = vec![Complex64::new(0.0, 0.0); m];
        for axis in 0..self.dim - 1 {
            let stride = m.pow((self.dim - 1 - axis) as u32);
            let block = stride * m;
            for base in (0..self.n_sites).step_by(block) {
                for off in 0..stride {
                    let start = base + off;
                    for (t, v) in line.iter_mut().enumerate() {
                        *v = data[start + t * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (t, v) in line.iter().enumerate() {
                        data[start + t * stride] = *v;
                    }
                }
            }
        }
    }

    pub fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n_sites {
            return Err(Error::ShapeMismatch(format!(
                "length {len} does not match grid with {} sites",
                self.n_sites
            )));
        }
        Ok(())
    }
}

fn fft_freq(n: usize, m: usize) -> i64 {
    if n < m / 2 {
        n as i64
    } else {
        n as i64 - m as i64
    }
}

fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> Result<()> {
    if Arc::ptr_eq(a, b) || **a == **b {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(format!(
            "grid mismatch: {a:?} vs {b:?}"
        )))
    }
}

/// A real scalar field sampled on the grid.
#[derive(Clone, Debug)]
pub struct RealField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

/// Orthonormal spectral coefficients of a field, in storage order.
#[derive(Clone, Debug)]
pub struct Spectrum {
    grid: Arc<Grid>,
    coeffs: Vec<Complex64>,
}

impl RealField {
    pub fn new(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        grid.check_len(values.len())?;
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "field entry {pos} = {}",
                values[pos]
            )));
        }
        Ok(RealField {
            grid: grid.clone(),
            values,
        })
    }

    pub(crate) fn from_vec_unchecked(grid: &Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_sites());
        RealField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> Self {
        RealField {
            grid: grid.clone(),
            values: vec![c; grid.n_sites()],
        }
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn([f64; 3]) -> f64) -> Self {
        let values = (0..grid.n_sites())
            .map(|i| f(grid.site_coords(i)))
            .collect();
        RealField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> RealField {
        RealField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &RealField, f: impl Fn(f64, f64) -> f64) -> Result<RealField> {
        same_grid(&self.grid, &other.grid)?;
        Ok(RealField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &RealField) -> Result<RealField> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &RealField) -> Result<RealField> {
        self.zip_map(other, |a, b| a - b)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &RealField) -> Result<RealField> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> RealField {
        self.map(|v| c * v)
    }

    /// `self += c * other`
    pub fn axpy(&mut self, c: f64, other: &RealField) -> Result<()> {
        same_grid(&self.grid, &other.grid)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &RealField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Translate by an integer lattice vector: `g(x) = f(x - shift·h)`.
    pub fn shifted(&self, shift: [i64; 3]) -> RealField {
        let mut out = vec![0.0; self.values.len()];
        for (idx, &v) in self.values.iter().enumerate() {
            out[self.grid.shifted_index(idx, shift)] = v;
        }
        RealField::from_vec_unchecked(&self.grid, out)
    }
}

impl Spectrum {
    pub fn new(grid: &Arc<Grid>, coeffs: Vec<Complex64>) -> Result<Self> {
        grid.check_len(coeffs.len())?;
        Ok(Spectrum {
            grid: grid.clone(),
            coeffs,
        })
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Spectrum {
            grid: grid.clone(),
            coeffs: vec![Complex64::new(0.0, 0.0); grid.n_sites()],
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Largest violation of `c(-k) = conj(c(k))`.
    pub fn hermitian_defect(&self) -> f64 {
        let p = self.grid.partner();
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| (c - self.coeffs[p[i]].conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn scale_by(&mut self, table: &Multiplier) {
        for (c, s) in self.coeffs.iter_mut().zip(&table.values) {
            *c *= *s;
        }
    }
}

pub fn to_spectrum(f: &RealField) -> Spectrum {
    let g = &f.grid;
    let mut data: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    g.fft_nd(&mut data, false);
    let norm = g.side().powf(g.dim() as f64 / 2.0) / g.n_sites() as f64;
    for c in data.iter_mut() {
        *c *= norm;
    }
    Spectrum {
        grid: g.clone(),
        coeffs: data,
    }
}

/// Inverse transform. The imaginary residue (zero for Hermitian input) is dropped.
pub fn from_spectrum(s: &Spectrum) -> RealField {
    let g = &s.grid;
    let mut data = s.coeffs.clone();
    g.fft_nd(&mut data, true);
    let norm = g.side().powf(-(g.dim() as f64) / 2.0);
    RealField {
        grid: g.clone(),
        values: data.iter().map(|c| c.re * norm).collect(),
    }
}

/// A real, even Fourier multiplier table.
#[derive(Clone, Debug)]
pub struct Multiplier {
    values: Vec<f64>,
}

impl Multiplier {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        grid.check_len(values.len())?;
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "multiplier at frequency {:?} = {}",
                grid.freqs()[pos],
                values[pos]
            )));
        }
        Ok(Multiplier { values })
    }

    /// Radial multiplier `σ(|k|²)`.
    pub fn radial(grid: &Grid, sigma: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.k2().iter().map(|&k2| sigma(k2)).collect())
    }

    pub fn from_freq(grid: &Grid, sigma: impl Fn(&Freq, f64) -> f64) -> Result<Self> {
        Self::new(
            grid,
            grid.freqs()
                .iter()
                .zip(grid.k2())
                .map(|(k, &k2)| sigma(k, k2))
                .collect(),
        )
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn compose(&self, other: &Multiplier) -> Multiplier {
        Multiplier {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        }
    }
}

pub fn apply_multiplier(f: &RealField, sigma: &Multiplier) -> Result<RealField> {
    f.grid.check_len(sigma.values.len())?;
    let mut s = to_spectrum(f);
    s.scale_by(sigma);
    Ok(from_spectrum(&s))
}

/// Heat semigroup `P_t = exp(t(Δ - m))`.
pub fn heat_multiplier(grid: &Grid, t: f64, m: f64) -> Result<Multiplier> {
    if !(t >= 0.0) {
        return Err(Error::param(
            "t",
            format!("heat flow time must be >= 0, got {t}"),
        ));
    }
    if !(m >= 0.0) {
        return Err(Error::param("m", format!("mass must be >= 0, got {m}")));
    }
    Multiplier::radial(grid, |k2| (-t * (m + k2)).exp())
}

pub fn heat_flow(f: &RealField, t: f64, m: f64) -> Result<RealField> {
    apply_multiplier(f, &heat_multiplier(&f.grid, t, m)?)
}

/// `(m - Δ)^{-1}`
pub fn green_multiplier(grid: &Grid, m: f64) -> Result<Multiplier> {
    if !(m > 0.0) {
        return Err(Error::param("m", format!("mass must be > 0, got {m}")));
    }
    Multiplier::radial(grid, |k2| 1.0 / (m + k2))
}

pub fn green(f: &RealField, m: f64) -> Result<RealField> {
    apply_multiplier(f, &green_multiplier(&f.grid, m)?)
}

/// `m - Δ` (no sign restriction on `m`).
pub fn mass_operator_multiplier(grid: &Grid, m: f64) -> Result<Multiplier> {
    Multiplier::radial(grid, |k2| m + k2)
}

/// Bessel potential `Λ^s = (1 - Δ)^{s/2}`.
pub fn bessel_multiplier(grid: &Grid, s: f64) -> Multiplier {
    Multiplier {
        values: grid
            .k2()
            .iter()
            .map(|&k2| (1.0 + k2).powf(s / 2.0))
            .collect(),
    }
}

pub fn bessel(f: &RealField, s: f64) -> RealField {
    let mut sp = to_spectrum(f);
    sp.scale_by(&bessel_multiplier(&f.grid, s));
    from_spectrum(&sp)
}

/// `-Δ`
pub fn neg_laplacian(f: &RealField) -> RealField {
    let mut sp = to_spectrum(f);
    for (c, &k2) in sp.coeffs.iter_mut().zip(f.grid.k2()) {
        *c *= k2;
    }
    from_spectrum(&sp)
}

/// Riemann-sum inner product `(side/M)^d Σ_x f(x) g(x)`.
pub fn inner(f: &RealField, g: &RealField) -> Result<f64> {
    same_grid(&f.grid, &g.grid)?;
    let s: f64 = f.values.iter().zip(&g.values).map(|(a, b)| a * b).sum();
    Ok(s * f.grid.cell_volume())
}

/// Riemann-sum `L^p` norm; `p = f64::INFINITY` gives the max norm.
pub fn norm_lp(f: &RealField, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::param(
            "p",
            format!("integrability index must be >= 1, got {p}"),
        ));
    }
    Ok(lp_of_slice(&f.values, p, f.grid.cell_volume()))
}

pub(crate) fn lp_of_slice(values: &[f64], p: f64, cell: f64) -> f64 {
    if p.is_infinite() {
        values.iter().fold(0.0, |m, v| m.max(v.abs()))
    } else if p == 2.0 {
        (values.iter().map(|v| v * v).sum::<f64>() * cell).sqrt()
    } else if p == 1.0 {
        values.iter().map(|v| v.abs()).sum::<f64>() * cell
    } else {
        (values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * cell).powf(1.0 / p)
    }
}

/// `‖∇f‖_{L²}² = <-Δ f, f>` via Parseval.
pub fn grad_norm2(f: &RealField) -> f64 {
    let s = to_spectrum(f);
    s.coeffs
        .iter()
        .zip(f.grid.k2())
        .map(|(c, &k2)| k2 * c.norm_sqr())
        .sum()
}

/// Spectral Sobolev norm squared `Σ_k (1+|k|²)^s |ĉ_k|²`.
pub fn sobolev_norm2(f: &RealField, s: f64) -> f64 {
    spectrum_sobolev_norm2(&to_spectrum(f), s)
}

pub fn spectrum_sobolev_norm2(sp: &Spectrum, s: f64) -> f64 {
    sp.coeffs
        .iter()
        .zip(sp.grid.k2())
        .map(|(c, &k2)| (1.0 + k2).powf(s) * c.norm_sqr())
        .sum()
}

/// Truncate to `|k_i| < M/3` on every axis (2/3 rule).
pub fn dealias(f: &RealField) -> RealField {
    let g = &f.grid;
    let cut = g.points() as i64 / 3;
    let mut sp = to_spectrum(f);
    for (c, k) in sp.coeffs.iter_mut().zip(g.freqs()) {
        if k.iter().take(g.dim()).any(|&ki| ki.abs() > cut) {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    from_spectrum(&sp)
}

/// `φ₁(x) = (1 - e^{-x}) / x`, continuous at 0 and valid for negative `x`.
pub fn phi1(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else if x.abs() < 1e-8 {
        1.0 - x / 2.0
    } else {
        -(-x).exp_m1() / x
    }
}

/// Exponential-Euler filter for `∂_t u = -(m - Δ)u + s` with left-endpoint source:
/// `û ← e^{-λ_k dt} û + φ₁(λ_k dt) dt ŝ`, `λ_k = m + |k|²`.
#[derive(Clone, Debug)]
pub struct ExpFilter {
    decay: Multiplier,
    weight: Multiplier,
    dt: f64,
}

impl ExpFilter {
    /// `m` may be negative (counterterm-shifted masses); only finiteness is required.
    pub fn new(grid: &Grid, m: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::param(
                "dt",
                format!("time step must be > 0, got {dt}"),
            ));
        }
        let decay = Multiplier::radial(grid, |k2| (-(m + k2) * dt).exp())?;
        let weight = Multiplier::radial(grid, |k2| phi1((m + k2) * dt) * dt)?;
        Ok(ExpFilter { decay, weight, dt })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn decay(&self) -> &Multiplier {
        &self.decay
    }

    pub fn weight(&self) -> &Multiplier {
        &self.weight
    }

    pub fn step_spectrum(&self, u: &mut Spectrum, source: &Spectrum) {
        for ((c, s), (a, w)) in u
            .coeffs
            .iter_mut()
            .zip(&source.coeffs)
            .zip(self.decay.values.iter().zip(&self.weight.values))
        {
            *c = *c * *a + *s * *w;
        }
    }

    pub fn step(&self, u: &RealField, source: &RealField) -> Result<RealField> {
        same_grid(&u.grid, &source.grid)?;
        let mut su = to_spectrum(u);
        self.step_spectrum(&mut su, &to_spectrum(source));
        Ok(from_spectrum(&su))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(g: &Arc<Grid>, seed: u64) -> RealField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RealField::new(
            g,
            (0..g.n_sites())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn grid_construction() {
        let g = create_grid(1, 8, 2.0 * PI).unwrap();
        let ks: Vec<i64> = {
            let mut v: Vec<i64> = g.freqs().iter().map(|k| k[0]).collect();
            v.sort();
            v
        };
        assert_eq!(ks, vec![-4, -3, -2, -1, 0, 1, 2, 3]);
        let g3 = create_grid(3, 16, 2.0 * PI).unwrap();
        assert_eq!(g3.n_sites(), 4096);
        assert!(create_grid(2, 7, 1.0).is_err());
        assert!(create_grid(4, 8, 1.0).is_err());
        assert!(create_grid(1, 2, 1.0).is_err());
    }

    #[test]
    fn constant_and_cosine_spectra() {
        let g = create_grid(1, 8, 2.0 * PI).unwrap();
        let s = to_spectrum(&RealField::constant(&g, 3.0));
        for (c, k) in s.coeffs().iter().zip(g.freqs()) {
            if k[0] == 0 {
                assert!((c.re - 3.0 * (2.0 * PI).sqrt()).abs() < 1e-12);
            } else {
                assert!(c.norm() < 1e-12);
            }
        }
        let s = to_spectrum(&RealField::from_fn(&g, |x| x[0].cos()));
        for (c, k) in s.coeffs().iter().zip(g.freqs()) {
            if k[0].abs() == 1 {
                assert!(c.norm() > 0.1);
            } else {
                assert!(c.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        for (d, m) in [(1, 16), (2, 8), (3, 8)] {
            let g = create_grid(d, m, 2.0 * PI).unwrap();
            let f = random_field(&g, 3);
            let s = to_spectrum(&f);
            assert!(s.hermitian_defect() < 1e-12);
            let back = from_spectrum(&s);
            assert!(back.max_abs_diff(&f) < 1e-12);
            let parseval: f64 = s.coeffs().iter().map(|c| c.norm_sqr()).sum();
            let ff = inner(&f, &f).unwrap();
            assert!((parseval - ff).abs() < 1e-12 * ff.max(1.0));
        }
    }

    #[test]
    fn multiplier_examples() {
        let g = create_grid(1, 16, 2.0 * PI).unwrap();
        let cosx = RealField::from_fn(&g, |x| x[0].cos());
        let id = Multiplier::radial(&g, |_| 1.0).unwrap();
        assert!(apply_multiplier(&cosx, &id).unwrap().max_abs_diff(&cosx) < 1e-13);
        let lap = Multiplier::radial(&g, |k2| k2).unwrap();
        assert!(apply_multiplier(&cosx, &lap).unwrap().max_abs_diff(&cosx) < 1e-12);
        let f = random_field(&g, 9);
        let m = 1.7;
        let inv = green_multiplier(&g, m).unwrap();
        let fwd = mass_operator_multiplier(&g, m).unwrap();
        let out = apply_multiplier(&apply_multiplier(&f, &inv).unwrap(), &fwd).unwrap();
        assert!(out.max_abs_diff(&f) < 1e-10);
        assert!(Multiplier::radial(&g, |k2| if k2 > 1.0 { f64::NAN } else { 1.0 }).is_err());
    }

    #[test]
    fn heat_flow_examples() {
        let g = create_grid(2, 8, 2.0 * PI).unwrap();
        let f = random_field(&g, 4);
        assert!(heat_flow(&f, 0.0, 1.0).unwrap().max_abs_diff(&f) < 1e-13);
        let c = heat_flow(&RealField::constant(&g, 2.0), 2f64.ln(), 1.0).unwrap();
        assert!(c.max_abs_diff(&RealField::constant(&g, 1.0)) < 1e-12);
        let a = heat_flow(&heat_flow(&f, 0.3, 1.5).unwrap(), 0.2, 1.5).unwrap();
        let b = heat_flow(&f, 0.5, 1.5).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-12);
        assert!(heat_flow(&f, -0.1, 1.0).is_err());
    }

    #[test]
    fn green_and_bessel_examples() {
        let g = create_grid(1, 16, 2.0 * PI).unwrap();
        let c = green(&RealField::constant(&g, 3.0), 2.0).unwrap();
        assert!(c.max_abs_diff(&RealField::constant(&g, 1.5)) < 1e-12);
        let cosx = RealField::from_fn(&g, |x| x[0].cos());
        assert!(green(&cosx, 1.0).unwrap().max_abs_diff(&cosx.scale(0.5)) < 1e-12);
        assert!(green(&cosx, 0.0).is_err());
        assert!(bessel(&cosx, 0.0).max_abs_diff(&cosx) < 1e-13);
        assert!(
            bessel(&RealField::constant(&g, 1.25), 3.3)
                .max_abs_diff(&RealField::constant(&g, 1.25))
                < 1e-12
        );
        assert!(bessel(&cosx, 2.0).max_abs_diff(&cosx.scale(2.0)) < 1e-12);
        let f = random_field(&g, 5);
        assert!(bessel(&bessel(&f, 1.3), -1.3).max_abs_diff(&f) < 1e-12);
    }

    #[test]
    fn multipliers_commute() {
        let g = create_grid(2, 8, 2.0 * PI).unwrap();
        let f = random_field(&g, 6);
        let a = heat_flow(&green(&bessel(&f, 0.7), 1.3).unwrap(), 0.2, 1.0).unwrap();
        let b = bessel(&heat_flow(&green(&f, 1.3).unwrap(), 0.2, 1.0).unwrap(), 0.7);
        assert!(a.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn inner_and_norms() {
        let g = create_grid(2, 8, 2.0 * PI).unwrap();
        let one = RealField::constant(&g, 1.0);
        assert!((inner(&one, &one).unwrap() - (2.0 * PI).powi(2)).abs() < 1e-12);
        let g1 = create_grid(1, 16, 2.0 * PI).unwrap();
        let cosx = RealField::from_fn(&g1, |x| x[0].cos());
        assert!((norm_lp(&cosx, 2.0).unwrap().powi(2) - PI).abs() < 1e-12);
        assert!((norm_lp(&cosx, f64::INFINITY).unwrap() - 1.0).abs() < 1e-12);
        let other = create_grid(1, 8, 2.0 * PI).unwrap();
        assert!(inner(&cosx, &RealField::zeros(&other)).is_err());
        assert!(norm_lp(&cosx, 0.5).is_err());
    }

    #[test]
    fn phi1_limits() {
        assert_eq!(phi1(0.0), 1.0);
        assert!((phi1(1e-10) - 1.0).abs() < 1e-10);
        assert!((phi1(1.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((phi1(-2.0) - ((2.0f64).exp() - 1.0) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn exp_filter_constant_source() {
        let g = create_grid(1, 8, 2.0 * PI).unwrap();
        let m = 1.5;
        let dt = 0.05;
        let filt = ExpFilter::new(&g, m, dt).unwrap();
        let src = RealField::from_fn(&g, |x| 1.0 + x[0].cos());
        let mut u = RealField::zeros(&g);
        let n = 40;
        for _ in 0..n {
            u = filt.step(&u, &src).unwrap();
        }
        let t = n as f64 * dt;
        let expect = RealField::from_fn(&g, |x| {
            (1.0 - (-m * t).exp()) / m + (1.0 - (-(m + 1.0) * t).exp()) / (m + 1.0) * x[0].cos()
        });
        assert!(u.max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn shift_matches_translation() {
        let g = create_grid(1, 16, 2.0 * PI).unwrap();
        let f = RealField::from_fn(&g, |x| (2.0 * x[0]).sin());
        let h = g.spacing();
        let shifted = f.shifted([3, 0, 0]);
        let expect = RealField::from_fn(&g, |x| (2.0 * (x[0] - 3.0 * h)).sin());
        assert!(shifted.max_abs_diff(&expect) < 1e-12);
    }
}
