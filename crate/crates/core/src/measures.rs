//! Gaussian free field sampling, marginal-law distances, the O(N)-invariant
//! observable and the convergence-rate study.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::besov::{self, BesovParams};
use crate::dynamics::{SimConfig, Simulation};
use crate::error::{Error, Result};
use crate::stochastic::{self, TreeSet};
use crate::torus::{self, to_spectrum, Grid, RealField, Spectrum};

/// A draw from `𝒩(0, ½(m-Δ)^{-1})`.
pub fn sample_gff(grid: &Arc<Grid>, m: f64, rng: &mut ChaCha8Rng) -> Result<RealField> {
    stochastic::ou_init_stationary(grid, m, rng)
}

/// Running per-mode first and second moments of spectral coefficients.
#[derive(Clone, Debug)]
pub struct CovarianceAccumulator {
    grid: Arc<Grid>,
    count: usize,
    sum: Vec<num_complex::Complex64>,
    sum_sq: Vec<f64>,
}

impl CovarianceAccumulator {
    pub fn new(grid: &Arc<Grid>) -> Self {
        let n = grid.n_sites();
        CovarianceAccumulator {
            grid: grid.clone(),
            count: 0,
            sum: vec![num_complex::Complex64::new(0.0, 0.0); n],
            sum_sq: vec![0.0; n],
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn push_spectrum(&mut self, s: &Spectrum) {
        for ((a, b), c) in self
            .sum
            .iter_mut()
            .zip(self.sum_sq.iter_mut())
            .zip(s.coeffs())
        {
            *a += c;
            *b += c.norm_sqr();
        }
        self.count += 1;
    }

    pub fn push(&mut self, f: &RealField) {
        self.push_spectrum(&to_spectrum(f));
    }

    pub fn merge(&mut self, other: &CovarianceAccumulator) {
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            *a += b;
        }
        self.count += other.count;
    }

    /// Unbiased per-mode variances, before shell averaging.
    pub fn raw_variances(&self) -> Result<Vec<f64>> {
        if self.count < 2 {
            return Err(Error::InsufficientData(format!(
                "need at least 2 samples for a variance, have {}",
                self.count
            )));
        }
        let n = self.count as f64;
        Ok(self
            .sum
            .iter()
            .zip(&self.sum_sq)
            .map(|(s, q)| ((q - s.norm_sqr() / n) / (n - 1.0)).max(0.0))
            .collect())
    }
}

/// Shell-averaged per-mode variance estimates.
#[derive(Clone, Debug)]
pub struct SpectralCovariance {
    pub grid: Arc<Grid>,
    pub var: Vec<f64>,
    pub stderr: Vec<f64>,
    pub samples: usize,
}

/// Groups of storage indices with equal `|n|²`.
pub fn shells(grid: &Grid) -> Vec<Vec<usize>> {
    let mut map: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (idx, f) in grid.freqs().iter().enumerate() {
        let key = f.iter().map(|v| v * v).sum::<i64>();
        map.entry(key).or_default().push(idx);
    }
    map.into_values().collect()
}

fn shell_average(grid: &Grid, per_mode: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; per_mode.len()];
    for shell in shells(grid) {
        let mean = shell.iter().map(|&i| per_mode[i]).sum::<f64>() / shell.len() as f64;
        for &i in &shell {
            out[i] = mean;
        }
    }
    out
}

/// Per-mode variance estimates from field samples. Standard errors use the
/// Gaussian relation `se(v̂) = v̂ √(2/(n_shell·(n-1)))`.
pub fn estimate_marginal_covariance(samples: &[RealField]) -> Result<SpectralCovariance> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InsufficientData("no samples".into()))?;
    let mut acc = CovarianceAccumulator::new(first.grid());
    for s in samples {
        acc.push(s);
    }
    covariance_from(&acc)
}

pub fn covariance_from(acc: &CovarianceAccumulator) -> Result<SpectralCovariance> {
    let grid = acc.grid.clone();
    let raw = acc.raw_variances()?;
    let var = shell_average(&grid, &raw);
    let mut stderr = vec![0.0; var.len()];
    for shell in shells(&grid) {
        let dof = shell.len() as f64 * (acc.count as f64 - 1.0);
        for &i in &shell {
            stderr[i] = var[i] * (2.0 / dof).sqrt();
        }
    }
    Ok(SpectralCovariance {
        grid,
        var,
        stderr,
        samples: acc.count,
    })
}

/// `w_k = (1+|k|²)^{-1/2-κ}`
pub fn sobolev_weights(grid: &Grid, kappa: f64) -> Vec<f64> {
    grid.k2()
        .iter()
        .map(|k2| (1.0 + k2).powf(-0.5 - kappa))
        .collect()
}

/// `(Σ_k w_k (√v_k - √g_k)²)^{1/2}` for explicit diagonal covariances.
pub fn w2_diag_gaussian(v: &[f64], g: &[f64], w: &[f64]) -> Result<f64> {
    if v.len() != g.len() || v.len() != w.len() {
        return Err(Error::ShapeMismatch(
            "covariance vectors differ in length".into(),
        ));
    }
    let mut s = 0.0;
    for ((a, b), c) in v.iter().zip(g).zip(w) {
        if *a < 0.0 || *b < 0.0 {
            return Err(Error::param("variance", "negative variance"));
        }
        s += c * (a.sqrt() - b.sqrt()).powi(2);
    }
    Ok(s.sqrt())
}

/// W₂ in `H^{-1/2-κ}` between the diagonal Gaussian proxy of `cov` and the GFF.
pub fn w2_sobolev_gaussian(cov: &SpectralCovariance, m: f64, kappa: f64) -> Result<f64> {
    let g = stochastic::stationary_variances(&cov.grid, m)?;
    w2_diag_gaussian(&cov.var, &g, &sobolev_weights(&cov.grid, kappa))
}

/// Random test fields normalized to unit `H^{1/2+κ}` norm.
pub fn random_directions(
    grid: &Arc<Grid>,
    kappa: f64,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<RealField> {
    (0..count)
        .map(|_| {
            let f = besov::random_sobolev_field(grid, 1.0 + kappa, rng);
            let n = torus::sobolev_norm2(&f, 0.5 + kappa).sqrt();
            f.scale(1.0 / n)
        })
        .collect()
}

fn quantile_w2(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let n = a.len().max(b.len());
    let q = |v: &[f64], u: f64| v[((u * v.len() as f64) as usize).min(v.len() - 1)];
    let mut s = 0.0;
    for i in 0..n {
        let u = (i as f64 + 0.5) / n as f64;
        s += (q(&a, u) - q(&b, u)).powi(2);
    }
    (s / n as f64).sqrt()
}

/// Mean over directions `f` of the 1-D empirical W₂ between the laws of `<·,f>`.
pub fn sliced_w2(a: &[RealField], b: &[RealField], directions: &[RealField]) -> Result<f64> {
    if a.len() < 50 || b.len() < 50 {
        return Err(Error::InsufficientData(format!(
            "sliced W2 needs >= 50 samples per side, have {} and {}",
            a.len(),
            b.len()
        )));
    }
    if directions.is_empty() {
        return Err(Error::InsufficientData("no directions".into()));
    }
    let mut total = 0.0;
    for f in directions {
        let pa: Vec<f64> = a
            .iter()
            .map(|x| torus::inner(x, f))
            .collect::<Result<_>>()?;
        let pb: Vec<f64> = b
            .iter()
            .map(|x| torus::inner(x, f))
            .collect::<Result<_>>()?;
        total += quantile_w2(pa, pb);
    }
    Ok(total / directions.len() as f64)
}

/// Sliced W₂ predicted for two centered diagonal Gaussians.
pub fn gaussian_sliced_w2(v: &[f64], g: &[f64], directions: &[RealField]) -> f64 {
    let mut total = 0.0;
    for f in directions {
        let s = to_spectrum(f);
        let (mut sa, mut sb) = (0.0, 0.0);
        for ((c, x), y) in s.coeffs().iter().zip(v).zip(g) {
            sa += c.norm_sqr() * x;
            sb += c.norm_sqr() * y;
        }
        total += (sa.sqrt() - sb.sqrt()).abs();
    }
    total / directions.len() as f64
}

/// `O = (1/√N) Σ_i (Φ_i² - a)` with its `B^{-1-κ}_{1,1}` norm.
#[derive(Clone, Debug)]
pub struct ObservableSample {
    pub field: RealField,
    pub n: usize,
    pub kappa: f64,
    pub besov: f64,
}

pub fn observable_field(phi: &[RealField], a: f64) -> Result<RealField> {
    let first = phi
        .first()
        .ok_or_else(|| Error::InsufficientData("empty component system".into()))?;
    let c = 1.0 / (phi.len() as f64).sqrt();
    let mut o = RealField::zeros(first.grid());
    for p in phi {
        o.axpy(c, &p.map(|v| v * v - a))?;
    }
    Ok(o)
}

pub fn observable_o(phi: &[RealField], a: f64, kappa: f64) -> Result<ObservableSample> {
    let field = observable_field(phi, a)?;
    let part = besov::DyadicPartition::new(field.grid());
    let besov = observable_besov(&field, kappa, &part)?;
    Ok(ObservableSample {
        field,
        n: phi.len(),
        kappa,
        besov,
    })
}

/// `O` assembled from `Φ = Z + X + Y`:
/// `(1/√N) Σ (X² + Y² + 𝒵²_{ii} + 2XY + 2XZ + 2YZ)`.
pub fn observable_decomposed(
    z: &[RealField],
    x: &[RealField],
    y: &[RealField],
    a: f64,
) -> Result<RealField> {
    let c = 1.0 / (z.len() as f64).sqrt();
    let mut o = RealField::zeros(z[0].grid());
    for ((zi, xi), yi) in z.iter().zip(x).zip(y) {
        let w = stochastic::wick2(zi, zi, a, true)?;
        let parts = [
            xi.mul(xi)?,
            yi.mul(yi)?,
            w,
            xi.mul(yi)?.scale(2.0),
            xi.mul(zi)?.scale(2.0),
            yi.mul(zi)?.scale(2.0),
        ];
        for p in &parts {
            o.axpy(c, p)?;
        }
    }
    Ok(o)
}

/// Direct `O` from `Φ` together with the sup-norm defect of the decomposed form.
pub fn observable_with_check(
    phi: &[RealField],
    z: &[RealField],
    x: &[RealField],
    a: f64,
    kappa: f64,
) -> Result<(ObservableSample, f64)> {
    let y: Vec<RealField> = phi
        .iter()
        .zip(z)
        .zip(x)
        .map(|((p, z), x)| p.sub(z)?.sub(x))
        .collect::<Result<_>>()?;
    let obs = observable_o(phi, a, kappa)?;
    let dec = observable_decomposed(z, x, &y, a)?;
    let defect = obs.field.max_abs_diff(&dec);
    Ok((obs, defect))
}

/// `‖O‖_{B^{-1-κ}_{1,1}}`
pub fn observable_besov(o: &RealField, kappa: f64, part: &besov::DyadicPartition) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(Error::param("kappa", "must be > 0"));
    }
    Ok(besov::besov_norm(
        o,
        &BesovParams::new(-1.0 - kappa, 1.0, 1.0)?,
        part,
    ))
}

/// `R_N^1 = (1/N²) Σ_{ij} ‖𝒵²_{ij}‖²_{C^{-1-κ}} + (1/N) Σ_j ‖𝒵²_{jj}‖²_{C^{-1-κ}} + 1`
pub fn diag_rn1(trees: &TreeSet, kappa: f64) -> Result<f64> {
    let n = trees.n();
    let nf = n as f64;
    let bp = BesovParams::holder(-1.0 - kappa);
    let mut off = 0.0;
    let mut diag = 0.0;
    for i in 0..n {
        for j in i..n {
            let v = besov::besov_norm(&trees.wick2(i, j)?, &bp, &trees.partition);
            let v2 = v * v;
            if i == j {
                off += v2;
                diag += v2;
            } else {
                off += 2.0 * v2;
            }
        }
    }
    Ok(off / (nf * nf) + diag / nf + 1.0)
}

/// Leave-one-block-out jackknife: `(estimate, stderr)`.
pub fn jackknife<T>(blocks: &[T], estimator: impl Fn(&[&T]) -> Result<f64>) -> Result<(f64, f64)> {
    let b = blocks.len();
    if b < 2 {
        return Err(Error::InsufficientData(
            "jackknife needs at least 2 blocks".into(),
        ));
    }
    let all: Vec<&T> = blocks.iter().collect();
    let full = estimator(&all)?;
    let mut loo = Vec::with_capacity(b);
    for skip in 0..b {
        let sub: Vec<&T> = blocks
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != skip)
            .map(|(_, x)| x)
            .collect();
        loo.push(estimator(&sub)?);
    }
    let bf = b as f64;
    let mean = loo.iter().sum::<f64>() / bf;
    let var = (bf - 1.0) / bf * loo.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    Ok((full, var.sqrt()))
}

pub const JACKKNIFE_BLOCKS: usize = 20;

/// Weighted least-squares line through `(x, y)` with standard errors `sy`:
/// `(slope, slope_stderr, intercept)`.
pub fn wls_fit(x: &[f64], y: &[f64], sy: &[f64]) -> Result<(f64, f64, f64)> {
    if x.len() < 2 || x.len() != y.len() || y.len() != sy.len() {
        return Err(Error::InsufficientData(
            "need >= 2 matched points for a fit".into(),
        ));
    }
    let w: Vec<f64> = sy
        .iter()
        .map(|s| if *s > 0.0 { 1.0 / (s * s) } else { 1.0 })
        .collect();
    let sw: f64 = w.iter().sum();
    let sx: f64 = w.iter().zip(x).map(|(w, x)| w * x).sum();
    let syy: f64 = w.iter().zip(y).map(|(w, y)| w * y).sum();
    let sxx: f64 = w.iter().zip(x).map(|(w, x)| w * x * x).sum();
    let sxy: f64 = w.iter().zip(x).zip(y).map(|((w, x), y)| w * x * y).sum();
    let det = sw * sxx - sx * sx;
    if det <= 0.0 {
        return Err(Error::InsufficientData("degenerate abscissae".into()));
    }
    let slope = (sw * sxy - sx * syy) / det;
    let intercept = (sxx * syy - sx * sxy) / det;
    Ok((slope, (sw / det).sqrt(), intercept))
}

/// Result for one `N` of the rate study.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m_points: usize,
    pub d: usize,
    pub m: f64,
    pub lambda: f64,
    pub samples: usize,
    pub distance: f64,
    pub stderr: f64,
    pub besov_obs_mean: f64,
    pub besov_obs_stderr: f64,
    pub seed: u64,
}

impl ConvergenceRow {
    pub const CSV_HEADER: &'static str =
        "N,M,d,m,lambda,samples,distance,stderr,besov_obs_mean,besov_obs_stderr,seed";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:.9e},{:.9e},{:.9e},{:.9e},{}",
            self.n,
            self.m_points,
            self.d,
            self.m,
            self.lambda,
            self.samples,
            self.distance,
            self.stderr,
            self.besov_obs_mean,
            self.besov_obs_stderr,
            self.seed
        )
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceSummary {
    pub rows: Vec<ConvergenceRow>,
    pub slope: Option<f64>,
    pub slope_stderr: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub degenerate: bool,
}

/// Stationary run at one `N`: distance of the one-component marginal from the
/// GFF and the observable norm, each with a block-jackknife error.
/// `samples` counts time points; all components are pooled.
pub fn measure_one(cfg: &SimConfig, samples: usize) -> Result<ConvergenceRow> {
    let mut sim = Simulation::new(cfg, false)?;
    sim.burn_in()?;
    let grid = sim.ctx.grid.clone();
    let part = sim.ctx.partition.clone();
    let per_block = samples.div_ceil(JACKKNIFE_BLOCKS).max(1);
    let mut blocks: Vec<CovarianceAccumulator> = Vec::new();
    let mut obs_blocks: Vec<Vec<f64>> = Vec::new();
    let mut taken = 0;
    while taken < samples {
        for _ in 0..cfg.sample_every {
            sim.step()?;
        }
        if taken % per_block == 0 {
            blocks.push(CovarianceAccumulator::new(&grid));
            obs_blocks.push(Vec::new());
        }
        let acc = blocks.last_mut().unwrap();
        for p in &sim.state.phi {
            acc.push(p);
        }
        let o = observable_field(&sim.state.phi, sim.ctx.a)?;
        obs_blocks
            .last_mut()
            .unwrap()
            .push(observable_besov(&o, cfg.kappa, &part)?);
        taken += 1;
    }
    let (distance, stderr) = jackknife(&blocks, |sub| {
        let mut acc = CovarianceAccumulator::new(&grid);
        for b in sub {
            acc.merge(b);
        }
        w2_sobolev_gaussian(&covariance_from(&acc)?, cfg.m, cfg.kappa)
    })?;
    let (besov_obs_mean, besov_obs_stderr) = jackknife(&obs_blocks, |sub| {
        let (s, c) = sub.iter().fold((0.0, 0usize), |(s, c), b| {
            (s + b.iter().sum::<f64>(), c + b.len())
        });
        Ok(s / c as f64)
    })?;
    Ok(ConvergenceRow {
        n: cfg.n,
        m_points: cfg.m_points,
        d: cfg.d,
        m: cfg.m,
        lambda: cfg.lambda,
        samples: taken,
        distance,
        stderr,
        besov_obs_mean,
        besov_obs_stderr,
        seed: cfg.seed,
    })
}

/// Rate study over `n_list`: one stationary run per `N` and a WLS fit of
/// `log D` against `log N`.
pub fn convergence_study(
    template: &SimConfig,
    n_list: &[usize],
    samples: usize,
) -> Result<ConvergenceSummary> {
    if n_list.len() < 4 {
        return Err(Error::InsufficientData(
            "need at least 4 values of N".into(),
        ));
    }
    let lo = *n_list.iter().min().unwrap();
    let hi = *n_list.iter().max().unwrap();
    if hi < 8 * lo {
        return Err(Error::InsufficientData(
            "N values must span at least a factor 8".into(),
        ));
    }
    let rows: Vec<ConvergenceRow> = n_list
        .par_iter()
        .map(|&n| {
            let mut cfg = template.clone();
            cfg.n = n;
            measure_one(&cfg, samples)
        })
        .collect::<Result<_>>()?;
    if template.lambda == 0.0 {
        return Ok(ConvergenceSummary {
            rows,
            slope: None,
            slope_stderr: None,
            ci_low: None,
            ci_high: None,
            degenerate: true,
        });
    }
    let x: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let y: Vec<f64> = rows
        .iter()
        .map(|r| r.distance.max(f64::MIN_POSITIVE).ln())
        .collect();
    let sy: Vec<f64> = rows
        .iter()
        .map(|r| r.stderr / r.distance.max(f64::MIN_POSITIVE))
        .collect();
    let (slope, se, _) = wls_fit(&x, &y, &sy)?;
    Ok(ConvergenceSummary {
        rows,
        slope: Some(slope),
        slope_stderr: Some(se),
        ci_low: Some(slope - 1.96 * se),
        ci_high: Some(slope + 1.96 * se),
        degenerate: false,
    })
}

/// Draws iid unit Gaussians through `rng`.
pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| rng.sample(rand_distr::StandardNormal))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn grid() -> Arc<Grid> {
        torus::create_grid(1, 16, 2.0 * std::f64::consts::PI).unwrap()
    }

    #[test]
    fn w2_examples() {
        assert_eq!(w2_diag_gaussian(&[1.0], &[4.0], &[1.0]).unwrap(), 1.0);
        let g = vec![0.3, 0.2];
        assert_eq!(w2_diag_gaussian(&g, &g, &[1.0, 0.5]).unwrap(), 0.0);
        assert!(w2_diag_gaussian(&[-1.0], &[1.0], &[1.0]).is_err());
    }

    #[test]
    fn constant_samples_have_zero_variance() {
        let g = grid();
        let s = vec![RealField::constant(&g, 1.3); 5];
        let cov = estimate_marginal_covariance(&s).unwrap();
        assert!(cov.var.iter().all(|v| v.abs() < 1e-12));
        assert!(estimate_marginal_covariance(&s[..1]).is_err());
    }

    #[test]
    fn observable_constant_case() {
        let g = grid();
        let phi = vec![RealField::constant(&g, 0.7); 4];
        let o = observable_field(&phi, 0.0).unwrap();
        assert!(o.values().iter().all(|v| (v - 2.0 * 0.49).abs() < 1e-14));
        let part = besov::DyadicPartition::new(&g);
        assert_eq!(
            observable_besov(&RealField::zeros(&g), 0.1, &part).unwrap(),
            0.0
        );
        let c = 0.4;
        let norm = observable_besov(&RealField::constant(&g, c), 0.1, &part).unwrap();
        let expect = 2f64.powf(1.1) * c * 2.0 * std::f64::consts::PI;
        assert!((norm - expect).abs() < 1e-12, "{norm} vs {expect}");
    }

    #[test]
    fn rn1_of_zero_trees_is_one() {
        let g = grid();
        let part = Arc::new(besov::DyadicPartition::new(&g));
        let trees = TreeSet {
            grid: g.clone(),
            partition: part,
            m: 1.0,
            a: 0.0,
            btilde: 0.0,
            t: 0.0,
            z: vec![RealField::zeros(&g); 3],
            s: vec![RealField::zeros(&g); 3],
            pair30: Vec::new(),
            level: None,
        };
        assert_eq!(diag_rn1(&trees, 0.1).unwrap(), 1.0);
    }

    #[test]
    fn wls_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let (s, _, b) = wls_fit(&x, &y, &[0.1; 4]).unwrap();
        assert!((s + 0.5).abs() < 1e-12 && (b - 2.0).abs() < 1e-12);
    }

    #[test]
    fn jackknife_of_mean_matches_classical_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = gaussian_vec(&mut rng, 400);
        let blocks: Vec<Vec<f64>> = v.chunks(20).map(|c| c.to_vec()).collect();
        let (m, se) = jackknife(&blocks, |sub| {
            let all: Vec<f64> = sub.iter().flat_map(|b| b.iter().copied()).collect();
            Ok(all.iter().sum::<f64>() / all.len() as f64)
        })
        .unwrap();
        let (m2, se2) = stochastic::mean_stderr(&v);
        assert!((m - m2).abs() < 1e-12);
        assert!((se / se2 - 1.0).abs() < 0.5);
    }

    #[test]
    fn identical_sets_have_zero_sliced_distance() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a: Vec<RealField> = (0..60)
            .map(|_| sample_gff(&g, 1.0, &mut rng).unwrap())
            .collect();
        let dirs = random_directions(&g, 0.1, 4, &mut rng);
        assert_eq!(sliced_w2(&a, &a, &dirs).unwrap(), 0.0);
        assert!(sliced_w2(&a[..10], &a, &dirs).is_err());
    }
}
