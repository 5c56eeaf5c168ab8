//! Slow reference computations used to validate the engine. Everything here
//! runs on a naive `O(n²)` Fourier sum over lattice sites and plain loops; the
//! only thing shared with the engine is the site geometry of [`Grid`].

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::torus::{Grid, RealField};

/// `(variance, autocovariance at lag t)` of one OU mode.
pub fn ou_mode_law(m: f64, k2: f64, t: f64) -> Result<(f64, f64)> {
    if !(m > 0.0) {
        return Err(Error::param("m", "must be > 0"));
    }
    let lam = m + k2;
    let var = 0.5 / lam;
    Ok((var, (-lam * t.abs()).exp() * var))
}

const MAX_SITES: usize = 4096;

/// Orthonormal Fourier basis evaluated by direct summation.
pub struct NaiveFourier {
    sites: Vec<[f64; 3]>,
    wave: Vec<[f64; 3]>,
    d: usize,
    cell: f64,
    norm: f64,
}

impl NaiveFourier {
    pub fn new(grid: &Grid) -> Result<Self> {
        let n = grid.n_sites();
        if n > MAX_SITES {
            return Err(Error::Unsupported(format!(
                "oracle limited to {MAX_SITES} sites, grid has {n}"
            )));
        }
        let d = grid.dim();
        let m = grid.points() as i64;
        let sites: Vec<[f64; 3]> = (0..n).map(|i| grid.site_coords(i)).collect();
        let mut wave = Vec::with_capacity(n);
        let range: Vec<i64> = (-m / 2..m / 2).collect();
        let k0 = 2.0 * PI / grid.side();
        let axis = |a: usize| if a < d { range.clone() } else { vec![0] };
        for &a in &axis(0) {
            for &b in &axis(1) {
                for &c in &axis(2) {
                    wave.push([a as f64 * k0, b as f64 * k0, c as f64 * k0]);
                }
            }
        }
        let h = grid.side() / grid.points() as f64;
        Ok(NaiveFourier {
            sites,
            wave,
            d,
            cell: h.powi(d as i32),
            norm: grid.side().powf(-(d as f64) / 2.0),
        })
    }

    pub fn radii(&self) -> Vec<f64> {
        self.wave
            .iter()
            .map(|k| (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt())
            .collect()
    }

    fn phase(&self, k: &[f64; 3], x: &[f64; 3]) -> f64 {
        (0..self.d).map(|a| k[a] * x[a]).sum()
    }

    pub fn forward(&self, f: &[f64]) -> Vec<Complex64> {
        self.wave
            .iter()
            .map(|k| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (x, v) in self.sites.iter().zip(f) {
                    acc += Complex64::from_polar(*v, -self.phase(k, x));
                }
                acc * self.cell * self.norm
            })
            .collect()
    }

    pub fn inverse(&self, c: &[Complex64]) -> Vec<f64> {
        self.sites
            .iter()
            .map(|x| {
                let mut acc = 0.0;
                for (k, ck) in self.wave.iter().zip(c) {
                    acc += (ck * Complex64::from_polar(1.0, self.phase(k, x))).re;
                }
                acc * self.norm
            })
            .collect()
    }

    /// `f ↦ F^{-1}(σ(k) F f)` for a multiplier given per wave vector.
    pub fn filter(&self, f: &[f64], sigma: &[f64]) -> Vec<f64> {
        let c: Vec<Complex64> = self
            .forward(f)
            .into_iter()
            .zip(sigma)
            .map(|(c, s)| c * s)
            .collect();
        self.inverse(&c)
    }

    pub fn k2(&self) -> Vec<f64> {
        self.radii().iter().map(|r| r * r).collect()
    }
}

fn bump(r: f64) -> f64 {
    let g = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
    let t = (1.0 - r) * 8.0 / 3.0;
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        g(t) / (g(t) + g(1.0 - t))
    }
}

/// Block profiles `ρ_{-1}, …, ρ_{j_max}` per wave vector, the last one closing the partition.
pub fn block_profiles(radii: &[f64]) -> Vec<Vec<f64>> {
    let r_max = radii.iter().cloned().fold(0.0, f64::max);
    let mut top = -1i32;
    while r_max > 0.625 * 2f64.powi(top + 1) {
        top += 1;
    }
    let mut out = Vec::new();
    let mut used = vec![0.0; radii.len()];
    for j in -1..top {
        let col: Vec<f64> = radii
            .iter()
            .map(|&r| {
                if j < 0 {
                    bump(r)
                } else {
                    bump(r / 2f64.powi(j + 1)) - bump(r / 2f64.powi(j))
                }
            })
            .collect();
        for (u, c) in used.iter_mut().zip(&col) {
            *u += c;
        }
        out.push(col);
    }
    out.push(used.iter().map(|u| 1.0 - u).collect());
    out
}

/// `(f≺g, f∘g, f≻g)` by a double loop over block pairs.
pub fn bruteforce_paraproduct(
    f: &RealField,
    g: &RealField,
) -> Result<(RealField, RealField, RealField)> {
    let grid = f.grid();
    if grid.points() > 16 {
        return Err(Error::Unsupported(
            "brute-force paraproduct limited to M <= 16".into(),
        ));
    }
    let nf = NaiveFourier::new(grid)?;
    let prof = block_profiles(&nf.radii());
    let fb: Vec<Vec<f64>> = prof.iter().map(|p| nf.filter(f.values(), p)).collect();
    let gb: Vec<Vec<f64>> = prof.iter().map(|p| nf.filter(g.values(), p)).collect();
    let n = grid.n_sites();
    let (mut lt, mut res, mut gt) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for (i, fi) in fb.iter().enumerate() {
        for (j, gj) in gb.iter().enumerate() {
            let target = if i + 2 <= j {
                &mut lt
            } else if j + 2 <= i {
                &mut gt
            } else {
                &mut res
            };
            for s in 0..n {
                target[s] += fi[s] * gj[s];
            }
        }
    }
    Ok((
        RealField::new(grid, lt)?,
        RealField::new(grid, res)?,
        RealField::new(grid, gt)?,
    ))
}

/// A monomial `Z_{c₁}(x)⋯Z_{c_r}(x)`, Wick ordered or plain.
#[derive(Clone, Debug)]
pub struct WickVertex {
    pub site: usize,
    pub components: Vec<usize>,
    pub wick: bool,
}

/// Gaussian moment of a product of vertices by enumeration of pairings.
/// Components are independent with common covariance `cov(x, y)`; legs of a
/// Wick-ordered vertex never pair with each other.
pub fn wick_moment_oracle(
    cov: &dyn Fn(usize, usize) -> f64,
    vertices: &[WickVertex],
) -> Result<f64> {
    if vertices
        .iter()
        .any(|v| v.components.is_empty() || v.components.len() > 3)
    {
        return Err(Error::Unsupported("vertices of order 1 to 3 only".into()));
    }
    let legs: Vec<(usize, usize, usize)> = vertices
        .iter()
        .enumerate()
        .flat_map(|(vi, v)| v.components.iter().map(move |&c| (vi, v.site, c)))
        .collect();
    if legs.len() > 12 {
        return Err(Error::Unsupported("at most 12 legs".into()));
    }
    if legs.len() % 2 == 1 {
        return Ok(0.0);
    }
    fn rec(
        legs: &[(usize, usize, usize)],
        free: &mut Vec<bool>,
        vertices: &[WickVertex],
        cov: &dyn Fn(usize, usize) -> f64,
    ) -> f64 {
        let Some(first) = free.iter().position(|f| *f) else {
            return 1.0;
        };
        free[first] = false;
        let mut total = 0.0;
        for other in first + 1..legs.len() {
            if !free[other] {
                continue;
            }
            let (va, sa, ca) = legs[first];
            let (vb, sb, cb) = legs[other];
            if ca != cb || (va == vb && vertices[va].wick) {
                continue;
            }
            free[other] = false;
            total += cov(sa, sb) * rec(legs, free, vertices, cov);
            free[other] = true;
        }
        free[first] = true;
        total
    }
    let mut free = vec![true; legs.len()];
    Ok(rec(&legs, &mut free, vertices, cov))
}

/// `C(x-y) = E[Z(x)Z(y)]` of the stationary linear field, by cosine sums.
pub fn lattice_covariance(grid: &Grid, m: f64) -> Result<impl Fn(usize, usize) -> f64> {
    let nf = NaiveFourier::new(grid)?;
    let k2 = nf.k2();
    let vol = grid.side().powi(grid.dim() as i32);
    let d = nf.d;
    let sites = nf.sites.clone();
    let wave = nf.wave.clone();
    Ok(move |x: usize, y: usize| {
        let mut acc = 0.0;
        for (k, kk) in wave.iter().zip(&k2) {
            let ph: f64 = (0..d).map(|a| k[a] * (sites[x][a] - sites[y][a])).sum();
            acc += ph.cos() / (2.0 * (m + kk));
        }
        acc / vol
    })
}

/// Exact `b̃`: site mean of `E[𝒟^{-1}w ∘ w]` with `w = Z² - a`.
pub fn exact_btilde(grid: &Grid, m: f64) -> Result<f64> {
    let nf = NaiveFourier::new(grid)?;
    let cov = lattice_covariance(grid, m)?;
    let n = grid.n_sites();
    let c: Vec<f64> = (0..n).map(|x| cov(x, 0)).collect();
    let radii = nf.radii();
    let prof = block_profiles(&radii);
    let nb = prof.len();
    let vol = grid.side().powi(grid.dim() as i32);
    let mut total = 0.0;
    for (q, k) in nf.wave.iter().enumerate() {
        let mut pw = 0.0;
        for (z, cz) in c.iter().enumerate() {
            let ph: f64 = (0..nf.d).map(|a| k[a] * nf.sites[z][a]).sum();
            pw += 2.0 * cz * cz * ph.cos();
        }
        pw *= nf.cell;
        let mut r = 0.0;
        for i in 0..nb {
            for j in i.saturating_sub(1)..(i + 2).min(nb) {
                r += prof[i][q] * prof[j][q];
            }
        }
        total += r / (m + radii[q] * radii[q]) * pw;
    }
    Ok(total / vol)
}

/// Single-site moments of a Metropolis run.
#[derive(Clone, Debug)]
pub struct McmcMoments {
    pub second: f64,
    pub second_se: f64,
    pub fourth: f64,
    pub fourth_se: f64,
    pub odd: f64,
    pub acceptance: f64,
    pub step_size: f64,
}

/// Random-walk Metropolis for the lattice measure
/// `exp(-⟨Φ,(m_eff-Δ)Φ⟩ - (λ/2N) h^d Σ_x (Σ_i Φ_i(x)²)²)` on `d = 1`.
#[allow(clippy::too_many_arguments)]
pub fn mcmc_invariant_sampler(
    m_points: usize,
    side: f64,
    n: usize,
    m_eff: f64,
    lambda: f64,
    burn_sweeps: usize,
    sweeps: usize,
    seed: u64,
) -> Result<McmcMoments> {
    if m_points > 8 || n > 4 || n == 0 {
        return Err(Error::Unsupported(
            "Metropolis oracle limited to d = 1, M <= 8, N <= 4".into(),
        ));
    }
    let h = side / m_points as f64;
    // K(x) with ⟨Φ,𝒟Φ⟩ = h² Σ_{x,y} Φ(x) K(x-y) Φ(y)
    let kern: Vec<f64> = (0..m_points)
        .map(|x| {
            let mut acc = 0.0;
            for q in -(m_points as i64) / 2..(m_points as i64) / 2 {
                let k = 2.0 * PI * q as f64 / side;
                acc += (m_eff + k * k) * (k * x as f64 * h).cos();
            }
            acc / side
        })
        .collect();
    let kx = |x: usize, y: usize| kern[(x + m_points - y) % m_points];
    let mut phi = vec![vec![0.0; m_points]; n];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut step = 0.5;
    let quartic = |s: f64| lambda / (2.0 * n as f64) * h * s * s;
    let sweep = |phi: &mut Vec<Vec<f64>>, step: f64, rng: &mut ChaCha8Rng| -> usize {
        let mut acc = 0;
        for i in 0..n {
            for x in 0..m_points {
                let old = phi[i][x];
                let prop_v = old + step * rng.sample::<f64, _>(StandardNormal);
                let mut lin = 0.0;
                for y in 0..m_points {
                    if y != x {
                        lin += kx(x, y) * phi[i][y];
                    }
                }
                let quad = |v: f64| h * h * (kx(x, x) * v * v + 2.0 * v * lin);
                let rest: f64 = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| phi[j][x] * phi[j][x])
                    .sum();
                let d_h = quad(prop_v) - quad(old) + quartic(rest + prop_v * prop_v)
                    - quartic(rest + old * old);
                if d_h <= 0.0 || rng.random::<f64>() < (-d_h).exp() {
                    phi[i][x] = prop_v;
                    acc += 1;
                }
            }
        }
        acc
    };
    let per = n * m_points;
    let chunk = 200;
    let mut done = 0;
    while done < burn_sweeps {
        let mut acc = 0;
        let len = chunk.min(burn_sweeps - done);
        for _ in 0..len {
            acc += sweep(&mut phi, step, &mut rng);
        }
        done += len;
        let rate = acc as f64 / (len * per) as f64;
        step *= if rate > 0.5 {
            1.15
        } else if rate < 0.2 {
            0.85
        } else {
            (rate / 0.35).sqrt().clamp(0.95, 1.05)
        };
    }
    let batches = 50;
    let per_batch = (sweeps / batches).max(1);
    let mut b2 = Vec::with_capacity(batches);
    let mut b4 = Vec::with_capacity(batches);
    let mut odd = 0.0;
    let mut accepted = 0usize;
    for _ in 0..batches {
        let (mut s2, mut s4) = (0.0, 0.0);
        for _ in 0..per_batch {
            accepted += sweep(&mut phi, step, &mut rng);
            for row in &phi {
                for v in row {
                    s2 += v * v;
                    s4 += v * v * v * v;
                    odd += v;
                }
            }
        }
        let cnt = (per_batch * per) as f64;
        b2.push(s2 / cnt);
        b4.push(s4 / cnt);
    }
    let stats = |b: &[f64]| {
        let k = b.len() as f64;
        let mean = b.iter().sum::<f64>() / k;
        let var = b.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
        (mean, (var / k).sqrt())
    };
    let (second, second_se) = stats(&b2);
    let (fourth, fourth_se) = stats(&b4);
    let total = (batches * per_batch * per) as f64;
    Ok(McmcMoments {
        second,
        second_se,
        fourth,
        fourth_se,
        odd: odd / total,
        acceptance: accepted as f64 / total,
        step_size: step,
    })
}

/// Dependence structure of the synthetic arrays `M_{i₁…i_l}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DependencyPattern {
    /// Every tuple carries its own independent variable.
    IidTuples,
    /// `M = l^{-1/2} Σ_k ξ_{i_k}`: tuples sharing an index are correlated,
    /// disjoint tuples are independent.
    SharedIndex,
    /// Every entry equals one common variable.
    FullyDependent,
}

/// Monte-Carlo `N · E[(N^{-l} Σ M_{i₁…i_l})²]` with unit-variance Gaussians.
pub fn variance_scaling_oracle(
    l: usize,
    n: usize,
    pattern: DependencyPattern,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if l == 0 || n == 0 || samples == 0 {
        return Err(Error::param("l,N,samples", "must be positive"));
    }
    let tuples = n
        .checked_pow(l as u32)
        .filter(|t| *t <= 1 << 20)
        .ok_or_else(|| Error::Unsupported("N^l above 2^20 entries".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = 0.0;
    let scale = (n as f64).powi(l as i32);
    for _ in 0..samples {
        let sum = match pattern {
            DependencyPattern::IidTuples => (0..tuples)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .sum::<f64>(),
            DependencyPattern::FullyDependent => {
                tuples as f64 * rng.sample::<f64, _>(StandardNormal)
            }
            DependencyPattern::SharedIndex => {
                let xi: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                let mut s = 0.0;
                for t in 0..tuples {
                    let mut rem = t;
                    let mut v = 0.0;
                    for _ in 0..l {
                        v += xi[rem % n];
                        rem /= n;
                    }
                    s += v / (l as f64).sqrt();
                }
                s
            }
        };
        acc += (sum / scale).powi(2);
    }
    Ok(acc / samples as f64 * n as f64)
}

/// Picard iteration of the integrated `X` equation along a given path of
/// linear fields, with the same left-endpoint time discretization:
/// `X = -(λ/N)(𝒵̃³⁰ + Σ_j 𝓘(2X_j≺𝒰_>𝒵²_{ij} + X_i≺𝒰_>𝒵²_{jj}))`.
/// Returns the fixed point and the number of sweeps used.
#[allow(clippy::too_many_arguments)]
pub fn picard_x(
    z_path: &[Vec<RealField>],
    s0: &[RealField],
    m: f64,
    lambda: f64,
    dt: f64,
    level: i32,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<Vec<RealField>>, usize)> {
    let grid: Arc<Grid> = s0[0].grid().clone();
    let n = s0.len();
    let nf = NaiveFourier::new(&grid)?;
    let k2 = nf.k2();
    let prof = block_profiles(&nf.radii());
    let high: Vec<f64> = (0..k2.len())
        .map(|q| {
            prof.iter()
                .enumerate()
                .filter(|(b, _)| *b as i32 - 1 > level)
                .map(|(_, p)| p[q])
                .sum()
        })
        .collect();
    let sites = grid.n_sites();
    let cov = lattice_covariance(&grid, m)?;
    let a = cov(0, 0);
    let decay: Vec<f64> = k2.iter().map(|k| (-(m + k) * dt).exp()).collect();
    let weight: Vec<f64> = k2
        .iter()
        .map(|k| {
            let x = (m + k) * dt;
            if x.abs() < 1e-12 {
                dt
            } else {
                -(-x).exp_m1() / x * dt
            }
        })
        .collect();
    let evolve = |init: Vec<Complex64>, src: &[Vec<f64>]| -> Vec<Vec<f64>> {
        let mut u = init;
        let mut out = Vec::with_capacity(src.len());
        for s in src {
            out.push(nf.inverse(&u));
            let sh = nf.forward(s);
            for q in 0..u.len() {
                u[q] = decay[q] * u[q] + weight[q] * sh[q];
            }
        }
        out
    };
    let blocks = |f: &[f64]| -> Vec<Vec<f64>> { prof.iter().map(|p| nf.filter(f, p)).collect() };
    let para = |fb: &[Vec<f64>], gb: &[Vec<f64>]| -> Vec<f64> {
        let mut out = vec![0.0; sites];
        for (j, gj) in gb.iter().enumerate() {
            for fi in fb.iter().take(j.saturating_sub(1)) {
                for s in 0..sites {
                    out[s] += fi[s] * gj[s];
                }
            }
        }
        out
    };
    let steps = z_path.len();
    let c = -lambda / n as f64;
    // stationary cubic tree along the path
    let mut tree3 = Vec::with_capacity(n);
    for i in 0..n {
        let src: Vec<Vec<f64>> = z_path
            .iter()
            .map(|z| {
                (0..sites)
                    .map(|s| {
                        let zi = z[i].values()[s];
                        let sq: f64 = z.iter().map(|f| f.values()[s].powi(2)).sum();
                        zi * sq - (n as f64 + 2.0) * a * zi
                    })
                    .collect()
            })
            .collect();
        tree3.push(evolve(nf.forward(s0[i].values()), &src));
    }
    // high-passed Wick squares per time and pair
    let hw: Vec<Vec<Vec<Vec<Vec<f64>>>>> = z_path
        .iter()
        .map(|z| {
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            let w: Vec<f64> = (0..sites)
                                .map(|s| {
                                    z[i].values()[s] * z[j].values()[s]
                                        - if i == j { a } else { 0.0 }
                                })
                                .collect();
                            blocks(&nf.filter(&w, &high))
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let mut x: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|i| {
            tree3[i]
                .iter()
                .map(|v| v.iter().map(|t| c * t).collect())
                .collect()
        })
        .collect();
    let mut iters = 0;
    loop {
        iters += 1;
        let mut next = Vec::with_capacity(n);
        for i in 0..n {
            let src: Vec<Vec<f64>> = (0..steps)
                .map(|t| {
                    let mut acc = vec![0.0; sites];
                    let xi = blocks(&x[i][t]);
                    for j in 0..n {
                        let xj = blocks(&x[j][t]);
                        let p1 = para(&xj, &hw[t][i][j]);
                        let p2 = para(&xi, &hw[t][j][j]);
                        for s in 0..sites {
                            acc[s] += 2.0 * p1[s] + p2[s];
                        }
                    }
                    acc
                })
                .collect();
            let integ = evolve(vec![Complex64::new(0.0, 0.0); k2.len()], &src);
            let xi: Vec<Vec<f64>> = (0..steps)
                .map(|t| {
                    (0..sites)
                        .map(|s| c * (tree3[i][t][s] + integ[t][s]))
                        .collect()
                })
                .collect();
            next.push(xi);
        }
        let diff = next
            .iter()
            .zip(&x)
            .flat_map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .flat_map(|(u, v)| u.iter().zip(v).map(|(p, q)| (p - q).abs()))
            })
            .fold(0.0, f64::max);
        x = next;
        if diff < tol || iters >= max_iter {
            break;
        }
    }
    let out = (0..steps)
        .map(|t| {
            (0..n)
                .map(|i| RealField::new(&grid, x[i][t].clone()))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((out, iters))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::create_grid;

    #[test]
    fn ou_law_examples() {
        assert_eq!(ou_mode_law(1.0, 0.0, 0.0).unwrap(), (0.5, 0.5));
        let (v, c) = ou_mode_law(1.5, 2.0, 2f64.ln() / 3.5).unwrap();
        assert!((c - v / 2.0).abs() < 1e-15);
        assert!(ou_mode_law(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn naive_fourier_round_trip() {
        let g = create_grid(2, 4, 2.0 * PI).unwrap();
        let f = RealField::from_fn(&g, |x| (x[0] + 2.0 * x[1]).sin() + 0.3);
        let nf = NaiveFourier::new(&g).unwrap();
        let back = nf.inverse(&nf.forward(f.values()));
        for (a, b) in back.iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn wick_pairings() {
        let cov = |x: usize, y: usize| if x == y { 2.0 } else { 0.5 };
        let v = |site, comps: &[usize], wick| WickVertex {
            site,
            components: comps.to_vec(),
            wick,
        };
        assert_eq!(
            wick_moment_oracle(&cov, &[v(0, &[0, 0], true)]).unwrap(),
            0.0
        );
        let two = wick_moment_oracle(&cov, &[v(0, &[0, 0], true), v(1, &[0, 0], true)]).unwrap();
        assert!((two - 2.0 * 0.25).abs() < 1e-15);
        let plain =
            wick_moment_oracle(&cov, &[v(0, &[0, 0, 0], false), v(1, &[0], false)]).unwrap();
        assert!((plain - 3.0 * 0.5 * 2.0).abs() < 1e-15);
        assert!(wick_moment_oracle(&cov, &[v(0, &[0, 0, 0, 0], false)]).is_err());
    }

    #[test]
    fn variance_law_iid_l1() {
        let s = variance_scaling_oracle(1, 16, DependencyPattern::IidTuples, 20_000, 1).unwrap();
        assert!((s - 1.0).abs() < 0.05, "{s}");
        let f =
            variance_scaling_oracle(1, 16, DependencyPattern::FullyDependent, 20_000, 1).unwrap();
        assert!((f / 16.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn metropolis_size_guard() {
        assert!(mcmc_invariant_sampler(16, 2.0 * PI, 1, 1.0, 0.0, 1, 1, 0).is_err());
    }
}
