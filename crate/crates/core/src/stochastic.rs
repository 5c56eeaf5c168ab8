//! White-noise streams, the stationary linear field, Wick objects and the
//! tree statistics built from them.

use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::besov::{self, Blocks, DyadicPartition};
use crate::error::{Error, Result};
use crate::map_idx;
use crate::torus::{
    self, from_spectrum, to_spectrum, ExpFilter, Grid, Multiplier, RealField, Spectrum,
};

/// What a random stream is used for; part of the stream identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Purpose {
    Init = 0,
    Increment = 1,
    Auxiliary = 2,
}

/// Counter-based noise: every draw is a pure function of
/// `(master_seed, component, purpose, step)`.
#[derive(Clone, Debug)]
pub struct NoiseStreams {
    master_seed: u64,
    n: usize,
    key: [u8; 32],
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn make_streams(seed: u64, n: usize) -> Result<NoiseStreams> {
    if n < 1 {
        return Err(Error::param("N", "need at least one component"));
    }
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    Ok(NoiseStreams {
        master_seed: seed,
        n,
        key,
    })
}

impl NoiseStreams {
    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn components(&self) -> usize {
        self.n
    }

    pub fn rng(&self, component: usize, purpose: Purpose, step: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(component as u64 * 4 + purpose as u64);
        rng.set_word_pos((step as u128) << 36);
        rng
    }
}

/// Hermitian Gaussian spectrum with `E|c_k|² = var[k]`; one draw per conjugate
/// pair, in ascending storage order.
pub fn gaussian_spectrum(grid: &Arc<Grid>, var: &[f64], rng: &mut ChaCha8Rng) -> Spectrum {
    let partner = grid.partner();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.n_sites()];
    for idx in 0..grid.n_sites() {
        let p = partner[idx];
        if p < idx {
            continue;
        }
        let a: f64 = StandardNormal.sample(rng);
        if p == idx {
            coeffs[idx] = Complex64::new(var[idx].sqrt() * a, 0.0);
        } else {
            let b: f64 = StandardNormal.sample(rng);
            let c = Complex64::new(a, b) * (var[idx] / 2.0).sqrt();
            coeffs[idx] = c;
            coeffs[p] = c.conj();
        }
    }
    Spectrum::new(grid, coeffs).expect("grid-sized spectrum")
}

/// Spectrum of `∫ξ` over one step of length `dt`: `E|c_k|² = dt` for all `k`.
pub fn white_increment(grid: &Arc<Grid>, dt: f64, rng: &mut ChaCha8Rng) -> Result<Spectrum> {
    if !(dt > 0.0) {
        return Err(Error::param(
            "dt",
            format!("time step must be > 0, got {dt}"),
        ));
    }
    Ok(gaussian_spectrum(grid, &vec![dt; grid.n_sites()], rng))
}

fn check_mass(m: f64) -> Result<()> {
    if !(m > 0.0) {
        return Err(Error::param("m", format!("mass must be > 0, got {m}")));
    }
    Ok(())
}

/// Stationary per-mode variances `1/(2(m+|k|²))`.
pub fn stationary_variances(grid: &Grid, m: f64) -> Result<Vec<f64>> {
    check_mass(m)?;
    Ok(grid.k2().iter().map(|k2| 0.5 / (m + k2)).collect())
}

pub fn ou_init_stationary(grid: &Arc<Grid>, m: f64, rng: &mut ChaCha8Rng) -> Result<RealField> {
    let var = stationary_variances(grid, m)?;
    Ok(from_spectrum(&gaussian_spectrum(grid, &var, rng)))
}

/// Exact OU update `ẑ ← e^{-λ_k dt} ẑ + s_k dW_k` with
/// `s_k² = (1 - e^{-2λ_k dt}) / (2 λ_k dt)`, `λ_k = m + |k|²`.
#[derive(Clone, Debug)]
pub struct OuStepper {
    decay: Multiplier,
    noise: Multiplier,
    dt: f64,
}

impl OuStepper {
    pub fn new(grid: &Grid, m: f64, dt: f64) -> Result<Self> {
        check_mass(m)?;
        if !(dt > 0.0) {
            return Err(Error::param(
                "dt",
                format!("time step must be > 0, got {dt}"),
            ));
        }
        let decay = Multiplier::radial(grid, |k2| (-(m + k2) * dt).exp())?;
        let noise = Multiplier::radial(grid, |k2| {
            let l = m + k2;
            (-(-2.0 * l * dt).exp_m1() / (2.0 * l * dt)).sqrt()
        })?;
        Ok(OuStepper { decay, noise, dt })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Filter a white increment into the OU noise term `η`.
    pub fn noise_term(&self, increment: &Spectrum) -> Spectrum {
        let mut eta = increment.clone();
        eta.scale_by(&self.noise);
        eta
    }

    pub fn step_spectrum(&self, z: &mut Spectrum, eta: &Spectrum) {
        for ((c, e), a) in z
            .coeffs_mut()
            .iter_mut()
            .zip(eta.coeffs())
            .zip(self.decay.values())
        {
            *c = *c * *a + *e;
        }
    }
}

pub fn ou_step(z: &RealField, dt: f64, m: f64, rng: &mut ChaCha8Rng) -> Result<RealField> {
    let stepper = OuStepper::new(z.grid(), m, dt)?;
    let inc = white_increment(z.grid(), dt, rng)?;
    let mut s = to_spectrum(z);
    stepper.step_spectrum(&mut s, &stepper.noise_term(&inc));
    Ok(from_spectrum(&s))
}

/// `a = E[Z(x)²] = side^{-d} Σ_k 1/(2(m+|k|²))`
pub fn wick_a(grid: &Grid, m: f64) -> Result<f64> {
    Ok(stationary_variances(grid, m)?.iter().sum::<f64>() / grid.volume())
}

/// `Z_i² - a` when `diagonal`, else `Z_i Z_j`.
pub fn wick2(zi: &RealField, zj: &RealField, a: f64, diagonal: bool) -> Result<RealField> {
    if diagonal {
        zi.zip_map(zj, |x, _| x * x - a)
    } else {
        zi.mul(zj)
    }
}

/// `Z_i Z_j² - c a Z_i` with `c = 3` when `same` (i = j), else `c = 1`.
pub fn wick3(zi: &RealField, zj: &RealField, a: f64, same: bool) -> Result<RealField> {
    let c = if same { 3.0 } else { 1.0 };
    zi.zip_map(zj, |x, y| x * y * y - c * a * x)
}

/// `Σ_j 𝒵³_{ijj} = Z_i (Σ_j Z_j² - (N+2) a)` given `Σ_j Z_j²`.
pub fn wick3_aggregate(zi: &RealField, sum_sq: &RealField, a: f64, n: usize) -> Result<RealField> {
    let shift = (n as f64 + 2.0) * a;
    zi.zip_map(sum_sq, |x, s| x * (s - shift))
}

pub fn sum_of_squares(fields: &[RealField]) -> RealField {
    let mut acc = RealField::zeros(fields[0].grid());
    for f in fields {
        for (a, v) in acc.values_mut().iter_mut().zip(f.values()) {
            *a += v * v;
        }
    }
    acc
}

/// One exponential-filter step of `𝓛u = source`.
pub fn tree30_step(state: &RealField, source: &RealField, dt: f64, m: f64) -> Result<RealField> {
    check_mass(m)?;
    ExpFilter::new(state.grid(), m, dt)?.step(state, source)
}

/// Burn-in horizon for the stationary integrals `Ĩ`.
pub fn burn_in_time(m: f64, dt: f64) -> f64 {
    (10.0 / m).max(10.0 * dt)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BtildeEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
}

pub const DEFAULT_BTILDE_SAMPLES: usize = 512;

/// Monte-Carlo estimate of the site-averaged `E[𝒟^{-1}(Z²-a) ∘ (Z²-a)]` under
/// the stationary law.
pub fn wick_btilde(grid: &Arc<Grid>, m: f64, samples: usize, seed: u64) -> Result<BtildeEstimate> {
    if samples < 1 {
        return Err(Error::param("samples", "need at least one sample"));
    }
    let a = wick_a(grid, m)?;
    let part = DyadicPartition::new(grid);
    let green = torus::green_multiplier(grid, m)?;
    let streams = make_streams(seed, 1)?;
    let var = stationary_variances(grid, m)?;
    let vals: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|n| {
            let mut rng = streams.rng(0, Purpose::Auxiliary, n as u64);
            let z = from_spectrum(&gaussian_spectrum(grid, &var, &mut rng));
            let w = z.map(|v| v * v - a);
            let dw = torus::apply_multiplier(&w, &green).expect("same grid");
            let r = besov::resonant_blocks(
                &part.decompose(&dw).expect("same grid"),
                &part.decompose(&w).expect("same grid"),
            );
            r.mean()
        })
        .collect();
    let (mean, se) = mean_stderr(&vals);
    Ok(BtildeEstimate {
        value: mean,
        stderr: se,
        samples,
    })
}

pub(crate) fn mean_stderr(vals: &[f64]) -> (f64, f64) {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    if vals.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `c₁` of `𝒵̃²²_{ij,kl}`.
pub fn c1(i: usize, j: usize, k: usize, l: usize) -> f64 {
    if i == j && j == k && k == l {
        1.0
    } else if (i == k && j == l && i != j) || (i == l && j == k && i != j) {
        0.5
    } else {
        0.0
    }
}

/// `c₂` of `𝒵̃³²_{ijj,ik}`.
pub fn c2(i: usize, j: usize, k: usize) -> f64 {
    if j == k && j == i {
        3.0
    } else if j == k {
        1.0
    } else {
        0.0
    }
}

/// Renormalized stochastic objects at one time point.
///
/// `s[i]` holds the aggregated tree `Σ_j 𝒵̃³⁰_{ijj}`; `pair30` holds the
/// individually tracked `𝒵̃³⁰_{ijj}`. All indices are zero-based.
#[derive(Clone, Debug)]
pub struct TreeSet {
    pub grid: Arc<Grid>,
    pub partition: Arc<DyadicPartition>,
    pub m: f64,
    pub a: f64,
    pub btilde: f64,
    pub t: f64,
    pub z: Vec<RealField>,
    pub s: Vec<RealField>,
    pub pair30: Vec<((usize, usize), RealField)>,
    pub level: Option<i32>,
}

impl TreeSet {
    pub fn n(&self) -> usize {
        self.z.len()
    }

    fn idx(&self, i: usize) -> Result<()> {
        if i >= self.n() {
            return Err(Error::param(
                "index",
                format!("component {i} outside 0..{}", self.n()),
            ));
        }
        Ok(())
    }

    pub fn wick2(&self, i: usize, j: usize) -> Result<RealField> {
        self.idx(i)?;
        self.idx(j)?;
        wick2(&self.z[i], &self.z[j], self.a, i == j)
    }

    pub fn wick3(&self, i: usize, j: usize) -> Result<RealField> {
        self.idx(i)?;
        self.idx(j)?;
        wick3(&self.z[i], &self.z[j], self.a, i == j)
    }

    pub fn tree30_agg(&self, i: usize) -> Result<&RealField> {
        self.idx(i)?;
        Ok(&self.s[i])
    }

    /// `𝒵̃³⁰_{ijj}` (symmetric in its noise slots, so `(j,i,j)` and `(j,j,i)` coincide).
    pub fn tree30(&self, i: usize, j: usize) -> Result<&RealField> {
        self.idx(i)?;
        self.idx(j)?;
        self.pair30
            .iter()
            .find(|((a, b), _)| *a == i && *b == j)
            .map(|(_, f)| f)
            .ok_or_else(|| Error::Unsupported(format!("tree 30 for ({i},{j},{j}) not tracked")))
    }

    /// `𝒵̃²²_{ij,kl} = 𝒟^{-1}(𝒵²_{ij}) ∘ 𝒵²_{kl} - c₁ b̃`
    pub fn tree22(&self, i: usize, j: usize, k: usize, l: usize) -> Result<RealField> {
        let w1 = self.wick2(i, j)?;
        let w2 = self.wick2(k, l)?;
        let dw = torus::green(&w1, self.m)?;
        let r = besov::resonant(&dw, &w2, &self.partition)?;
        let c = c1(i, j, k, l) * self.btilde;
        Ok(r.map(|v| v - c))
    }

    /// `𝒵̃³¹_{ijj,k} = 𝒵̃³⁰_{ijj} ∘ Z_k`
    pub fn tree31(&self, i: usize, j: usize, k: usize) -> Result<RealField> {
        self.idx(k)?;
        besov::resonant(self.tree30(i, j)?, &self.z[k], &self.partition)
    }

    /// `𝒵̃³²_{ijj,ik} = 𝒵̃³⁰_{ijj} ∘ 𝒵²_{ik} - c₂ b̃ Z_j`
    pub fn tree32(&self, i: usize, j: usize, k: usize) -> Result<RealField> {
        let r = besov::resonant(self.tree30(i, j)?, &self.wick2(i, k)?, &self.partition)?;
        let c = c2(i, j, k) * self.btilde;
        r.zip_map(&self.z[j], |v, zj| v - c * zj)
    }

    /// `Σ_l 𝒵̃³²_{llj,ij} = S_j ∘ 𝒵²_{ij} - (1 + 2δ_{ij}) b̃ Z_i`
    pub fn tree32_agg(&self, i: usize, j: usize, s_j_blocks: Option<&Blocks>) -> Result<RealField> {
        let w = self.wick2(i, j)?;
        let wb = self.partition.decompose(&w)?;
        let r = match s_j_blocks {
            Some(b) => besov::resonant_blocks(b, &wb),
            None => besov::resonant_blocks(&self.partition.decompose(&self.s[j])?, &wb),
        };
        let c = if i == j { 3.0 } else { 1.0 } * self.btilde;
        r.zip_map(&self.z[i], |v, zi| v - c * zi)
    }
}

/// How the `N` linear fields are produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ComponentPattern {
    Independent,
    /// All components equal to component 0 (dependence control).
    Replicated,
}

/// Evolves `Z`, the aggregated `𝒵̃³⁰` and any tracked pair trees.
#[derive(Debug)]
pub struct TreeEvolver {
    grid: Arc<Grid>,
    partition: Arc<DyadicPartition>,
    streams: NoiseStreams,
    ou: OuStepper,
    filter: ExpFilter,
    m: f64,
    a: f64,
    btilde: f64,
    pattern: ComponentPattern,
    z: Vec<Spectrum>,
    s: Vec<Spectrum>,
    pairs: Vec<(usize, usize)>,
    pair30: Vec<Spectrum>,
    step: u64,
}

impl TreeEvolver {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        grid: &Arc<Grid>,
        n: usize,
        m: f64,
        dt: f64,
        seed: u64,
        btilde: f64,
        pattern: ComponentPattern,
        pairs: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let streams = make_streams(seed, n)?;
        let var = stationary_variances(grid, m)?;
        let z: Vec<Spectrum> = (0..n)
            .map(|i| {
                let c = match pattern {
                    ComponentPattern::Independent => i,
                    ComponentPattern::Replicated => 0,
                };
                gaussian_spectrum(grid, &var, &mut streams.rng(c, Purpose::Init, 0))
            })
            .collect();
        for &(i, j) in &pairs {
            if i >= n || j >= n {
                return Err(Error::param(
                    "pairs",
                    format!("pair ({i},{j}) outside 0..{n}"),
                ));
            }
        }
        let npairs = pairs.len();
        Ok(TreeEvolver {
            grid: grid.clone(),
            partition: Arc::new(DyadicPartition::new(grid)),
            ou: OuStepper::new(grid, m, dt)?,
            filter: ExpFilter::new(grid, m, dt)?,
            m,
            a: wick_a(grid, m)?,
            btilde,
            pattern,
            s: vec![Spectrum::zeros(grid); n],
            pair30: vec![Spectrum::zeros(grid); npairs],
            z,
            pairs,
            streams,
            step: 0,
        })
    }

    pub fn t(&self) -> f64 {
        self.step as f64 * self.ou.dt()
    }

    pub fn step(&mut self) -> Result<()> {
        let n = self.z.len();
        let work = self.grid.n_sites() * n;
        let zr: Vec<RealField> = map_idx(work, n, |i| from_spectrum(&self.z[i]));
        let sum_sq = sum_of_squares(&zr);
        let a = self.a;
        let src: Vec<Spectrum> = map_idx(work, n, |i| {
            to_spectrum(&wick3_aggregate(&zr[i], &sum_sq, a, n).expect("same grid"))
        });
        for (s, f) in self.s.iter_mut().zip(&src) {
            self.filter.step_spectrum(s, f);
        }
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            let f = to_spectrum(&wick3(&zr[i], &zr[j], a, i == j)?);
            self.filter.step_spectrum(&mut self.pair30[k], &f);
        }
        let step = self.step + 1;
        let dt = self.ou.dt();
        let grid = &self.grid;
        let streams = &self.streams;
        let ou = &self.ou;
        match self.pattern {
            ComponentPattern::Independent => {
                let old = &self.z;
                self.z = map_idx(work, n, |i| {
                    let inc =
                        white_increment(grid, dt, &mut streams.rng(i, Purpose::Increment, step))
                            .expect("positive dt");
                    let mut z = old[i].clone();
                    ou.step_spectrum(&mut z, &ou.noise_term(&inc));
                    z
                });
            }
            ComponentPattern::Replicated => {
                let inc = white_increment(grid, dt, &mut streams.rng(0, Purpose::Increment, step))?;
                let eta = ou.noise_term(&inc);
                for z in self.z.iter_mut() {
                    ou.step_spectrum(z, &eta);
                }
            }
        }
        self.step = step;
        if let Some(i) = self
            .s
            .iter()
            .position(|s| s.coeffs().iter().any(|c| !c.re.is_finite()))
        {
            return Err(Error::BlowUp {
                t: self.t(),
                component: i,
                detail: "aggregated tree 30 non-finite".into(),
            });
        }
        Ok(())
    }

    pub fn advance(&mut self, steps: usize) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    pub fn snapshot(&self) -> TreeSet {
        TreeSet {
            grid: self.grid.clone(),
            partition: self.partition.clone(),
            m: self.m,
            a: self.a,
            btilde: self.btilde,
            t: self.t(),
            z: map_idx(self.grid.n_sites() * self.z.len(), self.z.len(), |i| {
                from_spectrum(&self.z[i])
            }),
            s: map_idx(self.grid.n_sites() * self.s.len(), self.s.len(), |i| {
                from_spectrum(&self.s[i])
            }),
            pair30: self
                .pairs
                .iter()
                .zip(&self.pair30)
                .map(|(p, s)| (*p, from_spectrum(s)))
                .collect(),
            level: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QStats {
    pub q0: f64,
    pub q1: f64,
    pub q2: f64,
}

/// Streaming accumulator for `Q_N^0, Q_N^1, Q_N^2` over snapshots taken every
/// `dt_sample`.
#[derive(Debug)]
pub struct QAccumulator {
    n: usize,
    kappa: f64,
    dt_sample: f64,
    q0_sum: f64,
    q2_pairs: Vec<f64>,
    s_history: Vec<Vec<Spectrum>>,
}

impl QAccumulator {
    pub fn new(n: usize, kappa: f64, dt_sample: f64) -> Self {
        QAccumulator {
            n,
            kappa,
            dt_sample,
            q0_sum: 0.0,
            q2_pairs: vec![0.0; n * n],
            s_history: Vec::new(),
        }
    }

    pub fn snapshots(&self) -> usize {
        self.s_history.len()
    }

    pub fn push(&mut self, trees: &TreeSet) -> Result<()> {
        if trees.n() != self.n {
            return Err(Error::ShapeMismatch(format!(
                "tree set has {} components, accumulator {}",
                trees.n(),
                self.n
            )));
        }
        let dts = self.dt_sample;
        let k = self.kappa;
        let n = self.n;
        let work = trees.grid.n_sites() * n;
        let s_spec: Vec<Spectrum> = map_idx(work, n, |i| to_spectrum(&trees.s[i]));
        self.q0_sum += s_spec
            .iter()
            .map(|s| torus::spectrum_sobolev_norm2(s, 0.5 - 2.0 * k))
            .sum::<f64>()
            * dts;
        let s_blocks: Vec<Blocks> = map_idx(work * 4, n, |i| {
            trees.partition.decompose(&trees.s[i]).expect("same grid")
        });
        let contrib: Vec<f64> = map_idx(work * n * 4, n * n, |ij| {
            let (i, j) = (ij / n, ij % n);
            let f = trees
                .tree32_agg(i, j, Some(&s_blocks[j]))
                .expect("valid indices");
            torus::sobolev_norm2(&f, -0.5 - 2.0 * k) * dts
        });
        for (acc, c) in self.q2_pairs.iter_mut().zip(contrib) {
            *acc += c;
        }
        self.s_history.push(s_spec);
        Ok(())
    }

    pub fn finish(&self) -> Result<QStats> {
        let snaps = self.s_history.len();
        if snaps == 0 {
            return Err(Error::InsufficientData(
                "no snapshots in the Q window".into(),
            ));
        }
        let n = self.n as f64;
        let q0 = self.q0_sum / (n * n);
        let alpha = 0.25 - 2.0 * self.kappa;
        let dts = self.dt_sample;
        let mut w = 0.0;
        for i in 0..self.n {
            let mut l2 = 0.0;
            let mut frac = 0.0;
            for a in 0..snaps {
                let fa = &self.s_history[a][i];
                l2 += fa.coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>() * dts;
                for b in (a + 1)..snaps {
                    let fb = &self.s_history[b][i];
                    let d2: f64 = fa
                        .coeffs()
                        .iter()
                        .zip(fb.coeffs())
                        .map(|(x, y)| (x - y).norm_sqr())
                        .sum();
                    let lag = (b - a) as f64 * dts;
                    frac += 2.0 * d2 / lag.powf(1.0 + 2.0 * alpha) * dts * dts;
                }
            }
            w += l2 + frac;
        }
        let q1 = w / (n * n);
        let mut q2 = 0.0;
        for i in 0..self.n {
            let inner: f64 = (0..self.n)
                .map(|j| self.q2_pairs[i * self.n + j].sqrt() / n)
                .sum();
            q2 += inner * inner;
        }
        q2 /= n * n;
        Ok(QStats { q0, q1, q2 })
    }
}

/// Run the tree dynamics for burn-in plus `snapshots` samples spaced `stride`
/// steps apart and return the Q statistics.
#[allow(clippy::too_many_arguments)]
pub fn q_stats_run(
    grid: &Arc<Grid>,
    n: usize,
    m: f64,
    dt: f64,
    kappa: f64,
    btilde: f64,
    seed: u64,
    snapshots: usize,
    stride: usize,
    pattern: ComponentPattern,
) -> Result<QStats> {
    let mut ev = TreeEvolver::new(grid, n, m, dt, seed, btilde, pattern, Vec::new())?;
    let burn = (burn_in_time(m, dt) / dt).ceil() as usize;
    ev.advance(burn)?;
    let mut acc = QAccumulator::new(n, kappa, dt * stride as f64);
    for _ in 0..snapshots {
        ev.advance(stride)?;
        acc.push(&ev.snapshot())?;
    }
    acc.finish()
}
