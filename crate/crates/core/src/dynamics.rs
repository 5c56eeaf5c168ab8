//! Time integration of the renormalized N-component dynamics, the linear
//! field, the `X` equation, the derived fields `Y`, `φ`, and the discrete
//! energy audit.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::besov::{self, Blocks, DyadicPartition};
use crate::error::{Error, Result};
use crate::map_idx;
use crate::measures;
use crate::stochastic::{
    self, make_streams, wick3_aggregate, NoiseStreams, OuStepper, Purpose, TreeSet,
};
use crate::torus::{
    self, from_spectrum, to_spectrum, ExpFilter, Grid, Multiplier, RealField, Spectrum,
};

pub type FieldSystem = Vec<RealField>;

fn default_side() -> f64 {
    2.0 * std::f64::consts::PI
}
fn default_kappa() -> f64 {
    0.1
}
fn default_cl() -> f64 {
    1.0
}
fn default_stride() -> usize {
    1
}
fn default_btilde_samples() -> usize {
    stochastic::DEFAULT_BTILDE_SAMPLES
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub d: usize,
    #[serde(rename = "M")]
    pub m_points: usize,
    #[serde(default = "default_side")]
    pub side: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub m: f64,
    pub lambda: f64,
    pub dt: f64,
    #[serde(rename = "T_burn", default, skip_serializing_if = "Option::is_none")]
    pub t_burn: Option<f64>,
    #[serde(rename = "T_sample")]
    pub t_sample: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(
        rename = "L_override",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub l_override: Option<i32>,
    #[serde(rename = "C_L", default = "default_cl")]
    pub c_l: f64,
    #[serde(default)]
    pub dealias: bool,
    #[serde(default)]
    pub energy_audit_every: usize,
    #[serde(default = "default_stride")]
    pub sample_every: usize,
    #[serde(default = "default_btilde_samples")]
    pub btilde_samples: usize,
    #[serde(default)]
    pub checkpoint_every: usize,
}

fn cfg_err(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

impl SimConfig {
    /// Minimal configuration with defaults for every optional key.
    pub fn new(
        d: usize,
        m_points: usize,
        n: usize,
        m: f64,
        lambda: f64,
        dt: f64,
        t_sample: f64,
    ) -> Self {
        SimConfig {
            d,
            m_points,
            side: default_side(),
            n,
            m,
            lambda,
            dt,
            t_burn: None,
            t_sample,
            seed: 0,
            kappa: default_kappa(),
            l_override: None,
            c_l: default_cl(),
            dealias: false,
            energy_audit_every: 0,
            sample_every: default_stride(),
            btilde_samples: default_btilde_samples(),
            checkpoint_every: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.d) {
            return Err(cfg_err("d", format!("must be 1, 2 or 3, got {}", self.d)));
        }
        if self.m_points < 4 || !self.m_points.is_power_of_two() {
            return Err(cfg_err(
                "M",
                format!("must be a power of two >= 4, got {}", self.m_points),
            ));
        }
        if !(self.side.is_finite() && self.side > 0.0) {
            return Err(cfg_err("side", "must be positive"));
        }
        if self.n < 1 {
            return Err(cfg_err("N", "must be >= 1"));
        }
        if !(self.m.is_finite() && self.m > 0.0) {
            return Err(cfg_err("m", "must be > 0"));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(cfg_err("lambda", "must be >= 0"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(cfg_err("dt", "must be > 0"));
        }
        if let Some(tb) = self.t_burn {
            if !(tb.is_finite() && tb >= 0.0) {
                return Err(cfg_err("T_burn", "must be >= 0"));
            }
        }
        if !(self.t_sample.is_finite() && self.t_sample > 0.0) {
            return Err(cfg_err("T_sample", "must be > 0"));
        }
        if !(self.kappa > 0.0 && self.kappa < 0.5) {
            return Err(cfg_err("kappa", "must lie in (0, 0.5)"));
        }
        if !(self.c_l.is_finite() && self.c_l > 0.0) {
            return Err(cfg_err("C_L", "must be > 0"));
        }
        if self.sample_every < 1 {
            return Err(cfg_err("sample_every", "must be >= 1"));
        }
        if self.btilde_samples < 2 {
            return Err(cfg_err("btilde_samples", "must be >= 2"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Arc<Grid>> {
        torus::create_grid(self.d, self.m_points, self.side)
    }

    pub fn burn_in(&self) -> f64 {
        self.t_burn
            .unwrap_or_else(|| stochastic::burn_in_time(self.m, self.dt))
    }

    pub fn burn_steps(&self) -> u64 {
        (self.burn_in() / self.dt).round() as u64
    }

    pub fn sample_steps(&self) -> u64 {
        ((self.t_sample / self.dt).round() as u64).max(1)
    }

    /// Non-fatal accuracy notes.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.dt * self.m > 0.5 {
            w.push(format!(
                "dt*m = {:.3} > 0.5: time discretization error may be large",
                self.dt * self.m
            ));
        }
        w
    }
}

/// `m_eff = m - (N+2)/N λ a + 3(N+2)/N² λ² b̃`
pub fn effective_mass(cfg: &SimConfig, a_lat: f64, btilde: f64) -> f64 {
    cfg.m + counterterm(cfg.n, cfg.lambda, a_lat, btilde)
}

fn counterterm(n: usize, lambda: f64, a: f64, btilde: f64) -> f64 {
    let nf = n as f64;
    -(nf + 2.0) / nf * lambda * a + quadratic_counterterm(n, lambda, btilde)
}

/// `3(N+2)/N² λ² b̃`
pub fn quadratic_counterterm(n: usize, lambda: f64, btilde: f64) -> f64 {
    let nf = n as f64;
    3.0 * (nf + 2.0) / (nf * nf) * lambda * lambda * btilde
}

/// Discrete `𝓘`: `u⁰ = 0`, `u^{n+1} = e^{-𝒟dt}uⁿ + φ₁(λ_k dt) dt sⁿ`.
pub fn duhamel_path(source: &[RealField], dt: f64, m: f64) -> Result<Vec<RealField>> {
    if source.is_empty() {
        return Ok(Vec::new());
    }
    if !(m > 0.0) {
        return Err(Error::param("m", format!("mass must be > 0, got {m}")));
    }
    let grid = source[0].grid();
    let filt = ExpFilter::new(grid, m, dt)?;
    let mut u = Spectrum::zeros(grid);
    let mut out = Vec::with_capacity(source.len());
    for s in source {
        out.push(from_spectrum(&u));
        filt.step_spectrum(&mut u, &to_spectrum(s));
    }
    Ok(out)
}

/// `2^L = 2C²(λ²/N² Σ‖𝒵²_{ij}‖²) + 2C²((λ/N) Σ‖𝒵²_{jj}‖)² + 1`, norms in `C^{-1-κ}`.
pub fn choose_level(
    offdiag_sq_sum: f64,
    diag_sum: f64,
    lambda: f64,
    n: usize,
    c_l: f64,
    j_max: i32,
) -> i32 {
    let nf = n as f64;
    let c2 = c_l * c_l;
    let rhs = 2.0 * c2 * (lambda * lambda / (nf * nf) * offdiag_sq_sum)
        + 2.0 * c2 * (lambda / nf * diag_sum).powi(2)
        + 1.0;
    let l = rhs.log2().ceil();
    (l as i32).clamp(-1, j_max)
}

/// `choose_level` with the tree norms taken from `trees`.
pub fn choose_l(trees: &TreeSet, lambda: f64, c_l: f64, kappa: f64) -> Result<i32> {
    let n = trees.n();
    let part = &trees.partition;
    let bp = besov::BesovParams::holder(-1.0 - kappa);
    let mut sq = 0.0;
    let mut diag = 0.0;
    for i in 0..n {
        for j in 0..n {
            let v = besov::besov_norm(&trees.wick2(i, j)?, &bp, part);
            sq += v * v;
            if i == j {
                diag += v;
            }
        }
    }
    Ok(choose_level(sq, diag, lambda, n, c_l, part.j_max()))
}

/// Mutable simulation state. `x` is present once the sampling phase started.
#[derive(Clone, Debug)]
pub struct SystemState {
    pub step: u64,
    pub t: f64,
    pub phi: FieldSystem,
    pub z: FieldSystem,
    pub s: FieldSystem,
    pub x: Option<FieldSystem>,
}

impl SystemState {
    /// `Y_i = Φ_i - Z_i - X_i`
    pub fn y(&self) -> Result<FieldSystem> {
        let x = self.x.as_ref().ok_or_else(|| {
            Error::Unsupported("X is not tracked before the sampling phase".into())
        })?;
        self.phi
            .iter()
            .zip(&self.z)
            .zip(x)
            .map(|((p, z), x)| p.sub(z)?.sub(x))
            .collect()
    }
}

/// Operator tables and constants shared by every step.
#[derive(Debug)]
pub struct StepContext {
    pub grid: Arc<Grid>,
    pub partition: Arc<DyadicPartition>,
    pub n: usize,
    pub m: f64,
    pub lambda: f64,
    pub dt: f64,
    pub a: f64,
    pub btilde: f64,
    pub m_eff: f64,
    pub level: i32,
    pub dealias: bool,
    ou: OuStepper,
    eff: ExpFilter,
    lin: ExpFilter,
    high: Multiplier,
}

impl StepContext {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        grid: &Arc<Grid>,
        n: usize,
        m: f64,
        lambda: f64,
        dt: f64,
        btilde: f64,
        level: i32,
        dealias: bool,
    ) -> Result<Self> {
        let a = stochastic::wick_a(grid, m)?;
        let m_eff = m + counterterm(n, lambda, a, btilde);
        let partition = Arc::new(DyadicPartition::new(grid));
        let high = besov::high_pass_multiplier(&partition, level);
        Ok(StepContext {
            grid: grid.clone(),
            n,
            m,
            lambda,
            dt,
            a,
            btilde,
            m_eff,
            level,
            dealias,
            ou: OuStepper::new(grid, m, dt)?,
            eff: ExpFilter::new(grid, m_eff, dt)?,
            lin: ExpFilter::new(grid, m, dt)?,
            high,
            partition,
        })
    }

    pub fn with_level(&self, level: i32) -> Result<Self> {
        Self::new(
            &self.grid,
            self.n,
            self.m,
            self.lambda,
            self.dt,
            self.btilde,
            level,
            self.dealias,
        )
    }

    pub fn with_dt(&self, dt: f64) -> Result<Self> {
        Self::new(
            &self.grid,
            self.n,
            self.m,
            self.lambda,
            dt,
            self.btilde,
            self.level,
            self.dealias,
        )
    }

    /// `F_i = -(λ/N)(Σ_j Φ_j²) Φ_i`
    pub fn cubic_force(&self, phi: &[RealField]) -> FieldSystem {
        let sum_sq = stochastic::sum_of_squares(phi);
        let c = -self.lambda / self.n as f64;
        map_idx(self.grid.n_sites() * phi.len(), phi.len(), |i| {
            let f = phi[i]
                .zip_map(&sum_sq, |x, s| c * s * x)
                .expect("same grid");
            if self.dealias {
                torus::dealias(&f)
            } else {
                f
            }
        })
    }

    /// Blocks of `𝒰_> 𝒵²_{ij}` for `i <= j`, stored row-major in the upper triangle.
    fn high_wick_blocks(&self, z: &[RealField]) -> Vec<Blocks> {
        let n = self.n;
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
        map_idx(self.grid.n_sites() * pairs.len() * 4, pairs.len(), |p| {
            let (i, j) = pairs[p];
            let w = stochastic::wick2(&z[i], &z[j], self.a, i == j).expect("same grid");
            let mut s = to_spectrum(&w);
            s.scale_by(&self.high);
            self.partition.decompose_spectrum(&s)
        })
    }

    /// Forcing of the `X` equation:
    /// `G_i = -(λ/N) Σ_j (2X_j≺𝒰_>𝒵²_{ij} + X_i≺𝒰_>𝒵²_{jj} + 𝒵³_{ijj})`.
    pub fn x_forcing(
        &self,
        x: &[RealField],
        z: &[RealField],
        with_source: bool,
    ) -> Result<FieldSystem> {
        let n = self.n;
        let c = -self.lambda / n as f64;
        let sum_sq = stochastic::sum_of_squares(z);
        let active = self.level < self.partition.j_max();
        let (xb, hw, diag) = if active {
            let xb: Vec<Blocks> = map_idx(self.grid.n_sites() * n * 4, n, |i| {
                self.partition.decompose(&x[i]).expect("same grid")
            });
            let hw = self.high_wick_blocks(z);
            let mut diag = RealField::zeros(&self.grid);
            for zj in z {
                diag.axpy(1.0, &zj.map(|v| v * v - self.a))?;
            }
            let mut ds = to_spectrum(&diag);
            ds.scale_by(&self.high);
            (
                Some(xb),
                Some(hw),
                Some(self.partition.decompose_spectrum(&ds)),
            )
        } else {
            (None, None, None)
        };
        let tri = |i: usize, j: usize| {
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            a * n - a * (a + 1) / 2 + b
        };
        map_idx(self.grid.n_sites() * n * n, n, |i| {
            let mut acc = if with_source {
                wick3_aggregate(&z[i], &sum_sq, self.a, n)?
            } else {
                RealField::zeros(&self.grid)
            };
            if let (Some(xb), Some(hw), Some(diag)) = (&xb, &hw, &diag) {
                for j in 0..n {
                    let t = besov::para_lt_blocks(&xb[j], &hw[tri(i, j)]);
                    acc.axpy(2.0, &t)?;
                }
                acc.axpy(1.0, &besov::para_lt_blocks(&xb[i], diag))?;
            }
            Ok(acc.scale(c))
        })
        .into_iter()
        .collect()
    }
}

/// White increments for every component at step `step`.
pub fn increments(ctx: &StepContext, streams: &NoiseStreams, step: u64) -> Vec<Spectrum> {
    map_idx(ctx.grid.n_sites() * ctx.n, ctx.n, |i| {
        stochastic::white_increment(
            &ctx.grid,
            ctx.dt,
            &mut streams.rng(i, Purpose::Increment, step),
        )
        .expect("positive dt")
    })
}

fn guard(fields: &[RealField], t: f64, what: &str) -> Result<()> {
    for (i, f) in fields.iter().enumerate() {
        let bad = f.values().iter().any(|v| !v.is_finite() || v.abs() > 1e8);
        if bad {
            return Err(Error::BlowUp {
                t,
                component: i,
                detail: format!("{what} left the finite range"),
            });
        }
    }
    Ok(())
}

/// One exponential-Euler step with externally supplied white increments.
pub fn step_phi_with_noise(
    state: &SystemState,
    ctx: &StepContext,
    incs: &[Spectrum],
) -> Result<SystemState> {
    let n = ctx.n;
    if incs.len() != n || state.phi.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "expected {n} components, got {} fields and {} increments",
            state.phi.len(),
            incs.len()
        )));
    }
    let force = ctx.cubic_force(&state.phi);
    let src3: Vec<RealField> = {
        let sum_sq = stochastic::sum_of_squares(&state.z);
        map_idx(ctx.grid.n_sites() * n, n, |i| {
            wick3_aggregate(&state.z[i], &sum_sq, ctx.a, n).expect("same grid")
        })
    };
    let xf = match &state.x {
        Some(x) => Some(ctx.x_forcing(x, &state.z, true)?),
        None => None,
    };
    let updated: Vec<(RealField, RealField, RealField, Option<RealField>)> =
        map_idx(ctx.grid.n_sites() * n * 4, n, |i| {
            let eta = ctx.ou.noise_term(&incs[i]);
            let mut ph = to_spectrum(&state.phi[i]);
            ctx.eff.step_spectrum(&mut ph, &to_spectrum(&force[i]));
            add_spectrum(&mut ph, &eta);
            let mut zs = to_spectrum(&state.z[i]);
            ctx.lin.step_spectrum(&mut zs, &Spectrum::zeros(&ctx.grid));
            add_spectrum(&mut zs, &eta);
            let mut ss = to_spectrum(&state.s[i]);
            ctx.lin.step_spectrum(&mut ss, &to_spectrum(&src3[i]));
            let xs = match (&state.x, &xf) {
                (Some(x), Some(g)) => {
                    let mut xs = to_spectrum(&x[i]);
                    ctx.lin.step_spectrum(&mut xs, &to_spectrum(&g[i]));
                    Some(from_spectrum(&xs))
                }
                _ => None,
            };
            (
                from_spectrum(&ph),
                from_spectrum(&zs),
                from_spectrum(&ss),
                xs,
            )
        });
    let mut next = SystemState {
        step: state.step + 1,
        t: (state.step + 1) as f64 * ctx.dt,
        phi: Vec::with_capacity(n),
        z: Vec::with_capacity(n),
        s: Vec::with_capacity(n),
        x: state.x.as_ref().map(|_| Vec::with_capacity(n)),
    };
    for (p, z, s, x) in updated {
        next.phi.push(p);
        next.z.push(z);
        next.s.push(s);
        if let (Some(xs), Some(x)) = (next.x.as_mut(), x) {
            xs.push(x);
        }
    }
    guard(&next.phi, next.t, "Phi")?;
    Ok(next)
}

fn add_spectrum(a: &mut Spectrum, b: &Spectrum) {
    for (x, y) in a.coeffs_mut().iter_mut().zip(b.coeffs()) {
        *x += *y;
    }
}

/// One step driven by the counter-based streams.
pub fn step_phi(
    state: &SystemState,
    ctx: &StepContext,
    streams: &NoiseStreams,
) -> Result<SystemState> {
    let incs = increments(ctx, streams, state.step + 1);
    step_phi_with_noise(state, ctx, &incs)
}

/// Estimate b̃ with a stream derived from the run seed.
pub fn btilde_for(cfg: &SimConfig, grid: &Arc<Grid>) -> Result<stochastic::BtildeEstimate> {
    let seed = cfg.seed ^ 0xB7E1_5162_8AED_2A6B;
    stochastic::wick_btilde(grid, cfg.m, cfg.btilde_samples, seed)
}

/// Stationary coupled start: `Z(0)` from the GFF, `Φ(0) = Z(0)`, trees at rest.
pub fn initial_state(ctx: &StepContext, streams: &NoiseStreams) -> Result<SystemState> {
    let var = stochastic::stationary_variances(&ctx.grid, ctx.m)?;
    let z: FieldSystem = (0..ctx.n)
        .map(|i| {
            from_spectrum(&stochastic::gaussian_spectrum(
                &ctx.grid,
                &var,
                &mut streams.rng(i, Purpose::Init, 0),
            ))
        })
        .collect();
    Ok(SystemState {
        step: 0,
        t: 0.0,
        phi: z.clone(),
        s: vec![RealField::zeros(&ctx.grid); ctx.n],
        z,
        x: None,
    })
}

/// Tree snapshot of a state.
pub fn trees_of(state: &SystemState, ctx: &StepContext) -> TreeSet {
    TreeSet {
        grid: ctx.grid.clone(),
        partition: ctx.partition.clone(),
        m: ctx.m,
        a: ctx.a,
        btilde: ctx.btilde,
        t: state.t,
        z: state.z.clone(),
        s: state.s.clone(),
        pair30: Vec::new(),
        level: Some(ctx.level),
    }
}

/// `X(0) = -(λ/N) Σ_j 𝒵̃³⁰_{ijj}(0)`
pub fn start_x(state: &mut SystemState, ctx: &StepContext) {
    let c = -ctx.lambda / ctx.n as f64;
    state.x = Some(state.s.iter().map(|s| s.scale(c)).collect());
}

/// Contraction factor of the linear part of the `X` map over `window` steps,
/// estimated by power iteration in `sup_t (Σ_i ‖X_i(t)‖²)^{1/2}`.
pub fn x_contraction_factor(
    ctx: &StepContext,
    z_path: &[FieldSystem],
    iterations: usize,
) -> Result<f64> {
    if ctx.lambda == 0.0 || ctx.level >= ctx.partition.j_max() || z_path.is_empty() {
        return Ok(0.0);
    }
    let n = ctx.n;
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0x5eed);
    let mut x: FieldSystem = (0..n)
        .map(|_| besov::random_sobolev_field(&ctx.grid, 1.0, &mut rng))
        .collect();
    let path_norm = |p: &[FieldSystem]| -> f64 {
        p.iter()
            .map(|xs| {
                xs.iter()
                    .map(|f| torus::inner(f, f).unwrap())
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    };
    let mut path: Vec<FieldSystem> = vec![x.clone(); z_path.len()];
    let mut factor = 0.0;
    for _ in 0..iterations {
        let before = path_norm(&path);
        let mut u: Vec<Spectrum> = vec![Spectrum::zeros(&ctx.grid); n];
        let mut next = Vec::with_capacity(z_path.len());
        for (k, z) in z_path.iter().enumerate() {
            next.push(u.iter().map(from_spectrum).collect::<FieldSystem>());
            let g = ctx.x_forcing(&path[k], z, false)?;
            for (ui, gi) in u.iter_mut().zip(&g) {
                ctx.lin.step_spectrum(ui, &to_spectrum(gi));
            }
        }
        let after = path_norm(&next);
        factor = if before > 0.0 { after / before } else { 0.0 };
        if after == 0.0 {
            return Ok(0.0);
        }
        let scale = 1.0 / after;
        path = next
            .into_iter()
            .map(|xs| xs.into_iter().map(|f| f.scale(scale)).collect())
            .collect();
        x = path[path.len() - 1].clone();
    }
    let _ = x;
    Ok(factor)
}

/// Evolve `X` along a tree path from `X(0) = -(λ/N)S(0)`; `paths[k]` holds
/// `(Z, S)` at mesh point `k`.
pub fn solve_x(
    ctx: &StepContext,
    z_path: &[FieldSystem],
    s0: &[RealField],
) -> Result<Vec<FieldSystem>> {
    let c = -ctx.lambda / ctx.n as f64;
    let mut x: Vec<Spectrum> = s0.iter().map(|s| to_spectrum(&s.scale(c))).collect();
    let mut out = Vec::with_capacity(z_path.len());
    for z in z_path {
        let xr: FieldSystem = x.iter().map(from_spectrum).collect();
        let g = ctx.x_forcing(&xr, z, true)?;
        out.push(xr);
        for (xi, gi) in x.iter_mut().zip(&g) {
            ctx.lin.step_spectrum(xi, &to_spectrum(gi));
        }
    }
    Ok(out)
}

/// `P_i = (λ/N) Σ_j (2Y_j≺𝒵²_{ij} + Y_i≺𝒵²_{jj})` and `φ_i = Y_i + 𝒟^{-1}P_i`.
pub fn compute_p_phi(
    y: &[RealField],
    trees: &TreeSet,
    lambda: f64,
) -> Result<(FieldSystem, FieldSystem)> {
    let n = trees.n();
    let part = &trees.partition;
    let c = lambda / n as f64;
    let yb: Vec<Blocks> = y.iter().map(|f| part.decompose(f)).collect::<Result<_>>()?;
    let mut diag = RealField::zeros(&trees.grid);
    for j in 0..n {
        diag.axpy(1.0, &trees.wick2(j, j)?)?;
    }
    let db = part.decompose(&diag)?;
    let green = torus::green_multiplier(&trees.grid, trees.m)?;
    let mut p = Vec::with_capacity(n);
    let mut phi = Vec::with_capacity(n);
    for i in 0..n {
        let mut acc = besov::para_lt_blocks(&yb[i], &db);
        for j in 0..n {
            let wb = part.decompose(&trees.wick2(i, j)?)?;
            acc.axpy(2.0, &besov::para_lt_blocks(&yb[j], &wb))?;
        }
        let pi = acc.scale(c);
        phi.push(y[i].add(&torus::apply_multiplier(&pi, &green)?)?);
        p.push(pi);
    }
    Ok((p, phi))
}

/// One row of the energy audit.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyRow {
    pub t: f64,
    pub d_energy: f64,
    pub mass_term: f64,
    pub grad_term: f64,
    pub quartic_term: f64,
    pub theta: f64,
    pub xi: f64,
    pub counterterm: f64,
    pub rhs_pairing: f64,
    pub residual_a: f64,
    pub residual_b: f64,
    pub y_l2_mean: f64,
    pub y_h_mean: f64,
    pub quartic_mean: f64,
    pub rn1: f64,
}

impl EnergyRow {
    pub const COLUMNS: [&'static str; 15] = [
        "t",
        "dE_dt",
        "m_phi_L2",
        "grad_phi_L2",
        "quartic",
        "Theta",
        "Xi",
        "counterterm",
        "rhs_pairing",
        "residual_a",
        "residual_b",
        "Y_L2_mean",
        "Y_H_mean",
        "quartic_mean",
        "R_N1",
    ];

    pub fn values(&self) -> [f64; 15] {
        [
            self.t,
            self.d_energy,
            self.mass_term,
            self.grad_term,
            self.quartic_term,
            self.theta,
            self.xi,
            self.counterterm,
            self.rhs_pairing,
            self.residual_a,
            self.residual_b,
            self.y_l2_mean,
            self.y_h_mean,
            self.quartic_mean,
            self.rn1,
        ]
    }
}

fn total_inner(a: &[RealField], b: &[RealField]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| torus::inner(x, y).unwrap())
        .sum()
}

/// Energy bookkeeping between `state` (time n) and `next` (time n+1).
pub fn energy_audit(
    state: &SystemState,
    next: &SystemState,
    ctx: &StepContext,
    kappa: f64,
) -> Result<EnergyRow> {
    let n = ctx.n;
    let nf = n as f64;
    let lam = ctx.lambda;
    let y = state.y()?;
    let y1 = next.y()?;
    let x = state.x.as_ref().expect("y() checked X");
    let part = &ctx.partition;
    let trees = trees_of(state, ctx);

    let e0: f64 = y.iter().map(|f| torus::inner(f, f).unwrap()).sum::<f64>() * 0.5;
    let e1: f64 = y1.iter().map(|f| torus::inner(f, f).unwrap()).sum::<f64>() * 0.5;
    let d_energy = (e1 - e0) / ctx.dt;

    // dY/dt = -𝒟Y + F - G - (m_eff - m)Φ, all at the left endpoint
    let force = ctx.cubic_force(&state.phi);
    let g = ctx.x_forcing(x, &state.z, true)?;
    let c_m = ctx.m_eff - ctx.m;
    let dmul = torus::mass_operator_multiplier(&ctx.grid, ctx.m)?;
    let mut rhs_pairing = 0.0;
    for i in 0..n {
        let mut r = torus::apply_multiplier(&y[i], &dmul)?.scale(-1.0);
        r.axpy(1.0, &force[i])?;
        r.axpy(-1.0, &g[i])?;
        r.axpy(-c_m, &state.phi[i])?;
        rhs_pairing += torus::inner(&r, &y[i])?;
    }

    let (p, phi) = compute_p_phi(&y, &trees, lam)?;
    let mass_term = ctx.m * total_inner(&phi, &phi);
    let grad_term: f64 = phi.iter().map(torus::grad_norm2).sum();
    let ysq = stochastic::sum_of_squares(&y);
    let ysq_norm = torus::inner(&ysq, &ysq)?;
    let quartic_term = lam / nf * ysq_norm;

    let green = torus::green_multiplier(&ctx.grid, ctx.m)?;
    let mut theta = 0.0;
    for pi in &p {
        theta += torus::inner(&torus::apply_multiplier(pi, &green)?, pi)?;
    }
    let wick: Vec<Vec<RealField>> = (0..n)
        .map(|i| (0..n).map(|j| trees.wick2(i, j)).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let mut dsum = 0.0;
    for i in 0..n {
        for j in 0..n {
            dsum += 2.0 * besov::comm_d(&y[i], &wick[i][j], &y[j], part)?;
            dsum += besov::comm_d(&y[i], &wick[j][j], &y[i], part)?;
        }
    }
    theta -= lam / nf * dsum;

    let l = ctx.level;
    let u: FieldSystem = x
        .iter()
        .zip(&y)
        .map(|(a, b)| a.add(b))
        .collect::<Result<_>>()?;
    let xb: Vec<Blocks> = x.iter().map(|f| part.decompose(f)).collect::<Result<_>>()?;
    let ub: Vec<Blocks> = u.iter().map(|f| part.decompose(f)).collect::<Result<_>>()?;
    let sa = {
        let mut acc = RealField::zeros(&ctx.grid);
        for j in 0..n {
            acc.axpy(1.0, &x[j].zip_map(&y[j], |a, b| a * a + 2.0 * a * b)?)?;
        }
        acc
    };
    let sb = stochastic::sum_of_squares(&y);
    let sc = stochastic::sum_of_squares(&u);
    let mut diag = RealField::zeros(&ctx.grid);
    for j in 0..n {
        diag.axpy(1.0, &wick[j][j])?;
    }
    let diag_b = part.decompose(&diag)?;
    let diag_low_b = part.decompose(&besov::localize_low(&diag, l, part)?)?;
    let mut xi = 0.0;
    for i in 0..n {
        let mut t = u[i].mul(&sa)?;
        t.axpy(1.0, &x[i].mul(&sb)?)?;
        t.axpy(1.0, &state.z[i].mul(&sc)?)?;
        let mut e = RealField::zeros(&ctx.grid);
        for j in 0..n {
            e.axpy(1.0, &u[j].mul(&state.z[j])?)?;
        }
        t.axpy(2.0, &u[i].mul(&e)?)?;
        t.axpy(1.0, &besov::para_lt_blocks(&xb[i], &diag_low_b))?;
        t.axpy(1.0, &besov::para_lt_blocks(&diag_b, &ub[i]))?;
        t.axpy(1.0, &besov::resonant_blocks(&xb[i], &diag_b))?;
        for j in 0..n {
            let wb = part.decompose(&wick[i][j])?;
            let wlow = part.decompose(&besov::localize_low(&wick[i][j], l, part)?)?;
            t.axpy(2.0, &besov::para_lt_blocks(&xb[j], &wlow))?;
            t.axpy(2.0, &besov::para_lt_blocks(&wb, &ub[j]))?;
            t.axpy(2.0, &besov::resonant_blocks(&xb[j], &wb))?;
        }
        xi += torus::inner(&t, &y[i])?;
    }
    xi *= -lam / nf;
    let counterterm = -quadratic_counterterm(n, lam, ctx.btilde) * total_inner(&state.phi, &y);

    let residual_a = (d_energy - rhs_pairing).abs();
    let residual_b =
        (d_energy + mass_term + grad_term + quartic_term - (theta + xi + counterterm)).abs();
    let y_l2_mean = total_inner(&y, &y) / nf;
    let y_h_mean = y
        .iter()
        .map(|f| torus::sobolev_norm2(f, 1.0 - 2.0 * kappa))
        .sum::<f64>()
        / nf;
    Ok(EnergyRow {
        t: state.t,
        d_energy,
        mass_term,
        grad_term,
        quartic_term,
        theta,
        xi,
        counterterm,
        rhs_pairing,
        residual_a,
        residual_b,
        y_l2_mean,
        y_h_mean,
        quartic_mean: lam / (nf * nf) * ysq_norm,
        rn1: measures::diag_rn1(&trees, kappa)?,
    })
}

/// Phase of a coupled run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    BurnIn,
    Sampling,
}

/// A coupled `(Φ, Z)` run with `X` tracked during sampling.
#[derive(Debug)]
pub struct Simulation {
    pub cfg: SimConfig,
    pub ctx: StepContext,
    pub streams: NoiseStreams,
    pub state: SystemState,
    pub btilde: stochastic::BtildeEstimate,
    pub track_x: bool,
    pub contraction: Option<f64>,
}

impl Simulation {
    pub fn new(cfg: &SimConfig, track_x: bool) -> Result<Self> {
        cfg.validate()?;
        let grid = cfg.grid()?;
        let btilde = btilde_for(cfg, &grid)?;
        let level = cfg.l_override.unwrap_or(0);
        let ctx = StepContext::new(
            &grid,
            cfg.n,
            cfg.m,
            cfg.lambda,
            cfg.dt,
            btilde.value,
            level,
            cfg.dealias,
        )?;
        let streams = make_streams(cfg.seed, cfg.n)?;
        let state = initial_state(&ctx, &streams)?;
        Ok(Simulation {
            cfg: cfg.clone(),
            ctx,
            streams,
            state,
            btilde,
            track_x,
            contraction: None,
        })
    }

    /// Rebuild from a checkpointed state; the cutoff level is restored as saved.
    pub fn from_state(
        cfg: &SimConfig,
        state: SystemState,
        level: i32,
        btilde: stochastic::BtildeEstimate,
        track_x: bool,
    ) -> Result<Self> {
        cfg.validate()?;
        let grid = cfg.grid()?;
        let ctx = StepContext::new(
            &grid,
            cfg.n,
            cfg.m,
            cfg.lambda,
            cfg.dt,
            btilde.value,
            level,
            cfg.dealias,
        )?;
        let streams = make_streams(cfg.seed, cfg.n)?;
        Ok(Simulation {
            cfg: cfg.clone(),
            ctx,
            streams,
            state,
            btilde,
            track_x,
            contraction: None,
        })
    }

    pub fn phase(&self) -> Phase {
        if self.state.step < self.cfg.burn_steps() {
            Phase::BurnIn
        } else {
            Phase::Sampling
        }
    }

    pub fn total_steps(&self) -> u64 {
        self.cfg.burn_steps() + self.cfg.sample_steps()
    }

    pub fn done(&self) -> bool {
        self.state.step >= self.total_steps()
    }

    /// Fix the cutoff level from the current trees and start `X`.
    pub fn enter_sampling(&mut self) -> Result<()> {
        if self.cfg.l_override.is_none() {
            let trees = trees_of(&self.state, &self.ctx);
            let level = choose_l(&trees, self.cfg.lambda, self.cfg.c_l, self.cfg.kappa)?;
            if level != self.ctx.level {
                self.ctx = self.ctx.with_level(level)?;
            }
        }
        if self.track_x {
            self.check_contraction()?;
            start_x(&mut self.state, &self.ctx);
        }
        Ok(())
    }

    fn check_contraction(&mut self) -> Result<()> {
        let window = ((1.0 / self.cfg.m) / self.cfg.dt).ceil().clamp(1.0, 200.0) as usize;
        let mut probe = self.state.clone();
        probe.x = None;
        let mut z_path = Vec::with_capacity(window);
        for _ in 0..window {
            z_path.push(probe.z.clone());
            probe = step_phi(&probe, &self.ctx, &self.streams)?;
        }
        let factor = x_contraction_factor(&self.ctx, &z_path, 6)?;
        self.contraction = Some(factor);
        if factor >= 1.0 {
            return Err(Error::NotContractive {
                factor,
                level: self.ctx.level,
            });
        }
        Ok(())
    }

    pub fn step(&mut self) -> Result<()> {
        if self.state.step == self.cfg.burn_steps() && self.state.x.is_none() && self.track_x {
            self.enter_sampling()?;
        }
        self.state = step_phi(&self.state, &self.ctx, &self.streams)?;
        Ok(())
    }

    /// Step, returning the audit row for the step just taken.
    pub fn step_audited(&mut self) -> Result<EnergyRow> {
        if self.state.x.is_none() {
            return Err(Error::Unsupported(
                "energy audit needs the sampling phase with X tracked".into(),
            ));
        }
        let next = step_phi(&self.state, &self.ctx, &self.streams)?;
        let row = energy_audit(&self.state, &next, &self.ctx, self.cfg.kappa)?;
        self.state = next;
        Ok(row)
    }

    /// Run the burn-in; afterwards the state sits at the start of sampling.
    pub fn burn_in(&mut self) -> Result<()> {
        while self.state.step < self.cfg.burn_steps() {
            self.state = step_phi(&self.state, &self.ctx, &self.streams)?;
        }
        if self.state.x.is_none() {
            self.enter_sampling()?;
        }
        Ok(())
    }

    /// Same-state audit of a single step of size `dt` (noise cancels in `Y`).
    pub fn one_step_audit(&self, dt: f64) -> Result<EnergyRow> {
        let ctx = self.ctx.with_dt(dt)?;
        let mut st = self.state.clone();
        st.step = 0;
        let next = step_phi(&st, &ctx, &self.streams)?;
        energy_audit(&st, &next, &ctx, self.cfg.kappa)
    }
}

/// `(1/N) Σ_i ‖Φ_i - Z_i‖²_{L²}`
pub fn coupling_gap(state: &SystemState) -> f64 {
    let n = state.phi.len() as f64;
    state
        .phi
        .iter()
        .zip(&state.z)
        .map(|(p, z)| {
            let d = p.sub(z).unwrap();
            torus::inner(&d, &d).unwrap()
        })
        .sum::<f64>()
        / n
}

/// Apply an `N×N` matrix across components.
pub fn rotate(fields: &[RealField], r: &[Vec<f64>]) -> FieldSystem {
    let n = fields.len();
    (0..n)
        .map(|i| {
            let mut acc = RealField::zeros(fields[0].grid());
            for j in 0..n {
                acc.axpy(r[i][j], &fields[j]).unwrap();
            }
            acc
        })
        .collect()
}

pub fn rotate_spectra(s: &[Spectrum], r: &[Vec<f64>]) -> Vec<Spectrum> {
    let n = s.len();
    (0..n)
        .map(|i| {
            let mut out = Spectrum::zeros(s[0].grid());
            for j in 0..n {
                for (a, b) in out.coeffs_mut().iter_mut().zip(s[j].coeffs()) {
                    *a += Complex64::new(r[i][j], 0.0) * b;
                }
            }
            out
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, lambda: f64) -> SimConfig {
        let mut c = SimConfig::new(1, 8, n, 2.0, lambda, 0.01, 0.2);
        c.btilde_samples = 16;
        c.t_burn = Some(0.1);
        c
    }

    #[test]
    fn effective_mass_cases() {
        let c = cfg(3, 0.0);
        assert_eq!(effective_mass(&c, 0.7, 0.3), c.m);
        let mut c1 = cfg(1, 0.5);
        c1.m = 1.0;
        let a = 0.2;
        let me = effective_mass(&c1, a, 0.0);
        assert!((me - (1.0 - 3.0 * 0.5 * a)).abs() < 1e-15);
        let mut big = cfg(1_000_000, 1.0);
        big.m = 1.0;
        assert!((effective_mass(&big, a, 0.4) - (1.0 - a)).abs() < 1e-5);
    }

    #[test]
    fn level_formula() {
        assert_eq!(choose_level(5.0, 3.0, 0.0, 4, 1.0, 5), 0);
        let l1 = choose_level(5.0, 3.0, 0.5, 4, 1.0, 50);
        let l2 = choose_level(5.0, 3.0, 1.0, 4, 1.0, 50);
        assert!(l2 >= l1);
        assert_eq!(choose_level(1e9, 1e9, 1.0, 1, 1.0, 3), 3);
        // RHS - 1 scales with C_L²
        let rhs =
            |c: f64| 2.0 * c * c * (0.25 / 4.0 * 5.0) + 2.0 * c * c * (0.5 / 2.0 * 3.0f64).powi(2);
        assert!((rhs(2.0) / rhs(1.0) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn duhamel_constant_source_closed_form() {
        let g = torus::create_grid(1, 8, 2.0 * std::f64::consts::PI).unwrap();
        let m = 1.2;
        let dt = 0.05;
        let s = RealField::from_fn(&g, |x| 0.5 + x[0].cos());
        let path = duhamel_path(&vec![s.clone(); 30], dt, m).unwrap();
        for (n, u) in path.iter().enumerate() {
            let t = n as f64 * dt;
            let expect = RealField::from_fn(&g, |x| {
                0.5 * (1.0 - (-m * t).exp()) / m
                    + (1.0 - (-(m + 1.0) * t).exp()) / (m + 1.0) * x[0].cos()
            });
            assert!(u.max_abs_diff(&expect) < 1e-12);
        }
    }

    #[test]
    fn zero_coupling_is_bitwise_linear() {
        let mut sim = Simulation::new(&cfg(3, 0.0), true).unwrap();
        for _ in 0..30 {
            sim.step().unwrap();
            for (p, z) in sim.state.phi.iter().zip(&sim.state.z) {
                assert_eq!(p.values(), z.values());
            }
        }
        let x = sim.state.x.as_ref().unwrap();
        assert!(x.iter().all(|f| f.max_abs() == 0.0));
    }

    #[test]
    fn rotation_commutes_with_step() {
        let c = cfg(2, 1.0);
        let sim = Simulation::new(&c, false).unwrap();
        let mut st = sim.state.clone();
        st.phi[0] = st.phi[0].scale(1.7);
        let incs = increments(&sim.ctx, &sim.streams, 1);
        let th: f64 = 0.7;
        let r = vec![vec![th.cos(), -th.sin()], vec![th.sin(), th.cos()]];
        let a = step_phi_with_noise(&st, &sim.ctx, &incs).unwrap();
        let mut rs = st.clone();
        rs.phi = rotate(&st.phi, &r);
        rs.z = rotate(&st.z, &r);
        let b = step_phi_with_noise(&rs, &sim.ctx, &rotate_spectra(&incs, &r)).unwrap();
        let ra = rotate(&a.phi, &r);
        for (x, y) in ra.iter().zip(&b.phi) {
            assert!(x.max_abs_diff(y) < 1e-12);
        }
    }

    #[test]
    fn p_phi_trivial_cases() {
        let sim = Simulation::new(&cfg(2, 1.0), false).unwrap();
        let trees = trees_of(&sim.state, &sim.ctx);
        let y: FieldSystem = sim.state.z.iter().map(|z| z.scale(0.3)).collect();
        let (_, phi) = compute_p_phi(&y, &trees, 0.0).unwrap();
        for (a, b) in phi.iter().zip(&y) {
            assert!(a.max_abs_diff(b) < 1e-15);
        }
        let zero = vec![RealField::zeros(&sim.ctx.grid); 2];
        let (p, _) = compute_p_phi(&zero, &trees, 1.0).unwrap();
        assert!(p.iter().all(|f| f.max_abs() == 0.0));
    }

    #[test]
    fn config_validation_names_fields() {
        let mut c = cfg(2, 1.0);
        c.m_points = 12;
        match c.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "M"),
            other => panic!("{other:?}"),
        }
        let mut c = cfg(2, 1.0);
        c.lambda = -1.0;
        assert!(matches!(c.validate(), Err(Error::Config { field, .. }) if field == "lambda"));
    }
}
