//! Littlewood–Paley blocks, Besov norms, Bony paraproducts and commutators.
//!
//! Block multipliers are built from a smooth radial bump `ψ` with `ψ = 1` on
//! `[0, 5/8]` and `ψ = 0` on `[1, ∞)`: `ρ_{-1} = ψ(|k|)` and
//! `ρ_j = ψ(2^{-j-1}|k|) - ψ(2^{-j}|k|)`. The top block absorbs whatever is
//! left, so `Σ_j ρ_j = 1` holds exactly on every grid frequency.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::torus::{self, from_spectrum, to_spectrum, Grid, Multiplier, RealField, Spectrum};

const PSI_INNER: f64 = 5.0 / 8.0;
const PSI_OUTER: f64 = 1.0;

fn smooth_step(t: f64) -> f64 {
    let f = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        f(t) / (f(t) + f(1.0 - t))
    }
}

/// Radial bump: 1 below 5/8, 0 above 1, smooth in between.
pub fn psi(r: f64) -> f64 {
    smooth_step((PSI_OUTER - r) / (PSI_OUTER - PSI_INNER))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BesovParams {
    pub alpha: f64,
    pub p: f64,
    pub q: f64,
}

impl BesovParams {
    pub fn new(alpha: f64, p: f64, q: f64) -> Result<Self> {
        if !(p >= 1.0) || !(q >= 1.0) {
            return Err(Error::param(
                "p,q",
                format!("need p, q >= 1, got p = {p}, q = {q}"),
            ));
        }
        Ok(BesovParams { alpha, p, q })
    }

    /// `H^α = B^α_{2,2}`
    pub fn sobolev(alpha: f64) -> Self {
        BesovParams {
            alpha,
            p: 2.0,
            q: 2.0,
        }
    }

    /// `C^α = B^α_{∞,∞}`
    pub fn holder(alpha: f64) -> Self {
        BesovParams {
            alpha,
            p: f64::INFINITY,
            q: f64::INFINITY,
        }
    }
}

#[derive(Debug)]
pub struct DyadicPartition {
    grid: Arc<Grid>,
    j_max: i32,
    tables: Vec<Multiplier>,
}

impl DyadicPartition {
    pub fn new(grid: &Arc<Grid>) -> Self {
        let radii: Vec<f64> = grid.k2().iter().map(|k2| k2.sqrt()).collect();
        let raw = |j: i32, r: f64| -> f64 {
            if j < 0 {
                psi(r)
            } else {
                psi(r / 2f64.powi(j + 1)) - psi(r / 2f64.powi(j))
            }
        };
        let r_max = radii.iter().cloned().fold(0.0, f64::max);
        let mut j_max = -1;
        while r_max > PSI_INNER * 2f64.powi(j_max + 1) {
            j_max += 1;
        }
        let mut tables = Vec::with_capacity((j_max + 2) as usize);
        let mut acc = vec![0.0; radii.len()];
        for j in -1..j_max {
            let vals: Vec<f64> = radii.iter().map(|&r| raw(j, r)).collect();
            for (a, v) in acc.iter_mut().zip(&vals) {
                *a += v;
            }
            tables.push(Multiplier::new(grid, vals).expect("finite bump values"));
        }
        let top: Vec<f64> = acc.iter().map(|a| 1.0 - a).collect();
        tables.push(Multiplier::new(grid, top).expect("finite bump values"));
        DyadicPartition {
            grid: grid.clone(),
            j_max,
            tables,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn j_min(&self) -> i32 {
        -1
    }

    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    pub fn n_blocks(&self) -> usize {
        self.tables.len()
    }

    pub fn table(&self, j: i32) -> Result<&Multiplier> {
        if j < -1 || j > self.j_max {
            return Err(Error::param(
                "j",
                format!("block index {j} outside [-1, {}]", self.j_max),
            ));
        }
        Ok(&self.tables[(j + 1) as usize])
    }

    fn check(&self, f: &RealField) -> Result<()> {
        if **f.grid() != *self.grid {
            return Err(Error::ShapeMismatch(format!(
                "field on {:?}, partition on {:?}",
                f.grid(),
                self.grid
            )));
        }
        Ok(())
    }

    /// All blocks `Δ_{-1} f, …, Δ_{j_max} f` from a single forward transform.
    pub fn decompose(&self, f: &RealField) -> Result<Blocks> {
        self.check(f)?;
        Ok(self.decompose_spectrum(&to_spectrum(f)))
    }

    pub fn decompose_spectrum(&self, s: &Spectrum) -> Blocks {
        let blocks = self
            .tables
            .iter()
            .map(|t| {
                let mut b = s.clone();
                b.scale_by(t);
                from_spectrum(&b)
            })
            .collect();
        Blocks { blocks }
    }
}

/// Littlewood–Paley pieces of one field, indexed from `j = -1`.
#[derive(Clone, Debug)]
pub struct Blocks {
    blocks: Vec<RealField>,
}

impl Blocks {
    pub fn get(&self, j: i32) -> Option<&RealField> {
        if j < -1 {
            None
        } else {
            self.blocks.get((j + 1) as usize)
        }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, &RealField)> {
        self.blocks
            .iter()
            .enumerate()
            .map(|(n, b)| (n as i32 - 1, b))
    }

    /// `Σ_j Δ_j f`
    pub fn sum(&self) -> RealField {
        let mut out = RealField::zeros(self.blocks[0].grid());
        for b in &self.blocks {
            add_into(out.values_mut(), b.values());
        }
        out
    }
}

fn add_into(acc: &mut [f64], x: &[f64]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

fn add_product_into(acc: &mut [f64], x: &[f64], y: &[f64]) {
    for ((a, u), v) in acc.iter_mut().zip(x).zip(y) {
        *a += u * v;
    }
}

/// `f ≺ g = Σ_j S_{j-2} f · Δ_j g` from precomputed blocks.
pub fn para_lt_blocks(f: &Blocks, g: &Blocks) -> RealField {
    let grid = f.blocks[0].grid().clone();
    let n = grid.n_sites();
    let mut out = vec![0.0; n];
    let mut partial = vec![0.0; n];
    for (idx, gj) in g.blocks.iter().enumerate() {
        // block j = idx - 1 pairs with f-blocks i <= j - 2, i.e. storage index <= idx - 2
        if idx >= 2 {
            add_into(&mut partial, f.blocks[idx - 2].values());
            add_product_into(&mut out, &partial, gj.values());
        }
    }
    RealField::from_vec_unchecked(&grid, out)
}

/// `f ∘ g = Σ_{|i-j| ≤ 1} Δ_i f · Δ_j g` from precomputed blocks.
pub fn resonant_blocks(f: &Blocks, g: &Blocks) -> RealField {
    let grid = f.blocks[0].grid().clone();
    let nb = f.blocks.len();
    let mut out = vec![0.0; grid.n_sites()];
    for i in 0..nb {
        let lo = i.saturating_sub(1);
        let hi = (i + 1).min(nb - 1);
        for j in lo..=hi {
            add_product_into(&mut out, f.blocks[i].values(), g.blocks[j].values());
        }
    }
    RealField::from_vec_unchecked(&grid, out)
}

pub fn lp_block(f: &RealField, j: i32, part: &DyadicPartition) -> Result<RealField> {
    part.check(f)?;
    torus::apply_multiplier(f, part.table(j)?)
}

fn block_norms(blocks: &Blocks, p: f64) -> Vec<f64> {
    let cell = blocks.blocks[0].grid().cell_volume();
    blocks
        .blocks
        .iter()
        .map(|b| torus::lp_of_slice(b.values(), p, cell))
        .collect()
}

fn combine_besov(norms: &[f64], bp: &BesovParams) -> f64 {
    let weighted = norms
        .iter()
        .enumerate()
        .map(|(n, &v)| 2f64.powf((n as f64 - 1.0) * bp.alpha) * v);
    if bp.q.is_infinite() {
        weighted.fold(0.0, f64::max)
    } else {
        weighted.map(|v| v.powf(bp.q)).sum::<f64>().powf(1.0 / bp.q)
    }
}

pub fn besov_norm(f: &RealField, bp: &BesovParams, part: &DyadicPartition) -> f64 {
    besov_norm_blocks(
        &part
            .decompose(f)
            .expect("field and partition on the same grid"),
        bp,
    )
}

pub fn besov_norm_blocks(blocks: &Blocks, bp: &BesovParams) -> f64 {
    combine_besov(&block_norms(blocks, bp.p), bp)
}

/// Several regularities for one shared integrability index `p`.
pub fn besov_norms_blocks(blocks: &Blocks, params: &[BesovParams]) -> Vec<f64> {
    let mut cache: Vec<(f64, Vec<f64>)> = Vec::new();
    params
        .iter()
        .map(|bp| {
            if let Some((_, n)) = cache.iter().find(|(p, _)| *p == bp.p) {
                combine_besov(n, bp)
            } else {
                let n = block_norms(blocks, bp.p);
                let v = combine_besov(&n, bp);
                cache.push((bp.p, n));
                v
            }
        })
        .collect()
}

pub fn para_lt(f: &RealField, g: &RealField, part: &DyadicPartition) -> Result<RealField> {
    Ok(para_lt_blocks(&part.decompose(f)?, &part.decompose(g)?))
}

pub fn resonant(f: &RealField, g: &RealField, part: &DyadicPartition) -> Result<RealField> {
    Ok(resonant_blocks(&part.decompose(f)?, &part.decompose(g)?))
}

pub fn para_gt(f: &RealField, g: &RealField, part: &DyadicPartition) -> Result<RealField> {
    para_lt(g, f, part)
}

fn localizer(part: &DyadicPartition, level: i32, high: bool) -> Multiplier {
    let vals = (0..part.grid.n_sites())
        .map(|idx| {
            part.tables
                .iter()
                .enumerate()
                .filter(|(n, _)| ((*n as i32 - 1) > level) == high)
                .map(|(_, t)| t.values()[idx])
                .sum()
        })
        .collect();
    Multiplier::new(&part.grid, vals).expect("finite localizer")
}

/// `𝒰_> f = Σ_{j>L} Δ_j f`
pub fn localize_high(f: &RealField, level: i32, part: &DyadicPartition) -> Result<RealField> {
    part.check(f)?;
    torus::apply_multiplier(f, &localizer(part, level, true))
}

/// `𝒰_≤ f = Σ_{j≤L} Δ_j f`
pub fn localize_low(f: &RealField, level: i32, part: &DyadicPartition) -> Result<RealField> {
    part.check(f)?;
    torus::apply_multiplier(f, &localizer(part, level, false))
}

pub fn high_pass_multiplier(part: &DyadicPartition, level: i32) -> Multiplier {
    localizer(part, level, true)
}

/// `D(f,g,h) = <f, g∘h> - <f≺g, h>`
pub fn comm_d(f: &RealField, g: &RealField, h: &RealField, part: &DyadicPartition) -> Result<f64> {
    let gb = part.decompose(g)?;
    let gh = resonant_blocks(&gb, &part.decompose(h)?);
    let fg = para_lt_blocks(&part.decompose(f)?, &gb);
    Ok(torus::inner(f, &gh)? - torus::inner(&fg, h)?)
}

/// `C̃(f,g,h) = (f≺g)∘h - f·(g∘h)`
pub fn comm_ctilde(
    f: &RealField,
    g: &RealField,
    h: &RealField,
    part: &DyadicPartition,
) -> Result<RealField> {
    let gb = part.decompose(g)?;
    let hb = part.decompose(h)?;
    let fg = para_lt_blocks(&part.decompose(f)?, &gb);
    let first = resonant_blocks(&part.decompose(&fg)?, &hb);
    let second = f.mul(&resonant_blocks(&gb, &hb))?;
    first.sub(&second)
}

/// `C(f,g,h) = (𝒟^{-1}(f≺g))∘h - f·(h∘𝒟^{-1}g)` with `𝒟 = m - Δ`.
pub fn comm_c(
    f: &RealField,
    g: &RealField,
    h: &RealField,
    m: f64,
    part: &DyadicPartition,
) -> Result<RealField> {
    let green = torus::green_multiplier(part.grid(), m)?;
    let hb = part.decompose(h)?;
    let fg = para_lt(f, g, part)?;
    let first = resonant_blocks(
        &part.decompose(&torus::apply_multiplier(&fg, &green)?)?,
        &hb,
    );
    let dg = torus::apply_multiplier(g, &green)?;
    let second = f.mul(&resonant_blocks(&hb, &part.decompose(&dg)?))?;
    first.sub(&second)
}

/// `C̄(f,g,h) = 𝓘(f≺g)∘h - f·(𝓘(g)∘h)` along a path, with the discrete `𝓘`
/// of [`crate::dynamics::duhamel_path`].
pub fn comm_cbar(
    f_path: &[RealField],
    g_path: &[RealField],
    h_path: &[RealField],
    dt: f64,
    m: f64,
    part: &DyadicPartition,
) -> Result<Vec<RealField>> {
    if f_path.len() != g_path.len() || g_path.len() != h_path.len() {
        return Err(Error::ShapeMismatch(format!(
            "path lengths {}, {}, {} differ",
            f_path.len(),
            g_path.len(),
            h_path.len()
        )));
    }
    let fg: Vec<RealField> = f_path
        .iter()
        .zip(g_path)
        .map(|(f, g)| para_lt(f, g, part))
        .collect::<Result<_>>()?;
    let i_fg = crate::dynamics::duhamel_path(&fg, dt, m)?;
    let i_g = crate::dynamics::duhamel_path(g_path, dt, m)?;
    let mut out = Vec::with_capacity(f_path.len());
    for n in 0..f_path.len() {
        let hb = part.decompose(&h_path[n])?;
        let first = resonant_blocks(&part.decompose(&i_fg[n])?, &hb);
        let second = f_path[n].mul(&resonant_blocks(&part.decompose(&i_g[n])?, &hb))?;
        out.push(first.sub(&second)?);
    }
    Ok(out)
}

/// One row of the measured-constant table.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantRow {
    pub lemma_id: &'static str,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub p: f64,
    pub q: f64,
    pub m: usize,
    pub samples: usize,
    pub measured_k: f64,
}

impl ConstantRow {
    pub const CSV_HEADER: &'static str = "lemma_id,alpha,beta,gamma,p,q,M,samples,measured_K";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{:.6e}",
            self.lemma_id,
            self.alpha,
            self.beta,
            self.gamma,
            self.p,
            self.q,
            self.m,
            self.samples,
            self.measured_k
        )
    }
}

/// Random field with independent Gaussian modes scaled by `(1+|k|²)^{-s/2}`.
pub fn random_sobolev_field(grid: &Arc<Grid>, s: f64, rng: &mut ChaCha8Rng) -> RealField {
    let partner = grid.partner();
    let mut coeffs = vec![num_complex::Complex64::new(0.0, 0.0); grid.n_sites()];
    for idx in 0..grid.n_sites() {
        let p = partner[idx];
        if p < idx {
            continue;
        }
        let w = (1.0 + grid.k2()[idx]).powf(-s / 2.0);
        let a: f64 = StandardNormal.sample(rng);
        if p == idx {
            coeffs[idx] = num_complex::Complex64::new(w * a, 0.0);
        } else {
            let b: f64 = StandardNormal.sample(rng);
            let c = num_complex::Complex64::new(a, b) * (w / 2f64.sqrt());
            coeffs[idx] = c;
            coeffs[p] = c.conj();
        }
    }
    from_spectrum(&Spectrum::new(grid, coeffs).expect("grid-sized spectrum"))
}

const SUITE_SMOOTHNESS: f64 = 2.0;
const HEAT_TIMES: [f64; 7] = [1e-3, 3e-3, 1e-2, 3e-2, 0.1, 0.3, 1.0];

/// Supremum over random inputs of (output norm)/(product of input norms) for
/// each paraproduct, heat-flow, embedding, interpolation, duality and
/// commutator inequality, on a `d = 1` grid with `M` points.
pub fn measure_operator_constants(
    m_points: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<ConstantRow>> {
    if samples == 0 {
        return Err(Error::param("samples", "need at least one sample"));
    }
    let grid = torus::create_grid(1, m_points, 2.0 * std::f64::consts::PI)?;
    let part = DyadicPartition::new(&grid);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inf = f64::INFINITY;
    let row = |lemma_id, alpha, beta, gamma, p, q, k| ConstantRow {
        lemma_id,
        alpha,
        beta,
        gamma,
        p,
        q,
        m: m_points,
        samples,
        measured_k: k,
    };
    let b = |a, p, q| BesovParams { alpha: a, p, q };
    let mut k = [0.0f64; 10];
    for _ in 0..samples {
        let f = random_sobolev_field(&grid, SUITE_SMOOTHNESS, &mut rng);
        let g = random_sobolev_field(&grid, SUITE_SMOOTHNESS, &mut rng);
        let h = random_sobolev_field(&grid, SUITE_SMOOTHNESS, &mut rng);
        let fb = part.decompose(&f)?;
        let gb = part.decompose(&g)?;
        let nrm = |x: &Blocks, bp| besov_norm_blocks(x, &bp);

        let lt = part.decompose(&para_lt_blocks(&fb, &gb))?;
        let r0 =
            nrm(&lt, b(-0.5, 2.0, 2.0)) / (torus::norm_lp(&f, inf)? * nrm(&gb, b(-0.5, 2.0, 2.0)));
        let r1 = nrm(&lt, b(-1.0, 2.0, 2.0))
            / (nrm(&fb, b(-0.5, inf, 2.0)) * nrm(&gb, b(-0.5, 2.0, 2.0)));
        let res = part.decompose(&resonant_blocks(&fb, &gb))?;
        let r2 = nrm(&res, b(0.2, 2.0, 2.0))
            / (nrm(&fb, b(0.7, inf, 2.0)) * nrm(&gb, b(-0.5, 2.0, 2.0)));

        let mut r3 = 0.0f64;
        let base = nrm(&fb, BesovParams::holder(-0.5));
        for &t in &HEAT_TIMES {
            let pt = part.decompose(&torus::heat_flow(&f, t, 1.0)?)?;
            r3 = r3.max(nrm(&pt, BesovParams::holder(0.5)) * t.sqrt() / base);
        }

        let r4 = nrm(&fb, b(-0.5, 2.0, 2.0)) / nrm(&fb, b(0.0, 1.0, 1.0));
        let r5 = torus::sobolev_norm2(&f, 0.0).sqrt()
            / (torus::sobolev_norm2(&f, -1.0).powf(0.25)
                * torus::sobolev_norm2(&f, 1.0).powf(0.25));

        let hb = part.decompose(&h)?;
        let ct = part.decompose(&comm_ctilde(&f, &g, &h, &part)?)?;
        let r6 = nrm(&ct, b(0.1, 2.0, inf))
            / (nrm(&fb, b(0.8, inf, inf))
                * nrm(&gb, BesovParams::holder(-0.5))
                * nrm(&hb, b(-0.2, 2.0, inf)));
        let d = comm_d(&f, &g, &h, &part)?;
        let r7 = d.abs()
            / (nrm(&fb, BesovParams::sobolev(0.8))
                * nrm(&gb, BesovParams::holder(-0.5))
                * nrm(&hb, BesovParams::sobolev(-0.2)));
        let c = part.decompose(&comm_c(&f, &g, &h, 1.0, &part)?)?;
        let r8 = nrm(&c, BesovParams::sobolev(-0.2))
            / (nrm(&fb, BesovParams::sobolev(0.5))
                * nrm(&gb, BesovParams::holder(-1.1))
                * nrm(&hb, BesovParams::holder(-1.05)));
        let r9 = torus::inner(&f, &g)?.abs()
            / (nrm(&fb, BesovParams::sobolev(0.5)) * nrm(&gb, BesovParams::sobolev(-0.5)));

        for (slot, r) in k.iter_mut().zip([r0, r1, r2, r3, r4, r5, r6, r7, r8, r9]) {
            if r.is_finite() {
                *slot = slot.max(r);
            }
        }
    }
    Ok(vec![
        row("para_lt_lp", 0.0, -0.5, 0.0, 2.0, 2.0, k[0]),
        row("para_lt_neg", -0.5, -0.5, 0.0, 2.0, 2.0, k[1]),
        row("resonant", 0.7, -0.5, 0.0, 2.0, 2.0, k[2]),
        row("heat", -0.5, 1.0, 0.0, inf, inf, k[3]),
        row("embedding", 0.0, -0.5, 0.0, 1.0, 1.0, k[4]),
        row("interpolation", 1.0, -1.0, 0.5, 2.0, 2.0, k[5]),
        row("com1_ctilde", 0.8, -0.5, -0.2, 2.0, inf, k[6]),
        row("com3_d", 0.8, -0.5, -0.2, 2.0, 2.0, k[7]),
        row("com2_c", 0.5, -1.1, -1.1, 2.0, 2.0, k[8]),
        row("duality", 0.5, -0.5, 0.0, 2.0, 2.0, k[9]),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn setup(d: usize, m: usize) -> (Arc<Grid>, DyadicPartition) {
        let g = torus::create_grid(d, m, 2.0 * PI).unwrap();
        let p = DyadicPartition::new(&g);
        (g, p)
    }

    #[test]
    fn bump_shape() {
        assert_eq!(psi(0.0), 1.0);
        assert_eq!(psi(0.6), 1.0);
        assert_eq!(psi(1.0), 0.0);
        assert!(psi(0.8) > 0.0 && psi(0.8) < 1.0);
        assert!(psi(0.7) > psi(0.9));
    }

    #[test]
    fn partition_sums_to_one_and_is_local() {
        for (d, m) in [(1, 8), (1, 32), (2, 16), (3, 8)] {
            let (g, p) = setup(d, m);
            for idx in 0..g.n_sites() {
                let s: f64 = (-1..=p.j_max())
                    .map(|j| p.table(j).unwrap().values()[idx])
                    .sum();
                assert!((s - 1.0).abs() < 1e-15);
                for i in -1..=p.j_max() {
                    for j in (i + 2)..=p.j_max() {
                        let a = p.table(i).unwrap().values()[idx];
                        let b = p.table(j).unwrap().values()[idx];
                        assert_eq!(a * b, 0.0);
                    }
                }
            }
        }
        let (_, p) = setup(1, 16);
        assert_eq!(p.j_max(), 3);
        assert!(p.table(4).is_err());
        assert!(p.table(-2).is_err());
    }

    #[test]
    fn constant_field_blocks() {
        let (g, p) = setup(2, 8);
        let c = RealField::constant(&g, 1.5);
        assert!(lp_block(&c, -1, &p).unwrap().max_abs_diff(&c) < 1e-13);
        for j in 0..=p.j_max() {
            assert!(lp_block(&c, j, &p).unwrap().max_abs() < 1e-13);
        }
        let bp = BesovParams::new(0.7, 3.0, 2.0).unwrap();
        let expect = 2f64.powf(-0.7) * 1.5 * (2.0 * PI).powf(2.0 / 3.0);
        assert!((besov_norm(&c, &bp, &p) - expect).abs() < 1e-12);
    }

    #[test]
    fn single_mode_support() {
        let (g, p) = setup(1, 32);
        let f = RealField::from_fn(&g, |x| (8.0 * x[0]).cos());
        let active: Vec<i32> = (-1..=p.j_max())
            .filter(|&j| lp_block(&f, j, &p).unwrap().max_abs() > 1e-12)
            .collect();
        assert!(!active.is_empty() && active.len() <= 2, "{active:?}");
    }

    #[test]
    fn sobolev_matches_weighted_parseval() {
        let (g, p) = setup(1, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_sobolev_field(&g, 0.5, &mut rng);
        let alpha = 0.3;
        let s = to_spectrum(&f);
        let mut direct = 0.0;
        for j in -1..=p.j_max() {
            let t = p.table(j).unwrap();
            let blk: f64 = s
                .coeffs()
                .iter()
                .zip(t.values())
                .map(|(c, r)| r * r * c.norm_sqr())
                .sum();
            direct += 2f64.powf(2.0 * j as f64 * alpha) * blk;
        }
        let via = besov_norm(&f, &BesovParams::sobolev(alpha), &p);
        assert!((via - direct.sqrt()).abs() < 1e-12 * via);
    }

    #[test]
    fn paraproduct_reconstruction() {
        for (d, m) in [(1, 8), (1, 16), (2, 8)] {
            let (g, p) = setup(d, m);
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let f = random_sobolev_field(&g, 0.0, &mut rng);
            let h = random_sobolev_field(&g, 0.0, &mut rng);
            let sum = para_lt(&f, &h, &p)
                .unwrap()
                .add(&resonant(&f, &h, &p).unwrap())
                .unwrap()
                .add(&para_gt(&f, &h, &p).unwrap())
                .unwrap();
            assert!(sum.max_abs_diff(&f.mul(&h).unwrap()) < 1e-12);
            let blocks = p.decompose(&f).unwrap();
            assert!(blocks.sum().max_abs_diff(&f) < 1e-12);
        }
    }

    #[test]
    fn paraproduct_edge_cases() {
        let (g, p) = setup(1, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_sobolev_field(&g, 0.0, &mut rng);
        let zero = RealField::zeros(&g);
        assert_eq!(para_lt(&f, &zero, &p).unwrap().max_abs(), 0.0);
        assert_eq!(resonant(&f, &zero, &p).unwrap().max_abs(), 0.0);
        let c = RealField::constant(&g, 2.0);
        let lt = para_lt(&c, &f, &p).unwrap();
        let expect = localize_high(&f, 0, &p).unwrap().scale(2.0);
        assert!(lt.max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn localizers_complete() {
        let (g, p) = setup(2, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = random_sobolev_field(&g, 0.0, &mut rng);
        for level in -3..=p.j_max() + 1 {
            let s = localize_high(&f, level, &p)
                .unwrap()
                .add(&localize_low(&f, level, &p).unwrap())
                .unwrap();
            assert!(s.max_abs_diff(&f) < 1e-12);
        }
        assert!(localize_high(&f, p.j_max(), &p).unwrap().max_abs() < 1e-13);
        assert!(localize_high(&f, -2, &p).unwrap().max_abs_diff(&f) < 1e-12);
    }

    #[test]
    fn commutators_trivial_cases() {
        let (g, p) = setup(1, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_sobolev_field(&g, 0.0, &mut rng);
        let h = random_sobolev_field(&g, 0.0, &mut rng);
        let k = random_sobolev_field(&g, 0.0, &mut rng);
        let zero = RealField::zeros(&g);
        assert_eq!(comm_d(&f, &zero, &h, &p).unwrap(), 0.0);
        assert_eq!(comm_ctilde(&f, &h, &zero, &p).unwrap().max_abs(), 0.0);
        assert_eq!(comm_c(&f, &zero, &h, 1.0, &p).unwrap().max_abs(), 0.0);
        assert!(comm_c(&f, &h, &k, 0.0, &p).is_err());
        let d1 = comm_d(&f.scale(2.5), &h, &k, &p).unwrap();
        let d0 = comm_d(&f, &h, &k, &p).unwrap();
        assert!((d1 - 2.5 * d0).abs() < 1e-12 * d0.abs().max(1.0));
        let big = comm_c(&f, &h, &k, 1e8, &p).unwrap().max_abs();
        let small = comm_c(&f, &h, &k, 1.0, &p).unwrap().max_abs();
        assert!(big < 1e-6 * small.max(1e-300) || big < 1e-9);
    }

    #[test]
    fn measured_constants_are_finite() {
        let rows = measure_operator_constants(8, 5, 1).unwrap();
        assert_eq!(rows.len(), 10);
        for r in &rows {
            assert!(r.measured_k.is_finite() && r.measured_k > 0.0, "{r:?}");
        }
        let interp = rows.iter().find(|r| r.lemma_id == "interpolation").unwrap();
        assert!(interp.measured_k <= 1.0 + 1e-12);
    }
}
