use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sigma_lattice::besov::{self, DyadicPartition};
use sigma_lattice::dynamics::{self, StepContext, SystemState};
use sigma_lattice::measures;
use sigma_lattice::oracle;
use sigma_lattice::stochastic::{self, make_streams, ComponentPattern, TreeEvolver};
use sigma_lattice::torus::{self, from_spectrum, to_spectrum, Grid, RealField, Spectrum};

fn grid(d: usize, m: usize) -> Arc<Grid> {
    torus::create_grid(d, m, 2.0 * std::f64::consts::PI).unwrap()
}

fn fields(g: &Arc<Grid>, n: usize, seed: u64) -> Vec<RealField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| besov::random_sobolev_field(g, 0.5, &mut rng)).collect()
}

fn orthogonal(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<Vec<f64>> = Vec::new();
    while q.len() < n {
        let mut v = measures::gaussian_vec(&mut rng, n);
        for u in &q {
            let p: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(x, y)| *x -= p * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        q.push(v.into_iter().map(|x| x / norm).collect());
    }
    q
}

fn shift_spec(s: &Spectrum, by: [i64; 3]) -> Spectrum {
    to_spectrum(&from_spectrum(s).shifted(by))
}

fn state_of(ctx: &StepContext, seed: u64) -> SystemState {
    let streams = make_streams(seed, ctx.n).unwrap();
    let mut st = dynamics::initial_state(ctx, &streams).unwrap();
    st.phi = fields(&ctx.grid, ctx.n, seed ^ 1);
    st.s = fields(&ctx.grid, ctx.n, seed ^ 2);
    st
}

fn max_diff(a: &[RealField], b: &[RealField]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.max_abs_diff(y)).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn paraproducts_reconstruct_the_product(seed in any::<u64>(), d in 1usize..=2, big in any::<bool>()) {
        let g = grid(d, if big { 16 } else { 8 });
        let part = DyadicPartition::new(&g);
        let f = fields(&g, 2, seed);
        let total = besov::para_lt(&f[0], &f[1], &part).unwrap()
            .add(&besov::resonant(&f[0], &f[1], &part).unwrap()).unwrap()
            .add(&besov::para_gt(&f[0], &f[1], &part).unwrap()).unwrap();
        prop_assert!(total.max_abs_diff(&f[0].mul(&f[1]).unwrap()) < 1e-10);
    }

    #[test]
    fn paraproduct_commutes_with_lattice_shifts(seed in any::<u64>(), sx in -8i64..8, sy in -8i64..8) {
        let g = grid(2, 8);
        let part = DyadicPartition::new(&g);
        let f = fields(&g, 2, seed);
        let by = [sx, sy, 0];
        let lhs = besov::para_lt(&f[0].shifted(by), &f[1].shifted(by), &part).unwrap();
        let rhs = besov::para_lt(&f[0], &f[1], &part).unwrap().shifted(by);
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-10);
    }

    #[test]
    fn observable_is_rotation_invariant(seed in any::<u64>(), n in 2usize..6) {
        let g = grid(1, 16);
        let phi = fields(&g, n, seed);
        let r = orthogonal(n, seed.wrapping_add(3));
        let a = stochastic::wick_a(&g, 1.0).unwrap();
        let o = measures::observable_field(&phi, a).unwrap();
        let or = measures::observable_field(&dynamics::rotate(&phi, &r), a).unwrap();
        prop_assert!(o.max_abs_diff(&or) < 1e-10);
    }

    #[test]
    fn cubic_force_is_rotation_equivariant(seed in any::<u64>(), n in 2usize..5) {
        let g = grid(1, 8);
        let ctx = StepContext::new(&g, n, 1.0, 0.7, 0.01, 0.1, 0, false).unwrap();
        let phi = fields(&g, n, seed);
        let r = orthogonal(n, seed.wrapping_add(5));
        let lhs = ctx.cubic_force(&dynamics::rotate(&phi, &r));
        let rhs = dynamics::rotate(&ctx.cubic_force(&phi), &r);
        prop_assert!(max_diff(&lhs, &rhs) < 1e-10);
    }

    #[test]
    fn step_is_shift_equivariant(seed in any::<u64>(), sx in -16i64..16) {
        let g = grid(1, 16);
        let ctx = StepContext::new(&g, 3, 1.0, 1.0, 0.01, 0.1, 1, false).unwrap();
        let streams = make_streams(seed, 3).unwrap();
        let st = state_of(&ctx, seed);
        let incs = dynamics::increments(&ctx, &streams, 1);
        let by = [sx, 0, 0];
        let shift = |f: &[RealField]| f.iter().map(|x| x.shifted(by)).collect::<Vec<_>>();
        let moved = SystemState {
            phi: shift(&st.phi),
            z: shift(&st.z),
            s: shift(&st.s),
            ..st.clone()
        };
        let moved_incs: Vec<Spectrum> = incs.iter().map(|s| shift_spec(s, by)).collect();
        let a = dynamics::step_phi_with_noise(&moved, &ctx, &moved_incs).unwrap();
        let b = dynamics::step_phi_with_noise(&st, &ctx, &incs).unwrap();
        prop_assert!(max_diff(&a.phi, &shift(&b.phi)) < 1e-10);
        prop_assert!(max_diff(&a.s, &shift(&b.s)) < 1e-10);
    }

    #[test]
    fn step_is_exchangeable(seed in any::<u64>(), k in 0usize..4) {
        let g = grid(1, 8);
        let n = 4;
        let ctx = StepContext::new(&g, n, 1.0, 1.0, 0.01, 0.1, 1, false).unwrap();
        let streams = make_streams(seed, n).unwrap();
        let mut st = state_of(&ctx, seed);
        dynamics::start_x(&mut st, &ctx);
        let incs = dynamics::increments(&ctx, &streams, 1);
        let perm: Vec<usize> = (0..n).map(|i| (i + k) % n).collect();
        let p = |f: &[RealField]| perm.iter().map(|&i| f[i].clone()).collect::<Vec<_>>();
        let permuted = SystemState {
            phi: p(&st.phi),
            z: p(&st.z),
            s: p(&st.s),
            x: st.x.as_deref().map(p),
            ..st.clone()
        };
        let pincs: Vec<Spectrum> = perm.iter().map(|&i| incs[i].clone()).collect();
        let a = dynamics::step_phi_with_noise(&permuted, &ctx, &pincs).unwrap();
        let b = dynamics::step_phi_with_noise(&st, &ctx, &incs).unwrap();
        prop_assert!(max_diff(&a.phi, &p(&b.phi)) < 1e-12);
        prop_assert!(max_diff(a.x.as_ref().unwrap(), &p(b.x.as_ref().unwrap())) < 1e-12);
    }
}

#[test]
fn solve_x_matches_picard_oracle() {
    let g = grid(1, 8);
    let (m, lambda, dt, level) = (1.0, 0.8, 0.02, 1);
    for n in [1usize, 2] {
        let bt = stochastic::wick_btilde(&g, m, 256, 5).unwrap().value;
        let ctx = StepContext::new(&g, n, m, lambda, dt, bt, level, false).unwrap();
        let mut ev = TreeEvolver::new(&g, n, m, dt, 9, bt, ComponentPattern::Independent, Vec::new()).unwrap();
        ev.advance(50).unwrap();
        let s0 = ev.snapshot().s;
        let mut z_path = Vec::new();
        for _ in 0..40 {
            z_path.push(ev.snapshot().z);
            ev.advance(1).unwrap();
        }
        let engine = dynamics::solve_x(&ctx, &z_path, &s0).unwrap();
        let (picard, iters) = oracle::picard_x(&z_path, &s0, m, lambda, dt, level, 1e-13, 200).unwrap();
        let err = engine
            .iter()
            .zip(&picard)
            .map(|(a, b)| max_diff(a, b))
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "N={n}: solve_x vs Picard differ by {err:e} after {iters} sweeps");
    }
}

#[test]
fn p_matches_hand_expansion_for_two_components() {
    let g = grid(1, 16);
    let part = DyadicPartition::new(&g);
    let (m, lambda) = (1.0, 0.9);
    let mut ev = TreeEvolver::new(&g, 2, m, 0.01, 13, 0.1, ComponentPattern::Independent, Vec::new()).unwrap();
    ev.advance(10).unwrap();
    let trees = ev.snapshot();
    let y = fields(&g, 2, 17);
    let (p, phi) = dynamics::compute_p_phi(&y, &trees, lambda).unwrap();
    let w = |i, j| trees.wick2(i, j).unwrap();
    let lt = |f: &RealField, h: &RealField| besov::para_lt(f, h, &part).unwrap();
    let c = lambda / 2.0;
    let p0 = lt(&y[0], &w(0, 0)).scale(3.0).add(&lt(&y[0], &w(1, 1))).unwrap().add(&lt(&y[1], &w(0, 1)).scale(2.0)).unwrap().scale(c);
    let p1 = lt(&y[1], &w(1, 1)).scale(3.0).add(&lt(&y[1], &w(0, 0))).unwrap().add(&lt(&y[0], &w(1, 0)).scale(2.0)).unwrap().scale(c);
    assert!(p[0].max_abs_diff(&p0) < 1e-12);
    assert!(p[1].max_abs_diff(&p1) < 1e-12);
    let phi0 = y[0].add(&torus::green(&p0, m).unwrap()).unwrap();
    assert!(phi[0].max_abs_diff(&phi0) < 1e-12);
}

#[test]
fn free_dynamics_leave_phi_equal_to_z() {
    let g = grid(1, 16);
    let ctx = StepContext::new(&g, 3, 1.0, 0.0, 0.01, 0.1, 0, false).unwrap();
    let streams = make_streams(3, 3).unwrap();
    let mut st = dynamics::initial_state(&ctx, &streams).unwrap();
    for _ in 0..50 {
        st = dynamics::step_phi(&st, &ctx, &streams).unwrap();
    }
    for (p, z) in st.phi.iter().zip(&st.z) {
        assert_eq!(p.values(), z.values());
    }
}
