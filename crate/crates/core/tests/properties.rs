//! Randomized invariants of the completions, the solvers and the
//! multi-antenna reduction.

use nalgebra::Complex;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use risopt_core::channels::rayleigh_vector;
use risopt_core::linalg::{
    haar_unitary, max_abs_diff, numerical_rank, psd_sqrt, thin_svd, unitarity_deviation,
    unitary_completion_matrix, unitary_completion_vector, RANK_TOL,
};
use risopt_core::multiantenna::{
    build_reduced_problem, rank_reduce_constraints, reconstruct_theta, MultiAntennaScenario,
};
use risopt_core::rng::{complex_normal, RngStream};
use risopt_core::solver::{
    self, group_frames, optimal_blocks, sample_feasible, solve_group_two_operator,
};
use risopt_core::validation::random_instance;
use risopt_core::{ComplexMatrix, ComplexVector, RisArchitecture};

const LAYOUTS: [(usize, usize, usize); 9] = [
    (4, 1, 2),
    (4, 2, 2),
    (8, 4, 2),
    (8, 8, 2),
    (8, 2, 3),
    (12, 3, 3),
    (12, 4, 3),
    (8, 2, 4),
    (16, 8, 4),
];

fn rng(seed: u64) -> ChaCha8Rng {
    RngStream::new(seed, 0x70).generator()
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| complex_normal(rng, 1.0))
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(48)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn vector_completion_maps_first_axis(seed in any::<u64>(), n in 1usize..10) {
        let mut r = rng(seed);
        let x = rayleigh_vector(n, 1.0, &mut r);
        let u = unitary_completion_vector(&x, n).unwrap().u;
        prop_assert!(unitarity_deviation(&u) <= 1e-12);
        let y = u.adjoint() * &x;
        prop_assert!((y[0] - Complex64::new(x.norm(), 0.0)).norm() <= 1e-12 * x.norm());
        prop_assert!(y.rows(1, n - 1).norm() <= 1e-12 * x.norm());
    }

    #[test]
    fn vector_completion_ignores_positive_scale(seed in any::<u64>(), n in 1usize..10, scale in 1e-6f64..1e6) {
        let mut r = rng(seed);
        let x = rayleigh_vector(n, 1.0, &mut r);
        let a = unitary_completion_vector(&x, n).unwrap().u;
        let b = unitary_completion_vector(&(&x * Complex64::new(scale, 0.0)), n).unwrap().u;
        prop_assert!(max_abs_diff(&a, &b) <= 1e-12);
    }

    #[test]
    fn matrix_completion_anchors_polar_factor(seed in any::<u64>(), n in 2usize..9, m in 1usize..4) {
        prop_assume!(m <= n);
        let mut r = rng(seed);
        let x = gaussian_matrix(n, m, &mut r);
        let uc = unitary_completion_matrix(&x).unwrap();
        prop_assert_eq!(uc.anchor_cols, m);
        prop_assert!(unitarity_deviation(&uc.u) <= 1e-10);
        let lhs = uc.u.adjoint() * &x;
        let mut rhs = ComplexMatrix::zeros(n, m);
        rhs.rows_mut(0, m).copy_from(&psd_sqrt(&(x.adjoint() * &x)).unwrap());
        prop_assert!(max_abs_diff(&lhs, &rhs) <= 1e-10 * x.norm());
    }

    #[test]
    fn thin_svd_recomposes_rank_deficient_input(
        seed in any::<u64>(),
        rows in 1usize..9,
        cols in 1usize..9,
        rank in 0usize..9,
    ) {
        let mut r = rng(seed);
        let k = rows.min(cols);
        let rank = rank.min(k);
        let m = gaussian_matrix(rows, rank, &mut r) * gaussian_matrix(rank, cols, &mut r);
        let svd = thin_svd(&m);
        prop_assert_eq!(svd.singular_values.len(), k);
        prop_assert!(svd.singular_values.windows(2).all(|w| w[0] >= w[1]));
        let scale = m.norm().max(1.0);
        prop_assert!(max_abs_diff(&svd.recompose(), &m) <= 1e-12 * scale);
        let eye = ComplexMatrix::identity(k, k);
        prop_assert!(max_abs_diff(&(svd.u.adjoint() * &svd.u), &eye) <= 1e-12);
        prop_assert!(max_abs_diff(&(svd.v.adjoint() * &svd.v), &eye) <= 1e-12);
        prop_assert_eq!(numerical_rank(&m, RANK_TOL), rank);
    }

    #[test]
    fn solution_is_feasible_and_dominates(seed in any::<u64>(), layout in 0usize..LAYOUTS.len()) {
        let (n, gs, l) = LAYOUTS[layout];
        let arch = RisArchitecture::with_group_size(n, gs).unwrap();
        let mut r = rng(seed);
        let (ch, t) = random_instance(&arch, l, &mut r).unwrap();
        let sol = solver::solve(&ch, &t, &arch).unwrap();
        prop_assert!(sol.theta.max_unitarity_deviation() <= 1e-10);
        for res in sol.constraint_residuals(&ch, &t) {
            prop_assert!(res <= 1e-9, "residual {}", res);
        }
        prop_assert!(relative(sol.achieved_power(&ch), sol.optimal_power) <= 1e-9);
        for _ in 0..8 {
            let other = sample_feasible(&ch, &t, &arch, &mut r).unwrap();
            let p = solver::received_power(&other.to_dense(), &ch.h_ri, &ch.h_it[0], 1.0).unwrap();
            prop_assert!(p <= sol.optimal_power * (1.0 + 1e-9), "{} > {}", p, sol.optimal_power);
        }
    }

    #[test]
    fn free_inner_unitary_does_not_matter(seed in any::<u64>(), layout in 0usize..LAYOUTS.len()) {
        let (n, gs, l) = LAYOUTS[layout];
        prop_assume!(gs > l);
        let arch = RisArchitecture::with_group_size(n, gs).unwrap();
        let mut r = rng(seed);
        let (ch, t) = random_instance(&arch, l, &mut r).unwrap();
        let frames = group_frames(&ch, &t, &arch).unwrap();
        let split = |v: &ComplexVector| (0..arch.groups()).map(|g| arch.group_of(v, g)).collect::<Vec<_>>();
        let (hr, h1) = (split(&ch.h_ri), split(&ch.h_it[0]));
        let zero = Complex64::new(0.0, 0.0);
        let (base, _) = optimal_blocks(&frames, &hr, &h1, zero, None).unwrap();
        let free: Vec<ComplexMatrix> = frames.iter().map(|f| haar_unitary(f.free_dim() - 1, &mut r)).collect();
        let (alt, _) = optimal_blocks(&frames, &hr, &h1, zero, Some(&free)).unwrap();
        let p = |b: &risopt_core::BlockDiagonal| b.bilinear(&ch.h_ri, &ch.h_it[0]).norm_sqr();
        prop_assert!(relative(p(&alt), p(&base)) <= 1e-9);
    }

    #[test]
    fn zero_direct_path_matches_baseline(seed in any::<u64>(), gs in prop::sample::select(vec![2usize, 4, 8])) {
        let arch = RisArchitecture::with_group_size(8, gs).unwrap();
        let mut r = rng(seed);
        let (ch, t) = random_instance(&arch, 2, &mut r).unwrap();
        let a = solver::solve(&ch, &t, &arch).unwrap();
        let b = solve_group_two_operator(&ch, &t, &arch, Some(Complex::new(0.0, 0.0))).unwrap();
        prop_assert_eq!(a.optimal_power, b.optimal_power);
    }

    #[test]
    fn received_power_is_linear_in_tx_power(seed in any::<u64>(), p in 1e-3f64..1e3) {
        let arch = RisArchitecture::with_group_size(8, 4).unwrap();
        let mut r = rng(seed);
        let (ch, t) = random_instance(&arch, 2, &mut r).unwrap();
        let theta = solver::solve(&ch, &t, &arch).unwrap().theta_dense();
        let one = solver::received_power(&theta, &ch.h_ri, &ch.h_it[0], 1.0).unwrap();
        let scaled = solver::received_power(&theta, &ch.h_ri, &ch.h_it[0], p).unwrap();
        prop_assert!(relative(scaled, p * one) <= 1e-14);
    }

    #[test]
    fn rank_reduction_preserves_the_constraint(seed in any::<u64>(), gs in 3usize..7) {
        let mut r = rng(seed);
        let x = gaussian_matrix(gs, 2, &mut r);
        let mix = gaussian_matrix(2, 2, &mut r);
        let mut h = ComplexMatrix::zeros(gs, 4);
        h.columns_mut(0, 2).copy_from(&x);
        h.columns_mut(2, 2).copy_from(&(&x * mix));
        let theta = haar_unitary(gs, &mut r);
        let d = &theta * &h;
        let (a, rhs) = rank_reduce_constraints(&h, &d, 1e-10).unwrap();
        prop_assert_eq!(a.ncols(), 2);
        prop_assert!(max_abs_diff(&(&theta * &a), &rhs) <= 1e-10 * h.norm());
        // and conversely: any unitary solving the reduced system solves the original
        let frame = solver::GroupFrame::canonical(&a, &rhs).unwrap();
        let other = frame.block(&haar_unitary(gs - 2, &mut r));
        prop_assert!(max_abs_diff(&(&other * &h), &d) <= 1e-9 * h.norm());
    }

    #[test]
    fn reduction_identity_holds(
        seed in any::<u64>(),
        n_t in prop::sample::select(vec![1usize, 2]),
        n_r in 1usize..3,
        l in 2usize..4,
        extra in 0usize..2,
    ) {
        let tau = (l - 1) * n_t + 1;
        let gs = tau + extra;
        let arch = RisArchitecture::with_group_size(2 * gs, gs).unwrap();
        let mut r = rng(seed);
        let n = arch.n();
        let h_it: Vec<ComplexMatrix> = (0..l).map(|_| gaussian_matrix(n, n_t, &mut r)).collect();
        let theta0 = risopt_core::BlockDiagonal::new((0..arch.groups()).map(|_| haar_unitary(gs, &mut r)).collect())
            .unwrap()
            .to_dense();
        let d_it = h_it[1..].iter().map(|h| &theta0 * h).collect();
        let scenario = MultiAntennaScenario::new(gaussian_matrix(n_r, n, &mut r), h_it, d_it, arch).unwrap();
        let reduced = build_reduced_problem(&scenario).unwrap();
        prop_assert_eq!(reduced.tau, tau);
        prop_assert!(reduced.free_dims.iter().all(|&k| k == gs - tau + 1));
        let blocks: Vec<ComplexMatrix> = reduced.free_dims.iter().map(|&k| haar_unitary(k, &mut r)).collect();
        let theta = reconstruct_theta(&reduced, &blocks).unwrap();
        prop_assert!(scenario.max_constraint_residual(&theta) <= 1e-9);
        let lhs = scenario.effective_channel(&theta);
        let rhs = reduced.objective_channel(&blocks).unwrap();
        prop_assert!((&lhs - &rhs).norm() <= 1e-9 * lhs.norm().max(1.0));
    }
}

#[test]
fn rng_streams_are_reproducible() {
    let mut a = RngStream::derived(5, &[1, 2]).generator();
    let mut b = RngStream::derived(5, &[1, 2]).generator();
    let mut c = RngStream::derived(5, &[2, 1]).generator();
    let xa: Vec<u64> = (0..4).map(|_| a.random()).collect();
    let xb: Vec<u64> = (0..4).map(|_| b.random()).collect();
    let xc: Vec<u64> = (0..4).map(|_| c.random()).collect();
    assert_eq!(xa, xb);
    assert_ne!(xa, xc);
}
