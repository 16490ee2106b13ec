use effcache_core::games::{allocate, cooperative_total, find_psne, verify_psne, AllocationBasis};
use effcache_core::lp::{solve, LinearProgram, LpStatus};
use effcache_core::model::{
    independent_single_demand, pure_caching_throughput, Instance, PreferenceMatrix,
};
use effcache_core::presets::{random_row, random_two_user};
use effcache_core::twouser::{
    boundary_sweep, build_scalarized_lp, expected_throughput, uniform_alpha_grid, TwoUserPlacement,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn random_lp(rng: &mut impl Rng, n: usize, m: usize) -> LinearProgram {
    let objective = (0..n).map(|_| rng.gen_range(-3..=5) as f64).collect();
    let rows = (0..m)
        .map(|_| (0..n).map(|_| rng.gen_range(-2..=6) as f64).collect())
        .collect();
    let rhs = (0..m).map(|_| rng.gen_range(-2..=10) as f64).collect();
    LinearProgram::new(objective, rows, rhs).unwrap()
}

fn random_placement(rng: &mut impl Rng, inst: &Instance) -> TwoUserPlacement {
    let n = inst.num_items();
    let mut fit = |cap: f64| {
        let mut x: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let used: f64 = x.iter().sum();
        if used > cap {
            x.iter_mut().for_each(|v| *v *= cap / used);
        }
        x
    };
    let u = fit(inst.capacity(0));
    let v = fit(inst.capacity(1));
    let w = (0..n)
        .map(|i| {
            let lo = (u[i] + v[i] - 1.0).max(0.0);
            let hi = u[i].min(v[i]);
            lo + rng.gen::<f64>() * (hi - lo).max(0.0)
        })
        .collect();
    TwoUserPlacement::new(u, v, w).unwrap()
}

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn product_demands_reproduce_marginals(seed in any::<u64>(), k in 1usize..4, n in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..k).map(|_| random_row(&mut rng, n)).collect();
        let p = PreferenceMatrix::new(rows.clone()).unwrap();
        let dist = independent_single_demand(&p).unwrap();
        let total: f64 = dist.support().iter().map(|(_, q)| q).sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        let marg = dist.marginals(n);
        for (mk, rk) in marg.iter().zip(&rows) {
            for (a, b) in mk.iter().zip(rk) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn pure_caching_is_concave_and_saturates(seed in any::<u64>(), n in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let row = random_row(&mut rng, n);
        let steps = 4 * n;
        let vals: Vec<f64> = (0..=steps)
            .map(|i| pure_caching_throughput(&row, i as f64 / 4.0).unwrap())
            .collect();
        for w in vals.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12);
        }
        for w in vals.windows(3) {
            prop_assert!(w[2] - 2.0 * w[1] + w[0] <= 1e-12);
        }
        let mass: f64 = row.iter().sum();
        prop_assert_eq!(pure_caching_throughput(&row, n as f64).unwrap(), mass);
    }

    #[test]
    fn scaling_objective_scales_value_keeps_basis(seed in any::<u64>(), lambda in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lp = random_lp(&mut rng, 5, 7);
        let base = solve(&lp).unwrap();
        let scaled_obj = lp.objective().iter().map(|c| c * lambda).collect();
        let scaled = solve(&lp.with_objective(scaled_obj).unwrap()).unwrap();
        prop_assert_eq!(base.status, scaled.status);
        if base.status == LpStatus::Optimal {
            prop_assert!((scaled.value - lambda * base.value).abs() <= 1e-9 * (1.0 + scaled.value.abs()));
            prop_assert_eq!(&base.basis, &scaled.basis);
        }
    }

    #[test]
    fn optimal_duals_certify_value(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lp = random_lp(&mut rng, 4, 6);
        let sol = solve(&lp).unwrap();
        if sol.status == LpStatus::Optimal {
            prop_assert!(lp.max_violation(&sol.x) <= 1e-9);
            prop_assert!(sol.duals.iter().all(|&y| y >= -1e-9));
            for j in 0..lp.n_vars() {
                let col: f64 = lp.rows().iter().zip(&sol.duals).map(|(r, y)| r[j] * y).sum();
                prop_assert!(col >= lp.objective()[j] - 1e-9);
            }
            let bound: f64 = lp.rhs().iter().zip(&sol.duals).map(|(h, y)| h * y).sum();
            prop_assert!((bound - sol.value).abs() <= 1e-8);
        }
    }

    #[test]
    fn scalarized_optimum_dominates_any_placement(seed in any::<u64>(), alpha in 0.0f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_two_user(&mut rng, 5).unwrap();
        let s = build_scalarized_lp(&inst, alpha).unwrap();
        let sol = solve(&s.program).unwrap();
        prop_assert!(sol.is_optimal());
        let best = sol.value + s.constant;
        for _ in 0..10 {
            let pl = random_placement(&mut rng, &inst);
            let r = expected_throughput(&inst, &pl).unwrap();
            prop_assert!(best >= alpha * r.r1 + (1.0 - alpha) * r.r2 - 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn boundary_vertices_are_consistent_and_concave(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_two_user(&mut rng, 4).unwrap();
        let sweep = boundary_sweep(&inst, &uniform_alpha_grid(41)).unwrap();
        let verts = &sweep.boundary.vertices;
        prop_assert!(!verts.is_empty());
        for v in verts {
            let r = expected_throughput(&inst, &v.placement).unwrap();
            prop_assert!((r.r1 - v.point.r1).abs() <= 1e-8 && (r.r2 - v.point.r2).abs() <= 1e-8);
        }
        for w in verts.windows(2) {
            prop_assert!(w[0].point.r1 > w[1].point.r1 && w[0].point.r2 < w[1].point.r2);
        }
        for w in verts.windows(3) {
            let (a, b, c) = (w[0].point, w[1].point, w[2].point);
            let cross = (b.r1 - a.r1) * (c.r2 - a.r2) - (b.r2 - a.r2) * (c.r1 - a.r1);
            prop_assert!(cross > 0.0, "chain turns the wrong way: {cross}");
        }
    }

    #[test]
    fn equilibria_respect_the_cooperative_optimum(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_two_user(&mut rng, 6).unwrap();
        let rc = cooperative_total(&inst).unwrap();
        let ne = find_psne(&inst, 100, 1e-5, seed).unwrap();
        if ne.converged {
            prop_assert!(ne.payoffs.sum() <= rc + 1e-6);
            prop_assert!(verify_psne(&inst, &ne.placement, 1e-6));
        }
        let pure: f64 = inst.pure_caching().iter().sum();
        prop_assert!(pure <= rc + 1e-9);
    }

    #[test]
    fn allocation_is_efficient_and_rational(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_two_user(&mut rng, 6).unwrap();
        let out = allocate(&inst, 100, 1e-5, seed).unwrap();
        let a = out.allocation;
        prop_assert!((a.r1c + a.r2c - a.total).abs() <= 1e-9);
        let base = out.baseline();
        prop_assert!(a.r1c >= base.r1 - 1e-9 && a.r2c >= base.r2 - 1e-9);
        prop_assert_eq!(a.basis == AllocationBasis::NashBased, out.nash.converged);
    }
}
