use proptest::prelude::*;

use ergolab::averaging::{apply_operator, cube_operator, lp_norm, random_subset_operator, shell_operator, Norm};
use ergolab::cli::random_observable;
use ergolab::sculptor::{build_stage, StageGeometry, ValueOrder};
use ergolab::distributions::TargetLaw;
use ergolab::space::FiniteSystem;
use ergolab::towers::rokhlin_tower_1d;

fn system(dims: &[usize]) -> FiniteSystem {
    FiniteSystem::torus(dims).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn adjoint_is_the_transpose(a in 3usize..20, b in 3usize..20, n in 1usize..6, seed in 0u64..1000) {
        let s = system(&[a, b]);
        let (f, g) = (random_observable(&s, seed, false), random_observable(&s, seed + 1, false));
        for p in [cube_operator(n, 2).unwrap(), random_subset_operator(n as u32, 2, seed).unwrap()] {
            let lhs = s.inner(&apply_operator(&p, &s, &f).unwrap(), &g);
            let rhs = s.inner(&f, &apply_operator(&p.adjoint(), &s, &g).unwrap());
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn averages_contract_and_keep_the_mean(m in 2usize..500, n in 1usize..40, seed in 0u64..1000) {
        let s = system(&[m]);
        let f = random_observable(&s, seed, false);
        for p in [cube_operator(n, 1).unwrap(), shell_operator(n as u32, 1.5, 1).unwrap()] {
            let pf = apply_operator(&p, &s, &f).unwrap();
            prop_assert!((s.mean(&pf) - s.mean(&f)).abs() < 1e-12);
            prop_assert!(lp_norm(&pf, &s, Norm::L2) <= lp_norm(&f, &s, Norm::L2) + 1e-12);
            prop_assert!(lp_norm(&pf, &s, Norm::Sup) <= lp_norm(&f, &s, Norm::Sup) + 1e-12);
        }
    }

    #[test]
    fn composition_is_sequential_application(m in 5usize..200, n in 1usize..8, k in 1usize..8, seed in 0u64..100) {
        let s = system(&[m]);
        let f = random_observable(&s, seed, false);
        let (p, q) = (cube_operator(n, 1).unwrap(), shell_operator(k as u32, 2.0, 1).unwrap());
        let direct = apply_operator(&p.compose(&q).unwrap(), &s, &f).unwrap();
        let seq = apply_operator(&p, &s, &apply_operator(&q, &s, &f).unwrap()).unwrap();
        prop_assert!(lp_norm(&direct.sub(&seq), &s, Norm::Sup) < 1e-12);
    }

    #[test]
    fn rokhlin_residual_stays_under_bound(m in 50usize..5000, n in 1usize..40) {
        prop_assume!(n * 2 <= m);
        let s = system(&[m]);
        let t = rokhlin_tower_1d(&s, n, 1.0).unwrap();
        prop_assert!(t.tower.residual_measure() <= t.bound + 1e-12);
        prop_assert_eq!(t.tower.base().len() * n + t.tower.residual().len(), m);
    }

    #[test]
    fn stages_are_centered_and_periodic(k in 1usize..6, q in 2usize..60, reps in 1usize..5) {
        prop_assume!(q > k);
        let s = system(&[q * reps]);
        let geo = StageGeometry::new(q, k).unwrap();
        let t = TargetLaw::Uniform { low: -1.0, high: 3.0 };
        let (_, g) = build_stage(&s, 1, geo, &t, ValueOrder::Zigzag, 2.0).unwrap();
        prop_assert!(s.mean(&g).abs() < 1e-10);
        let p = apply_operator(&cube_operator(q, 1).unwrap(), &s, &g).unwrap();
        prop_assert!(lp_norm(&p, &s, Norm::Sup) < 1e-10);
    }
}
