use proptest::prelude::*;

use ultracalc_core::basis::{basis_pair, delta, reconstruct_from_values};
use ultracalc_core::calculus::{build_d, build_d2, ftc, ibp_defect, ibp_piecewise};
use ultracalc_core::projection::{integrate_product, tilde, FunctionHandle};
use ultracalc_core::{Grid, Space, Ultrafunction};

fn space_strategy() -> impl Strategy<Value = Space> {
    (1usize..10, 0usize..5, 0.5f64..3.0).prop_map(|(ell, p, beta)| Space::build(Grid::build_uniform(beta, ell).unwrap(), p))
}

fn member(space: &Space, seed: &[f64]) -> Ultrafunction {
    let coeffs = (0..space.dim()).map(|i| seed[i % seed.len()] * (1.0 + i as f64).sin()).collect();
    Ultrafunction::from_coeffs(space, coeffs).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn delta_reproduces_point_values(
        space in space_strategy(),
        seed in prop::collection::vec(-1.0f64..1.0, 1..8),
        t in 0.0f64..=1.0,
    ) {
        let beta = space.grid().beta();
        let q = -beta + 2.0 * beta * t;
        let u = member(&space, &seed);
        let d = delta(&space, q).unwrap();
        prop_assert!((u.inner(&d).unwrap() - u.eval(q)).abs() <= 1e-10 * (1.0 + u.norm()));
    }

    #[test]
    fn delta_at_every_node_reproduces_the_average(space in space_strategy(), seed in prop::collection::vec(-1.0f64..1.0, 1..8)) {
        let u = member(&space, &seed);
        for &x in space.grid().nodes() {
            let d = delta(&space, x).unwrap();
            prop_assert!((u.inner(&d).unwrap() - u.eval(x)).abs() <= 1e-10 * (1.0 + u.norm()));
        }
    }

    #[test]
    fn ibp_and_ftc_hold(
        space in space_strategy(),
        a in prop::collection::vec(-1.0f64..1.0, 1..8),
        b in prop::collection::vec(-1.0f64..1.0, 1..8),
        n in 0usize..10,
        m in 0usize..10,
    ) {
        let (u, v) = (member(&space, &a), member(&space, &b));
        let ell = space.num_cells();
        let (n, m) = (n.min(m).min(ell), n.max(m).min(ell));
        let d = build_d(&space);
        prop_assert!(ibp_defect(&d, &u, &v).unwrap().holds());
        prop_assert!(ftc(&d, &u, n, m).unwrap().holds());
        prop_assert!(ibp_piecewise(&build_d2(&space), &u, &v, n, m).unwrap().holds());
    }

    #[test]
    fn derivative_is_linear(
        space in space_strategy(),
        a in prop::collection::vec(-1.0f64..1.0, 1..8),
        b in prop::collection::vec(-1.0f64..1.0, 1..8),
        s in -3.0f64..3.0,
    ) {
        let (u, v) = (member(&space, &a), member(&space, &b));
        let d = build_d(&space);
        let lhs = d.apply(&u.lin_comb(s, &v, 1.0).unwrap()).unwrap();
        let rhs = d.apply(&u).unwrap().lin_comb(s, &d.apply(&v).unwrap(), 1.0).unwrap();
        prop_assert!(lhs.max_coeff_diff(&rhs).unwrap() <= 1e-12 * (1.0 + lhs.norm()));
    }

    #[test]
    fn sigma_round_trip(space in space_strategy(), seed in prop::collection::vec(-1.0f64..1.0, 1..8), shift in 0.05f64..0.9) {
        // p + 1 distinct interior points per cell
        let n = space.local_dim();
        let points: Vec<f64> = space
            .grid()
            .cells()
            .flat_map(|(lo, hi)| (0..n).map(move |i| lo + (hi - lo) * (i as f64 + shift) / n as f64))
            .collect();
        let pair = basis_pair(&space, &points).unwrap();
        let u = member(&space, &seed);
        let back = reconstruct_from_values(&pair, &pair.sample(&u)).unwrap();
        let cond = pair.condition().iter().cloned().fold(1.0, f64::max);
        prop_assert!(back.max_coeff_diff(&u).unwrap() <= 1e-13 * cond);
    }

    #[test]
    fn projection_defining_property(
        space in space_strategy(),
        seed in prop::collection::vec(-1.0f64..1.0, 1..8),
        w in 0.1f64..6.0,
    ) {
        let f = FunctionHandle::new(move |x: f64| (w * x).sin() + (x * 0.5).exp());
        let ft = tilde(&space, &f).unwrap();
        let v = member(&space, &seed);
        let d = (ft.inner(&v).unwrap() - integrate_product(&space, &f, &v).unwrap()).abs();
        prop_assert!(d <= 1e-10 * (1.0 + ft.norm() * v.norm()));
    }
}
