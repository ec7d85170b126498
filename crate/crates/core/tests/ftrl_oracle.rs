mod common;

use common::{grid_argmin, max_abs_diff};
use proptest::prelude::*;
use spb::ftrl::{ftrl_solve, kkt_residual, HybridRegularizer};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solver_matches_grid_search(
        l in prop::collection::vec(-5.0f64..5.0, 2..=3),
        alpha in 0.05f64..0.95,
        beta in 0.2f64..20.0,
        beta_bar in 0.0f64..10.0,
    ) {
        let reg = HybridRegularizer::new(alpha, beta, beta_bar).unwrap();
        let point = ftrl_solve(&l, &reg).unwrap();
        let oracle = grid_argmin(&l, alpha, beta, beta_bar);
        prop_assert!(max_abs_diff(point.q.as_slice(), &oracle) <= 1e-4,
            "solver {:?} vs grid {:?}", point.q.as_slice(), oracle);
        prop_assert!(kkt_residual(&l, &reg, &point) <= 1e-8);
    }

    #[test]
    fn kkt_holds_for_large_k(
        l in prop::collection::vec(-1e3f64..1e3, 2..=64),
        alpha in 0.01f64..0.99,
        beta in 1e-2f64..1e3,
        beta_bar in 0.0f64..1e3,
    ) {
        let reg = HybridRegularizer::new(alpha, beta, beta_bar).unwrap();
        let point = ftrl_solve(&l, &reg).unwrap();
        prop_assert!(kkt_residual(&l, &reg, &point) <= 1e-8);
        let s: f64 = point.q.as_slice().iter().sum();
        prop_assert!((s - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn grid_oracle_agrees_on_a_known_point() {
    // zero loss gives the uniform distribution; a flat minimum limits the
    // argmin precision of a value search to about sqrt(machine epsilon)
    let q = grid_argmin(&[0.0, 0.0, 0.0], 0.3, 1.0, 1.0);
    assert!(max_abs_diff(&q, &[1.0 / 3.0; 3]) < 1e-6);
}
