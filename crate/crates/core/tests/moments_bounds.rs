mod common;

use common::{random_affine, scenario, INSTANCES};
use infodesign::report::private_lower_bound;
use infodesign::{
    build_diagonal_sdp, optimize_diagonal, optimize_private, solve_moment_sdp, two_link_univariate_sdp,
};

#[test]
fn bounds_never_exceed_designed_costs() {
    for name in INSTANCES {
        let sc = scenario(name);
        for nu in [0.5, 1.0] {
            let Some(bound) = private_lower_bound(&sc, nu).unwrap() else {
                assert!(sc.degree() > 1 && nu < 1.0, "{name} has no bound at {nu}");
                continue;
            };
            let design = if sc.degree() == 1 {
                optimize_diagonal(&sc, nu, 30, 1).unwrap()
            } else {
                optimize_private(&sc, nu, 2, 30, 1).unwrap()
            };
            assert!(bound <= design.cost + 1e-6 * (1.0 + design.cost), "{name} nu={nu}: {bound} > {}", design.cost);
        }
    }
}

#[test]
fn univariate_bound_prices_the_bpr_design() {
    let sc = scenario("two_link_bpr");
    let bound = two_link_univariate_sdp(&sc, &[0.0, 0.0], 1.0).unwrap();
    let design = optimize_private(&sc, 1.0, 2, 50, 0).unwrap();
    assert!((bound.value - design.cost).abs() <= 1e-3 * design.cost, "{} vs {}", bound.value, design.cost);
}

#[test]
fn relaxation_bounds_random_instances() {
    for seed in 0..6 {
        let sc = random_affine(seed);
        for nu in [0.3, 0.8] {
            let sdp = solve_moment_sdp(&build_diagonal_sdp(&sc, nu).unwrap()).unwrap();
            let m6 = optimize_private(&sc, nu, 6, 30, seed).unwrap().cost;
            assert!(sdp.value <= m6 + 1e-4 * (1.0 + m6.abs()), "seed {seed} nu={nu}: {} > {m6}", sdp.value);
        }
    }
}
