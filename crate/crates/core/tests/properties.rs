use std::fs;
use std::path::Path;

use hj_core::envelope::{PiecewiseFn, SegmentFn};
use hj_core::hamiltonian::HamiltonianSpec;
use hj_core::orchestrator::{run, JumpSign};
use hj_core::scenario::{parse_scenario, NumericsConfig, Scenario};
use hj_core::verify::{
    check_barrier, check_comparison, check_jump_laws, check_sandwich, check_time_lipschitz, Side,
};
use proptest::prelude::*;

const DOMAIN: (f64, f64) = (-1.0, 1.0);
const H: f64 = 0.02;
const HORIZON: f64 = 0.6;

fn hamiltonian() -> impl Strategy<Value = HamiltonianSpec> {
    prop_oneof![
        Just(HamiltonianSpec::sin()),
        Just(HamiltonianSpec::tanh()),
        Just(HamiltonianSpec::clamp()),
        (-1.0..1.0f64).prop_map(|c| HamiltonianSpec::constant(c).unwrap()),
    ]
}

/// Step datum on `DOMAIN` with a jump of size at least 0.1.
fn riemann() -> impl Strategy<Value = (f64, f64, f64)> {
    (-0.5..0.5f64, -1.0..1.0f64, 0.1..1.0f64, any::<bool>())
        .prop_map(|(x, l, size, up)| (x, l, if up { l + size } else { l - size }))
}

fn scenario(h: &HamiltonianSpec, (x, l, r): (f64, f64, f64)) -> Scenario {
    let u0 = PiecewiseFn::step(DOMAIN, x, l, r).unwrap();
    Scenario::build(DOMAIN, HORIZON, h, &u0, NumericsConfig::new(H)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sandwich_and_time_lipschitz_hold(h in hamiltonian(), data in riemann()) {
        let sol = run(&scenario(&h, data)).unwrap();
        let s = check_sandwich(&sol);
        let t = check_time_lipschitz(&sol);
        prop_assert!(s.pass, "{s:?}");
        prop_assert!(t.pass, "{t:?}");
    }

    #[test]
    fn jump_never_grows_or_flips(h in hamiltonian(), data in riemann()) {
        let sol = run(&scenario(&h, data)).unwrap();
        let sign = JumpSign::of(data.1, data.2).unwrap();
        prop_assert_eq!(sol.jumps[0].sign, sign);
        let r = check_jump_laws(&sol).unwrap();
        prop_assert_eq!(r.measured["sign_flips"], 0.0);
        prop_assert!(r.measured["j_increase"] <= sol.tolerances.collapse, "{r:?}");
    }

    #[test]
    fn adding_a_constant_preserves_order(h in hamiltonian(), data in riemann(), c in 0.01..2.0f64) {
        let s = scenario(&h, data);
        let above = s.with_initial(&s.initial().add(&SegmentFn::constant(c)).unwrap()).unwrap();
        let r = check_comparison(&run(&s).unwrap(), &run(&above).unwrap()).unwrap();
        prop_assert!(r.pass, "{r:?}");
        prop_assert!(r.measured["ordered_violation"] <= 1e-12);
    }

    #[test]
    fn right_perturbation_leaves_left_side_untouched(
        h in hamiltonian(),
        data in riemann(),
        height in -0.3..0.3f64,
    ) {
        let s = scenario(&h, data);
        let center = 0.5 * (data.0 + DOMAIN.1);
        let half_width = 0.2 * (DOMAIN.1 - data.0);
        let bump = SegmentFn::Bump { center, half_width, height };
        let r = check_barrier(&s, 0, Side::Right, &bump).unwrap();
        prop_assert!(r.pass, "{r:?}");
    }

    #[test]
    fn repeated_runs_are_identical(h in hamiltonian(), data in riemann()) {
        let s = scenario(&h, data);
        let (a, b) = (run(&s).unwrap(), run(&s).unwrap());
        prop_assert_eq!(a.records, b.records);
        prop_assert_eq!(a.jumps, b.jumps);
    }
}

#[test]
fn every_bundled_fixture_parses_and_grids() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let s = parse_scenario(&fs::read_to_string(&path).unwrap())
                .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            let g = s.geometry().unwrap();
            assert!(g.window.0 < g.window.1, "{}", path.display());
            seen += 1;
        }
    }
    assert!(seen >= 10);
}
