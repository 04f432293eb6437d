use clap::ValueEnum;
use hj_core::dual_cl::{cross_check, run_dual};
use hj_core::envelope::SegmentFn;
use hj_core::orchestrator::{run, Solution};
use hj_core::scenario::Scenario;
use hj_core::verify::{
    check_barrier, check_comparison, check_cone, check_determinism, check_jump_laws, check_sandwich,
    check_time_lipschitz, convergence_study, CheckReport, Side,
};
use hj_core::{HjError, Result};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CheckName {
    #[value(name = "sandwich")]
    Sandwich,
    #[value(name = "time_lipschitz")]
    TimeLipschitz,
    #[value(name = "comparison")]
    Comparison,
    #[value(name = "jump_laws")]
    JumpLaws,
    #[value(name = "barrier")]
    Barrier,
    #[value(name = "cone")]
    Cone,
    #[value(name = "dual")]
    Dual,
    #[value(name = "determinism")]
    Determinism,
    #[value(name = "convergence")]
    Convergence,
}

/// Every check that applies to the scenario without extra input.
pub fn default_checks(sol: &Solution) -> Vec<CheckName> {
    use CheckName::*;
    let mut v = vec![Sandwich, TimeLipschitz, Comparison];
    if sol.jumps.is_empty() {
        v.push(Dual);
    } else {
        v.extend([JumpLaws, Barrier]);
    }
    v.push(Determinism);
    v
}

/// Bump in the middle of the piece right of jump 0.
pub fn barrier_bump(s: &Scenario, sol: &Solution) -> Result<SegmentFn> {
    let Some(j) = sol.jumps.first() else {
        return Err(HjError::input("initial_data.breakpoints", "the barrier check needs a jump"));
    };
    let end = s
        .initial()
        .breakpoints()
        .get(1)
        .copied()
        .unwrap_or_else(|| sol.x(sol.geometry.window.1));
    let span = end - j.x;
    if span < 20.0 * sol.geometry.h {
        return Err(HjError::input("barrier", "piece right of the first jump is too short"));
    }
    Ok(SegmentFn::Bump {
        center: j.x + 0.5 * span,
        half_width: 0.25 * span,
        height: 0.3,
    })
}

/// Bump at the left end of the grid; trapezoid base from `L T + 10 h`
/// beyond its support to the right end of the region of interest.
pub fn cone_setup(s: &Scenario, sol: &Solution) -> Result<(SegmentFn, (f64, f64))> {
    let g = &sol.geometry;
    let hw = 0.1;
    let reach = s.hamiltonian().lip() * s.horizon() + 10.0 * g.h;
    let center = g.x(0) + hw + g.h;
    let c = center + hw + reach + 2.0 * g.h;
    let d = g.x(g.window.1);
    if c >= d {
        return Err(HjError::input(
            "cone",
            "no room for a perturbation beyond L T + 10 h of the region of interest",
        ));
    }
    let bump = SegmentFn::Bump {
        center,
        half_width: hw,
        height: 0.5,
    };
    Ok((bump, (c, d)))
}

fn one(s: &Scenario, sol: &Solution, name: CheckName) -> Result<CheckReport> {
    match name {
        CheckName::Sandwich => Ok(check_sandwich(sol)),
        CheckName::TimeLipschitz => Ok(check_time_lipschitz(sol)),
        CheckName::Comparison => {
            let above = s.with_initial(&s.initial().add(&SegmentFn::constant(1.0))?)?;
            check_comparison(sol, &run(&above)?)
        }
        CheckName::JumpLaws => check_jump_laws(sol),
        CheckName::Barrier => check_barrier(s, 0, Side::Right, &barrier_bump(s, sol)?),
        CheckName::Cone => {
            let (bump, trapezoid) = cone_setup(s, sol)?;
            check_cone(s, &bump, trapezoid)
        }
        CheckName::Dual => cross_check(sol, &run_dual(s)?),
        CheckName::Determinism => check_determinism(s),
        CheckName::Convergence => Ok(convergence_study(s, 3)?.report),
    }
}

/// Runs the named checks (all applicable ones if `names` is empty) in
/// parallel; reports come back in request order.
pub fn run_checks(s: &Scenario, names: &[CheckName]) -> Result<Vec<CheckReport>> {
    let sol = run(s)?;
    let names = if names.is_empty() {
        default_checks(&sol)
    } else {
        names.to_vec()
    };
    names.par_iter().map(|&n| one(s, &sol, n)).collect()
}
