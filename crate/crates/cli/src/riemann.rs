use std::path::Path;

use hj_core::orchestrator::{run, Solution};

use crate::{load_config, output, CliResult, Failure, Overrides};

const TRACE_TOL: f64 = 0.02;
const FROZEN_TRACE_TOL: f64 = 1e-3;

/// Up-jump `0 → 1` at `x = 0` on `(-2, 2)`, `T = 1`.
const CASES: [(&str, &str); 3] = [
    ("sin", include_str!("../../../fixtures/riemann_sin.json")),
    ("tanh", include_str!("../../../fixtures/riemann_tanh.json")),
    ("constant", include_str!("../../../fixtures/riemann_constant.json")),
];

fn trace_errors(sol: &Solution, until: f64, left: impl Fn(f64) -> f64, right: impl Fn(f64) -> f64) -> (f64, f64) {
    sol.jumps[0]
        .series
        .iter()
        .filter(|p| p.t <= until)
        .fold((0.0f64, 0.0f64), |(el, er), p| {
            (el.max((p.left - left(p.t)).abs()), er.max((p.right - right(p.t)).abs()))
        })
}

/// `(pass, detail)` for the expected collapse behaviour of each case.
fn expect(name: &str, sol: &Solution) -> (bool, String) {
    let jr = &sol.jumps[0];
    match name {
        "sin" => {
            let (el, er) = trace_errors(sol, 0.4, |t| t, |t| 1.0 - t);
            let ok = jr.tau.is_some_and(|t| (0.45..=0.55).contains(&t)) && el <= TRACE_TOL && er <= TRACE_TOL;
            (ok, format!("tau = {:?} (expect 0.5), |left - t| = {el:.2e}, |right - (1 - t)| = {er:.2e}", jr.tau))
        }
        "tanh" => {
            let until = jr.tau.unwrap_or(sol.horizon);
            let (el, er) = trace_errors(sol, until, |_| 0.0, |t| 1.0 - t);
            let ok = jr.tau.is_some_and(|t| (0.93..=1.07).contains(&t))
                && el <= FROZEN_TRACE_TOL
                && er <= TRACE_TOL;
            (ok, format!("tau = {:?} (expect 1), |left| = {el:.2e}, |right - (1 - t)| = {er:.2e}", jr.tau))
        }
        _ => {
            let c = -sol.bounds.k_upper;
            let (el, er) = trace_errors(sol, sol.horizon, |t| -c * t, |t| 1.0 - c * t);
            let tol = sol.tolerances.rounding;
            let ok = jr.tau.is_none() && el <= tol && er <= tol;
            (ok, format!("tau = {:?} (expect none), trace drift {:.2e}", jr.tau, el.max(er)))
        }
    }
}

pub fn cmd_riemann(out: Option<&Path>, overrides: Overrides) -> CliResult<bool> {
    let mut all = true;
    for (name, text) in CASES {
        let s = load_config(text, overrides)?;
        let sol = run(&s).map_err(Failure::of(&s))?;
        let (ok, detail) = expect(name, &sol);
        all &= ok;
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        if let Some(dir) = out {
            output::write_run(&dir.join(name), &s, &sol)?;
        }
    }
    Ok(all)
}
