//! The conservation law `v_t + H(v)_x = 0` for `v = u_x`, solved with a
//! Rusanov finite-volume scheme on the cells between grid nodes.

use serde::Serialize;

use crate::error::{HjError, Result};
use crate::hamiltonian::HamiltonianSpec;
use crate::orchestrator::Solution;
use crate::scenario::Scenario;
use crate::scheme::{cfl_dt, check_alpha, step_times};
use crate::verify::CheckReport;

/// Cell averages on `[x0 + i h, x0 + (i + 1) h]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CLState {
    pub x0: f64,
    pub h: f64,
    pub values: Vec<f64>,
    pub t: f64,
}

impl CLState {
    pub fn new(x0: f64, h: f64, values: Vec<f64>, t: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(HjError::input("values", "need at least one cell"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(HjError::input(format!("values[{i}]"), "must be finite"));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(HjError::input("h", "must be finite and > 0"));
        }
        Ok(Self { x0, h, values, t })
    }

    /// Difference quotients of node values.
    pub fn from_nodes(x0: f64, h: f64, nodes: &[f64], t: f64) -> Result<Self> {
        let values = nodes.windows(2).map(|w| (w[1] - w[0]) / h).collect();
        Self::new(x0, h, values, t)
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.h
    }
}

#[inline]
fn rusanov_flux(h: &HamiltonianSpec, vl: f64, vr: f64, alpha: f64) -> f64 {
    0.5 * (h.value(vl) + h.value(vr)) - 0.5 * alpha * (vr - vl)
}

/// One conservative step with transmissive ends.
pub fn rusanov_step(s: &CLState, dt: f64, h: &HamiltonianSpec, alpha: f64) -> Result<CLState> {
    check_alpha(h, alpha)?;
    if !(dt > 0.0) || dt * alpha > s.h * (1.0 + 1e-12) {
        return Err(HjError::Cfl {
            dt,
            limit: s.h / alpha.max(1e-12),
        });
    }
    let v = &s.values;
    let m = v.len();
    let ghost = |i: isize| v[i.clamp(0, m as isize - 1) as usize];
    let flux: Vec<f64> = (0..=m as isize)
        .map(|k| rusanov_flux(h, ghost(k - 1), ghost(k), alpha))
        .collect();
    let r = dt / s.h;
    let values = (0..m).map(|i| v[i] - r * (flux[i + 1] - flux[i])).collect();
    CLState::new(s.x0, s.h, values, s.t + dt)
}

/// Evolves the derivative of the scenario's (continuous) initial datum with
/// the same step schedule as [`crate::orchestrator::run`], returning the
/// state at `t = 0` and at every record time.
pub fn run_dual(s: &Scenario) -> Result<Vec<CLState>> {
    if !s.initial().breakpoints().is_empty() {
        return Err(HjError::input(
            "initial_data.breakpoints",
            "the conservation-law cross-check needs continuous initial data",
        ));
    }
    let g = s.geometry()?;
    let h = s.hamiltonian();
    let alpha = s.alpha();
    let u0 = s.initial();
    let nodes: Vec<f64> = (0..g.n).map(|i| u0.eval(g.x(i))).collect();
    let mut state = CLState::from_nodes(g.a, g.h, &nodes, 0.0)?;
    let schedule = step_times(
        0.0,
        s.horizon(),
        s.numerics().record_every,
        cfl_dt(g.h, alpha, s.numerics().cfl),
    )?;
    let mut out = vec![state.clone()];
    for (t, record) in schedule {
        state = rusanov_step(&state, t - state.t, h, alpha)?;
        state.t = t;
        if record {
            out.push(state.clone());
        }
    }
    Ok(out)
}

/// L¹ distance, over the region of interest, between the difference
/// quotients of the Hamilton–Jacobi solution and the conservation-law cells.
pub fn cross_check(sol: &Solution, cl_run: &[CLState]) -> Result<CheckReport> {
    if !sol.jumps.is_empty() {
        return Err(HjError::input(
            "initial_data.breakpoints",
            "the conservation-law cross-check needs continuous initial data",
        ));
    }
    let g = &sol.geometry;
    if cl_run.len() != sol.records.len() {
        return Err(HjError::GridMismatch(format!(
            "{} conservation-law states for {} records",
            cl_run.len(),
            sol.records.len()
        )));
    }
    let (lo, hi) = g.window;
    let mut worst = 0.0f64;
    let mut drift = 0.0f64;
    let mass0 = cl_run[0].mass();
    for (r, c) in sol.records.iter().zip(cl_run) {
        if c.values.len() + 1 != g.n || c.h != g.h || (c.t - r.t).abs() > 1e-12 {
            return Err(HjError::GridMismatch(format!(
                "cell grid ({} cells, h = {}, t = {}) vs node grid ({} nodes, h = {}, t = {})",
                c.values.len(),
                c.h,
                c.t,
                g.n,
                g.h,
                r.t
            )));
        }
        let dist: f64 = (lo..hi)
            .filter(|&i| r.is_active(i) && r.is_active(i + 1))
            .map(|i| ((r.values[i + 1] - r.values[i]) / g.h - c.values[i]).abs() * g.h)
            .sum();
        worst = worst.max(dist);
        drift = drift.max((c.mass() - mass0).abs());
    }
    let mut rep = CheckReport::new("dual", sol.fingerprint.clone());
    rep.bound("l1_distance", worst, sol.tolerances.dual)
        .info("mass_drift", drift);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::{PiecewiseFn, SegmentFn};
    use crate::orchestrator::run;
    use crate::scenario::NumericsConfig;

    #[test]
    fn constant_state_is_steady() {
        let s = CLState::new(0.0, 0.1, vec![0.7; 20], 0.0).unwrap();
        let n = rusanov_step(&s, 0.05, &HamiltonianSpec::sin(), 1.0).unwrap();
        assert_eq!(n.values, s.values);
        let c = HamiltonianSpec::constant(2.0).unwrap();
        let b = CLState::new(0.0, 0.1, (0..20).map(|i| (i as f64).sin()).collect(), 0.0).unwrap();
        assert_eq!(rusanov_step(&b, 0.05, &c, 0.0).unwrap().values, b.values);
    }

    #[test]
    fn bump_mass_is_conserved() {
        let bump = SegmentFn::Bump {
            center: 0.0,
            half_width: 0.3,
            height: 1.0,
        };
        let h = 0.01;
        let values = (0..400).map(|i| bump.eval(-2.0 + h * (i as f64 + 0.5))).collect();
        let mut s = CLState::new(-2.0, h, values, 0.0).unwrap();
        let m0 = s.mass();
        for _ in 0..100 {
            s = rusanov_step(&s, 0.005, &HamiltonianSpec::sin(), 1.0).unwrap();
        }
        assert!((s.mass() - m0).abs() < 1e-12);
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let s = CLState::new(0.0, 0.1, vec![0.0; 4], 0.0).unwrap();
        assert!(matches!(
            rusanov_step(&s, 0.2, &HamiltonianSpec::sin(), 1.0),
            Err(HjError::Cfl { .. })
        ));
    }

    #[test]
    fn affine_datum_matches_exactly() {
        let u0 = PiecewiseFn::continuous((-1.0, 1.0), SegmentFn::affine(2.0, 1.0)).unwrap();
        let s = Scenario::build((-1.0, 1.0), 0.2, &HamiltonianSpec::sin(), &u0, NumericsConfig::new(0.01))
            .unwrap();
        let r = cross_check(&run(&s).unwrap(), &run_dual(&s).unwrap()).unwrap();
        assert!(r.pass);
        assert!(r.measured["l1_distance"] < 1e-10, "{r:?}");
    }

    #[test]
    fn jumps_are_rejected() {
        let u0 = PiecewiseFn::step((-1.0, 1.0), 0.0, 0.0, 1.0).unwrap();
        let s = Scenario::build((-1.0, 1.0), 0.2, &HamiltonianSpec::sin(), &u0, NumericsConfig::new(0.01))
            .unwrap();
        assert!(run_dual(&s).is_err());
        let sol = run(&s).unwrap();
        assert!(cross_check(&sol, &[]).is_err());
    }
}
