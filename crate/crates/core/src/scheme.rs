//! Monotone explicit scheme for `u_t + H(u_x) = 0` on one subinterval.
//!
//! Interior nodes use the local Lax–Friedrichs numerical Hamiltonian with
//! forward Euler. A node carrying `u_x = ±∞` is advanced by the bounded
//! boundary ODE `du/dt = -B(p_in)`, where `B` is the one-sided extremized
//! Hamiltonian and `p_in` the slope towards the adjacent interior node.

use serde::{Deserialize, Serialize};

use crate::error::{HjError, Result};
use crate::hamiltonian::{Endpoint, HamiltonianSpec, SingularSign};

/// Stand-in for `alpha` when `H` is constant and the flux has no dissipation.
pub const ALPHA_FLOOR: f64 = 1e-12;

// Relative slack on the CFL comparison.
const CFL_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BcTag {
    /// `u_x = +∞`
    SingularPlus,
    /// `u_x = -∞`
    SingularMinus,
    /// One-sided outflow, `u ← u - dt H(p_in)`.
    Free,
    /// Oblique edge of a shrinking trapezoid moving inward at `speed`.
    TrapezoidEdge { speed: f64 },
}

impl BcTag {
    pub fn singular(sign: SingularSign) -> Self {
        match sign {
            SingularSign::Plus => BcTag::SingularPlus,
            SingularSign::Minus => BcTag::SingularMinus,
        }
    }

    pub fn is_singular(self) -> bool {
        matches!(self, BcTag::SingularPlus | BcTag::SingularMinus)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalGrid {
    pub a: f64,
    pub b: f64,
    pub h: f64,
    pub n: usize,
    pub bc_left: BcTag,
    pub bc_right: BcTag,
    /// Global index of node 0 when the interval is part of a larger grid.
    pub offset: usize,
}

impl IntervalGrid {
    pub fn new(a: f64, b: f64, n: usize, bc_left: BcTag, bc_right: BcTag) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(HjError::input("interval", format!("need finite a < b, got ({a}, {b})")));
        }
        if n < 3 {
            return Err(HjError::input("n", format!("need at least 3 nodes, got {n}")));
        }
        for (side, tag) in [("bc_left", bc_left), ("bc_right", bc_right)] {
            if let BcTag::TrapezoidEdge { speed } = tag {
                if !(speed.is_finite() && speed >= 0.0) {
                    return Err(HjError::input(side, "trapezoid speed must be finite and >= 0"));
                }
            }
        }
        Ok(Self {
            a,
            b,
            h: (b - a) / (n - 1) as f64,
            n,
            bc_left,
            bc_right,
            offset: 0,
        })
    }

    pub fn with_offset(mut self, offset: usize) -> Self {
        self.offset = offset;
        self
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.b
        } else {
            self.a + self.h * i as f64
        }
    }

    /// Inclusive range of nodes inside the trapezoid cross-section at time
    /// `t`, or `None` once the section holds fewer than two nodes.
    pub fn active_range(&self, t: f64) -> Option<(usize, usize)> {
        let tol = 1e-9;
        let lo = match self.bc_left {
            BcTag::TrapezoidEdge { speed } => ((speed * t) / self.h - tol).ceil().max(0.0) as usize,
            _ => 0,
        };
        let hi = match self.bc_right {
            BcTag::TrapezoidEdge { speed } => {
                let back = ((speed * t) / self.h - tol).ceil().max(0.0) as usize;
                (self.n - 1).checked_sub(back)?
            }
            _ => self.n - 1,
        };
        (hi > lo).then_some((lo, hi))
    }
}

/// Local Lax–Friedrichs numerical Hamiltonian.
#[inline]
pub(crate) fn lf_flux(h: &HamiltonianSpec, p_minus: f64, p_plus: f64, alpha: f64) -> f64 {
    h.value(0.5 * (p_minus + p_plus)) - 0.5 * alpha * (p_plus - p_minus)
}

/// `Ĥ(p⁻, p⁺) = H((p⁻+p⁺)/2) − (alpha/2)(p⁺ − p⁻)`; monotone for `alpha ≥ ‖H'‖∞`.
pub fn numerical_hamiltonian(
    p_minus: f64,
    p_plus: f64,
    h: &HamiltonianSpec,
    alpha: f64,
) -> Result<f64> {
    check_alpha(h, alpha)?;
    if !(p_minus.is_finite() && p_plus.is_finite()) {
        return Err(HjError::input("p", "slopes must be finite"));
    }
    Ok(lf_flux(h, p_minus, p_plus, alpha))
}

pub(crate) fn check_alpha(h: &HamiltonianSpec, alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha < h.lip() {
        return Err(HjError::Config(format!(
            "alpha = {alpha} is below the Lipschitz bound {} of H; the scheme would not be monotone",
            h.lip()
        )));
    }
    Ok(())
}

/// `cfl · h / alpha`, with `alpha` floored at [`ALPHA_FLOOR`].
pub fn cfl_dt(h: f64, alpha: f64, cfl: f64) -> f64 {
    cfl * h / alpha.max(ALPHA_FLOOR)
}

/// Step-end times between `t0` and `t1`: every record interval of length
/// `record_every` is cut into equal substeps no longer than `dt_max`.
/// The flag marks record times; `t1` is always one.
pub fn step_times(t0: f64, t1: f64, record_every: f64, dt_max: f64) -> Result<Vec<(f64, bool)>> {
    if !(t1 > t0) {
        return Err(HjError::input("t1", format!("need t0 < t1, got {t0} >= {t1}")));
    }
    if !(record_every > 0.0 && record_every.is_finite()) {
        return Err(HjError::input("record_every", "must be positive"));
    }
    if !(dt_max > 0.0) {
        return Err(HjError::input("dt", "must be positive"));
    }
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let start = t0 + record_every * k as f64;
        let mut end = t0 + record_every * (k + 1) as f64;
        let last = end >= t1 - 1e-9 * record_every;
        if last {
            end = t1;
        }
        let len = end - start;
        let sub = ((len / dt_max) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let dt = len / sub as f64;
        for m in 1..sub {
            out.push((start + dt * m as f64, false));
        }
        out.push((end, true));
        if last {
            return Ok(out);
        }
        k += 1;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalState {
    pub grid: IntervalGrid,
    pub values: Vec<f64>,
    pub t: f64,
}

impl IntervalState {
    pub fn new(grid: IntervalGrid, values: Vec<f64>, t: f64) -> Result<Self> {
        if values.len() != grid.n {
            return Err(HjError::GridMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                grid.n
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(HjError::input(format!("values[{i}]"), "must be finite"));
        }
        Ok(Self { grid, values, t })
    }

    pub fn from_fn(grid: IntervalGrid, t: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..grid.n).map(|i| f(grid.x(i))).collect();
        Self::new(grid, values, t)
    }

    pub fn left_trace(&self) -> f64 {
        self.values[0]
    }

    pub fn right_trace(&self) -> f64 {
        self.values[self.grid.n - 1]
    }

    /// Pure form of [`advance`](Self::advance).
    pub fn step(&self, dt: f64, h: &HamiltonianSpec, alpha: f64) -> Result<IntervalState> {
        let mut next = self.clone();
        let mut scratch = Vec::new();
        next.advance(dt, h, alpha, &mut scratch)?;
        Ok(next)
    }

    /// One forward-Euler step of length `dt` in place.
    pub fn advance(
        &mut self,
        dt: f64,
        h: &HamiltonianSpec,
        alpha: f64,
        scratch: &mut Vec<f64>,
    ) -> Result<()> {
        check_alpha(h, alpha)?;
        let dx = self.grid.h;
        if !(dt > 0.0) || dt * alpha > dx * (1.0 + CFL_SLACK) {
            return Err(HjError::Cfl {
                dt,
                limit: dx / alpha.max(ALPHA_FLOOR),
            });
        }
        let Some((lo, hi)) = self.grid.active_range(self.t) else {
            self.t += dt;
            return Ok(());
        };
        let u = &self.values;
        scratch.clear();
        scratch.extend_from_slice(&u[lo..=hi]);

        let p_left = (u[lo + 1] - u[lo]) / dx;
        let b_left = if lo == 0 {
            match self.grid.bc_left {
                BcTag::SingularPlus => {
                    h.boundary_hamiltonian(Endpoint::Left, SingularSign::Plus, p_left)
                }
                BcTag::SingularMinus => {
                    h.boundary_hamiltonian(Endpoint::Left, SingularSign::Minus, p_left)
                }
                BcTag::Free | BcTag::TrapezoidEdge { .. } => h.value(p_left),
            }
        } else {
            h.value(p_left)
        };
        scratch[0] = u[lo] - dt * b_left;

        for i in lo + 1..hi {
            let pm = (u[i] - u[i - 1]) / dx;
            let pp = (u[i + 1] - u[i]) / dx;
            scratch[i - lo] = u[i] - dt * lf_flux(h, pm, pp, alpha);
        }

        let n = self.grid.n;
        let p_right = (u[hi] - u[hi - 1]) / dx;
        let b_right = if hi == n - 1 {
            match self.grid.bc_right {
                BcTag::SingularPlus => {
                    h.boundary_hamiltonian(Endpoint::Right, SingularSign::Plus, p_right)
                }
                BcTag::SingularMinus => {
                    h.boundary_hamiltonian(Endpoint::Right, SingularSign::Minus, p_right)
                }
                BcTag::Free | BcTag::TrapezoidEdge { .. } => h.value(p_right),
            }
        } else {
            h.value(p_right)
        };
        scratch[hi - lo] = u[hi] - dt * b_right;

        if let Some(k) = scratch.iter().position(|v| !v.is_finite()) {
            let node = lo + k;
            return Err(HjError::BlowUp {
                t: self.t + dt,
                node: self.grid.offset + node,
                x: self.grid.x(node),
                value: scratch[k],
            });
        }
        self.values[lo..=hi].copy_from_slice(scratch);
        self.t += dt;
        Ok(())
    }
}

/// Pure single step.
pub fn step_interval(
    s: &IntervalState,
    dt: f64,
    h: &HamiltonianSpec,
    alpha: f64,
) -> Result<IntervalState> {
    s.step(dt, h, alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: f64,
    pub left: f64,
    pub right: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalTrajectory {
    pub grid: IntervalGrid,
    /// `(t, values)` at `t0`, every record time, and `t1`.
    pub snapshots: Vec<(f64, Vec<f64>)>,
    /// End-node values after every step.
    pub traces: Vec<TracePoint>,
}

/// Evolves one interval from `t0` to `t1`.
#[allow(clippy::too_many_arguments)]
pub fn solve_interval(
    grid: IntervalGrid,
    u0: impl Fn(f64) -> f64,
    t0: f64,
    t1: f64,
    h: &HamiltonianSpec,
    alpha: f64,
    cfl: f64,
    record_every: f64,
) -> Result<IntervalTrajectory> {
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(HjError::input("cfl", format!("must lie in (0, 1], got {cfl}")));
    }
    check_alpha(h, alpha)?;
    let mut state = IntervalState::from_fn(grid.clone(), t0, u0)?;
    let times = step_times(t0, t1, record_every, cfl_dt(grid.h, alpha, cfl))?;
    let mut snapshots = vec![(t0, state.values.clone())];
    let mut traces = vec![TracePoint {
        t: t0,
        left: state.left_trace(),
        right: state.right_trace(),
    }];
    let mut scratch = Vec::with_capacity(grid.n);
    for (t_next, record) in times {
        state.advance(t_next - state.t, h, alpha, &mut scratch)?;
        state.t = t_next;
        traces.push(TracePoint {
            t: t_next,
            left: state.left_trace(),
            right: state.right_trace(),
        });
        if record {
            snapshots.push((t_next, state.values.clone()));
        }
    }
    Ok(IntervalTrajectory {
        grid,
        snapshots,
        traces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn free_grid(a: f64, b: f64, n: usize) -> IntervalGrid {
        IntervalGrid::new(a, b, n, BcTag::Free, BcTag::Free).unwrap()
    }

    #[test]
    fn numerical_hamiltonian_examples() {
        let sin = HamiltonianSpec::sin();
        for a in [-2.0, 0.0, 0.7, 3.0] {
            assert_eq!(numerical_hamiltonian(a, a, &sin, 1.5).unwrap(), a.sin());
        }
        let c = HamiltonianSpec::constant(0.3).unwrap();
        assert!((numerical_hamiltonian(0.0, 2.0, &c, 1.0).unwrap() - (-0.7)).abs() < 1e-15);
        assert!(matches!(
            numerical_hamiltonian(0.0, 1.0, &sin, 0.5),
            Err(HjError::Config(_))
        ));
    }

    #[test]
    fn numerical_hamiltonian_monotone_scan() {
        // brute-force sign scan of the finite differences on [-3, 3]²
        let sin = HamiltonianSpec::sin();
        let n = 121;
        let d = 6.0 / (n - 1) as f64;
        let g = |i: usize| -3.0 + d * i as f64;
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                let f = numerical_hamiltonian(g(i), g(j), &sin, 1.0).unwrap();
                let up_minus = numerical_hamiltonian(g(i + 1), g(j), &sin, 1.0).unwrap();
                let up_plus = numerical_hamiltonian(g(i), g(j + 1), &sin, 1.0).unwrap();
                assert!(up_minus - f >= -1e-15, "not nondecreasing in p-");
                assert!(up_plus - f <= 1e-15, "not nonincreasing in p+");
            }
        }
    }

    #[test]
    fn cfl_examples() {
        assert!((cfl_dt(0.01, 1.0, 0.5) - 0.005).abs() < 1e-18);
        assert!((cfl_dt(0.01, 2.0, 0.5) - 0.0025).abs() < 1e-18);
        assert_eq!(cfl_dt(0.01, 0.0, 0.5), 0.5 * 0.01 / ALPHA_FLOOR);
    }

    #[test]
    fn step_times_hit_records() {
        let ts = step_times(0.0, 1.0, 0.01, 5e-4).unwrap();
        assert_eq!(ts.len(), 2000);
        assert_eq!(ts.iter().filter(|t| t.1).count(), 100);
        assert_eq!(ts.last().unwrap().0, 1.0);
        let ts = step_times(0.0, 0.25, 0.1, 1.0).unwrap();
        let rec: Vec<f64> = ts.iter().filter(|t| t.1).map(|t| t.0).collect();
        assert_eq!(rec.len(), 3);
        assert!((rec[1] - 0.2).abs() < 1e-15 && rec[2] == 0.25);
        assert!(step_times(1.0, 0.5, 0.1, 0.1).is_err());
    }

    #[test]
    fn affine_step_is_exact() {
        let sin = HamiltonianSpec::sin();
        let g = free_grid(-1.0, 1.0, 201);
        let s = IntervalState::from_fn(g.clone(), 0.0, |x| 2.0 * x + 1.0).unwrap();
        let dt = cfl_dt(g.h, 1.0, 0.5);
        let s1 = step_interval(&s, dt, &sin, 1.0).unwrap();
        for i in 0..g.n {
            let want = 2.0 * g.x(i) + 1.0 - dt * 2f64.sin();
            assert!((s1.values[i] - want).abs() < 1e-13);
        }
    }

    #[test]
    fn singular_plus_left_end_falls_at_rate_one() {
        let sin = HamiltonianSpec::sin();
        let g = IntervalGrid::new(0.0, 1.0, 11, BcTag::SingularPlus, BcTag::Free).unwrap();
        let s = IntervalState::from_fn(g, 0.0, |_| 1.0).unwrap();
        let s1 = s.step(0.05, &sin, 1.0).unwrap();
        assert_eq!(s1.values[0], 1.0 - 0.05);
        assert!(s1.values[1..].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn cfl_violation_is_reported() {
        let sin = HamiltonianSpec::sin();
        let s = IntervalState::from_fn(free_grid(0.0, 1.0, 11), 0.0, |x| x).unwrap();
        assert!(matches!(s.step(0.2, &sin, 1.0), Err(HjError::Cfl { .. })));
        assert!(matches!(s.step(0.05, &sin, 0.5), Err(HjError::Config(_))));
    }

    #[test]
    fn blow_up_is_reported() {
        let sin = HamiltonianSpec::sin();
        let mut s = IntervalState::from_fn(free_grid(0.0, 1.0, 11), 0.0, |x| x).unwrap();
        s.values[4] = f64::MAX;
        s.values[5] = -f64::MAX;
        let err = s.step(0.05, &sin, 1.0).unwrap_err();
        assert!(matches!(err, HjError::BlowUp { .. }), "{err}");
    }

    #[test]
    fn solve_interval_affine_and_constant() {
        let sin = HamiltonianSpec::sin();
        let g = free_grid(-1.0, 1.0, 401);
        let tr = solve_interval(g.clone(), |x| 0.5 * x - 2.0, 0.1, 0.6, &sin, 1.0, 0.5, 0.05).unwrap();
        let (t, last) = tr.snapshots.last().unwrap();
        assert_eq!(*t, 0.6);
        for i in 0..g.n {
            let want = 0.5 * g.x(i) - 2.0 - 0.5f64.sin() * 0.5;
            assert!((last[i] - want).abs() <= 1e-10);
        }
        assert_eq!(tr.snapshots.len(), 11);

        let c = HamiltonianSpec::constant(0.4).unwrap();
        let tr = solve_interval(g, |_| 3.0, 0.0, 1.0, &c, 0.0, 0.5, 0.25).unwrap();
        for (t, v) in &tr.snapshots {
            assert!(v.iter().all(|&u| (u - (3.0 - 0.4 * t)).abs() < 1e-14));
        }
    }

    #[test]
    fn solve_interval_self_converges_on_smooth_data() {
        // sup-difference between h and h/2 should shrink by ≥ 1.7 from h/2 to h/4
        let sin = HamiltonianSpec::sin();
        let two_pi = 2.0 * std::f64::consts::PI;
        let run = |n: usize| {
            let g = free_grid(0.0, two_pi, n);
            solve_interval(g, f64::sin, 0.0, 0.1, &sin, 1.0, 0.5, 0.1)
                .unwrap()
                .snapshots
                .pop()
                .unwrap()
                .1
        };
        let (u1, u2, u3) = (run(201), run(401), run(801));
        let d12 = (0..201).map(|i| (u1[i] - u2[2 * i]).abs()).fold(0.0, f64::max);
        let d23 = (0..401).map(|i| (u2[i] - u3[2 * i]).abs()).fold(0.0, f64::max);
        assert!(d12 / d23 >= 1.7, "ratio {}", d12 / d23);
    }

    #[test]
    fn trapezoid_edges_deactivate_nodes() {
        let sin = HamiltonianSpec::sin();
        let g = IntervalGrid::new(
            0.0,
            1.0,
            101,
            BcTag::TrapezoidEdge { speed: 1.0 },
            BcTag::TrapezoidEdge { speed: 1.0 },
        )
        .unwrap();
        assert_eq!(g.active_range(0.0), Some((0, 100)));
        assert_eq!(g.active_range(0.1), Some((10, 90)));
        assert_eq!(g.active_range(0.6), None);
        let tr = solve_interval(g.clone(), |x| 2.0 * x, 0.0, 0.3, &sin, 1.0, 0.5, 0.1).unwrap();
        let (_, last) = tr.snapshots.last().unwrap();
        // deactivated nodes keep the value they had when the edge passed them
        let mid = &tr.snapshots[1].1;
        assert_eq!(tr.snapshots[1].0, 0.1);
        assert_eq!(last[..10], mid[..10]);
        assert_ne!(last[20], mid[20]);
        // active section evolves exactly for affine data
        for i in 30..=70 {
            assert!((last[i] - (2.0 * g.x(i) - 0.3 * 2f64.sin())).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn consistency(p in -50.0..50.0f64, alpha in 1.0..4.0f64) {
            let sin = HamiltonianSpec::sin();
            prop_assert_eq!(numerical_hamiltonian(p, p, &sin, alpha).unwrap(), p.sin());
        }

        #[test]
        fn one_step_comparison(
            base in prop::collection::vec(-2.0..2.0f64, 12),
            gap in prop::collection::vec(0.0..1.0f64, 12),
            tags in (0usize..3, 0usize..3),
            hsel in 0usize..3,
        ) {
            let h = [HamiltonianSpec::sin(), HamiltonianSpec::tanh(), HamiltonianSpec::clamp()][hsel].clone();
            let tag = |k: usize| if k == 1 { BcTag::SingularMinus } else { BcTag::SingularPlus };
            let (l, r) = (tag(tags.0), tag(tags.1));
            let g = IntervalGrid::new(0.0, 1.1, 12, l, r).unwrap();
            let u = IntervalState::new(g.clone(), base.clone(), 0.0).unwrap();
            let v_vals: Vec<f64> = base.iter().zip(&gap).map(|(a, b)| a + b).collect();
            let v = IntervalState::new(g.clone(), v_vals, 0.0).unwrap();
            let dt = cfl_dt(g.h, 1.0, 1.0);
            let (u1, v1) = (u.step(dt, &h, 1.0).unwrap(), v.step(dt, &h, 1.0).unwrap());
            for i in 0..12 {
                prop_assert!(u1.values[i] <= v1.values[i]);
            }
        }

        #[test]
        fn one_step_locality(vals in prop::collection::vec(-1.0..1.0f64, 20), k in 0usize..20, d in -1.0..1.0f64) {
            let sin = HamiltonianSpec::sin();
            let g = free_grid(0.0, 1.9, 20);
            let u = IntervalState::new(g.clone(), vals.clone(), 0.0).unwrap();
            let mut w = vals;
            w[k] += d;
            let v = IntervalState::new(g.clone(), w, 0.0).unwrap();
            let dt = cfl_dt(g.h, 1.0, 0.5);
            let (u1, v1) = (u.step(dt, &sin, 1.0).unwrap(), v.step(dt, &sin, 1.0).unwrap());
            for i in 0..20usize {
                if i.abs_diff(k) > 1 {
                    prop_assert_eq!(u1.values[i].to_bits(), v1.values[i].to_bits());
                }
            }
        }
    }
}
