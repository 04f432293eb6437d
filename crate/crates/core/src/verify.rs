//! Named checks over solved scenarios. Each returns a [`CheckReport`] with
//! the measured margins next to the tolerances they were held to.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::envelope::{PiecewiseFn, SegmentFn};
use crate::error::{HjError, Result};
use crate::orchestrator::{run, JumpRecord, Snapshot, Solution};
use crate::scenario::Scenario;

/// Values below this are treated as exact zeros when forming rates.
pub const EXACT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub pass: bool,
    pub measured: BTreeMap<String, f64>,
    pub tolerance: BTreeMap<String, f64>,
    pub fingerprint: String,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, fingerprint: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass: true,
            measured: BTreeMap::new(),
            tolerance: BTreeMap::new(),
            fingerprint: fingerprint.into(),
        }
    }

    /// Records `value ≤ tol`.
    pub fn bound(&mut self, key: &str, value: f64, tol: f64) -> &mut Self {
        self.pass &= value <= tol;
        self.measured.insert(key.to_string(), value);
        self.tolerance.insert(key.to_string(), tol);
        self
    }

    /// Records `value ≥ min` under the tolerance key `min_<key>`.
    pub fn at_least(&mut self, key: &str, value: f64, min: f64) -> &mut Self {
        self.pass &= value >= min;
        self.measured.insert(key.to_string(), value);
        self.tolerance.insert(format!("min_{key}"), min);
        self
    }

    /// Records a value without a pass condition.
    pub fn info(&mut self, key: &str, value: f64) -> &mut Self {
        self.measured.insert(key.to_string(), value);
        self
    }

    pub fn fail(&mut self) -> &mut Self {
        self.pass = false;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

fn positive(x: f64) -> f64 {
    x.max(0.0)
}

fn same_grid(u: &Solution, v: &Solution) -> Result<()> {
    let (g, f) = (&u.geometry, &v.geometry);
    if g.n != f.n || g.a != f.a || g.b != f.b || g.window != f.window {
        return Err(HjError::GridMismatch(format!(
            "{} nodes on [{}, {}] vs {} nodes on [{}, {}]",
            g.n, g.a, g.b, f.n, f.a, f.b
        )));
    }
    if u.records.len() != v.records.len()
        || u.records.iter().zip(&v.records).any(|(a, b)| a.t != b.t)
    {
        return Err(HjError::GridMismatch("record times differ".into()));
    }
    Ok(())
}

/// Nodes of the region of interest still inside the trapezoid at `r.t`.
fn nodes<'a>(sol: &'a Solution, r: &'a Snapshot) -> impl Iterator<Item = usize> + 'a {
    sol.window().filter(move |&i| r.is_active(i))
}

/// Comparison principle for two runs on the same grid: the positive part of
/// `u* − v_*` never exceeds its initial maximum, and when `u₀ ≤ v₀` the
/// matching one-sided values stay ordered.
pub fn check_comparison(u: &Solution, v: &Solution) -> Result<CheckReport> {
    same_grid(u, v)?;
    let tol = u.tolerances.comparison;
    let mut initial = 0.0f64;
    let mut ordered = true;
    let (u0, v0) = (u.initial(), v.initial());
    // the datum on the whole computational grid drives the window
    for i in 0..u.geometry.n {
        initial = initial.max(positive(u0.upper(i) - v0.lower(i)));
        let ((ul, ur), (vl, vr)) = (u0.pair(i), v0.pair(i));
        ordered &= ul <= vl && ur <= vr;
    }
    let mut sup = 0.0f64;
    let mut pairwise = 0.0f64;
    for (ru, rv) in u.records.iter().zip(&v.records) {
        for i in nodes(u, ru) {
            sup = sup.max(positive(ru.upper(i) - rv.lower(i)));
            let ((ul, ur), (vl, vr)) = (ru.pair(i), rv.pair(i));
            pairwise = pairwise.max(positive(ul - vl)).max(positive(ur - vr));
        }
    }
    let mut r = CheckReport::new("comparison", u.fingerprint.clone());
    r.info("initial_gap", initial)
        .info("max_gap", sup)
        .bound("gap_growth", positive(sup - initial), tol);
    if ordered {
        r.bound("ordered_violation", pairwise, tol);
    }
    r.info("initially_ordered", f64::from(u8::from(ordered)));
    Ok(r)
}

/// `u₀ + k t ≤ u ≤ u₀ + K t` at every record, reading `u₀` by the matching
/// one-sided value while a jump is open.
pub fn check_sandwich(sol: &Solution) -> CheckReport {
    let (big_k, small_k) = (sol.bounds.k_upper, sol.bounds.k_lower);
    let u0 = sol.initial();
    let mut above = 0.0f64;
    let mut below = 0.0f64;
    for r in &sol.records {
        for i in nodes(sol, r) {
            let (l0, r0) = u0.pair(i);
            let (l, rr) = r.pair(i);
            if r.is_open(i) || !u0.is_open(i) {
                for (v, w) in [(l, l0), (rr, r0)] {
                    above = above.max(v - (w + big_k * r.t));
                    below = below.max((w + small_k * r.t) - v);
                }
            } else {
                above = above.max(l - (l0.max(r0) + big_k * r.t));
                below = below.max((l0.min(r0) + small_k * r.t) - l);
            }
        }
    }
    let tol = sol.tolerances.sandwich;
    let mut rep = CheckReport::new("sandwich", sol.fingerprint.clone());
    rep.bound("upper_violation", positive(above), tol)
        .bound("lower_violation", positive(below), tol);
    rep
}

/// Difference quotients between consecutive records lie in `[k, K]`. Where a
/// jump closes between the two records only the envelope bounds apply:
/// the upper value may not rise faster than `K`, the lower may not fall
/// faster than `k`.
pub fn check_time_lipschitz(sol: &Solution) -> CheckReport {
    let (big_k, small_k) = (sol.bounds.k_upper, sol.bounds.k_lower);
    let mut max_q = f64::NEG_INFINITY;
    let mut min_q = f64::INFINITY;
    for w in sol.records.windows(2) {
        let (r0, r1) = (&w[0], &w[1]);
        let dt = r1.t - r0.t;
        for i in nodes(sol, r0).filter(|&i| r1.is_active(i)) {
            if r0.is_open(i) == r1.is_open(i) {
                let ((l0, q0), (l1, q1)) = (r0.pair(i), r1.pair(i));
                for q in [(l1 - l0) / dt, (q1 - q0) / dt] {
                    max_q = max_q.max(q);
                    min_q = min_q.min(q);
                }
            } else {
                max_q = max_q.max((r1.upper(i) - r0.upper(i)) / dt);
                min_q = min_q.min((r1.lower(i) - r0.lower(i)) / dt);
            }
        }
    }
    let tol = sol.tolerances.lipschitz_rate;
    let mut rep = CheckReport::new("time_lipschitz", sol.fingerprint.clone());
    if max_q.is_finite() {
        rep.info("max_quotient", max_q)
            .info("min_quotient", min_q)
            .bound("above_K", positive(max_q - big_k), tol)
            .bound("below_k", positive(small_k - min_q), tol);
    } else {
        rep.fail();
    }
    rep
}

/// Per-jump monotonicity, decay rate, sign preservation, persistence and
/// post-collapse continuity.
pub fn check_jump_laws(sol: &Solution) -> Result<CheckReport> {
    if sol.jumps.is_empty() {
        return Err(HjError::input("initial_data.breakpoints", "no jumps to check"));
    }
    let tol = &sol.tolerances;
    let mut rep = CheckReport::new("jump_laws", sol.fingerprint.clone());
    let mut increase = 0.0f64;
    let mut decay = 0.0f64;
    let mut flips = 0usize;
    let mut shortfall = 0.0f64;
    let mut after = 0.0f64;
    for (j, jr) in sol.jumps.iter().enumerate() {
        increase = increase.max(jr.max_increase());
        decay = decay.max(jr.max_decay_violation());
        let s0 = jr.series[0].right - jr.series[0].left;
        flips += jr
            .active_series()
            .iter()
            .filter(|p| (p.right - p.left) * s0 <= 0.0)
            .count();
        if let Some(tau) = jr.tau {
            shortfall = shortfall.max(positive(jr.t_lower - tau));
            for p in jr.series.iter().filter(|p| p.t > tau) {
                after = after.max(JumpRecord::jump(p));
            }
            rep.info(&format!("tau_{j}"), tau);
        }
        rep.info(&format!("t_lower_{j}"), jr.t_lower);
    }
    rep.bound("j_increase", increase, tol.collapse)
        .bound("decay_violation", decay, tol.decay)
        .bound("sign_flips", flips as f64, 0.0)
        .bound("persistence_shortfall", shortfall, tol.tau)
        .bound("gap_after_collapse", after, tol.collapse);
    Ok(rep)
}

/// Initial datum with `g` added on one side of jump `jump`.
pub fn perturb_side(u0: &PiecewiseFn, jump: usize, side: Side, g: &SegmentFn) -> Result<PiecewiseFn> {
    if jump >= u0.breakpoints().len() {
        return Err(HjError::input("jump", format!("no jump with index {jump}")));
    }
    let segments = u0
        .segments()
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let touched = match side {
                Side::Left => k <= jump,
                Side::Right => k > jump,
            };
            if touched {
                SegmentFn::Sum {
                    terms: vec![s.clone(), g.clone()],
                }
            } else {
                s.clone()
            }
        })
        .collect();
    PiecewiseFn::new(u0.domain(), u0.breakpoints().to_vec(), segments, None)
}

/// Runs `s` and a copy perturbed on one side of a jump; while the jump is
/// open the other side must be bit-identical.
pub fn check_barrier(s: &Scenario, jump: usize, side: Side, g: &SegmentFn) -> Result<CheckReport> {
    let u0 = perturb_side(s.initial(), jump, side, g)?;
    let sp = s.with_initial(&u0)?;
    let a = run(s)?;
    let b = run(&sp)?;
    let (ja, jb) = (&a.jumps[jump], &b.jumps[jump]);
    if ja.sign != jb.sign {
        return Err(HjError::input("perturbation", "changes the sign of the jump"));
    }
    let node = ja.node;
    let horizon = ja.tau.unwrap_or(f64::INFINITY).min(jb.tau.unwrap_or(f64::INFINITY));
    let kept = |i: usize| match side {
        Side::Right => i <= node,
        Side::Left => i >= node,
    };
    let mut max_diff = 0.0f64;
    let mut mismatched = 0usize;
    let mut compared = 0usize;
    for (ra, rb) in a.records.iter().zip(&b.records).filter(|(r, _)| r.t < horizon) {
        for i in (0..a.geometry.n).filter(|&i| kept(i)) {
            let (x, y) = if i == node {
                match side {
                    Side::Right => (ra.pair(i).0, rb.pair(i).0),
                    Side::Left => (ra.pair(i).1, rb.pair(i).1),
                }
            } else {
                (ra.values[i], rb.values[i])
            };
            compared += 1;
            if x.to_bits() != y.to_bits() {
                mismatched += 1;
                max_diff = max_diff.max((x - y).abs());
            }
        }
    }
    for (p, q) in ja.series.iter().zip(&jb.series).filter(|(p, _)| p.t < horizon) {
        let (x, y) = match side {
            Side::Right => (p.left, q.left),
            Side::Left => (p.right, q.right),
        };
        compared += 1;
        if x.to_bits() != y.to_bits() {
            mismatched += 1;
            max_diff = max_diff.max((x - y).abs());
        }
    }
    let mut rep = CheckReport::new("barrier", s.fingerprint());
    rep.info("compared_values", compared as f64)
        .info("horizon", horizon)
        .bound("mismatched_values", mismatched as f64, 0.0)
        .bound("max_difference", max_diff, 0.0);
    Ok(rep)
}

/// Runs `s` with and without `g` added to the datum. `g` must vanish on
/// `[c, d]`; inside the shrinking trapezoid the two fields must agree.
pub fn check_cone(s: &Scenario, g: &SegmentFn, trapezoid: (f64, f64)) -> Result<CheckReport> {
    let (c, d) = trapezoid;
    let lip = s.hamiltonian().lip();
    let horizon = s.horizon();
    let (a, b) = s.domain();
    if !(a <= c && c < d && d <= b) {
        return Err(HjError::input("trapezoid", format!("({c}, {d}) not inside the domain")));
    }
    if d - c < 2.0 * lip * horizon {
        return Err(HjError::input(
            "trapezoid",
            format!("d - c = {} < 2 ‖H'‖∞ T = {}", d - c, 2.0 * lip * horizon),
        ));
    }
    if !g.is_zero() {
        match g.support() {
            Some((lo, hi)) if hi <= c || lo >= d => {}
            _ => {
                return Err(HjError::input(
                    "perturbation",
                    "must have compact support outside the trapezoid base",
                ))
            }
        }
    }
    let sp = s.with_initial(&s.initial().add(g)?)?;
    let u = run(s)?;
    let v = run(&sp)?;
    same_grid(&u, &v)?;
    let mut max_diff = 0.0f64;
    let mut compared = 0usize;
    for (ru, rv) in u.records.iter().zip(&v.records) {
        let (lo, hi) = (c + lip * ru.t, d - lip * ru.t);
        for i in (0..u.geometry.n).filter(|&i| {
            let x = u.x(i);
            lo <= x && x <= hi
        }) {
            let ((ul, ur), (vl, vr)) = (ru.pair(i), rv.pair(i));
            max_diff = max_diff.max((ul - vl).abs()).max((ur - vr).abs());
            compared += 1;
        }
    }
    let mut rep = CheckReport::new("cone", s.fingerprint());
    rep.info("compared_values", compared as f64)
        .bound("max_difference", max_diff, u.tolerances.cone);
    Ok(rep)
}

/// Distances between two solutions of the same scenario at spacings `h` and
/// `h/2`, sampled on the coarse nodes of the region of interest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelDistance {
    pub h: f64,
    /// Sup norm over nodes farther than `band` from every jump.
    pub sup: f64,
    pub l1: f64,
    /// Largest change in a collapse time.
    pub tau: f64,
    /// Largest change in a trace at common record times before collapse.
    pub trace: f64,
}

fn fine_index(coarse: &Solution, fine: &Solution, i: usize) -> Result<usize> {
    let x = coarse.x(i);
    let j = ((x - fine.geometry.a) / fine.geometry.h).round();
    if j < 0.0 || j as usize >= fine.geometry.n {
        return Err(HjError::GridMismatch(format!("x = {x} not on the fine grid")));
    }
    let j = j as usize;
    if (fine.x(j) - x).abs() > 1e-9 * coarse.geometry.h {
        return Err(HjError::GridMismatch(format!("grids do not nest at x = {x}")));
    }
    Ok(j)
}

/// Distance between runs of one scenario at two spacings.
pub fn level_distance(coarse: &Solution, fine: &Solution, band: f64) -> Result<LevelDistance> {
    if coarse.records.len() != fine.records.len()
        || coarse
            .records
            .iter()
            .zip(&fine.records)
            .any(|(a, b)| (a.t - b.t).abs() > 1e-12)
    {
        return Err(HjError::GridMismatch("record times differ".into()));
    }
    if coarse.jumps.len() != fine.jumps.len() {
        return Err(HjError::GridMismatch("jump counts differ".into()));
    }
    let window: Vec<usize> = coarse.window().collect();
    let map: Vec<usize> = window
        .iter()
        .map(|&i| fine_index(coarse, fine, i))
        .collect::<Result<_>>()?;
    let far = |x: f64| coarse.jumps.iter().all(|j| (x - j.x).abs() > band);
    let h = coarse.geometry.h;
    let mut sup = 0.0f64;
    let mut l1 = 0.0f64;
    for (rc, rf) in coarse.records.iter().zip(&fine.records) {
        let mut sum = 0.0;
        for (&i, &j) in window.iter().zip(&map) {
            if !(rc.is_active(i) && rf.is_active(j)) {
                continue;
            }
            let ((cl, cr), (fl, fr)) = (rc.pair(i), rf.pair(j));
            let e = 0.5 * ((cl - fl).abs() + (cr - fr).abs());
            sum += h * e;
            if far(coarse.x(i)) {
                sup = sup.max(e);
            }
        }
        l1 = l1.max(sum);
    }
    let mut tau = 0.0f64;
    let mut trace = 0.0f64;
    for (jc, jf) in coarse.jumps.iter().zip(&fine.jumps) {
        tau = tau.max(match (jc.tau, jf.tau) {
            (Some(a), Some(b)) => (a - b).abs(),
            (None, None) => 0.0,
            _ => f64::INFINITY,
        });
        let until = jc.tau.unwrap_or(f64::INFINITY).min(jf.tau.unwrap_or(f64::INFINITY));
        for (rc, rf) in coarse.records.iter().zip(&fine.records) {
            if rc.t >= until {
                break;
            }
            let (i, j) = (jc.node, jf.node);
            let ((cl, cr), (fl, fr)) = (rc.pair(i), rf.pair(j));
            trace = trace.max((cl - fl).abs()).max((cr - fr).abs());
        }
    }
    Ok(LevelDistance {
        h,
        sup,
        l1,
        tau,
        trace,
    })
}

/// `log2(e_coarse / e_fine)`, infinite when the fine error is exactly zero.
pub fn rate(e_coarse: f64, e_fine: f64) -> f64 {
    if e_fine < EXACT_FLOOR {
        f64::INFINITY
    } else {
        (e_coarse / e_fine).log2()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub distances: Vec<LevelDistance>,
    /// Rates between consecutive distances, keyed like the distance fields.
    pub rates: Vec<BTreeMap<String, f64>>,
    pub report: CheckReport,
}

/// Self-convergence over `levels` spacings `h, h/2, …`. Scenarios without
/// jumps must converge at rate ≥ 0.8 in both norms; for scenarios with
/// jumps the traces and collapse times must converge at rate ≥ 0.4.
pub fn convergence_study(s: &Scenario, levels: usize) -> Result<ConvergenceStudy> {
    if levels < 3 {
        return Err(HjError::input("levels", format!("need at least 3, got {levels}")));
    }
    let h0 = s.numerics().h;
    let band = s.hamiltonian().lip() * s.horizon() + 0.1;
    let mut sols = Vec::with_capacity(levels);
    for l in 0..levels {
        sols.push(run(&s.with_h(h0 / f64::from(1u32 << l))?)?);
    }
    let distances: Vec<LevelDistance> = sols
        .windows(2)
        .map(|w| level_distance(&w[0], &w[1], band))
        .collect::<Result<_>>()?;
    let smooth = sols[0].jumps.is_empty();
    let keys: &[&str] = if smooth { &["sup", "l1"] } else { &["tau", "trace"] };
    let min_rate = if smooth { 0.8 } else { 0.4 };
    let field = |d: &LevelDistance, k: &str| match k {
        "sup" => d.sup,
        "l1" => d.l1,
        "tau" => d.tau,
        _ => d.trace,
    };
    let mut rates = Vec::new();
    let mut rep = CheckReport::new("convergence", s.fingerprint());
    for w in distances.windows(2) {
        let mut m = BTreeMap::new();
        for k in ["sup", "l1", "tau", "trace"] {
            m.insert(k.to_string(), rate(field(&w[0], k), field(&w[1], k)));
        }
        rates.push(m);
    }
    for k in keys {
        let worst = rates.iter().map(|m| m[*k]).fold(f64::INFINITY, f64::min);
        rep.at_least(&format!("rate_{k}"), worst, min_rate);
    }
    for (l, d) in distances.iter().enumerate() {
        for k in ["sup", "l1", "tau", "trace"] {
            rep.info(&format!("{k}_{l}"), field(d, k));
        }
    }
    Ok(ConvergenceStudy {
        distances,
        rates,
        report: rep,
    })
}

/// Two runs of the same scenario are bit-identical, and the distance between
/// successive refinements shrinks.
pub fn check_determinism(s: &Scenario) -> Result<CheckReport> {
    let a = run(s)?;
    let b = run(s)?;
    let same_records = a.records == b.records
        && a
            .records
            .iter()
            .zip(&b.records)
            .all(|(p, q)| p.values.iter().zip(&q.values).all(|(x, y)| x.to_bits() == y.to_bits()));
    let same_jumps = a.jumps == b.jumps && a.merges == b.merges;
    let h = s.numerics().h;
    let half = run(&s.with_h(h / 2.0)?)?;
    let quarter = run(&s.with_h(h / 4.0)?)?;
    let band = s.hamiltonian().lip() * s.horizon() + 0.1;
    let d1 = level_distance(&a, &half, band)?.l1;
    let d2 = level_distance(&half, &quarter, band)?.l1;
    let mut rep = CheckReport::new("determinism", s.fingerprint());
    rep.bound("repeat_mismatch", f64::from(u8::from(!(same_records && same_jumps))), 0.0)
        .info("l1_h_h2", d1)
        .info("l1_h2_h4", d2)
        .bound("l1_growth", positive(d2 - d1), EXACT_FLOOR);
    Ok(rep)
}
