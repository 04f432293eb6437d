//! Splits the domain at the jumps of the initial datum, evolves each piece as
//! a singular Neumann problem, and merges neighbouring pieces once the jump
//! between them has closed.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{HjError, Result};
use crate::hamiltonian::{HamiltonianBounds, SingularSign};
use crate::scenario::{Geometry, Scenario, ScenarioConfig, Tolerances};
use crate::scheme::{cfl_dt, step_times, BcTag, IntervalGrid, IntervalState, TracePoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JumpSign {
    Up,
    Down,
}

impl JumpSign {
    pub fn of(left: f64, right: f64) -> Option<Self> {
        if right > left {
            Some(JumpSign::Up)
        } else if right < left {
            Some(JumpSign::Down)
        } else {
            None
        }
    }

    fn singular(self) -> SingularSign {
        match self {
            JumpSign::Up => SingularSign::Plus,
            JumpSign::Down => SingularSign::Minus,
        }
    }
}

/// Tags for the two ends facing a jump: `(left piece's right end, right
/// piece's left end)`.
pub fn assign_bcs(sign: JumpSign) -> (BcTag, BcTag) {
    let tag = BcTag::singular(sign.singular());
    (tag, tag)
}

/// Lower bound on the lifetime of a jump of size `j0`.
pub fn min_persistence(j0: f64, bounds: &HamiltonianBounds, horizon: f64) -> f64 {
    let spread = bounds.k_upper - bounds.k_lower;
    if spread > 0.0 {
        (j0 / spread).min(horizon)
    } else {
        horizon
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpRecord {
    pub x: f64,
    /// Grid node carrying the jump.
    pub node: usize,
    pub sign: JumpSign,
    pub j0: f64,
    pub t_lower: f64,
    pub tau: Option<f64>,
    /// `A₊` for up-jumps, `A₋` for down-jumps.
    pub decay_rate: f64,
    /// Traces after every time step, starting at `t = 0`. After the merge
    /// both entries hold the merged node value.
    pub series: Vec<TracePoint>,
}

impl JumpRecord {
    pub fn jump(p: &TracePoint) -> f64 {
        (p.right - p.left).abs()
    }

    /// Series entries strictly before the collapse time.
    pub fn active_series(&self) -> &[TracePoint] {
        match self.tau {
            Some(tau) => {
                let k = self.series.partition_point(|p| p.t < tau);
                &self.series[..k]
            }
            None => &self.series,
        }
    }

    /// `max over t₀ < t₁ < τ of [J(t₁) − J(t₀) + A (t₁ − t₀)]₊`.
    pub fn max_decay_violation(&self) -> f64 {
        let mut best = f64::INFINITY;
        let mut worst = 0.0f64;
        for p in self.active_series() {
            let g = Self::jump(p) + self.decay_rate * p.t;
            worst = worst.max(g - best);
            best = best.min(g);
        }
        worst
    }

    /// `max over t₀ < t₁ < τ of [J(t₁) − J(t₀)]₊`.
    pub fn max_increase(&self) -> f64 {
        let mut best = f64::INFINITY;
        let mut worst = 0.0f64;
        for p in self.active_series() {
            let g = Self::jump(p);
            worst = worst.max(g - best);
            best = best.min(g);
        }
        worst
    }
}

/// Gap `right − left` oriented so that it starts positive.
fn signed_gap(sign: JumpSign, p: &TracePoint) -> f64 {
    match sign {
        JumpSign::Up => p.right - p.left,
        JumpSign::Down => p.left - p.right,
    }
}

/// Time inside the step `prev → cur` at which the signed gap, interpolated
/// linearly, reaches `tol_j`.
fn crossing_time(sign: JumpSign, prev: &TracePoint, cur: &TracePoint, tol_j: f64) -> f64 {
    let (g0, g1) = (signed_gap(sign, prev), signed_gap(sign, cur));
    let w = if g0 > g1 { ((g0 - tol_j) / (g0 - g1)).clamp(0.0, 1.0) } else { 1.0 };
    prev.t + w * (cur.t - prev.t)
}

/// First time the jump is at most `tol_j` or has changed sign, located
/// inside the bracketing step by linear interpolation of the gap.
pub fn detect_collapse(record: &JumpRecord, tol_j: f64) -> Option<f64> {
    let k = record
        .series
        .iter()
        .position(|p| signed_gap(record.sign, p) <= tol_j)?;
    if k == 0 {
        Some(record.series[0].t)
    } else {
        Some(crossing_time(
            record.sign,
            &record.series[k - 1],
            &record.series[k],
            tol_j,
        ))
    }
}

/// Joins two adjacent pieces whose facing traces agree within `tol_j`.
pub fn merge_intervals(left: &IntervalState, right: &IntervalState, tol_j: f64) -> Result<IntervalState> {
    let (lg, rg) = (&left.grid, &right.grid);
    if lg.offset + lg.n - 1 != rg.offset {
        return Err(HjError::Consistency(format!(
            "pieces at nodes {}..{} and {}.. are not adjacent",
            lg.offset,
            lg.offset + lg.n - 1,
            rg.offset
        )));
    }
    if left.t != right.t {
        return Err(HjError::Consistency(format!(
            "pieces at different times {} and {}",
            left.t, right.t
        )));
    }
    let (l, r) = (left.right_trace(), right.left_trace());
    let gap = (r - l).abs();
    if !(gap <= tol_j) {
        return Err(HjError::Consistency(format!(
            "trace gap {gap} exceeds {tol_j} at node {}",
            rg.offset
        )));
    }
    let n = lg.n + rg.n - 1;
    let mut values = Vec::with_capacity(n);
    values.extend_from_slice(&left.values[..lg.n - 1]);
    values.push(0.5 * (l + r));
    values.extend_from_slice(&right.values[1..]);
    let grid = IntervalGrid {
        a: lg.a,
        b: rg.b,
        h: lg.h,
        n,
        bc_left: lg.bc_left,
        bc_right: rg.bc_right,
        offset: lg.offset,
    };
    IntervalState::new(grid, values, left.t)
}

/// Pieces and jump records at `t = 0`.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub geometry: Geometry,
    pub pieces: Vec<IntervalState>,
    pub jumps: Vec<JumpRecord>,
}

fn piece_grid(g: &Geometry, first: usize, last: usize, bc_left: BcTag, bc_right: BcTag) -> IntervalGrid {
    IntervalGrid {
        a: g.x(first),
        b: g.x(last),
        h: g.h,
        n: last - first + 1,
        bc_left,
        bc_right,
        offset: first,
    }
}

/// Splits the grid at the breakpoints of the initial datum. Breakpoints are
/// moved to the nearest node; each piece samples its own segment, so a jump
/// node carries both one-sided values.
pub fn decompose(s: &Scenario) -> Result<Decomposition> {
    let g = s.geometry()?;
    let u0 = s.initial();
    let bounds = s.hamiltonian().bounds();
    let outer = (s.outer_tag(s.boundary().left), s.outer_tag(s.boundary().right));
    let mut cuts = vec![0usize];
    cuts.extend(u0.breakpoints().iter().map(|&x| g.node(x)));
    cuts.push(g.n - 1);

    let mut jumps = Vec::with_capacity(u0.breakpoints().len());
    let mut facing = Vec::with_capacity(u0.breakpoints().len());
    for (j, &x) in u0.breakpoints().iter().enumerate() {
        let node = cuts[j + 1];
        let xn = g.x(node);
        let left = u0.segments()[j].eval(xn);
        let right = u0.segments()[j + 1].eval(xn);
        let sign = JumpSign::of(left, right).ok_or_else(|| {
            HjError::input(
                format!("initial_data.breakpoints[{j}]"),
                format!("no jump discontinuity left at grid node x = {xn}"),
            )
        })?;
        let j0 = (right - left).abs();
        facing.push(assign_bcs(sign));
        jumps.push(JumpRecord {
            x,
            node,
            sign,
            j0,
            t_lower: min_persistence(j0, &bounds, s.horizon()),
            tau: None,
            decay_rate: match sign {
                JumpSign::Up => bounds.a_plus,
                JumpSign::Down => bounds.a_minus,
            },
            series: vec![TracePoint { t: 0.0, left, right }],
        });
    }

    let mut pieces = Vec::with_capacity(cuts.len() - 1);
    for k in 0..cuts.len() - 1 {
        let bc_left = if k == 0 { outer.0 } else { facing[k - 1].1 };
        let bc_right = if k + 1 == cuts.len() - 1 { outer.1 } else { facing[k].0 };
        let grid = piece_grid(&g, cuts[k], cuts[k + 1], bc_left, bc_right);
        let seg = &u0.segments()[k];
        let values = (cuts[k]..=cuts[k + 1]).map(|i| seg.eval(g.x(i))).collect();
        pieces.push(IntervalState::new(grid, values, 0.0)?);
    }
    Ok(Decomposition {
        geometry: g,
        pieces,
        jumps,
    })
}

/// Both traces at a jump node that is still open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OpenJump {
    pub jump: usize,
    pub node: usize,
    pub left: f64,
    pub right: f64,
}

/// Field on the full grid at one record time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub t: f64,
    /// Node values; the left trace at open jumps.
    pub values: Vec<f64>,
    pub open: Vec<OpenJump>,
    /// Nodes still inside the trapezoid cross-section, if any.
    pub active: Option<(usize, usize)>,
}

impl Snapshot {
    fn open_at(&self, i: usize) -> Option<&OpenJump> {
        self.open.iter().find(|o| o.node == i)
    }

    /// `(left, right)` values at node `i`; equal away from open jumps.
    pub fn pair(&self, i: usize) -> (f64, f64) {
        match self.open_at(i) {
            Some(o) => (o.left, o.right),
            None => (self.values[i], self.values[i]),
        }
    }

    pub fn upper(&self, i: usize) -> f64 {
        let (l, r) = self.pair(i);
        l.max(r)
    }

    pub fn lower(&self, i: usize) -> f64 {
        let (l, r) = self.pair(i);
        l.min(r)
    }

    pub fn is_open(&self, i: usize) -> bool {
        self.open_at(i).is_some()
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.active.is_some_and(|(lo, hi)| lo <= i && i <= hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PieceSummary {
    pub first: usize,
    pub last: usize,
    pub bc_left: BcTag,
    pub bc_right: BcTag,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Phase {
    pub t_start: f64,
    pub t_end: f64,
    pub pieces: Vec<PieceSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MergeEvent {
    pub jump: usize,
    pub node: usize,
    pub tau: f64,
    /// End of the step in which the collapse was detected.
    pub t_detected: f64,
    pub gap: f64,
    pub value: f64,
    pub left: PieceSummary,
    pub right: PieceSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct Solution {
    pub fingerprint: String,
    pub geometry: Geometry,
    pub bounds: HamiltonianBounds,
    pub horizon: f64,
    pub alpha: f64,
    pub dt: f64,
    pub tolerances: Tolerances,
    pub jumps: Vec<JumpRecord>,
    pub merges: Vec<MergeEvent>,
    pub phases: Vec<Phase>,
    /// Record at `t = 0` followed by every record time up to the horizon.
    pub records: Vec<Snapshot>,
}

impl Solution {
    pub fn initial(&self) -> &Snapshot {
        &self.records[0]
    }

    pub fn last(&self) -> &Snapshot {
        self.records.last().expect("records start with t = 0")
    }

    pub fn x(&self, i: usize) -> f64 {
        self.geometry.x(i)
    }

    /// Nodes inside the region of interest.
    pub fn window(&self) -> std::ops::RangeInclusive<usize> {
        self.geometry.window.0..=self.geometry.window.1
    }
}

/// Per-jump line of the run report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpSummary {
    pub x_j: f64,
    pub node: usize,
    pub sign: JumpSign,
    #[serde(rename = "J0")]
    pub j0: f64,
    pub t_lower: f64,
    pub tau: Option<f64>,
    pub decay_bound: f64,
    pub max_decay_violation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport<'a> {
    pub fingerprint: &'a str,
    pub config: &'a ScenarioConfig,
    pub geometry: &'a Geometry,
    pub bounds: HamiltonianBounds,
    pub tolerances: Tolerances,
    pub alpha: f64,
    pub dt: f64,
    pub jumps: Vec<JumpSummary>,
    pub merges: &'a [MergeEvent],
    pub phases: &'a [Phase],
}

impl Solution {
    pub fn report<'a>(&'a self, s: &'a Scenario) -> RunReport<'a> {
        RunReport {
            fingerprint: &self.fingerprint,
            config: s.config(),
            geometry: &self.geometry,
            bounds: self.bounds,
            tolerances: self.tolerances,
            alpha: self.alpha,
            dt: self.dt,
            jumps: self
                .jumps
                .iter()
                .map(|j| JumpSummary {
                    x_j: j.x,
                    node: j.node,
                    sign: j.sign,
                    j0: j.j0,
                    t_lower: j.t_lower,
                    tau: j.tau,
                    decay_bound: j.decay_rate,
                    max_decay_violation: j.max_decay_violation(),
                })
                .collect(),
            merges: &self.merges,
            phases: &self.phases,
        }
    }
}

fn summary(p: &IntervalState) -> PieceSummary {
    PieceSummary {
        first: p.grid.offset,
        last: p.grid.offset + p.grid.n - 1,
        bc_left: p.grid.bc_left,
        bc_right: p.grid.bc_right,
    }
}

/// Index of the piece whose right end sits at `node`.
fn left_piece(pieces: &[IntervalState], node: usize) -> Option<usize> {
    pieces
        .iter()
        .position(|p| p.grid.offset + p.grid.n - 1 == node)
}

fn value_at(pieces: &[IntervalState], node: usize) -> f64 {
    let p = pieces
        .iter()
        .find(|p| p.grid.offset <= node && node < p.grid.offset + p.grid.n)
        .expect("pieces cover the grid");
    p.values[node - p.grid.offset]
}

fn assemble(envelope: &IntervalGrid, pieces: &[IntervalState], jumps: &[JumpRecord], t: f64) -> Snapshot {
    let mut values = Vec::with_capacity(envelope.n);
    let mut open = Vec::new();
    for (k, p) in pieces.iter().enumerate() {
        let skip = usize::from(k > 0);
        values.extend_from_slice(&p.values[skip..]);
        if k + 1 < pieces.len() {
            let node = p.grid.offset + p.grid.n - 1;
            let jump = jumps.iter().position(|j| j.node == node && j.tau.is_none());
            open.push(OpenJump {
                jump: jump.expect("every cut carries an open jump"),
                node,
                left: p.right_trace(),
                right: pieces[k + 1].left_trace(),
            });
        }
    }
    // left trace is stored in `values`
    for o in &open {
        values[o.node] = o.left;
    }
    Snapshot {
        t,
        values,
        open,
        active: envelope.active_range(t),
    }
}

/// Solves the scenario up to its horizon.
pub fn run(s: &Scenario) -> Result<Solution> {
    let Decomposition {
        geometry,
        mut pieces,
        mut jumps,
    } = decompose(s)?;
    let h = s.hamiltonian();
    let bounds = h.bounds();
    let alpha = s.alpha();
    let tol = s.tolerances();
    let horizon = s.horizon();
    let dt = cfl_dt(geometry.h, alpha, s.numerics().cfl);
    let schedule = step_times(0.0, horizon, s.numerics().record_every, dt)?;
    let full = piece_grid(
        &geometry,
        0,
        geometry.n - 1,
        s.outer_tag(s.boundary().left),
        s.outer_tag(s.boundary().right),
    );

    let mut records = vec![assemble(&full, &pieces, &jumps, 0.0)];
    let mut phases = vec![Phase {
        t_start: 0.0,
        t_end: horizon,
        pieces: pieces.iter().map(summary).collect(),
    }];
    let mut merges = Vec::new();
    let mut t = 0.0;
    for (t_next, record) in schedule {
        let step = t_next - t;
        pieces
            .par_iter_mut()
            .try_for_each_init(Vec::new, |scratch, p| -> Result<()> {
                p.advance(step, h, alpha, scratch)?;
                p.t = t_next;
                Ok(())
            })?;

        for jr in jumps.iter_mut() {
            let point = match (jr.tau, left_piece(&pieces, jr.node)) {
                (None, Some(k)) => TracePoint {
                    t: t_next,
                    left: pieces[k].right_trace(),
                    right: pieces[k + 1].left_trace(),
                },
                _ => {
                    let v = value_at(&pieces, jr.node);
                    TracePoint { t: t_next, left: v, right: v }
                }
            };
            jr.series.push(point);
        }

        let mut merged = false;
        for (j, jr) in jumps.iter_mut().enumerate() {
            if jr.tau.is_some() {
                continue;
            }
            let n = jr.series.len();
            let (prev, last) = (jr.series[n - 2], jr.series[n - 1]);
            let gap = JumpRecord::jump(&last);
            let flipped = signed_gap(jr.sign, &last) <= 0.0;
            if gap > tol.collapse && !flipped {
                continue;
            }
            let tau = crossing_time(jr.sign, &prev, &last, tol.collapse);
            let k = left_piece(&pieces, jr.node).ok_or_else(|| {
                HjError::Consistency(format!("no piece ends at jump node {}", jr.node))
            })?;
            // a crossing step overshoots by at most (K - k) dt
            let allowed = if flipped {
                tol.collapse.max((bounds.k_upper - bounds.k_lower) * step + tol.rounding)
            } else {
                tol.collapse
            };
            let joined = merge_intervals(&pieces[k], &pieces[k + 1], allowed)?;
            let value = joined.values[jr.node - joined.grid.offset];
            merges.push(MergeEvent {
                jump: j,
                node: jr.node,
                tau,
                t_detected: t_next,
                gap,
                value,
                left: summary(&pieces[k]),
                right: summary(&pieces[k + 1]),
            });
            pieces.splice(k..=k + 1, std::iter::once(joined));
            jr.tau = Some(tau);
            merged = true;
        }
        if merged {
            if let Some(p) = phases.last_mut() {
                p.t_end = t_next;
            }
            phases.push(Phase {
                t_start: t_next,
                t_end: horizon,
                pieces: pieces.iter().map(summary).collect(),
            });
        }
        if record {
            records.push(assemble(&full, &pieces, &jumps, t_next));
        }
        t = t_next;
    }

    Ok(Solution {
        fingerprint: s.fingerprint().to_string(),
        geometry,
        bounds,
        horizon,
        alpha,
        dt,
        tolerances: tol,
        jumps,
        merges,
        phases,
        records,
    })
}
