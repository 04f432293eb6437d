//! Bounded Lipschitz Hamiltonians and the constants derived from them.
//!
//! Every quantity the solver and the checks need from `H` lives here: the
//! time-Lipschitz constants `K = sup(-H)` and `k = inf(-H)`, the tail
//! oscillations `A±`, the Lipschitz bound, and the one-sided extremized
//! Hamiltonians that drive a node carrying a singular Neumann condition.

use serde::{Deserialize, Serialize};

use crate::error::{HjError, Result};

/// Limit superior / inferior of `H` at `+∞` and `-∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailDescriptors {
    pub limsup_plus: f64,
    pub liminf_plus: f64,
    pub limsup_minus: f64,
    pub liminf_minus: f64,
}

/// Uniformly sampled Hamiltonian on `[xi_min, xi_min + step * (len - 1)]`.
///
/// Between samples the table interpolates linearly; beyond the sampled range
/// `eval` clamps to the endpoint value and only the tail descriptors enter
/// range computations.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianTable {
    xi_min: f64,
    step: f64,
    values: Vec<f64>,
    tails: TailDescriptors,
}

impl HamiltonianTable {
    pub fn xi_min(&self) -> f64 {
        self.xi_min
    }

    pub fn xi_max(&self) -> f64 {
        self.xi_min + self.step * (self.values.len() - 1) as f64
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn tails(&self) -> TailDescriptors {
        self.tails
    }

    fn eval(&self, p: f64) -> f64 {
        let last = self.values.len() - 1;
        let s = (p - self.xi_min) / self.step;
        if s <= 0.0 {
            return self.values[0];
        }
        if s >= last as f64 {
            return self.values[last];
        }
        let i = (s.floor() as usize).min(last - 1);
        let w = s - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    /// Sup or inf of the table over `{ξ ≥ p}` or `{ξ ≤ p}`, tails included.
    fn extremal(&self, kind: Extremum, side: Side, p: f64) -> f64 {
        let pick = |a: f64, b: f64| match kind {
            Extremum::Sup => a.max(b),
            Extremum::Inf => a.min(b),
        };
        let mut acc = self.eval(p);
        for (i, &v) in self.values.iter().enumerate() {
            let xi = self.xi_min + self.step * i as f64;
            let inside = match side {
                Side::Geq => xi >= p,
                Side::Leq => xi <= p,
            };
            if inside {
                acc = pick(acc, v);
            }
        }
        let tail = match (kind, side) {
            (Extremum::Sup, Side::Geq) => self.tails.limsup_plus,
            (Extremum::Inf, Side::Geq) => self.tails.liminf_plus,
            (Extremum::Sup, Side::Leq) => self.tails.limsup_minus,
            (Extremum::Inf, Side::Leq) => self.tails.liminf_minus,
        };
        pick(acc, tail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum HamiltonianKind {
    Constant(f64),
    Sin,
    Tanh,
    /// `max(-1, min(1, p))`
    Clamp,
    Table(HamiltonianTable),
}

/// A bounded Lipschitz Hamiltonian together with its Lipschitz bound.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec {
    kind: HamiltonianKind,
    lip: f64,
}

/// Constants derived from `H`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianBounds {
    /// `sup(-H)`
    #[serde(rename = "K")]
    pub k_upper: f64,
    /// `inf(-H)`
    #[serde(rename = "k")]
    pub k_lower: f64,
    pub a_plus: f64,
    pub a_minus: f64,
    /// `‖H'‖∞`
    pub lip: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extremum {
    Sup,
    Inf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Geq,
    Leq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endpoint {
    Left,
    Right,
}

/// Sign of the singular slope `u_x = ±∞` imposed at an endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SingularSign {
    Plus,
    Minus,
}

// Slack on sampled Lipschitz checks.
const LIP_SLACK: f64 = 1e-12;

impl HamiltonianSpec {
    pub fn constant(c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(HjError::input("hamiltonian.value", "constant must be finite"));
        }
        Ok(Self {
            kind: HamiltonianKind::Constant(c),
            lip: 0.0,
        })
    }

    pub fn sin() -> Self {
        Self {
            kind: HamiltonianKind::Sin,
            lip: 1.0,
        }
    }

    pub fn tanh() -> Self {
        Self {
            kind: HamiltonianKind::Tanh,
            lip: 1.0,
        }
    }

    pub fn clamp() -> Self {
        Self {
            kind: HamiltonianKind::Clamp,
            lip: 1.0,
        }
    }

    /// Builds a table Hamiltonian from `(ξ, H(ξ))` samples with uniform spacing.
    pub fn table(samples: &[(f64, f64)], tails: TailDescriptors, lip: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(HjError::input(
                "hamiltonian.samples",
                "at least two samples are required",
            ));
        }
        if !(lip.is_finite() && lip >= 0.0) {
            return Err(HjError::input("hamiltonian.lip", "must be finite and >= 0"));
        }
        if samples.iter().any(|(x, v)| !x.is_finite() || !v.is_finite()) {
            return Err(HjError::input("hamiltonian.samples", "non-finite sample"));
        }
        let xi_min = samples[0].0;
        let step = samples[1].0 - xi_min;
        if step <= 0.0 {
            return Err(HjError::input(
                "hamiltonian.samples",
                "abscissae must be strictly increasing",
            ));
        }
        for (i, &(xi, _)) in samples.iter().enumerate() {
            let expected = xi_min + step * i as f64;
            if (xi - expected).abs() > 1e-9 * step.max(1.0) {
                return Err(HjError::input(
                    "hamiltonian.samples",
                    format!("sample {i} breaks uniform spacing (ξ = {xi}, expected {expected})"),
                ));
            }
        }
        for w in samples.windows(2) {
            let slope = (w[1].1 - w[0].1).abs() / step;
            if slope > lip + LIP_SLACK {
                return Err(HjError::input(
                    "hamiltonian.lip",
                    format!(
                        "samples at ξ = {} have difference quotient {slope} > lip = {lip}",
                        w[0].0
                    ),
                ));
            }
        }
        let lo = samples.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
        let hi = samples.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
        let slack = lip * step;
        let t = tails;
        for (name, v) in [
            ("limsup_plus", t.limsup_plus),
            ("liminf_plus", t.liminf_plus),
            ("limsup_minus", t.limsup_minus),
            ("liminf_minus", t.liminf_minus),
        ] {
            if !v.is_finite() {
                return Err(HjError::input(format!("hamiltonian.tails.{name}"), "must be finite"));
            }
            if v < lo - slack || v > hi + slack {
                return Err(HjError::input(
                    format!("hamiltonian.tails.{name}"),
                    format!("{v} lies outside the sampled range [{lo}, {hi}] ± {slack}"),
                ));
            }
        }
        if t.liminf_plus > t.limsup_plus {
            return Err(HjError::input(
                "hamiltonian.tails",
                "liminf_plus exceeds limsup_plus",
            ));
        }
        if t.liminf_minus > t.limsup_minus {
            return Err(HjError::input(
                "hamiltonian.tails",
                "liminf_minus exceeds limsup_minus",
            ));
        }
        Ok(Self {
            kind: HamiltonianKind::Table(HamiltonianTable {
                xi_min,
                step,
                values: samples.iter().map(|s| s.1).collect(),
                tails,
            }),
            lip,
        })
    }

    pub fn kind(&self) -> &HamiltonianKind {
        &self.kind
    }

    /// `‖H'‖∞`
    pub fn lip(&self) -> f64 {
        self.lip
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            HamiltonianKind::Constant(_) => "constant",
            HamiltonianKind::Sin => "sin",
            HamiltonianKind::Tanh => "tanh",
            HamiltonianKind::Clamp => "clamp",
            HamiltonianKind::Table(_) => "table",
        }
    }

    /// Checked evaluation of `H(p)`.
    pub fn eval(&self, p: f64) -> Result<f64> {
        if !p.is_finite() {
            return Err(HjError::input("p", format!("non-finite argument {p}")));
        }
        Ok(self.value(p))
    }

    /// Unchecked evaluation used in the stepping loops.
    #[inline]
    pub(crate) fn value(&self, p: f64) -> f64 {
        match &self.kind {
            HamiltonianKind::Constant(c) => *c,
            HamiltonianKind::Sin => p.sin(),
            HamiltonianKind::Tanh => p.tanh(),
            HamiltonianKind::Clamp => p.clamp(-1.0, 1.0),
            HamiltonianKind::Table(t) => t.eval(p),
        }
    }

    pub fn tails(&self) -> TailDescriptors {
        match &self.kind {
            HamiltonianKind::Constant(c) => TailDescriptors {
                limsup_plus: *c,
                liminf_plus: *c,
                limsup_minus: *c,
                liminf_minus: *c,
            },
            HamiltonianKind::Sin => TailDescriptors {
                limsup_plus: 1.0,
                liminf_plus: -1.0,
                limsup_minus: 1.0,
                liminf_minus: -1.0,
            },
            HamiltonianKind::Tanh | HamiltonianKind::Clamp => TailDescriptors {
                limsup_plus: 1.0,
                liminf_plus: 1.0,
                limsup_minus: -1.0,
                liminf_minus: -1.0,
            },
            HamiltonianKind::Table(t) => t.tails,
        }
    }

    /// `(inf H, sup H)` over the whole line.
    fn range(&self) -> (f64, f64) {
        match &self.kind {
            HamiltonianKind::Constant(c) => (*c, *c),
            HamiltonianKind::Sin | HamiltonianKind::Tanh | HamiltonianKind::Clamp => (-1.0, 1.0),
            HamiltonianKind::Table(t) => {
                let lo = t
                    .values
                    .iter()
                    .copied()
                    .chain([t.tails.liminf_plus, t.tails.liminf_minus])
                    .fold(f64::INFINITY, f64::min);
                let hi = t
                    .values
                    .iter()
                    .copied()
                    .chain([t.tails.limsup_plus, t.tails.limsup_minus])
                    .fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
        }
    }

    pub fn bounds(&self) -> HamiltonianBounds {
        let (lo, hi) = self.range();
        let tails = self.tails();
        HamiltonianBounds {
            k_upper: -lo,
            k_lower: -hi,
            a_plus: tails.limsup_plus - tails.liminf_plus,
            a_minus: tails.limsup_minus - tails.liminf_minus,
            lip: self.lip,
        }
    }

    /// Sup or inf of `H` over `{ξ ≥ p}` (`Geq`) or `{ξ ≤ p}` (`Leq`),
    /// with the matching tail descriptors in the candidate set.
    pub fn extremal(&self, kind: Extremum, side: Side, p: f64) -> f64 {
        use Extremum::*;
        use Side::*;
        match &self.kind {
            HamiltonianKind::Constant(c) => *c,
            // every half-line holds a full period
            HamiltonianKind::Sin => match kind {
                Sup => 1.0,
                Inf => -1.0,
            },
            // nondecreasing, saturating at ±1
            HamiltonianKind::Tanh | HamiltonianKind::Clamp => match (kind, side) {
                (Sup, Geq) => 1.0,
                (Inf, Leq) => -1.0,
                (Inf, Geq) | (Sup, Leq) => self.value(p),
            },
            HamiltonianKind::Table(t) => t.extremal(kind, side, p),
        }
    }

    /// Effective Hamiltonian at an endpoint carrying `u_x = ±∞`; the boundary
    /// node evolves by `du/dt = -B(p)` with `p` the one-sided interior slope.
    #[inline]
    pub fn boundary_hamiltonian(&self, endpoint: Endpoint, sign: SingularSign, p: f64) -> f64 {
        let (kind, side) = match (endpoint, sign) {
            (Endpoint::Left, SingularSign::Plus) => (Extremum::Sup, Side::Geq),
            (Endpoint::Left, SingularSign::Minus) => (Extremum::Inf, Side::Leq),
            (Endpoint::Right, SingularSign::Plus) => (Extremum::Inf, Side::Geq),
            (Endpoint::Right, SingularSign::Minus) => (Extremum::Sup, Side::Leq),
        };
        self.extremal(kind, side, p)
    }
}

/// Free-function form of [`HamiltonianSpec::bounds`].
pub fn compute_bounds(h: &HamiltonianSpec) -> HamiltonianBounds {
    h.bounds()
}
