//! Scenario files: JSON schema, validation, derived grid geometry and the
//! tolerance set every check reports against.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::envelope::{PiecewiseFn, SegmentFn};
use crate::error::{HjError, Result};
use crate::hamiltonian::{HamiltonianKind, HamiltonianSpec, TailDescriptors};
use crate::scheme::BcTag;

/// Absolute floating-point allowance added to every discretization tolerance.
pub const ROUNDING_SLACK: f64 = 1e-9;

/// Domain end: a number, or `"-inf"` / `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bound {
    Finite(f64),
    Named(InfName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InfName {
    #[serde(rename = "-inf")]
    NegInf,
    #[serde(rename = "inf", alias = "+inf")]
    PosInf,
}

impl Bound {
    pub fn value(self) -> f64 {
        match self {
            Bound::Finite(v) => v,
            Bound::Named(InfName::NegInf) => f64::NEG_INFINITY,
            Bound::Named(InfName::PosInf) => f64::INFINITY,
        }
    }

    fn from_value(v: f64) -> Self {
        if v == f64::NEG_INFINITY {
            Bound::Named(InfName::NegInf)
        } else if v == f64::INFINITY {
            Bound::Named(InfName::PosInf)
        } else {
            Bound::Finite(v)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum HamiltonianConfig {
    Constant {
        value: f64,
    },
    Sin,
    Tanh,
    Clamp,
    Table {
        samples: Vec<[f64; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tails: Option<TailDescriptors>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lip: Option<f64>,
    },
}

impl HamiltonianConfig {
    pub fn build(&self) -> Result<HamiltonianSpec> {
        match self {
            HamiltonianConfig::Constant { value } => HamiltonianSpec::constant(*value),
            HamiltonianConfig::Sin => Ok(HamiltonianSpec::sin()),
            HamiltonianConfig::Tanh => Ok(HamiltonianSpec::tanh()),
            HamiltonianConfig::Clamp => Ok(HamiltonianSpec::clamp()),
            HamiltonianConfig::Table {
                samples,
                tails,
                lip,
            } => {
                let lip = lip.ok_or_else(|| {
                    HjError::input("hamiltonian.lip", "required for table Hamiltonians")
                })?;
                let tails = tails.ok_or_else(|| {
                    HjError::input(
                        "hamiltonian.tails",
                        "table Hamiltonians must declare limsup/liminf at ±∞",
                    )
                })?;
                let samples: Vec<(f64, f64)> = samples.iter().map(|s| (s[0], s[1])).collect();
                HamiltonianSpec::table(&samples, tails, lip)
            }
        }
    }

    pub fn from_spec(h: &HamiltonianSpec) -> Self {
        match h.kind() {
            HamiltonianKind::Constant(c) => HamiltonianConfig::Constant { value: *c },
            HamiltonianKind::Sin => HamiltonianConfig::Sin,
            HamiltonianKind::Tanh => HamiltonianConfig::Tanh,
            HamiltonianKind::Clamp => HamiltonianConfig::Clamp,
            HamiltonianKind::Table(t) => {
                let samples = (0..)
                    .map(|i| t.xi_min() + t.step() * i as f64)
                    .take_while(|&xi| xi <= t.xi_max() + 0.5 * t.step())
                    .map(|xi| [xi, h.eval(xi).unwrap_or(f64::NAN)])
                    .collect();
                HamiltonianConfig::Table {
                    samples,
                    tails: Some(t.tails()),
                    lip: Some(h.lip()),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialDataConfig {
    #[serde(default)]
    pub breakpoints: Vec<f64>,
    pub segments: Vec<SegmentFn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traces: Option<Vec<[f64; 2]>>,
}

/// Condition at an outer end of the computational domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuterBc {
    #[default]
    Free,
    SingularPlus,
    SingularMinus,
    /// Oblique edge moving inward at `‖H'‖∞`.
    Trapezoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    #[serde(default)]
    pub left: OuterBc,
    #[serde(default)]
    pub right: OuterBc,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collapse: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    pub h: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_record_every")]
    pub record_every: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Region of interest; required to size truncated infinite domains.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
}

fn default_cfl() -> f64 {
    0.5
}

fn default_record_every() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub domain: [Bound; 2],
    #[serde(rename = "T")]
    pub horizon: f64,
    pub hamiltonian: HamiltonianConfig,
    pub initial_data: InitialDataConfig,
    #[serde(default)]
    pub boundary: BoundaryConfig,
    pub numerics: NumericsConfig,
}

impl ScenarioConfig {
    /// First 8 bytes of the SHA-256 of the canonical JSON, hex encoded.
    pub fn fingerprint(&self) -> Result<String> {
        let text = serde_json::to_string(self)?;
        Ok(hex::encode(&Sha256::digest(text.as_bytes())[..8]))
    }
}

/// Every slack used by the checks, as explicit functions of `h`, `L` and the
/// record cadence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// `max(h L, 1e-6)`: a jump with `J ≤ collapse` has closed.
    pub collapse: f64,
    /// `2 h L`
    pub sandwich: f64,
    /// `2 h L / record_every`
    pub lipschitz_rate: f64,
    /// `4 h L`
    pub comparison: f64,
    /// `2 h L`
    pub cone: f64,
    pub decay: f64,
    pub tau: f64,
    pub dual: f64,
    pub rounding: f64,
}

impl Tolerances {
    pub fn new(h: f64, lip: f64, record_every: f64, overrides: &ToleranceConfig) -> Self {
        let hl = h * lip;
        Self {
            collapse: overrides.collapse.unwrap_or(hl.max(1e-6)),
            sandwich: 2.0 * hl + ROUNDING_SLACK,
            lipschitz_rate: 2.0 * hl / record_every + ROUNDING_SLACK,
            comparison: 4.0 * hl + ROUNDING_SLACK,
            cone: 2.0 * hl + ROUNDING_SLACK,
            decay: overrides.decay.unwrap_or(0.02),
            tau: overrides.tau.unwrap_or(0.02),
            dual: overrides.dual.unwrap_or(0.05),
            rounding: ROUNDING_SLACK,
        }
    }
}

/// Uniform grid over the (possibly truncated) computational domain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Geometry {
    pub a: f64,
    pub b: f64,
    pub h: f64,
    /// Number of nodes.
    pub n: usize,
    /// Inclusive node range inside the region of interest.
    pub window: (usize, usize),
}

impl Geometry {
    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.b
        } else {
            self.a + self.h * i as f64
        }
    }

    /// Nearest node to `x`.
    pub fn node(&self, x: f64) -> usize {
        (((x - self.a) / self.h).round().max(0.0) as usize).min(self.n - 1)
    }
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    config: ScenarioConfig,
    hamiltonian: HamiltonianSpec,
    initial: PiecewiseFn,
    fingerprint: String,
}

impl Scenario {
    pub fn from_config(config: ScenarioConfig) -> Result<Self> {
        let a = config.domain[0].value();
        let b = config.domain[1].value();
        if a.is_nan() || b.is_nan() || a >= b || a == f64::INFINITY || b == f64::NEG_INFINITY {
            return Err(HjError::input("domain", format!("need a < b, got ({a}, {b})")));
        }
        if !(config.horizon > 0.0 && config.horizon.is_finite()) {
            return Err(HjError::input("T", "horizon must be finite and > 0"));
        }
        let n = &config.numerics;
        if !(n.h > 0.0 && n.h.is_finite()) {
            return Err(HjError::input("numerics.h", "must be finite and > 0"));
        }
        if !(n.cfl > 0.0 && n.cfl <= 1.0) {
            return Err(HjError::input("numerics.cfl", "must lie in (0, 1]"));
        }
        if !(n.record_every > 0.0 && n.record_every.is_finite()) {
            return Err(HjError::input("numerics.record_every", "must be finite and > 0"));
        }
        let hamiltonian = config.hamiltonian.build()?;
        if let Some(alpha) = n.alpha {
            if !(alpha >= hamiltonian.lip() && alpha.is_finite()) {
                return Err(HjError::input(
                    "numerics.alpha",
                    format!("must be finite and >= ‖H'‖∞ = {}", hamiltonian.lip()),
                ));
            }
        }
        for (name, tol) in [
            ("collapse", n.tolerances.collapse),
            ("decay", n.tolerances.decay),
            ("tau", n.tolerances.tau),
            ("dual", n.tolerances.dual),
        ] {
            if let Some(v) = tol {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(HjError::input(
                        format!("numerics.tolerances.{name}"),
                        "must be finite and > 0",
                    ));
                }
            }
        }
        if let Some([lo, hi]) = n.window {
            if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                return Err(HjError::input("numerics.window", "need finite lo < hi"));
            }
        }
        for (side, bc, end) in [
            ("boundary.left", config.boundary.left, a),
            ("boundary.right", config.boundary.right, b),
        ] {
            if !end.is_finite() && bc != OuterBc::Free {
                return Err(HjError::input(
                    side,
                    "an infinite end is truncated and must be `free`",
                ));
            }
        }
        let id = &config.initial_data;
        let traces = id
            .traces
            .as_ref()
            .map(|t| t.iter().map(|p| (p[0], p[1])).collect());
        let initial = PiecewiseFn::new((a, b), id.breakpoints.clone(), id.segments.clone(), traces)?;
        let fingerprint = config.fingerprint()?;
        let scenario = Self {
            config,
            hamiltonian,
            initial,
            fingerprint,
        };
        scenario.validate_trapezoid()?;
        scenario.geometry()?;
        Ok(scenario)
    }

    fn validate_trapezoid(&self) -> Result<()> {
        let (a, b) = self.domain();
        let reach = self.hamiltonian.lip() * self.horizon();
        let edges = [self.config.boundary.left, self.config.boundary.right]
            .iter()
            .filter(|&&bc| bc == OuterBc::Trapezoid)
            .count();
        if edges > 0 && b - a < edges as f64 * reach {
            return Err(HjError::input(
                "boundary",
                format!(
                    "trapezoid too small: width {} < {edges} ‖H'‖∞ T = {}",
                    b - a,
                    edges as f64 * reach
                ),
            ));
        }
        Ok(())
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn hamiltonian(&self) -> &HamiltonianSpec {
        &self.hamiltonian
    }

    pub fn initial(&self) -> &PiecewiseFn {
        &self.initial
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.config.domain[0].value(), self.config.domain[1].value())
    }

    pub fn horizon(&self) -> f64 {
        self.config.horizon
    }

    pub fn numerics(&self) -> &NumericsConfig {
        &self.config.numerics
    }

    pub fn boundary(&self) -> BoundaryConfig {
        self.config.boundary
    }

    pub fn alpha(&self) -> f64 {
        self.config.numerics.alpha.unwrap_or(self.hamiltonian.lip())
    }

    pub fn tolerances(&self) -> Tolerances {
        let n = &self.config.numerics;
        let h = self.geometry().map(|g| g.h).unwrap_or(n.h);
        Tolerances::new(h, self.hamiltonian.lip(), n.record_every, &n.tolerances)
    }

    pub fn outer_tag(&self, bc: OuterBc) -> BcTag {
        match bc {
            OuterBc::Free => BcTag::Free,
            OuterBc::SingularPlus => BcTag::SingularPlus,
            OuterBc::SingularMinus => BcTag::SingularMinus,
            OuterBc::Trapezoid => BcTag::TrapezoidEdge {
                speed: self.hamiltonian.lip(),
            },
        }
    }

    /// Grid over the computational domain. Infinite ends are truncated at
    /// the region of interest padded by `(alpha / cfl) T + 10 h`, so nothing
    /// computed at a truncated end reaches the region of interest.
    pub fn geometry(&self) -> Result<Geometry> {
        let (a, b) = self.domain();
        let n = &self.config.numerics;
        let bps = self.initial.breakpoints();
        let (wlo, whi) = match n.window {
            Some([lo, hi]) => (lo, hi),
            None if a.is_finite() && b.is_finite() => (a, b),
            None => match (bps.first(), bps.last()) {
                (Some(&lo), Some(&hi)) => (lo - 1.0, hi + 1.0),
                _ => (-1.0, 1.0),
            },
        };
        let wlo = wlo.max(a);
        let whi = whi.min(b);
        if wlo >= whi {
            return Err(HjError::input("numerics.window", "does not intersect the domain"));
        }
        // numerical domain of dependence: the scheme moves information at
        // most one node per step
        let pad = self.alpha() / n.cfl * self.horizon() + 10.0 * n.h;
        let ca = if a.is_finite() { a } else { wlo - pad };
        let cb = if b.is_finite() { b } else { whi + pad };
        let cells = ((cb - ca) / n.h).round().max(2.0) as usize;
        if cells > 50_000_000 {
            return Err(HjError::input("numerics.h", "grid too large"));
        }
        let h = (cb - ca) / cells as f64;
        let mut g = Geometry {
            a: ca,
            b: cb,
            h,
            n: cells + 1,
            window: (0, cells),
        };
        g.window = (
            ((wlo - ca) / h - 1e-9).ceil().max(0.0) as usize,
            (((whi - ca) / h + 1e-9).floor() as usize).min(cells),
        );
        // every piece between consecutive jumps needs at least three nodes
        let mut prev = 0usize;
        for (j, &x) in bps.iter().enumerate() {
            let node = g.node(x);
            if node < prev + 2 || node + 2 > cells {
                return Err(HjError::input(
                    format!("initial_data.breakpoints[{j}]"),
                    format!("x = {x} leaves fewer than three nodes in a subinterval at h = {h}"),
                ));
            }
            prev = node;
        }
        Ok(g)
    }

    /// Same scenario at a different grid spacing.
    pub fn with_h(&self, h: f64) -> Result<Self> {
        let mut c = self.config.clone();
        c.numerics.h = h;
        Self::from_config(c)
    }

    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        let mut c = self.config.clone();
        c.horizon = horizon;
        Self::from_config(c)
    }

    /// Same scenario with a different initial datum.
    pub fn with_initial(&self, u0: &PiecewiseFn) -> Result<Self> {
        let mut c = self.config.clone();
        c.initial_data = InitialDataConfig {
            breakpoints: u0.breakpoints().to_vec(),
            segments: u0.segments().to_vec(),
            traces: None,
        };
        Self::from_config(c)
    }

    /// Programmatic constructor.
    pub fn build(
        domain: (f64, f64),
        horizon: f64,
        hamiltonian: &HamiltonianSpec,
        initial: &PiecewiseFn,
        numerics: NumericsConfig,
    ) -> Result<Self> {
        Self::from_config(ScenarioConfig {
            domain: [Bound::from_value(domain.0), Bound::from_value(domain.1)],
            horizon,
            hamiltonian: HamiltonianConfig::from_spec(hamiltonian),
            initial_data: InitialDataConfig {
                breakpoints: initial.breakpoints().to_vec(),
                segments: initial.segments().to_vec(),
                traces: None,
            },
            boundary: BoundaryConfig::default(),
            numerics,
        })
    }

    pub fn with_boundary(&self, boundary: BoundaryConfig) -> Result<Self> {
        let mut c = self.config.clone();
        c.boundary = boundary;
        Self::from_config(c)
    }
}

impl NumericsConfig {
    pub fn new(h: f64) -> Self {
        Self {
            h,
            cfl: default_cfl(),
            record_every: default_record_every(),
            alpha: None,
            window: None,
            tolerances: ToleranceConfig::default(),
        }
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let config: ScenarioConfig = serde_json::from_str(text)?;
    Scenario::from_config(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    const RIEMANN_SIN: &str = r#"{
        "domain": [-2, 2],
        "T": 1,
        "hamiltonian": {"kind": "sin"},
        "initial_data": {
            "breakpoints": [0],
            "segments": [{"kind": "constant", "value": 0}, {"kind": "constant", "value": 1}],
            "traces": [[0, 1]]
        },
        "numerics": {"h": 0.001}
    }"#;

    #[test]
    fn parses_riemann_sin() {
        let s = parse_scenario(RIEMANN_SIN).unwrap();
        assert_eq!(s.hamiltonian().name(), "sin");
        assert_eq!(s.domain(), (-2.0, 2.0));
        assert_eq!(s.horizon(), 1.0);
        assert_eq!(s.initial().traces(), &[(0.0, 1.0)]);
        let g = s.geometry().unwrap();
        assert_eq!(g.n, 4001);
        assert_eq!(g.node(0.0), 2000);
        assert_eq!(s.numerics().cfl, 0.5);
        assert_eq!(s.fingerprint().len(), 16);
    }

    #[test]
    fn table_without_lip_names_the_field() {
        let text = r#"{
            "domain": [-1, 1], "T": 1,
            "hamiltonian": {"kind": "table", "samples": [[-1, 0], [0, 0.5], [1, 1]],
                "tails": {"limsup_plus": 1, "liminf_plus": 1, "limsup_minus": 0, "liminf_minus": 0}},
            "initial_data": {"segments": [{"kind": "constant", "value": 0}]},
            "numerics": {"h": 0.01}
        }"#;
        let err = parse_scenario(text).unwrap_err().to_string();
        assert!(err.contains("hamiltonian.lip"), "{err}");
        let ok = text.replace("\"samples\"", "\"lip\": 0.5, \"samples\"");
        assert!(parse_scenario(&ok).is_ok());
        let no_tails = r#"{
            "domain": [-1, 1], "T": 1,
            "hamiltonian": {"kind": "table", "samples": [[-1, 0], [0, 0.5], [1, 1]], "lip": 1},
            "initial_data": {"segments": [{"kind": "constant", "value": 0}]},
            "numerics": {"h": 0.01}
        }"#;
        let err = parse_scenario(no_tails).unwrap_err().to_string();
        assert!(err.contains("hamiltonian.tails"), "{err}");
    }

    #[test]
    fn equal_traces_are_rejected() {
        let text = RIEMANN_SIN
            .replace(r#""value": 1}"#, r#""value": 0}"#)
            .replace("[[0, 1]]", "[[0, 0]]");
        let err = parse_scenario(&text).unwrap_err().to_string();
        assert!(err.contains("jump discontinuity"), "{err}");
    }

    #[test]
    fn breakpoint_outside_domain_is_rejected() {
        let text = RIEMANN_SIN.replace(r#""breakpoints": [0]"#, r#""breakpoints": [3]"#);
        let err = parse_scenario(&text).unwrap_err().to_string();
        assert!(err.contains("breakpoints[0]"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = parse_scenario("{\n \"domain\": [0, 1],\n \"T\": oops }").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let err = parse_scenario(&RIEMANN_SIN.replace("\"T\"", "\"horizon\"")).unwrap_err();
        assert!(matches!(err, HjError::Parse(_)));
    }

    #[test]
    fn infinite_domain_is_truncated() {
        let text = RIEMANN_SIN.replace("[-2, 2]", r#"["-inf", "inf"]"#);
        let s = parse_scenario(&text).unwrap();
        let g = s.geometry().unwrap();
        // window [-1, 1] padded by (alpha / cfl) T + 10 h
        assert!((g.a - (-3.01)).abs() < 1e-12 && (g.b - 3.01).abs() < 1e-12);
        assert_eq!(g.window, (2010, 4010));
        let bad = text.replace(r#""numerics""#, r#""boundary": {"left": "singular_plus"}, "numerics""#);
        assert!(parse_scenario(&bad).is_err());
    }

    #[test]
    fn tolerances_follow_grid() {
        let t = Tolerances::new(1e-3, 1.0, 0.01, &ToleranceConfig::default());
        assert!((t.collapse - 0.001).abs() < 1e-15);
        assert!((t.sandwich - 0.002).abs() < 1e-8);
        assert!((t.lipschitz_rate - 0.2).abs() < 1e-8);
        assert!((t.comparison - 0.004).abs() < 1e-8);
        let t = Tolerances::new(1e-3, 0.0, 0.01, &ToleranceConfig::default());
        assert_eq!(t.collapse, 1e-6);
    }

    #[test]
    fn small_trapezoid_is_rejected() {
        let text = RIEMANN_SIN.replace(
            r#""numerics""#,
            r#""boundary": {"left": "trapezoid", "right": "trapezoid"}, "numerics""#,
        );
        assert!(parse_scenario(&text).is_ok());
        let text = text.replace("\"T\": 1", "\"T\": 2.5");
        assert!(parse_scenario(&text).is_err());
    }
}
