//! Piecewise-continuous initial data and discrete essential envelopes.
//!
//! On a fixed grid there are no null sets, so "essential" is modelled by an
//! explicit set of exceptional nodes: their stored values are ignored and the
//! envelope there is read off the non-exceptional neighbours. Non-exceptional
//! nodes behave as atoms of positive measure, so the envelope keeps their
//! value. With the exceptional set carried through compositions this gives
//! `(z*)* = (z_*)* = z*` and `(z*)_* = (z_*)_* = z_*` exactly.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{HjError, Result};

/// Continuous representative of one segment of the initial datum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SegmentFn {
    Constant {
        value: f64,
    },
    Affine {
        slope: f64,
        intercept: f64,
    },
    /// `offset + amp * sin(freq * x + phase)`
    Sine {
        #[serde(default = "one")]
        amp: f64,
        #[serde(default = "one")]
        freq: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        offset: f64,
    },
    /// Uniform samples on `[x0, x1]`, linearly interpolated and clamped
    /// outside. `modulus` bounds the difference of adjacent samples.
    Sampled {
        x0: f64,
        x1: f64,
        values: Vec<f64>,
        modulus: f64,
    },
    /// `height * cos²(π (x - center) / (2 half_width))` on the support, 0 off it.
    Bump {
        center: f64,
        half_width: f64,
        height: f64,
    },
    Sum {
        terms: Vec<SegmentFn>,
    },
}

fn one() -> f64 {
    1.0
}

impl SegmentFn {
    pub fn constant(value: f64) -> Self {
        SegmentFn::Constant { value }
    }

    pub fn affine(slope: f64, intercept: f64) -> Self {
        SegmentFn::Affine { slope, intercept }
    }

    pub fn sine() -> Self {
        SegmentFn::Sine {
            amp: 1.0,
            freq: 1.0,
            phase: 0.0,
            offset: 0.0,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            SegmentFn::Constant { value } => *value,
            SegmentFn::Affine { slope, intercept } => slope * x + intercept,
            SegmentFn::Sine {
                amp,
                freq,
                phase,
                offset,
            } => offset + amp * (freq * x + phase).sin(),
            SegmentFn::Sampled { x0, x1, values, .. } => {
                let last = values.len() - 1;
                let s = (x - x0) / (x1 - x0) * last as f64;
                if s <= 0.0 {
                    values[0]
                } else if s >= last as f64 {
                    values[last]
                } else {
                    let i = (s.floor() as usize).min(last - 1);
                    let w = s - i as f64;
                    values[i] * (1.0 - w) + values[i + 1] * w
                }
            }
            SegmentFn::Bump {
                center,
                half_width,
                height,
            } => {
                let r = (x - center) / half_width;
                if r.abs() >= 1.0 {
                    0.0
                } else {
                    height * (0.5 * PI * r).cos().powi(2)
                }
            }
            SegmentFn::Sum { terms } => terms.iter().map(|t| t.eval(x)).sum(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            SegmentFn::Constant { value } => *value == 0.0,
            SegmentFn::Affine { slope, intercept } => *slope == 0.0 && *intercept == 0.0,
            SegmentFn::Sine { amp, offset, .. } => *amp == 0.0 && *offset == 0.0,
            SegmentFn::Sampled { values, .. } => values.iter().all(|&v| v == 0.0),
            SegmentFn::Bump { height, .. } => *height == 0.0,
            SegmentFn::Sum { terms } => terms.iter().all(SegmentFn::is_zero),
        }
    }

    /// Closed interval outside which the segment is identically zero, if any.
    pub fn support(&self) -> Option<(f64, f64)> {
        match self {
            SegmentFn::Bump {
                center, half_width, ..
            } => Some((center - half_width, center + half_width)),
            _ => None,
        }
    }

    /// Slack allowed when comparing a declared trace with the segment value.
    fn trace_slack(&self) -> f64 {
        match self {
            SegmentFn::Sampled { modulus, .. } => *modulus,
            SegmentFn::Sum { terms } => terms.iter().map(|t| t.trace_slack()).sum(),
            _ => 0.0,
        }
    }

    fn validate(&self, field: &str) -> Result<()> {
        let finite = |v: f64, name: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(HjError::input(format!("{field}.{name}"), "must be finite"))
            }
        };
        match self {
            SegmentFn::Constant { value } => finite(*value, "value"),
            SegmentFn::Affine { slope, intercept } => {
                finite(*slope, "slope")?;
                finite(*intercept, "intercept")
            }
            SegmentFn::Sine {
                amp,
                freq,
                phase,
                offset,
            } => {
                finite(*amp, "amp")?;
                finite(*freq, "freq")?;
                finite(*phase, "phase")?;
                finite(*offset, "offset")
            }
            SegmentFn::Sampled {
                x0,
                x1,
                values,
                modulus,
            } => {
                finite(*x0, "x0")?;
                finite(*x1, "x1")?;
                finite(*modulus, "modulus")?;
                if x1 <= x0 {
                    return Err(HjError::input(format!("{field}.x1"), "must exceed x0"));
                }
                if values.len() < 2 {
                    return Err(HjError::input(
                        format!("{field}.values"),
                        "at least two samples are required",
                    ));
                }
                for (i, v) in values.iter().enumerate() {
                    finite(*v, &format!("values[{i}]"))?;
                }
                for (i, w) in values.windows(2).enumerate() {
                    if (w[1] - w[0]).abs() > *modulus {
                        return Err(HjError::input(
                            format!("{field}.values[{}]", i + 1),
                            format!(
                                "adjacent samples differ by {} > continuity modulus {modulus}",
                                (w[1] - w[0]).abs()
                            ),
                        ));
                    }
                }
                Ok(())
            }
            SegmentFn::Bump {
                center,
                half_width,
                height,
            } => {
                finite(*center, "center")?;
                finite(*height, "height")?;
                if !(half_width.is_finite() && *half_width > 0.0) {
                    return Err(HjError::input(
                        format!("{field}.half_width"),
                        "must be finite and > 0",
                    ));
                }
                Ok(())
            }
            SegmentFn::Sum { terms } => {
                for (i, t) in terms.iter().enumerate() {
                    t.validate(&format!("{field}.terms[{i}]"))?;
                }
                Ok(())
            }
        }
    }
}

/// Piecewise-continuous function with finitely many jump discontinuities.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseFn {
    domain: (f64, f64),
    breakpoints: Vec<f64>,
    segments: Vec<SegmentFn>,
    traces: Vec<(f64, f64)>,
}

impl PiecewiseFn {
    /// `domain` may have infinite ends. When `traces` is `None` they are
    /// read off the segments; when given they must agree with the segments.
    pub fn new(
        domain: (f64, f64),
        breakpoints: Vec<f64>,
        segments: Vec<SegmentFn>,
        traces: Option<Vec<(f64, f64)>>,
    ) -> Result<Self> {
        let (a, b) = domain;
        if a.is_nan() || b.is_nan() || a >= b {
            return Err(HjError::input("domain", "need a < b"));
        }
        if segments.len() != breakpoints.len() + 1 {
            return Err(HjError::input(
                "initial_data.segments",
                format!(
                    "{} breakpoints need {} segments, got {}",
                    breakpoints.len(),
                    breakpoints.len() + 1,
                    segments.len()
                ),
            ));
        }
        for (i, &x) in breakpoints.iter().enumerate() {
            if !x.is_finite() || x <= a || x >= b {
                return Err(HjError::input(
                    format!("initial_data.breakpoints[{i}]"),
                    format!("{x} is not interior to the domain ({a}, {b})"),
                ));
            }
            if i > 0 && x <= breakpoints[i - 1] {
                return Err(HjError::input(
                    format!("initial_data.breakpoints[{i}]"),
                    "breakpoints must be strictly increasing",
                ));
            }
        }
        for (i, s) in segments.iter().enumerate() {
            s.validate(&format!("initial_data.segments[{i}]"))?;
        }
        let computed: Vec<(f64, f64)> = breakpoints
            .iter()
            .enumerate()
            .map(|(j, &x)| (segments[j].eval(x), segments[j + 1].eval(x)))
            .collect();
        let traces = match traces {
            None => computed,
            Some(given) => {
                if given.len() != breakpoints.len() {
                    return Err(HjError::input(
                        "initial_data.traces",
                        format!(
                            "expected {} trace pairs, got {}",
                            breakpoints.len(),
                            given.len()
                        ),
                    ));
                }
                for (j, (g, c)) in given.iter().zip(&computed).enumerate() {
                    let sl = 1e-9 + segments[j].trace_slack();
                    let sr = 1e-9 + segments[j + 1].trace_slack();
                    if (g.0 - c.0).abs() > sl || (g.1 - c.1).abs() > sr {
                        return Err(HjError::input(
                            format!("initial_data.traces[{j}]"),
                            format!(
                                "declared traces ({}, {}) disagree with segment values ({}, {})",
                                g.0, g.1, c.0, c.1
                            ),
                        ));
                    }
                }
                given
            }
        };
        for (j, (l, r)) in traces.iter().enumerate() {
            if l == r {
                return Err(HjError::input(
                    format!("initial_data.traces[{j}]"),
                    format!(
                        "equal one-sided values {l} at x = {}: a listed breakpoint must be a jump discontinuity",
                        breakpoints[j]
                    ),
                ));
            }
        }
        Ok(Self {
            domain,
            breakpoints,
            segments,
            traces,
        })
    }

    /// A continuous function given by a single segment.
    pub fn continuous(domain: (f64, f64), segment: SegmentFn) -> Result<Self> {
        Self::new(domain, Vec::new(), vec![segment], None)
    }

    /// `left` on `x < at`, `right` on `x ≥ at`.
    pub fn step(domain: (f64, f64), at: f64, left: f64, right: f64) -> Result<Self> {
        Self::new(
            domain,
            vec![at],
            vec![SegmentFn::constant(left), SegmentFn::constant(right)],
            None,
        )
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn segments(&self) -> &[SegmentFn] {
        &self.segments
    }

    pub fn traces(&self) -> &[(f64, f64)] {
        &self.traces
    }

    /// Index of the segment containing `x` (breakpoints belong to the right).
    pub fn segment_index(&self, x: f64) -> usize {
        self.breakpoints.partition_point(|&b| b <= x)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.segments[self.segment_index(x)].eval(x)
    }

    /// `(f(c⁻), f(c⁺))`.
    pub fn one_sided_limits(&self, c: f64) -> Result<(f64, f64)> {
        let (a, b) = self.domain;
        if !c.is_finite() || c <= a || c >= b {
            return Err(HjError::input(
                "c",
                format!("{c} is not interior to the domain ({a}, {b})"),
            ));
        }
        if let Some(j) = self.breakpoints.iter().position(|&x| x == c) {
            return Ok(self.traces[j]);
        }
        let v = self.eval(c);
        Ok((v, v))
    }

    /// Returns `self + g` with `g` added to every segment.
    pub fn add(&self, g: &SegmentFn) -> Result<Self> {
        let segments = self
            .segments
            .iter()
            .map(|s| SegmentFn::Sum {
                terms: vec![s.clone(), g.clone()],
            })
            .collect();
        Self::new(self.domain, self.breakpoints.clone(), segments, None)
    }
}

/// Values on a uniform grid `x_i = x0 + i h`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFn {
    pub x0: f64,
    pub h: f64,
    pub values: Vec<f64>,
}

impl GridFn {
    pub fn new(x0: f64, h: f64, values: Vec<f64>) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(HjError::input("h", "node spacing must be positive"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(HjError::input(format!("values[{i}]"), "must be finite"));
        }
        Ok(Self { x0, h, values })
    }

    pub fn sample(x0: f64, h: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(x0, h, (0..n).map(|i| f(x0 + h * i as f64)).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + self.h * i as f64
    }

    /// Nodes `range` as a grid function of their own.
    pub fn restrict(&self, range: std::ops::RangeInclusive<usize>) -> GridFn {
        GridFn {
            x0: self.x(*range.start()),
            h: self.h,
            values: self.values[range].to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopePair {
    pub upper: GridFn,
    pub lower: GridFn,
}

fn envelope_with(
    z: &GridFn,
    exceptional: &[bool],
    pick: impl Fn(f64, f64) -> f64,
) -> Result<GridFn> {
    let n = z.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        if !exceptional[i] {
            out.push(z.values[i]);
            continue;
        }
        let neighbours = [i.checked_sub(1), (i + 1 < n).then_some(i + 1)];
        let v = neighbours
            .into_iter()
            .flatten()
            .filter(|&j| !exceptional[j])
            .map(|j| z.values[j])
            .reduce(&pick)
            .ok_or(HjError::EmptyNeighbourhood(i))?;
        out.push(v);
    }
    Ok(GridFn {
        x0: z.x0,
        h: z.h,
        values: out,
    })
}

/// Discrete essential upper and lower envelopes of `z`.
///
/// `exceptional[i]` marks node `i` as a null modification: its own value is
/// never read, and its envelope is the max (min) over its non-exceptional
/// neighbours.
pub fn essential_envelopes(z: &GridFn, exceptional: &[bool]) -> Result<EnvelopePair> {
    if exceptional.len() != z.len() {
        return Err(HjError::GridMismatch(format!(
            "{} exceptional flags for {} nodes",
            exceptional.len(),
            z.len()
        )));
    }
    Ok(EnvelopePair {
        upper: envelope_with(z, exceptional, f64::max)?,
        lower: envelope_with(z, exceptional, f64::min)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdempotenceReport {
    /// max over nodes and the four identities of `|lhs - rhs|`
    pub max_deviation: f64,
}

/// Measures `(z*)* = (z_*)* = z*` and `(z*)_* = (z_*)_* = z_*` nodewise.
pub fn envelope_idempotence(z: &GridFn, exceptional: &[bool]) -> Result<IdempotenceReport> {
    let EnvelopePair { upper, lower } = essential_envelopes(z, exceptional)?;
    let of_upper = essential_envelopes(&upper, exceptional)?;
    let of_lower = essential_envelopes(&lower, exceptional)?;
    let dev = |a: &GridFn, b: &GridFn| {
        a.values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    let max_deviation = [
        dev(&of_upper.upper, &upper),
        dev(&of_lower.upper, &upper),
        dev(&of_upper.lower, &lower),
        dev(&of_lower.lower, &lower),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    Ok(IdempotenceReport { max_deviation })
}
