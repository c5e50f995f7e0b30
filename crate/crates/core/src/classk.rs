//! Scalar comparison functions of class K, K∞ and extended class K∞.
//!
//! Every gain that appears in a certificate or trigger law (the barrier decay
//! `alpha`, the error gain `iota`, the tuning function `beta`, the Lyapunov
//! bounds) is a [`KFunction`]. Membership is checked by dense sampling; the
//! library can falsify a claimed class-K function but never prove one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of samples used by [`validate_k`] callers in this crate.
pub const DEFAULT_SAMPLES: usize = 1000;

/// Half-width of the window sampled when a domain is unbounded.
pub const SAMPLE_SPAN: f64 = 10.0;

/// Closed interval of validity. Bounds may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub lower: f64,
    pub upper: f64,
}

impl Domain {
    pub const EXTENDED: Domain = Domain {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
    };
    pub const NONNEGATIVE: Domain = Domain {
        lower: 0.0,
        upper: f64::INFINITY,
    };

    pub fn contains(&self, r: f64) -> bool {
        r >= self.lower && r <= self.upper
    }

    /// The domain clipped to `[-span, span]`, used for sampling.
    pub fn window(&self, span: f64) -> (f64, f64) {
        (self.lower.max(-span), self.upper.min(span))
    }

    fn shifted(&self, b: f64) -> Domain {
        Domain {
            lower: self.lower + b,
            upper: self.upper + b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KFunctionKind {
    /// `slope * r`
    Linear { slope: f64 },
    /// `coefficient * sign(r) * |r|^exponent`
    Power { coefficient: f64, exponent: f64 },
    /// Piecewise-linear interpolation through `(r, value)` nodes.
    Tabulated { points: Vec<(f64, f64)> },
    /// `base(r - b) - base(-b)`
    Shifted { base: Box<KFunction>, b: f64 },
    /// `factor * base(r)`
    Scaled { base: Box<KFunction>, factor: f64 },
}

/// Serialized form; validated on the way into [`KFunction`].
#[derive(Debug, Clone, Serialize, Deserialize)]
struct KFunctionRepr {
    #[serde(flatten)]
    kind: KFunctionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lipschitz: Option<f64>,
    #[serde(default = "default_extended")]
    extended: bool,
}

fn default_extended() -> bool {
    true
}

/// A validated, immutable class-K style function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KFunctionRepr", into = "KFunctionRepr")]
pub struct KFunction {
    kind: KFunctionKind,
    lipschitz: Option<f64>,
    domain: Domain,
}

impl TryFrom<KFunctionRepr> for KFunction {
    type Error = Error;

    fn try_from(repr: KFunctionRepr) -> Result<Self> {
        let mut f = match repr.kind {
            KFunctionKind::Linear { slope } => KFunction::linear(slope)?,
            KFunctionKind::Power {
                coefficient,
                exponent,
            } => KFunction::power(coefficient, exponent)?,
            KFunctionKind::Tabulated { points } => KFunction::tabulated(points)?,
            KFunctionKind::Shifted { base, b } => shift_transform(&base, b)?.0,
            KFunctionKind::Scaled { base, factor } => base.scaled(factor)?,
        };
        if !repr.extended {
            f = f.restricted_to_nonnegative()?;
        }
        match repr.lipschitz {
            Some(l) => f.with_lipschitz(l),
            None => Ok(f),
        }
    }
}

impl From<KFunction> for KFunctionRepr {
    fn from(f: KFunction) -> Self {
        KFunctionRepr {
            extended: f.is_extended(),
            kind: f.kind,
            lipschitz: f.lipschitz,
        }
    }
}

fn positive(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::parameter(
            name,
            format!("must be finite and > 0, got {v}"),
        ))
    }
}

impl KFunction {
    /// `slope * r` on the whole real line.
    pub fn linear(slope: f64) -> Result<Self> {
        positive("slope", slope)?;
        Ok(KFunction {
            kind: KFunctionKind::Linear { slope },
            lipschitz: None,
            domain: Domain::EXTENDED,
        })
    }

    pub fn identity() -> Self {
        KFunction::linear(1.0).expect("unit slope is valid")
    }

    /// Odd power law `c * sign(r) * |r|^p` on the whole real line.
    pub fn power(coefficient: f64, exponent: f64) -> Result<Self> {
        positive("coefficient", coefficient)?;
        positive("exponent", exponent)?;
        Ok(KFunction {
            kind: KFunctionKind::Power {
                coefficient,
                exponent,
            },
            lipschitz: None,
            domain: Domain::EXTENDED,
        })
    }

    /// Piecewise-linear through the given nodes. Abscissae must be strictly
    /// increasing; monotonicity of the ordinates is left to [`validate_k`].
    pub fn tabulated(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::parameter("points", "need at least two nodes"));
        }
        if points.iter().any(|(r, v)| !r.is_finite() || !v.is_finite()) {
            return Err(Error::parameter("points", "nodes must be finite"));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::parameter(
                "points",
                "abscissae must be strictly increasing",
            ));
        }
        let domain = Domain {
            lower: points[0].0,
            upper: points[points.len() - 1].0,
        };
        if !domain.contains(0.0) {
            return Err(Error::parameter("points", "domain must contain 0"));
        }
        Ok(KFunction {
            kind: KFunctionKind::Tabulated { points },
            lipschitz: None,
            domain,
        })
    }

    /// `factor * self`. The Lipschitz constant scales with it.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        positive("factor", factor)?;
        Ok(KFunction {
            kind: KFunctionKind::Scaled {
                base: Box::new(self.clone()),
                factor,
            },
            lipschitz: self.lipschitz.map(|l| l * factor),
            domain: self.domain,
        })
    }

    /// Attach a global Lipschitz constant.
    pub fn with_lipschitz(mut self, l: f64) -> Result<Self> {
        if !(l.is_finite() && l >= 0.0) {
            return Err(Error::parameter(
                "lipschitz",
                format!("must be finite and >= 0, got {l}"),
            ));
        }
        self.lipschitz = Some(l);
        Ok(self)
    }

    fn restricted_to_nonnegative(mut self) -> Result<Self> {
        if !self.domain.contains(0.0) {
            return Err(Error::parameter("extended", "domain must contain 0"));
        }
        self.domain.lower = self.domain.lower.max(0.0);
        Ok(self)
    }

    /// Same function on `[0, upper]` only (plain class K).
    pub fn nonnegative(self) -> Self {
        self.restricted_to_nonnegative()
            .expect("every KFunction domain contains 0")
    }

    pub fn kind(&self) -> &KFunctionKind {
        &self.kind
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// True when the domain extends below zero.
    pub fn is_extended(&self) -> bool {
        self.domain.lower < 0.0
    }

    /// Evaluate, rejecting arguments outside the domain.
    pub fn eval(&self, r: f64) -> Result<f64> {
        if !self.domain.contains(r) {
            return Err(Error::Range {
                value: r,
                lower: self.domain.lower,
                upper: self.domain.upper,
            });
        }
        Ok(self.eval_raw(r))
    }

    /// Evaluate without domain reporting; NaN outside the domain.
    pub fn value(&self, r: f64) -> f64 {
        if self.domain.contains(r) {
            self.eval_raw(r)
        } else {
            f64::NAN
        }
    }

    fn eval_raw(&self, r: f64) -> f64 {
        match &self.kind {
            KFunctionKind::Linear { slope } => slope * r,
            KFunctionKind::Power {
                coefficient,
                exponent,
            } => {
                if r == 0.0 {
                    0.0
                } else {
                    coefficient * r.signum() * r.abs().powf(*exponent)
                }
            }
            KFunctionKind::Tabulated { points } => interpolate(points, r),
            KFunctionKind::Shifted { base, b } => base.eval_raw(r - b) - base.eval_raw(-b),
            KFunctionKind::Scaled { base, factor } => factor * base.eval_raw(r),
        }
    }

    /// Solve `self(r) = y` for `r`.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        if !y.is_finite() {
            return Err(Error::Evaluation(format!("cannot invert at {y}")));
        }
        match &self.kind {
            KFunctionKind::Linear { slope } => self.in_domain(y / slope),
            KFunctionKind::Power {
                coefficient,
                exponent,
            } => self.in_domain(y.signum() * (y.abs() / coefficient).powf(1.0 / exponent)),
            _ => self.inverse_by_bisection(y),
        }
    }

    fn in_domain(&self, r: f64) -> Result<f64> {
        if self.domain.contains(r) {
            Ok(r)
        } else {
            Err(Error::Range {
                value: r,
                lower: self.domain.lower,
                upper: self.domain.upper,
            })
        }
    }

    fn inverse_by_bisection(&self, y: f64) -> Result<f64> {
        let out_of_range = || Error::Evaluation(format!("{y} is outside the range"));
        let (mut lo, mut hi) = if y >= 0.0 {
            (0.0, self.domain.upper.min(1.0))
        } else {
            (self.domain.lower.max(-1.0), 0.0)
        };
        // grow the bracket on unbounded domains
        for _ in 0..200 {
            let (f_lo, f_hi) = (self.eval_raw(lo), self.eval_raw(hi));
            if f_lo <= y && y <= f_hi {
                break;
            }
            if y > f_hi {
                if hi >= self.domain.upper {
                    return Err(out_of_range());
                }
                hi = (2.0 * hi).min(self.domain.upper);
            } else {
                if lo <= self.domain.lower {
                    return Err(out_of_range());
                }
                lo = (2.0 * lo).max(self.domain.lower);
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.eval_raw(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

fn interpolate(points: &[(f64, f64)], r: f64) -> f64 {
    let idx = points.partition_point(|(x, _)| *x <= r);
    if idx == 0 {
        return points[0].1;
    }
    if idx == points.len() {
        return points[points.len() - 1].1;
    }
    let (x0, y0) = points[idx - 1];
    let (x1, y1) = points[idx];
    if r == x0 {
        return y0;
    }
    y0 + (y1 - y0) * (r - x0) / (x1 - x0)
}

/// Outcome of sampling a function against the class-K properties.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub samples: usize,
    pub zero_ok: bool,
    /// First sampled pair `(r1, r2)`, `r1 < r2`, with `f(r1) >= f(r2)`.
    pub monotonicity_violation: Option<(f64, f64)>,
    /// First sampled pair exceeding the declared Lipschitz constant.
    pub lipschitz_violation: Option<(f64, f64)>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.zero_ok && self.monotonicity_violation.is_none() && self.lipschitz_violation.is_none()
    }
}

/// Check `f(0) = 0`, strict monotonicity and the Lipschitz bound at
/// `samples` uniformly spaced points of the domain (clipped to
/// `[-SAMPLE_SPAN, SAMPLE_SPAN]`).
pub fn validate_k(f: &KFunction, samples: usize) -> ValidationReport {
    let (lo, hi) = f.domain.window(SAMPLE_SPAN);
    validate_k_on(f, samples, lo, hi)
}

/// [`validate_k`] over an explicit window `[lo, hi]` inside the domain.
pub fn validate_k_on(f: &KFunction, samples: usize, lo: f64, hi: f64) -> ValidationReport {
    let samples = samples.max(2);
    let zero_ok = !f.domain.contains(0.0) || f.eval_raw(0.0) == 0.0;
    let step = (hi - lo) / (samples - 1) as f64;
    let grid: Vec<f64> = (0..samples)
        .map(|i| {
            if i == samples - 1 {
                hi
            } else {
                lo + step * i as f64
            }
        })
        .collect();
    let values: Vec<f64> = grid.iter().map(|&r| f.eval_raw(r)).collect();

    let mut monotonicity_violation = None;
    let mut lipschitz_violation = None;
    for i in 0..samples - 1 {
        let (r1, r2) = (grid[i], grid[i + 1]);
        let (v1, v2) = (values[i], values[i + 1]);
        if monotonicity_violation.is_none() && !(v1 < v2) {
            monotonicity_violation = Some((r1, r2));
        }
        if let Some(l) = f.lipschitz {
            let bound = l * (r2 - r1) * (1.0 + 1e-12) + 1e-15;
            if lipschitz_violation.is_none() && (v2 - v1).abs() > bound {
                lipschitz_violation = Some((r1, r2));
            }
        }
    }
    ValidationReport {
        samples,
        zero_ok,
        monotonicity_violation,
        lipschitz_violation,
    }
}

/// Shift an extended class-K∞ function to obtain `alpha_b(r) = alpha(r - b) - alpha(-b)`
/// together with the margin `d_b = -alpha(-b) > 0`.
pub fn shift_transform(alpha: &KFunction, b: f64) -> Result<(KFunction, f64)> {
    if !(b.is_finite() && b > 0.0) {
        return Err(Error::parameter(
            "b",
            format!("must be finite and > 0, got {b}"),
        ));
    }
    let d_b = -alpha.eval(-b)?;
    if !(d_b > 0.0) {
        return Err(Error::parameter(
            "b",
            format!("alpha(-b) must be negative, got {}", -d_b),
        ));
    }
    let shifted = KFunction {
        kind: KFunctionKind::Shifted {
            base: Box::new(alpha.clone()),
            b,
        },
        lipschitz: alpha.lipschitz,
        domain: alpha.domain.shifted(b),
    };
    Ok((shifted, d_b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_examples() {
        assert_eq!(KFunction::identity().eval(0.0).unwrap(), 0.0);
        let two = KFunction::linear(2.0).unwrap();
        assert!((two.eval(0.3).unwrap() - 0.6).abs() < 1e-15);
        let iota = KFunction::power(2.0 * 1.2f64.powi(3), 1.0).unwrap();
        assert!((iota.eval(0.5).unwrap() - 1.728).abs() < 1e-12);
    }

    #[test]
    fn extended_functions_preserve_sign() {
        let cubic = KFunction::power(1.0, 3.0).unwrap();
        assert_eq!(cubic.eval(-2.0).unwrap(), -8.0);
        assert!(KFunction::power(0.5, 0.5).unwrap().eval(-4.0).unwrap() < 0.0);
    }

    #[test]
    fn plain_k_rejects_negative_arguments() {
        let f = KFunction::linear(1.0).unwrap().nonnegative();
        assert!(matches!(f.eval(-0.1), Err(Error::Range { .. })));
        assert!(f.value(-0.1).is_nan());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(KFunction::linear(0.0).is_err());
        assert!(KFunction::power(1.0, -1.0).is_err());
        assert!(KFunction::tabulated(vec![(1.0, 0.0), (0.5, 1.0)]).is_err());
        assert!(KFunction::tabulated(vec![(1.0, 0.0), (2.0, 1.0)]).is_err());
        assert!(KFunction::identity().with_lipschitz(-1.0).is_err());
    }

    #[test]
    fn validation_examples() {
        assert!(validate_k(&KFunction::identity(), 1000).passed());
        assert!(validate_k(&KFunction::power(1.0, 3.0).unwrap(), 1000).passed());

        let bumpy = KFunction::tabulated(vec![(0.0, 0.0), (1.0, 2.0), (2.0, 1.0)]).unwrap();
        let coarse = validate_k(&bumpy, 3);
        assert!(!coarse.passed());
        assert_eq!(coarse.monotonicity_violation, Some((1.0, 2.0)));
        let dense = validate_k(&bumpy, 1000);
        let (r1, r2) = dense.monotonicity_violation.unwrap();
        assert!((1.0..=2.0).contains(&r1) && (1.0..=2.0).contains(&r2));
    }

    #[test]
    fn lipschitz_cross_check() {
        let ok = KFunction::linear(3.0).unwrap().with_lipschitz(3.0).unwrap();
        assert!(validate_k(&ok, 1000).passed());
        let bad = KFunction::power(1.0, 3.0)
            .unwrap()
            .with_lipschitz(1.0)
            .unwrap();
        let report = validate_k(&bad, 1000);
        assert!(report.monotonicity_violation.is_none());
        assert!(report.lipschitz_violation.is_some());
    }

    #[test]
    fn shift_transform_examples() {
        let (id_b, d) = shift_transform(&KFunction::identity(), 0.1).unwrap();
        assert_eq!(d, 0.1);
        for r in [-3.0, -0.1, 0.0, 0.37, 5.0] {
            assert!((id_b.eval(r).unwrap() - r).abs() < 1e-15);
        }

        let cubic = KFunction::power(1.0, 3.0).unwrap();
        let (cubic_1, d1) = shift_transform(&cubic, 1.0).unwrap();
        assert_eq!(d1, 1.0);
        assert_eq!(cubic_1.eval(2.0).unwrap(), 2.0);
        let (_, d_half) = shift_transform(&cubic, 0.5).unwrap();
        assert_eq!(d_half, 0.125);
    }

    #[test]
    fn shift_transform_errors() {
        assert!(matches!(
            shift_transform(&KFunction::identity(), 0.0),
            Err(Error::Parameter { .. })
        ));
        let plain = KFunction::identity().nonnegative();
        assert!(matches!(
            shift_transform(&plain, 0.5),
            Err(Error::Range { .. })
        ));
    }

    #[test]
    fn inverse_round_trips() {
        let fs = [
            KFunction::linear(3.456).unwrap(),
            KFunction::power(2.0, 3.0).unwrap(),
            shift_transform(&KFunction::power(1.0, 3.0).unwrap(), 0.5)
                .unwrap()
                .0,
            KFunction::tabulated(vec![(-1.0, -2.0), (0.0, 0.0), (1.0, 0.5), (4.0, 1.0)]).unwrap(),
        ];
        for f in &fs {
            for y in [-0.9, -0.01, 0.0, 0.02, 0.7] {
                let r = f.inverse(y).unwrap();
                assert!((f.eval(r).unwrap() - y).abs() < 1e-12, "{f:?} at {y}");
            }
        }
    }

    #[test]
    fn json_round_trip_keeps_metadata() {
        let f = KFunction::linear(3.456)
            .unwrap()
            .nonnegative()
            .with_lipschitz(3.456)
            .unwrap();
        let text = serde_json::to_string(&f).unwrap();
        let back: KFunction = serde_json::from_str(&text).unwrap();
        assert_eq!(back, f);

        let parsed: KFunction =
            serde_json::from_str(r#"{"kind":"power","coefficient":1.0,"exponent":3.0}"#).unwrap();
        assert_eq!(parsed, KFunction::power(1.0, 3.0).unwrap());
        assert!(serde_json::from_str::<KFunction>(r#"{"kind":"linear","slope":-1.0}"#).is_err());
    }
}
