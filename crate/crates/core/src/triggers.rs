//! Trigger laws as residual functions.
//!
//! Every law is written as `residual(h, |x|, |e|)`; holding the input is
//! permitted while the residual is positive and an event fires at the first
//! zero crossing from above.

use serde::{Deserialize, Serialize};

use crate::classk::{shift_transform, KFunction};
use crate::error::{Error, Result};
use crate::systems::{norm, BarrierCertificate, IssLfCertificate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum TriggerLaw {
    /// `gamma(|e|) <= sigma alpha3(|x|)`, `0 < sigma < 1`.
    Stabilization {
        gamma: KFunction,
        alpha3: KFunction,
        sigma: f64,
    },
    /// `iota(|e|) <= sigma alpha(h)`, `sigma > 0`. Unsatisfiable once `h < 0`.
    NaiveSafety {
        iota: KFunction,
        alpha: KFunction,
        sigma: f64,
    },
    /// `iota(|e|) <= sigma |alpha(h)|`, `0 < sigma < 1`.
    SignedNaiveSafety {
        iota: KFunction,
        alpha: KFunction,
        sigma: f64,
    },
    /// `iota(|e|) <= beta(h) - alpha(h) + sigma d`, `0 < sigma <= 1`, `d > 0`.
    StrongIssf {
        iota: KFunction,
        alpha: KFunction,
        beta: KFunction,
        sigma: f64,
        d: f64,
    },
}

fn sigma_error(variant: &str, range: &str, sigma: f64) -> Error {
    Error::parameter(
        "sigma",
        format!("{variant} requires sigma in {range}, got {sigma}"),
    )
}

impl TriggerLaw {
    pub fn stabilization(cert: &IssLfCertificate, sigma: f64) -> Result<Self> {
        let law = TriggerLaw::Stabilization {
            gamma: cert.gamma.clone(),
            alpha3: cert.alpha3.clone(),
            sigma,
        };
        law.validate()?;
        Ok(law)
    }

    pub fn naive_safety(cert: &BarrierCertificate, sigma: f64) -> Result<Self> {
        let law = TriggerLaw::NaiveSafety {
            iota: cert.iota.clone(),
            alpha: cert.alpha.clone(),
            sigma,
        };
        law.validate()?;
        Ok(law)
    }

    pub fn signed_naive_safety(cert: &BarrierCertificate, sigma: f64) -> Result<Self> {
        let law = TriggerLaw::SignedNaiveSafety {
            iota: cert.iota.clone(),
            alpha: cert.alpha.clone(),
            sigma,
        };
        law.validate()?;
        Ok(law)
    }

    /// Strong ISSf trigger for a certificate with `strong_margin > 0`.
    /// `beta` defaults to `alpha`.
    pub fn strong_issf(
        cert: &BarrierCertificate,
        beta: Option<KFunction>,
        sigma: f64,
    ) -> Result<Self> {
        let law = TriggerLaw::StrongIssf {
            iota: cert.iota.clone(),
            alpha: cert.alpha.clone(),
            beta: beta.unwrap_or_else(|| cert.alpha.clone()),
            sigma,
            d: cert.strong_margin,
        };
        law.validate()?;
        Ok(law)
    }

    /// Check the per-variant parameter ranges.
    pub fn validate(&self) -> Result<()> {
        let open_unit = |s: f64| s > 0.0 && s < 1.0;
        match self {
            TriggerLaw::Stabilization { sigma, .. } if !open_unit(*sigma) => {
                Err(sigma_error("stabilization", "(0, 1)", *sigma))
            }
            TriggerLaw::NaiveSafety { sigma, .. } if !(*sigma > 0.0 && sigma.is_finite()) => {
                Err(sigma_error("naive_safety", "(0, inf)", *sigma))
            }
            TriggerLaw::SignedNaiveSafety { sigma, .. } if !open_unit(*sigma) => {
                Err(sigma_error("signed_naive_safety", "(0, 1)", *sigma))
            }
            TriggerLaw::StrongIssf {
                sigma,
                d,
                alpha,
                beta,
                ..
            } => {
                if !(*sigma > 0.0 && *sigma <= 1.0) {
                    return Err(sigma_error("strong_issf", "(0, 1]", *sigma));
                }
                if !(*d > 0.0 && d.is_finite()) {
                    return Err(Error::parameter(
                        "d",
                        format!("strong margin must be > 0, got {d}"),
                    ));
                }
                if !alpha.is_extended() || !beta.is_extended() {
                    return Err(Error::parameter(
                        "beta",
                        "alpha and beta must be extended class K",
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn sigma(&self) -> f64 {
        match self {
            TriggerLaw::Stabilization { sigma, .. }
            | TriggerLaw::NaiveSafety { sigma, .. }
            | TriggerLaw::SignedNaiveSafety { sigma, .. }
            | TriggerLaw::StrongIssf { sigma, .. } => *sigma,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TriggerLaw::Stabilization { .. } => "stabilization",
            TriggerLaw::NaiveSafety { .. } => "naive_safety",
            TriggerLaw::SignedNaiveSafety { .. } => "signed_naive_safety",
            TriggerLaw::StrongIssf { .. } => "strong_issf",
        }
    }

    /// Right-hand side of the trigger inequality (the allowance for the error gain).
    pub fn allowance(&self, h: f64, norm_x: f64) -> f64 {
        match self {
            TriggerLaw::Stabilization { alpha3, sigma, .. } => sigma * alpha3.value(norm_x),
            TriggerLaw::NaiveSafety { alpha, sigma, .. } => sigma * alpha.value(h),
            TriggerLaw::SignedNaiveSafety { alpha, sigma, .. } => sigma * alpha.value(h).abs(),
            TriggerLaw::StrongIssf {
                alpha,
                beta,
                sigma,
                d,
                ..
            } => beta.value(h) - alpha.value(h) + sigma * d,
        }
    }

    /// Gain applied to the error norm.
    pub fn error_gain(&self) -> &KFunction {
        match self {
            TriggerLaw::Stabilization { gamma, .. } => gamma,
            TriggerLaw::NaiveSafety { iota, .. }
            | TriggerLaw::SignedNaiveSafety { iota, .. }
            | TriggerLaw::StrongIssf { iota, .. } => iota,
        }
    }

    /// Positive while holding is allowed, zero on the event surface.
    pub fn residual(&self, h: f64, norm_x: f64, norm_e: f64) -> f64 {
        self.allowance(h, norm_x) - self.error_gain().value(norm_e)
    }
}

/// [`TriggerLaw::residual`] from raw state and error vectors.
pub fn trigger_residual(law: &TriggerLaw, x: &[f64], h_val: f64, e: &[f64]) -> f64 {
    law.residual(h_val, norm(x), norm(e))
}

/// Sampled check of `beta(r) >= alpha(r)` on `[h_lo, h_hi]`.
pub fn check_beta_dominates(law: &TriggerLaw, h_lo: f64, h_hi: f64, samples: usize) -> Result<()> {
    let TriggerLaw::StrongIssf { alpha, beta, .. } = law else {
        return Ok(());
    };
    let samples = samples.max(2);
    for i in 0..samples {
        let r = h_lo + (h_hi - h_lo) * i as f64 / (samples - 1) as f64;
        let (a, b) = (alpha.value(r), beta.value(r));
        if !(b >= a) {
            return Err(Error::parameter(
                "beta",
                format!("beta({r}) = {b} < alpha({r}) = {a}"),
            ));
        }
    }
    Ok(())
}

/// Minimum interevent time `tau = sigma d / (L_iota F)` of the strong ISSf trigger.
pub fn miet_bound(law: &TriggerLaw, lipschitz_iota: f64, dynamics_bound: f64) -> Result<f64> {
    let TriggerLaw::StrongIssf { sigma, d, .. } = law else {
        return Err(Error::parameter(
            "law",
            format!("{} has no interevent-time guarantee", law.name()),
        ));
    };
    if !(lipschitz_iota > 0.0 && lipschitz_iota.is_finite()) {
        return Err(Error::parameter(
            "lipschitz_iota",
            format!("must be > 0, got {lipschitz_iota}"),
        ));
    }
    if !(dynamics_bound > 0.0 && dynamics_bound.is_finite()) {
        return Err(Error::parameter(
            "dynamics_bound",
            format!("must be > 0, got {dynamics_bound}"),
        ));
    }
    if !(*d > 0.0) {
        return Err(Error::parameter("d", format!("must be > 0, got {d}")));
    }
    Ok(sigma * d / (lipschitz_iota * dynamics_bound))
}

/// Largest error norm at which the residual can stay positive given
/// `h <= h_max`: `iota^{-1}(max allowance over h in [0, h_max])`.
pub fn error_radius_bound(law: &TriggerLaw, h_max: f64, samples: usize) -> Result<f64> {
    if matches!(law, TriggerLaw::Stabilization { .. }) {
        return Err(Error::parameter(
            "law",
            "error radius needs a safety trigger",
        ));
    }
    if !(h_max >= 0.0 && h_max.is_finite()) {
        return Err(Error::parameter(
            "h_max",
            format!("must be finite and >= 0, got {h_max}"),
        ));
    }
    let samples = samples.max(2);
    let peak = (0..samples)
        .map(|i| law.allowance(h_max * i as f64 / (samples - 1) as f64, 0.0))
        .fold(f64::NEG_INFINITY, f64::max);
    if peak <= 0.0 {
        return Ok(0.0);
    }
    law.error_gain().inverse(peak)
}

/// Superset certificate `h_b = h + b` with `alpha_b(r) = alpha(r - b) - alpha(-b)`
/// and strong margin increased by `d_b = -alpha(-b)`.
///
/// The dynamics bound is cleared since the safe set grows.
pub fn shift_certificate(cert: &BarrierCertificate, b: f64) -> Result<BarrierCertificate> {
    let (alpha_b, d_b) = shift_transform(&cert.alpha, b)?;
    let mut shifted = cert.clone().with_offset(cert.offset() + b);
    shifted.alpha = alpha_b;
    shifted.strong_margin = cert.strong_margin + d_b;
    shifted.dynamics_bound = None;
    Ok(shifted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{counterexample_system, scalar_stabilization_demo};

    fn strong_counterexample(b: f64, sigma: f64) -> (BarrierCertificate, TriggerLaw) {
        let (_, cert) = counterexample_system(1.2).unwrap();
        let shifted = shift_certificate(&cert, b).unwrap();
        let law = TriggerLaw::strong_issf(&shifted, None, sigma).unwrap();
        (shifted, law)
    }

    #[test]
    fn sigma_ranges_per_variant() {
        let (_, cert) = counterexample_system(1.2).unwrap();
        assert!(TriggerLaw::naive_safety(&cert, 1.5).is_ok());
        assert!(TriggerLaw::signed_naive_safety(&cert, 1.5).is_err());
        assert!(TriggerLaw::signed_naive_safety(&cert, 1.0).is_err());
        assert!(TriggerLaw::naive_safety(&cert, 0.0).is_err());
        // plain certificate has no strong margin
        assert!(TriggerLaw::strong_issf(&cert, None, 0.5).is_err());
        let shifted = shift_certificate(&cert, 0.1).unwrap();
        assert!(TriggerLaw::strong_issf(&shifted, None, 1.0).is_ok());
        assert!(TriggerLaw::strong_issf(&shifted, None, 1.01).is_err());
        let (_, lf) = scalar_stabilization_demo();
        assert!(TriggerLaw::stabilization(&lf, 1.0).is_err());
        assert!(TriggerLaw::stabilization(&lf, 0.5).is_ok());
    }

    #[test]
    fn strong_residual_positive_at_zero_error() {
        let (_, law) = strong_counterexample(0.1, 0.9);
        for h in [-0.05, 0.0, 0.3, 1.1] {
            let r = law.residual(h, 0.0, 0.0);
            assert!((r - 0.09).abs() < 1e-15);
        }
    }

    #[test]
    fn signed_naive_residual_example() {
        let (_, cert) = counterexample_system(1.2).unwrap();
        let law = TriggerLaw::signed_naive_safety(&cert, 0.5).unwrap();
        let r = law.residual(0.5, 0.0, 0.05);
        assert!((r - 0.0772).abs() < 1e-12);
        // sign of h does not matter
        assert!((law.residual(-0.5, 0.0, 0.05) - 0.0772).abs() < 1e-12);
    }

    #[test]
    fn naive_residual_negative_outside_safe_set() {
        let (_, cert) = counterexample_system(1.2).unwrap();
        let law = TriggerLaw::naive_safety(&cert, 0.5).unwrap();
        assert!(law.residual(-0.01, 0.0, 0.0) < 0.0);
    }

    #[test]
    fn strong_event_surface_is_a_sphere() {
        let (shifted, law) = strong_counterexample(0.1, 0.9);
        let radius = shifted.iota.inverse(0.9 * 0.1).unwrap();
        let e = [radius * 0.6, radius * 0.8];
        for h in [0.0, 0.5, 1.0] {
            assert!(trigger_residual(&law, &[0.0, 0.0], h, &e).abs() < 1e-15);
        }
    }

    #[test]
    fn stabilization_residual_uses_state_norm() {
        let (_, lf) = scalar_stabilization_demo();
        let law = TriggerLaw::stabilization(&lf, 0.5).unwrap();
        // 0.5 * 1/2 - 0.25^2/2
        assert!((trigger_residual(&law, &[1.0], 0.0, &[0.25]) - 0.21875).abs() < 1e-15);
    }

    #[test]
    fn miet_bound_examples() {
        let (shifted, _) = strong_counterexample(0.1, 0.9);
        let unit = TriggerLaw::StrongIssf {
            iota: shifted.iota.clone(),
            alpha: KFunction::identity(),
            beta: KFunction::identity(),
            sigma: 1.0,
            d: 1.0,
        };
        assert_eq!(miet_bound(&unit, 1.0, 1.0).unwrap(), 1.0);
        let TriggerLaw::StrongIssf {
            iota,
            alpha,
            beta,
            sigma,
            d,
        } = unit.clone()
        else {
            unreachable!()
        };
        let doubled = TriggerLaw::StrongIssf {
            iota,
            alpha,
            beta,
            sigma,
            d: 2.0 * d,
        };
        assert_eq!(miet_bound(&doubled, 1.0, 1.0).unwrap(), 2.0);
        assert_eq!(miet_bound(&unit, 1.0, 2.0).unwrap(), 0.5);

        let (_, law) = strong_counterexample(0.1, 0.9);
        let f = 1.25;
        let tau = miet_bound(&law, 3.456, f).unwrap();
        assert!((tau - 0.09 / (3.456 * f)).abs() < 1e-15);

        assert!(miet_bound(&unit, 0.0, 1.0).is_err());
        assert!(miet_bound(&unit, 1.0, -1.0).is_err());
        let (_, cert) = counterexample_system(1.2).unwrap();
        let naive = TriggerLaw::signed_naive_safety(&cert, 0.5).unwrap();
        assert!(miet_bound(&naive, 1.0, 1.0).is_err());
    }

    #[test]
    fn shift_certificate_examples() {
        let (_, cert) = counterexample_system(1.2).unwrap();
        let shifted = shift_certificate(&cert, 0.1).unwrap();
        assert_eq!(shifted.strong_margin, 0.1);
        assert!((shifted.h(&[0.0, 0.0]) - 1.1).abs() < 1e-15);
        assert!((shifted.h(&[0.5, 0.5]) - 0.6).abs() < 1e-15);
        assert_eq!(shifted.lipschitz_iota(), cert.lipschitz_iota());
        for r in [-1.0, 0.0, 0.25, 1.0] {
            assert!((shifted.alpha.value(r) - r).abs() < 1e-15);
        }

        let mut cubic = cert.clone();
        cubic.alpha = KFunction::power(1.0, 3.0).unwrap();
        let shifted = shift_certificate(&cubic, 0.5).unwrap();
        assert_eq!(shifted.strong_margin, 0.125);
        assert!((shifted.h(&[0.6, 0.0]) - (cubic.h(&[0.6, 0.0]) + 0.5)).abs() < 1e-15);

        assert!(shift_certificate(&cert, 0.0).is_err());
    }

    #[test]
    fn margin_vanishes_with_shift() {
        let (_, cert) = counterexample_system(1.2).unwrap();
        let mut last = f64::INFINITY;
        for b in [1e-1, 1e-2, 1e-3, 1e-4, 1e-6] {
            let shifted = shift_certificate(&cert, b).unwrap();
            let law = TriggerLaw::strong_issf(&shifted, None, 0.9).unwrap();
            let tau = miet_bound(&law, 3.456, 1.2).unwrap();
            assert!(tau < last);
            last = tau;
        }
        assert!(last < 1e-6);
    }

    #[test]
    fn beta_dominance_is_checked() {
        let (shifted, _) = strong_counterexample(0.1, 0.9);
        let ok =
            TriggerLaw::strong_issf(&shifted, Some(KFunction::linear(2.0).unwrap()), 0.9).unwrap();
        assert!(check_beta_dominates(&ok, 0.0, 1.1, 1000).is_ok());
        let bad =
            TriggerLaw::strong_issf(&shifted, Some(KFunction::linear(0.5).unwrap()), 0.9).unwrap();
        assert!(check_beta_dominates(&bad, 0.0, 1.1, 1000).is_err());
    }

    #[test]
    fn error_radius_from_allowance() {
        let (_, law) = strong_counterexample(0.1, 0.9);
        let radius = error_radius_bound(&law, 1.1, 1000).unwrap();
        assert!((radius - 0.09 / 3.456).abs() < 1e-15);
        let (_, cert) = counterexample_system(1.2).unwrap();
        let naive = TriggerLaw::signed_naive_safety(&cert, 0.5).unwrap();
        assert!((error_radius_bound(&naive, 1.0, 11).unwrap() - 0.5 / 3.456).abs() < 1e-15);
    }

    #[test]
    fn law_json_is_tagged() {
        let (_, law) = strong_counterexample(0.1, 0.9);
        let text = serde_json::to_string(&law).unwrap();
        assert!(text.contains(r#""variant":"strong_issf""#));
        let back: TriggerLaw = serde_json::from_str(&text).unwrap();
        assert_eq!(back, law);
    }
}
