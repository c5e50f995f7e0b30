//! Post-run metrics over an [`EventLog`].

use serde::Serialize;

use crate::sim::EventLog;
use crate::systems::{lie_rate, norm, ControlSystem, ScalarField};
use crate::triggers::TriggerLaw;

pub const DEFAULT_SAFETY_EPS: f64 = 1e-6;

/// Ratio of first-decile to last-decile median interevent time above which
/// shrinkage is flagged.
pub const SHRINKAGE_RATIO: f64 = 10.0;
pub const SHRINKAGE_MIN_INTERVALS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MietReport {
    pub min: Option<f64>,
    pub median: Option<f64>,
    pub max: Option<f64>,
    pub count: usize,
    pub tau: f64,
    pub pass: bool,
}

/// Interevent statistics and whether every gap is at least `tau - event_tol`.
pub fn miet_report(log: &EventLog, tau: f64, event_tol: f64) -> MietReport {
    let mut gaps = log.interevent_times.clone();
    gaps.sort_by(f64::total_cmp);
    let min = gaps.first().copied();
    MietReport {
        min,
        median: median_sorted(&gaps),
        max: gaps.last().copied(),
        count: gaps.len(),
        tau,
        pass: min.is_none_or(|m| m >= tau - event_tol),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SafetyReport {
    pub min_h: Option<f64>,
    pub pass: bool,
}

pub fn safety_report(log: &EventLog, eps: f64) -> SafetyReport {
    let min_h = log.samples.iter().map(|s| s.h).min_by(f64::total_cmp);
    SafetyReport {
        min_h,
        pass: min_h.is_none_or(|h| h >= -eps),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShrinkageReport {
    pub first_decile_median: Option<f64>,
    pub last_decile_median: Option<f64>,
    pub ratio: Option<f64>,
    pub flagged: bool,
    pub conclusive: bool,
}

/// Compares the median interevent time of the first and last deciles.
pub fn shrinkage_report(log: &EventLog) -> ShrinkageReport {
    let gaps = &log.interevent_times;
    if gaps.len() < SHRINKAGE_MIN_INTERVALS {
        return ShrinkageReport {
            first_decile_median: None,
            last_decile_median: None,
            ratio: None,
            flagged: false,
            conclusive: false,
        };
    }
    let decile = gaps.len() / 10;
    let sorted_median = |slice: &[f64]| {
        let mut v = slice.to_vec();
        v.sort_by(f64::total_cmp);
        median_sorted(&v).expect("nonempty decile")
    };
    let first = sorted_median(&gaps[..decile]);
    let last = sorted_median(&gaps[gaps.len() - decile..]);
    let ratio = first / last;
    ShrinkageReport {
        first_decile_median: Some(first),
        last_decile_median: Some(last),
        ratio: Some(ratio),
        flagged: ratio > SHRINKAGE_RATIO,
        conclusive: true,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificationReport {
    /// Minimum over samples of the slack in the inequality the law enforces.
    pub min_slack: Option<f64>,
    /// Time of the sample attaining `min_slack`.
    pub argmin_t: Option<f64>,
    /// Largest finite-difference mismatch divided by its tolerance.
    pub fd_worst_ratio: f64,
    pub fd_pass: bool,
    pub checked: usize,
}

/// Re-evaluates the rate of the certificate along the trace and reports the
/// smallest slack in the law-implied inequality:
///
/// * strong ISSf: `h' >= -beta(h) + (1 - sigma) d`
/// * naive: `h' >= -(1 + sigma) alpha(h)`
/// * signed naive: as naive for `h >= 0`, `h' >= -(1 - sigma) alpha(h)` for `h < 0`
/// * stabilization: `V' <= (sigma - 1) alpha3(|x|)`
///
/// The rate is cross-checked against finite differences of consecutive
/// samples in the same hold interval.
pub fn certify_trajectory(
    log: &EventLog,
    sys: &dyn ControlSystem,
    cert: &dyn ScalarField,
    law: &TriggerLaw,
) -> CertificationReport {
    let rates: Vec<f64> = log
        .samples
        .iter()
        .map(|s| {
            let held = &log.event_states[s.interval];
            let e: Vec<f64> = held.iter().zip(&s.x).map(|(a, b)| a - b).collect();
            lie_rate(sys, cert, &s.x, &e)
        })
        .collect();

    let mut min_slack: Option<(f64, f64)> = None;
    for (s, &rate) in log.samples.iter().zip(&rates) {
        let slack = law_slack(law, s.h, norm(&s.x), rate);
        if min_slack.is_none_or(|(m, _)| slack < m) {
            min_slack = Some((slack, s.t));
        }
    }

    let mut worst = 0.0f64;
    for (pair, r) in log.samples.windows(2).zip(rates.windows(2)) {
        let (a, b) = (&pair[0], &pair[1]);
        let dt = b.t - a.t;
        if a.interval != b.interval || dt < 1e-9 {
            continue;
        }
        let fd = (b.h - a.h) / dt;
        let trapezoid = 0.5 * (r[0] + r[1]);
        let tol = (1e-2 * trapezoid.abs()).max(1e-4);
        worst = worst.max((fd - trapezoid).abs() / tol);
    }

    CertificationReport {
        min_slack: min_slack.map(|(m, _)| m),
        argmin_t: min_slack.map(|(_, t)| t),
        fd_worst_ratio: worst,
        fd_pass: worst <= 1.0,
        checked: log.samples.len(),
    }
}

/// Slack of the inequality enforced by `law` at a point with certificate
/// value `h`, state norm `norm_x` and certificate rate `rate`.
pub fn law_slack(law: &TriggerLaw, h: f64, norm_x: f64, rate: f64) -> f64 {
    match law {
        TriggerLaw::StrongIssf { beta, sigma, d, .. } => rate + beta.value(h) - (1.0 - sigma) * d,
        TriggerLaw::NaiveSafety { alpha, sigma, .. } => rate + (1.0 + sigma) * alpha.value(h),
        TriggerLaw::SignedNaiveSafety { alpha, sigma, .. } => {
            if h >= 0.0 {
                rate + (1.0 + sigma) * alpha.value(h)
            } else {
                rate + (1.0 - sigma) * alpha.value(h)
            }
        }
        TriggerLaw::Stabilization { alpha3, sigma, .. } => {
            (sigma - 1.0) * alpha3.value(norm_x) - rate
        }
    }
}

fn median_sorted(v: &[f64]) -> Option<f64> {
    match v.len() {
        0 => None,
        n if n % 2 == 1 => Some(v[n / 2]),
        n => Some(0.5 * (v[n / 2 - 1] + v[n / 2])),
    }
}
