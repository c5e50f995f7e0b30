//! Randomized cross-check of the adaptive integrator against the closed form.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use etsafe::ode::{integrate_adaptive, Tolerances};
use etsafe::oracle::{closed_form_step, error_norm_exact};
use etsafe::systems::{distance, norm, ControlSystem, Counterexample};

use crate::config::DEFAULT_R;

pub const SAMPLE_RADIUS: f64 = 1.2;
pub const REL_TOL: f64 = 1e-8;
pub const CONSISTENCY_TOL: f64 = 1e-10;

const INTEGRATOR_TOL: Tolerances = Tolerances {
    rel: 1e-12,
    abs: 1e-14,
};
const INTEGRATOR_MAX_STEP: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleTrial {
    pub index: usize,
    pub x_i: [f64; 2],
    pub dt: f64,
    /// `|x_num - x_exact| / |x_exact|` (absolute when `x_exact = 0`).
    pub rel_error: f64,
    /// `|error_norm_exact - |x_i - closed_form_step||`.
    pub consistency_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSummary {
    pub seed: u64,
    pub trials: usize,
    pub max_rel_error: f64,
    pub max_consistency_error: f64,
    pub failures: Vec<OracleTrial>,
}

impl OracleSummary {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Integrates the held counterexample dynamics from `x_i` for `dt` and
/// compares with the closed form.
pub fn check_trial(index: usize, x_i: [f64; 2], dt: f64) -> OracleTrial {
    let sys = Counterexample { r: DEFAULT_R };
    let mut u = [0.0];
    sys.controller(&x_i, &mut u);
    let exact = closed_form_step(x_i, dt);
    let numeric = if dt == 0.0 {
        x_i.to_vec()
    } else {
        integrate_adaptive(
            |x: &[f64], dx: &mut [f64]| sys.dynamics(x, &u, dx),
            &x_i,
            dt,
            INTEGRATOR_TOL,
            INTEGRATOR_MAX_STEP,
        )
        .unwrap_or_else(|_| vec![f64::NAN; 2])
    };
    let diff = distance(&numeric, &exact);
    let scale = norm(&exact);
    let rel_error = if scale == 0.0 { diff } else { diff / scale };
    let consistency_error = (error_norm_exact(x_i, dt) - distance(&x_i, &exact)).abs();
    OracleTrial {
        index,
        x_i,
        dt,
        rel_error,
        consistency_error,
        pass: rel_error <= REL_TOL && consistency_error <= CONSISTENCY_TOL,
    }
}

/// `x_i` uniform in the disk of radius [`SAMPLE_RADIUS`], `dt` uniform in `(0, 1]`.
pub fn validate_oracle(seed: u64, trials: usize) -> OracleSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut summary = OracleSummary {
        seed,
        trials,
        max_rel_error: 0.0,
        max_consistency_error: 0.0,
        failures: Vec::new(),
    };
    for index in 0..trials {
        let rho = SAMPLE_RADIUS * rng.gen::<f64>().sqrt();
        let phi = rng.gen_range(0.0..std::f64::consts::TAU);
        let dt = 1.0 - rng.gen::<f64>();
        let trial = check_trial(index, [rho * phi.cos(), rho * phi.sin()], dt);
        // NaN compares false, so fold it in explicitly
        summary.max_rel_error = nan_max(summary.max_rel_error, trial.rel_error);
        summary.max_consistency_error =
            nan_max(summary.max_consistency_error, trial.consistency_error);
        if !trial.pass {
            summary.failures.push(trial);
        }
    }
    summary
}

fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_duration_passes() {
        for x in [[0.0, 0.0], [1.2, 0.0], [-0.3, 0.9]] {
            let t = check_trial(0, x, 0.0);
            assert!(t.pass);
            assert_eq!(t.rel_error, 0.0);
            assert_eq!(t.consistency_error, 0.0);
        }
    }

    #[test]
    fn origin_is_fixed() {
        let t = check_trial(0, [0.0, 0.0], 1.0);
        assert_eq!(t.rel_error, 0.0);
        assert!(t.pass);
    }

    #[test]
    fn seeded_runs_are_bit_identical() {
        assert_eq!(validate_oracle(7, 50), validate_oracle(7, 50));
        assert_ne!(
            validate_oracle(7, 5).max_rel_error,
            validate_oracle(8, 5).max_rel_error
        );
    }

    #[test]
    fn small_batch_passes() {
        let s = validate_oracle(1, 100);
        assert!(s.passed(), "{:?}", s.failures.first());
        assert!(s.max_rel_error <= REL_TOL);
    }
}
