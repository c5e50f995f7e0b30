//! Closed-form solution of the counterexample between events.
//!
//! With the input frozen at `u_i = k(x_i) = h(x_i)/2` the held dynamics are
//! linear, `x' = [[u_i, 1], [-1, u_i]] x`, and
//! `x(t_i + s) = exp(h_i s / 2) R(s) x_i` where `R(s)` rotates clockwise by `s`.
//! Nothing here touches the numerical integrator.

use crate::triggers::TriggerLaw;

/// Search horizon for [`exact_event_time`].
pub const EVENT_HORIZON: f64 = 1e3;

/// Root-finding accuracy of [`exact_event_time`].
pub const EVENT_ROOT_TOL: f64 = 1e-12;

const SCAN_START: f64 = 1e-9;
const SCAN_MAX: f64 = 1e-3;

/// Held-input solution from a sample `x_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoldSolution {
    pub x_i: [f64; 2],
    pub h_i: f64,
}

impl HoldSolution {
    pub fn new(x_i: [f64; 2]) -> Self {
        HoldSolution {
            x_i,
            h_i: 1.0 - x_i[0] * x_i[0] - x_i[1] * x_i[1],
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.x_i[0] * self.x_i[0] + self.x_i[1] * self.x_i[1]
    }

    pub fn state(&self, dt: f64) -> [f64; 2] {
        let scale = (0.5 * self.h_i * dt).exp();
        let (s, c) = dt.sin_cos();
        let [a, b] = self.x_i;
        [scale * (c * a + s * b), scale * (-s * a + c * b)]
    }

    /// `|x_i - x(t_i + dt)| = sqrt(exp(omega) - 2 exp(omega/2) cos(dt) + 1) |x_i|`
    /// with `omega = h_i dt`, evaluated as
    /// `expm1(omega/2)^2 + 4 exp(omega/2) sin^2(dt/2)` to avoid cancellation.
    pub fn error_norm(&self, dt: f64) -> f64 {
        if self.norm_sq() == 0.0 {
            return 0.0;
        }
        let omega = self.h_i * dt;
        let half_sin = (0.5 * dt).sin();
        let inner =
            (0.5 * omega).exp_m1().powi(2) + 4.0 * (0.5 * omega).exp() * half_sin * half_sin;
        inner.sqrt() * self.norm_sq().sqrt()
    }

    /// `|exp(omega/2) - 1| |x_i|`, a lower bound on [`Self::error_norm`].
    pub fn error_lower_bound(&self, dt: f64) -> f64 {
        ((0.5 * self.h_i * dt).exp() - 1.0).abs() * self.norm_sq().sqrt()
    }

    /// `h(x(t_i + dt)) = 1 - exp(h_i dt) |x_i|^2`
    pub fn h(&self, dt: f64) -> f64 {
        if self.norm_sq() == 0.0 {
            return 1.0;
        }
        1.0 - (self.h_i * dt).exp() * self.norm_sq()
    }
}

pub fn closed_form_step(x_i: [f64; 2], dt: f64) -> [f64; 2] {
    HoldSolution::new(x_i).state(dt)
}

pub fn error_norm_exact(x_i: [f64; 2], dt: f64) -> f64 {
    HoldSolution::new(x_i).error_norm(dt)
}

/// First `dt > 0` at which `law` fires along the closed form, for the
/// counterexample barrier shifted by `b` (`b = 0` for the original `h`).
/// `None` if no crossing occurs before [`EVENT_HORIZON`].
pub fn exact_event_time(x_i: [f64; 2], law: &TriggerLaw, b: f64) -> Option<f64> {
    let sol = HoldSolution::new(x_i);
    let residual = |dt: f64| {
        let h = sol.h(dt) + b;
        let norm_x = if sol.norm_sq() == 0.0 {
            0.0
        } else {
            (0.5 * sol.h_i * dt).exp() * sol.norm_sq().sqrt()
        };
        law.residual(h, norm_x, sol.error_norm(dt))
    };
    if !(residual(0.0) > 0.0) {
        return Some(0.0);
    }
    let mut lo = 0.0;
    let mut delta = SCAN_START;
    loop {
        let hi = lo + delta;
        if hi > EVENT_HORIZON {
            return None;
        }
        if !(residual(hi) > 0.0) {
            return Some(bisect(residual, lo, hi));
        }
        lo = hi;
        delta = (2.0 * delta).min(SCAN_MAX);
    }
}

fn bisect<R: Fn(f64) -> f64>(residual: R, mut lo: f64, mut hi: f64) -> f64 {
    while hi - lo > EVENT_ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if residual(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
