//! Explicit Runge–Kutta integrators for autonomous systems `x' = g(x)`.
//!
//! The adaptive integrator is the Dormand–Prince 5(4) pair with local
//! extrapolation and a cubic Hermite interpolant over each accepted step.

use crate::error::{Error, Result};

// Dormand–Prince tableau (autonomous form, nodes omitted).
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order weights minus the embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

/// Result of a single Dormand–Prince step.
#[derive(Debug, Clone)]
pub struct Step {
    pub x: Vec<f64>,
    /// Derivative at the new point (first stage of the next step).
    pub dx: Vec<f64>,
    /// Scaled RMS error estimate; the step is acceptable when `<= 1`.
    pub error: f64,
}

/// Reusable stage storage for the Dormand–Prince pair.
#[derive(Debug, Clone)]
pub struct DormandPrince {
    k: [Vec<f64>; 6],
    tmp: Vec<f64>,
}

impl DormandPrince {
    pub fn new(dim: usize) -> Self {
        DormandPrince {
            k: std::array::from_fn(|_| vec![0.0; dim]),
            tmp: vec![0.0; dim],
        }
    }

    /// Advance `x` (with derivative `dx0 = g(x)`) by `h`.
    pub fn step<G>(&mut self, g: &mut G, x: &[f64], dx0: &[f64], h: f64, tol: Tolerances) -> Step
    where
        G: FnMut(&[f64], &mut [f64]),
    {
        let n = x.len();
        let [k2, k3, k4, k5, k6, k7] = &mut self.k;
        let tmp = &mut self.tmp;

        for i in 0..n {
            tmp[i] = x[i] + h * A21 * dx0[i];
        }
        g(tmp, k2);
        for i in 0..n {
            tmp[i] = x[i] + h * (A31 * dx0[i] + A32 * k2[i]);
        }
        g(tmp, k3);
        for i in 0..n {
            tmp[i] = x[i] + h * (A41 * dx0[i] + A42 * k2[i] + A43 * k3[i]);
        }
        g(tmp, k4);
        for i in 0..n {
            tmp[i] = x[i] + h * (A51 * dx0[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        g(tmp, k5);
        for i in 0..n {
            tmp[i] =
                x[i] + h * (A61 * dx0[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        g(tmp, k6);
        let mut x_new = vec![0.0; n];
        for i in 0..n {
            x_new[i] = x[i] + h * (B1 * dx0[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        g(&x_new, k7);

        let mut acc = 0.0;
        for i in 0..n {
            let err =
                h * (E1 * dx0[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = tol.abs + tol.rel * x[i].abs().max(x_new[i].abs());
            acc += (err / scale).powi(2);
        }
        let error = if n == 0 { 0.0 } else { (acc / n as f64).sqrt() };
        Step {
            x: x_new,
            dx: k7.clone(),
            error,
        }
    }
}

/// Step-size multiplier for the next attempt given a scaled error.
pub fn step_factor(error: f64) -> f64 {
    if error == 0.0 {
        MAX_FACTOR
    } else {
        (SAFETY * error.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
    }
}

/// Cubic Hermite interpolation over `[0, h]` at `theta in [0, 1]`.
pub fn hermite(x0: &[f64], dx0: &[f64], x1: &[f64], dx1: &[f64], h: f64, theta: f64) -> Vec<f64> {
    let t2 = theta * theta;
    let t3 = t2 * theta;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + theta;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    (0..x0.len())
        .map(|i| h00 * x0[i] + h10 * h * dx0[i] + h01 * x1[i] + h11 * h * dx1[i])
        .collect()
}

/// Adaptive integration over `[0, duration]`, landing exactly on `duration`.
pub fn integrate_adaptive<G>(
    mut g: G,
    x0: &[f64],
    duration: f64,
    tol: Tolerances,
    max_step: f64,
) -> Result<Vec<f64>>
where
    G: FnMut(&[f64], &mut [f64]),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut dx = vec![0.0; n];
    g(&x, &mut dx);
    let mut dp = DormandPrince::new(n);
    let mut t = 0.0;
    let mut h = max_step.min(duration);
    while t < duration {
        let remaining = duration - t;
        let last = h >= remaining;
        let size = if last { remaining } else { h };
        let step = dp.step(&mut g, &x, &dx, size, tol);
        if !step.x.iter().all(|v| v.is_finite()) {
            return Err(Error::Evaluation(format!("non-finite state at t = {t}")));
        }
        if step.error <= 1.0 {
            t = if last { duration } else { t + size };
            x = step.x;
            dx = step.dx;
        }
        h = (size * step_factor(step.error)).min(max_step);
        if h < 1e-14 * duration.max(1.0) {
            return Err(Error::Evaluation(format!("step size underflow at t = {t}")));
        }
    }
    Ok(x)
}

/// Classic fourth-order Runge–Kutta with `steps` equal steps over `[0, duration]`.
pub fn integrate_rk4<G>(mut g: G, x0: &[f64], duration: f64, steps: usize) -> Vec<f64>
where
    G: FnMut(&[f64], &mut [f64]),
{
    let n = x0.len();
    let h = duration / steps as f64;
    let mut x = x0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    for _ in 0..steps {
        g(&x, &mut k1);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        g(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        g(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = x[i] + h * k3[i];
        }
        g(&tmp, &mut k4);
        for i in 0..n {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    x
}
