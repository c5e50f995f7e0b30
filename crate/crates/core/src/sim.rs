//! Sample-and-hold closed-loop simulation with event localization.
//!
//! Between events the input is frozen at `u = k(x(t_i))` and the state
//! follows `x' = f(x, u)`. The measurement error `e(t) = x(t_i) - x(t)` is
//! always rebuilt from the stored sample, never integrated.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{hermite, step_factor, DormandPrince, Tolerances};
use crate::systems::{distance, norm, ControlSystem, ScalarField};
use crate::triggers::TriggerLaw;

/// Dense-output fractions checked for a residual sign change inside each
/// accepted step, in addition to the step end.
const CHECKPOINTS: [f64; 3] = [0.25, 0.5, 0.75];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub t_final: f64,
    /// Number of triggered events (the initial sample excluded) after which the run stops.
    pub max_events: usize,
    pub max_step: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Event localization tolerance in time; brackets are bisected to half this width.
    pub event_tol: f64,
    pub sample_stride: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            t_final: 10.0,
            max_events: 100_000,
            max_step: 0.05,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            event_tol: 1e-10,
            sample_stride: 0.01,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let checks: [(&'static str, f64); 6] = [
            ("t_final", self.t_final),
            ("max_step", self.max_step),
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("event_tol", self.event_tol),
            ("sample_stride", self.sample_stride),
        ];
        for (name, v) in checks {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::parameter(
                    name,
                    format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        if self.max_events == 0 {
            return Err(Error::parameter("max_events", "must be positive"));
        }
        if self.event_tol >= self.max_step {
            return Err(Error::parameter(
                "event_tol",
                "must be much smaller than max_step",
            ));
        }
        Ok(())
    }

    fn tolerances(&self) -> Tolerances {
        Tolerances {
            rel: self.rel_tol,
            abs: self.abs_tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    TimeLimit,
    EventLimit,
    TriggerInfeasible,
    IntegrationFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: Vec<f64>,
    /// Certificate value (barrier `h` or Lyapunov `V`).
    pub h: f64,
    pub err_norm: f64,
    pub residual: f64,
    /// Index of the hold interval (event) the sample belongs to.
    pub interval: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    /// `t_0, t_1, ...`, starting with the initial sample.
    pub event_times: Vec<f64>,
    pub event_states: Vec<Vec<f64>>,
    pub held_inputs: Vec<Vec<f64>>,
    pub event_h: Vec<f64>,
    pub samples: Vec<Sample>,
    /// `t_{i+1} - t_i`; the open interval after the last event is not included.
    pub interevent_times: Vec<f64>,
    pub termination: Termination,
    pub t_end: f64,
    pub failure: Option<String>,
}

impl EventLog {
    fn new() -> Self {
        EventLog {
            event_times: Vec::new(),
            event_states: Vec::new(),
            held_inputs: Vec::new(),
            event_h: Vec::new(),
            samples: Vec::new(),
            interevent_times: Vec::new(),
            termination: Termination::TimeLimit,
            t_end: 0.0,
            failure: None,
        }
    }

    /// Number of triggered events, not counting the initial sample.
    pub fn triggered_events(&self) -> usize {
        self.event_times.len().saturating_sub(1)
    }

    fn push_event(&mut self, t: f64, x: &[f64], u: &[f64], h: f64) {
        if let Some(&last) = self.event_times.last() {
            self.interevent_times.push(t - last);
        }
        self.event_times.push(t);
        self.event_states.push(x.to_vec());
        self.held_inputs.push(u.to_vec());
        self.event_h.push(h);
    }

    /// `index,t_i,dt_i,x0..,u0..,h` with `dt_i = t_i - t_{i-1}` (0 for the first row).
    pub fn write_events_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.event_states.first().map_or(0, Vec::len);
        let m = self.held_inputs.first().map_or(0, Vec::len);
        let mut header = vec!["index".to_string(), "t_i".into(), "dt_i".into()];
        header.extend((0..n).map(|i| format!("x{i}")));
        header.extend((0..m).map(|i| format!("u{i}")));
        header.push("h".into());
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.event_times.len() {
            let dt = if i == 0 {
                0.0
            } else {
                self.interevent_times[i - 1]
            };
            let mut row = vec![i.to_string(), fmt_float(self.event_times[i]), fmt_float(dt)];
            row.extend(self.event_states[i].iter().map(|&v| fmt_float(v)));
            row.extend(self.held_inputs[i].iter().map(|&v| fmt_float(v)));
            row.push(fmt_float(self.event_h[i]));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// `t,x0..,h,err_norm,residual`
    pub fn write_trace_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.samples.first().map_or(0, |s| s.x.len());
        let mut header = vec!["t".to_string()];
        header.extend((0..n).map(|i| format!("x{i}")));
        header.extend(["h".to_string(), "err_norm".into(), "residual".into()]);
        writeln!(w, "{}", header.join(","))?;
        for s in &self.samples {
            let mut row = vec![fmt_float(s.t)];
            row.extend(s.x.iter().map(|&v| fmt_float(v)));
            row.extend([fmt_float(s.h), fmt_float(s.err_norm), fmt_float(s.residual)]);
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Final bisection bracket around a residual zero crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventBracket {
    /// Last time known to have a positive residual.
    pub lo: f64,
    /// First time known to have a nonpositive residual.
    pub hi: f64,
}

/// Bisect `[t_lo, t_hi]` with `residual(t_lo) > 0 >= residual(t_hi)` down to
/// a bracket of width `<= event_tol`.
pub fn localize_event<R>(
    mut residual: R,
    t_lo: f64,
    t_hi: f64,
    event_tol: f64,
) -> Result<EventBracket>
where
    R: FnMut(f64) -> f64,
{
    let (r_lo, r_hi) = (residual(t_lo), residual(t_hi));
    if !(r_lo > 0.0 && r_hi <= 0.0) {
        return Err(Error::Evaluation(format!(
            "no sign change in [{t_lo}, {t_hi}]: residuals {r_lo}, {r_hi}"
        )));
    }
    let (mut lo, mut hi) = (t_lo, t_hi);
    while hi - lo > event_tol {
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
    Ok(EventBracket { lo, hi })
}

/// Current hold interval: the sampled state and the frozen input.
struct Hold<'a> {
    sys: &'a dyn ControlSystem,
    cert: &'a dyn ScalarField,
    law: &'a TriggerLaw,
    sample: Vec<f64>,
    u: Vec<f64>,
}

impl Hold<'_> {
    fn field(&self, x: &[f64], dx: &mut [f64]) {
        self.sys.dynamics(x, &self.u, dx)
    }

    fn residual(&self, x: &[f64]) -> f64 {
        self.law
            .residual(self.cert.value(x), norm(x), distance(&self.sample, x))
    }

    fn sample(&self, t: f64, x: Vec<f64>, interval: usize) -> Sample {
        let err_norm = distance(&self.sample, &x);
        let h = self.cert.value(&x);
        Sample {
            t,
            residual: self.law.residual(h, norm(&x), err_norm),
            h,
            err_norm,
            x,
            interval,
        }
    }
}

/// Simulate the event-triggered closed loop from `x0` until `cfg.t_final`,
/// `cfg.max_events`, an infeasible re-trigger or an integration failure.
pub fn simulate(
    sys: &dyn ControlSystem,
    cert: &dyn ScalarField,
    law: &TriggerLaw,
    x0: &[f64],
    cfg: &SimConfig,
) -> Result<EventLog> {
    cfg.validate()?;
    law.validate()?;
    let n = sys.state_dim();
    if x0.len() != n {
        return Err(Error::parameter(
            "x0",
            format!("expected {n} components, got {}", x0.len()),
        ));
    }
    if !x0.iter().all(|v| v.is_finite()) {
        return Err(Error::parameter("x0", "must be finite"));
    }

    let tol = cfg.tolerances();
    let mut log = EventLog::new();
    let mut dp = DormandPrince::new(n);
    let mut hold = Hold {
        sys,
        cert,
        law,
        sample: x0.to_vec(),
        u: vec![0.0; sys.input_dim()],
    };
    sys.controller(x0, &mut hold.u);

    let mut t = 0.0;
    let mut x = x0.to_vec();
    let mut dx = vec![0.0; n];
    hold.field(&x, &mut dx);
    log.push_event(t, &x, &hold.u, cert.value(&x));
    let first = hold.sample(t, x.clone(), 0);
    let feasible = first.residual > 0.0;
    log.samples.push(first);
    if !feasible {
        log.termination = Termination::TriggerInfeasible;
        return Ok(log);
    }

    let mut next_sample = 1u64;
    let mut h_step = cfg.max_step;
    let min_step = 1e-15 * cfg.t_final.max(1.0);

    loop {
        if t >= cfg.t_final {
            log.termination = Termination::TimeLimit;
            break;
        }
        let remaining = cfg.t_final - t;
        let size = h_step.min(cfg.max_step).min(remaining);
        let mut field = |y: &[f64], dy: &mut [f64]| hold.field(y, dy);
        let step = dp.step(&mut field, &x, &dx, size, tol);
        if !step.x.iter().all(|v| v.is_finite()) || !step.error.is_finite() {
            if size <= min_step {
                log.termination = Termination::IntegrationFailure;
                log.failure = Some(format!("non-finite state near t = {t}"));
                break;
            }
            h_step = 0.25 * size;
            continue;
        }
        if step.error > 1.0 {
            h_step = size * step_factor(step.error);
            if h_step <= min_step {
                log.termination = Termination::IntegrationFailure;
                log.failure = Some(format!("step size underflow at t = {t}"));
                break;
            }
            continue;
        }
        let t_next = if size == remaining {
            cfg.t_final
        } else {
            t + size
        };
        let interval = log.event_times.len() - 1;

        // Exact state at `t + s` for `0 <= s <= size` via a fresh substep.
        let mut substep = |s: f64| -> Vec<f64> {
            if s <= 0.0 {
                return x.clone();
            }
            if s >= size {
                return step.x.clone();
            }
            let mut field = |y: &[f64], dy: &mut [f64]| hold.field(y, dy);
            dp.step(&mut field, &x, &dx, s, tol).x
        };

        match find_crossing(&hold, &x, &dx, &step.x, &step.dx, t, size, &mut substep) {
            Some((lo, hi)) => {
                // half-width brackets keep event times from runs with different
                // step sequences within event_tol of each other
                let bracket = localize_event(
                    |s| hold.residual(&substep(s - t)),
                    lo,
                    hi,
                    0.5 * cfg.event_tol,
                )?;
                let last_event = *log.event_times.last().expect("initial sample present");
                let t_event = if bracket.lo > last_event {
                    bracket.lo
                } else {
                    bracket.hi
                };
                while (next_sample as f64) * cfg.sample_stride < t_event {
                    let ts = next_sample as f64 * cfg.sample_stride;
                    let xs = substep(ts - t);
                    log.samples.push(hold.sample(ts, xs, interval));
                    next_sample += 1;
                }
                let x_event = substep(t_event - t);

                hold.sample = x_event.clone();
                sys.controller(&x_event, &mut hold.u);
                t = t_event;
                x = x_event;
                hold.field(&x, &mut dx);
                log.push_event(t, &x, &hold.u, cert.value(&x));
                let at_event = hold.sample(t, x.clone(), interval + 1);
                let feasible = at_event.residual > 0.0;
                log.samples.push(at_event);
                if !feasible {
                    log.termination = Termination::TriggerInfeasible;
                    break;
                }
                if log.triggered_events() >= cfg.max_events {
                    log.termination = Termination::EventLimit;
                    break;
                }
            }
            None => {
                while (next_sample as f64) * cfg.sample_stride <= t_next {
                    let ts = next_sample as f64 * cfg.sample_stride;
                    let xs = substep(ts - t);
                    log.samples.push(hold.sample(ts, xs, interval));
                    next_sample += 1;
                }
                t = t_next;
                x = step.x;
                dx = step.dx;
                h_step = size * step_factor(step.error);
                if t >= cfg.t_final && log.samples.last().is_none_or(|s| s.t < t) {
                    log.samples.push(hold.sample(t, x.clone(), interval));
                }
            }
        }
    }
    log.t_end = t;
    Ok(log)
}

/// First bracket `[lo, hi]` inside an accepted step on which the residual
/// changes sign, scanning dense-output checkpoints then the step end.
#[allow(clippy::too_many_arguments)]
fn find_crossing<S>(
    hold: &Hold<'_>,
    x0: &[f64],
    dx0: &[f64],
    x1: &[f64],
    dx1: &[f64],
    t: f64,
    size: f64,
    substep: &mut S,
) -> Option<(f64, f64)>
where
    S: FnMut(f64) -> Vec<f64>,
{
    let mut prev = t;
    for theta in CHECKPOINTS {
        let tc = t + theta * size;
        let dense = hermite(x0, dx0, x1, dx1, size, theta);
        if hold.residual(&dense) > 0.0 {
            prev = tc;
            continue;
        }
        // confirm on the integrator itself
        if hold.residual(&substep(tc - t)) > 0.0 {
            prev = tc;
            continue;
        }
        return Some((lo_confirmed(hold, t, prev, substep), tc));
    }
    if hold.residual(x1) <= 0.0 {
        return Some((lo_confirmed(hold, t, prev, substep), t + size));
    }
    None
}

fn lo_confirmed<S>(hold: &Hold<'_>, t: f64, prev: f64, substep: &mut S) -> f64
where
    S: FnMut(f64) -> Vec<f64>,
{
    if prev > t && hold.residual(&substep(prev - t)) <= 0.0 {
        t
    } else {
        prev
    }
}
