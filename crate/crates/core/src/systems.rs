//! Control systems, barrier certificates and ISS Lyapunov certificates.

use std::fmt;
use std::sync::Arc;

use crate::classk::KFunction;
use crate::error::{Error, Result};

/// Inflation applied to the sampled maximum in [`bound_dynamics`].
pub const DEFAULT_SAFETY_FACTOR: f64 = 1.1;

/// A control-affine or general system `x' = f(x, u)` with a state feedback `u = k(x)`.
pub trait ControlSystem: Send + Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn dynamics(&self, x: &[f64], u: &[f64], dx: &mut [f64]);
    fn controller(&self, x: &[f64], u: &mut [f64]);

    fn name(&self) -> &str {
        "user"
    }
}

/// A scalar function of the state with a gradient.
pub trait ScalarField: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;

    /// Central differences with step `1e-6 * (1 + |x|)` unless overridden.
    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        let step = 1e-6 * (1.0 + norm(x));
        let mut probe = x.to_vec();
        for i in 0..x.len() {
            probe[i] = x[i] + step;
            let up = self.value(&probe);
            probe[i] = x[i] - step;
            let down = self.value(&probe);
            probe[i] = x[i];
            grad[i] = (up - down) / (2.0 * step);
        }
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `|a - b|`
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Closed-loop vector field `f(x, k(x + e))` evaluated into `dx`.
pub fn perturbed_vector_field(sys: &dyn ControlSystem, x: &[f64], e: &[f64], dx: &mut [f64]) {
    let measured: Vec<f64> = x.iter().zip(e).map(|(a, b)| a + b).collect();
    let mut u = vec![0.0; sys.input_dim()];
    sys.controller(&measured, &mut u);
    sys.dynamics(x, &u, dx);
}

/// Rate of change of `field` along `f(x, k(x + e))`.
pub fn lie_rate(sys: &dyn ControlSystem, field: &dyn ScalarField, x: &[f64], e: &[f64]) -> f64 {
    let n = sys.state_dim();
    let mut dx = vec![0.0; n];
    let mut grad = vec![0.0; n];
    perturbed_vector_field(sys, x, e, &mut dx);
    field.gradient(x, &mut grad);
    dot(&grad, &dx)
}

/// Barrier function with the gains of an (optionally strong) ISSf certificate.
///
/// The barrier value is `h(x) + offset`; the offset is non-zero only after
/// [`crate::triggers::shift_certificate`].
#[derive(Clone)]
pub struct BarrierCertificate {
    barrier: Arc<dyn ScalarField>,
    offset: f64,
    pub alpha: KFunction,
    pub iota: KFunction,
    pub strong_margin: f64,
    pub dynamics_bound: Option<f64>,
}

impl fmt::Debug for BarrierCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BarrierCertificate")
            .field("offset", &self.offset)
            .field("alpha", &self.alpha)
            .field("iota", &self.iota)
            .field("strong_margin", &self.strong_margin)
            .field("dynamics_bound", &self.dynamics_bound)
            .finish()
    }
}

impl BarrierCertificate {
    /// `alpha` must be extended class K; `iota` must carry a Lipschitz constant.
    pub fn new(
        barrier: Arc<dyn ScalarField>,
        alpha: KFunction,
        iota: KFunction,
        strong_margin: f64,
    ) -> Result<Self> {
        if !alpha.is_extended() {
            return Err(Error::parameter("alpha", "must be extended class K"));
        }
        if iota.lipschitz().is_none() {
            return Err(Error::parameter("iota", "Lipschitz constant must be set"));
        }
        if !(strong_margin.is_finite() && strong_margin >= 0.0) {
            return Err(Error::parameter(
                "strong_margin",
                format!("must be >= 0, got {strong_margin}"),
            ));
        }
        Ok(BarrierCertificate {
            barrier,
            offset: 0.0,
            alpha,
            iota,
            strong_margin,
            dynamics_bound: None,
        })
    }

    pub fn h(&self, x: &[f64]) -> f64 {
        self.barrier.value(x) + self.offset
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub(crate) fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    pub fn lipschitz_iota(&self) -> f64 {
        self.iota.lipschitz().expect("checked at construction")
    }

    /// Errors unless `witness` lies in the safe set.
    pub fn check_nonempty(&self, witness: &[f64]) -> Result<()> {
        let h = self.h(witness);
        if h >= 0.0 {
            Ok(())
        } else {
            Err(Error::parameter(
                "witness",
                format!("h(witness) = {h} < 0; safe set not shown nonempty"),
            ))
        }
    }
}

impl ScalarField for BarrierCertificate {
    fn value(&self, x: &[f64]) -> f64 {
        self.h(x)
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        self.barrier.gradient(x, grad)
    }
}

/// ISS Lyapunov function with its comparison functions.
#[derive(Clone)]
pub struct IssLfCertificate {
    lyapunov: Arc<dyn ScalarField>,
    pub alpha1: KFunction,
    pub alpha2: KFunction,
    pub alpha3: KFunction,
    pub gamma: KFunction,
}

impl fmt::Debug for IssLfCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IssLfCertificate")
            .field("alpha1", &self.alpha1)
            .field("alpha2", &self.alpha2)
            .field("alpha3", &self.alpha3)
            .field("gamma", &self.gamma)
            .finish()
    }
}

impl IssLfCertificate {
    pub fn new(
        lyapunov: Arc<dyn ScalarField>,
        alpha1: KFunction,
        alpha2: KFunction,
        alpha3: KFunction,
        gamma: KFunction,
    ) -> Self {
        IssLfCertificate {
            lyapunov,
            alpha1,
            alpha2,
            alpha3,
            gamma,
        }
    }

    pub fn v(&self, x: &[f64]) -> f64 {
        self.lyapunov.value(x)
    }

    /// Sampled check of `V(0) = 0`, positivity and the sandwich bounds.
    pub fn check_on(&self, states: &[Vec<f64>]) -> Result<()> {
        let dim = states.first().map_or(0, Vec::len);
        let at_zero = self.v(&vec![0.0; dim]);
        if at_zero != 0.0 {
            return Err(Error::Evaluation(format!("V(0) = {at_zero}")));
        }
        for x in states {
            let r = norm(x);
            let v = self.v(x);
            if r > 0.0 && !(v > 0.0) {
                return Err(Error::Evaluation(format!("V({x:?}) = {v} not positive")));
            }
            let (lo, hi) = (self.alpha1.value(r), self.alpha2.value(r));
            let slack = 1e-12 * (1.0 + v.abs());
            if v < lo - slack || v > hi + slack {
                return Err(Error::Evaluation(format!(
                    "V({x:?}) = {v} outside [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

impl ScalarField for IssLfCertificate {
    fn value(&self, x: &[f64]) -> f64 {
        self.v(x)
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        self.lyapunov.gradient(x, grad)
    }
}

/// Residual of the (strong) ISSf barrier inequality at `(x, e)`:
/// `dh/dx f(x, k(x + e)) + alpha(h(x)) - d + iota(|e|)`. Nonnegative iff the
/// inequality holds.
pub fn certify_barrier_inequality(
    sys: &dyn ControlSystem,
    cert: &BarrierCertificate,
    x: &[f64],
    e: &[f64],
) -> f64 {
    lie_rate(sys, cert, x, e) + cert.alpha.value(cert.h(x)) - cert.strong_margin
        + cert.iota.value(norm(e))
}

/// Planar rotation with radial input from the safety counterexample:
/// `x1' = x2 + x1 u`, `x2' = -x1 + x2 u`, `k(x) = (1 - |x|^2) / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Counterexample {
    pub r: f64,
}

impl ControlSystem for Counterexample {
    fn state_dim(&self) -> usize {
        2
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn dynamics(&self, x: &[f64], u: &[f64], dx: &mut [f64]) {
        dx[0] = x[1] + x[0] * u[0];
        dx[1] = -x[0] + x[1] * u[0];
    }

    fn controller(&self, x: &[f64], u: &mut [f64]) {
        u[0] = 0.5 * (1.0 - x[0] * x[0] - x[1] * x[1]);
    }

    fn name(&self) -> &str {
        "counterexample"
    }
}

/// `h(x) = 1 - |x|^2`
#[derive(Debug, Clone, Copy)]
pub struct UnitDiskBarrier;

impl ScalarField for UnitDiskBarrier {
    fn value(&self, x: &[f64]) -> f64 {
        1.0 - x.iter().map(|a| a * a).sum::<f64>()
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        for (g, a) in grad.iter_mut().zip(x) {
            *g = -2.0 * a;
        }
    }
}

/// The counterexample system and its ISSf certificate for `|x| <= r`:
/// `alpha(s) = s`, `iota(s) = 2 r^3 s` with `L_iota = 2 r^3`, `d = 0`.
pub fn counterexample_system(r: f64) -> Result<(Counterexample, BarrierCertificate)> {
    if !(r.is_finite() && r > 1.0) {
        return Err(Error::parameter("r", format!("must be > 1, got {r}")));
    }
    let gain = 2.0 * r.powi(3);
    let iota = KFunction::linear(gain)?
        .nonnegative()
        .with_lipschitz(gain)?;
    let cert =
        BarrierCertificate::new(Arc::new(UnitDiskBarrier), KFunction::identity(), iota, 0.0)?;
    Ok((Counterexample { r }, cert))
}

/// `x' = u`, `k(x) = -x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarIntegrator;

impl ControlSystem for ScalarIntegrator {
    fn state_dim(&self) -> usize {
        1
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn dynamics(&self, _x: &[f64], u: &[f64], dx: &mut [f64]) {
        dx[0] = u[0];
    }

    fn controller(&self, x: &[f64], u: &mut [f64]) {
        u[0] = -x[0];
    }

    fn name(&self) -> &str {
        "scalar_stabilization"
    }
}

/// `V(x) = |x|^2 / 2`
#[derive(Debug, Clone, Copy)]
pub struct HalfSquaredNorm;

impl ScalarField for HalfSquaredNorm {
    fn value(&self, x: &[f64]) -> f64 {
        0.5 * x.iter().map(|a| a * a).sum::<f64>()
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        grad.copy_from_slice(x);
    }
}

/// Scalar stabilization demo with `V = x^2/2`. Young's inequality gives
/// `V' = -x^2 - x e <= -x^2/2 + e^2/2`, so `alpha3 = gamma = s^2/2`.
pub fn scalar_stabilization_demo() -> (ScalarIntegrator, IssLfCertificate) {
    let half_square = KFunction::power(0.5, 2.0)
        .expect("valid power law")
        .nonnegative();
    let cert = IssLfCertificate::new(
        Arc::new(HalfSquaredNorm),
        half_square.clone(),
        half_square.clone(),
        half_square.clone(),
        half_square,
    );
    (ScalarIntegrator, cert)
}

/// Sampled upper bound `F >= |f(x, k(x + e))|` over `|x| <= working_radius`,
/// `|e| <= error_radius`, inflated by [`DEFAULT_SAFETY_FACTOR`]. Also stores
/// the result in `cert.dynamics_bound`.
pub fn bound_dynamics(
    sys: &dyn ControlSystem,
    cert: &mut BarrierCertificate,
    working_radius: f64,
    error_radius: f64,
    grid: usize,
) -> Result<f64> {
    bound_dynamics_with(
        sys,
        cert,
        working_radius,
        error_radius,
        grid,
        DEFAULT_SAFETY_FACTOR,
    )
}

pub fn bound_dynamics_with(
    sys: &dyn ControlSystem,
    cert: &mut BarrierCertificate,
    working_radius: f64,
    error_radius: f64,
    grid: usize,
    safety_factor: f64,
) -> Result<f64> {
    let f = max_vector_field_norm(sys, working_radius, error_radius, grid)? * safety_factor;
    if !(f > 0.0) {
        return Err(Error::Evaluation(format!(
            "dynamics bound must be positive, sampled maximum gives {f}"
        )));
    }
    cert.dynamics_bound = Some(f);
    Ok(f)
}

/// Maximum of `|f(x, k(x + e))|` over a tensor grid of `grid` points per
/// axis on each ball, without inflation.
pub fn max_vector_field_norm(
    sys: &dyn ControlSystem,
    working_radius: f64,
    error_radius: f64,
    grid: usize,
) -> Result<f64> {
    if grid < 2 {
        return Err(Error::parameter("grid", "need at least 2 points per axis"));
    }
    if !(working_radius >= 0.0 && error_radius >= 0.0) {
        return Err(Error::parameter("radius", "radii must be >= 0"));
    }
    let n = sys.state_dim();
    let xs = ball_grid(n, working_radius, grid);
    let es = ball_grid(n, error_radius, grid);
    let mut dx = vec![0.0; n];
    let mut max = 0.0f64;
    for x in &xs {
        for e in &es {
            perturbed_vector_field(sys, x, e, &mut dx);
            let speed = norm(&dx);
            if !speed.is_finite() {
                return Err(Error::Evaluation(format!(
                    "non-finite dynamics at x = {x:?}, e = {e:?}"
                )));
            }
            max = max.max(speed);
        }
    }
    Ok(max)
}

/// Points of the uniform `grid^n` lattice on `[-radius, radius]^n` inside the ball.
pub fn ball_grid(n: usize, radius: f64, grid: usize) -> Vec<Vec<f64>> {
    if radius == 0.0 {
        return vec![vec![0.0; n]];
    }
    let axis: Vec<f64> = (0..grid)
        .map(|i| -radius + 2.0 * radius * i as f64 / (grid - 1) as f64)
        .collect();
    let mut out = Vec::new();
    let mut idx = vec![0usize; n];
    loop {
        let p: Vec<f64> = idx.iter().map(|&i| axis[i]).collect();
        if norm(&p) <= radius * (1.0 + 1e-12) {
            out.push(p);
        }
        let mut k = 0;
        loop {
            if k == n {
                return out;
            }
            idx[k] += 1;
            if idx[k] < grid {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}
