//! Building, running and reporting a single configured experiment.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use etsafe::analysis::{
    certify_trajectory, miet_report, safety_report, shrinkage_report, CertificationReport,
    SafetyReport, ShrinkageReport,
};
use etsafe::sim::{simulate, EventLog, Termination};
use etsafe::systems::{
    ball_grid, bound_dynamics_with, counterexample_system, scalar_stabilization_demo,
    BarrierCertificate, ControlSystem, ScalarField,
};
use etsafe::triggers::{
    check_beta_dominates, error_radius_bound, miet_bound, shift_certificate, TriggerLaw,
};

use crate::config::{
    BetaSpec, ConfigError, ExperimentConfig, LoadedConfig, SystemName, Variant, DEFAULT_R,
};
use crate::plot;
use crate::CliError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

/// A validated experiment ready to simulate.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub system: Box<dyn ControlSystem>,
    pub certificate: Box<dyn ScalarField>,
    pub law: TriggerLaw,
    pub bound: Option<MietBound>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MietBound {
    pub working_radius: f64,
    pub error_radius: f64,
    pub dynamics_bound: f64,
    pub lipschitz_iota: f64,
    pub d: f64,
    pub tau: f64,
}

impl Experiment {
    pub fn build(loaded: &LoadedConfig) -> Result<Self, ConfigError> {
        let cfg = &loaded.config;
        cfg.sim.validate().map_err(|e| {
            let key = match &e {
                etsafe::Error::Parameter { name, .. } => *name,
                _ => "sim",
            };
            loaded.error_at(key, e.to_string())
        })?;
        if !(cfg.assertions.safety_eps >= 0.0) {
            return Err(loaded.error_at("safety_eps", "safety_eps must be >= 0"));
        }

        let exp = match cfg.system.name {
            SystemName::Counterexample => build_counterexample(loaded)?,
            SystemName::ScalarStabilization => build_scalar(loaded)?,
        };
        exp.law
            .validate()
            .map_err(|e| loaded.error_at("sigma", e.to_string()))?;

        let n = exp.system.state_dim();
        if cfg.x0.len() != n {
            return Err(loaded.error_at(
                "x0",
                format!(
                    "x0 needs {n} components for {}, got {}",
                    exp.system.name(),
                    cfg.x0.len()
                ),
            ));
        }
        if !cfg.x0.iter().all(|v| v.is_finite()) {
            return Err(loaded.error_at("x0", "x0 must be finite"));
        }
        if cfg.assertions.miet.is_some() && exp.bound.is_none() {
            return Err(loaded.error_at(
                "miet",
                "miet assertion needs the strong_issf trigger, the only one with a guaranteed interevent time",
            ));
        }
        Ok(exp)
    }

    /// Runs the simulation and all analyses.
    pub fn run(&self) -> Result<RunResult, CliError> {
        let log = simulate(
            self.system.as_ref(),
            self.certificate.as_ref(),
            &self.law,
            &self.config.x0,
            &self.config.sim,
        )?;
        let report = self.report(&log);
        Ok(RunResult { log, report })
    }

    fn report(&self, log: &EventLog) -> RunReport {
        let cfg = &self.config;
        let tau = self.bound.as_ref().map(|b| b.tau);
        let miet = miet_report(log, tau.unwrap_or(0.0), cfg.sim.event_tol);
        let miet = MietSummary {
            min: miet.min,
            median: miet.median,
            max: miet.max,
            count: miet.count,
            tau,
            pass: tau.map(|_| miet.pass),
        };
        let is_barrier = !matches!(self.law, TriggerLaw::Stabilization { .. });
        let safety = is_barrier.then(|| safety_report(log, cfg.assertions.safety_eps));
        let shrinkage = shrinkage_report(log);
        let certification = certify_trajectory(
            log,
            self.system.as_ref(),
            self.certificate.as_ref(),
            &self.law,
        );

        let mut assertions = Vec::new();
        let mut check = |name: &'static str, expected: Option<bool>, actual: Option<bool>| {
            if let Some(expected) = expected {
                let actual = actual.unwrap_or(false);
                assertions.push(AssertionOutcome {
                    name,
                    expected,
                    actual,
                    pass: expected == actual,
                });
            }
        };
        check("miet", cfg.assertions.miet, miet.pass);
        check(
            "safety",
            cfg.assertions.safety,
            safety.as_ref().map(|s| s.pass),
        );
        check(
            "shrinkage",
            cfg.assertions.shrinkage,
            Some(shrinkage.flagged),
        );

        RunReport {
            system: self.system.name().to_string(),
            trigger: self.law.name().to_string(),
            sigma: self.law.sigma(),
            b: cfg.certificate.b,
            x0: cfg.x0.clone(),
            seed: cfg.seed,
            termination: log.termination,
            failure: log.failure.clone(),
            t_end: log.t_end,
            events: log.triggered_events(),
            bound: self.bound.clone(),
            miet,
            safety,
            shrinkage,
            certification,
            assertions,
        }
    }
}

fn build_counterexample(loaded: &LoadedConfig) -> Result<Experiment, ConfigError> {
    let cfg = &loaded.config;
    let r = cfg.system.params.r.unwrap_or(DEFAULT_R);
    let (sys, cert) = counterexample_system(r).map_err(|e| loaded.error_at("r", e.to_string()))?;
    let b = cfg.certificate.b;
    if !(b.is_finite() && b >= 0.0) {
        return Err(loaded.error_at("b", format!("b must be finite and >= 0, got {b}")));
    }
    let mut cert = if b > 0.0 {
        shift_certificate(&cert, b).map_err(|e| loaded.error_at("b", e.to_string()))?
    } else {
        cert
    };
    let sigma = cfg.trigger.sigma;
    let sigma_err = |e: etsafe::Error| loaded.error_at("sigma", e.to_string());
    let law = match cfg.trigger.variant {
        Variant::Stabilization => return Err(loaded.error_at(
            "variant",
            "the stabilization trigger needs an ISS Lyapunov system such as scalar_stabilization",
        )),
        Variant::NaiveSafety => TriggerLaw::naive_safety(&cert, sigma).map_err(sigma_err)?,
        Variant::SignedNaiveSafety => {
            TriggerLaw::signed_naive_safety(&cert, sigma).map_err(sigma_err)?
        }
        Variant::StrongIssf => {
            if !(cert.strong_margin > 0.0) {
                return Err(loaded.error_at(
                    "b",
                    "strong_issf needs a positive margin; set b > 0 to shift the barrier",
                ));
            }
            let beta = match &cfg.certificate.beta {
                BetaSpec::Alpha(_) => None,
                BetaSpec::Scaled { scale } => Some(
                    cert.alpha
                        .scaled(*scale)
                        .map_err(|e| loaded.error_at("scale", e.to_string()))?,
                ),
                BetaSpec::Function(f) => Some(f.clone()),
            };
            TriggerLaw::strong_issf(&cert, beta, sigma).map_err(|e| match &e {
                etsafe::Error::Parameter { name, .. } if *name != "sigma" => {
                    loaded.error_at("beta", e.to_string())
                }
                _ => sigma_err(e),
            })?
        }
    };
    if cfg.trigger.variant != Variant::StrongIssf && cfg.certificate.beta != BetaSpec::default() {
        return Err(loaded.error_at("beta", "beta only applies to the strong_issf trigger"));
    }
    let bound = match law {
        TriggerLaw::StrongIssf { .. } => Some(strong_bound(loaded, &sys, &mut cert, &law)?),
        _ => None,
    };
    Ok(Experiment {
        config: cfg.clone(),
        system: Box::new(sys),
        certificate: Box::new(cert),
        law,
        bound,
    })
}

/// `tau = sigma d / (L_iota F)` with `F` sampled over the working and error balls.
fn strong_bound(
    loaded: &LoadedConfig,
    sys: &dyn ControlSystem,
    cert: &mut BarrierCertificate,
    law: &TriggerLaw,
) -> Result<MietBound, ConfigError> {
    let spec = &loaded.config.bound;
    let bound_err = |e: etsafe::Error| loaded.error_at("bound", e.to_string());
    if spec.grid < 2 {
        return Err(loaded.error_at("grid", "grid needs at least 2 points per axis"));
    }
    // the unit-disk barrier shifted by b has superlevel set |x|^2 <= 1 + b
    let working_radius = spec
        .working_radius
        .unwrap_or_else(|| (1.0 + cert.offset()).sqrt());
    if !(working_radius.is_finite() && working_radius > 0.0) {
        return Err(loaded.error_at("working_radius", "working_radius must be > 0"));
    }
    let h_max = ball_grid(sys.state_dim(), working_radius, spec.grid)
        .iter()
        .map(|x| cert.h(x))
        .fold(f64::NEG_INFINITY, f64::max);
    // beta >= alpha is only needed where h_b >= 0; for h < 0 any c alpha with
    // c > 1 lies below alpha
    check_beta_dominates(law, 0.0, h_max.max(0.0), spec.samples)
        .map_err(|e| loaded.error_at("beta", e.to_string()))?;
    let error_radius = match spec.error_radius {
        Some(e) if e.is_finite() && e >= 0.0 => e,
        Some(_) => return Err(loaded.error_at("error_radius", "error_radius must be >= 0")),
        None => error_radius_bound(law, h_max.max(0.0), spec.samples).map_err(bound_err)?,
    };
    if !(spec.safety_factor >= 1.0) {
        return Err(loaded.error_at("safety_factor", "safety_factor must be >= 1"));
    }
    let dynamics_bound = bound_dynamics_with(
        sys,
        cert,
        working_radius,
        error_radius,
        spec.grid,
        spec.safety_factor,
    )
    .map_err(bound_err)?;
    let lipschitz_iota = cert.lipschitz_iota();
    let tau = miet_bound(law, lipschitz_iota, dynamics_bound).map_err(bound_err)?;
    Ok(MietBound {
        working_radius,
        error_radius,
        dynamics_bound,
        lipschitz_iota,
        d: cert.strong_margin,
        tau,
    })
}

fn build_scalar(loaded: &LoadedConfig) -> Result<Experiment, ConfigError> {
    let cfg = &loaded.config;
    if cfg.system.params.r.is_some() {
        return Err(loaded.error_at("r", "scalar_stabilization takes no parameters"));
    }
    if cfg.certificate.b != 0.0 || cfg.certificate.beta != BetaSpec::default() {
        return Err(loaded.error_at(
            "certificate",
            "scalar_stabilization uses a Lyapunov certificate; b and beta do not apply",
        ));
    }
    if cfg.trigger.variant != Variant::Stabilization {
        return Err(loaded.error_at(
            "variant",
            "scalar_stabilization only supports the stabilization trigger",
        ));
    }
    let (sys, cert) = scalar_stabilization_demo();
    let law = TriggerLaw::stabilization(&cert, cfg.trigger.sigma)
        .map_err(|e| loaded.error_at("sigma", e.to_string()))?;
    Ok(Experiment {
        config: cfg.clone(),
        system: Box::new(sys),
        certificate: Box::new(cert),
        law,
        bound: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MietSummary {
    pub min: Option<f64>,
    pub median: Option<f64>,
    pub max: Option<f64>,
    pub count: usize,
    /// Guaranteed interevent time; only the strong ISSf trigger has one.
    pub tau: Option<f64>,
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssertionOutcome {
    pub name: &'static str,
    pub expected: bool,
    pub actual: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub system: String,
    pub trigger: String,
    pub sigma: f64,
    pub b: f64,
    pub x0: Vec<f64>,
    pub seed: Option<u64>,
    pub termination: Termination,
    pub failure: Option<String>,
    pub t_end: f64,
    pub events: usize,
    pub bound: Option<MietBound>,
    pub miet: MietSummary,
    pub safety: Option<SafetyReport>,
    pub shrinkage: ShrinkageReport,
    pub certification: CertificationReport,
    pub assertions: Vec<AssertionOutcome>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        match self.termination {
            Termination::TriggerInfeasible => EXIT_INFEASIBLE,
            Termination::IntegrationFailure => EXIT_ASSERTION,
            _ if self.assertions.iter().all(|a| a.pass) => EXIT_OK,
            _ => EXIT_ASSERTION,
        }
    }
}

pub struct RunResult {
    pub log: EventLog,
    pub report: RunReport,
}

pub const EVENTS_CSV: &str = "events.csv";
pub const TRACE_CSV: &str = "trace.csv";
pub const REPORT_JSON: &str = "report.json";
pub const H_PLOT: &str = "h_vs_t.svg";
pub const INTEREVENT_PLOT: &str = "interevent_times.svg";
pub const PHASE_PLOT: &str = "phase_portrait.svg";

pub fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes the CSV logs, `report.json` and optionally the plots into `dir`.
pub fn write_artifacts(result: &RunResult, dir: &Path, plots: bool) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    let create = |name: &str| -> Result<(BufWriter<File>, PathBuf), CliError> {
        let path = dir.join(name);
        let file = File::create(&path).map_err(io_error(&path))?;
        Ok((BufWriter::new(file), path))
    };
    let (w, path) = create(EVENTS_CSV)?;
    result.log.write_events_csv(w).map_err(io_error(&path))?;
    let (w, path) = create(TRACE_CSV)?;
    result.log.write_trace_csv(w).map_err(io_error(&path))?;
    let path = dir.join(REPORT_JSON);
    let json = serde_json::to_string_pretty(&result.report).expect("report serializes");
    fs::write(&path, json + "\n").map_err(io_error(&path))?;
    if plots {
        let runs = [plot::Run {
            label: result.report.trigger.as_str(),
            log: &result.log,
        }];
        write_plots(dir, &runs)?;
    }
    Ok(())
}

pub fn write_plots(dir: &Path, runs: &[plot::Run<'_>]) -> Result<(), CliError> {
    for (name, svg) in [
        (H_PLOT, plot::certificate_vs_time(runs)),
        (INTEREVENT_PLOT, plot::interevent_times(runs)),
        (PHASE_PLOT, plot::phase_portrait(runs)),
    ] {
        let path = dir.join(name);
        fs::write(&path, svg).map_err(io_error(&path))?;
    }
    Ok(())
}
