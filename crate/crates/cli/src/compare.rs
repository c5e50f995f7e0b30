//! Side-by-side comparison of two runs on the same system and initial state.

use std::fs;
use std::path::Path;

use serde::Serialize;

use etsafe::analysis::miet_report;

use crate::config::LoadedConfig;
use crate::experiment::{io_error, write_artifacts, write_plots, Experiment, RunReport, RunResult};
use crate::{plot, CliError};

pub const COMPARE_JSON: &str = "compare.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub a: RunReport,
    pub b: RunReport,
    pub min_interevent: [Option<f64>; 2],
    /// Guaranteed interevent time taken from whichever run has one (`a` first).
    pub reference_tau: Option<f64>,
    /// Each run checked against `reference_tau`.
    pub miet_against_reference: [Option<bool>; 2],
    pub identical_interevent_times: bool,
}

/// Runs both configs, writes their artifacts under `out/a` and `out/b`, and
/// a joint report with overlaid plots under `out`.
pub fn compare(
    a: &LoadedConfig,
    b: &LoadedConfig,
    out: &Path,
    plots: bool,
) -> Result<CompareReport, CliError> {
    let (ca, cb) = (&a.config, &b.config);
    if ca.system != cb.system {
        let show = |s| serde_json::to_string(s).expect("system spec serializes");
        return Err(CliError::Mismatch(format!(
            "configs use different systems: {} vs {}",
            show(&ca.system),
            show(&cb.system)
        )));
    }
    if ca.x0 != cb.x0 {
        return Err(CliError::Mismatch(format!(
            "configs use different initial states: {:?} vs {:?}",
            ca.x0, cb.x0
        )));
    }
    let ea = Experiment::build(a)?;
    let eb = Experiment::build(b)?;
    let (ra, rb) = rayon::join(|| ea.run(), || eb.run());
    let (ra, rb) = (ra?, rb?);

    write_artifacts(&ra, &out.join("a"), plots)?;
    write_artifacts(&rb, &out.join("b"), plots)?;

    let report = joint_report(&ea, &ra, &eb, &rb);
    let path = out.join(COMPARE_JSON);
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    fs::write(&path, json + "\n").map_err(io_error(&path))?;
    if plots {
        let label_a = format!("a: {}", ra.report.trigger);
        let label_b = format!("b: {}", rb.report.trigger);
        let runs = [
            plot::Run {
                label: &label_a,
                log: &ra.log,
            },
            plot::Run {
                label: &label_b,
                log: &rb.log,
            },
        ];
        write_plots(out, &runs)?;
    }
    Ok(report)
}

fn joint_report(ea: &Experiment, ra: &RunResult, eb: &Experiment, rb: &RunResult) -> CompareReport {
    let reference_tau = ea.bound.as_ref().or(eb.bound.as_ref()).map(|b| b.tau);
    let against = |e: &Experiment, r: &RunResult| {
        reference_tau.map(|tau| miet_report(&r.log, tau, e.config.sim.event_tol).pass)
    };
    CompareReport {
        min_interevent: [ra.report.miet.min, rb.report.miet.min],
        reference_tau,
        miet_against_reference: [against(ea, ra), against(eb, rb)],
        identical_interevent_times: ra.log.interevent_times == rb.log.interevent_times,
        a: ra.report.clone(),
        b: rb.report.clone(),
    }
}
