//! `ahflow sweep`: independent runs over a list of parameter values.

use std::path::PathBuf;

use rayon::prelude::*;

use crate::config::RunConfig;
use crate::io::num;
use crate::run::{create_dir, execute, write_text, RunError};
use crate::setup::SetupError;

/// Worker count: `AHFLOW_THREADS` when set to a positive integer, otherwise
/// the number of available cores.
pub fn thread_count() -> usize {
    std::env::var("AHFLOW_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    /// A solver verdict, `inadmissible`, or `error`.
    pub verdict: String,
    pub final_t: f64,
    pub final_sup_rm_plus_k: f64,
    pub max_sup_r2_lambda: f64,
    pub rm_rate_fit: f64,
    pub rm_fit_rms: f64,
    pub records: usize,
    /// Every record finite and record times strictly increasing.
    pub monitor_ok: bool,
    pub dir: PathBuf,
    pub message: String,
}

impl SweepRow {
    /// Whether the point ended in a state that exit code 0 covers.
    pub fn is_success(&self) -> bool {
        matches!(self.verdict.as_str(), "converged" | "reached_t_end")
    }

    fn failed(value: f64, verdict: &str, dir: PathBuf, message: String) -> Self {
        Self {
            value,
            verdict: verdict.to_string(),
            final_t: f64::NAN,
            final_sup_rm_plus_k: f64::NAN,
            max_sup_r2_lambda: f64::NAN,
            rm_rate_fit: f64::NAN,
            rm_fit_rms: f64::NAN,
            records: 0,
            monitor_ok: false,
            dir,
            message,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub summary: PathBuf,
}

fn run_point(base: &RunConfig, index: usize, value: f64) -> SweepRow {
    let mut cfg = base.clone();
    base.sweep.parameter.apply(&mut cfg.initial, value);
    cfg.output = base.output.join(format!("point_{index:03}"));
    let dir = cfg.output.clone();
    let outcome = match cfg.validate() {
        Err(e) => Err(("error", e.to_string())),
        Ok(()) => execute(&cfg).map_err(|e| {
            let kind = match e {
                RunError::Setup(SetupError::Inadmissible(_)) => "inadmissible",
                _ => "error",
            };
            (kind, e.to_string())
        }),
    };
    match outcome {
        Ok(o) => {
            let recs = &o.trajectory.records;
            let last = recs.last();
            let monitor_ok =
                recs.iter().all(|r| r.is_finite()) && recs.windows(2).all(|w| w[1].t > w[0].t);
            SweepRow {
                value,
                verdict: o.verdict().name().to_string(),
                final_t: o.trajectory.final_time(),
                final_sup_rm_plus_k: last.map_or(f64::NAN, |r| r.sup_rm_plus_k),
                max_sup_r2_lambda: recs
                    .iter()
                    .map(|r| r.sup_r2_lambda)
                    .fold(f64::NEG_INFINITY, f64::max),
                rm_rate_fit: o.fit.map_or(f64::NAN, |f| f.rate_fit),
                rm_fit_rms: o.fit.map_or(f64::NAN, |f| f.residual_rms),
                records: recs.len(),
                monitor_ok,
                dir,
                message: String::new(),
            }
        }
        Err((kind, msg)) => SweepRow::failed(value, kind, dir, msg),
    }
}

pub const SUMMARY_COLUMNS: [&str; 11] = [
    "parameter",
    "value",
    "verdict",
    "final_t",
    "final_sup_rm_plus_k",
    "max_sup_r2_lambda",
    "rm_rate_fit",
    "rm_fit_rms",
    "records",
    "monitor_ok",
    "message",
];

/// Run every point on a bounded pool; one point failing never stops the others.
pub fn execute_sweep(cfg: &RunConfig) -> Result<SweepOutcome, RunError> {
    create_dir(&cfg.output)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| crate::run::io_err(&cfg.output, e))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        cfg.sweep
            .values
            .par_iter()
            .enumerate()
            .map(|(i, &v)| run_point(cfg, i, v))
            .collect()
    });

    let summary = cfg.output.join("summary.csv");
    let mut w = csv::Writer::from_writer(Vec::new());
    let werr = |e: csv::Error| crate::run::io_err(&summary, e);
    w.write_record(SUMMARY_COLUMNS).map_err(werr)?;
    for r in &rows {
        w.write_record([
            cfg.sweep.parameter.name().to_string(),
            num(r.value),
            r.verdict.clone(),
            num(r.final_t),
            num(r.final_sup_rm_plus_k),
            num(r.max_sup_r2_lambda),
            num(r.rm_rate_fit),
            num(r.rm_fit_rms),
            r.records.to_string(),
            r.monitor_ok.to_string(),
            r.message.clone(),
        ])
        .map_err(werr)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| crate::run::io_err(&summary, e))?;
    write_text(&summary, &String::from_utf8_lossy(&bytes))?;
    write_text(&cfg.output.join("config.resolved"), &cfg.resolved())?;
    Ok(SweepOutcome { rows, summary })
}
