//! `ahflow run`: one evolution, persisted with its envelope report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ahflow_core::diagnostics::{envelope_report, BoundCheckReport, DecayFit};
use ahflow_core::initial_data::ValidationReport;
use ahflow_core::{run, EvolutionError, Trajectory, Verdict};

use crate::config::RunConfig;
use crate::io::{write_records, write_snapshots};
use crate::plot::{plot_bundle, PlotError};
use crate::setup::{build_initial, SetupError};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Setup(#[from] SetupError),
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error("writing {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error(transparent)]
    Plot(#[from] PlotError),
}

pub(crate) fn io_err(path: &Path, e: impl std::fmt::Display) -> RunError {
    RunError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), RunError> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub(crate) fn create_dir(dir: &Path) -> Result<(), RunError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

/// Paths written for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputBundle {
    pub dir: PathBuf,
    pub records: PathBuf,
    pub snapshots: PathBuf,
    pub report_text: PathBuf,
    pub report_csv: PathBuf,
    pub config: PathBuf,
    pub plots: Vec<PathBuf>,
}

impl OutputBundle {
    pub fn files(&self) -> Vec<&Path> {
        let mut v: Vec<&Path> = vec![
            &self.records,
            &self.snapshots,
            &self.report_text,
            &self.report_csv,
            &self.config,
        ];
        v.extend(self.plots.iter().map(PathBuf::as_path));
        v
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub bundle: OutputBundle,
    pub trajectory: Trajectory,
    pub validation: ValidationReport,
    pub report: BoundCheckReport,
    pub fit: Option<DecayFit>,
}

impl RunOutcome {
    pub fn verdict(&self) -> Verdict {
        self.trajectory.verdict
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let last = self.trajectory.records.last();
        let _ = writeln!(s, "# verdict {}", self.verdict());
        let _ = writeln!(s, "# regime {}", self.validation.regime);
        let _ = writeln!(s, "# final_t {}", self.trajectory.final_time());
        if let Some(r) = last {
            let _ = writeln!(s, "# final_sup_rm_plus_k {:e}", r.sup_rm_plus_k);
        }
        if let Some(f) = &self.fit {
            let _ = writeln!(
                s,
                "# rm_fit rate {:.6} C {:.6e} rms {:.3e} window [{}, {}]",
                f.rate_fit, f.c_fit, f.residual_rms, f.window.0, f.window.1
            );
        }
        s
    }
}

/// Build, evolve, check and persist into `cfg.output`.
pub fn execute(cfg: &RunConfig) -> Result<RunOutcome, RunError> {
    let out = cfg.output.as_path();
    let (profile, validation) = build_initial(cfg)?;
    let trajectory = run(&profile, &cfg.solver)?;
    let (report, fit) = envelope_report(&trajectory, &profile, &cfg.slack, &cfg.kappa_options());

    create_dir(out)?;
    let bundle = OutputBundle {
        dir: out.to_path_buf(),
        records: out.join("records.csv"),
        snapshots: out.join("snapshots.csv"),
        report_text: out.join("report.txt"),
        report_csv: out.join("report.csv"),
        config: out.join("config.resolved"),
        plots: Vec::new(),
    };
    write_records(&bundle.records, &trajectory.records).map_err(|e| io_err(&bundle.records, e))?;
    write_snapshots(&bundle.snapshots, &trajectory.snapshots)
        .map_err(|e| io_err(&bundle.snapshots, e))?;
    write_text(&bundle.config, &cfg.resolved())?;
    let mut outcome = RunOutcome {
        bundle,
        trajectory,
        validation,
        report,
        fit,
    };
    let text = format!("{}{}", outcome.summary(), outcome.report.to_text());
    write_text(&outcome.bundle.report_text, &text)?;
    write_text(&outcome.bundle.report_csv, &outcome.report.to_csv())?;
    outcome.bundle.plots = plot_bundle(out)?;
    Ok(outcome)
}
