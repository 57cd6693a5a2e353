//! Initial profile from a run configuration.

use std::path::PathBuf;
use std::sync::Arc;

use ahflow_core::initial_data::{validate, CurveTable, Family, ValidationReport};
use ahflow_core::{CurvatureProfile, InitialDataError, InitialDataSpec, RadialGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{FamilyKind, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum SetupError {
    #[error("cannot read table {path}: {source}")]
    Table {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Spec(#[from] InitialDataError),
    #[error(
        "initial data is not admissible: sup r^2 lambda = {:.6}, parity defect {:.3e}, tail defect {:.3e}",
        .0.sup_r2_lambda, .0.parity_defect, .0.tail_defect
    )]
    Inadmissible(ValidationReport),
}

/// Smooth even perturbation `Σ u_k [g_k(r - c_k) + g_k(r + c_k)] / 2`,
/// with four bumps drawn from `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    bumps: Vec<(f64, f64, f64)>,
}

impl Perturbation {
    pub fn new(size: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bumps = (0..4)
            .map(|_| {
                let u = size * rng.gen_range(-1.0..=1.0);
                (u, rng.gen_range(0.0..3.0), rng.gen_range(0.5..1.5))
            })
            .collect();
        Self { bumps }
    }

    pub fn eval(&self, r: f64) -> f64 {
        if !r.is_finite() {
            return 0.0;
        }
        self.bumps
            .iter()
            .map(|&(u, c, s)| {
                let g = |v: f64| (-(v * v) / (s * s)).exp();
                0.5 * u * (g(r - c) + g(r + c))
            })
            .sum()
    }
}

pub fn initial_spec(cfg: &RunConfig) -> Result<InitialDataSpec, SetupError> {
    let i = &cfg.initial;
    let family = match i.family {
        FamilyKind::Hyperbolic => Family::Hyperbolic,
        FamilyKind::GaussianBump => Family::GaussianBump,
        FamilyKind::PolynomialBump => Family::PolynomialBump,
        FamilyKind::CustomTable => {
            let path = i.table.clone().expect("validated config names a table");
            let text = std::fs::read_to_string(&path)
                .map_err(|source| SetupError::Table { path, source })?;
            Family::CustomTable(CurveTable::parse_csv(&text)?)
        }
    };
    let spec = InitialDataSpec {
        family,
        amplitude: i.amplitude,
        center: i.center,
        width: i.width,
        dimension: cfg.dimension,
    };
    spec.check()?;
    Ok(spec)
}

/// Sample the configured family (plus any perturbation) and reject
/// inadmissible results.
pub fn build_initial(cfg: &RunConfig) -> Result<(CurvatureProfile, ValidationReport), SetupError> {
    let spec = initial_spec(cfg)?;
    let grid = Arc::new(RadialGrid::new(cfg.grid).map_err(InitialDataError::from)?);
    let noise = (cfg.initial.perturbation > 0.0)
        .then(|| Perturbation::new(cfg.initial.perturbation, cfg.seed));
    let profile = CurvatureProfile::from_fn(grid, cfg.dimension, |r| {
        spec.evaluate(r) + noise.as_ref().map_or(0.0, |p| p.eval(r))
    })
    .map_err(InitialDataError::from)?;
    let report = validate(&profile);
    if !report.admissible {
        return Err(SetupError::Inadmissible(report));
    }
    Ok((profile, report))
}
