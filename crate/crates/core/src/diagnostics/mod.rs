//! Scalar monitors, exponential fits and envelope checks over trajectories.

mod checks;
pub mod convergence;
mod residuals;

pub use checks::{
    check_kappa_decay, check_lambda_lower_envelope, check_lambda_upper_envelopes, check_rm_decay,
    envelope_report, BoundCheck, BoundCheckReport, CheckStatus, KappaDecayOptions, Slack,
};
pub use residuals::{
    kappa_evolution_residuals, residuals_around, CurvatureResiduals, ResidualWindow,
};

use crate::error::{DiagnosticsError, GeometryError};
use crate::evolution::FlowState;
use crate::geometry::{bianchi_residual, f_from_lambda, kappa_from_lambda, rm_plus_k_norm};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub sup_rm_plus_k: f64,
    pub min_lambda: f64,
    pub max_lambda: f64,
    pub min_kappa: f64,
    pub max_kappa: f64,
    pub sup_r2_lambda: f64,
    pub sup_kappa_minus_lambda_abs: f64,
    pub bianchi_residual_max: f64,
    pub dt: f64,
}

impl DiagnosticsRecord {
    pub fn is_finite(&self) -> bool {
        [
            self.t,
            self.sup_rm_plus_k,
            self.min_lambda,
            self.max_lambda,
            self.min_kappa,
            self.max_kappa,
            self.sup_r2_lambda,
            self.sup_kappa_minus_lambda_abs,
            self.bianchi_residual_max,
            self.dt,
        ]
        .iter()
        .all(|v| v.is_finite())
    }

    /// `sup |κ + 1|`, recovered from the κ extrema.
    pub fn sup_kappa_plus_one_abs(&self) -> f64 {
        (self.min_kappa + 1.0)
            .abs()
            .max((self.max_kappa + 1.0).abs())
    }
}

fn extrema(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

/// All monitors of one state, derived from its `λ` field.
pub fn record(state: &FlowState) -> Result<DiagnosticsRecord, GeometryError> {
    let p = &state.profile;
    let f = f_from_lambda(p)?;
    let kappa = kappa_from_lambda(p);
    let rm = rm_plus_k_norm(p);
    let bianchi = bianchi_residual(p.grid(), &f, p.dimension())?;
    let (min_lambda, max_lambda) = extrema(p.lambda());
    let (min_kappa, max_kappa) = extrema(&kappa);
    let sup_kml = kappa
        .iter()
        .zip(p.lambda())
        .map(|(k, l)| (k - l).abs())
        .fold(0.0, f64::max);
    Ok(DiagnosticsRecord {
        t: state.t,
        sup_rm_plus_k: rm.sup,
        min_lambda,
        max_lambda,
        min_kappa,
        max_kappa,
        sup_r2_lambda: p.sup_r2_lambda(),
        sup_kappa_minus_lambda_abs: sup_kml,
        bianchi_residual_max: bianchi.iter().map(|v| v.abs()).fold(0.0, f64::max),
        dt: state.dt_last,
    })
}

/// `y ≈ C e^{-rate t}` fitted on a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub c_fit: f64,
    pub rate_fit: f64,
    pub window: (f64, f64),
    pub residual_rms: f64,
    pub samples: usize,
}

pub const MIN_FIT_SAMPLES: usize = 10;

/// Least-squares line through `(t, ln y)` for samples with `t` in the closed
/// window. Residuals are in natural-log units.
pub fn fit_decay(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit, DiagnosticsError> {
    let (lo, hi) = window;
    if !(lo < hi) {
        return Err(DiagnosticsError::DegenerateFit(format!(
            "empty window [{lo}, {hi}]"
        )));
    }
    let pts: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|&(t, _)| t >= lo && t <= hi)
        .collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(DiagnosticsError::DegenerateFit(format!(
            "{} samples in [{lo}, {hi}], need {MIN_FIT_SAMPLES}",
            pts.len()
        )));
    }
    if let Some(&(t, y)) = pts.iter().find(|&&(_, y)| !(y > 0.0) || !y.is_finite()) {
        return Err(DiagnosticsError::DegenerateFit(format!(
            "non-positive value {y} at t = {t}"
        )));
    }
    let m = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let ym = pts.iter().map(|p| p.1.ln()).sum::<f64>() / m;
    let (mut stt, mut sty) = (0.0, 0.0);
    for &(t, y) in &pts {
        stt += (t - tm) * (t - tm);
        sty += (t - tm) * (y.ln() - ym);
    }
    if !(stt > 0.0) {
        return Err(DiagnosticsError::DegenerateFit(
            "all samples at one time".into(),
        ));
    }
    let slope = sty / stt;
    let intercept = ym - slope * tm;
    let ss = pts
        .iter()
        .map(|&(t, y)| {
            let e = y.ln() - (intercept + slope * t);
            e * e
        })
        .sum::<f64>();
    Ok(DecayFit {
        c_fit: intercept.exp(),
        rate_fit: -slope,
        window: (pts[0].0, pts[pts.len() - 1].0),
        residual_rms: (ss / m).sqrt(),
        samples: pts.len(),
    })
}

/// Window covering the last `fraction` of the time span of `series`.
pub fn tail_window(series: &[(f64, f64)], fraction: f64) -> (f64, f64) {
    match (series.first(), series.last()) {
        (Some(a), Some(b)) => (b.0 - fraction * (b.0 - a.0), b.0),
        _ => (0.0, 0.0),
    }
}

/// Monitors below this have reached the roundoff floor of the discrete
/// fixed point and carry no decay information.
pub const NOISE_FLOOR: f64 = 1e-10;

/// Prefix of `series` before its first sample at or below `floor`.
pub fn above_floor(series: &[(f64, f64)], floor: f64) -> &[(f64, f64)] {
    let end = series
        .iter()
        .position(|&(_, y)| y <= floor)
        .unwrap_or(series.len());
    &series[..end]
}

pub fn series(
    records: &[DiagnosticsRecord],
    field: impl Fn(&DiagnosticsRecord) -> f64,
) -> Vec<(f64, f64)> {
    records.iter().map(|r| (r.t, field(r))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CurvatureProfile;
    use crate::grid::RadialGrid;
    use std::sync::Arc;

    fn state(lam: impl Fn(f64) -> f64) -> FlowState {
        let g = Arc::new(RadialGrid::new(128).unwrap());
        FlowState::initial(CurvatureProfile::from_fn(g, 3, lam).unwrap())
    }

    #[test]
    fn hyperbolic_record() {
        let rec = record(&state(|_| -1.0)).unwrap();
        assert!(rec.sup_rm_plus_k <= 1e-13);
        assert_eq!((rec.min_lambda, rec.max_lambda), (-1.0, -1.0));
        assert!(rec.is_finite());
    }

    #[test]
    fn flat_record() {
        let rec = record(&state(|_| 0.0)).unwrap();
        assert!((rec.sup_rm_plus_k - 12f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn exact_exponential_fit() {
        let s: Vec<(f64, f64)> = (0..50)
            .map(|i| {
                let t = 0.1 * i as f64;
                (t, 5.0 * (-2.0 * t).exp())
            })
            .collect();
        let fit = fit_decay(&s, (0.0, 5.0)).unwrap();
        assert!((fit.c_fit - 5.0).abs() < 1e-10 * 5.0);
        assert!((fit.rate_fit - 2.0).abs() < 1e-10 * 2.0);
        assert!(fit.residual_rms < 1e-12);
    }

    #[test]
    fn constant_fit() {
        let s: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, 3.0)).collect();
        let fit = fit_decay(&s, (0.0, 19.0)).unwrap();
        assert!(fit.rate_fit.abs() < 1e-14);
        assert!((fit.c_fit - 3.0).abs() < 1e-13);
    }

    #[test]
    fn wobbly_exponential_fit() {
        let s: Vec<(f64, f64)> = (0..=200)
            .map(|i| {
                let t = 0.05 * i as f64;
                (t, 5.0 * (-2.0 * t).exp() * (1.0 + 0.01 * t.sin()))
            })
            .collect();
        let fit = fit_decay(&s, (0.0, 10.0)).unwrap();
        assert!((fit.rate_fit - 2.0).abs() <= 0.02, "{}", fit.rate_fit);
    }

    #[test]
    fn degenerate_fits() {
        let s: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 1.0)).collect();
        assert!(fit_decay(&s, (0.0, 10.0)).is_err());
        let mut s: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, 1.0)).collect();
        s[4].1 = 0.0;
        assert!(matches!(
            fit_decay(&s, (0.0, 20.0)),
            Err(DiagnosticsError::DegenerateFit(_))
        ));
    }
}
