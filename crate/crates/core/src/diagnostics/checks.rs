use std::fmt::Write as _;

use super::{
    above_floor, fit_decay, series, tail_window, DecayFit, DiagnosticsRecord, NOISE_FLOOR,
};
use crate::evolution::{FlowState, Trajectory, Verdict};
use crate::geometry::{kappa_from_lambda, CurvatureProfile};
use crate::initial_data::Regime;

/// Additive allowance `atol + ctol·Δx²` for discrete violations of exact bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slack {
    pub atol: f64,
    pub ctol: f64,
}

impl Default for Slack {
    fn default() -> Self {
        Self {
            atol: 1e-5,
            ctol: 10.0,
        }
    }
}

impl Slack {
    pub fn value(&self, dx: f64) -> f64 {
        self.atol + self.ctol * dx * dx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CheckStatus {
    Pass,
    Fail,
    NotApplicable,
}

impl CheckStatus {
    pub fn name(self) -> &'static str {
        match self {
            Self::Pass => "pass",
            Self::Fail => "fail",
            Self::NotApplicable => "n/a",
        }
    }
}

/// One verified inequality. `worst_margin` is (bound − monitor), so it is
/// negative where the monitor crosses the bound; the check holds when
/// `worst_margin ≥ -slack`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub name: String,
    pub status: CheckStatus,
    pub worst_margin: f64,
    pub worst_t: f64,
    pub worst_r: Option<f64>,
    pub slack: f64,
    pub note: String,
}

impl BoundCheck {
    pub fn holds(&self) -> bool {
        self.status != CheckStatus::Fail
    }

    pub fn not_applicable(name: &str, note: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            status: CheckStatus::NotApplicable,
            worst_margin: f64::NAN,
            worst_t: f64::NAN,
            worst_r: None,
            slack: 0.0,
            note: note.into(),
        }
    }

    pub fn with_status(
        name: &str,
        pass: bool,
        margin: f64,
        t: f64,
        note: impl Into<String>,
    ) -> Self {
        Self {
            name: name.to_string(),
            status: if pass {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            worst_margin: margin,
            worst_t: t,
            worst_r: None,
            slack: 0.0,
            note: note.into(),
        }
    }

    /// Worst of `margin(record)` over the trajectory; `locate` picks the
    /// offending radius in a snapshot taken at the worst time, if any.
    fn scan(
        name: &str,
        traj: &Trajectory,
        slack: f64,
        margin: impl Fn(&DiagnosticsRecord) -> f64,
        locate: impl Fn(&FlowState) -> f64,
    ) -> Self {
        let mut worst = (f64::INFINITY, f64::NAN);
        for rec in &traj.records {
            let m = margin(rec);
            // NaN margins count as the worst possible.
            let m = if m.is_nan() { f64::NEG_INFINITY } else { m };
            if m < worst.0 {
                worst = (m, rec.t);
            }
        }
        if traj.records.is_empty() {
            return Self::not_applicable(name, "no records");
        }
        let worst_r = traj
            .snapshots
            .iter()
            .find(|s| (s.t - worst.1).abs() <= 1e-9 * worst.1.abs().max(1.0))
            .map(locate);
        Self {
            name: name.to_string(),
            status: if worst.0 >= -slack {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            worst_margin: worst.0,
            worst_t: worst.1,
            worst_r,
            slack,
            note: String::new(),
        }
    }

    fn noted(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

fn arg_extreme(state: &FlowState, value: impl Fn(usize) -> f64) -> f64 {
    let r = state.profile.grid().r();
    let mut best = 0;
    for i in 1..r.len() {
        if value(i) > value(best) {
            best = i;
        }
    }
    r[best]
}

fn sup_lambda(p: &CurvatureProfile) -> f64 {
    p.lambda().iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn inf_lambda(p: &CurvatureProfile) -> f64 {
    p.lambda().iter().copied().fold(f64::INFINITY, f64::min)
}

/// `min λ(t) ≥ -1 + e^{-2(n-1)t} inf(λ₀ + 1)`.
pub fn check_lambda_lower_envelope(
    traj: &Trajectory,
    initial: &CurvatureProfile,
    slack: &Slack,
) -> BoundCheck {
    let k = 2.0 * (traj.dimension as f64 - 1.0);
    let c = inf_lambda(initial) + 1.0;
    BoundCheck::scan(
        "lambda_lower_envelope",
        traj,
        slack.value(traj.grid.spacing()),
        |rec| rec.min_lambda - (-1.0 + (-k * rec.t).exp() * c),
        |s| arg_extreme(s, |i| -s.profile.lambda()[i]),
    )
}

/// Upper bounds on `λ` selected by the regime of `λ₀`:
/// nonpositivity is preserved, `λ ≤ -1` is preserved, and for `λ₀ < 0`
/// `max λ(t) ≤ -1 + (1 - δ²) e^{-2(n-1)δ² t}` with `δ² = 0.99·(-max λ₀)`
/// (capped at 0.99).
pub fn check_lambda_upper_envelopes(
    traj: &Trajectory,
    initial: &CurvatureProfile,
    slack: &Slack,
) -> Vec<BoundCheck> {
    let s = slack.value(traj.grid.spacing());
    let sup0 = sup_lambda(initial);
    let regime = Regime::classify(sup0);
    let locate_max = |st: &FlowState| arg_extreme(st, |i| st.profile.lambda()[i]);
    let mut out = Vec::with_capacity(3);

    out.push(if regime.is_nonpositive() {
        BoundCheck::scan(
            "lambda_nonpositive",
            traj,
            s,
            |rec| -rec.max_lambda,
            locate_max,
        )
    } else {
        BoundCheck::not_applicable("lambda_nonpositive", format!("regime {regime}"))
    });

    out.push(if regime == Regime::StrictlyBelowMinusOne {
        BoundCheck::scan(
            "lambda_below_minus_one",
            traj,
            s,
            |rec| -1.0 - rec.max_lambda,
            locate_max,
        )
    } else {
        BoundCheck::not_applicable("lambda_below_minus_one", format!("regime {regime}"))
    });

    out.push(if regime.is_negative() {
        let delta2 = (0.99 * -sup0).min(0.99);
        let k = 2.0 * (traj.dimension as f64 - 1.0) * delta2;
        BoundCheck::scan(
            "lambda_upper_decay_envelope",
            traj,
            s,
            |rec| -1.0 + (1.0 - delta2) * (-k * rec.t).exp() - rec.max_lambda,
            locate_max,
        )
        .noted(format!("delta^2 = {delta2:.6}"))
    } else {
        BoundCheck::not_applicable("lambda_upper_decay_envelope", format!("regime {regime}"))
    });
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaDecayOptions {
    /// Fraction of the optimal rate `2(n-1)` demanded of `sup |κ - λ|`.
    pub b: f64,
    /// Window for the `sup |κ - λ|` rate fit.
    pub rate_window: (f64, f64),
    /// Trailing fraction of the run used for the `sup |κ + 1|` fit.
    pub tail_fraction: f64,
    pub max_fit_rms: f64,
    pub blowup_threshold: f64,
}

impl Default for KappaDecayOptions {
    fn default() -> Self {
        Self {
            b: 0.75,
            rate_window: (2.0, 10.0),
            tail_fraction: 0.5,
            max_fit_rms: 0.1,
            blowup_threshold: 1e6,
        }
    }
}

/// Values below this are treated as identically zero (a run started on the
/// fixed point).
const ZERO_SERIES: f64 = 1e-12;

/// Decay of the radial curvature, by regime of `λ₀`:
/// `λ₀ ≤ -1`: `sup|κ - λ|` under `e^{-2b(n-1)t} sup|κ₀ - λ₀|`, and its fitted
/// rate at least `2b(n-1)`; `λ₀ < 0`: `sup|κ + 1|` decays exponentially;
/// `λ₀ ≤ 0`: `sup|κ + 1|` stays finite and below the blowup threshold.
pub fn check_kappa_decay(
    traj: &Trajectory,
    initial: &CurvatureProfile,
    slack: &Slack,
    opts: &KappaDecayOptions,
) -> Vec<BoundCheck> {
    let regime = Regime::classify(sup_lambda(initial));
    let nf = traj.dimension as f64;
    let s = slack.value(traj.grid.spacing());
    let kappa0 = kappa_from_lambda(initial);
    let kml0 = kappa0
        .iter()
        .zip(initial.lambda())
        .map(|(k, l)| (k - l).abs())
        .fold(0.0, f64::max);
    let kp10 = kappa0.iter().map(|k| (k + 1.0).abs()).fold(0.0, f64::max);
    let locate_kml = |st: &FlowState| {
        let k = kappa_from_lambda(&st.profile);
        arg_extreme(st, |i| (k[i] - st.profile.lambda()[i]).abs())
    };
    let mut out = Vec::with_capacity(4);

    if regime == Regime::StrictlyBelowMinusOne {
        let rate = 2.0 * opts.b * (nf - 1.0);
        out.push(BoundCheck::scan(
            "kappa_minus_lambda_envelope",
            traj,
            s,
            |rec| (-rate * rec.t).exp() * kml0 - rec.sup_kappa_minus_lambda_abs,
            locate_kml,
        ));
        let name = "kappa_minus_lambda_rate";
        out.push(if kml0 <= ZERO_SERIES {
            BoundCheck::with_status(name, true, 0.0, 0.0, "identically zero at start")
        } else {
            let data = series(&traj.records, |r| r.sup_kappa_minus_lambda_abs);
            rate_check(
                name,
                above_floor(&data, NOISE_FLOOR),
                opts.rate_window,
                rate,
                None,
            )
        });
    } else {
        let note = format!("regime {regime}");
        out.push(BoundCheck::not_applicable(
            "kappa_minus_lambda_envelope",
            note.clone(),
        ));
        out.push(BoundCheck::not_applicable("kappa_minus_lambda_rate", note));
    }

    let name = "kappa_plus_one_decay";
    out.push(if !regime.is_negative() {
        BoundCheck::not_applicable(name, format!("regime {regime}"))
    } else if kp10 <= ZERO_SERIES {
        BoundCheck::with_status(name, true, 0.0, 0.0, "identically zero at start")
    } else if matches!(traj.verdict, Verdict::Blowup | Verdict::Neckpinch) {
        BoundCheck::with_status(
            name,
            false,
            f64::NAN,
            traj.final_time(),
            "run did not survive",
        )
    } else {
        let data = series(&traj.records, |r| r.sup_kappa_plus_one_abs());
        let data = above_floor(&data, NOISE_FLOOR);
        rate_check(
            name,
            data,
            tail_window(data, opts.tail_fraction),
            0.0,
            Some(opts.max_fit_rms),
        )
    });

    out.push(if regime.is_nonpositive() {
        let limit = opts.blowup_threshold;
        BoundCheck::scan(
            "kappa_bounded",
            traj,
            0.0,
            |rec| {
                let v = rec.sup_kappa_plus_one_abs();
                if v.is_finite() {
                    limit - v
                } else {
                    f64::NEG_INFINITY
                }
            },
            |st| {
                let k = kappa_from_lambda(&st.profile);
                arg_extreme(st, |i| (k[i] + 1.0).abs())
            },
        )
    } else {
        BoundCheck::not_applicable("kappa_bounded", format!("regime {regime}"))
    });
    out
}

/// Fit `data` on `window` and require `rate_fit > min_rate` (strictly when
/// `min_rate = 0`, otherwise `≥`), and optionally a bounded log residual.
fn rate_check(
    name: &str,
    data: &[(f64, f64)],
    window: (f64, f64),
    min_rate: f64,
    max_rms: Option<f64>,
) -> BoundCheck {
    match fit_decay(data, window) {
        Ok(fit) => {
            let rate_ok = if min_rate == 0.0 {
                fit.rate_fit > 0.0
            } else {
                fit.rate_fit >= min_rate
            };
            let rms_ok = max_rms.is_none_or(|m| fit.residual_rms < m);
            BoundCheck::with_status(
                name,
                rate_ok && rms_ok,
                fit.rate_fit - min_rate,
                fit.window.1,
                fit_note(&fit, min_rate),
            )
        }
        Err(e) => BoundCheck::with_status(name, false, f64::NAN, window.1, e.to_string()),
    }
}

fn fit_note(fit: &DecayFit, min_rate: f64) -> String {
    format!(
        "rate {:.4} (need > {min_rate}) on [{:.3}; {:.3}] rms {:.2e} C {:.3e}",
        fit.rate_fit, fit.window.0, fit.window.1, fit.residual_rms, fit.c_fit
    )
}

/// Exponential decay of `sup |Rm + K|` over the trailing half of the run.
///
/// Passes without a fit when the run starts on the fixed point; not applicable
/// after blowup or neckpinch, or when `λ₀` is not negative (the fit is still
/// returned there so the rate can be reported).
pub fn check_rm_decay(
    traj: &Trajectory,
    initial: &CurvatureProfile,
) -> (BoundCheck, Option<DecayFit>) {
    let name = "rm_decay";
    let (Some(first), Some(last)) = (traj.records.first(), traj.records.last()) else {
        return (BoundCheck::not_applicable(name, "no records"), None);
    };
    if matches!(
        traj.verdict,
        Verdict::Blowup | Verdict::Neckpinch | Verdict::StepUnderflow
    ) {
        return (
            BoundCheck::not_applicable(name, format!("verdict {}", traj.verdict)),
            None,
        );
    }
    if first.sup_rm_plus_k <= ZERO_SERIES {
        let c = BoundCheck::with_status(name, true, 0.0, first.t, "converged at start");
        return (c, None);
    }
    let data = series(&traj.records, |r| r.sup_rm_plus_k);
    let data = above_floor(&data, NOISE_FLOOR);
    let fit = fit_decay(data, tail_window(data, 0.5));
    let regime = Regime::classify(sup_lambda(initial));
    let check = match (&fit, regime.is_negative()) {
        (Ok(f), true) => {
            let pass = f.rate_fit > 0.0 && last.sup_rm_plus_k < first.sup_rm_plus_k;
            BoundCheck::with_status(name, pass, f.rate_fit, last.t, fit_note(f, 0.0))
        }
        (Err(e), true) => BoundCheck::with_status(name, false, f64::NAN, last.t, e.to_string()),
        (Ok(f), false) => {
            BoundCheck::not_applicable(name, format!("regime {regime}; {}", fit_note(f, 0.0)))
        }
        (Err(_), false) => BoundCheck::not_applicable(name, format!("regime {regime}")),
    };
    (check, fit.ok())
}

/// Every envelope and decay check that applies to `traj`, plus the
/// `sup |Rm + K|` fit when one was possible.
pub fn envelope_report(
    traj: &Trajectory,
    initial: &CurvatureProfile,
    slack: &Slack,
    opts: &KappaDecayOptions,
) -> (BoundCheckReport, Option<DecayFit>) {
    let mut report = BoundCheckReport::default();
    report.push(check_lambda_lower_envelope(traj, initial, slack));
    report.extend(check_lambda_upper_envelopes(traj, initial, slack));
    report.extend(check_kappa_decay(traj, initial, slack, opts));
    let (rm, fit) = check_rm_decay(traj, initial);
    report.push(rm);
    (report, fit)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundCheckReport {
    pub entries: Vec<BoundCheck>,
}

impl BoundCheckReport {
    pub fn push(&mut self, check: BoundCheck) {
        self.entries.push(check);
    }

    pub fn extend(&mut self, checks: impl IntoIterator<Item = BoundCheck>) {
        self.entries.extend(checks);
    }

    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(BoundCheck::holds)
    }

    pub fn get(&self, name: &str) -> Option<&BoundCheck> {
        self.entries.iter().find(|c| c.name == name)
    }

    /// One line per check: name, status, worst margin, its time and radius.
    pub fn to_text(&self) -> String {
        let width = self.entries.iter().map(|c| c.name.len()).max().unwrap_or(0);
        let mut s = String::new();
        for c in &self.entries {
            let r = c
                .worst_r
                .map_or_else(|| "-".to_string(), |r| format!("{r:.4}"));
            let _ = write!(
                s,
                "{:<width$}  {:<4}  margin={:+.3e}  t={:.4}  r={}  slack={:.2e}",
                c.name,
                c.status.name(),
                c.worst_margin,
                c.worst_t,
                r,
                c.slack,
            );
            if !c.note.is_empty() {
                let _ = write!(s, "  {}", c.note);
            }
            s.push('\n');
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("name,status,holds,worst_margin,worst_t,worst_r,slack,note\n");
        for c in &self.entries {
            let r = c.worst_r.map_or_else(String::new, |r| format!("{r:e}"));
            let _ = writeln!(
                s,
                "{},{},{},{:e},{:e},{},{:e},\"{}\"",
                c.name,
                c.status.name(),
                c.holds(),
                c.worst_margin,
                c.worst_t,
                r,
                c.slack,
                c.note.replace('"', "'"),
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RadialGrid;
    use std::sync::Arc;

    fn rec(t: f64, min_l: f64, max_l: f64) -> DiagnosticsRecord {
        DiagnosticsRecord {
            t,
            sup_rm_plus_k: 0.0,
            min_lambda: min_l,
            max_lambda: max_l,
            min_kappa: -1.0,
            max_kappa: -1.0,
            sup_r2_lambda: 0.0,
            sup_kappa_minus_lambda_abs: 0.0,
            bianchi_residual_max: 0.0,
            dt: 0.01,
        }
    }

    fn synthetic(records: Vec<DiagnosticsRecord>) -> Trajectory {
        Trajectory {
            records,
            snapshots: Vec::new(),
            verdict: Verdict::ReachedTEnd,
            grid: Arc::new(RadialGrid::new(64).unwrap()),
            dimension: 3,
        }
    }

    fn initial(lam: impl Fn(f64) -> f64) -> CurvatureProfile {
        CurvatureProfile::from_fn(Arc::new(RadialGrid::new(64).unwrap()), 3, lam).unwrap()
    }

    #[test]
    fn lower_envelope_catches_a_dip() {
        let init = initial(|r| -1.0 - 0.5 * (-r * r).exp());
        let env = |t: f64| -1.0 - 0.5 * (-4.0 * t).exp();
        let recs = (0..20)
            .map(|i| {
                let t = 0.1 * i as f64;
                let dip = if i == 7 { 0.1 } else { 0.0 };
                rec(t, env(t) - dip, -1.0)
            })
            .collect();
        let c = check_lambda_lower_envelope(&synthetic(recs), &init, &Slack::default());
        assert_eq!(c.status, CheckStatus::Fail);
        assert!((c.worst_margin + 0.1).abs() < 1e-12);
        assert!((c.worst_t - 0.7).abs() < 1e-12);
    }

    #[test]
    fn positive_max_fails_nonpositive_regime() {
        let init = initial(|r| -(-r * r).exp() * 1.0);
        let recs = vec![rec(0.0, -1.0, 0.0), rec(0.1, -1.0, 0.2)];
        let checks = check_lambda_upper_envelopes(&synthetic(recs), &init, &Slack::default());
        assert_eq!(checks[0].name, "lambda_nonpositive");
        assert_eq!(checks[0].status, CheckStatus::Fail);
        assert_eq!(checks[1].status, CheckStatus::NotApplicable);
    }

    #[test]
    fn slow_kappa_minus_lambda_decay_fails() {
        let init = initial(|r| -1.0 - 0.5 * (-r * r).exp());
        let recs = (0..=100)
            .map(|i| {
                let t = 0.1 * i as f64;
                let mut r = rec(t, -1.5, -1.0);
                r.sup_kappa_minus_lambda_abs = 0.3 * (-t).exp();
                r
            })
            .collect();
        let checks = check_kappa_decay(
            &synthetic(recs),
            &init,
            &Slack::default(),
            &KappaDecayOptions::default(),
        );
        let rate = checks
            .iter()
            .find(|c| c.name == "kappa_minus_lambda_rate")
            .unwrap();
        assert_eq!(rate.status, CheckStatus::Fail);
        assert!((rate.worst_margin + 2.0).abs() < 1e-9);
    }

    #[test]
    fn report_formats() {
        let mut rep = BoundCheckReport::default();
        rep.push(BoundCheck::with_status("a", true, 1.0, 0.5, ""));
        rep.push(BoundCheck::not_applicable("b", "too coarse"));
        assert!(rep.all_pass());
        assert_eq!(rep.to_text().lines().count(), 2);
        assert!(rep.to_csv().starts_with("name,status,holds"));
        rep.push(BoundCheck::with_status("c", false, -1.0, 0.5, ""));
        assert!(!rep.all_pass());
    }
}
