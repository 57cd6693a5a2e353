//! Acceptance criteria, one line each. Runs sequentially so that wall-clock
//! limits are measured without competing test threads.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use ahflow::config::RunConfig;
use ahflow::sweep::execute_sweep;
use ahflow::verify::{cross_solver_gap, execute_verify, identity_errors, random_profile};
use ahflow_core::diagnostics::convergence::{
    residual_order_in_space, residual_order_in_time, spatial_order, temporal_order,
};
use ahflow_core::diagnostics::{DiagnosticsRecord, ResidualWindow, Slack};
use ahflow_core::initial_data::build_profile;
use ahflow_core::{run, CurvatureProfile, InitialDataSpec, RadialGrid, SolverConfig, Trajectory};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn profile(spec: &InitialDataSpec, size: usize) -> CurvatureProfile {
    build_profile(spec, Arc::new(RadialGrid::new(size).unwrap())).unwrap()
}

fn below(r: f64) -> f64 {
    -1.0 - 0.5 * (-r * r).exp()
}

fn below_spec() -> InitialDataSpec {
    InitialDataSpec::gaussian(-0.5, 0.0, 1.0, 3)
}

fn full_run(p: &CurvatureProfile, t_end: f64) -> Trajectory {
    let cfg = SolverConfig {
        t_end,
        convergence_tol: 0.0,
        ..SolverConfig::default()
    };
    run(p, &cfg).unwrap()
}

fn slack(traj: &Trajectory) -> f64 {
    Slack::default().value(traj.grid.spacing())
}

/// Plain least squares of `ln y` against `t`: (rate, rms of log residuals).
fn log_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let (st, sy) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), &(t, y)| (a + t, b + y.ln()));
    let (mt, my) = (st / n, sy / n);
    let sxx: f64 = pts.iter().map(|&(t, _)| (t - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|&(t, y)| (t - mt) * (y.ln() - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = pts
        .iter()
        .map(|&(t, y)| (y.ln() - my - slope * (t - mt)).powi(2))
        .sum();
    (-slope, (rss / n).sqrt())
}

/// Samples up to the first one at the roundoff floor.
fn resolved(series: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    series.into_iter().take_while(|&(_, y)| y > 1e-10).collect()
}

fn worst<F: Fn(&DiagnosticsRecord) -> f64>(recs: &[DiagnosticsRecord], margin: F) -> (f64, f64) {
    recs.iter()
        .map(|r| (margin(r), r.t))
        .fold(
            (f64::INFINITY, f64::NAN),
            |a, b| if b.0 < a.0 { b } else { a },
        )
}

fn check(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn fixed_point() -> Outcome {
    let p = CurvatureProfile::hyperbolic(Arc::new(RadialGrid::new(512).unwrap()), 3).unwrap();
    let start = Instant::now();
    let traj = full_run(&p, 5.0);
    let secs = start.elapsed().as_secs_f64();
    let sup = traj
        .records
        .iter()
        .map(|r| r.sup_rm_plus_k)
        .fold(0.0, f64::max);
    let reached = (traj.final_time() - 5.0).abs() < 1e-9;
    check(
        sup < 1e-10 && secs < 30.0 && reached,
        format!(
            "max sup|Rm+K| {sup:.2e} to t = {}, {secs:.1} s",
            traj.final_time()
        ),
    )
}

fn identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (mut gc, mut rt) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let (a, b) = identity_errors(&random_profile(&mut rng, 256, 3));
        gc = gc.max(a);
        rt = rt.max(b);
    }
    check(
        gc <= 1e-12 && rt <= 10.0 * f64::EPSILON,
        format!(
            "Gauss-Codazzi {gc:.2e} (<= 1e-12), round trip {rt:.2e} (<= {:.2e})",
            10.0 * f64::EPSILON
        ),
    )
}

fn consistency() -> Outcome {
    let solver = SolverConfig::default();
    let gap = cross_solver_gap(&profile(&below_spec(), 512), &solver, 1.0)?;
    let w = ResidualWindow::default();
    let time = residual_order_in_time(&below, 3, 256, 0.32, 0.04, &solver, w)
        .map_err(|e| e.to_string())?;
    let space = residual_order_in_space(&below, 3, 64, 0.32, 5e-4, &solver, w)
        .map_err(|e| e.to_string())?;
    let ok = gap <= 1e-4
        && time.kappa.order >= 1.0
        && time.kappa_minus_lambda.order >= 1.0
        && (space.kappa.order - 2.0).abs() <= 0.3
        && (space.kappa_minus_lambda.order - 2.0).abs() <= 0.3;
    check(
        ok,
        format!(
            "gap {gap:.2e}; residual orders dt {:.2}/{:.2}, dx {:.2}/{:.2}",
            time.kappa.order,
            time.kappa_minus_lambda.order,
            space.kappa.order,
            space.kappa_minus_lambda.order
        ),
    )
}

fn lower_envelope() -> Outcome {
    // inf(λ₀ + 1) = -0.5 at the origin.
    let violation = |size: usize, t_end: f64| {
        let traj = full_run(&profile(&below_spec(), size), t_end);
        let s = slack(&traj);
        let (m, t) = worst(&traj.records, |r| {
            r.min_lambda - (-1.0 - 0.5 * (-4.0 * r.t).exp())
        });
        (m + s, t, (-m).max(0.0))
    };
    let (margin, t, _) = violation(256, 10.0);
    let (_, _, v1) = violation(256, 2.0);
    let (_, _, v2) = violation(512, 2.0);
    check(
        margin >= 0.0 && v2 <= v1,
        format!(
            "worst margin {margin:.2e} at t = {t}; violation {v1:.1e} -> {v2:.1e} under doubling"
        ),
    )
}

fn sign_preservation() -> Outcome {
    let nonpos = full_run(
        &profile(&InitialDataSpec::gaussian(1.0, 0.0, 1.0, 3), 256),
        10.0,
    );
    let (m1, t1) = worst(&nonpos.records, |r| slack(&nonpos) - r.max_lambda);
    let bel = full_run(&profile(&below_spec(), 256), 10.0);
    let (m2, t2) = worst(&bel.records, |r| -1.0 + slack(&bel) - r.max_lambda);
    check(
        m1 >= 0.0 && m2 >= 0.0 && nonpos.final_time() >= 10.0 - 1e-9 && bel.final_time() >= 10.0 - 1e-9,
        format!("margins {m1:.2e} (max lambda <= 0, t = {t1}) and {m2:.2e} (max lambda <= -1, t = {t2})"),
    )
}

fn upper_envelope() -> Outcome {
    let traj = full_run(
        &profile(&InitialDataSpec::gaussian(0.5, 0.0, 1.0, 3), 256),
        10.0,
    );
    let s = slack(&traj);
    let (m, t) = worst(&traj.records, |r| {
        -1.0 + 0.505 * (-3.96 * r.t).exp() + s - r.max_lambda
    });
    check(
        m >= 0.0 && traj.final_time() >= 10.0 - 1e-9,
        format!("worst margin {m:.2e} at t = {t}"),
    )
}

fn kappa_rate() -> Outcome {
    let traj = full_run(&profile(&below_spec(), 256), 10.0);
    let series = resolved(
        traj.records
            .iter()
            .map(|r| (r.t, r.sup_kappa_minus_lambda_abs))
            .collect(),
    );
    let pts: Vec<_> = series
        .into_iter()
        .filter(|&(t, _)| (2.0..=10.0).contains(&t))
        .collect();
    if pts.len() < 10 {
        return Err(format!("only {} resolved samples in [2, 10]", pts.len()));
    }
    let (rate, rms) = log_fit(&pts);
    let end = pts.last().unwrap().0;
    check(
        rate >= 3.0,
        format!("rate {rate:.3} on [2, {end:.2}], rms {rms:.2e}"),
    )
}

fn convergence() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for (name, spec) in [
        ("below", below_spec()),
        ("negative", InitialDataSpec::gaussian(0.5, 0.0, 1.0, 3)),
    ] {
        let solver = SolverConfig {
            t_end: 20.0,
            ..SolverConfig::default()
        };
        let traj = run(&profile(&spec, 512), &solver).unwrap();
        let last = traj.records.last().unwrap().sup_rm_plus_k;
        let series = resolved(
            traj.records
                .iter()
                .map(|r| (r.t, r.sup_rm_plus_k))
                .collect(),
        );
        let t_half = series.last().map_or(0.0, |p| p.0) / 2.0;
        let tail: Vec<_> = series.into_iter().filter(|&(t, _)| t >= t_half).collect();
        let (rate, rms) = log_fit(&tail);
        ok &=
            traj.verdict.is_success() && last < 1e-6 && rate > 0.0 && rms < 0.1 && tail.len() >= 10;
        notes.push(format!(
            "{name}: {} at t = {:.2}, final {last:.1e}, rate {rate:.3}, rms {rms:.3}",
            traj.verdict,
            traj.final_time()
        ));
    }
    check(ok, notes.join("; "))
}

fn orders() -> Outcome {
    let solver = SolverConfig::default();
    let space = spatial_order(&below, 3, 64, 0.5, &solver).map_err(|e| e.to_string())?;
    let smooth = |r: f64| -1.0 + 0.9 * (1.0 + r * r).powi(-2);
    let time = temporal_order(&smooth, 3, 16, 0.1, &solver).map_err(|e| e.to_string())?;
    check(
        (space.order - 2.0).abs() <= 0.3 && (time.order - 4.0).abs() <= 0.5,
        format!("spatial {:.3}, temporal {:.3}", space.order, time.order),
    )
}

fn neckpinch_regime() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let text = "initial.center = 2\ninitial.width = 0.5\nsweep.parameter = \"amplitude\"\n\
                sweep.values = [1.05, 1.1, 1.15, 1.2]\n";
    let mut cfg = RunConfig::parse(text).map_err(|e| e.to_string())?;
    cfg.output = dir.path().join("sweep");
    let sweep = execute_sweep(&cfg).map_err(|e| e.to_string())?;
    let definite = [
        "converged",
        "reached_t_end",
        "blowup",
        "neckpinch",
        "step_underflow",
    ];
    let mut ok = sweep.rows.len() == 4;
    let mut notes = Vec::new();
    for r in &sweep.rows {
        ok &= definite.contains(&r.verdict.as_str())
            && r.monitor_ok
            && r.max_sup_r2_lambda.is_finite();
        notes.push(format!(
            "A={} {} peak {:.3}",
            r.value, r.verdict, r.max_sup_r2_lambda
        ));
    }
    let vcfg = RunConfig {
        output: dir.path().join("verify"),
        ..RunConfig::default()
    };
    let start = Instant::now();
    let verify = execute_verify(&vcfg).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    ok &= verify.report.all_pass() && secs < 600.0;
    notes.push(format!(
        "verify {} checks pass: {}, {secs:.0} s",
        verify.report.entries.len(),
        verify.report.all_pass()
    ));
    check(ok, notes.join("; "))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("fixed point", fixed_point),
        ("identity suite", identities),
        ("consistency oracle", consistency),
        ("lower envelope", lower_envelope),
        ("sign preservation", sign_preservation),
        ("upper decay envelope", upper_envelope),
        ("kappa - lambda rate", kappa_rate),
        ("convergence to hyperbolic space", convergence),
        ("order of accuracy", orders),
        ("sign-indefinite sweep and verify", neckpinch_regime),
    ];
    let mut failures = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let (tag, msg) = match f() {
            Ok(m) => ("PASS", m),
            Err(m) => {
                failures += 1;
                ("FAIL", m)
            }
        };
        println!("criterion {:>2} {tag}  {name}: {msg}", k + 1);
    }
    println!(
        "{} of {} criteria pass",
        criteria.len() - failures,
        criteria.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
