//! `ahflow verify`: the verification matrix at the configured resolution.

use std::path::PathBuf;
use std::sync::Arc;

use ahflow_core::diagnostics::convergence::{
    residual_order_in_space, residual_order_in_time, spatial_order, temporal_order, OrderStudy,
};
use ahflow_core::diagnostics::{
    check_lambda_lower_envelope, envelope_report, BoundCheck, BoundCheckReport, ResidualWindow,
};
use ahflow_core::evolution::{LambdaSolver, WSolver};
use ahflow_core::geometry::{f_from_lambda, gauss_codazzi_residual, lambda_from_f};
use ahflow_core::initial_data::build_profile;
use ahflow_core::{
    run, CurvatureProfile, FlowState, InitialDataSpec, RadialGrid, SolverConfig, Verdict,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::run::{create_dir, write_text, RunError};
use crate::sweep::thread_count;

/// Below this many nodes the three-level order studies are not run.
pub const MIN_ORDER_GRID: usize = 64;
pub const GAUSS_CODAZZI_TOL: f64 = 1e-12;
pub const ROUND_TRIP_TOL: f64 = 10.0 * f64::EPSILON;
pub const FIXED_POINT_TOL: f64 = 1e-10;
pub const CROSS_SOLVER_TOL: f64 = 1e-4;
pub const SPATIAL_ORDER: (f64, f64) = (2.0, 0.3);
pub const TEMPORAL_ORDER: (f64, f64) = (4.0, 0.5);
pub const SIGN_INDEFINITE_AMPLITUDES: [f64; 3] = [1.05, 1.1, 1.2];

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOutcome {
    pub report: BoundCheckReport,
    pub report_text: PathBuf,
    pub report_csv: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Job {
    Identities,
    FixedPoint,
    CrossSolver,
    ResidualTime,
    ResidualSpace,
    SpatialOrder,
    TemporalOrder,
    Matrix(&'static str),
    Refinement,
    SignIndefinite,
}

const JOBS: [Job; 13] = [
    Job::Identities,
    Job::FixedPoint,
    Job::CrossSolver,
    Job::ResidualTime,
    Job::ResidualSpace,
    Job::SpatialOrder,
    Job::TemporalOrder,
    Job::Matrix("below_minus_one"),
    Job::Matrix("negative"),
    Job::Matrix("nonpositive"),
    Job::Matrix("polynomial"),
    Job::Refinement,
    Job::SignIndefinite,
];

/// Initial data of the envelope matrix, by name.
pub fn matrix_spec(name: &str, dimension: usize) -> InitialDataSpec {
    match name {
        "below_minus_one" => InitialDataSpec::gaussian(-0.5, 0.0, 1.0, dimension),
        "negative" => InitialDataSpec::gaussian(0.5, 0.0, 1.0, dimension),
        "nonpositive" => InitialDataSpec::gaussian(1.0, 0.0, 1.0, dimension),
        "polynomial" => InitialDataSpec::polynomial(0.3, 1.0, dimension),
        other => panic!("no matrix case {other}"),
    }
}

pub fn execute_verify(cfg: &RunConfig) -> Result<VerifyOutcome, RunError> {
    create_dir(&cfg.output)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| crate::run::io_err(&cfg.output, e))?;
    let groups: Vec<Vec<BoundCheck>> =
        pool.install(|| JOBS.par_iter().map(|&job| run_job(cfg, job)).collect());
    let mut report = BoundCheckReport::default();
    for g in groups {
        report.extend(g);
    }
    let report_text = cfg.output.join("report.txt");
    let report_csv = cfg.output.join("report.csv");
    write_text(&report_text, &report.to_text())?;
    write_text(&report_csv, &report.to_csv())?;
    write_text(&cfg.output.join("config.resolved"), &cfg.resolved())?;
    Ok(VerifyOutcome {
        report,
        report_text,
        report_csv,
    })
}

fn run_job(cfg: &RunConfig, job: Job) -> Vec<BoundCheck> {
    let order_gate = |name: &str| {
        (cfg.grid < MIN_ORDER_GRID).then(|| {
            BoundCheck::not_applicable(
                name,
                format!("grid {} below {MIN_ORDER_GRID} nodes", cfg.grid),
            )
        })
    };
    match job {
        Job::Identities => identities(cfg),
        Job::FixedPoint => vec![fixed_point(cfg)],
        Job::CrossSolver => vec![cross_solver(cfg)],
        Job::ResidualTime => {
            let names = ["residual_time_order_kappa", "residual_time_order_kml"];
            if let Some(na) = order_gate(names[0]) {
                return vec![na, order_gate(names[1]).unwrap()];
            }
            let study = residual_order_in_time(
                &below,
                cfg.dimension,
                cfg.grid,
                0.32,
                0.04,
                &cfg.solver,
                ResidualWindow::default(),
            );
            match study {
                Ok(s) => vec![
                    order_at_least(names[0], &s.kappa, 1.0),
                    order_at_least(names[1], &s.kappa_minus_lambda, 1.0),
                ],
                Err(e) => names.iter().map(|n| failed(n, &e)).collect(),
            }
        }
        Job::ResidualSpace => {
            let names = ["residual_space_order_kappa", "residual_space_order_kml"];
            if let Some(na) = order_gate(names[0]) {
                return vec![na, order_gate(names[1]).unwrap()];
            }
            let study = residual_order_in_space(
                &below,
                cfg.dimension,
                cfg.grid / 4,
                0.32,
                5e-4,
                &cfg.solver,
                ResidualWindow::default(),
            );
            match study {
                Ok(s) => vec![
                    order_near(names[0], &s.kappa, SPATIAL_ORDER),
                    order_near(names[1], &s.kappa_minus_lambda, SPATIAL_ORDER),
                ],
                Err(e) => names.iter().map(|n| failed(n, &e)).collect(),
            }
        }
        Job::SpatialOrder => {
            let name = "spatial_order";
            if let Some(na) = order_gate(name) {
                return vec![na];
            }
            vec![
                match spatial_order(&below, cfg.dimension, cfg.grid / 4, 0.5, &cfg.solver) {
                    Ok(s) => order_near(name, &s, SPATIAL_ORDER),
                    Err(e) => failed(name, &e),
                },
            ]
        }
        Job::TemporalOrder => {
            let name = "temporal_order";
            if let Some(na) = order_gate(name) {
                return vec![na];
            }
            // Δt ∝ Δx² pushes temporal error under spatial error on fine
            // grids, so the study uses a coarse grid and strong data.
            let smooth = |r: f64| -1.0 + 0.9 * (1.0 + r * r).powi(-2);
            vec![
                match temporal_order(&smooth, cfg.dimension, 16, 0.1, &cfg.solver) {
                    Ok(s) => order_near(name, &s, TEMPORAL_ORDER),
                    Err(e) => failed(name, &e),
                },
            ]
        }
        Job::Matrix(case) => matrix_case(cfg, case),
        Job::Refinement => vec![refinement(cfg)],
        Job::SignIndefinite => vec![sign_indefinite(cfg)],
    }
}

fn below(r: f64) -> f64 {
    -1.0 - 0.5 * (-r * r).exp()
}

fn failed(name: &str, e: &dyn std::fmt::Display) -> BoundCheck {
    BoundCheck::with_status(name, false, f64::NAN, f64::NAN, e.to_string())
}

fn order_at_least(name: &str, s: &OrderStudy, min: f64) -> BoundCheck {
    let note = format!(
        "order {:.3} (need >= {min}) from {:.3e}",
        s.order,
        DiffList(&s.differences)
    );
    BoundCheck::with_status(name, s.order >= min, s.order - min, f64::NAN, note)
}

fn order_near(name: &str, s: &OrderStudy, (target, tol): (f64, f64)) -> BoundCheck {
    let note = format!(
        "order {:.3} (need {target} +- {tol}) from {:.3e}",
        s.order,
        DiffList(&s.differences)
    );
    BoundCheck::with_status(
        name,
        (s.order - target).abs() <= tol,
        tol - (s.order - target).abs(),
        f64::NAN,
        note,
    )
}

struct DiffList<'a>(&'a [f64]);

impl std::fmt::LowerExp for DiffList<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (k, d) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(" ")?;
            }
            std::fmt::LowerExp::fmt(d, f)?;
        }
        Ok(())
    }
}

fn profile_of(spec: &InitialDataSpec, size: usize) -> Result<CurvatureProfile, String> {
    let grid = Arc::new(RadialGrid::new(size).map_err(|e| e.to_string())?);
    build_profile(spec, grid).map_err(|e| e.to_string())
}

/// Random admissible profile: one to three even Gaussian bumps on `-1`.
pub fn random_profile(rng: &mut ChaCha8Rng, size: usize, dimension: usize) -> CurvatureProfile {
    let grid = Arc::new(RadialGrid::new(size).expect("grid size checked by config"));
    loop {
        let count = rng.gen_range(1..=3);
        let bumps: Vec<(f64, f64, f64)> = (0..count)
            .map(|_| {
                (
                    rng.gen_range(-1.5..0.6),
                    rng.gen_range(0.0..4.0),
                    rng.gen_range(0.3..2.0),
                )
            })
            .collect();
        let lambda = |r: f64| {
            -1.0 + bumps
                .iter()
                .map(|&(a, c, s)| {
                    let g = |u: f64| (-(u * u) / (s * s)).exp();
                    a * (g(r - c) + g(r + c))
                })
                .sum::<f64>()
        };
        let p = CurvatureProfile::from_fn(grid.clone(), dimension, lambda).expect("finite samples");
        if p.sup_r2_lambda() < 0.99 {
            return p;
        }
    }
}

/// Worst scaled Gauss–Codazzi residual and worst scaled `λ → f → λ` error,
/// both relative to the natural term scale `max(1/r², |λ|)`.
pub fn identity_errors(p: &CurvatureProfile) -> (f64, f64) {
    let r = p.grid().r();
    let lam = p.lambda();
    let scale = |i: usize| (1.0 / (r[i] * r[i])).max(lam[i].abs());
    let gc = gauss_codazzi_residual(p).expect("admissible profile");
    let f = f_from_lambda(p).expect("admissible profile");
    let back = lambda_from_f(p.grid(), &f).expect("positive f");
    let (mut worst_gc, mut worst_rt) = (0.0f64, 0.0f64);
    for i in 1..r.len() {
        worst_gc = worst_gc.max(gc[i].abs() / scale(i));
        worst_rt = worst_rt.max((back[i] - lam[i]).abs() / scale(i));
    }
    (worst_gc, worst_rt)
}

fn identities(cfg: &RunConfig) -> Vec<BoundCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut gc, mut rt) = (0.0f64, 0.0f64);
    for _ in 0..cfg.verify.random_profiles {
        let (a, b) = identity_errors(&random_profile(&mut rng, cfg.grid, cfg.dimension));
        gc = gc.max(a);
        rt = rt.max(b);
    }
    let n = cfg.verify.random_profiles;
    vec![
        BoundCheck::with_status(
            "identity_gauss_codazzi",
            gc <= GAUSS_CODAZZI_TOL,
            GAUSS_CODAZZI_TOL - gc,
            f64::NAN,
            format!("worst scaled residual {gc:.3e} over {n} profiles"),
        ),
        BoundCheck::with_status(
            "identity_round_trip",
            rt <= ROUND_TRIP_TOL,
            ROUND_TRIP_TOL - rt,
            f64::NAN,
            format!("worst scaled error {rt:.3e} over {n} profiles"),
        ),
    ]
}

fn fixed_point(cfg: &RunConfig) -> BoundCheck {
    let name = "fixed_point_stationarity";
    let grid = match RadialGrid::new(cfg.grid) {
        Ok(g) => Arc::new(g),
        Err(e) => return failed(name, &e),
    };
    let p = CurvatureProfile::hyperbolic(grid, cfg.dimension).expect("valid grid");
    let solver = SolverConfig {
        t_end: 1.0,
        convergence_tol: 0.0,
        ..cfg.solver.clone()
    };
    match run(&p, &solver) {
        Ok(traj) => {
            let (worst, at) = traj
                .records
                .iter()
                .map(|r| (r.sup_rm_plus_k, r.t))
                .fold((0.0, 0.0), |a, b| if b.0 > a.0 { b } else { a });
            let ok = worst < FIXED_POINT_TOL && traj.verdict == Verdict::ReachedTEnd;
            let note = format!(
                "sup |Rm+K| {worst:.3e} over t <= 1, verdict {}",
                traj.verdict
            );
            BoundCheck::with_status(name, ok, FIXED_POINT_TOL - worst, at, note)
        }
        Err(e) => failed(name, &e),
    }
}

/// `sup |λ_λ-solver − λ_w-solver|` over `r ≤ 10` at `t_end`.
pub fn cross_solver_gap(
    profile: &CurvatureProfile,
    solver: &SolverConfig,
    t_end: f64,
) -> Result<f64, String> {
    let mut lam = LambdaSolver::new(&FlowState::initial(profile.clone()), solver);
    lam.advance_to(t_end).map_err(|e| e.to_string())?;
    let mut w = WSolver::from_profile(profile, solver).map_err(|e| e.to_string())?;
    w.advance_to(t_end).map_err(|e| e.to_string())?;
    let other = w.state_on(profile.shared_grid());
    let r = profile.grid().r();
    Ok((0..r.len())
        .filter(|&i| r[i] <= 10.0)
        .map(|i| (lam.lambda()[i] - other.profile.lambda()[i]).abs())
        .fold(0.0, f64::max))
}

fn cross_solver(cfg: &RunConfig) -> BoundCheck {
    let name = "cross_solver_agreement";
    let gap = profile_of(&matrix_spec("below_minus_one", cfg.dimension), cfg.grid)
        .and_then(|p| cross_solver_gap(&p, &cfg.solver, 1.0));
    match gap {
        Ok(g) => BoundCheck::with_status(
            name,
            g <= CROSS_SOLVER_TOL,
            CROSS_SOLVER_TOL - g,
            1.0,
            format!(
                "sup gap {g:.3e} on r <= 10 at t = 1 (w nodes {})",
                cfg.solver.w_nodes
            ),
        ),
        Err(e) => failed(name, &e),
    }
}

fn matrix_solver(cfg: &RunConfig, t_end: f64) -> SolverConfig {
    SolverConfig {
        t_end,
        convergence_tol: 0.0,
        ..cfg.solver.clone()
    }
}

fn matrix_case(cfg: &RunConfig, case: &str) -> Vec<BoundCheck> {
    let name = format!("{case}/run");
    let p = match profile_of(&matrix_spec(case, cfg.dimension), cfg.grid) {
        Ok(p) => p,
        Err(e) => return vec![failed(&name, &e)],
    };
    match run(&p, &matrix_solver(cfg, cfg.verify.t_end)) {
        Ok(traj) => {
            let (report, _) = envelope_report(&traj, &p, &cfg.slack, &cfg.kappa_options());
            let mut out = vec![BoundCheck::with_status(
                &name,
                traj.verdict.is_success(),
                0.0,
                traj.final_time(),
                format!("verdict {}", traj.verdict),
            )];
            out.extend(report.entries.into_iter().map(|mut c| {
                c.name = format!("{case}/{}", c.name);
                c
            }));
            out
        }
        Err(e) => vec![failed(&name, &e)],
    }
}

/// Violation of the lower envelope, `max(0, -worst_margin)`, must not grow
/// when the grid is doubled.
fn refinement(cfg: &RunConfig) -> BoundCheck {
    let name = "lower_envelope_refinement";
    let spec = matrix_spec("below_minus_one", cfg.dimension);
    let violation = |size: usize| -> Result<(f64, f64), String> {
        let p = profile_of(&spec, size)?;
        let traj = run(&p, &matrix_solver(cfg, 2.0)).map_err(|e| e.to_string())?;
        let c = check_lambda_lower_envelope(&traj, &p, &cfg.slack);
        Ok(((-c.worst_margin).max(0.0), c.worst_margin))
    };
    match (violation(cfg.grid), violation(2 * cfg.grid)) {
        (Ok((v1, m1)), Ok((v2, m2))) => BoundCheck::with_status(
            name,
            v2 <= v1,
            v1 - v2,
            2.0,
            format!(
                "worst margin {m1:.3e} at N = {}, {m2:.3e} at N = {}",
                cfg.grid,
                2 * cfg.grid
            ),
        ),
        (Err(e), _) | (_, Err(e)) => failed(name, &e),
    }
}

fn sign_indefinite(cfg: &RunConfig) -> BoundCheck {
    let name = "sign_indefinite_sweep";
    let mut notes = Vec::new();
    let mut bad = 0usize;
    for a in SIGN_INDEFINITE_AMPLITUDES {
        let spec = InitialDataSpec::gaussian(a, 2.0, 0.5, cfg.dimension);
        let solver = SolverConfig {
            t_end: cfg.verify.t_end,
            ..cfg.solver.clone()
        };
        let outcome =
            profile_of(&spec, cfg.grid).and_then(|p| run(&p, &solver).map_err(|e| e.to_string()));
        match outcome {
            Ok(traj) => {
                let recs = &traj.records;
                let ok =
                    recs.iter().all(|r| r.is_finite()) && recs.windows(2).all(|w| w[1].t > w[0].t);
                let peak = recs
                    .iter()
                    .map(|r| r.sup_r2_lambda)
                    .fold(f64::NEG_INFINITY, f64::max);
                if !ok {
                    bad += 1;
                }
                notes.push(format!(
                    "A={a}: {} at t={} peak {peak:.4}",
                    traj.verdict,
                    traj.final_time()
                ));
            }
            Err(e) => {
                bad += 1;
                notes.push(format!("A={a}: {e}"));
            }
        }
    }
    let margin = if bad == 0 { 0.0 } else { -(bad as f64) };
    BoundCheck::with_status(name, bad == 0, margin, f64::NAN, notes.join("; "))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_profiles_are_seeded_and_admissible() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..5)
                .map(|_| random_profile(&mut rng, 64, 3))
                .collect::<Vec<_>>()
        };
        let a = draw(7);
        assert_eq!(a, draw(7));
        assert_ne!(a, draw(8));
        assert!(a.iter().all(|p| p.sup_r2_lambda() < 0.99));
    }

    #[test]
    fn identities_hold_on_the_hyperbolic_profile() {
        let grid = Arc::new(RadialGrid::new(64).unwrap());
        let (gc, rt) = identity_errors(&CurvatureProfile::hyperbolic(grid, 3).unwrap());
        assert!(gc <= GAUSS_CODAZZI_TOL && rt <= ROUND_TRIP_TOL);
    }

    #[test]
    fn matrix_cases_cover_each_regime() {
        use ahflow_core::initial_data::Regime;
        let regimes: Vec<Regime> = ["below_minus_one", "negative", "nonpositive", "polynomial"]
            .iter()
            .map(|c| {
                let p = profile_of(&matrix_spec(c, 3), 64).unwrap();
                Regime::classify(p.lambda().iter().copied().fold(f64::NEG_INFINITY, f64::max))
            })
            .collect();
        assert_eq!(
            regimes,
            [
                Regime::StrictlyBelowMinusOne,
                Regime::StrictlyNegative,
                Regime::Nonpositive,
                Regime::StrictlyNegative
            ]
        );
    }

    #[test]
    fn order_checks_report_their_margin() {
        let s = OrderStudy {
            differences: vec![4e-3, 1e-3, 2.5e-4],
            order: 2.0,
        };
        let c = order_near("x", &s, SPATIAL_ORDER);
        assert!(c.holds() && (c.worst_margin - 0.3).abs() < 1e-12);
        assert!(!order_at_least("y", &s, 2.5).holds());
    }
}
