use std::sync::Arc;

use ahflow_core::diagnostics::convergence::{
    residual_order_in_time, spatial_order, temporal_order,
};
use ahflow_core::diagnostics::{kappa_evolution_residuals, ResidualWindow};
use ahflow_core::evolution::{LambdaSolver, WSolver};
use ahflow_core::initial_data::build_profile;
use ahflow_core::{
    run, CurvatureProfile, FlowState, InitialDataSpec, RadialGrid, SolverConfig, Verdict,
};

fn below(r: f64) -> f64 {
    -1.0 - 0.5 * (-r * r).exp()
}

fn profile(size: usize, f: impl Fn(f64) -> f64) -> CurvatureProfile {
    let grid = Arc::new(RadialGrid::new(size).unwrap());
    let mut p = CurvatureProfile::from_fn(grid, 3, f).unwrap();
    let last = p.lambda().len() - 1;
    p.lambda_mut()[last] = -1.0;
    p
}

#[test]
fn runs_are_bitwise_reproducible() {
    let p = profile(64, below);
    let cfg = SolverConfig {
        t_end: 0.5,
        ..SolverConfig::default()
    };
    let a = run(&p, &cfg).unwrap();
    let b = run(&p, &cfg).unwrap();
    assert_eq!(a.records, b.records);
    assert_eq!(a.verdict, b.verdict);
    let la = a.snapshots.last().unwrap().profile.lambda();
    let lb = b.snapshots.last().unwrap().profile.lambda();
    assert!(la.iter().zip(lb).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn hyperbolic_space_does_not_move() {
    let grid = Arc::new(RadialGrid::new(512).unwrap());
    let p = CurvatureProfile::hyperbolic(grid, 3).unwrap();
    let mut solver = LambdaSolver::new(&FlowState::initial(p), &SolverConfig::default());
    solver.advance_to(0.01).unwrap();
    assert!(solver.lambda().iter().all(|&l| l == -1.0));
}

#[test]
fn lambda_and_w_solvers_agree() {
    let p = profile(256, below);
    let cfg = SolverConfig {
        w_nodes: 201,
        ..SolverConfig::default()
    };
    let mut lam = LambdaSolver::new(&FlowState::initial(p.clone()), &cfg);
    lam.advance_to(0.5).unwrap();
    let mut w = WSolver::from_profile(&p, &cfg).unwrap();
    w.advance_to(0.5).unwrap();
    let other = w.state_on(p.shared_grid());
    let r = p.grid().r();
    let worst = (0..r.len())
        .filter(|&i| r[i] <= 10.0)
        .map(|i| (lam.lambda()[i] - other.profile.lambda()[i]).abs())
        .fold(0.0, f64::max);
    assert!(worst < 5e-4, "{worst}");
}

#[test]
fn observed_orders() {
    let cfg = SolverConfig::default();
    let s = spatial_order(&below, 3, 32, 0.5, &cfg).unwrap();
    assert!((s.order - 2.0).abs() < 0.3, "{s:?}");
    let smooth = |r: f64| -1.0 + 0.9 * (1.0 + r * r).powi(-2);
    let t = temporal_order(&smooth, 3, 16, 0.1, &cfg).unwrap();
    assert!((t.order - 4.0).abs() < 0.5, "{t:?}");
}

#[test]
fn residuals_detect_a_wrong_coefficient() {
    let w = ResidualWindow::default();
    let good =
        residual_order_in_time(&below, 3, 128, 0.32, 0.04, &SolverConfig::default(), w).unwrap();
    assert!(
        good.kappa.order >= 1.0 && good.kappa_minus_lambda.order >= 1.0,
        "{good:?}"
    );
    let corrupted = SolverConfig {
        coefficient_defect: 0.05,
        ..SolverConfig::default()
    };
    let bad = residual_order_in_time(&below, 3, 128, 0.32, 0.04, &corrupted, w).unwrap();
    assert!(
        bad.kappa.order < 1.0 && bad.kappa_minus_lambda.order < 1.0,
        "{bad:?}"
    );
}

#[test]
fn residuals_reject_unrelated_snapshots() {
    let cfg = SolverConfig {
        t_end: 0.03,
        record_interval: 0.01,
        snapshot_stride: 1,
        convergence_tol: 0.0,
        ..SolverConfig::default()
    };
    let a = run(&profile(128, below), &cfg).unwrap();
    let b = run(&profile(128, |r| -1.0 + 0.5 * (-r * r).exp()), &cfg).unwrap();
    let consistent =
        kappa_evolution_residuals(&a.snapshots[1..4], ResidualWindow::default()).unwrap();
    let mixed = vec![
        a.snapshots[1].clone(),
        b.snapshots[2].clone(),
        a.snapshots[3].clone(),
    ];
    let mixed = kappa_evolution_residuals(&mixed, ResidualWindow::default()).unwrap();
    assert!(
        mixed.kappa > 10.0 * consistent.kappa,
        "{mixed:?} vs {consistent:?}"
    );
    assert!(kappa_evolution_residuals(&a.snapshots[..2], ResidualWindow::default()).is_err());
}

#[test]
fn low_neckpinch_threshold_stops_the_run() {
    let grid = Arc::new(RadialGrid::new(64).unwrap());
    let p = build_profile(&InitialDataSpec::gaussian(1.2, 2.0, 0.5, 3), grid).unwrap();
    let cfg = SolverConfig {
        neckpinch_threshold: 0.5,
        ..SolverConfig::default()
    };
    let traj = run(&p, &cfg).unwrap();
    assert_eq!(traj.verdict, Verdict::Neckpinch);
    assert!(traj.records.iter().all(|r| r.is_finite()));
    assert!(traj.records.last().unwrap().sup_r2_lambda > 0.5);
}
