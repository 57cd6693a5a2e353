//! Time integration of the normalized flow.
//!
//! The primary solver evolves `λ` on the compactified grid; the oracle evolves
//! `w = f²` on a truncated uniform grid. Both use explicit RK4 under a
//! diffusive CFL bound.

mod lambda;
mod rk4;
mod w_oracle;

use std::fmt;
use std::sync::Arc;

pub use lambda::LambdaOperator;
pub use w_oracle::{
    hyperbolic_w, lambda_from_w, rhs_w, w_from_lambda_fn, TruncatedGrid, WOperator,
};

use crate::diagnostics::{self, DiagnosticsRecord};
use crate::error::{EvolutionError, GeometryError};
use crate::geometry::{f_from_lambda, CurvatureProfile};
use crate::grid::RadialGrid;
use rk4::Rk4;

/// Steps shorter than this end the run.
pub const MIN_STEP: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub profile: CurvatureProfile,
    pub step_count: u64,
    pub dt_last: f64,
}

impl FlowState {
    pub fn initial(profile: CurvatureProfile) -> Self {
        Self {
            t: 0.0,
            profile,
            step_count: 0,
            dt_last: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Formulation {
    LambdaPrimary,
    WOracle,
}

impl Formulation {
    pub fn name(self) -> &'static str {
        match self {
            Self::LambdaPrimary => "lambda_primary",
            Self::WOracle => "w_oracle",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "lambda_primary" => Some(Self::LambdaPrimary),
            "w_oracle" => Some(Self::WOracle),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub formulation: Formulation,
    /// Fraction of the diffusive limit `Δx² / max diffusion`. RK4 on this
    /// stencil is stable up to roughly 0.32.
    pub cfl_factor: f64,
    pub t_end: f64,
    /// Stop once `sup |Rm + K|` exceeds this.
    pub blowup_threshold: f64,
    /// Stop once `sup r²λ` exceeds this.
    pub neckpinch_threshold: f64,
    /// Stop once `sup |Rm + K|` falls below this. Zero disables the test.
    pub convergence_tol: f64,
    /// Flow time between diagnostics records.
    pub record_interval: f64,
    /// Keep a snapshot every this many records.
    pub snapshot_stride: usize,
    /// Truncation radius of the oracle domain.
    pub w_radius: f64,
    pub w_nodes: usize,
    /// Relative perturbation of the reaction coefficient. Test hook; keep at 0.
    pub coefficient_defect: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            formulation: Formulation::LambdaPrimary,
            cfl_factor: 0.25,
            t_end: 10.0,
            blowup_threshold: 1e6,
            neckpinch_threshold: 1.0 - 1e-3,
            convergence_tol: 1e-8,
            record_interval: 0.01,
            snapshot_stride: 10,
            w_radius: 20.0,
            w_nodes: 401,
            coefficient_defect: 0.0,
        }
    }
}

impl SolverConfig {
    /// Structural checks. `cfl_factor` is only required to be positive here so
    /// that unstable settings can be exercised; front ends restrict it to (0, 1].
    pub fn check(&self) -> Result<(), EvolutionError> {
        let bad = |msg: &str| Err(EvolutionError::Config(msg.to_string()));
        if !(self.cfl_factor > 0.0 && self.cfl_factor.is_finite()) {
            return bad("cfl_factor must be positive");
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be finite and nonnegative");
        }
        if !(self.blowup_threshold > 0.0) {
            return bad("blowup_threshold must be positive");
        }
        if !(self.neckpinch_threshold > 0.0 && self.neckpinch_threshold < 1.0) {
            return bad("neckpinch_threshold must lie in (0, 1)");
        }
        if !(self.convergence_tol >= 0.0) {
            return bad("convergence_tol must be nonnegative");
        }
        if !(self.record_interval > 0.0 && self.record_interval.is_finite()) {
            return bad("record_interval must be positive");
        }
        if self.snapshot_stride == 0 {
            return bad("snapshot_stride must be at least 1");
        }
        if !(self.w_radius > 0.0 && self.w_radius.is_finite()) {
            return bad("w_radius must be positive");
        }
        if self.w_nodes < TruncatedGrid::MIN_SIZE {
            return bad("w_nodes too small");
        }
        if !self.coefficient_defect.is_finite() {
            return bad("coefficient_defect must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    ReachedTEnd,
    Converged,
    Blowup,
    Neckpinch,
    StepUnderflow,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Self::ReachedTEnd => "reached_t_end",
            Self::Converged => "converged",
            Self::Blowup => "blowup",
            Self::Neckpinch => "neckpinch",
            Self::StepUnderflow => "step_underflow",
        }
    }

    /// Converged or ran to the end without incident.
    pub fn is_success(self) -> bool {
        matches!(self, Self::ReachedTEnd | Self::Converged)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub records: Vec<DiagnosticsRecord>,
    pub snapshots: Vec<FlowState>,
    pub verdict: Verdict,
    pub grid: Arc<RadialGrid>,
    pub dimension: usize,
}

impl Trajectory {
    pub fn final_time(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.t)
    }
}

/// Why an unchecked step could not be accepted.
#[derive(Debug, Clone, Copy, PartialEq)]
enum StepFault {
    Underflow(f64),
    /// Non-finite values or an update far larger than the field itself, the
    /// signature of an unstable explicit step.
    Diverged,
}

/// Maximum of `f(i)` over `0..n` with independent accumulators so the
/// reduction pipelines. NaN values are ignored.
#[inline]
pub(crate) fn lane_max(n: usize, f: impl Fn(usize) -> f64) -> f64 {
    const L: usize = 4;
    let mut acc = [f64::NEG_INFINITY; L];
    let full = n - n % L;
    for base in (0..full).step_by(L) {
        for (k, a) in acc.iter_mut().enumerate() {
            let v = f(base + k);
            *a = if v > *a { v } else { *a };
        }
    }
    for i in full..n {
        let v = f(i);
        acc[0] = if v > acc[0] { v } else { acc[0] };
    }
    acc.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn diverged(old: &[f64], new: &[f64]) -> bool {
    let n = old.len();
    let scale = lane_max(n, |i| (old[i] + 1.0).abs());
    // Non-finite updates count as infinitely large.
    let jump = lane_max(n, |i| {
        let d = (new[i] - old[i]).abs();
        if d.is_nan() {
            f64::INFINITY
        } else {
            d
        }
    });
    jump > 2.0 * (1.0 + scale)
}

/// Reusable integrator for the `λ` equation.
#[derive(Debug, Clone)]
pub struct LambdaSolver {
    op: LambdaOperator,
    rk: Rk4,
    grid: Arc<RadialGrid>,
    dimension: usize,
    lambda: Vec<f64>,
    prev: Vec<f64>,
    cfl: f64,
    t: f64,
    step_count: u64,
    dt_last: f64,
}

impl LambdaSolver {
    pub fn new(state: &FlowState, config: &SolverConfig) -> Self {
        let grid = state.profile.shared_grid().clone();
        let dimension = state.profile.dimension();
        let n = grid.len();
        let mut lambda = state.profile.lambda().to_vec();
        LambdaOperator::impose_boundary(&mut lambda);
        Self {
            op: LambdaOperator::with_defect(&grid, dimension, config.coefficient_defect),
            rk: Rk4::new(n),
            grid,
            dimension,
            lambda,
            prev: vec![0.0; n],
            cfl: config.cfl_factor,
            t: state.t,
            step_count: state.step_count,
            dt_last: state.dt_last,
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn cfl_dt(&self) -> f64 {
        let dx = self.grid.spacing();
        self.cfl * dx * dx / self.op.max_diffusion(&self.lambda).max(f64::MIN_POSITIVE)
    }

    /// One RK4 step of length `min(cfl_dt, dt_cap)`, failing on a minimal
    /// hypersphere in any stage.
    pub fn step_checked(&mut self, dt_cap: f64) -> Result<f64, EvolutionError> {
        let dt = self.cfl_dt();
        if dt < MIN_STEP {
            return Err(EvolutionError::StepUnderflow { dt, min: MIN_STEP });
        }
        let dt = dt.min(dt_cap);
        let op = &self.op;
        self.rk.step(
            &mut self.lambda,
            dt,
            |l, out| op.eval_checked(l, out),
            LambdaOperator::impose_boundary,
        )?;
        self.finish(dt);
        Ok(dt)
    }

    /// Integrate to `t_end` exactly, failing on any stage error.
    pub fn advance_to(&mut self, t_end: f64) -> Result<(), EvolutionError> {
        while t_end - self.t > time_eps(t_end) {
            self.step_checked(t_end - self.t)?;
        }
        self.t = self.t.max(t_end);
        Ok(())
    }

    fn step_monitored(&mut self, dt_cap: f64) -> Result<f64, StepFault> {
        let dt = self.cfl_dt();
        if !(dt >= MIN_STEP) {
            return Err(StepFault::Underflow(dt));
        }
        let dt = dt.min(dt_cap);
        self.prev.copy_from_slice(&self.lambda);
        let op = &self.op;
        self.rk
            .step::<()>(
                &mut self.lambda,
                dt,
                |l, out| {
                    op.eval(l, out);
                    Ok(())
                },
                LambdaOperator::impose_boundary,
            )
            .expect("unchecked evaluation cannot fail");
        if diverged(&self.prev, &self.lambda) {
            return Err(StepFault::Diverged);
        }
        self.finish(dt);
        Ok(dt)
    }

    fn finish(&mut self, dt: f64) {
        self.t += dt;
        self.step_count += 1;
        self.dt_last = dt;
    }

    fn sup_r2_lambda(&self) -> f64 {
        1.0 - self.op.min_margin(&self.lambda)
    }

    pub fn state(&self) -> FlowState {
        FlowState {
            t: self.t,
            profile: CurvatureProfile::new(self.grid.clone(), self.lambda.clone(), self.dimension)
                .expect("shape fixed at construction"),
            step_count: self.step_count,
            dt_last: self.dt_last,
        }
    }
}

/// Integrator for `w` on the truncated domain.
#[derive(Debug, Clone)]
pub struct WSolver {
    op: WOperator,
    rk: Rk4,
    grid: TruncatedGrid,
    dimension: usize,
    w: Vec<f64>,
    prev: Vec<f64>,
    cfl: f64,
    t: f64,
    step_count: u64,
    dt_last: f64,
}

impl WSolver {
    pub fn new(grid: TruncatedGrid, mut w: Vec<f64>, dimension: usize, cfl: f64) -> Self {
        WOperator::impose(&grid, &mut w);
        let n = grid.len();
        Self {
            op: WOperator::new(&grid, dimension),
            rk: Rk4::new(n),
            grid,
            dimension,
            w,
            prev: vec![0.0; n],
            cfl,
            t: 0.0,
            step_count: 0,
            dt_last: 0.0,
        }
    }

    /// Sample `λ` from a profile on the compactified grid.
    pub fn from_profile(
        profile: &CurvatureProfile,
        config: &SolverConfig,
    ) -> Result<Self, GeometryError> {
        let grid = TruncatedGrid::new(config.w_radius, config.w_nodes)?;
        let pg = profile.grid();
        let w = w_from_lambda_fn(&grid, |r| {
            pg.interpolate(profile.lambda(), r).unwrap_or(-1.0)
        });
        if let Some(node) = w.iter().position(|v| !(*v > 0.0)) {
            return Err(GeometryError::NonpositiveMetric {
                node,
                value: w[node],
            });
        }
        Ok(Self::new(grid, w, profile.dimension(), config.cfl_factor))
    }

    pub fn grid(&self) -> &TruncatedGrid {
        &self.grid
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn lambda(&self) -> Vec<f64> {
        lambda_from_w(&self.grid, &self.w)
    }

    pub fn cfl_dt(&self) -> f64 {
        let h = self.grid.spacing();
        self.cfl * h * h / self.op.max_diffusion(&self.w).max(f64::MIN_POSITIVE)
    }

    pub fn step_checked(&mut self, dt_cap: f64) -> Result<f64, EvolutionError> {
        let dt = self.cfl_dt();
        if dt < MIN_STEP {
            return Err(EvolutionError::StepUnderflow { dt, min: MIN_STEP });
        }
        let dt = dt.min(dt_cap);
        let (op, grid) = (&self.op, &self.grid);
        self.rk.step(
            &mut self.w,
            dt,
            |w, out| op.eval_checked(w, out),
            |w| WOperator::impose(grid, w),
        )?;
        self.t += dt;
        self.step_count += 1;
        self.dt_last = dt;
        Ok(dt)
    }

    fn step_monitored(&mut self, dt_cap: f64) -> Result<f64, StepFault> {
        let dt = self.cfl_dt();
        if !(dt >= MIN_STEP) {
            return Err(StepFault::Underflow(dt));
        }
        let dt = dt.min(dt_cap);
        self.prev.copy_from_slice(&self.w);
        let (op, grid) = (&self.op, &self.grid);
        self.rk
            .step::<()>(
                &mut self.w,
                dt,
                |w, out| {
                    op.eval(w, out);
                    Ok(())
                },
                |w| WOperator::impose(grid, w),
            )
            .expect("unchecked evaluation cannot fail");
        if diverged(&self.prev, &self.w) || self.w.iter().any(|&v| !(v > 0.0)) {
            return Err(StepFault::Diverged);
        }
        self.t += dt;
        self.step_count += 1;
        self.dt_last = dt;
        Ok(dt)
    }

    /// Integrate to `t_end` exactly, failing on any stage error.
    pub fn advance_to(&mut self, t_end: f64) -> Result<(), EvolutionError> {
        while t_end - self.t > time_eps(t_end) {
            self.step_checked(t_end - self.t)?;
        }
        self.t = self.t.max(t_end);
        Ok(())
    }

    /// The evolved `λ` on a compactified grid, `-1` beyond the truncation radius.
    pub fn state_on(&self, grid: &Arc<RadialGrid>) -> FlowState {
        let lam = self.lambda();
        let values = grid
            .r()
            .iter()
            .map(|&r| self.grid.interpolate(&lam, r).unwrap_or(-1.0))
            .collect();
        FlowState {
            t: self.t,
            profile: CurvatureProfile::new(grid.clone(), values, self.dimension)
                .expect("shape fixed by grid"),
            step_count: self.step_count,
            dt_last: self.dt_last,
        }
    }
}

fn time_eps(t: f64) -> f64 {
    1e-12 * t.abs().max(1.0)
}

/// Right-hand side of the `λ` equation at `state`.
pub fn rhs_lambda(state: &FlowState) -> Result<Vec<f64>, EvolutionError> {
    let p = &state.profile;
    let op = LambdaOperator::new(p.grid(), p.dimension());
    let mut out = vec![0.0; p.lambda().len()];
    op.eval_checked(p.lambda(), &mut out)?;
    Ok(out)
}

/// One CFL-limited RK4 step. Building the operator costs a few passes over the
/// grid; long runs should hold a [`LambdaSolver`] instead.
pub fn step(state: &FlowState, config: &SolverConfig) -> Result<FlowState, EvolutionError> {
    let mut solver = LambdaSolver::new(state, config);
    solver.step_checked(f64::INFINITY)?;
    Ok(solver.state())
}

enum Integrator {
    Lambda(LambdaSolver),
    W(WSolver, Arc<RadialGrid>),
}

impl Integrator {
    fn t(&self) -> f64 {
        match self {
            Self::Lambda(s) => s.t,
            Self::W(s, _) => s.t,
        }
    }

    fn step(&mut self, dt_cap: f64) -> Result<f64, StepFault> {
        match self {
            Self::Lambda(s) => s.step_monitored(dt_cap),
            Self::W(s, _) => s.step_monitored(dt_cap),
        }
    }

    fn snap_time(&mut self, t: f64) {
        match self {
            Self::Lambda(s) => s.t = t,
            Self::W(s, _) => s.t = t,
        }
    }

    fn sup_r2_lambda(&self) -> f64 {
        match self {
            Self::Lambda(s) => s.sup_r2_lambda(),
            Self::W(s, _) => {
                // r²λ = 1 - 1/w
                lane_max(s.w.len(), |i| 1.0 - 1.0 / s.w[i])
            }
        }
    }

    fn state(&self) -> FlowState {
        match self {
            Self::Lambda(s) => s.state(),
            Self::W(s, g) => s.state_on(g),
        }
    }
}

struct Recorder<'a> {
    config: &'a SolverConfig,
    records: Vec<DiagnosticsRecord>,
    snapshots: Vec<FlowState>,
}

impl Recorder<'_> {
    /// Push a record for `state` and report whether a stopping rule fired.
    fn push(&mut self, state: FlowState) -> Option<Verdict> {
        if self.records.last().is_some_and(|r| r.t >= state.t) {
            return None;
        }
        let rec = match diagnostics::record(&state) {
            Ok(rec) => rec,
            Err(_) => return Some(Verdict::Neckpinch),
        };
        let c = self.config;
        let verdict = if !rec.is_finite() || rec.sup_rm_plus_k > c.blowup_threshold {
            Some(Verdict::Blowup)
        } else if rec.sup_r2_lambda > c.neckpinch_threshold {
            Some(Verdict::Neckpinch)
        } else if rec.sup_rm_plus_k < c.convergence_tol {
            Some(Verdict::Converged)
        } else {
            None
        };
        if rec.is_finite() {
            if self.records.len().is_multiple_of(c.snapshot_stride) || verdict.is_some() {
                self.snapshots.push(state);
            }
            self.records.push(rec);
        }
        verdict
    }
}

/// Evolve `initial` until a stopping rule fires or `t_end` is reached.
///
/// Records fall on exact multiples of `record_interval` (the last step before
/// each is shortened), plus one at the stopping time if it is off that lattice.
pub fn run(
    initial: &CurvatureProfile,
    config: &SolverConfig,
) -> Result<Trajectory, EvolutionError> {
    config.check()?;
    f_from_lambda(initial)?;
    let grid = initial.shared_grid().clone();
    let state = FlowState::initial(initial.clone());
    let mut integ = match config.formulation {
        Formulation::LambdaPrimary => Integrator::Lambda(LambdaSolver::new(&state, config)),
        Formulation::WOracle => {
            Integrator::W(WSolver::from_profile(initial, config)?, grid.clone())
        }
    };
    let mut rec = Recorder {
        config,
        records: Vec::new(),
        snapshots: Vec::new(),
    };
    let mut k: u64 = 0;
    let verdict = 'outer: loop {
        if let Some(v) = rec.push(integ.state()) {
            break v;
        }
        if integ.t() >= config.t_end - time_eps(config.t_end) {
            break Verdict::ReachedTEnd;
        }
        k += 1;
        let target = (k as f64 * config.record_interval).min(config.t_end);
        while target - integ.t() > time_eps(target) {
            match integ.step(target - integ.t()) {
                Ok(_) => {}
                Err(StepFault::Underflow(_)) => {
                    rec.push(integ.state());
                    break 'outer Verdict::StepUnderflow;
                }
                Err(StepFault::Diverged) => break 'outer Verdict::Blowup,
            }
            if integ.sup_r2_lambda() > config.neckpinch_threshold {
                rec.push(integ.state());
                break 'outer Verdict::Neckpinch;
            }
        }
        integ.snap_time(target);
    };
    Ok(Trajectory {
        records: rec.records,
        snapshots: rec.snapshots,
        verdict,
        grid,
        dimension: initial.dimension(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(n: usize, lam: impl Fn(f64) -> f64) -> CurvatureProfile {
        let g = Arc::new(RadialGrid::new(n).unwrap());
        let mut p = CurvatureProfile::from_fn(g, 3, lam).unwrap();
        let last = p.lambda().len() - 1;
        p.lambda_mut()[last] = -1.0;
        p
    }

    #[test]
    fn hyperbolic_step_is_exact() {
        let p = profile(64, |_| -1.0);
        let s = step(&FlowState::initial(p), &SolverConfig::default()).unwrap();
        assert!(s.profile.lambda().iter().all(|&l| l == -1.0));
        assert!(s.t > 0.0 && s.step_count == 1);
    }

    #[test]
    fn flat_interior_is_stationary_under_rhs() {
        let p = profile(32, |_| 0.0);
        let rhs = rhs_lambda(&FlowState::initial(p)).unwrap();
        // node 30 sees the Dirichlet value -1 at node 31
        assert!(rhs[..30].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hyperbolic_run_converges_at_once() {
        let p = profile(64, |_| -1.0);
        let traj = run(&p, &SolverConfig::default()).unwrap();
        assert_eq!(traj.verdict, Verdict::Converged);
        assert_eq!(traj.records.len(), 1);
    }

    #[test]
    fn records_land_on_lattice() {
        let p = profile(32, |r| -1.0 - 0.5 * (-r * r).exp());
        let cfg = SolverConfig {
            t_end: 0.05,
            record_interval: 0.01,
            convergence_tol: 0.0,
            ..SolverConfig::default()
        };
        let traj = run(&p, &cfg).unwrap();
        assert_eq!(traj.verdict, Verdict::ReachedTEnd);
        let ts: Vec<f64> = traj.records.iter().map(|r| r.t).collect();
        assert_eq!(ts.len(), 6);
        for (i, t) in ts.iter().enumerate() {
            assert!((t - 0.01 * i as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn unstable_step_is_reported_as_blowup() {
        let p = profile(64, |r| -1.0 + 0.8 * (-(r - 1.0).powi(2) / 0.09).exp());
        let cfg = SolverConfig {
            cfl_factor: 10.0,
            t_end: 1.0,
            ..SolverConfig::default()
        };
        let traj = run(&p, &cfg).unwrap();
        assert_eq!(traj.verdict, Verdict::Blowup);
        assert!(traj.records.iter().all(|r| r.is_finite()));
    }

    #[test]
    #[allow(clippy::field_reassign_with_default)]
    fn config_rejects_nonsense() {
        let mut c = SolverConfig::default();
        c.cfl_factor = 0.0;
        assert!(c.check().is_err());
        c = SolverConfig::default();
        c.neckpinch_threshold = 1.0;
        assert!(c.check().is_err());
        c = SolverConfig::default();
        c.snapshot_stride = 0;
        assert!(c.check().is_err());
    }
}
