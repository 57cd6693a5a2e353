//! Observed order of accuracy from three-level self-convergence.
//!
//! With solutions `u_h, u_{h/2}, u_{h/4}` and error `C h^p`, the successive
//! differences shrink by `2^p`, so `p = log2(|u_h - u_{h/2}| / |u_{h/2} - u_{h/4}|)`
//! without needing an exact solution.

use std::sync::Arc;

use super::residuals::{residuals_around, ResidualWindow};
use crate::error::{DiagnosticsError, EvolutionError};
use crate::evolution::{FlowState, LambdaSolver, SolverConfig};
use crate::geometry::CurvatureProfile;
use crate::grid::RadialGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct OrderStudy {
    /// Sup-norm differences between consecutive refinement levels.
    pub differences: Vec<f64>,
    pub order: f64,
}

impl OrderStudy {
    pub fn from_differences(differences: Vec<f64>) -> Result<Self, DiagnosticsError> {
        let [.., a, b] = differences[..] else {
            return Err(DiagnosticsError::DegenerateFit(
                "need two differences".into(),
            ));
        };
        if !(a > 0.0 && b > 0.0) {
            return Err(DiagnosticsError::DegenerateFit(format!(
                "differences {a:e}, {b:e} must be positive"
            )));
        }
        Ok(Self {
            order: (a / b).log2(),
            differences,
        })
    }
}

/// Integrate the `λ` equation from `profile` to exactly `t_end`.
pub fn evolve_to(
    profile: &CurvatureProfile,
    config: &SolverConfig,
    t_end: f64,
) -> Result<CurvatureProfile, EvolutionError> {
    let mut solver = LambdaSolver::new(&FlowState::initial(profile.clone()), config);
    solver.advance_to(t_end)?;
    Ok(solver.state().profile)
}

fn sample(
    size: usize,
    dimension: usize,
    lambda0: &dyn Fn(f64) -> f64,
) -> Result<CurvatureProfile, DiagnosticsError> {
    let grid = Arc::new(RadialGrid::new(size)?);
    let mut p = CurvatureProfile::from_fn(grid, dimension, lambda0)?;
    let last = p.lambda().len() - 1;
    p.lambda_mut()[last] = -1.0;
    Ok(p)
}

/// Largest difference over the nodes of the coarsest grid (its Dirichlet node
/// excluded), where finer grids are sampled at every `stride`-th node.
fn coarse_diff(a: &[f64], stride_a: usize, b: &[f64], stride_b: usize, coarse: usize) -> f64 {
    (0..coarse - 1)
        .map(|i| (a[i * stride_a] - b[i * stride_b]).abs())
        .fold(0.0, f64::max)
}

/// Spatial order from grids of `base`, `2·base` and `4·base` nodes. The
/// time step scales with `Δx²`, so temporal error is negligible.
pub fn spatial_order(
    lambda0: &dyn Fn(f64) -> f64,
    dimension: usize,
    base: usize,
    t_end: f64,
    config: &SolverConfig,
) -> Result<OrderStudy, DiagnosticsError> {
    let mut sols = Vec::with_capacity(3);
    for k in 0..3 {
        let p = sample(base << k, dimension, lambda0)?;
        sols.push(evolve_to(&p, config, t_end)?);
    }
    let d1 = coarse_diff(sols[0].lambda(), 1, sols[1].lambda(), 2, base);
    let d2 = coarse_diff(sols[1].lambda(), 2, sols[2].lambda(), 4, base);
    OrderStudy::from_differences(vec![d1, d2])
}

/// Temporal order on one grid from CFL factors `c`, `c/2`, `c/4`.
pub fn temporal_order(
    lambda0: &dyn Fn(f64) -> f64,
    dimension: usize,
    size: usize,
    t_end: f64,
    config: &SolverConfig,
) -> Result<OrderStudy, DiagnosticsError> {
    let p = sample(size, dimension, lambda0)?;
    let mut sols = Vec::with_capacity(3);
    for k in 0..3 {
        let cfg = SolverConfig {
            cfl_factor: config.cfl_factor / f64::from(1u32 << k),
            ..config.clone()
        };
        sols.push(evolve_to(&p, &cfg, t_end)?);
    }
    let d1 = coarse_diff(sols[0].lambda(), 1, sols[1].lambda(), 1, size);
    let d2 = coarse_diff(sols[1].lambda(), 1, sols[2].lambda(), 1, size);
    OrderStudy::from_differences(vec![d1, d2])
}

/// Observed orders of the two curvature-equation residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualStudy {
    pub kappa: OrderStudy,
    pub kappa_minus_lambda: OrderStudy,
}

impl ResidualStudy {
    fn from_levels(levels: &[(f64, f64)]) -> Result<Self, DiagnosticsError> {
        Ok(Self {
            kappa: OrderStudy::from_differences(levels.iter().map(|l| l.0).collect())?,
            kappa_minus_lambda: OrderStudy::from_differences(levels.iter().map(|l| l.1).collect())?,
        })
    }
}

/// Residual decay as the snapshot spacing halves from `spacing` over three
/// levels, on one grid. The residual itself plays the role of the difference.
pub fn residual_order_in_time(
    lambda0: &dyn Fn(f64) -> f64,
    dimension: usize,
    size: usize,
    t_mid: f64,
    spacing: f64,
    config: &SolverConfig,
    window: ResidualWindow,
) -> Result<ResidualStudy, DiagnosticsError> {
    let p = sample(size, dimension, lambda0)?;
    let mut levels = Vec::with_capacity(3);
    for k in 0..3 {
        let h = spacing / f64::from(1u32 << k);
        let res = residuals_around(&p, config, t_mid, h, window)?;
        levels.push((res.kappa, res.kappa_minus_lambda));
    }
    ResidualStudy::from_levels(&levels)
}

/// Residual decay over grids of `base`, `2·base` and `4·base` nodes at a fixed,
/// small snapshot spacing.
pub fn residual_order_in_space(
    lambda0: &dyn Fn(f64) -> f64,
    dimension: usize,
    base: usize,
    t_mid: f64,
    spacing: f64,
    config: &SolverConfig,
    window: ResidualWindow,
) -> Result<ResidualStudy, DiagnosticsError> {
    let mut levels = Vec::with_capacity(3);
    for k in 0..3 {
        let p = sample(base << k, dimension, lambda0)?;
        let res = residuals_around(&p, config, t_mid, spacing, window)?;
        levels.push((res.kappa, res.kappa_minus_lambda));
    }
    ResidualStudy::from_levels(&levels)
}
