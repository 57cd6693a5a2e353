//! Consistency of evolved `λ` with the evolution equations of `κ` and `κ - λ`.
//!
//! With `q = 1 - r²λ`, `A = n - 1 + κ + (n-2)λ` and the rotationally
//! symmetric Laplacian `Δu = q u_rr + (n-1) q u_r / r - r κ u_r`:
//!
//! ```text
//! κ_t       = Δκ + A (r κ_r + 2κ) + 2(n-2) q (λ - κ) / r²
//! (κ - λ)_t = Δ(κ - λ) + A r (κ - λ)_r + 2 [2(n-1)λ - n/r² + n - 1] (κ - λ)
//! ```
//!
//! Neither equation is used by the solver, so agreement with a finite
//! difference in time checks its algebra independently.

use crate::error::DiagnosticsError;
use crate::evolution::{FlowState, LambdaSolver, SolverConfig};
use crate::geometry::{kappa_from_lambda, CurvatureProfile};
use crate::grid::radial_derivatives;

/// Radial band where residuals are measured. Near the origin the `1/r²`
/// terms divide truncation error by `r²`, which costs an order of accuracy at
/// the first few nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualWindow {
    pub r_min: f64,
    pub r_max: f64,
}

impl Default for ResidualWindow {
    fn default() -> Self {
        Self {
            r_min: 0.1,
            r_max: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureResiduals {
    /// Time of the middle snapshot.
    pub t: f64,
    /// Snapshot spacing used for the central difference.
    pub spacing: f64,
    pub kappa: f64,
    pub kappa_minus_lambda: f64,
}

/// Max residuals of both equations over the window, using the first three
/// consecutive, equally spaced snapshots.
pub fn kappa_evolution_residuals(
    snapshots: &[FlowState],
    window: ResidualWindow,
) -> Result<CurvatureResiduals, DiagnosticsError> {
    let triple = snapshots.windows(3).find(|w| {
        let (a, b) = (w[1].t - w[0].t, w[2].t - w[1].t);
        a > 0.0 && (a - b).abs() <= 1e-9 * a.max(b)
    });
    let Some([prev, mid, next]) = triple else {
        return Err(DiagnosticsError::InsufficientSnapshots {
            needed: 3,
            got: snapshots.len(),
        });
    };
    let h = 0.5 * (next.t - prev.t);
    let p = &mid.profile;
    let grid = p.grid();
    let n = p.dimension() as f64;
    let r = grid.r();
    let lam = p.lambda();
    let kappa = kappa_from_lambda(p);
    let kp = kappa_from_lambda(&next.profile);
    let km = kappa_from_lambda(&prev.profile);
    let d: Vec<f64> = kappa.iter().zip(lam).map(|(k, l)| k - l).collect();
    let (kr, krr) = radial_derivatives(grid, &kappa);
    let (dr, drr) = radial_derivatives(grid, &d);

    let (mut res_k, mut res_d) = (0.0f64, 0.0f64);
    for i in 1..grid.len() - 1 {
        let ri = r[i];
        if ri < window.r_min || ri > window.r_max {
            continue;
        }
        let (l, k) = (lam[i], kappa[i]);
        let q = 1.0 - ri * ri * l;
        let lap = |u_r: f64, u_rr: f64| q * u_rr + (n - 1.0) * q * u_r / ri - ri * k * u_r;
        let a = n - 1.0 + k + (n - 2.0) * l;

        let rhs_k = lap(kr[i], krr[i])
            + a * (ri * kr[i] + 2.0 * k)
            + 2.0 * (n - 2.0) * q * (l - k) / (ri * ri);
        let dk = (kp[i] - km[i]) / (2.0 * h);
        res_k = res_k.max((dk - rhs_k).abs());

        let rhs_d = lap(dr[i], drr[i])
            + a * ri * dr[i]
            + 2.0 * (2.0 * (n - 1.0) * l - n / (ri * ri) + n - 1.0) * d[i];
        let dp = kp[i] - next.profile.lambda()[i];
        let dm = km[i] - prev.profile.lambda()[i];
        res_d = res_d.max(((dp - dm) / (2.0 * h) - rhs_d).abs());
    }
    Ok(CurvatureResiduals {
        t: mid.t,
        spacing: h,
        kappa: res_k,
        kappa_minus_lambda: res_d,
    })
}

/// Evolve `profile` through `t_mid - spacing`, `t_mid` and `t_mid + spacing`
/// and measure both residuals at `t_mid`.
pub fn residuals_around(
    profile: &CurvatureProfile,
    config: &SolverConfig,
    t_mid: f64,
    spacing: f64,
    window: ResidualWindow,
) -> Result<CurvatureResiduals, DiagnosticsError> {
    if !(spacing > 0.0 && t_mid - spacing >= 0.0) {
        return Err(DiagnosticsError::DegenerateFit(format!(
            "snapshot spacing {spacing} does not fit before t = {t_mid}"
        )));
    }
    let mut solver = LambdaSolver::new(&FlowState::initial(profile.clone()), config);
    let mut snaps = Vec::with_capacity(3);
    for k in 0..3 {
        solver.advance_to(t_mid + (k as f64 - 1.0) * spacing)?;
        snaps.push(solver.state());
    }
    kappa_evolution_residuals(&snaps, window)
}
