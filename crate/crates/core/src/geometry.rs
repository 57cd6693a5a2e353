//! Curvature algebra for rotationally symmetric metrics `f² dr² + r² g_sphere`.
//!
//! The stored field is the orbital sectional curvature `λ = (1 - 1/f²) / r²`.
//! Everything else (`f`, `κ`, `H`, `|Rm + K|`) is derived from it. Quantities
//! carrying a `1/r` factor are undefined at node 0; where no finite parity
//! limit exists they are reported as `+∞` there.

use std::sync::Arc;

use crate::error::GeometryError;
use crate::grid::{even_extrapolate_origin, radial_derivatives, radial_gradient_r, RadialGrid};

/// Orbital sectional curvature `λ` sampled on a compactified grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureProfile {
    grid: Arc<RadialGrid>,
    lambda: Vec<f64>,
    dimension: usize,
}

impl CurvatureProfile {
    pub fn new(
        grid: Arc<RadialGrid>,
        lambda: Vec<f64>,
        dimension: usize,
    ) -> Result<Self, GeometryError> {
        if lambda.len() != grid.len() {
            return Err(GeometryError::LengthMismatch {
                expected: grid.len(),
                got: lambda.len(),
            });
        }
        if dimension < 3 {
            return Err(GeometryError::Dimension(dimension));
        }
        Ok(Self {
            grid,
            lambda,
            dimension,
        })
    }

    /// λ ≡ -1: hyperbolic space.
    pub fn hyperbolic(grid: Arc<RadialGrid>, dimension: usize) -> Result<Self, GeometryError> {
        let n = grid.len();
        Self::new(grid, vec![-1.0; n], dimension)
    }

    pub fn from_fn(
        grid: Arc<RadialGrid>,
        dimension: usize,
        lambda: impl Fn(f64) -> f64,
    ) -> Result<Self, GeometryError> {
        let values = grid.r().iter().map(|&r| lambda(r)).collect();
        Self::new(grid, values, dimension)
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn shared_grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn lambda_mut(&mut self) -> &mut [f64] {
        &mut self.lambda
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn with_lambda(&self, lambda: Vec<f64>) -> Result<Self, GeometryError> {
        Self::new(self.grid.clone(), lambda, self.dimension)
    }

    /// max over nodes of `r² λ`; a minimal hypersphere forms when it reaches 1.
    pub fn sup_r2_lambda(&self) -> f64 {
        self.grid
            .r()
            .iter()
            .zip(&self.lambda)
            .map(|(r, l)| r * r * l)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn check_len(grid: &RadialGrid, values: &[f64]) -> Result<(), GeometryError> {
    if values.len() == grid.len() {
        Ok(())
    } else {
        Err(GeometryError::LengthMismatch {
            expected: grid.len(),
            got: values.len(),
        })
    }
}

fn check_positive(f: &[f64]) -> Result<(), GeometryError> {
    match f.iter().position(|&v| !(v > 0.0)) {
        Some(node) => Err(GeometryError::NonpositiveMetric {
            node,
            value: f[node],
        }),
        None => Ok(()),
    }
}

/// Radial metric coefficient `f = (1 - r² λ)^(-1/2)`.
pub fn f_from_lambda(profile: &CurvatureProfile) -> Result<Vec<f64>, GeometryError> {
    let r = profile.grid.r();
    profile
        .lambda
        .iter()
        .zip(r)
        .enumerate()
        .map(|(node, (&l, &r))| {
            let margin = 1.0 - r * r * l;
            if margin > 0.0 {
                Ok(1.0 / margin.sqrt())
            } else {
                Err(GeometryError::MinimalSphereViolation { node, r, margin })
            }
        })
        .collect()
}

/// `λ = (1 - 1/f²) / r²`, with the origin value extrapolated from nodes 1 and 2
/// as an even function of `r`.
pub fn lambda_from_f(grid: &RadialGrid, f: &[f64]) -> Result<Vec<f64>, GeometryError> {
    check_len(grid, f)?;
    check_positive(f)?;
    let r = grid.r();
    let mut lambda: Vec<f64> = f
        .iter()
        .zip(r)
        .map(|(&f, &r)| {
            if r > 0.0 {
                (1.0 - 1.0 / (f * f)) / (r * r)
            } else {
                0.0
            }
        })
        .collect();
    lambda[0] = even_extrapolate_origin(grid, lambda[1], lambda[2]);
    Ok(lambda)
}

/// Radial sectional curvature through the Bianchi identity `κ = λ + (r/2) ∂λ/∂r`.
pub fn kappa_from_lambda(profile: &CurvatureProfile) -> Vec<f64> {
    let (lr, _) = radial_derivatives(&profile.grid, &profile.lambda);
    let r = profile.grid.r();
    let mut kappa: Vec<f64> = profile
        .lambda
        .iter()
        .zip(r)
        .zip(&lr)
        .map(|((&l, &r), &lr)| l + 0.5 * r * lr)
        .collect();
    kappa[0] = profile.lambda[0];
    kappa
}

/// Radial sectional curvature straight from the metric, `κ = f_r / (r f³)`.
/// `f_r` comes from stencils in `r` so that `f_r / r` stays second order
/// near the origin.
pub fn kappa_from_f(grid: &RadialGrid, f: &[f64]) -> Result<Vec<f64>, GeometryError> {
    check_len(grid, f)?;
    check_positive(f)?;
    let fr = radial_gradient_r(grid, f);
    let r = grid.r();
    let mut kappa: Vec<f64> = (0..grid.len())
        .map(|i| {
            if r[i] > 0.0 {
                fr[i] / (r[i] * f[i] * f[i] * f[i])
            } else {
                0.0
            }
        })
        .collect();
    kappa[0] = even_extrapolate_origin(grid, kappa[1], kappa[2]);
    Ok(kappa)
}

/// Mean curvature `H = (n-1)/(r f)` of the symmetry orbits. `H[0] = +∞`.
pub fn mean_curvature(grid: &RadialGrid, f: &[f64], n: usize) -> Result<Vec<f64>, GeometryError> {
    check_len(grid, f)?;
    check_positive(f)?;
    let k = (n - 1) as f64;
    Ok(grid
        .r()
        .iter()
        .zip(f)
        .map(|(&r, &f)| if r > 0.0 { k / (r * f) } else { f64::INFINITY })
        .collect())
}

/// Gauss–Codazzi residual `1/r² - λ - H²/(n-1)²` for the orbits.
///
/// The identity is algebraic, so the residual is pure rounding; its natural
/// scale is the largest of the three terms, `max(1/r², |λ|)`. Node 0 is
/// excluded and reported as 0.
pub fn gauss_codazzi_residual(profile: &CurvatureProfile) -> Result<Vec<f64>, GeometryError> {
    let n = profile.dimension;
    let f = f_from_lambda(profile)?;
    let h = mean_curvature(&profile.grid, &f, n)?;
    let k = (n - 1) as f64;
    Ok(profile
        .grid
        .r()
        .iter()
        .zip(&profile.lambda)
        .zip(&h)
        .map(|((&r, &l), &h)| {
            if r > 0.0 {
                1.0 / (r * r) - l - (h * h) / (k * k)
            } else {
                0.0
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmNorm {
    pub per_node: Vec<f64>,
    pub sup: f64,
}

/// Pointwise `|Rm + K|` from the two sectional curvatures.
pub fn rm_plus_k_from_curvatures(kappa: f64, lambda: f64, n: usize) -> f64 {
    let nf = n as f64;
    let dk = kappa + 1.0;
    let dl = lambda + 1.0;
    (4.0 * (nf - 1.0) * (dk * dk + 0.5 * (nf - 2.0) * dl * dl)).sqrt()
}

/// `|Rm + K|` at every node and its supremum, `κ` taken from [`kappa_from_lambda`].
pub fn rm_plus_k_norm(profile: &CurvatureProfile) -> RmNorm {
    let kappa = kappa_from_lambda(profile);
    let per_node: Vec<f64> = kappa
        .iter()
        .zip(&profile.lambda)
        .map(|(&k, &l)| rm_plus_k_from_curvatures(k, l, profile.dimension))
        .collect();
    let sup = per_node.iter().copied().fold(0.0, f64::max);
    RmNorm { per_node, sup }
}

/// Discrete radial Bianchi identity `r ∂λ/∂r - 2(κ - λ)` with `λ` and `κ` both
/// computed from `f` by their metric definitions.
pub fn bianchi_residual(
    grid: &RadialGrid,
    f: &[f64],
    _n: usize,
) -> Result<Vec<f64>, GeometryError> {
    let lambda = lambda_from_f(grid, f)?;
    let kappa = kappa_from_f(grid, f)?;
    let (lr, _) = radial_derivatives(grid, &lambda);
    Ok(grid
        .r()
        .iter()
        .zip(&lr)
        .zip(kappa.iter().zip(&lambda))
        .map(|((&r, &lr), (&k, &l))| r * lr - 2.0 * (k - l))
        .collect())
}

/// Radial component of the gauge vector field
/// `(1/f³) f_r + ((n-2)/r)(1 - 1/f²) + (n-1) r`, zero at the origin.
pub fn gauge_vector_field(
    grid: &RadialGrid,
    f: &[f64],
    n: usize,
) -> Result<Vec<f64>, GeometryError> {
    check_len(grid, f)?;
    check_positive(f)?;
    let (fr, _) = radial_derivatives(grid, f);
    let nf = n as f64;
    Ok(grid
        .r()
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            if r > 0.0 {
                let fi = f[i];
                fr[i] / (fi * fi * fi) + (nf - 2.0) / r * (1.0 - 1.0 / (fi * fi)) + (nf - 1.0) * r
            } else {
                0.0
            }
        })
        .collect())
}

/// Unnormalized Ricci-flow time `u(t) = (e^{2(n-1)t} - 1) / (2(n-1))`.
pub fn nrf_to_rf_time(t: f64, n: usize) -> f64 {
    let k = 2.0 * (n as f64 - 1.0);
    (k * t).exp_m1() / k
}
