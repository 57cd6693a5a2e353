//! Compactified radial grid.
//!
//! Nodes are uniform in `x = r / (1 + r)`, which maps the half line `[0, ∞)`
//! onto `[0, 1)`. Node `i` sits at `x = i / N`, so the node that would land on
//! `x = 1` (spatial infinity) is never stored and grids of size `N` and `2N`
//! share every coarse node exactly.

use crate::error::GeometryError;

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    x: Vec<f64>,
    r: Vec<f64>,
    spacing: f64,
}

impl RadialGrid {
    pub const MIN_SIZE: usize = 16;

    pub fn new(size: usize) -> Result<Self, GeometryError> {
        if size < Self::MIN_SIZE {
            return Err(GeometryError::GridTooSmall {
                size,
                min: Self::MIN_SIZE,
            });
        }
        let n = size as f64;
        let x: Vec<f64> = (0..size).map(|i| i as f64 / n).collect();
        let r = x.iter().map(|&x| x_to_r(x)).collect();
        Ok(Self {
            x,
            r,
            spacing: 1.0 / n,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    /// Uniform spacing Δx of the compactified coordinate.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn last(&self) -> usize {
        self.len() - 1
    }

    /// The grid with twice as many nodes; node `i` here is node `2i` there.
    pub fn refined(&self) -> Self {
        Self::new(2 * self.len()).expect("refining a valid grid")
    }

    /// `dr/dx`-inverse factor `(1 - x)^2`, i.e. `∂/∂r = (1 - x)^2 ∂/∂x`.
    pub fn chain_factor(&self, i: usize) -> f64 {
        let s = 1.0 - self.x[i];
        s * s
    }

    /// Four-point Lagrange interpolation of nodal values at area radius `r`.
    ///
    /// Returns `None` beyond the last node.
    pub fn interpolate(&self, values: &[f64], r: f64) -> Option<f64> {
        debug_assert_eq!(values.len(), self.len());
        if !(r >= 0.0) {
            return None;
        }
        let x = r_to_x(r);
        let pos = x / self.spacing;
        let last = self.last();
        if pos > last as f64 {
            return None;
        }
        let base = (pos.floor() as usize).saturating_sub(1).min(last - 3);
        let mut acc = 0.0;
        for j in 0..4 {
            let mut weight = 1.0;
            for k in 0..4 {
                if k != j {
                    weight *= (pos - (base + k) as f64) / (j as f64 - k as f64);
                }
            }
            acc += weight * values[base + j];
        }
        Some(acc)
    }
}

pub fn x_to_r(x: f64) -> f64 {
    x / (1.0 - x)
}

pub fn r_to_x(r: f64) -> f64 {
    r / (1.0 + r)
}

/// First and second `r`-derivatives of a nodal field that is an even function
/// of `r`.
///
/// Interior nodes use centred second-order differences in `x` followed by the
/// chain rule. At the origin the ghost value `u(-r₁) = u(r₁)` gives
/// `u_r = 0` and `u_rr = 2 (u₁ - u₀) / r₁²`. The last node uses one-sided
/// second-order differences.
pub fn radial_derivatives(grid: &RadialGrid, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = grid.len();
    debug_assert_eq!(u.len(), n);
    let dx = grid.spacing();
    let x = grid.x();
    let r = grid.r();
    let mut ur = vec![0.0; n];
    let mut urr = vec![0.0; n];

    urr[0] = 2.0 * (u[1] - u[0]) / (r[1] * r[1]);
    for i in 1..n - 1 {
        let ux = (u[i + 1] - u[i - 1]) / (2.0 * dx);
        let uxx = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (dx * dx);
        let s = 1.0 - x[i];
        ur[i] = s * s * ux;
        urr[i] = s * s * s * s * uxx - 2.0 * s * s * s * ux;
    }
    let l = n - 1;
    let ux = (3.0 * u[l] - 4.0 * u[l - 1] + u[l - 2]) / (2.0 * dx);
    let uxx = (2.0 * u[l] - 5.0 * u[l - 1] + 4.0 * u[l - 2] - u[l - 3]) / (dx * dx);
    let s = 1.0 - x[l];
    ur[l] = s * s * ux;
    urr[l] = s * s * s * s * uxx - 2.0 * s * s * s * ux;
    (ur, urr)
}

/// First `r`-derivative of an even field, second order everywhere including
/// quotients `u_r / r`.
///
/// The `x` stencils of [`radial_derivatives`] carry an `O(Δx²)` error that
/// does not vanish at the origin, so `u_r / r` degrades to first order there.
/// For `r ≤ 1` this uses three-point stencils in `r` itself (nonuniform
/// spacing, exact for quadratics in `r`, error `∝ r` for even fields) and
/// falls back to the `x` stencils further out, where fields are smooth in `x`
/// but not polynomial in `r`.
pub fn radial_gradient_r(grid: &RadialGrid, u: &[f64]) -> Vec<f64> {
    let (mut ur, _) = radial_derivatives(grid, u);
    let r = grid.r();
    for i in 1..grid.len() - 1 {
        if r[i] > 1.0 {
            break;
        }
        let (hm, hp) = (r[i] - r[i - 1], r[i + 1] - r[i]);
        ur[i] = (hm * hm * (u[i + 1] - u[i]) + hp * hp * (u[i] - u[i - 1])) / (hm * hp * (hm + hp));
    }
    ur
}

/// Value at the origin of an even function of `r`, extrapolated from nodes 1
/// and 2 with `u ≈ a + b r²`.
pub fn even_extrapolate_origin(grid: &RadialGrid, u1: f64, u2: f64) -> f64 {
    let r1 = grid.r()[1];
    let r2 = grid.r()[2];
    let (s1, s2) = (r1 * r1, r2 * r2);
    (s2 * u1 - s1 * u2) / (s2 - s1)
}
