//! Independent solver for `w = f²` on a truncated, uniform `r` grid.
//!
//! Expanding the Laplacian and the gauge term with `f = √w`:
//!
//! ```text
//! w_t = w_rr / w - (3 / (2w²)) w_r² + [(n-2)/r - 1/(r w) + (n-1) r] w_r
//!       - 2(n-2)(w - 1)/r²
//! ```
//!
//! `w` is even in `r` with `w(0) = 1`; the far end is pinned to the
//! hyperbolic value `1/(1 + R²)`. Interior stencils are fourth order with
//! mirror ghosts at the origin, dropping to second order next to `R`.

use super::lane_max;
use crate::error::GeometryError;

/// Uniform nodes `r_i = i h` on `[0, R]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedGrid {
    r: Vec<f64>,
    spacing: f64,
}

impl TruncatedGrid {
    pub const MIN_SIZE: usize = 16;

    pub fn new(radius: f64, nodes: usize) -> Result<Self, GeometryError> {
        if nodes < Self::MIN_SIZE {
            return Err(GeometryError::GridTooSmall {
                size: nodes,
                min: Self::MIN_SIZE,
            });
        }
        assert!(
            radius > 0.0 && radius.is_finite(),
            "radius must be positive"
        );
        let spacing = radius / (nodes - 1) as f64;
        let r = (0..nodes).map(|i| i as f64 * spacing).collect();
        Ok(Self { r, spacing })
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn radius(&self) -> f64 {
        self.r[self.r.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// Cubic Lagrange interpolation; `None` outside `[0, R]`.
    pub fn interpolate(&self, values: &[f64], r: f64) -> Option<f64> {
        let n = self.len();
        if !(0.0..=self.radius()).contains(&r) {
            return None;
        }
        let s = r / self.spacing;
        let base = (s.floor() as usize).saturating_sub(1).min(n - 4);
        let mut acc = 0.0;
        for j in 0..4 {
            let mut w = 1.0;
            for k in 0..4 {
                if k != j {
                    w *= (s - (base + k) as f64) / (j as f64 - k as f64);
                }
            }
            acc += w * values[base + j];
        }
        Some(acc)
    }
}

/// Hyperbolic boundary value `1/(1 + R²)`.
pub fn hyperbolic_w(r: f64) -> f64 {
    1.0 / (1.0 + r * r)
}

/// `w = 1/(1 - r²λ)` sampled from a curvature function.
pub fn w_from_lambda_fn(grid: &TruncatedGrid, lambda: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut w: Vec<f64> = grid
        .r()
        .iter()
        .map(|&r| 1.0 / (1.0 - r * r * lambda(r)))
        .collect();
    WOperator::impose(grid, &mut w);
    w
}

/// `λ = (1 - 1/w)/r²`, origin by even quadratic extrapolation.
pub fn lambda_from_w(grid: &TruncatedGrid, w: &[f64]) -> Vec<f64> {
    let mut l: Vec<f64> = grid
        .r()
        .iter()
        .zip(w)
        .map(|(&r, &w)| {
            if r > 0.0 {
                (1.0 - 1.0 / w) / (r * r)
            } else {
                0.0
            }
        })
        .collect();
    l[0] = (4.0 * l[1] - l[2]) / 3.0;
    l
}

#[derive(Debug, Clone)]
pub struct WOperator {
    dimension: usize,
    inv_r: Vec<f64>,
    inv_r2: Vec<f64>,
    /// `(n-2)/r + (n-1) r`, the `w`-independent part of the drift.
    drift: Vec<f64>,
    inv_h: f64,
    inv_h2: f64,
}

impl WOperator {
    pub fn new(grid: &TruncatedGrid, dimension: usize) -> Self {
        let h = grid.spacing();
        let nf = dimension as f64;
        let inv = |r: f64| if r > 0.0 { 1.0 / r } else { 0.0 };
        Self {
            dimension,
            inv_r: grid.r().iter().map(|&r| inv(r)).collect(),
            inv_r2: grid.r().iter().map(|&r| inv(r * r)).collect(),
            drift: grid
                .r()
                .iter()
                .map(|&r| (nf - 2.0) * inv(r) + (nf - 1.0) * r)
                .collect(),
            inv_h: 1.0 / h,
            inv_h2: 1.0 / (h * h),
        }
    }

    pub fn impose(grid: &TruncatedGrid, w: &mut [f64]) {
        let last = w.len() - 1;
        w[0] = 1.0;
        w[last] = hyperbolic_w(grid.radius());
    }

    #[inline(always)]
    fn point(&self, i: usize, wi: f64, wr: f64, wrr: f64) -> f64 {
        let nf = self.dimension as f64;
        let iw = 1.0 / wi;
        let b = self.drift[i] - self.inv_r[i] * iw;
        iw * (wrr - 1.5 * wr * wr * iw) + b * wr - 2.0 * (nf - 2.0) * (wi - 1.0) * self.inv_r2[i]
    }

    /// Right-hand side with Dirichlet rows zeroed. Returns `min w`.
    pub fn eval(&self, w: &[f64], out: &mut [f64]) -> f64 {
        let m = self.inv_r.len();
        assert!(
            w.len() == m && out.len() == m,
            "field length differs from grid"
        );
        let (ih, ih2) = (self.inv_h / 12.0, self.inv_h2 / 12.0);
        let d1 = |a: f64, b: f64, d: f64, e: f64| (8.0 * (d - b) - (e - a)) * ih;
        let d2 =
            |a: f64, b: f64, c: f64, d: f64, e: f64| (16.0 * (d + b) - 30.0 * c - (e + a)) * ih2;
        // Node 1 reaches the mirror ghost w(-h) = w(h).
        out[1] = self.point(
            1,
            w[1],
            d1(w[1], w[0], w[2], w[3]),
            d2(w[1], w[0], w[1], w[2], w[3]),
        );
        for i in 2..m - 2 {
            let (a, b, c, d, e) = (w[i - 2], w[i - 1], w[i], w[i + 1], w[i + 2]);
            out[i] = self.point(i, c, d1(a, b, d, e), d2(a, b, c, d, e));
        }
        let i = m - 2;
        let wr = 0.5 * (w[i + 1] - w[i - 1]) * self.inv_h;
        let wrr = (w[i + 1] - 2.0 * w[i] + w[i - 1]) * self.inv_h2;
        out[i] = self.point(i, w[i], wr, wrr);
        out[0] = 0.0;
        out[m - 1] = 0.0;
        -lane_max(m, |i| -w[i])
    }

    pub fn eval_checked(&self, w: &[f64], out: &mut [f64]) -> Result<(), GeometryError> {
        if self.eval(w, out) > 0.0 {
            return Ok(());
        }
        let node = w
            .iter()
            .enumerate()
            .fold(0, |best, (i, &v)| if v < w[best] { i } else { best });
        Err(GeometryError::NonpositiveMetric {
            node,
            value: w[node],
        })
    }

    /// Largest diffusion coefficient `1/w`.
    pub fn max_diffusion(&self, w: &[f64]) -> f64 {
        lane_max(w.len(), |i| 1.0 / w[i]).max(0.0)
    }
}

/// One-shot evaluation of `∂w/∂t`.
pub fn rhs_w(grid: &TruncatedGrid, w: &[f64], n: usize) -> Result<Vec<f64>, GeometryError> {
    if w.len() != grid.len() {
        return Err(GeometryError::LengthMismatch {
            expected: grid.len(),
            got: w.len(),
        });
    }
    if n < 3 {
        return Err(GeometryError::Dimension(n));
    }
    let mut out = vec![0.0; w.len()];
    WOperator::new(grid, n).eval_checked(w, &mut out)?;
    Ok(out)
}
