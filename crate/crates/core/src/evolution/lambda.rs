//! The orbital curvature `λ` as a closed scalar PDE.
//!
//! Substituting `1/f² = 1 - r²λ` and `κ = λ + (r/2) λ_r` into the flow of `λ`
//! gives
//!
//! ```text
//! λ_t = (1 - r²λ) λ_rr + [(n+1)/r + (n-1) r - r λ] λ_r + (r²/2) λ_r²
//!       + 2(n-1) λ (λ + 1)
//! ```
//!
//! Term by term: the Laplacian contributes `(1 - r²λ) λ_rr` and
//! `[(n-1)(1 - r²λ)/r - r κ] λ_r`; the drift contributes
//! `[2/r + (n-1) r (λ+1)] λ_r`; the gradient term is `r² λ_r²`. Collecting,
//! `-r κ λ_r = -r λ λ_r - (r²/2) λ_r²` and the `r λ` pieces combine to the
//! displayed form. At `r = 0`, `λ_r / r → λ_rr` so the right side tends to
//! `(n+2) λ_rr + 2(n-1) λ (λ+1)`.

use super::lane_max;
use crate::error::GeometryError;
use crate::grid::RadialGrid;

/// Precomputed per-node coefficients of the discrete `λ` right-hand side.
#[derive(Debug, Clone)]
pub struct LambdaOperator {
    dimension: usize,
    inv_2dx: f64,
    inv_dx2: f64,
    s2: Vec<f64>,
    s4: Vec<f64>,
    two_s3: Vec<f64>,
    r: Vec<f64>,
    r2: Vec<f64>,
    drift: Vec<f64>,
    origin_lrr: f64,
    reaction: f64,
}

impl LambdaOperator {
    pub fn new(grid: &RadialGrid, dimension: usize) -> Self {
        Self::with_defect(grid, dimension, 0.0)
    }

    /// `defect` scales the reaction coefficient by `1 + defect`. Only for
    /// negative-control experiments.
    pub fn with_defect(grid: &RadialGrid, dimension: usize, defect: f64) -> Self {
        let dx = grid.spacing();
        let nf = dimension as f64;
        let s: Vec<f64> = grid.x().iter().map(|x| 1.0 - x).collect();
        let r = grid.r().to_vec();
        let drift = r
            .iter()
            .map(|&r| {
                if r > 0.0 {
                    (nf + 1.0) / r + (nf - 1.0) * r
                } else {
                    0.0
                }
            })
            .collect();
        Self {
            dimension,
            inv_2dx: 0.5 / dx,
            inv_dx2: 1.0 / (dx * dx),
            s2: s.iter().map(|s| s * s).collect(),
            s4: s.iter().map(|s| s * s * s * s).collect(),
            two_s3: s.iter().map(|s| 2.0 * s * s * s).collect(),
            r2: r.iter().map(|r| r * r).collect(),
            origin_lrr: 2.0 / (r[1] * r[1]),
            r,
            drift,
            reaction: 2.0 * (nf - 1.0) * (1.0 + defect),
        }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Evaluate the right-hand side into `out`. The last node is a Dirichlet
    /// node (`out = 0`). No admissibility check; see [`eval_checked`](Self::eval_checked).
    pub fn eval(&self, l: &[f64], out: &mut [f64]) {
        let n = self.len();
        assert!(
            l.len() == n && out.len() == n,
            "field length differs from grid"
        );
        let nf = self.dimension as f64;
        let m = n - 2;
        // Equal-length slices let the loop run without bounds checks.
        let (lm, lc, lp) = (&l[..m], &l[1..=m], &l[2..]);
        let (s2, s4, two_s3) = (&self.s2[1..=m], &self.s4[1..=m], &self.two_s3[1..=m]);
        let (r, r2, drift) = (&self.r[1..=m], &self.r2[1..=m], &self.drift[1..=m]);
        let dst = &mut out[1..=m];
        let (inv_2dx, inv_dx2, reaction) = (self.inv_2dx, self.inv_dx2, self.reaction);
        for i in 0..m {
            let li = lc[i];
            let lx = (lp[i] - lm[i]) * inv_2dx;
            let lxx = (lp[i] - 2.0 * li + lm[i]) * inv_dx2;
            let lr = s2[i] * lx;
            let lrr = s4[i] * lxx - two_s3[i] * lx;
            let q = 1.0 - r2[i] * li;
            dst[i] = q * lrr
                + (drift[i] - r[i] * li) * lr
                + 0.5 * r2[i] * lr * lr
                + reaction * li * (li + 1.0);
        }
        let l0 = l[0];
        out[0] = (nf + 2.0) * self.origin_lrr * (l[1] - l0) + reaction * l0 * (l0 + 1.0);
        out[n - 1] = 0.0;
    }

    /// Smallest `1 - r²λ` over all nodes, i.e. `1 - sup r²λ`.
    pub fn min_margin(&self, l: &[f64]) -> f64 {
        1.0 - lane_max(l.len(), |i| self.r2[i] * l[i])
    }

    /// Like [`eval`](Self::eval) but fails on a minimal hypersphere.
    pub fn eval_checked(&self, l: &[f64], out: &mut [f64]) -> Result<(), GeometryError> {
        self.eval(l, out);
        if self.min_margin(l) > 0.0 {
            return Ok(());
        }
        let (node, margin) = l
            .iter()
            .zip(&self.r2)
            .map(|(l, r2)| 1.0 - r2 * l)
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |acc, (i, q)| if q < acc.1 { (i, q) } else { acc },
            );
        Err(GeometryError::MinimalSphereViolation {
            node,
            r: self.r[node],
            margin,
        })
    }

    /// Effective diffusion `(1 - r²λ)(1 - x)⁴` maximised over nodes.
    pub fn max_diffusion(&self, l: &[f64]) -> f64 {
        lane_max(l.len(), |i| (1.0 - self.r2[i] * l[i]) * self.s4[i]).max(0.0)
    }

    pub fn impose_boundary(l: &mut [f64]) {
        if let Some(last) = l.last_mut() {
            *last = -1.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::radial_derivatives;

    fn grid(n: usize) -> RadialGrid {
        RadialGrid::new(n).unwrap()
    }

    #[test]
    fn fixed_points_have_zero_rhs() {
        let g = grid(64);
        let op = LambdaOperator::new(&g, 3);
        let mut out = vec![1.0; 64];
        for c in [-1.0, 0.0] {
            let mut l = vec![c; 64];
            LambdaOperator::impose_boundary(&mut l);
            if c == 0.0 {
                // Dirichlet node aside, λ ≡ 0 is stationary.
                l[63] = 0.0;
            }
            op.eval(&l, &mut out);
            assert!(out.iter().all(|&v| v == 0.0), "c = {c}");
        }
    }

    #[test]
    fn constant_minus_half() {
        let g = grid(32);
        let op = LambdaOperator::new(&g, 3);
        let l = vec![-0.5; 32];
        let mut out = vec![0.0; 32];
        op.eval(&l, &mut out);
        for v in &out[..31] {
            assert!((v + 1.0).abs() < 1e-14);
        }
    }

    /// Evaluate the four invariant terms of the λ flow directly (Laplacian,
    /// drift, gradient square, reaction) with `f` and `κ` built from their
    /// own definitions, and compare with the reduced operator.
    #[test]
    fn reduction_matches_direct_terms() {
        let g = grid(1024);
        let n = 4;
        let nf = n as f64;
        let lam: Vec<f64> = g
            .r()
            .iter()
            .map(|r| -1.0 + 0.7 * (-(r * r) / 1.5).exp())
            .collect();
        let op = LambdaOperator::new(&g, n);
        let mut out = vec![0.0; g.len()];
        op.eval(&lam, &mut out);
        let (lr, lrr) = radial_derivatives(&g, &lam);
        let r = g.r();
        for i in (1..g.len() - 1).step_by(7) {
            let ri = r[i];
            let f2 = 1.0 / (1.0 - ri * ri * lam[i]);
            let f = f2.sqrt();
            let kappa = lam[i] + 0.5 * ri * lr[i];
            // Δλ = λ_rr/f² + (n-1) λ_r/(r f²) - f_r λ_r / f³ with f_r/f³ = r κ.
            let laplacian = lrr[i] / f2 + (nf - 1.0) * lr[i] / (ri * f2) - ri * kappa * lr[i];
            let z = (2.0 / ri + (nf - 1.0) * ri * (lam[i] + 1.0)) * f2;
            let drift = z * lr[i] / f2;
            let grad = ri * ri * f2 * (lr[i] / f) * (lr[i] / f);
            let reaction = 2.0 * (nf - 1.0) * lam[i] * (lam[i] + 1.0);
            let direct = laplacian + drift + grad + reaction;
            assert!(
                (direct - out[i]).abs() <= 1e-10 * (1.0 + direct.abs()),
                "node {i}: {direct} vs {}",
                out[i]
            );
        }
    }

    #[test]
    fn checked_eval_reports_minimal_sphere() {
        let g = grid(32);
        let op = LambdaOperator::new(&g, 3);
        let mut out = vec![0.0; 32];
        assert!(matches!(
            op.eval_checked(&vec![2.0; 32], &mut out),
            Err(GeometryError::MinimalSphereViolation { .. })
        ));
    }

    #[test]
    fn diffusion_is_bounded_on_hyperbolic_data() {
        let g = grid(256);
        let op = LambdaOperator::new(&g, 3);
        let d = op.max_diffusion(&vec![-1.0; 256]);
        assert_eq!(d, 1.0);
    }
}
