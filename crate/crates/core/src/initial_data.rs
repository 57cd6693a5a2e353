//! Initial curvature profiles and their admissibility.

use std::fmt;
use std::sync::Arc;

use crate::error::InitialDataError;
use crate::geometry::CurvatureProfile;
use crate::grid::RadialGrid;

/// Absolute tolerance separating "sup λ = 0" from "sup λ < 0".
pub const TOUCH_ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Hyperbolic,
    /// `λ = -1 + A [g(r - r₀) + g(r + r₀)] / (1 + g(2 r₀))` with
    /// `g(s) = exp(-s²/σ²)`; even in `r` and equal to `-1 + A` at `r₀`.
    GaussianBump,
    /// `λ = -1 + A (1 + (r/σ)²)^(-2)`.
    PolynomialBump,
    /// Monotone cubic interpolation of tabulated `(r, λ)` pairs, held
    /// constant past the last row.
    CustomTable(CurveTable),
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Hyperbolic => "hyperbolic",
            Family::GaussianBump => "gaussian_bump",
            Family::PolynomialBump => "polynomial_bump",
            Family::CustomTable(_) => "custom_table",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialDataSpec {
    pub family: Family,
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    pub dimension: usize,
}

impl InitialDataSpec {
    pub fn hyperbolic(dimension: usize) -> Self {
        Self {
            family: Family::Hyperbolic,
            amplitude: 0.0,
            center: 0.0,
            width: 1.0,
            dimension,
        }
    }

    pub fn gaussian(amplitude: f64, center: f64, width: f64, dimension: usize) -> Self {
        Self {
            family: Family::GaussianBump,
            amplitude,
            center,
            width,
            dimension,
        }
    }

    pub fn polynomial(amplitude: f64, width: f64, dimension: usize) -> Self {
        Self {
            family: Family::PolynomialBump,
            amplitude,
            center: 0.0,
            width,
            dimension,
        }
    }

    pub fn check(&self) -> Result<(), InitialDataError> {
        if !(self.width > 0.0) || !self.width.is_finite() {
            return Err(InitialDataError::InvalidSpec(format!(
                "width must be positive, got {}",
                self.width
            )));
        }
        if self.dimension < 3 {
            return Err(InitialDataError::InvalidSpec(format!(
                "dimension must be at least 3, got {}",
                self.dimension
            )));
        }
        if !(self.center >= 0.0) || !self.center.is_finite() {
            return Err(InitialDataError::InvalidSpec(format!(
                "center must be nonnegative, got {}",
                self.center
            )));
        }
        if !self.amplitude.is_finite() {
            return Err(InitialDataError::InvalidSpec(
                "amplitude is not finite".into(),
            ));
        }
        Ok(())
    }

    /// The closed-form profile `λ(r)`.
    pub fn evaluate(&self, r: f64) -> f64 {
        let (a, s) = (self.amplitude, self.width);
        match &self.family {
            Family::Hyperbolic => -1.0,
            Family::GaussianBump => {
                let g = |u: f64| (-(u * u) / (s * s)).exp();
                let c = self.center;
                -1.0 + a * (g(r - c) + g(r + c)) / (1.0 + g(2.0 * c))
            }
            Family::PolynomialBump => {
                let q = 1.0 + (r / s) * (r / s);
                -1.0 + a / (q * q)
            }
            Family::CustomTable(table) => table.evaluate(r),
        }
    }
}

/// Tabulated `(r, λ)` data with a Fritsch–Carlson monotone cubic interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveTable {
    r: Vec<f64>,
    lambda: Vec<f64>,
    slopes: Vec<f64>,
}

impl CurveTable {
    pub fn new(r: Vec<f64>, lambda: Vec<f64>) -> Result<Self, InitialDataError> {
        if r.len() != lambda.len() || r.len() < 2 {
            return Err(InitialDataError::InvalidSpec(
                "table needs at least two (r, lambda) rows".into(),
            ));
        }
        if r[0] != 0.0 {
            return Err(InitialDataError::InvalidSpec(format!(
                "table must start at r = 0, starts at {}",
                r[0]
            )));
        }
        if let Some(i) = r.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(InitialDataError::InvalidSpec(format!(
                "table radii must be strictly increasing (row {})",
                i + 2
            )));
        }
        if lambda.iter().any(|v| !v.is_finite()) {
            return Err(InitialDataError::InvalidSpec(
                "table contains non-finite lambda".into(),
            ));
        }
        let slopes = pchip_slopes(&r, &lambda);
        Ok(Self { r, lambda, slopes })
    }

    /// Parse two-column `r,lambda` CSV text. A non-numeric first line is
    /// treated as a header.
    pub fn parse_csv(text: &str) -> Result<Self, InitialDataError> {
        let mut r = Vec::new();
        let mut lambda = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed = match cols.as_slice() {
                [a, b] => a.parse::<f64>().ok().zip(b.parse::<f64>().ok()),
                _ => None,
            };
            match parsed {
                Some((a, b)) => {
                    r.push(a);
                    lambda.push(b);
                }
                None if r.is_empty() && lineno == 0 => continue,
                None => {
                    return Err(InitialDataError::InvalidSpec(format!(
                        "table line {}: expected `r,lambda`",
                        lineno + 1
                    )))
                }
            }
        }
        Self::new(r, lambda)
    }

    pub fn evaluate(&self, r: f64) -> f64 {
        let last = self.r.len() - 1;
        if r >= self.r[last] {
            return self.lambda[last];
        }
        let k = match self.r.partition_point(|&v| v <= r) {
            0 => 0,
            p => p - 1,
        };
        let h = self.r[k + 1] - self.r[k];
        let t = (r - self.r[k]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.lambda[k]
            + h10 * h * self.slopes[k]
            + h01 * self.lambda[k + 1]
            + h11 * h * self.slopes[k + 1]
    }
}

fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    let mut d = vec![0.0; n];
    if n == 2 {
        d[0] = delta[0];
        d[1] = delta[0];
        return d;
    }
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    // The profile is even in r, so the slope at the origin is zero.
    d[0] = 0.0;
    let (h0, h1, d0, d1) = (h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    d[n - 1] = if s * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && s.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        s
    };
    d
}

/// Sample the spec on the grid, refusing profiles that contain a minimal
/// hypersphere.
pub fn build_profile(
    spec: &InitialDataSpec,
    grid: Arc<RadialGrid>,
) -> Result<CurvatureProfile, InitialDataError> {
    spec.check()?;
    let profile = CurvatureProfile::from_fn(grid, spec.dimension, |r| spec.evaluate(r))?;
    let sup = profile.sup_r2_lambda();
    if !(sup < 1.0) {
        return Err(InitialDataError::InadmissibleSpec { sup_r2_lambda: sup });
    }
    Ok(profile)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// sup λ ≤ -1
    StrictlyBelowMinusOne,
    /// -1 < sup λ < 0
    StrictlyNegative,
    /// sup λ = 0 (within [`TOUCH_ZERO_TOL`])
    Nonpositive,
    /// λ somewhere positive
    SignIndefinite,
}

impl Regime {
    pub fn classify(sup_lambda: f64) -> Self {
        if sup_lambda <= -1.0 + TOUCH_ZERO_TOL {
            Regime::StrictlyBelowMinusOne
        } else if sup_lambda < -TOUCH_ZERO_TOL {
            Regime::StrictlyNegative
        } else if sup_lambda <= TOUCH_ZERO_TOL {
            Regime::Nonpositive
        } else {
            Regime::SignIndefinite
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Regime::StrictlyBelowMinusOne => "strictly_below_minus_one",
            Regime::StrictlyNegative => "strictly_negative",
            Regime::Nonpositive => "nonpositive",
            Regime::SignIndefinite => "sign_indefinite",
        }
    }

    /// Whether λ₀ ≤ 0 everywhere.
    pub fn is_nonpositive(&self) -> bool {
        !matches!(self, Regime::SignIndefinite)
    }

    /// Whether λ₀ < 0 everywhere.
    pub fn is_negative(&self) -> bool {
        matches!(
            self,
            Regime::StrictlyBelowMinusOne | Regime::StrictlyNegative
        )
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationTolerances {
    /// Parity tolerance is `parity_coeff · Δx`.
    pub parity_coeff: f64,
    pub tail_tol: f64,
}

impl Default for ValidationTolerances {
    fn default() -> Self {
        Self {
            parity_coeff: 1.0,
            tail_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub admissible: bool,
    pub regime: Regime,
    pub sup_lambda: f64,
    pub sup_r2_lambda: f64,
    pub parity_defect: f64,
    pub tail_defect: f64,
}

pub fn validate(profile: &CurvatureProfile) -> ValidationReport {
    validate_with(profile, &ValidationTolerances::default())
}

pub fn validate_with(profile: &CurvatureProfile, tol: &ValidationTolerances) -> ValidationReport {
    let l = profile.lambda();
    let dx = profile.grid().spacing();
    let sup_lambda = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sup_r2_lambda = profile.sup_r2_lambda();
    let parity_defect = ((-3.0 * l[0] + 4.0 * l[1] - l[2]) / (2.0 * dx)).abs();
    let tail_defect = (l[l.len() - 1] + 1.0).abs();
    let finite = l.iter().all(|v| v.is_finite());
    let admissible = finite
        && sup_r2_lambda < 1.0
        && parity_defect <= tol.parity_coeff * dx
        && tail_defect <= tol.tail_tol;
    ValidationReport {
        admissible,
        regime: Regime::classify(sup_lambda),
        sup_lambda,
        sup_r2_lambda,
        parity_defect,
        tail_defect,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::f_from_lambda;

    fn grid(n: usize) -> Arc<RadialGrid> {
        Arc::new(RadialGrid::new(n).unwrap())
    }

    #[test]
    fn hyperbolic_profile_is_clean() {
        let p = build_profile(&InitialDataSpec::hyperbolic(3), grid(64)).unwrap();
        assert!(p.lambda().iter().all(|&v| v == -1.0));
        let rep = validate(&p);
        assert!(rep.admissible);
        assert_eq!(rep.regime, Regime::StrictlyBelowMinusOne);
        assert!(rep.parity_defect <= 1e-14 && rep.tail_defect <= 1e-14);
        assert_eq!(rep.sup_r2_lambda, 0.0);
    }

    #[test]
    fn negative_gaussian_bump() {
        let p = build_profile(&InitialDataSpec::gaussian(-0.5, 0.0, 1.0, 3), grid(128)).unwrap();
        assert!((p.lambda()[0] + 1.5).abs() < 1e-15);
        assert!(p.lambda().iter().all(|&v| v <= -1.0));
        assert_eq!(validate(&p).regime, Regime::StrictlyBelowMinusOne);
    }

    #[test]
    fn off_centre_bump_peaks_at_its_centre() {
        let spec = InitialDataSpec::gaussian(1.2, 2.0, 0.3, 3);
        assert!((spec.evaluate(2.0) - 0.2).abs() < 1e-14);
        assert!((spec.evaluate(0.5) - spec.evaluate(-0.5)).abs() < 1e-15);
    }

    #[test]
    fn sign_indefinite_bump_admissibility_matches_scan() {
        let g = grid(4096);
        let spec = InitialDataSpec::gaussian(1.2, 2.0, 0.3, 3);
        let scan = g
            .r()
            .iter()
            .map(|&r| r * r * spec.evaluate(r))
            .fold(f64::NEG_INFINITY, f64::max);
        let built = build_profile(&spec, g);
        assert_eq!(built.is_ok(), scan < 1.0, "scan = {scan}");
        if let Ok(p) = built {
            assert_eq!(validate(&p).regime, Regime::SignIndefinite);
        }
    }

    #[test]
    fn positive_constant_is_inadmissible() {
        let p = CurvatureProfile::new(grid(16), vec![2.0; 16], 3).unwrap();
        let rep = validate(&p);
        assert!(!rep.admissible);
        assert!(rep.sup_r2_lambda >= 2.0);
        assert!(f_from_lambda(&p).is_err());
    }

    #[test]
    fn touching_zero_is_nonpositive() {
        // Peak value exactly 0 at r = 1.
        let spec = InitialDataSpec::gaussian(1.0, 1.0, 0.5, 3);
        let p = build_profile(&spec, grid(256)).unwrap();
        let max = p.lambda().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(max.abs() < 1e-12);
        assert_eq!(validate(&p).regime, Regime::Nonpositive);
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = InitialDataSpec::gaussian(0.1, 0.0, -1.0, 3);
        assert!(matches!(
            build_profile(&s, grid(16)),
            Err(InitialDataError::InvalidSpec(_))
        ));
        s.width = 1.0;
        s.dimension = 2;
        assert!(build_profile(&s, grid(16)).is_err());
    }

    #[test]
    fn build_rejects_minimal_sphere() {
        let spec = InitialDataSpec::gaussian(3.0, 2.0, 0.5, 3);
        assert!(matches!(
            build_profile(&spec, grid(256)),
            Err(InitialDataError::InadmissibleSpec { .. })
        ));
    }

    #[test]
    fn odd_profile_fails_parity() {
        let g = grid(64);
        let p = CurvatureProfile::from_fn(g, 3, |r| -1.0 + 0.5 * r * (-r * r).exp()).unwrap();
        assert!(!validate(&p).admissible);
    }

    #[test]
    fn table_reproduces_sampled_profile() {
        let spec = InitialDataSpec::polynomial(0.3, 1.0, 3);
        let r: Vec<f64> = (0..=400).map(|i| i as f64 * 0.05).collect();
        let lam: Vec<f64> = r.iter().map(|&r| spec.evaluate(r)).collect();
        let mut text = String::from("r,lambda\n");
        for (a, b) in r.iter().zip(&lam) {
            text.push_str(&format!("{a},{b}\n"));
        }
        let table = CurveTable::parse_csv(&text).unwrap();
        for k in 0..200 {
            let x = k as f64 * 0.0731;
            assert!(
                (table.evaluate(x) - spec.evaluate(x)).abs() < 1e-4,
                "r = {x}"
            );
        }
        // Monotone data stays monotone between knots.
        let mut prev = table.evaluate(0.0);
        for k in 1..1000 {
            let v = table.evaluate(k as f64 * 0.02);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn table_rejects_bad_rows() {
        assert!(CurveTable::parse_csv("r,lambda\n0.1,-1\n0.2,-1\n").is_err());
        assert!(CurveTable::parse_csv("0,-1\n0.5,-1\n0.5,-1\n").is_err());
        assert!(CurveTable::parse_csv("0,-1\nfoo\n").is_err());
    }

    #[test]
    fn regime_is_stable_under_refinement() {
        let specs = [
            InitialDataSpec::gaussian(-0.5, 0.0, 1.0, 3),
            InitialDataSpec::gaussian(0.5, 0.0, 1.0, 3),
            InitialDataSpec::polynomial(0.3, 1.0, 3),
            InitialDataSpec::gaussian(1.2, 2.0, 0.3, 3),
        ];
        for spec in &specs {
            let a = build_profile(spec, grid(128)).map(|p| validate(&p).regime);
            let b = build_profile(spec, grid(256)).map(|p| validate(&p).regime);
            assert_eq!(a.ok(), b.ok(), "{spec:?}");
        }
    }
}
