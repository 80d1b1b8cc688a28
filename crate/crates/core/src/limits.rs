//! Limiting covariance, variance, rescaling slope and characteristic function
//! of √n φ°_jj(M).
//!
//! With ⟨g⟩ = ∫ g ρ_sc and the projections
//! a[φ] = w⁻² ⟨φ(λ)λ⟩ and b[φ] = w⁻⁴ ⟨φ(λ)(w² − λ²)⟩:
//!
//! - GOE part: 2(⟨φ₁φ₂⟩ − ⟨φ₁⟩⟨φ₂⟩)
//! - fourth-cumulant part: κ₄ b[φ₁] b[φ₂]
//! - diagonal part: (w₂ − 2) w² a[φ₁] a[φ₂]
//! - x* = √w₂ a[φ] x.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::digest::fingerprint_hex;
use crate::ensemble::{entry_cf, EnsembleSpec};
use crate::error::{Error, Result};
use crate::semicircle::{sc_integral, sc_moment, QuadratureRule, DEFAULT_NODES};
use crate::testfn::{Parity, TestFunction};

/// Variances in (−NEGATIVE_VARIANCE_SLACK, 0) are rounding noise and clip to 0.
pub const NEGATIVE_VARIANCE_SLACK: f64 = 1e-12;

/// The asymptotic answers for one (φ, ensemble) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitPrediction {
    pub v_goe: f64,
    pub kappa4_term: f64,
    pub diag_term: f64,
    pub v_w: f64,
    /// s in x* = s·x.
    pub xstar_slope: f64,
    /// Limiting CF as [x, re, im] rows.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cf: Vec<[f64; 3]>,
    pub ensemble_ref: String,
    pub phi_ref: String,
}

fn mean(phi: &TestFunction, w: f64) -> Result<f64> {
    match phi.as_polynomial() {
        Some(c) => Ok(poly_moment(c, 0, w)),
        None => sc_integral(phi, w, DEFAULT_NODES),
    }
}

/// ⟨λ^shift Σ c_k λ^k⟩ from the exact semicircle moments.
fn poly_moment(c: &[f64], shift: usize, w: f64) -> f64 {
    c.iter().enumerate().map(|(k, &ck)| ck * sc_moment(k + shift, w)).sum()
}

/// a[φ] = w⁻² ∫ φ(μ) μ ρ_sc dμ; zero for even φ.
pub fn slope_projection(phi: &TestFunction, w: f64) -> Result<f64> {
    if phi.parity() == Parity::Even {
        return Ok(0.0);
    }
    if let Some(c) = phi.as_polynomial() {
        return Ok(poly_moment(c, 1, w) / (w * w));
    }
    crate::semicircle::check_coverage(phi, w)?;
    Ok(QuadratureRule::new(w, DEFAULT_NODES).integrate(|x| phi.eval(x) * x) / (w * w))
}

/// b[φ] = w⁻⁴ ∫ φ(λ)(w² − λ²) ρ_sc dλ; zero for odd φ.
pub fn kappa4_projection(phi: &TestFunction, w: f64) -> Result<f64> {
    if phi.parity() == Parity::Odd {
        return Ok(0.0);
    }
    let w2 = w * w;
    if let Some(c) = phi.as_polynomial() {
        return Ok((w2 * poly_moment(c, 0, w) - poly_moment(c, 2, w)) / (w2 * w2));
    }
    crate::semicircle::check_coverage(phi, w)?;
    Ok(QuadratureRule::new(w, DEFAULT_NODES).integrate(|x| phi.eval(x) * (w2 - x * x)) / (w2 * w2))
}

/// ∫∫ Δφ₁ Δφ₂ ρ_sc ρ_sc = 2(⟨φ₁φ₂⟩ − ⟨φ₁⟩⟨φ₂⟩).
pub fn cov_limit_goe(phi1: &TestFunction, phi2: &TestFunction, w: f64) -> Result<f64> {
    if let (Some(c1), Some(c2)) = (phi1.as_polynomial(), phi2.as_polynomial()) {
        // Polynomials: exact moments, so integer inputs give integer outputs.
        let cross: f64 = c1.iter().enumerate().map(|(k, &a)| a * poly_moment(c2, k, w)).sum();
        return Ok(2.0 * (cross - poly_moment(c1, 0, w) * poly_moment(c2, 0, w)));
    }
    crate::semicircle::check_coverage(phi1, w)?;
    crate::semicircle::check_coverage(phi2, w)?;
    // Centred form of the same expansion: exact zero for constants.
    let (m1, m2) = (mean(phi1, w)?, mean(phi2, w)?);
    let rule = QuadratureRule::new(w, DEFAULT_NODES);
    Ok(2.0 * rule.integrate(|x| (phi1.eval(x) - m1) * (phi2.eval(x) - m2)))
}

/// The same double integral by tensor Gauss–Chebyshev quadrature.
pub fn cov_limit_goe_tensor(phi1: &TestFunction, phi2: &TestFunction, w: f64, nodes: usize) -> f64 {
    let rule = QuadratureRule::new(w, nodes);
    let v1: Vec<f64> = rule.nodes.iter().map(|&x| phi1.eval(x)).collect();
    let v2: Vec<f64> = rule.nodes.iter().map(|&x| phi2.eval(x)).collect();
    let mut total = 0.0;
    for a in 0..nodes {
        let mut row = 0.0;
        for b in 0..nodes {
            row += rule.weights[b] * (v1[a] - v1[b]) * (v2[a] - v2[b]);
        }
        total += rule.weights[a] * row;
    }
    total
}

/// The three parts of the limiting covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceParts {
    pub goe: f64,
    pub kappa4: f64,
    pub diag: f64,
}

impl CovarianceParts {
    pub fn total(&self) -> f64 {
        self.goe + self.kappa4 + self.diag
    }
}

pub fn cov_limit_parts(phi1: &TestFunction, phi2: &TestFunction, spec: &EnsembleSpec) -> Result<CovarianceParts> {
    let w = spec.w();
    let goe = cov_limit_goe(phi1, phi2, w)?;
    let kappa4 = spec.kappa4() * (kappa4_projection(phi1, w)? * kappa4_projection(phi2, w)?);
    let diag = (spec.w2 - 2.0) * w * w * (slope_projection(phi1, w)? * slope_projection(phi2, w)?);
    Ok(CovarianceParts { goe, kappa4, diag })
}

/// Limiting n·Cov{φ₁(M)_jj, φ₂(M)_jj} for the Wigner ensemble.
pub fn cov_limit_wigner(phi1: &TestFunction, phi2: &TestFunction, spec: &EnsembleSpec) -> Result<f64> {
    Ok(cov_limit_parts(phi1, phi2, spec)?.total())
}

/// Slope s of x* = s·x.
pub fn xstar_slope(phi: &TestFunction, spec: &EnsembleSpec) -> Result<f64> {
    Ok(spec.diagonal_factor() * slope_projection(phi, spec.w())?)
}

pub fn x_star(phi: &TestFunction, spec: &EnsembleSpec, x: f64) -> Result<f64> {
    Ok(xstar_slope(phi, spec)? * x)
}

/// Populated prediction without a CF grid.
pub fn var_limit(phi: &TestFunction, spec: &EnsembleSpec) -> Result<LimitPrediction> {
    let parts = cov_limit_parts(phi, phi, spec)?;
    let v_w = clip_variance(parts.total())?;
    Ok(LimitPrediction {
        v_goe: parts.goe,
        kappa4_term: parts.kappa4,
        diag_term: parts.diag,
        v_w,
        xstar_slope: xstar_slope(phi, spec)?,
        cf: Vec::new(),
        ensemble_ref: fingerprint_hex(spec)?,
        phi_ref: fingerprint_hex(phi)?,
    })
}

/// Clips rounding-level negatives to 0 and rejects genuinely negative values.
pub fn clip_variance(v: f64) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v > -NEGATIVE_VARIANCE_SLACK {
        Ok(0.0)
    } else {
        Err(Error::NegativeVariance(v))
    }
}

/// Prediction with the limiting CF tabulated on `x_grid`.
pub fn predict(phi: &TestFunction, spec: &EnsembleSpec, x_grid: &[f64]) -> Result<LimitPrediction> {
    let mut p = var_limit(phi, spec)?;
    p.cf = x_grid
        .iter()
        .map(|&x| cf_from_parts(spec, p.v_w, p.xstar_slope, x).map(|z| [x, z.re, z.im]))
        .collect::<Result<_>>()?;
    Ok(p)
}

fn cf_from_parts(spec: &EnsembleSpec, v_w: f64, slope: f64, x: f64) -> Result<Complex64> {
    let w = spec.w();
    let xs = slope * x;
    let gauss = (0.5 * (-x * x * v_w + w * w * xs * xs)).exp();
    Ok(entry_cf(&spec.entry_dist, xs)? * gauss)
}

/// Z(x) = exp{(−x² V + w² x*²)/2} f(x*).
pub fn limit_cf(phi: &TestFunction, spec: &EnsembleSpec, x: f64) -> Result<Complex64> {
    let p = var_limit(phi, spec)?;
    cf_from_parts(spec, p.v_w, p.xstar_slope, x)
}

/// κ₁..κ_max of the limit: 0, V, then κ_l(V₁₁) s^l.
pub fn limit_cumulants(phi: &TestFunction, spec: &EnsembleSpec, max_order: usize) -> Result<Vec<f64>> {
    let p = var_limit(phi, spec)?;
    let entry = spec.entry_dist.cumulants(max_order)?;
    Ok((1..=max_order)
        .map(|l| match l {
            1 => 0.0,
            2 => p.v_w,
            _ => entry.get(l).unwrap_or(0.0) * p.xstar_slope.powi(l as i32),
        })
        .collect())
}

/// Node counts of the regularized triple integral: (λ₁, λ₂, λ₃).
const TRIPLE_NODES: (usize, usize, usize) = (192, 256, 4096);

/// 2w² ∫∫∫ [Δφ₁/(λ₁−λ₂)] [(φ₂(λ₂)−φ₂(λ₃))/(λ₂−λ₃−iε)] Π ρ_sc dλ, one value per ε.
///
/// The first quotient is a removable divided difference; only the second is
/// regularized. The integrand factorizes through λ₂, so each value costs
/// O(N₂N₃). The limit ε → 0 is the GOE covariance.
pub fn triple_singular_cross_check(
    phi1: &TestFunction,
    phi2: &TestFunction,
    w: f64,
    epsilons: &[f64],
) -> Result<Vec<Complex64>> {
    if let Some(e) = epsilons.iter().find(|&&e| !(e > 0.0)) {
        return Err(Error::Domain(format!("regularization ε must be positive, got {e}")));
    }
    let (n1, n2, n3) = TRIPLE_NODES;
    let (r1, r2, r3) = (QuadratureRule::new(w, n1), QuadratureRule::new(w, n2), QuadratureRule::new(w, n3));
    let first: Vec<f64> = r2
        .nodes
        .iter()
        .map(|&l2| r1.integrate(|l1| phi1.divided_difference(l1, l2)))
        .collect();
    let phi2_inner: Vec<f64> = r3.nodes.iter().map(|&x| phi2.eval(x)).collect();
    Ok(epsilons
        .iter()
        .map(|&eps| {
            let mut total = Complex64::new(0.0, 0.0);
            for ((&l2, &wt2), &a) in r2.nodes.iter().zip(&r2.weights).zip(&first) {
                let f2 = phi2.eval(l2);
                let mut inner = Complex64::new(0.0, 0.0);
                for ((&l3, &wt3), &g3) in r3.nodes.iter().zip(&r3.weights).zip(&phi2_inner) {
                    inner += wt3 * (f2 - g3) / Complex64::new(l2 - l3, -eps);
                }
                total += inner * (wt2 * a);
            }
            total * (2.0 * w * w)
        })
        .collect())
}

/// Neville extrapolation of (ε_i, value_i) to ε = 0.
pub fn extrapolate_to_zero(epsilons: &[f64], values: &[Complex64]) -> Complex64 {
    let mut p = values.to_vec();
    let k = p.len();
    for m in 1..k {
        for i in 0..k - m {
            let (xi, xj) = (epsilons[i], epsilons[i + m]);
            p[i] = (p[i + 1] * xi - p[i] * xj) / (xi - xj);
        }
    }
    p[0]
}
