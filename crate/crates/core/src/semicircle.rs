//! Integrals against the semicircle density and the functions built from it.
//!
//! Fourier convention: φ̂(t) = (2π)⁻¹ ∫ e^{−itλ} φ(λ) dλ, so that
//! φ(λ) = ∫ e^{iλt} φ̂(t) dt.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre_on;
use crate::testfn::{Repr, TestFunction};

/// Default node count of the semicircle rule.
pub const DEFAULT_NODES: usize = 128;

/// Below this |wt| the trace function uses its power series.
pub const SERIES_CROSSOVER: f64 = 8.0;

/// Gauss–Chebyshev rule of the second kind mapped onto ρ_sc:
/// λ_k = 2w cos(kπ/(N+1)), weights (2/(N+1)) sin²(kπ/(N+1)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub w: f64,
    pub n: usize,
}

impl QuadratureRule {
    pub fn new(w: f64, n: usize) -> Self {
        assert!(n >= 1 && w > 0.0);
        let h = PI / (n + 1) as f64;
        let nodes = (1..=n).map(|k| 2.0 * w * (k as f64 * h).cos()).collect();
        let weights = (1..=n)
            .map(|k| 2.0 / (n + 1) as f64 * (k as f64 * h).sin().powi(2))
            .collect();
        Self { nodes, weights, w, n }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    pub fn integrate_complex(&self, f: impl Fn(f64) -> Complex64) -> Complex64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| f(x) * w).sum()
    }
}

/// ρ_sc(λ) = (2πw²)⁻¹ √((4w² − λ²)₊).
pub fn rho_sc(lambda: f64, w: f64) -> f64 {
    let r = 4.0 * w * w - lambda * lambda;
    if r <= 0.0 {
        0.0
    } else {
        r.sqrt() / (2.0 * PI * w * w)
    }
}

/// ∫ λ^k ρ_sc dλ: Catalan numbers times w^k for even k.
pub fn sc_moment(k: usize, w: f64) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    let m = k / 2;
    let mut catalan = 1.0;
    for i in 0..m {
        catalan = catalan * 2.0 * (2 * i + 1) as f64 / (i + 2) as f64;
    }
    catalan * w.powi(k as i32)
}

/// ∫ φ ρ_sc dλ with N Gauss–Chebyshev nodes.
pub fn sc_integral(phi: &TestFunction, w: f64, n: usize) -> Result<f64> {
    check_coverage(phi, w)?;
    Ok(QuadratureRule::new(w, n).integrate(|x| phi.eval(x)))
}

/// Tabulated functions must cover the whole support [−2w, 2w].
pub fn check_coverage(phi: &TestFunction, w: f64) -> Result<()> {
    if let Repr::Tabulated { grid, .. } = phi.repr() {
        let (lo, hi) = (grid[0], grid[grid.len() - 1]);
        if lo > -2.0 * w || hi < 2.0 * w {
            return Err(Error::Coverage { lo, hi, edge: 2.0 * w });
        }
    }
    Ok(())
}

/// ∫ ρ_sc(μ)/(μ − λ) dμ (principal value) = −λ/2w² on the open support.
pub fn stieltjes_rho(lambda: f64, w: f64) -> Result<f64> {
    if lambda.abs() >= 2.0 * w {
        return Err(Error::Domain(format!(
            "Stieltjes point {lambda} outside the open support (−{0}, {0})",
            2.0 * w
        )));
    }
    Ok(-lambda / (2.0 * w * w))
}

/// Independent principal-value quadrature of the Stieltjes integral.
///
/// Nodes are paired as λ ± s so the 1/s singularity cancels; the excluded
/// window |μ − λ| < δ leaves an error odd in δ, removed by Richardson
/// extrapolation over δ, δ/2, δ/4.
pub fn stieltjes_rho_pv(lambda: f64, w: f64) -> Result<f64> {
    stieltjes_rho(lambda, w)?;
    let a = lambda + 2.0 * w;
    let b = 2.0 * w - lambda;
    let d = a.min(b);
    let rule_nodes = 200;

    // Tail beyond the symmetric window, in θ with μ = 2w cos θ.
    let tail = if (a - b).abs() < 1e-15 * w {
        0.0
    } else {
        let (th_lo, th_hi) = if b > a {
            (0.0, ((lambda + d) / (2.0 * w)).clamp(-1.0, 1.0).acos())
        } else {
            (((lambda - d) / (2.0 * w)).clamp(-1.0, 1.0).acos(), PI)
        };
        gauss_legendre_on(rule_nodes, th_lo, th_hi)
            .apply(|th| 2.0 / PI * th.sin().powi(2) / (2.0 * w * th.cos() - lambda))
    };

    // Paired part ∫_δ^d [ρ(λ+s) − ρ(λ−s)]/s ds with s = d − u² (edge at s = d).
    let paired = |delta: f64| {
        gauss_legendre_on(rule_nodes, 0.0, (d - delta).sqrt()).apply(|u| {
            let s = d - u * u;
            (rho_sc(lambda + s, w) - rho_sc(lambda - s, w)) / s * 2.0 * u
        })
    };
    let delta0 = 0.05 * d;
    let deltas = [delta0, delta0 / 2.0, delta0 / 4.0, delta0 / 8.0];
    let values: Vec<f64> = deltas.iter().map(|&dl| paired(dl) + tail).collect();
    Ok(richardson_odd(&deltas, &values))
}

/// Polynomial extrapolation to δ = 0 for an error series in odd powers of δ.
fn richardson_odd(deltas: &[f64], values: &[f64]) -> f64 {
    // Fit v(δ) = c₀ + c₁δ + c₃δ³ + c₅δ⁵ through the points.
    let k = deltas.len();
    let mut mat = vec![vec![0.0; k + 1]; k];
    for (i, (&dl, &v)) in deltas.iter().zip(values).enumerate() {
        mat[i][0] = 1.0;
        for j in 1..k {
            mat[i][j] = dl.powi(2 * j as i32 - 1);
        }
        mat[i][k] = v;
    }
    solve_dense(mat)[0]
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
pub(crate) fn solve_dense(mut m: Vec<Vec<f64>>) -> Vec<f64> {
    let k = m.len();
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .expect("nonempty");
        m.swap(col, piv);
        for r in col + 1..k {
            let f = m[r][col] / m[col][col];
            for c in col..=k {
                let v = m[col][c];
                m[r][c] -= f * v;
            }
        }
    }
    let mut x = vec![0.0; k];
    for r in (0..k).rev() {
        let s: f64 = (r + 1..k).map(|c| m[r][c] * x[c]).sum();
        x[r] = (m[r][k] - s) / m[r][r];
    }
    x
}

/// v(t) = ∫ e^{itλ} ρ_sc dλ = J₁(2wt)/(wt), real and even.
pub fn v_of_t(t: f64, w: f64) -> f64 {
    let y = (w * t).abs();
    if y <= SERIES_CROSSOVER {
        bessel_ratio_series(2.0 * y)
    } else {
        bessel_j1_asymptotic(2.0 * y) / y
    }
}

/// 2J₁(x)/x = Σ_k (−1)^k (x/2)^{2k} / (k!(k+1)!).
fn bessel_ratio_series(x: f64) -> f64 {
    let q = -(x * x) / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= q / (k * (k + 1.0));
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-3) && k > 5.0 {
            break;
        }
    }
    sum
}

/// Hankel asymptotic expansion of J₁ for large x.
fn bessel_j1_asymptotic(x: f64) -> f64 {
    let mu = 4.0;
    let z = 8.0 * x;
    let (mut p, mut q) = (1.0, 0.0);
    let mut term = 1.0;
    let mut k = 1;
    loop {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * z);
        let prev = term;
        if k % 2 == 1 {
            q += if (k / 2) % 2 == 0 { term } else { -term };
        } else {
            p += if (k / 2) % 2 == 0 { term } else { -term };
        }
        k += 1;
        if prev.abs() < 1e-17 || k > 60 {
            break;
        }
        let next = (mu - ((2 * k - 1) as f64).powi(2)) / (k as f64 * z);
        if next.abs() >= 1.0 {
            break;
        }
    }
    let omega = x - 0.75 * PI;
    (2.0 / (PI * x)).sqrt() * (p * omega.cos() - q * omega.sin())
}

/// ṽ(z) = (2w²)⁻¹ (√(z²−4w²) − z) on the branch √(z²−4w²) = z + O(1/z), Im z < 0.
pub fn v_tilde(z: Complex64, w: f64) -> Result<Complex64> {
    if z.im >= 0.0 {
        return Err(Error::Domain(format!("ṽ needs Im z < 0, got {z}")));
    }
    let two_w = Complex64::new(2.0 * w, 0.0);
    let root = (z - two_w).sqrt() * (z + two_w).sqrt();
    // (root − z)/2w² rewritten without the cancellation at large |z|.
    Ok(-2.0 / (root + z))
}

/// Self-convolutions of v in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Convolutions {
    /// (v∗v)(t) = −(i/w²) ∫ e^{iμt} μ ρ_sc dμ, which is real.
    pub vv: f64,
    /// (v∗v∗v)(t) = w⁻⁴ ∫ e^{itλ} (w² − λ²) ρ_sc dλ.
    pub vvv: f64,
}

/// Node count that resolves e^{itλ} on [−2w, 2w].
pub fn nodes_for_time(t: f64, w: f64) -> usize {
    DEFAULT_NODES.max((4.0 * w * t.abs()).ceil() as usize + 64)
}

pub fn sc_convolutions(t: f64, w: f64) -> Convolutions {
    let rule = QuadratureRule::new(w, nodes_for_time(t, w));
    let vv = rule.integrate(|mu| mu * (mu * t).sin()) / (w * w);
    let vvv = rule.integrate(|l| (t * l).cos() * (w * w - l * l)) / w.powi(4);
    Convolutions { vv, vvv }
}

/// φ̂(t) for a Gaussian-damped polynomial, exactly, through
/// I_k(t) = ∫ λ^k e^{−λ²/(2s²) − itλ} dλ with I₀ = s√(2π) e^{−s²t²/2} and
/// I_{k+1} = s²(k I_{k−1} − it I_k).
pub fn fourier_transform(phi: &TestFunction, t: f64) -> Result<Complex64> {
    let Repr::GaussianDampedPolynomial { coefficients, width } = phi.repr() else {
        return Err(Error::Unsupported(
            "closed-form Fourier transform needs a gaussian_damped_polynomial".into(),
        ));
    };
    let s2 = width * width;
    let it = Complex64::new(0.0, t);
    let mut prev = Complex64::new(0.0, 0.0);
    let mut cur = Complex64::new(width * (2.0 * PI).sqrt() * (-0.5 * s2 * t * t).exp(), 0.0);
    let mut total = cur * coefficients.first().copied().unwrap_or(0.0);
    for (k, &c) in coefficients.iter().enumerate().skip(1) {
        let next = (prev * (k - 1) as f64 - it * cur) * s2;
        prev = cur;
        cur = next;
        total += cur * c;
    }
    Ok(total / (2.0 * PI))
}
