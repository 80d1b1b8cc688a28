//! Convolution-kernel Volterra equations on uniform grids and the
//! time-domain form of the limiting covariance.
//!
//! All time integrals are trapezoid sums, so discretization errors are O(h²).
//! Semicircle integrals use Gauss–Chebyshev rules and are accurate to rounding.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{composite_legendre, Rule};
use crate::semicircle::{nodes_for_time, sc_convolutions, v_of_t, v_tilde, QuadratureRule};
use crate::testfn::TestFunction;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Default time grid: [0, 4] with step 0.01.
pub const DEFAULT_T_MAX: f64 = 4.0;
pub const DEFAULT_STEP: f64 = 0.01;

/// Values on the grid t_i = i·h, i = 0..len.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexSeries {
    pub h: f64,
    pub values: Vec<Complex64>,
}

impl ComplexSeries {
    pub fn new(h: f64, values: Vec<Complex64>) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::GridMismatch(format!("step must be positive, got {h}")));
        }
        if values.iter().any(|z| !z.is_finite()) {
            return Err(Error::GridMismatch("series values must be finite".into()));
        }
        Ok(Self { h, values })
    }

    /// Samples f on [0, t_max]; the last point is the largest i·h ≤ t_max.
    pub fn from_fn(h: f64, t_max: f64, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let m = steps(h, t_max);
        Self::new(h, (0..=m).map(|i| f(i as f64 * h)).collect())
    }

    pub fn real(h: f64, t_max: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_fn(h, t_max, |t| Complex64::new(f(t), 0.0))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn t(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.t(i)).collect()
    }

    fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.h != other.h || self.len() != other.len() {
            return Err(Error::GridMismatch(format!(
                "(h = {}, {} points) vs (h = {}, {} points)",
                self.h,
                self.len(),
                other.h,
                other.len()
            )));
        }
        Ok(())
    }

    pub fn sup_distance(&self, other: &Self) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

fn steps(h: f64, t_max: f64) -> usize {
    // Tolerate t_max/h landing a hair below an integer.
    (t_max / h + 1e-9).floor() as usize
}

/// (f₁ ∗ f₂)(t) = ∫₀^t f₁(t − τ) f₂(τ) dτ by the trapezoid rule.
pub fn convolve(f1: &ComplexSeries, f2: &ComplexSeries) -> Result<ComplexSeries> {
    f1.check_same_grid(f2)?;
    let (a, b, h) = (&f1.values, &f2.values, f1.h);
    let values = (0..a.len())
        .map(|i| {
            if i == 0 {
                return ZERO;
            }
            let inner: Complex64 = (1..i).map(|k| a[i - k] * b[k]).sum();
            (inner + 0.5 * (a[i] * b[0] + a[0] * b[i])) * h
        })
        .collect();
    ComplexSeries::new(h, values)
}

/// ∫₀^t f by the cumulative trapezoid rule.
pub fn cumulative_integral(f: &ComplexSeries) -> ComplexSeries {
    let mut acc = ZERO;
    let mut values = Vec::with_capacity(f.len());
    values.push(ZERO);
    for w in f.values.windows(2) {
        acc += 0.5 * f.h * (w[0] + w[1]);
        values.push(acc);
    }
    ComplexSeries { h: f.h, values }
}

/// Left side P(t) + ∫₀^t dt₁ ∫₀^{t₁} Q(t₁ − t₂) P(t₂) dt₂, discretized.
pub fn volterra_apply(q: &ComplexSeries, p: &ComplexSeries) -> Result<ComplexSeries> {
    let s = cumulative_integral(&convolve(q, p)?);
    let values = p.values.iter().zip(&s.values).map(|(a, b)| a + b).collect();
    ComplexSeries::new(p.h, values)
}

/// Solves P + ∫₀^t dt₁ ∫₀^{t₁} Q(t₁−t₂)P(t₂)dt₂ = R by forward marching.
///
/// The trapezoid double sum at t_i contains P_i with weight h²Q₀/4, so each
/// step is one scalar division; the discrete equation holds to rounding.
pub fn volterra_solve(q: &ComplexSeries, r: &ComplexSeries) -> Result<ComplexSeries> {
    q.check_same_grid(r)?;
    if r.values[0].norm() > 1e-12 {
        return Err(Error::Contract(format!("R(0) must vanish, got {}", r.values[0])));
    }
    let h = q.h;
    let qv = &q.values;
    let m = r.len();
    let mut p = vec![ZERO; m];
    // k[i] = (Q ∗ P)(t_i); s = running trapezoid sum of k.
    let mut k = vec![ZERO; m];
    let mut s = ZERO;
    p[0] = r.values[0];
    for i in 1..m {
        let known: Complex64 = (1..i).map(|l| qv[i - l] * p[l]).sum::<Complex64>() + 0.5 * qv[i] * p[0];
        let partial_k = known * h;
        let diag = 0.5 * h * qv[0];
        // p_i + s + h/2 (k_{i−1} + partial_k + diag p_i) = r_i
        let rhs = r.values[i] - s - 0.5 * h * (k[i - 1] + partial_k);
        p[i] = rhs / (1.0 + 0.5 * h * diag);
        k[i] = partial_k + diag * p[i];
        s += 0.5 * h * (k[i - 1] + k[i]);
    }
    // k[0] is zero: the convolution over an empty interval.
    ComplexSeries::new(h, p)
}

/// Resolvent kernel T(t) = −v(t) on the grid.
pub fn resolvent_t(w: f64, h: f64, t_max: f64) -> Result<ComplexSeries> {
    ComplexSeries::real(h, t_max, |t| -v_of_t(t, w))
}

/// |(z + w²ṽ(z))·(−ṽ(z)) − 1|.
pub fn resolvent_identity_error(z: Complex64, w: f64) -> Result<f64> {
    let vt = v_tilde(z, w)?;
    Ok(((z + vt * (w * w)) * (-vt) - 1.0).norm())
}

/// Semicircle rule with the divided-difference table of e^{itλ}.
///
/// g_a(t) = ∫ (e^{itλ_a} − e^{itμ})/(λ_a − μ) ρ_sc(μ) dμ, with the diagonal
/// value it·e^{itλ_a}, so that Φ(t₃, t₂) = −i Σ_a w_a e^{it₃λ_a} g_a(t₂).
#[derive(Debug, Clone)]
pub struct PhiKernel {
    pub w: f64,
    rule: QuadratureRule,
    inv_gap: Vec<f64>,
}

impl PhiKernel {
    /// Resolves all times with |t₂| + |t₃| ≤ 2·t_max.
    pub fn new(w: f64, t_max: f64) -> Self {
        let rule = QuadratureRule::new(w, nodes_for_time(2.0 * t_max, w));
        let n = rule.n;
        let mut inv_gap = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    inv_gap[a * n + b] = 1.0 / (rule.nodes[a] - rule.nodes[b]);
                }
            }
        }
        Self { w, rule, inv_gap }
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn g(&self, t: f64) -> Vec<Complex64> {
        let n = self.rule.n;
        let e: Vec<Complex64> = self.rule.nodes.iter().map(|&l| (I * (t * l)).exp()).collect();
        (0..n)
            .map(|a| {
                let row = &self.inv_gap[a * n..(a + 1) * n];
                let mut acc = ZERO;
                for b in 0..n {
                    let q = if a == b { I * t * e[a] } else { (e[a] - e[b]) * row[b] };
                    acc += q * self.rule.weights[b];
                }
                acc
            })
            .collect()
    }

    /// Φ(t₃, t₂) from a precomputed g(t₂).
    pub fn eval_with(&self, g2: &[Complex64], t3: f64) -> Complex64 {
        let s: Complex64 = self
            .rule
            .nodes
            .iter()
            .zip(&self.rule.weights)
            .zip(g2)
            .map(|((&l, &wt), &g)| (I * (t3 * l)).exp() * g * wt)
            .sum();
        -I * s
    }

    pub fn eval(&self, t3: f64, t2: f64) -> Complex64 {
        self.eval_with(&self.g(t2), t3)
    }
}

/// Φ(t₃, t₂) = i⁻¹ ∫∫ e^{it₃λ} (e^{it₂λ} − e^{it₂μ})/(λ − μ) ρ_sc(λ)ρ_sc(μ) dλ dμ.
pub fn phi_kernel(t3: f64, t2: f64, w: f64) -> Complex64 {
    PhiKernel::new(w, t3.abs().max(t2.abs())).eval(t3, t2)
}

/// Gauss–Legendre panels of length ≤ 0.5 on [0, t].
fn time_rule(t: f64) -> Rule {
    let panels = ((t.abs() / 0.5).ceil() as usize).max(1);
    composite_legendre(16, panels, 0.0, t)
}

/// Closed-form covariance kernel
/// Cov(t₁,t₂) = −2w² ∫₀^{t₁} v(t₁−t₃) Φ(t₃,t₂) dt₃ + κ₄ (v∗v∗v)(t₁)(v∗v∗v)(t₂).
#[derive(Debug, Clone)]
pub struct CovKernel {
    pub kappa4: f64,
    phi: PhiKernel,
}

impl CovKernel {
    pub fn new(w: f64, kappa4: f64, t_max: f64) -> Self {
        Self {
            kappa4,
            phi: PhiKernel::new(w, t_max),
        }
    }

    pub fn phi(&self) -> &PhiKernel {
        &self.phi
    }

    /// H_a(t₁) = ∫₀^{t₁} v(t₁−t₃) e^{it₃λ_a} dt₃ by Gauss–Legendre in t₃.
    pub fn history(&self, t1: f64) -> Vec<Complex64> {
        let w = self.phi.w;
        let tr = time_rule(t1);
        let vw: Vec<f64> = tr.nodes.iter().zip(&tr.weights).map(|(&s, &wt)| wt * v_of_t(t1 - s, w)).collect();
        self.phi
            .rule
            .nodes
            .iter()
            .map(|&l| tr.nodes.iter().zip(&vw).map(|(&s, &c)| (I * (s * l)).exp() * c).sum())
            .collect()
    }

    /// Cov(t₁,t₂) from H(t₁) and g(t₂).
    pub fn eval_with(&self, h1: &[Complex64], g2: &[Complex64], t1: f64, t2: f64) -> Complex64 {
        let w = self.phi.w;
        let rule = &self.phi.rule;
        let s: Complex64 = rule.weights.iter().zip(h1).zip(g2).map(|((&wt, &h), &g)| h * g * wt).sum();
        // ∫₀^{t₁} v(t₁−t₃)Φ(t₃,t₂)dt₃ = −i Σ_a w_a g_a(t₂) H_a(t₁).
        let first = -I * s * (-2.0 * w * w);
        first + self.kappa4 * sc_convolutions(t1, w).vvv * sc_convolutions(t2, w).vvv
    }

    pub fn eval(&self, t1: f64, t2: f64) -> Complex64 {
        self.eval_with(&self.history(t1), &self.phi.g(t2), t1, t2)
    }

    /// The same kernel from the triple-integral form 2w² Σ_a w_a g_a(t₁) g_a(t₂) + κ₄ ….
    pub fn eval_symmetric(&self, t1: f64, t2: f64) -> Complex64 {
        let w = self.phi.w;
        let (g1, g2) = (self.phi.g(t1), self.phi.g(t2));
        let s: Complex64 = self.phi.rule.weights.iter().zip(&g1).zip(&g2).map(|((&wt, &a), &b)| a * b * wt).sum();
        s * (2.0 * w * w) + self.kappa4 * sc_convolutions(t1, w).vvv * sc_convolutions(t2, w).vvv
    }
}

pub fn cov_kernel_closed(t1: f64, t2: f64, w: f64, kappa4: f64) -> Complex64 {
    CovKernel::new(w, kappa4, t1.abs().max(t2.abs())).eval(t1, t2)
}

/// Square kernel on the grid t_i = i·h, row-major in (t₁, t₂).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel2D {
    pub h: f64,
    pub n: usize,
    pub values: Vec<Complex64>,
}

impl Kernel2D {
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.n + j]
    }

    /// max |K(t₁,t₂) − K(t₂,t₁)|.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).norm());
            }
        }
        worst
    }
}

/// Cov(t₁,t₂) on [0, t_max]², rows in parallel.
pub fn cov_kernel_grid(w: f64, kappa4: f64, h: f64, t_max: f64) -> Kernel2D {
    let kernel = CovKernel::new(w, kappa4, t_max);
    let n = steps(h, t_max) + 1;
    let gs: Vec<Vec<Complex64>> = (0..n).into_par_iter().map(|j| kernel.phi.g(j as f64 * h)).collect();
    let values: Vec<Complex64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let t1 = i as f64 * h;
            let h1 = kernel.history(t1);
            let row: Vec<Complex64> =
                (0..n).map(|j| kernel.eval_with(&h1, &gs[j], t1, j as f64 * h)).collect();
            row
        })
        .collect();
    Kernel2D { h, n, values }
}

/// A(t₁,t₂) = −2w² ∫₀^{t₁} Φ(t₃,t₂)dt₃ + κ₄ (v∗v∗v)(t₂) ∫₀^{t₁} (v∗v)(t₃)dt₃, exactly:
/// ∫₀^{t₁} e^{it₃λ}dt₃ = (e^{it₁λ} − 1)/(iλ) and ∫₀^{t₁} v∗v = w⁻²(1 − v(t₁)).
fn a_kernel(phi: &PhiKernel, g2: &[Complex64], t1: f64, t2: f64, kappa4: f64) -> Complex64 {
    let w = phi.w;
    let rule = phi.rule();
    let s: Complex64 = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .zip(g2)
        .map(|((&l, &wt), &g)| {
            let e = if l.abs() < 1e-12 {
                Complex64::new(t1, 0.0)
            } else {
                ((I * (t1 * l)).exp() - 1.0) / (I * l)
            };
            e * g * wt
        })
        .sum();
    let int_phi = -I * s;
    let int_vv = (1.0 - v_of_t(t1, w)) / (w * w);
    int_phi * (-2.0 * w * w) + kappa4 * sc_convolutions(t2, w).vvv * int_vv
}

/// Sup over [0, t_max]² of |Cov + w² ∫₀^{t₁}dt₃ ∫₀^{t₃} v(t₄)Cov(t₃−t₄,t₂)dt₄ − A|
/// with the closed-form Cov and trapezoid integrals.
pub fn coveq_residual(w: f64, kappa4: f64, h: f64, t_max: f64) -> Result<f64> {
    Ok(coveq_residual_grid(w, kappa4, h, t_max)?.values.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Residual of the covariance equation at every grid point.
pub fn coveq_residual_grid(w: f64, kappa4: f64, h: f64, t_max: f64) -> Result<Kernel2D> {
    let cov = cov_kernel_grid(w, kappa4, h, t_max);
    let n = cov.n;
    let q = ComplexSeries::real(h, t_max, |t| w * w * v_of_t(t, w))?;
    let phi = PhiKernel::new(w, t_max);
    let columns: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let t2 = j as f64 * h;
            let p = ComplexSeries { h, values: (0..n).map(|i| cov.get(i, j)).collect() };
            let lhs = volterra_apply(&q, &p).expect("shared grid");
            let g2 = phi.g(t2);
            (0..n).map(|i| lhs.values[i] - a_kernel(&phi, &g2, i as f64 * h, t2, kappa4)).collect()
        })
        .collect();
    let mut values = vec![ZERO; n * n];
    for (j, col) in columns.iter().enumerate() {
        for (i, &r) in col.iter().enumerate() {
            values[i * n + j] = r;
        }
    }
    Ok(Kernel2D { h, n, values })
}

/// Plugs v₂(t₁, t̄) = v(t₁) Π v(t_m) into
/// v₂ + w² ∫₀^{t₁} ds ∫₀^s v(s − s₁) v₂(s₁, t̄) ds₁ = Π_{m=2}^l v(t_m)
/// and returns the sup residual over t₁ ∈ [0, t_max].
pub fn v2_equation_check(l: usize, t_rest: &[f64], w: f64, h: f64, t_max: f64) -> Result<f64> {
    if l < 1 || t_rest.len() != l - 1 {
        return Err(Error::Contract(format!(
            "v₂ equation of order {l} needs {} fixed times, got {}",
            l.saturating_sub(1),
            t_rest.len()
        )));
    }
    let c: f64 = t_rest.iter().map(|&t| v_of_t(t, w)).product();
    let q = ComplexSeries::real(h, t_max, |t| w * w * v_of_t(t, w))?;
    let v2 = ComplexSeries::real(h, t_max, |t| v_of_t(t, w) * c)?;
    let lhs = volterra_apply(&q, &v2)?;
    Ok(lhs.values.iter().map(|z| (z - c).norm()).fold(0.0, f64::max))
}

/// ∫∫ φ̂₁(t₁) φ̂₂(t₂) Cov(t₁,t₂) dt₁dt₂ over [−T, T]², using
/// Cov(−t₁,−t₂) = conj Cov(t₁,t₂) and φ̂(−t) = conj φ̂(t) for real φ.
pub fn fourier_pairing(phi1: &TestFunction, phi2: &TestFunction, w: f64, kappa4: f64, t_max: f64) -> Result<f64> {
    let kernel = CovKernel::new(w, kappa4, t_max);
    let panels = ((t_max / 0.5).ceil() as usize).max(1);
    let r1 = composite_legendre(16, panels, 0.0, t_max);
    let r2 = composite_legendre(16, 2 * panels, -t_max, t_max);
    let f2: Vec<Complex64> = r2
        .nodes
        .iter()
        .map(|&t| crate::semicircle::fourier_transform(phi2, t))
        .collect::<Result<_>>()?;
    let gs: Vec<Vec<Complex64>> = r2.nodes.par_iter().map(|&t| kernel.phi.g(t)).collect();
    let f1: Vec<Complex64> = r1
        .nodes
        .iter()
        .map(|&t| crate::semicircle::fourier_transform(phi1, t))
        .collect::<Result<_>>()?;
    let rows: Vec<Complex64> = r1
        .nodes
        .par_iter()
        .zip(&r1.weights)
        .zip(&f1)
        .map(|((&t1, &wt1), &a)| {
            let h1 = kernel.history(t1);
            let inner: Complex64 = r2
                .nodes
                .iter()
                .zip(&r2.weights)
                .zip(&f2)
                .zip(&gs)
                .map(|(((&t2, &wt2), &b), g2)| b * kernel.eval_with(&h1, g2, t1, t2) * wt2)
                .sum();
            a * inner * wt1
        })
        .collect();
    let half: Complex64 = rows.iter().sum();
    Ok(2.0 * half.re)
}

/// One row of the residual table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub case: String,
    pub h: f64,
    pub residual: f64,
    /// log₂ of the residual ratio against the previous (twice larger) step.
    pub order_estimate: Option<f64>,
}

fn order_column(case: &str, hs: &[f64], residuals: &[f64]) -> Vec<ResidualRow> {
    hs.iter()
        .zip(residuals)
        .enumerate()
        .map(|(k, (&h, &r))| ResidualRow {
            case: case.to_string(),
            h,
            residual: r,
            order_estimate: (k > 0).then(|| (residuals[k - 1] / r).ln() / (hs[k - 1] / h).ln()),
        })
        .collect()
}

/// Manufactured solution: Q = cos, P* = sin, R = sin t + (sin t − t cos t)/2.
pub fn manufactured_error(h: f64, t_max: f64) -> Result<f64> {
    let q = ComplexSeries::real(h, t_max, f64::cos)?;
    let r = ComplexSeries::real(h, t_max, |t| t.sin() + 0.5 * (t.sin() - t * t.cos()))?;
    let exact = ComplexSeries::real(h, t_max, f64::sin)?;
    volterra_solve(&q, &r)?.sup_distance(&exact)
}

/// ∫₀^t (t − s) v(s) ds = ∫ (1 − cos λt)/λ² ρ_sc dλ.
pub fn v_second_integral(t: f64, w: f64) -> f64 {
    QuadratureRule::new(w, nodes_for_time(t, w)).integrate(|l| {
        let x = l * t;
        if x.abs() < 1e-4 {
            t * t * (0.5 - x * x / 24.0)
        } else {
            (1.0 - x.cos()) / (l * l)
        }
    })
}

/// Recovers v from its own equation, P = v − 1 and R = −w² ∫₀^t (t−s)v(s)ds.
pub fn trace_function_error(w: f64, h: f64, t_max: f64) -> Result<f64> {
    let q = ComplexSeries::real(h, t_max, |t| w * w * v_of_t(t, w))?;
    let r = ComplexSeries::real(h, t_max, |t| -w * w * v_second_integral(t, w))?;
    let exact = ComplexSeries::real(h, t_max, |t| v_of_t(t, w) - 1.0)?;
    volterra_solve(&q, &r)?.sup_distance(&exact)
}

/// Residual table for the built-in cases at each step.
pub fn volterra_suite(hs: &[f64]) -> Result<Vec<ResidualRow>> {
    let mut rows = Vec::new();
    let mut add = |case: &str, f: &dyn Fn(f64) -> Result<f64>| -> Result<()> {
        let res = hs.iter().map(|&h| f(h)).collect::<Result<Vec<_>>>()?;
        rows.extend(order_column(case, hs, &res));
        Ok(())
    };
    add("coveq_kappa4_-2", &|h| coveq_residual(1.0, -2.0, h, 2.0))?;
    add("coveq_kappa4_0", &|h| coveq_residual(1.0, 0.0, h, 2.0))?;
    add("v2_l2", &|h| v2_equation_check(2, &[0.0], 1.0, h, DEFAULT_T_MAX))?;
    add("v2_l3", &|h| v2_equation_check(3, &[1.0, 2.0], 1.0, h, DEFAULT_T_MAX))?;
    add("manufactured", &|h| manufactured_error(h, DEFAULT_T_MAX))?;
    add("trace_function", &|h| trace_function_error(1.0, h, DEFAULT_T_MAX))?;
    Ok(rows)
}
