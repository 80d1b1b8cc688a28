//! Estimators over replica samples: variance and covariance with jackknife
//! errors, empirical CF, and the Gaussian goodness-of-fit check.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cumulants::{jackknife_se, Estimate};
use crate::error::{Error, Result};
use crate::stats::{ks_normal, mean};

/// Unbiased sample covariance with a delete-1 jackknife standard error.
pub fn covariance_estimate(xs: &[f64], ys: &[f64]) -> Estimate {
    let r = xs.len();
    let rf = r as f64;
    let (mx, my) = (mean(xs), mean(ys));
    let dx: Vec<f64> = xs.iter().map(|x| x - mx).collect();
    let dy: Vec<f64> = ys.iter().map(|y| y - my).collect();
    let sx: f64 = dx.iter().sum();
    let sy: f64 = dy.iter().sum();
    let sxy: f64 = dx.iter().zip(&dy).map(|(a, b)| a * b).sum();
    let value = (sxy - sx * sy / rf) / (rf - 1.0);
    // Leaving out i: Σ'xy − Σ'x Σ'y/(R−1), over R−2.
    let loo = dx.iter().zip(&dy).map(|(&a, &b)| {
        let (lx, ly) = (sx - a, sy - b);
        (sxy - a * b - lx * ly / (rf - 1.0)) / (rf - 2.0)
    });
    Estimate {
        value,
        se: jackknife_se(loo, r),
    }
}

pub fn variance_estimate(xs: &[f64]) -> Estimate {
    covariance_estimate(xs, xs)
}

/// One point of an empirical characteristic function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfPoint {
    pub x: f64,
    pub re: f64,
    pub im: f64,
    /// Pointwise 95% radius.
    pub radius: f64,
}

impl CfPoint {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// (1/R) Σ e^{ixy} with radius 1.96 √((1 − |ĉ|²)/R), capped at 1.96/√R.
pub fn empirical_cf(samples: &[f64], x_grid: &[f64]) -> Result<Vec<CfPoint>> {
    let r = samples.len();
    if r < 100 {
        return Err(Error::InsufficientSample { needed: 100, got: r });
    }
    let rf = r as f64;
    Ok(x_grid
        .iter()
        .map(|&x| {
            let (mut c, mut s) = (0.0, 0.0);
            for &y in samples {
                let (sn, cs) = (x * y).sin_cos();
                c += cs;
                s += sn;
            }
            let z = Complex64::new(c / rf, s / rf);
            let cap = 1.96 / rf.sqrt();
            let radius = (1.96 * ((1.0 - z.norm_sqr()).max(0.0) / rf).sqrt()).min(cap);
            CfPoint { x, re: z.re, im: z.im, radius }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Zero sample variance: no Gaussian to fit.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianTest {
    pub ks_stat: f64,
    pub threshold: f64,
    pub verdict: Verdict,
}

impl GaussianTest {
    pub fn pass(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// KS distance to the fitted normal; pass iff D ≤ 1.63/√R.
///
/// 1.63 is the asymptotic 1% quantile for a fully specified null; with fitted
/// parameters the test is conservative.
pub fn gaussian_limit_test(samples: &[f64]) -> Result<GaussianTest> {
    let r = samples.len();
    if r < 500 {
        return Err(Error::InsufficientSample { needed: 500, got: r });
    }
    let threshold = 1.63 / (r as f64).sqrt();
    let m = mean(samples);
    let var = variance_estimate(samples).value;
    let scale = samples.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if !(var > 1e-24 * (1.0 + scale * scale)) {
        return Ok(GaussianTest { ks_stat: 0.0, threshold, verdict: Verdict::Degenerate });
    }
    let ks_stat = ks_normal(samples, m, var.sqrt());
    let verdict = if ks_stat <= threshold { Verdict::Pass } else { Verdict::Fail };
    Ok(GaussianTest { ks_stat, threshold, verdict })
}
