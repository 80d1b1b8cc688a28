//! Moment/cumulant conversion, k-statistics, and the truncated cumulant
//! expansion `E{ξΦ(ξ)} = Σ_{l≤p} κ_{l+1}/l! E{Φ^(l)(ξ)} + ε_p`.

use serde::{Deserialize, Serialize};

use crate::ensemble::{DistKind, EntryDistribution};
use crate::error::{Error, Result};
use crate::quadrature::{gauss_hermite, gauss_legendre};

/// Highest order handled by the partition recursion.
pub const MAX_ORDER: usize = 8;

/// Cumulants κ₁..κ_p (index 0 holds κ₁).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulantVector(pub Vec<f64>);

impl CumulantVector {
    pub fn order(&self) -> usize {
        self.0.len()
    }

    /// κ_l, 1-based.
    pub fn get(&self, l: usize) -> Option<f64> {
        l.checked_sub(1).and_then(|i| self.0.get(i)).copied()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Raw moments μ₁..μ_p to cumulants κ₁..κ_p.
///
/// κ₁..κ₄ are the explicit polynomials; higher orders use
/// κ_p = μ_p − Σ_{m=1}^{p−1} C(p−1, m−1) κ_m μ_{p−m}.
pub fn moments_to_cumulants(mu: &[f64]) -> Result<CumulantVector> {
    let p = mu.len();
    if p > MAX_ORDER {
        return Err(Error::Unsupported(format!(
            "cumulant order {p} exceeds {MAX_ORDER}"
        )));
    }
    let m = |k: usize| if k == 0 { 1.0 } else { mu[k - 1] };
    let mut kappa = Vec::with_capacity(p);
    for order in 1..=p {
        let value = match order {
            1 => m(1),
            2 => m(2) - m(1) * m(1),
            3 => m(3) - 3.0 * m(2) * m(1) + 2.0 * m(1).powi(3),
            4 => {
                m(4) - 3.0 * m(2) * m(2) - 4.0 * m(3) * m(1) + 12.0 * m(2) * m(1) * m(1)
                    - 6.0 * m(1).powi(4)
            }
            _ => {
                let tail: f64 = (1..order)
                    .map(|j| binomial(order - 1, j - 1) * kappa[j - 1] * m(order - j))
                    .sum();
                m(order) - tail
            }
        };
        kappa.push(value);
    }
    Ok(CumulantVector(kappa))
}

/// Inverse of [`moments_to_cumulants`]:
/// μ_p = Σ_{m=1}^{p} C(p−1, m−1) κ_m μ_{p−m}.
pub fn cumulants_to_moments(kappa: &CumulantVector) -> Result<Vec<f64>> {
    let p = kappa.order();
    if p > MAX_ORDER {
        return Err(Error::Unsupported(format!(
            "cumulant order {p} exceeds {MAX_ORDER}"
        )));
    }
    let mut mu: Vec<f64> = Vec::with_capacity(p);
    for order in 1..=p {
        let value = (1..=order)
            .map(|j| {
                let prev = if order == j { 1.0 } else { mu[order - j - 1] };
                binomial(order - 1, j - 1) * kappa.0[j - 1] * prev
            })
            .sum();
        mu.push(value);
    }
    Ok(mu)
}

/// An estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

/// k-statistics k₁..k_order with delete-1 jackknife standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleCumulants {
    pub sample_size: usize,
    pub k: Vec<Estimate>,
    /// k₄/k₂², present when order ≥ 4 and k₂ > 0.
    pub excess_kurtosis: Option<Estimate>,
}

#[derive(Clone, Copy)]
struct PowerSums {
    n: f64,
    s: [f64; 4],
}

impl PowerSums {
    fn k_stats(&self) -> [f64; 4] {
        let n = self.n;
        let [s1, s2, s3, s4] = self.s;
        let k1 = s1 / n;
        let k2 = (n * s2 - s1 * s1) / (n * (n - 1.0));
        let k3 = (2.0 * s1.powi(3) - 3.0 * n * s1 * s2 + n * n * s3)
            / (n * (n - 1.0) * (n - 2.0));
        let k4 = (-6.0 * s1.powi(4) + 12.0 * n * s1 * s1 * s2
            - 3.0 * n * (n - 1.0) * s2 * s2
            - 4.0 * n * (n + 1.0) * s1 * s3
            + n * n * (n + 1.0) * s4)
            / (n * (n - 1.0) * (n - 2.0) * (n - 3.0));
        [k1, k2, k3, k4]
    }

    fn without(&self, x: f64) -> Self {
        let x2 = x * x;
        Self {
            n: self.n - 1.0,
            s: [
                self.s[0] - x,
                self.s[1] - x2,
                self.s[2] - x2 * x,
                self.s[3] - x2 * x2,
            ],
        }
    }
}

/// Jackknife standard error from leave-one-out replicates.
pub(crate) fn jackknife_se(loo: impl Iterator<Item = f64>, count: usize) -> f64 {
    let values: Vec<f64> = loo.collect();
    let r = count as f64;
    let mean = values.iter().sum::<f64>() / r;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    ((r - 1.0) / r * ss).sqrt()
}

/// Unbiased k-statistics of `data` up to `order` (≤ 4).
pub fn sample_cumulants(data: &[f64], order: usize) -> Result<SampleCumulants> {
    if !(1..=4).contains(&order) {
        return Err(Error::Unsupported(format!(
            "k-statistics implemented for orders 1..=4, got {order}"
        )));
    }
    let r = data.len();
    if r < 8 * order || r < 5 {
        return Err(Error::InsufficientSample {
            needed: (8 * order).max(5),
            got: r,
        });
    }
    // k-statistics are shift-invariant beyond k₁; sums are taken about the mean.
    let shift = data.iter().sum::<f64>() / r as f64;
    let centered: Vec<f64> = data.iter().map(|x| x - shift).collect();
    let mut sums = PowerSums {
        n: r as f64,
        s: [0.0; 4],
    };
    for &x in &centered {
        let x2 = x * x;
        sums.s[0] += x;
        sums.s[1] += x2;
        sums.s[2] += x2 * x;
        sums.s[3] += x2 * x2;
    }
    let full = sums.k_stats();
    let loo: Vec<[f64; 4]> = centered.iter().map(|&x| sums.without(x).k_stats()).collect();

    let mut k = Vec::with_capacity(order);
    for i in 0..order {
        let value = if i == 0 { full[0] + shift } else { full[i] };
        let se = jackknife_se(loo.iter().map(|s| s[i]), r);
        k.push(Estimate { value, se });
    }
    let excess_kurtosis = (order >= 4 && full[1] > 0.0).then(|| {
        let value = full[3] / (full[1] * full[1]);
        let se = jackknife_se(loo.iter().map(|s| s[3] / (s[1] * s[1])), r);
        Estimate { value, se }
    });
    Ok(SampleCumulants {
        sample_size: r,
        k,
        excess_kurtosis,
    })
}

/// Smooth test functions with closed-form derivatives of every order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SmoothFn {
    /// Σ c_k ξ^k.
    Polynomial { coefficients: Vec<f64> },
    /// sin(a ξ).
    Sin { frequency: f64 },
    /// cos(a ξ).
    Cos { frequency: f64 },
    /// exp(−ξ²/(2s²)).
    GaussianBump { width: f64 },
}

impl SmoothFn {
    /// Φ^(l)(ξ).
    pub fn derivative(&self, l: usize, x: f64) -> f64 {
        match self {
            SmoothFn::Polynomial { coefficients } => {
                let mut acc = 0.0;
                for k in (l..coefficients.len()).rev() {
                    let falling = ((k - l + 1)..=k).fold(1.0, |a, i| a * i as f64);
                    acc = acc * x + coefficients[k] * falling;
                }
                acc
            }
            SmoothFn::Sin { frequency: a } => {
                a.powi(l as i32) * (a * x + l as f64 * std::f64::consts::FRAC_PI_2).sin()
            }
            SmoothFn::Cos { frequency: a } => {
                a.powi(l as i32) * (a * x + l as f64 * std::f64::consts::FRAC_PI_2).cos()
            }
            SmoothFn::GaussianBump { width: s } => {
                let u = x / s;
                let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
                sign * hermite_he(l, u) * (-0.5 * u * u).exp() / s.powi(l as i32)
            }
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.derivative(0, x)
    }

    /// sup over ℝ of |Φ^(l)|; infinite for polynomials of degree > l.
    pub fn sup_abs_derivative(&self, l: usize) -> f64 {
        match self {
            SmoothFn::Polynomial { coefficients } => {
                let degree = coefficients.iter().rposition(|&c| c != 0.0);
                match degree {
                    None => 0.0,
                    Some(d) if d < l => 0.0,
                    Some(d) if d == l => {
                        (coefficients[d] * (1..=d).fold(1.0, |a, i| a * i as f64)).abs()
                    }
                    Some(_) => f64::INFINITY,
                }
            }
            SmoothFn::Sin { frequency } | SmoothFn::Cos { frequency } => {
                frequency.abs().powi(l as i32)
            }
            SmoothFn::GaussianBump { width } => {
                // He_l(u) e^{−u²/2} peaks within |u| ≤ 2√(l+1); a fine scan is enough.
                let limit = 2.0 * ((l + 1) as f64).sqrt() + 2.0;
                let steps = 200_000;
                let mut best: f64 = 0.0;
                for i in 0..=steps {
                    let u = -limit + 2.0 * limit * i as f64 / steps as f64;
                    best = best.max((hermite_he(l, u) * (-0.5 * u * u).exp()).abs());
                }
                best / width.powi(l as i32)
            }
        }
    }
}

/// Probabilists' Hermite polynomial He_n.
pub fn hermite_he(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Outcome of one truncated cumulant-expansion check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteinResidual {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub bound: f64,
    pub within_bound: bool,
}

/// C_p ≤ (1 + (3 + 2p)^{p+2}) / (p + 1)!.
pub fn expansion_constant(p: usize) -> f64 {
    let fact: f64 = (1..=p + 1).map(|i| i as f64).product();
    (1.0 + (3.0 + 2.0 * p as f64).powi(p as i32 + 2)) / fact
}

/// Expectation E{g(ξ)} by exact atom sums (discrete laws), 256-node
/// Gauss–Hermite (Gaussian) or composite Gauss–Legendre (uniform).
pub fn expectation(dist: &EntryDistribution, g: impl Fn(f64) -> f64) -> f64 {
    match &dist.kind {
        DistKind::Gaussian => {
            let rule = gauss_hermite(256);
            rule.nodes
                .iter()
                .zip(&rule.weights)
                .map(|(&x, &wt)| wt * g(dist.w * x))
                .sum()
        }
        DistKind::Uniform => {
            let a = dist.w * 3f64.sqrt();
            let panels = 16;
            let rule = gauss_legendre(32);
            let mut total = 0.0;
            for p in 0..panels {
                let lo = -a + 2.0 * a * p as f64 / panels as f64;
                let hi = lo + 2.0 * a / panels as f64;
                let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
                for (&x, &wt) in rule.nodes.iter().zip(&rule.weights) {
                    total += wt * half * g(mid + half * x);
                }
            }
            total / (2.0 * a)
        }
        _ => dist
            .atoms()
            .expect("discrete law carries atoms")
            .iter()
            .map(|&(x, p)| p * g(x))
            .sum(),
    }
}

/// Checks E{ξΦ(ξ)} against the p-term cumulant expansion and its remainder bound.
pub fn stein_expansion_residual(
    dist: &EntryDistribution,
    phi: &SmoothFn,
    p: usize,
) -> Result<SteinResidual> {
    if p + 1 > MAX_ORDER {
        return Err(Error::Unsupported(format!(
            "expansion order p = {p} needs κ_{} beyond the supported order {MAX_ORDER}",
            p + 1
        )));
    }
    let kappa = dist.cumulants(p + 1)?;
    let abs_moment = dist.abs_moment(p + 2);
    let lhs = expectation(dist, |x| x * phi.value(x));
    let mut rhs = 0.0;
    let mut factorial = 1.0;
    for l in 0..=p {
        if l > 0 {
            factorial *= l as f64;
        }
        let k = kappa.0[l];
        if k != 0.0 {
            rhs += k / factorial * expectation(dist, |x| phi.derivative(l, x));
        }
    }
    let residual = lhs - rhs;
    let bound = expansion_constant(p) * abs_moment * phi.sup_abs_derivative(p + 1);
    // Bound may be infinite (unbounded derivative); NaN only on 0·∞.
    let bound = if bound.is_nan() { f64::INFINITY } else { bound };
    Ok(SteinResidual {
        lhs,
        rhs,
        residual,
        bound,
        within_bound: residual.abs() <= bound + 1e-12,
    })
}

/// One row of the built-in expansion suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteinCase {
    pub dist: String,
    pub phi: SmoothFn,
    pub p: usize,
    pub result: SteinResidual,
}

/// The built-in entry laws (w = 1) and smooth functions.
pub fn builtin_stein_inputs() -> Result<(Vec<(String, EntryDistribution)>, Vec<SmoothFn>)> {
    let dists = vec![
        ("gaussian".to_string(), EntryDistribution::gaussian(1.0)?),
        ("rademacher".to_string(), EntryDistribution::rademacher(1.0)?),
        ("uniform".to_string(), EntryDistribution::uniform(1.0)?),
        ("two_point_0.3".to_string(), EntryDistribution::two_point_centered(0.3, 1.0)?),
    ];
    let fns = vec![
        SmoothFn::Sin { frequency: 1.0 },
        SmoothFn::Cos { frequency: 0.7 },
        SmoothFn::GaussianBump { width: 0.8 },
        SmoothFn::Polynomial { coefficients: vec![0.5, -1.0, 0.0, 0.25] },
    ];
    Ok((dists, fns))
}

/// Every built-in (law, Φ, p) combination with p ≤ max_p.
pub fn stein_suite(max_p: usize) -> Result<Vec<SteinCase>> {
    let (dists, fns) = builtin_stein_inputs()?;
    let mut out = Vec::new();
    for (name, dist) in &dists {
        for phi in &fns {
            for p in 0..=max_p {
                out.push(SteinCase {
                    dist: name.clone(),
                    phi: phi.clone(),
                    p,
                    result: stein_expansion_residual(dist, phi, p)?,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{CounterRng, StreamCursor};

    #[test]
    fn explicit_low_order_formulas() {
        let w2 = 1.7;
        let mu4 = 6.1;
        let k = moments_to_cumulants(&[0.0, w2, 0.3, mu4]).unwrap();
        assert!((k.0[3] - (mu4 - 3.0 * w2 * w2)).abs() < 1e-14);
        let shifted = moments_to_cumulants(&[1.0, 2.0, 4.0]).unwrap();
        assert_eq!(shifted.0, vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn gaussian_moments_have_no_higher_cumulants() {
        let w2: f64 = 2.5;
        let mu = [0.0, w2, 0.0, 3.0 * w2 * w2, 0.0, 15.0 * w2.powi(3)];
        let k = moments_to_cumulants(&mu).unwrap();
        for (i, &v) in k.0.iter().enumerate() {
            let expect = if i == 1 { w2 } else { 0.0 };
            assert!((v - expect).abs() < 1e-12, "κ{} = {v}", i + 1);
        }
    }

    #[test]
    fn gaussian_cumulants_give_isserlis_moments() {
        let w2: f64 = 1.3;
        let mu = cumulants_to_moments(&CumulantVector(vec![0.0, w2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]))
            .unwrap();
        let expect = [0.0, w2, 0.0, 3.0 * w2.powi(2), 0.0, 15.0 * w2.powi(3), 0.0, 105.0 * w2.powi(4)];
        for (a, b) in mu.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
        }
        assert_eq!(
            cumulants_to_moments(&CumulantVector(vec![0.0; 5])).unwrap(),
            vec![0.0; 5]
        );
    }

    #[test]
    fn order_above_eight_is_rejected() {
        assert!(moments_to_cumulants(&[0.0; 9]).is_err());
        assert!(cumulants_to_moments(&CumulantVector(vec![0.0; 9])).is_err());
    }

    #[test]
    fn constant_data_has_vanishing_k_statistics() {
        let s = sample_cumulants(&[3.25; 64], 4).unwrap();
        assert!((s.k[0].value - 3.25).abs() < 1e-15);
        for k in &s.k[1..] {
            assert!(k.value.abs() < 1e-25);
        }
    }

    #[test]
    fn k_statistics_are_unbiased_on_small_sample() {
        // k2 of 0..19 is the unbiased variance 20·21/12 = 35.
        let data: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let small: Vec<f64> = data[..10].to_vec();
        let s = sample_cumulants(&data, 2).unwrap();
        assert!((s.k[1].value - 35.0).abs() < 1e-12);
        // A symmetric sample has k3 = 0.
        let symmetric: Vec<f64> = (-12..=12).map(f64::from).collect();
        assert!(sample_cumulants(&symmetric, 3).unwrap().k[2].value.abs() < 1e-12);
        let insufficient = sample_cumulants(&small, 4);
        assert!(matches!(insufficient, Err(Error::InsufficientSample { .. })));
    }

    #[test]
    fn gaussian_sample_fourth_k_statistic_is_near_zero() {
        let mut rng = StreamCursor::new(CounterRng::new(2024));
        let r = 1_000_000;
        let data: Vec<f64> = (0..r).map(|_| rng.normal()).collect();
        let s = sample_cumulants(&data, 4).unwrap();
        let tol = 4.0 * (24.0 / r as f64).sqrt();
        assert!(s.k[3].value.abs() < tol, "k4 = {}", s.k[3].value);
        // Jackknife se agrees with the Gaussian large-sample formula.
        let expected_se = (24.0 / r as f64).sqrt();
        assert!((s.k[3].se / expected_se - 1.0).abs() < 0.1);
    }

    #[test]
    fn rademacher_sample_fourth_k_statistic_is_minus_two() {
        let rng = CounterRng::new(77);
        let r = 1_000_000u64;
        let data: Vec<f64> = (0..r).map(|c| rng.sign(c)).collect();
        let s = sample_cumulants(&data, 4).unwrap();
        assert!((s.k[3].value + 2.0).abs() < 4.0 * s.k[3].se);
    }

    #[test]
    fn k_statistics_converge_at_root_r_rate() {
        // Synthetic two-point law with known cumulants; |k4 − κ4| ~ R^{-1/2}.
        let law = EntryDistribution::two_point_centered(0.2, 1.0).unwrap();
        let kappa4 = law.cumulants(4).unwrap().0[3];
        let rng = CounterRng::new(4242);
        let atoms = law.atoms().unwrap().to_vec();
        let sizes = [1_000usize, 10_000, 100_000, 1_000_000];
        let mut points = Vec::new();
        for (i, &r) in sizes.iter().enumerate() {
            // Root-mean-square error across independent batches.
            let batches = 64.max(2_000_000 / r).min(400);
            let mut mse = 0.0;
            for b in 0..batches {
                let data: Vec<f64> = (0..r as u64)
                    .map(|c| {
                        let u = rng.open01(((i as u64) << 56) + ((b as u64) << 36) + c);
                        if u < atoms[0].1 { atoms[0].0 } else { atoms[1].0 }
                    })
                    .collect();
                let k4 = sample_cumulants(&data, 4).unwrap().k[3].value;
                mse += (k4 - kappa4).powi(2);
            }
            let rmse = (mse / batches as f64).sqrt();
            points.push(((r as f64).ln(), rmse.ln()));
        }
        let slope = crate::stats::ols_slope(&points);
        assert!((slope + 0.5).abs() <= 0.1, "slope {slope}");
    }

    #[test]
    fn gaussian_sine_identity_is_exact() {
        let g = EntryDistribution::gaussian(1.0).unwrap();
        let sin = SmoothFn::Sin { frequency: 1.0 };
        // E{ξ sin ξ} = w² E{cos ξ}: the l = 1 term carries everything.
        let out = stein_expansion_residual(&g, &sin, 1).unwrap();
        let closed = (-0.5f64).exp();
        assert!((out.lhs - closed).abs() < 1e-10);
        assert!((out.rhs - closed).abs() < 1e-10);
        assert!(out.residual.abs() < 1e-10);
        // With only the κ₁ term the whole of E{ξΦ} is remainder, still within (b3).
        let bare = stein_expansion_residual(&g, &sin, 0).unwrap();
        assert!((bare.residual - closed).abs() < 1e-10 && bare.within_bound);
        for p in 1..=4 {
            assert!(stein_expansion_residual(&g, &sin, p).unwrap().residual.abs() < 1e-10);
        }
    }

    #[test]
    fn builtin_suite_respects_the_bound() {
        let cases = stein_suite(4).unwrap();
        assert_eq!(cases.len(), 4 * 4 * 5);
        for c in &cases {
            assert!(c.result.within_bound, "{c:?}");
        }
    }

    #[test]
    fn rademacher_two_atom_cases() {
        let r = EntryDistribution::rademacher(1.0).unwrap();
        let quad = SmoothFn::Polynomial { coefficients: vec![0.0, 0.0, 1.0] };
        let a = stein_expansion_residual(&r, &quad, 1).unwrap();
        assert_eq!((a.lhs, a.rhs, a.residual), (0.0, 0.0, 0.0));

        let cubic = SmoothFn::Polynomial { coefficients: vec![0.0, 0.0, 0.0, 1.0] };
        let b = stein_expansion_residual(&r, &cubic, 2).unwrap();
        assert!((b.lhs - 1.0).abs() < 1e-15);
        assert!((b.rhs - 3.0).abs() < 1e-15);
        assert!((b.residual + 2.0).abs() < 1e-15);
        assert!((expansion_constant(2) - (1.0 + 7f64.powi(4)) / 6.0).abs() < 1e-12);
        assert!((b.bound - expansion_constant(2) * 6.0).abs() < 1e-9);
        assert!(b.within_bound);
    }

    #[test]
    fn derivative_formulas_match_finite_differences() {
        let fns = [
            SmoothFn::Polynomial { coefficients: vec![1.0, -2.0, 0.5, 3.0] },
            SmoothFn::Sin { frequency: 1.3 },
            SmoothFn::Cos { frequency: 0.7 },
            SmoothFn::GaussianBump { width: 0.8 },
        ];
        let h = 1e-5;
        for f in &fns {
            for l in 0..4 {
                for &x in &[-1.1, 0.0, 0.4, 2.0] {
                    let fd = (f.derivative(l, x + h) - f.derivative(l, x - h)) / (2.0 * h);
                    let exact = f.derivative(l + 1, x);
                    assert!((fd - exact).abs() < 1e-6 * (1.0 + exact.abs()), "{f:?} l={l} x={x}");
                }
            }
        }
    }
}
