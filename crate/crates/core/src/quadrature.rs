//! Classical Gaussian rules used outside the semicircle calculus.

use std::sync::OnceLock;

use crate::spectral::tridiagonal_eigen_first_row;

/// Nodes and weights of a one-dimensional rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    /// Σ wᵢ f(xᵢ).
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Gauss–Legendre on [−1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Rule { nodes, weights }
}

/// Gauss–Legendre mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> Rule {
    let base = gauss_legendre(n);
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    Rule {
        nodes: base.nodes.iter().map(|x| mid + half * x).collect(),
        weights: base.weights.iter().map(|w| w * half).collect(),
    }
}

/// Composite Gauss–Legendre on [a, b] with `panels` equal panels.
pub fn composite_legendre(order: usize, panels: usize, a: f64, b: f64) -> Rule {
    let base = gauss_legendre(order);
    let width = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(order * panels);
    let mut weights = Vec::with_capacity(order * panels);
    for p in 0..panels {
        let mid = a + width * (p as f64 + 0.5);
        for (&x, &w) in base.nodes.iter().zip(&base.weights) {
            nodes.push(mid + 0.5 * width * x);
            weights.push(0.5 * width * w);
        }
    }
    Rule { nodes, weights }
}

/// Gauss–Hermite for the standard normal measure (weights sum to 1),
/// by Golub–Welsch on the Jacobi matrix of He_n.
pub fn gauss_hermite(n: usize) -> Rule {
    static CACHE_256: OnceLock<Rule> = OnceLock::new();
    if n == 256 {
        return CACHE_256.get_or_init(|| hermite_rule(256)).clone();
    }
    hermite_rule(n)
}

fn hermite_rule(n: usize) -> Rule {
    let diag = vec![0.0; n];
    let off: Vec<f64> = (1..n).map(|k| (k as f64).sqrt()).collect();
    let (nodes, first) = tridiagonal_eigen_first_row(&diag, &off)
        .expect("Hermite Jacobi matrix is well conditioned");
    let weights = first.iter().map(|q| q * q).collect();
    Rule { nodes, weights }
}
