//! Test functions φ with exactly integrable representations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
    None,
}

/// How φ is represented.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Repr {
    /// Σ c_k λ^k.
    Polynomial { coefficients: Vec<f64> },
    /// e^{−λ²/(2s²)} Σ c_k λ^k.
    GaussianDampedPolynomial { coefficients: Vec<f64>, width: f64 },
    /// Piecewise-linear interpolation of (grid, values); constant beyond the ends.
    Tabulated { grid: Vec<f64>, values: Vec<f64> },
}

/// A real test function together with its analysed parity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Repr", into = "Repr")]
pub struct TestFunction {
    repr: Repr,
    parity: Parity,
}

impl TryFrom<Repr> for TestFunction {
    type Error = Error;

    fn try_from(repr: Repr) -> Result<Self> {
        TestFunction::new(repr)
    }
}

impl From<TestFunction> for Repr {
    fn from(f: TestFunction) -> Repr {
        f.repr
    }
}

fn coefficient_parity(c: &[f64]) -> Parity {
    let even = c.iter().skip(1).step_by(2).all(|&v| v == 0.0);
    let odd = c.iter().step_by(2).all(|&v| v == 0.0);
    match (even, odd) {
        // The zero function is even by convention.
        (true, _) => Parity::Even,
        (false, true) => Parity::Odd,
        _ => Parity::None,
    }
}

impl TestFunction {
    pub fn new(repr: Repr) -> Result<Self> {
        let parity = match &repr {
            Repr::Polynomial { coefficients } => {
                check_finite(coefficients, "coefficients")?;
                coefficient_parity(coefficients)
            }
            Repr::GaussianDampedPolynomial { coefficients, width } => {
                check_finite(coefficients, "coefficients")?;
                if !(width.is_finite() && *width > 0.0) {
                    return Err(Error::schema("width", format!("envelope width must be positive, got {width}")));
                }
                coefficient_parity(coefficients)
            }
            Repr::Tabulated { grid, values } => {
                check_finite(grid, "grid")?;
                check_finite(values, "values")?;
                if grid.len() != values.len() || grid.len() < 2 {
                    return Err(Error::schema("values", "tabulated grid and values need equal length ≥ 2"));
                }
                if grid.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::schema("grid", "tabulated grid must be strictly increasing"));
                }
                tabulated_parity(grid, values)
            }
        };
        Ok(Self { repr, parity })
    }

    pub fn polynomial(coefficients: Vec<f64>) -> Self {
        Self::new(Repr::Polynomial { coefficients }).expect("finite coefficients")
    }

    /// λ^k.
    pub fn monomial(k: usize) -> Self {
        let mut c = vec![0.0; k + 1];
        c[k] = 1.0;
        Self::polynomial(c)
    }

    pub fn gaussian_damped(coefficients: Vec<f64>, width: f64) -> Result<Self> {
        Self::new(Repr::GaussianDampedPolynomial { coefficients, width })
    }

    pub fn tabulated(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(Repr::Tabulated { grid, values })
    }

    pub fn repr(&self) -> &Repr {
        &self.repr
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    /// Polynomial coefficients when φ is a plain polynomial.
    pub fn as_polynomial(&self) -> Option<&[f64]> {
        match &self.repr {
            Repr::Polynomial { coefficients } => Some(coefficients),
            _ => None,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.repr {
            Repr::Polynomial { coefficients } => horner(coefficients, x),
            Repr::GaussianDampedPolynomial { coefficients, width } => {
                horner(coefficients, x) * (-0.5 * (x / width).powi(2)).exp()
            }
            Repr::Tabulated { grid, values } => {
                let last = grid.len() - 1;
                if x <= grid[0] {
                    return values[0];
                }
                if x >= grid[last] {
                    return values[last];
                }
                let i = grid.partition_point(|&g| g <= x) - 1;
                let frac = (x - grid[i]) / (grid[i + 1] - grid[i]);
                values[i] + frac * (values[i + 1] - values[i])
            }
        }
    }

    /// φ′(x); the right-hand slope for tabulated functions.
    pub fn derivative(&self, x: f64) -> f64 {
        match &self.repr {
            Repr::Polynomial { coefficients } => horner_derivative(coefficients, x),
            Repr::GaussianDampedPolynomial { coefficients, width } => {
                let env = (-0.5 * (x / width).powi(2)).exp();
                env * (horner_derivative(coefficients, x) - x / (width * width) * horner(coefficients, x))
            }
            Repr::Tabulated { grid, values } => {
                let last = grid.len() - 1;
                if x < grid[0] || x >= grid[last] {
                    return 0.0;
                }
                let i = grid.partition_point(|&g| g <= x) - 1;
                (values[i + 1] - values[i]) / (grid[i + 1] - grid[i])
            }
        }
    }

    /// (φ(a) − φ(b))/(a − b), with the derivative at the midpoint on the diagonal.
    pub fn divided_difference(&self, a: f64, b: f64) -> f64 {
        if (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs())) {
            self.derivative(0.5 * (a + b))
        } else {
            (self.eval(a) - self.eval(b)) / (a - b)
        }
    }

    /// Linear combination a·self + b·other of two polynomials.
    pub fn combine(&self, a: f64, other: &TestFunction, b: f64) -> Option<TestFunction> {
        let (p, q) = (self.as_polynomial()?, other.as_polynomial()?);
        let len = p.len().max(q.len());
        let c = (0..len)
            .map(|k| a * p.get(k).copied().unwrap_or(0.0) + b * q.get(k).copied().unwrap_or(0.0))
            .collect();
        Some(TestFunction::polynomial(c))
    }
}

fn check_finite(xs: &[f64], field: &str) -> Result<()> {
    if xs.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::schema(field, "values must be finite"))
    }
}

fn tabulated_parity(grid: &[f64], values: &[f64]) -> Parity {
    let n = grid.len();
    let mirrored = (0..n).all(|i| grid[i] == -grid[n - 1 - i]);
    if !mirrored {
        return Parity::None;
    }
    if (0..n).all(|i| values[i] == values[n - 1 - i]) {
        Parity::Even
    } else if (0..n).all(|i| values[i] == -values[n - 1 - i]) {
        Parity::Odd
    } else {
        Parity::None
    }
}

pub(crate) fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck)
}

fn horner_derivative(c: &[f64], x: f64) -> f64 {
    c.iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (k, &ck)| acc * x + k as f64 * ck)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parity_from_coefficients() {
        assert_eq!(TestFunction::monomial(3).parity(), Parity::Odd);
        assert_eq!(TestFunction::monomial(4).parity(), Parity::Even);
        assert_eq!(TestFunction::polynomial(vec![1.0, 1.0]).parity(), Parity::None);
        assert_eq!(TestFunction::polynomial(vec![2.0]).parity(), Parity::Even);
        let damped = TestFunction::gaussian_damped(vec![0.0, 1.0], 1.5).unwrap();
        assert_eq!(damped.parity(), Parity::Odd);
    }

    #[test]
    fn evaluation() {
        let p = TestFunction::polynomial(vec![1.0, -2.0, 3.0]);
        assert_eq!(p.eval(2.0), 9.0);
        let t = TestFunction::tabulated(vec![-1.0, 0.0, 1.0], vec![1.0, 0.0, 1.0]).unwrap();
        assert_eq!(t.parity(), Parity::Even);
        assert!((t.eval(0.25) - 0.25).abs() < 1e-15);
        assert_eq!(t.eval(5.0), 1.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let fs = [
            TestFunction::polynomial(vec![1.0, -2.0, 0.5, 3.0]),
            TestFunction::gaussian_damped(vec![0.3, 1.0, -0.5], 1.7).unwrap(),
        ];
        for f in &fs {
            for &x in &[-1.3, 0.0, 0.4, 2.2] {
                let h = 1e-5;
                let fd = (f.eval(x + h) - f.eval(x - h)) / (2.0 * h);
                assert!((f.derivative(x) - fd).abs() < 1e-8, "{x}");
                assert!((f.divided_difference(x, x) - f.derivative(x)).abs() < 1e-15);
            }
        }
        let t = TestFunction::tabulated(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 3.0]).unwrap();
        assert_eq!(t.derivative(0.5), 2.0);
        assert_eq!(t.derivative(2.0), 0.5);
        assert_eq!(t.derivative(4.0), 0.0);
        assert_eq!(t.divided_difference(0.0, 3.0), 1.0);
    }

    #[test]
    fn serde_round_trip_recomputes_parity() {
        let json = r#"{"kind":"polynomial","coefficients":[0,0,0,1]}"#;
        let f: TestFunction = serde_json::from_str(json).unwrap();
        assert_eq!(f.parity(), Parity::Odd);
        let back = serde_json::to_string(&f).unwrap();
        let again: TestFunction = serde_json::from_str(&back).unwrap();
        assert_eq!(f, again);
        let bad = r#"{"kind":"polynomial","coefficients":[0,1],"imag_coefficients":[1]}"#;
        assert!(serde_json::from_str::<TestFunction>(bad).is_err());
    }
}
