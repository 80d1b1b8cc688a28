//! Entry distributions and sampling of real symmetric Wigner matrices.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cumulants::{moments_to_cumulants, CumulantVector, MAX_ORDER};
use crate::error::{Error, Result};
use crate::rng::CounterRng;

/// Number of raw moments kept on every distribution.
pub const STORED_MOMENTS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistKind {
    Gaussian,
    Rademacher,
    TwoPoint,
    Uniform,
    DiscreteCustom,
}

/// Exact characteristic function of the entry law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum CfClosedForm {
    /// exp(−w²x²/2).
    Gaussian { w: f64 },
    /// cos(wx).
    Cosine { w: f64 },
    /// sin(ax)/(ax).
    Sinc { a: f64 },
    /// Σ p_k e^{ix a_k} over the atoms.
    FiniteSum,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntryDistribution {
    pub kind: DistKind,
    pub w: f64,
    /// μ₁..μ₆.
    pub moments: Vec<f64>,
    /// κ₁..κ₆.
    pub cumulants: Vec<f64>,
    pub cf_closed_form: Option<CfClosedForm>,
    atoms: Option<Vec<(f64, f64)>>,
    /// Cumulative probabilities for inverse-CDF sampling of atoms.
    #[serde(skip)]
    cdf: Vec<f64>,
}

/// Optional parameters for [`make_entry_distribution`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistParams {
    /// Probability of the positive atom of a centered two-point law.
    pub p: Option<f64>,
    /// (value, probability) pairs.
    pub atoms: Option<Vec<(f64, f64)>>,
}

fn check_scale(w: f64) -> Result<()> {
    if w.is_finite() && w > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidDistribution(format!(
            "scale w must be positive and finite, got {w}"
        )))
    }
}

fn double_factorial(k: usize) -> f64 {
    (1..=k).rev().step_by(2).map(|i| i as f64).product()
}

impl EntryDistribution {
    fn finish(kind: DistKind, w: f64, cf: Option<CfClosedForm>, atoms: Option<Vec<(f64, f64)>>) -> Result<Self> {
        let mut dist = Self {
            kind,
            w,
            moments: Vec::new(),
            cumulants: Vec::new(),
            cf_closed_form: cf,
            atoms,
            cdf: Vec::new(),
        };
        if let Some(atoms) = &dist.atoms {
            let mut acc = 0.0;
            dist.cdf = atoms
                .iter()
                .map(|&(_, p)| {
                    acc += p;
                    acc
                })
                .collect();
        }
        dist.moments = (1..=STORED_MOMENTS).map(|k| dist.raw_moment(k)).collect();
        dist.moments[0] = 0.0;
        dist.moments[1] = w * w;
        dist.cumulants = moments_to_cumulants(&dist.moments)?.0;
        Ok(dist)
    }

    pub fn gaussian(w: f64) -> Result<Self> {
        check_scale(w)?;
        Self::finish(DistKind::Gaussian, w, Some(CfClosedForm::Gaussian { w }), None)
    }

    /// ±w with probability ½ each.
    pub fn rademacher(w: f64) -> Result<Self> {
        check_scale(w)?;
        Self::finish(
            DistKind::Rademacher,
            w,
            Some(CfClosedForm::Cosine { w }),
            Some(vec![(-w, 0.5), (w, 0.5)]),
        )
    }

    /// Uniform on [−w√3, w√3].
    pub fn uniform(w: f64) -> Result<Self> {
        check_scale(w)?;
        let a = w * 3f64.sqrt();
        Self::finish(DistKind::Uniform, w, Some(CfClosedForm::Sinc { a }), None)
    }

    /// Centered two-point law: w√((1−p)/p) with probability p, −w√(p/(1−p)) otherwise.
    pub fn two_point_centered(p: f64, w: f64) -> Result<Self> {
        check_scale(w)?;
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidDistribution(format!(
                "two-point probability must lie in (0, 1), got {p}"
            )));
        }
        let hi = w * ((1.0 - p) / p).sqrt();
        let lo = -w * (p / (1.0 - p)).sqrt();
        Self::finish(
            DistKind::TwoPoint,
            w,
            Some(CfClosedForm::FiniteSum),
            Some(vec![(lo, 1.0 - p), (hi, p)]),
        )
    }

    /// Finite law from (value, probability) pairs; must have mean 0 and variance w².
    pub fn discrete(kind: DistKind, w: f64, atoms: Vec<(f64, f64)>) -> Result<Self> {
        check_scale(w)?;
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("no atoms supplied".into()));
        }
        if let Some(&(x, p)) = atoms.iter().find(|a| !(a.1 >= 0.0) || !a.0.is_finite()) {
            return Err(Error::InvalidDistribution(format!(
                "atom {x} has invalid probability {p}"
            )));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-14 {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        let scale: f64 = atoms.iter().map(|a| a.0.abs()).fold(w, f64::max);
        let mean: f64 = atoms.iter().map(|a| a.0 * a.1).sum();
        if mean.abs() > 1e-12 * scale {
            return Err(Error::InvalidDistribution(format!(
                "atoms have mean {mean}, not 0"
            )));
        }
        let var: f64 = atoms.iter().map(|a| a.0 * a.0 * a.1).sum();
        if (var - w * w).abs() > 1e-12 * scale * scale {
            return Err(Error::InvalidDistribution(format!(
                "atoms have variance {var}, expected w² = {}",
                w * w
            )));
        }
        Self::finish(kind, w, Some(CfClosedForm::FiniteSum), Some(atoms))
    }

    pub fn atoms(&self) -> Option<&[(f64, f64)]> {
        self.atoms.as_deref()
    }

    /// E{ξ^k}, exact for every k.
    pub fn raw_moment(&self, k: usize) -> f64 {
        if k == 0 {
            return 1.0;
        }
        match self.kind {
            DistKind::Gaussian => {
                if k % 2 == 1 {
                    0.0
                } else {
                    self.w.powi(k as i32) * double_factorial(k - 1)
                }
            }
            DistKind::Uniform => {
                if k % 2 == 1 {
                    0.0
                } else {
                    (self.w * 3f64.sqrt()).powi(k as i32) / (k + 1) as f64
                }
            }
            _ => self.atom_sum(|x| x.powi(k as i32)),
        }
    }

    /// E{|ξ|^k}.
    pub fn abs_moment(&self, k: usize) -> f64 {
        match self.kind {
            DistKind::Gaussian => {
                let base = if k % 2 == 0 {
                    double_factorial(k.saturating_sub(1))
                } else {
                    (2.0 / std::f64::consts::PI).sqrt() * double_factorial(k - 1)
                };
                self.w.powi(k as i32) * base
            }
            DistKind::Uniform => (self.w * 3f64.sqrt()).powi(k as i32) / (k + 1) as f64,
            _ => self.atom_sum(|x| x.abs().powi(k as i32)),
        }
    }

    fn atom_sum(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.atoms
            .as_ref()
            .expect("discrete law carries atoms")
            .iter()
            .map(|&(x, p)| p * f(x))
            .sum()
    }

    /// κ₁..κ_order, computed on demand beyond the stored six.
    pub fn cumulants(&self, order: usize) -> Result<CumulantVector> {
        if order > MAX_ORDER {
            return Err(Error::Unsupported(format!(
                "cumulant order {order} exceeds {MAX_ORDER}"
            )));
        }
        if order <= self.cumulants.len() {
            return Ok(CumulantVector(self.cumulants[..order].to_vec()));
        }
        let mut mu: Vec<f64> = (1..=order).map(|k| self.raw_moment(k)).collect();
        mu[0] = 0.0;
        mu[1] = self.w * self.w;
        moments_to_cumulants(&mu)
    }

    pub fn kappa4(&self) -> f64 {
        self.cumulants[3]
    }

    /// One draw at `counter` of the stream.
    #[inline]
    pub fn draw(&self, rng: &CounterRng, counter: u64) -> f64 {
        match self.kind {
            DistKind::Gaussian => self.w * rng.normal(counter),
            DistKind::Rademacher => self.w * rng.sign(counter),
            DistKind::Uniform => self.w * 3f64.sqrt() * (2.0 * rng.open01(counter) - 1.0),
            DistKind::TwoPoint | DistKind::DiscreteCustom => {
                let atoms = self.atoms.as_ref().expect("discrete law carries atoms");
                let u = rng.open01(counter);
                let idx = self.cdf.partition_point(|&c| c <= u).min(atoms.len() - 1);
                atoms[idx].0
            }
        }
    }
}

/// Builds a distribution from a kind tag, scale and optional parameters.
pub fn make_entry_distribution(kind: DistKind, w: f64, params: &DistParams) -> Result<EntryDistribution> {
    match kind {
        DistKind::Gaussian => EntryDistribution::gaussian(w),
        DistKind::Rademacher => EntryDistribution::rademacher(w),
        DistKind::Uniform => EntryDistribution::uniform(w),
        DistKind::TwoPoint => match (&params.p, &params.atoms) {
            (Some(p), None) => EntryDistribution::two_point_centered(*p, w),
            (None, Some(atoms)) if atoms.len() == 2 => {
                EntryDistribution::discrete(DistKind::TwoPoint, w, atoms.clone())
            }
            _ => Err(Error::InvalidDistribution(
                "two_point needs either `p` or exactly two `atoms`".into(),
            )),
        },
        DistKind::DiscreteCustom => match &params.atoms {
            Some(atoms) => EntryDistribution::discrete(DistKind::DiscreteCustom, w, atoms.clone()),
            None => Err(Error::InvalidDistribution("discrete_custom needs `atoms`".into())),
        },
    }
}

/// E{e^{ixV}} of the entry law.
pub fn entry_cf(dist: &EntryDistribution, x: f64) -> Result<Complex64> {
    match dist.cf_closed_form {
        Some(CfClosedForm::Gaussian { w }) => Ok(Complex64::new((-0.5 * w * w * x * x).exp(), 0.0)),
        Some(CfClosedForm::Cosine { w }) => Ok(Complex64::new((w * x).cos(), 0.0)),
        Some(CfClosedForm::Sinc { a }) => {
            let ax = a * x;
            let v = if ax.abs() < 1e-8 { 1.0 - ax * ax / 6.0 } else { ax.sin() / ax };
            Ok(Complex64::new(v, 0.0))
        }
        Some(CfClosedForm::FiniteSum) | None => match dist.atoms() {
            Some(atoms) => Ok(atoms
                .iter()
                .map(|&(a, p)| Complex64::from_polar(p, a * x))
                .sum()),
            None => Err(Error::Unsupported(format!(
                "no characteristic function available for {:?}",
                dist.kind
            ))),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// W_jk = (1 + δ_jk)^{1/2} V_jk.
    #[default]
    PaperSymmetric,
    /// Gaussian entries with Var W_jj = 2w².
    Goe,
    /// Diagonal variance w2·w², entries still drawn from the entry law.
    GeneralDiagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSpec {
    pub entry_dist: EntryDistribution,
    pub convention: Convention,
    pub w2: f64,
}

impl EnsembleSpec {
    pub fn new(entry_dist: EntryDistribution, convention: Convention, w2: f64) -> Result<Self> {
        match convention {
            Convention::PaperSymmetric | Convention::Goe if w2 != 2.0 => {
                return Err(Error::InvalidEnsemble(format!(
                    "{convention:?} fixes the diagonal ratio w2 = 2, got {w2}"
                )))
            }
            Convention::Goe if entry_dist.kind != DistKind::Gaussian => {
                return Err(Error::InvalidEnsemble("goe requires gaussian entries".into()))
            }
            Convention::GeneralDiagonal if !(w2.is_finite() && w2 > 0.0) => {
                return Err(Error::InvalidEnsemble(format!(
                    "diagonal variance ratio must be positive, got {w2}"
                )))
            }
            _ => {}
        }
        Ok(Self {
            entry_dist,
            convention,
            w2,
        })
    }

    pub fn goe(w: f64) -> Result<Self> {
        Self::new(EntryDistribution::gaussian(w)?, Convention::Goe, 2.0)
    }

    pub fn paper_symmetric(entry_dist: EntryDistribution) -> Result<Self> {
        Self::new(entry_dist, Convention::PaperSymmetric, 2.0)
    }

    pub fn w(&self) -> f64 {
        self.entry_dist.w
    }

    pub fn kappa4(&self) -> f64 {
        self.entry_dist.kappa4()
    }

    /// The factor multiplying a diagonal draw V_jj.
    pub fn diagonal_factor(&self) -> f64 {
        self.w2.sqrt()
    }
}

/// Packed lower-triangular storage of M = n^{-1/2} W.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    pub n: usize,
    /// Row-major lower triangle: entry (i, j), j ≤ i, at i(i+1)/2 + j.
    pub data: Vec<f64>,
    pub seed: u64,
    pub replica: u64,
}

#[inline]
pub fn packed_index(i: usize, j: usize) -> usize {
    let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
    hi * (hi + 1) / 2 + lo
}

impl SymmetricMatrix {
    pub fn from_packed(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * (n + 1) / 2);
        Self { n, data, seed: 0, replica: 0 }
    }

    /// From a dense row-major matrix; only the lower triangle is read.
    pub fn from_dense(n: usize, dense: &[f64]) -> Self {
        let mut data = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            data.extend_from_slice(&dense[i * n..i * n + i + 1]);
        }
        Self::from_packed(n, data)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[packed_index(i, j)]
    }

    pub fn row_lower(&self, i: usize) -> &[f64] {
        let start = i * (i + 1) / 2;
        &self.data[start..start + i + 1]
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for (j, &v) in self.row_lower(i).iter().enumerate() {
                out[i * n + j] = v;
                out[j * n + i] = v;
            }
        }
        out
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// y = M x in one pass over the packed data.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n {
            let row = self.row_lower(i);
            let xi = x[i];
            let mut acc = 0.0;
            for j in 0..i {
                acc += row[j] * x[j];
                y[j] += row[j] * xi;
            }
            y[i] += acc + row[i] * xi;
        }
    }
}

/// Draws replica `replica` of the n×n ensemble for `seed`.
///
/// Entry (i, j) uses the packed index as its counter on the stream keyed by
/// `derive_seed(seed, [n, replica])`, so any entry can be regenerated alone.
pub fn sample_matrix(spec: &EnsembleSpec, n: usize, seed: u64, replica: u64) -> Result<SymmetricMatrix> {
    if n < 2 {
        return Err(Error::InvalidEnsemble(format!("matrix size must be at least 2, got {n}")));
    }
    let rng = CounterRng::from_labels(seed, &[n as u64, replica]);
    let scale = 1.0 / (n as f64).sqrt();
    let diag = spec.diagonal_factor() * scale;
    let dist = &spec.entry_dist;
    let mut data = Vec::with_capacity(n * (n + 1) / 2);
    let mut counter = 0u64;
    for i in 0..n {
        for _ in 0..i {
            data.push(scale * dist.draw(&rng, counter));
            counter += 1;
        }
        data.push(diag * dist.draw(&rng, counter));
        counter += 1;
    }
    Ok(SymmetricMatrix { n, data, seed, replica })
}
